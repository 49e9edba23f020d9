//! Built-in models and the JSON model-file format.

use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Observable, ObservableKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `X` uniform on `{−1, 1}`, `F = Π x_j`.
    RademacherProduct,
    /// `X` uniform on `{0, 1}`, `F = Π x_j − 2^{−ℓ}`.
    BernoulliProduct,
    /// `X` uniform on `{−1, 1}`, `F = 1{all x_j equal} − 2^{1−ℓ}`.
    IndicatorMatch,
}

impl Preset {
    pub const ALL: [Preset; 3] = [
        Preset::RademacherProduct,
        Preset::BernoulliProduct,
        Preset::IndicatorMatch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::RademacherProduct => "rademacher-product",
            Preset::BernoulliProduct => "bernoulli-product",
            Preset::IndicatorMatch => "indicator-match",
        }
    }

    pub fn build(&self, ell: usize) -> Result<Model> {
        let (dist, obs) = match self {
            Preset::RademacherProduct => {
                let d = FiniteDistribution::uniform(vec![-1.0, 1.0])?;
                let f = Observable::product(&d, ell)?;
                (d, f)
            }
            Preset::BernoulliProduct => {
                let d = FiniteDistribution::uniform(vec![0.0, 1.0])?;
                let f = Observable::product(&d, ell)?.center();
                (d, f)
            }
            Preset::IndicatorMatch => {
                let d = FiniteDistribution::uniform(vec![-1.0, 1.0])?;
                let f = Observable::indicator_equal(&d, ell)?.center();
                (d, f)
            }
        };
        Ok(Model { dist, obs })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::input(format!(
                    "unknown preset `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// A distribution together with an observable on it.
#[derive(Debug, Clone)]
pub struct Model {
    pub dist: FiniteDistribution,
    pub obs: Observable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    values: Vec<f64>,
    probs: Vec<f64>,
    ell: usize,
    kind: ObservableKind,
    #[serde(default)]
    table: Option<Vec<f64>>,
    #[serde(default = "default_center")]
    center: bool,
}

fn default_center() -> bool {
    true
}

impl Model {
    /// Parse a model file: `values`, `probs`, `ell`, `kind`, optional `table`
    /// (flat, row-major, length `s^ℓ`) and optional `center` (default true).
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::input(format!("model file: {e}")))?;
        let dist = FiniteDistribution::new(f.values, f.probs)?;
        let obs = Observable::build(&dist, f.ell, f.kind, f.table)?;
        let obs = if f.center { obs.center() } else { obs };
        Ok(Model { dist, obs })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_centered_and_nondegenerate() {
        for p in Preset::ALL {
            for ell in 1..=4 {
                if p == Preset::IndicatorMatch && ell == 1 {
                    continue;
                }
                let m = p.build(ell).unwrap();
                assert!(m.obs.is_centered(), "{} ell={ell}", p.name());
                assert!(!m.obs.is_degenerate(), "{} ell={ell}", p.name());
                assert_eq!(m.obs.ell(), ell);
            }
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        // with a single coordinate the match indicator is identically 1
        assert!(Preset::IndicatorMatch.build(1).unwrap().obs.is_degenerate());
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn bernoulli_and_indicator_values() {
        let b = Preset::BernoulliProduct.build(2).unwrap();
        assert_eq!(b.obs.sup_pos(), 0.75);
        assert_eq!(b.obs.sup_neg(), 0.25);
        let i = Preset::IndicatorMatch.build(2).unwrap();
        assert_eq!(i.obs.evaluate(&[1, 1]).unwrap(), 0.5);
        assert_eq!(i.obs.evaluate(&[0, 1]).unwrap(), -0.5);
    }

    #[test]
    fn parses_model_files() {
        let m = Model::from_json(r#"{"values":[-1,1],"probs":[0.5,0.5],"ell":2,"kind":"product"}"#)
            .unwrap();
        assert_eq!(m.obs.evaluate(&[0, 1]).unwrap(), -1.0);
        let m = Model::from_json(
            r#"{"values":[0,1],"probs":[0.5,0.5],"ell":2,"kind":"table","table":[0,0,0,1],"center":false}"#,
        )
        .unwrap();
        assert_eq!(m.obs.mean(), 0.25);
        for bad in [
            r#"{"values":[0,1],"probs":[0.5,0.5],"ell":2,"kind":"table"}"#,
            r#"{"values":[0,1],"probs":[0.5,0.5],"ell":2,"kind":"table","table":[0,0,1]}"#,
            r#"{"values":[0,1],"probs":[0.6,0.5],"ell":2,"kind":"product"}"#,
            r#"{"values":[0,1],"probs":[0.5,0.5],"ell":2,"kind":"sum"}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(Model::from_json(bad), Err(Error::Input(_))),
                "{bad}"
            );
        }
    }
}
