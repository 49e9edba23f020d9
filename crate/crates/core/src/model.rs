//! Finite-support input laws and bounded observables on `ℝ^ℓ`.
//!
//! An [`Observable`] is materialized as a dense row-major table over
//! `ℓ`-tuples of support indices, so every moment and sup-norm below is an
//! exact finite sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Largest table an observable may materialize (`s^ℓ` cells).
pub const MAX_TABLE_CELLS: usize = 1_000_000;

const PROB_SUM_TOL: f64 = 1e-12;

/// Law of `X₁`: finitely many support points with positive probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input(
                "distribution needs at least one support point",
            ));
        }
        if values.len() != probs.len() {
            return Err(Error::input(format!(
                "{} support values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("support values must be finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("support values must be strictly increasing"));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::input("probabilities must be positive and finite"));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(Self { values, probs, cdf })
    }

    /// Equal mass on each of `values`.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        let probs = vec![1.0 / n as f64; values.len()];
        Self::new(values, probs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// Running sums of the probabilities; the last entry is 1 up to rounding.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Support index hit by a uniform draw `u ∈ [0, 1)`.
    pub fn quantile_index(&self, u: f64) -> usize {
        let last = self.cdf.len() - 1;
        self.cdf[..last].partition_point(|&c| c <= u)
    }
}

/// Constructor kinds accepted by the observable specification file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// `F(x) = x₁·x₂·…·x_ℓ`
    Product,
    /// `F(x) = 1{x₁ = x₂ = … = x_ℓ}`
    IndicatorEqual,
    /// user-supplied row-major table
    Table,
}

/// Bounded observable `F` tabulated over `ℓ`-tuples of support indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observable {
    ell: usize,
    support: usize,
    table: Vec<f64>,
    /// μ^ℓ-probability of each cell, same layout as `table`.
    #[serde(skip)]
    cell_probs: Vec<f64>,
    /// Law of `F(X₁, …, X_ℓ)`: distinct values ascending with their masses.
    #[serde(skip)]
    law: Vec<(f64, f64)>,
    mean: f64,
    variance: f64,
    sup_abs: f64,
    sup_pos: f64,
    sup_neg: f64,
}

impl Observable {
    /// Materialize `F` from a row-major table of length `s^ℓ`.
    pub fn from_table(dist: &FiniteDistribution, ell: usize, table: Vec<f64>) -> Result<Self> {
        let s = dist.support_size();
        let cells = table_cells(s, ell)?;
        if table.len() != cells {
            return Err(Error::input(format!(
                "table has {} entries, expected s^ell = {}^{} = {}",
                table.len(),
                s,
                ell,
                cells
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("observable table entries must be finite"));
        }
        let cell_probs = cell_probabilities(dist.probs(), ell);
        Ok(Self::with_stats(ell, s, table, cell_probs))
    }

    /// Materialize `F` by evaluating `f` on the real support values of every tuple.
    pub fn from_fn<F>(dist: &FiniteDistribution, ell: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let s = dist.support_size();
        let cells = table_cells(s, ell)?;
        let mut point = vec![0.0; ell];
        let mut digits = vec![0usize; ell];
        let mut table = Vec::with_capacity(cells);
        for cell in 0..cells {
            decode_cell(cell, s, &mut digits);
            for (x, &d) in point.iter_mut().zip(&digits) {
                *x = dist.values()[d];
            }
            table.push(f(&point));
        }
        Self::from_table(dist, ell, table)
    }

    pub fn product(dist: &FiniteDistribution, ell: usize) -> Result<Self> {
        Self::from_fn(dist, ell, |x| x.iter().product())
    }

    pub fn indicator_equal(dist: &FiniteDistribution, ell: usize) -> Result<Self> {
        Self::from_fn(dist, ell, |x| {
            if x.windows(2).all(|w| w[0] == w[1]) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn constant(dist: &FiniteDistribution, ell: usize, c: f64) -> Result<Self> {
        Self::from_fn(dist, ell, |_| c)
    }

    pub fn build(
        dist: &FiniteDistribution,
        ell: usize,
        kind: ObservableKind,
        table: Option<Vec<f64>>,
    ) -> Result<Self> {
        match (kind, table) {
            (ObservableKind::Product, None) => Self::product(dist, ell),
            (ObservableKind::IndicatorEqual, None) => Self::indicator_equal(dist, ell),
            (ObservableKind::Table, Some(t)) => Self::from_table(dist, ell, t),
            (ObservableKind::Table, None) => {
                Err(Error::input("kind `table` requires a `table` field"))
            }
            (_, Some(_)) => Err(Error::input(
                "a `table` field is only allowed with kind `table`",
            )),
        }
    }

    fn with_stats(ell: usize, support: usize, table: Vec<f64>, cell_probs: Vec<f64>) -> Self {
        let mean = compensated_sum(table.iter().zip(&cell_probs).map(|(v, p)| v * p));
        // E(F - F̄)² rather than E F² - F̄²: same quantity, no cancellation
        let variance = compensated_sum(
            table
                .iter()
                .zip(&cell_probs)
                .map(|(v, p)| (v - mean) * (v - mean) * p),
        )
        .max(0.0);
        let sup_pos = table.iter().copied().fold(0.0_f64, f64::max);
        let sup_neg = table.iter().map(|v| -v).fold(0.0_f64, f64::max);
        let sup_abs = sup_pos.max(sup_neg);

        let mut pairs: Vec<(f64, f64)> = table
            .iter()
            .copied()
            .zip(cell_probs.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut law: Vec<(f64, f64)> = Vec::new();
        for (v, p) in pairs {
            match law.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => law.push((v, p)),
            }
        }

        Self {
            ell,
            support,
            table,
            cell_probs,
            law,
            mean,
            variance,
            sup_abs,
            sup_pos,
            sup_neg,
        }
    }

    /// `F − F̄`.
    pub fn center(&self) -> Self {
        let mean = self.mean;
        let table = self.table.iter().map(|v| v - mean).collect();
        Self::with_stats(self.ell, self.support, table, self.cell_probs.clone())
    }

    /// `−F`.
    pub fn negate(&self) -> Self {
        let table = self.table.iter().map(|v| -v).collect();
        Self::with_stats(self.ell, self.support, table, self.cell_probs.clone())
    }

    pub fn evaluate(&self, tuple: &[usize]) -> Result<f64> {
        if tuple.len() != self.ell {
            return Err(Error::input(format!(
                "tuple has length {}, observable expects {}",
                tuple.len(),
                self.ell
            )));
        }
        if let Some(&bad) = tuple.iter().find(|&&i| i >= self.support) {
            return Err(Error::input(format!(
                "support index {bad} out of range 0..{}",
                self.support
            )));
        }
        Ok(self.table[self.cell_index(tuple)])
    }

    /// Row-major cell of a tuple of support indices (first coordinate most significant).
    #[inline]
    pub fn cell_index(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &d| acc * self.support + d)
    }

    #[inline]
    pub fn cell_value(&self, cell: usize) -> f64 {
        self.table[cell]
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn support_size(&self) -> usize {
        self.support
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn cell_probs(&self) -> &[f64] {
        &self.cell_probs
    }

    /// Distinct values of `F(X₁, …, X_ℓ)` in increasing order with their probabilities.
    pub fn law(&self) -> &[(f64, f64)] {
        &self.law
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `M = ‖F‖_∞`
    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    /// `M₊ = ‖max(F, 0)‖_∞`
    pub fn sup_pos(&self) -> f64 {
        self.sup_pos
    }

    /// `M₋ = ‖max(−F, 0)‖_∞`
    pub fn sup_neg(&self) -> f64 {
        self.sup_neg
    }

    pub fn is_centered(&self) -> bool {
        self.mean.abs() <= 1e-12 * self.sup_abs.max(1.0)
    }

    /// `σ² = 0` up to rounding: `F` is constant μ^ℓ-almost surely.
    pub fn is_degenerate(&self) -> bool {
        self.variance <= 1e-24 * self.sup_abs.max(1.0).powi(2)
    }

    pub(crate) fn require_nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::Degenerate {
                variance: self.variance,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn require_centered(&self) -> Result<()> {
        if self.is_centered() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "observable must be centered (mean is {:e}); call center() first",
                self.mean
            )))
        }
    }

    pub(crate) fn require_compatible(&self, dist: &FiniteDistribution) -> Result<()> {
        if dist.support_size() != self.support {
            return Err(Error::input(format!(
                "observable tabulated over {} support points, distribution has {}",
                self.support,
                dist.support_size()
            )));
        }
        Ok(())
    }
}

fn table_cells(s: usize, ell: usize) -> Result<usize> {
    if ell == 0 {
        return Err(Error::input("ell must be at least 1"));
    }
    let mut cells: usize = 1;
    for _ in 0..ell {
        cells = cells
            .checked_mul(s)
            .filter(|&c| c <= MAX_TABLE_CELLS)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "observable table s^ell = {s}^{ell} exceeds {MAX_TABLE_CELLS} cells"
                ))
            })?;
    }
    Ok(cells)
}

pub(crate) fn decode_cell(mut cell: usize, s: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = cell % s;
        cell /= s;
    }
}

fn cell_probabilities(probs: &[f64], ell: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..ell {
        out = out
            .iter()
            .flat_map(|&w| probs.iter().map(move |&p| w * p))
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rademacher() -> FiniteDistribution {
        FiniteDistribution::uniform(vec![-1.0, 1.0]).unwrap()
    }

    fn bernoulli() -> FiniteDistribution {
        FiniteDistribution::uniform(vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(FiniteDistribution::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(FiniteDistribution::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(FiniteDistribution::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(FiniteDistribution::new(vec![0.0], vec![1.0]).is_ok());
    }

    #[test]
    fn quantile_index_follows_cdf() {
        let d = FiniteDistribution::new(vec![0.0, 1.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(d.quantile_index(0.0), 0);
        assert_eq!(d.quantile_index(0.2499), 0);
        assert_eq!(d.quantile_index(0.25), 1);
        assert_eq!(d.quantile_index(0.7499), 1);
        assert_eq!(d.quantile_index(0.75), 2);
        assert_eq!(d.quantile_index(0.999_999_999), 2);
    }

    #[test]
    fn center_constant_gives_zero() {
        let f = Observable::constant(&rademacher(), 2, 5.0).unwrap();
        let c = f.center();
        assert!(c.table().iter().all(|&v| v == 0.0));
        assert_eq!(c.mean(), 0.0);
    }

    #[test]
    fn center_symmetric_product_unchanged() {
        let f = Observable::product(&rademacher(), 2).unwrap();
        assert_eq!(f.mean(), 0.0);
        assert_eq!(f.center().table(), f.table());
    }

    #[test]
    fn center_bernoulli_product() {
        let f = Observable::product(&bernoulli(), 2).unwrap();
        assert!((f.mean() - 0.25).abs() < 1e-15);
        let c = f.center();
        assert_eq!(c.table(), &[-0.25, -0.25, -0.25, 0.75]);
        assert!(c.mean().abs() < 1e-12);
        assert!((c.variance() - f.variance()).abs() < 1e-12);
        assert!((c.variance() - 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn negate_swaps_one_sided_norms() {
        let rp = Observable::product(&rademacher(), 2).unwrap().negate();
        assert_eq!((rp.sup_pos(), rp.sup_neg(), rp.sup_abs()), (1.0, 1.0, 1.0));

        let c = Observable::product(&bernoulli(), 2).unwrap().center();
        assert_eq!((c.sup_pos(), c.sup_neg()), (0.75, 0.25));
        let n = c.negate();
        assert_eq!((n.sup_pos(), n.sup_neg(), n.sup_abs()), (0.25, 0.75, 0.75));
        assert_eq!(n.negate(), c);
    }

    #[test]
    fn evaluate_reads_table() {
        let f = Observable::product(&rademacher(), 2).unwrap();
        assert_eq!(f.evaluate(&[0, 0]).unwrap(), 1.0);
        assert_eq!(f.evaluate(&[0, 1]).unwrap(), -1.0);
        let ind = Observable::indicator_equal(&rademacher(), 2)
            .unwrap()
            .center();
        assert_eq!(ind.evaluate(&[1, 1]).unwrap(), 0.5);
        assert!(matches!(f.evaluate(&[0]), Err(Error::Input(_))));
        assert!(matches!(f.evaluate(&[0, 2]), Err(Error::Input(_))));
    }

    #[test]
    fn law_aggregates_equal_values() {
        let c = Observable::product(&bernoulli(), 2).unwrap().center();
        assert_eq!(c.law(), &[(-0.25, 0.75), (0.75, 0.25)]);
    }

    #[test]
    fn table_guard() {
        let d = FiniteDistribution::uniform((0..10).map(f64::from).collect()).unwrap();
        assert!(matches!(
            Observable::product(&d, 7),
            Err(Error::Capacity(_))
        ));
        assert!(Observable::product(&d, 6).is_ok());
    }

    #[test]
    fn build_rejects_mismatched_fields() {
        let d = rademacher();
        assert!(Observable::build(&d, 2, ObservableKind::Table, None).is_err());
        assert!(Observable::build(&d, 2, ObservableKind::Product, Some(vec![0.0; 4])).is_err());
        assert!(Observable::build(&d, 2, ObservableKind::Table, Some(vec![0.0; 3])).is_err());
        let t = Observable::build(
            &d,
            2,
            ObservableKind::Table,
            Some(vec![1.0, 0.0, 0.0, -1.0]),
        )
        .unwrap();
        assert_eq!(t.mean(), 0.0);
    }
}
