//! The Erdős–Rényi statistic: the largest increment of `S` over windows of
//! length `b_n = ⌊ln n / I(α)⌋`, normalized per window, which should approach `α`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Observable};
use crate::rates::CramerRate;
use crate::simulate::{simulate, Mode, TrajectorySpec};

/// `max_{0 ≤ m ≤ n−b} (S_{m+b} − S_m)` for prefix sums `S₀, …, S_n`.
pub fn window_max(prefix: &[f64], b: usize) -> Result<f64> {
    let n = prefix.len().saturating_sub(1);
    if b < 1 {
        return Err(Error::input("window length must be at least 1"));
    }
    if b > n {
        return Err(Error::input(format!(
            "window length {b} exceeds trajectory length {n}"
        )));
    }
    Ok(prefix[b..]
        .iter()
        .zip(prefix)
        .map(|(hi, lo)| hi - lo)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `b_n = ⌊ln n / I(α)⌋`, at least 1.
///
/// The quotient is snapped to an integer when within `1e-12` relative of it,
/// so an exact multiple is not lost to rounding in `ln n`.
pub fn b_window(n: usize, i_alpha: f64) -> Result<usize> {
    if n < 3 {
        return Err(Error::input(format!("n must be at least 3, got {n}")));
    }
    if !(i_alpha > 0.0) || !i_alpha.is_finite() {
        return Err(Error::input(format!(
            "I(alpha) must be finite and positive, got {i_alpha} (alpha outside (0, M+))"
        )));
    }
    let q = (n as f64).ln() / i_alpha;
    let nearest = q.round();
    let b = if (q - nearest).abs() <= 1e-12 * q {
        nearest
    } else {
        q.floor()
    };
    Ok((b as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErPoint {
    pub alpha: f64,
    pub i_alpha: f64,
    pub n: usize,
    pub b_n: usize,
    pub seed: u64,
    pub mode: Mode,
    pub max_increment: f64,
    /// `max_increment / b_n`
    pub statistic: f64,
    /// `I(α)·max_increment / ln n`
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErSummary {
    pub alpha: f64,
    pub n: usize,
    pub mode: Mode,
    pub seeds: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Mean of `|statistic − α|` over seeds.
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErExperiment {
    pub rows: Vec<ErPoint>,
    pub summary: Vec<ErSummary>,
}

#[derive(Debug, Clone)]
pub struct ErConfig {
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub modes: Vec<Mode>,
}

impl ErConfig {
    pub fn new(alphas: Vec<f64>, ns: Vec<usize>) -> Self {
        Self {
            alphas,
            ns,
            seeds: (1..=5).collect(),
            modes: vec![Mode::Nonconventional],
        }
    }
}

/// Run the Erdős–Rényi experiment over an `α` grid, an increasing `n` grid, seeds and modes.
///
/// One trajectory of the largest `n` is built per `(seed, mode)` and its
/// prefixes serve every smaller `n`. Rows are sorted by `(α, n, mode, seed)`.
pub fn experiment(
    dist: &FiniteDistribution,
    obs: &Observable,
    cfg: &ErConfig,
) -> Result<ErExperiment> {
    obs.require_compatible(dist)?;
    obs.require_nondegenerate()?;
    let rate = CramerRate::new(dist, obs)?;
    if cfg.ns.is_empty() || cfg.alphas.is_empty() || cfg.seeds.is_empty() || cfg.modes.is_empty() {
        return Err(Error::input(
            "alpha, n, seed and mode grids must be nonempty",
        ));
    }
    if cfg.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("n grid must be strictly increasing"));
    }
    let mut windows = Vec::with_capacity(cfg.alphas.len());
    for &alpha in &cfg.alphas {
        if !(alpha > 0.0 && alpha < obs.sup_pos()) {
            return Err(Error::input(format!(
                "alpha = {alpha} outside (0, M+) = (0, {})",
                obs.sup_pos()
            )));
        }
        let i_alpha = match rate.eval(alpha).finite() {
            Some(v) if v > 0.0 => v,
            _ => {
                return Err(Error::input(format!(
                    "I({alpha}) is not finite and positive"
                )))
            }
        };
        let bs = cfg
            .ns
            .iter()
            .map(|&n| b_window(n, i_alpha))
            .collect::<Result<Vec<_>>>()?;
        windows.push((alpha, i_alpha, bs));
    }
    let n_max = *cfg.ns.last().expect("nonempty");

    let jobs: Vec<(Mode, u64)> = cfg
        .modes
        .iter()
        .flat_map(|&mode| cfg.seeds.iter().map(move |&seed| (mode, seed)))
        .collect();
    let per_job: Vec<Vec<ErPoint>> = jobs
        .par_iter()
        .map(|&(mode, seed)| -> Result<Vec<ErPoint>> {
            let traj = simulate(&TrajectorySpec {
                seed,
                n: n_max,
                dist,
                obs,
                mode,
            })?;
            let mut rows = Vec::new();
            for (alpha, i_alpha, bs) in &windows {
                for (&n, &b_n) in cfg.ns.iter().zip(bs) {
                    let prefix = &traj.prefix[..=n];
                    let max_increment = window_max(prefix, b_n.min(n))?;
                    rows.push(ErPoint {
                        alpha: *alpha,
                        i_alpha: *i_alpha,
                        n,
                        b_n,
                        seed,
                        mode,
                        max_increment,
                        statistic: max_increment / b_n as f64,
                        normalized: i_alpha * max_increment / (n as f64).ln(),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<ErPoint> = per_job.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.n.cmp(&b.n))
            .then(a.mode.cmp(&b.mode))
            .then(a.seed.cmp(&b.seed))
    });
    let summary = summarize(&rows);
    Ok(ErExperiment { rows, summary })
}

fn summarize(rows: &[ErPoint]) -> Vec<ErSummary> {
    let mut groups: BTreeMap<(u64, usize, Mode), Vec<&ErPoint>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.alpha.to_bits(), r.n, r.mode))
            .or_default()
            .push(r);
    }
    let mut out: Vec<ErSummary> = groups
        .into_values()
        .map(|g| {
            let k = g.len() as f64;
            let alpha = g[0].alpha;
            let stats: Vec<f64> = g.iter().map(|r| r.statistic).collect();
            let devs: Vec<f64> = stats.iter().map(|s| (s - alpha).abs()).collect();
            ErSummary {
                alpha,
                n: g[0].n,
                mode: g[0].mode,
                seeds: g.len(),
                mean: stats.iter().sum::<f64>() / k,
                min: stats.iter().copied().fold(f64::INFINITY, f64::min),
                max: stats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_abs_dev: devs.iter().sum::<f64>() / k,
                max_abs_dev: devs.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.alpha
            .total_cmp(&b.alpha)
            .then(a.n.cmp(&b.n))
            .then(a.mode.cmp(&b.mode))
    });
    out
}
