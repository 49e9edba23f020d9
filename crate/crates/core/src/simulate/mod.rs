//! Reproducible nonconventional and i.i.d. trajectories, and Monte Carlo
//! estimates of large-deviation probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FiniteDistribution, Observable};
use crate::numeric::CompensatedSum;

pub mod rng;

pub use rng::{counter_u64, derive_seed, x_value, CounterSampler};

/// Which sum a trajectory follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `S_n = Σ_{m≤n} F(X_m, X_{2m}, …, X_{ℓm})`
    Nonconventional,
    /// `Σ_n = Σ_{m≤n} Y_m`, `Y_m = F(X_{(m−1)ℓ+1}, …, X_{mℓ})` i.i.d.
    Iid,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Nonconventional => "nonconventional",
            Mode::Iid => "iid",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonconventional" => Ok(Mode::Nonconventional),
            "iid" => Ok(Mode::Iid),
            other => Err(Error::input(format!(
                "unknown mode `{other}` (nonconventional|iid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectorySpec<'a> {
    pub seed: u64,
    pub n: usize,
    pub dist: &'a FiniteDistribution,
    pub obs: &'a Observable,
    pub mode: Mode,
}

/// Prefix sums `S₀ = 0, S₁, …, S_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub mode: Mode,
    pub prefix: Vec<f64>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.prefix.len() - 1
    }

    /// Rows `(k, S_k)` for `k = 0, stride, 2·stride, … ≤ n`.
    pub fn strided(&self, stride: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.prefix
            .iter()
            .copied()
            .enumerate()
            .step_by(stride.max(1))
    }
}

/// Summand `m ≥ 1` of either sum, read from the counter stream.
#[inline]
fn summand(
    sampler: &CounterSampler<'_>,
    obs: &Observable,
    mode: Mode,
    m: u64,
    tuple: &mut [usize],
) -> f64 {
    let ell = tuple.len() as u64;
    for (j, slot) in tuple.iter_mut().enumerate() {
        let j = j as u64;
        let index = match mode {
            Mode::Nonconventional => (j + 1) * m,
            Mode::Iid => (m - 1) * ell + j + 1,
        };
        *slot = sampler.index(index);
    }
    obs.cell_value(obs.cell_index(tuple))
}

fn validate(spec: &TrajectorySpec<'_>) -> Result<()> {
    spec.obs.require_compatible(spec.dist)?;
    if spec.n < 1 {
        return Err(Error::input("trajectory length n must be at least 1"));
    }
    Ok(())
}

fn build(spec: &TrajectorySpec<'_>) -> Trajectory {
    let sampler = CounterSampler::new(spec.dist, spec.seed);
    let mut tuple = vec![0usize; spec.obs.ell()];
    let mut prefix = Vec::with_capacity(spec.n + 1);
    prefix.push(0.0);
    let mut acc = CompensatedSum::new();
    for m in 1..=spec.n as u64 {
        acc.add(summand(&sampler, spec.obs, spec.mode, m, &mut tuple));
        prefix.push(acc.value());
    }
    Trajectory {
        seed: spec.seed,
        mode: spec.mode,
        prefix,
    }
}

/// Nonconventional trajectory; `X_i` is computed on demand from `(seed, i)`.
pub fn trajectory(spec: &TrajectorySpec<'_>) -> Result<Trajectory> {
    validate(spec)?;
    if spec.mode != Mode::Nonconventional {
        return Err(Error::input("trajectory() needs mode = nonconventional"));
    }
    Ok(build(spec))
}

/// i.i.d. comparison trajectory: each summand reads its own block of `ℓ` counters.
pub fn iid_trajectory(spec: &TrajectorySpec<'_>) -> Result<Trajectory> {
    validate(spec)?;
    if spec.mode != Mode::Iid {
        return Err(Error::input("iid_trajectory() needs mode = iid"));
    }
    Ok(build(spec))
}

/// Either kind, dispatching on `spec.mode`.
pub fn simulate(spec: &TrajectorySpec<'_>) -> Result<Trajectory> {
    validate(spec)?;
    Ok(build(spec))
}

/// Empirical counterpart of `P{S_N/N ≥ u}` and its exponential rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdpEstimate {
    #[serde(rename = "N")]
    pub n: usize,
    pub u: f64,
    pub replicas: usize,
    pub hits: usize,
    pub p_hat: f64,
    /// `−ln(p_hat)/N`, `+∞` when no replica reached `u`.
    pub rate_hat: f64,
    /// 95% interval on `rate_hat` from the normal approximation to the hit count.
    pub ci_low: f64,
    pub ci_high: f64,
    pub zero_count: bool,
    pub mode: Mode,
}

pub const MIN_LDP_REPLICAS: usize = 1000;

/// Relative slack in the comparison `S_N ≥ u·N`, absorbing rounding in `u·N`.
const THRESHOLD_SLACK: f64 = 1e-12;

/// Fraction of replicas with `S_N/N ≥ u`. Replica `k` uses seed `derive_seed(seed, k)`,
/// so the result does not depend on how replicas are scheduled.
pub fn ldp_estimate(
    dist: &FiniteDistribution,
    obs: &Observable,
    n: usize,
    u: f64,
    replicas: usize,
    seed: u64,
    mode: Mode,
) -> Result<LdpEstimate> {
    obs.require_compatible(dist)?;
    if replicas < MIN_LDP_REPLICAS {
        return Err(Error::input(format!(
            "at least {MIN_LDP_REPLICAS} replicas required, got {replicas}"
        )));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::input(format!(
            "u must be positive and finite, got {u}"
        )));
    }
    if n < 1 {
        return Err(Error::input("N must be at least 1"));
    }
    let threshold = u * n as f64;
    let slack = THRESHOLD_SLACK * threshold.abs().max(1.0);
    let hits: usize = (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let sampler = CounterSampler::new(dist, derive_seed(seed, k));
            let mut tuple = vec![0usize; obs.ell()];
            let mut acc = CompensatedSum::new();
            for m in 1..=n as u64 {
                acc.add(summand(&sampler, obs, mode, m, &mut tuple));
            }
            usize::from(acc.value() >= threshold - slack)
        })
        .sum();

    let r = replicas as f64;
    let p_hat = hits as f64 / r;
    let nf = n as f64;
    let to_rate = |p: f64| if p > 0.0 { -p.ln() / nf } else { f64::INFINITY };
    let half = 1.96 * (p_hat * (1.0 - p_hat) / r).sqrt();
    let p_low = (p_hat - half).max(0.0);
    let p_high = (p_hat + half).min(1.0);
    Ok(LdpEstimate {
        n,
        u,
        replicas,
        hits,
        p_hat,
        rate_hat: to_rate(p_hat),
        ci_low: to_rate(p_high),
        ci_high: to_rate(p_low),
        zero_count: hits == 0,
        mode,
    })
}
