//! One fiber of a nonconventional sum and its moment generating function `R_l(λF)`.
//!
//! The fiber `B_N(a)` with `l` elements is `{a·h₁, …, a·h_l}`, and its partial
//! sum is `Σ_k F(X_{a h_k}, X_{2a h_k}, …, X_{ℓ a h_k})`. Its law does not depend
//! on `a`, so everything here works with `a = 1`.
//!
//! `R_l` is computed exactly by summing over all assignments of support values
//! to the distinct indices. The sum is organized as sequential variable
//! elimination in increasing index order: a variable is introduced with its
//! marginal probability, each summand is multiplied in once all its
//! variables are present, and a variable is summed out after its last summand.
//! The result equals the full enumeration while only ever holding the
//! variables that are still shared with pending summands.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{smooth_numbers, PrimeBasis};
use crate::model::{FiniteDistribution, Observable};
use crate::numeric::compensated_sum;
use crate::simulate::rng::{derive_seed, CounterSampler};

/// Default cap on table operations for one exact `R_l` evaluation.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Distinct indices touched by a fiber of length `l`, and where each summand reads them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    ell: usize,
    /// `b`-values `h₁ < … < h_l`.
    b_values: Vec<u128>,
    /// Sorted distinct indices `{j·h_k}`.
    indices: Vec<u128>,
    /// `terms[k][j]` is the position in `indices` of `(j+1)·h_{k+1}` (0-based).
    terms: Vec<Vec<usize>>,
}

impl ChainStructure {
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn l(&self) -> usize {
        self.terms.len()
    }

    pub fn b_values(&self) -> &[u128] {
        &self.b_values
    }

    pub fn indices(&self) -> &[u128] {
        &self.indices
    }

    pub fn terms(&self) -> &[Vec<usize>] {
        &self.terms
    }

    pub fn distinct_count(&self) -> usize {
        self.indices.len()
    }
}

/// Chain structure of the fiber of `a = 1` with `l` elements.
///
/// For `ℓ = 1` the basis is empty and every fiber is a singleton; for `l > 1`
/// the `b`-values `1, …, l` are used, which gives `l` independent summands just
/// as `l` distinct fibers would.
pub fn chain_index_structure(basis: &PrimeBasis, ell: usize, l: usize) -> Result<ChainStructure> {
    if l < 1 {
        return Err(Error::input("chain length l must be at least 1"));
    }
    if ell < 1 {
        return Err(Error::input("ell must be at least 1"));
    }
    let b_values: Vec<u128> = if basis.m() == 0 {
        (1..=l as u128).collect()
    } else {
        smooth_numbers(basis, l)?.values()[..l].to_vec()
    };
    let mut indices: Vec<u128> = Vec::with_capacity(ell * l);
    for &b in &b_values {
        for j in 1..=ell as u128 {
            let idx = b
                .checked_mul(j)
                .ok_or_else(|| Error::Capacity(format!("index {j}·{b} overflows u128")))?;
            indices.push(idx);
        }
    }
    indices.sort_unstable();
    indices.dedup();
    let terms = b_values
        .iter()
        .map(|&b| {
            (1..=ell as u128)
                .map(|j| indices.binary_search(&(j * b)).expect("index present"))
                .collect()
        })
        .collect();
    Ok(ChainStructure {
        ell,
        b_values,
        indices,
        terms,
    })
}

#[derive(Debug, Clone)]
enum Step {
    /// append a new variable as the last (fastest) axis
    Introduce,
    /// multiply in a summand reading these axes, in coordinate order
    Absorb(Vec<usize>),
    /// sum out one axis
    Eliminate(usize),
}

/// Precomputed elimination order for one chain structure and support size.
#[derive(Debug, Clone)]
pub(crate) struct EliminationPlan {
    support: usize,
    ell: usize,
    terms: usize,
    steps: Vec<Step>,
    cost: u128,
}

impl EliminationPlan {
    pub(crate) fn new(chain: &ChainStructure, support: usize) -> Self {
        let d = chain.indices.len();
        let mut ready: Vec<Vec<usize>> = vec![Vec::new(); d];
        let mut release = vec![0usize; d];
        for (k, pos) in chain.terms.iter().enumerate() {
            let last = *pos.iter().max().expect("ell ≥ 1");
            ready[last].push(k);
            for &p in pos {
                release[p] = release[p].max(last);
            }
        }

        let size = |n: usize| (support as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        let mut steps = Vec::new();
        let mut active: Vec<usize> = Vec::new();
        let mut cost: u128 = 0;
        for var in 0..d {
            active.push(var);
            steps.push(Step::Introduce);
            cost = cost.saturating_add(size(active.len()));
            for &k in &ready[var] {
                let axes = chain.terms[k]
                    .iter()
                    .map(|p| active.iter().position(|a| a == p).expect("variable active"))
                    .collect();
                steps.push(Step::Absorb(axes));
                cost = cost.saturating_add(size(active.len()).saturating_mul(chain.ell as u128));
            }
            // every summand using these variables has been absorbed
            let mut axis = active.len();
            while axis > 0 {
                axis -= 1;
                if release[active[axis]] == var {
                    cost = cost.saturating_add(size(active.len()));
                    steps.push(Step::Eliminate(axis));
                    active.remove(axis);
                }
            }
        }
        debug_assert!(active.is_empty());
        Self {
            support,
            ell: chain.ell,
            terms: chain.terms.len(),
            steps,
            cost,
        }
    }

    /// Number of table operations one evaluation performs.
    pub(crate) fn cost(&self) -> u128 {
        self.cost
    }

    /// `(ln R_l(λF), d ln R_l/dλ)`.
    pub(crate) fn eval(
        &self,
        dist: &FiniteDistribution,
        obs: &Observable,
        lambda: f64,
    ) -> (f64, f64) {
        let s = self.support;
        let probs = dist.probs();
        let shift = lambda.abs() * obs.sup_abs();
        // every factor e^{λF − |λ|M} is at most 1
        let factors: Vec<f64> = obs
            .table()
            .iter()
            .map(|&f| (lambda * f - shift).exp())
            .collect();
        let values = obs.table();

        let mut z: Vec<f64> = vec![1.0];
        let mut dz: Vec<f64> = vec![0.0];
        let mut axes = 0usize;
        let mut log_scale = 0.0;
        let mut cell_strides = vec![0usize; self.ell];
        for (j, st) in cell_strides.iter_mut().enumerate() {
            *st = s.pow((self.ell - 1 - j) as u32);
        }

        for step in &self.steps {
            match step {
                Step::Introduce => {
                    let mut nz = Vec::with_capacity(z.len() * s);
                    let mut ndz = Vec::with_capacity(z.len() * s);
                    for (&zv, &dv) in z.iter().zip(&dz) {
                        for &p in probs {
                            nz.push(zv * p);
                            ndz.push(dv * p);
                        }
                    }
                    z = nz;
                    dz = ndz;
                    axes += 1;
                }
                Step::Absorb(term_axes) => {
                    let axis_strides: Vec<usize> = term_axes
                        .iter()
                        .map(|&a| s.pow((axes - 1 - a) as u32))
                        .collect();
                    for (idx, (zv, dv)) in z.iter_mut().zip(dz.iter_mut()).enumerate() {
                        let cell: usize = axis_strides
                            .iter()
                            .zip(&cell_strides)
                            .map(|(&st, &cs)| ((idx / st) % s) * cs)
                            .sum();
                        let e = factors[cell];
                        *dv = (*dv + values[cell] * *zv) * e;
                        *zv *= e;
                    }
                }
                Step::Eliminate(axis) => {
                    let stride = s.pow((axes - 1 - axis) as u32);
                    let outer = z.len() / (stride * s);
                    let mut nz = vec![0.0; outer * stride];
                    let mut ndz = vec![0.0; outer * stride];
                    for o in 0..outer {
                        for x in 0..s {
                            let base = (o * s + x) * stride;
                            for i in 0..stride {
                                nz[o * stride + i] += z[base + i];
                                ndz[o * stride + i] += dz[base + i];
                            }
                        }
                    }
                    z = nz;
                    dz = ndz;
                    axes -= 1;
                }
            }
            let peak = z.iter().copied().fold(0.0_f64, f64::max);
            if peak > 0.0 && !(1e-100..=1e100).contains(&peak) {
                log_scale += peak.ln();
                z.iter_mut().for_each(|v| *v /= peak);
                dz.iter_mut().for_each(|v| *v /= peak);
            }
        }
        debug_assert_eq!(z.len(), 1);
        let ln_r = z[0].ln() + log_scale + shift * self.terms as f64;
        (ln_r, dz[0] / z[0])
    }
}

pub(crate) fn checked_plan(
    chain: &ChainStructure,
    support: usize,
    budget: u64,
) -> Result<EliminationPlan> {
    let plan = EliminationPlan::new(chain, support);
    if plan.cost() > budget as u128 {
        return Err(Error::BudgetExceeded {
            l: chain.l(),
            needed: plan.cost(),
            budget,
        });
    }
    Ok(plan)
}

/// `ln R_l(λF)` by exact enumeration, within `budget` table operations.
pub fn ln_r_l(
    dist: &FiniteDistribution,
    obs: &Observable,
    basis: &PrimeBasis,
    lambda: f64,
    l: usize,
    budget: u64,
) -> Result<f64> {
    obs.require_compatible(dist)?;
    let chain = chain_index_structure(basis, obs.ell(), l)?;
    Ok(checked_plan(&chain, dist.support_size(), budget)?
        .eval(dist, obs, lambda)
        .0)
}

/// `R_l(λF) = E exp(λ Σ_{k≤l} F(X_{h_k}, …, X_{ℓ h_k}))`.
pub fn r_l(
    dist: &FiniteDistribution,
    obs: &Observable,
    basis: &PrimeBasis,
    lambda: f64,
    l: usize,
    budget: u64,
) -> Result<f64> {
    ln_r_l(dist, obs, basis, lambda, l, budget).map(f64::exp)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
}

pub const MIN_MC_REPLICAS: usize = 1000;

/// Unbiased Monte Carlo estimate of `R_l(λF)`; replica `k` draws its `X` values
/// from the stream `derive_seed(seed, k)` at the chain's own indices.
pub fn r_l_mc(
    dist: &FiniteDistribution,
    obs: &Observable,
    basis: &PrimeBasis,
    lambda: f64,
    l: usize,
    replicas: usize,
    seed: u64,
) -> Result<McEstimate> {
    obs.require_compatible(dist)?;
    if replicas < MIN_MC_REPLICAS {
        return Err(Error::input(format!(
            "at least {MIN_MC_REPLICAS} replicas required, got {replicas}"
        )));
    }
    let chain = chain_index_structure(basis, obs.ell(), l)?;
    let indices: Vec<u64> = chain
        .indices
        .iter()
        .map(|&i| u64::try_from(i).map_err(|_| Error::Capacity(format!("index {i} exceeds u64"))))
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|k| {
            let sampler = CounterSampler::new(dist, derive_seed(seed, k));
            let xs: Vec<usize> = indices.iter().map(|&i| sampler.index(i)).collect();
            let mut tuple = vec![0usize; chain.ell];
            let sum = compensated_sum(chain.terms.iter().map(|pos| {
                for (slot, &p) in tuple.iter_mut().zip(pos) {
                    *slot = xs[p];
                }
                obs.cell_value(obs.cell_index(&tuple))
            }));
            (lambda * sum).exp()
        })
        .collect();
    let n = samples.len() as f64;
    let mean = compensated_sum(samples.iter().copied()) / n;
    let var = compensated_sum(samples.iter().map(|&x| (x - mean) * (x - mean))) / (n - 1.0);
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        replicas,
    })
}
