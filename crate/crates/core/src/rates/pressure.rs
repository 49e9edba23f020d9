//! The nonconventional pressure
//!
//! ```text
//! Q(λF) = r · Σ_{l≥1} (1/h_l − 1/h_{l+1}) · ln R_l(λF)
//! ```
//!
//! where `r = Π(1 − 1/r_k)` and `1/h_l − 1/h_{l+1}` is the density of `a ∈ A_N`
//! whose fiber has exactly `l` elements. Every term is nonnegative for centered
//! `F`, and `0 ≤ ln R_l ≤ l·M·|λ|`, so truncating after `L` terms leaves at most
//! `r·M·|λ|·Σ_{l>L} l·(1/h_l − 1/h_{l+1})`. That tail is evaluated through
//! `Σ_{l>L} l·w_l = (L+1)/h_{L+1} + Σ_{l≥L+2} 1/h_l` with the generated smooth
//! numbers plus a certified bound past the last one.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{fiber_sizes, PrimeBasis, SmoothSequence};
use crate::model::{FiniteDistribution, Observable};
use crate::numeric::CompensatedSum;

use super::chain::{chain_index_structure, checked_plan, EliminationPlan, DEFAULT_BUDGET};

/// Smooth numbers generated for the truncation bookkeeping.
const MAX_SMOOTH: usize = 20_000;

/// `Q` at one `λ`, with the truncation that certifies it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureValue {
    pub lambda: f64,
    pub value: f64,
    /// `dQ/dλ`, certified to the same tolerance.
    pub derivative: f64,
    /// Number `L` of series terms summed.
    pub truncation: usize,
    /// Bound on the neglected tail of both `Q` and `dQ/dλ`.
    pub tail_bound: f64,
}

/// Evaluable `λ ↦ Q(λF)` for one observable.
///
/// Elimination plans for each fiber length are built once and shared, so
/// concurrent evaluations at different `λ` are safe and cheap.
#[derive(Debug)]
pub struct Pressure {
    dist: FiniteDistribution,
    obs: Observable,
    basis: PrimeBasis,
    smooth: SmoothSequence,
    /// `w_l` for `l = 1..=max_level`, index `l − 1`.
    weights: Vec<f64>,
    /// `Σ_{l>L} l·w_l` for `L = 0..=max_level`.
    weighted_tail: Vec<f64>,
    tol: f64,
    budget: u64,
    plans: Mutex<Vec<Arc<EliminationPlan>>>,
}

impl Pressure {
    pub fn new(
        dist: &FiniteDistribution,
        obs: &Observable,
        basis: &PrimeBasis,
        tol: f64,
    ) -> Result<Self> {
        obs.require_compatible(dist)?;
        if basis.ell() != obs.ell() {
            return Err(Error::input(format!(
                "basis built for ell = {}, observable has ell = {}",
                basis.ell(),
                obs.ell()
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::input(format!("tol must be positive, got {tol}")));
        }
        let smooth = SmoothSequence::up_to_capacity(basis, MAX_SMOOTH);
        let (weights, weighted_tail) = series_bookkeeping(&smooth);
        Ok(Self {
            dist: dist.clone(),
            obs: obs.clone(),
            basis: basis.clone(),
            smooth,
            weights,
            weighted_tail,
            tol,
            budget: DEFAULT_BUDGET,
            plans: Mutex::new(Vec::new()),
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn dist(&self) -> &FiniteDistribution {
        &self.dist
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }

    pub fn basis(&self) -> &PrimeBasis {
        &self.basis
    }

    pub fn smooth(&self) -> &SmoothSequence {
        &self.smooth
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// `w_l = 1/h_l − 1/h_{l+1}` (1-based); `w_1 = 1` for the empty basis.
    pub fn weight(&self, l: usize) -> f64 {
        self.weights[l - 1]
    }

    /// Certified bound on the neglected part of `Q` and `Q′` after `l` terms.
    pub fn tail_bound(&self, lambda: f64, l: usize) -> f64 {
        self.basis.r_const() * self.obs.sup_abs() * lambda.abs().max(1.0) * self.weighted_tail[l]
    }

    /// Smallest `L` whose tail bound is below `tol`.
    pub fn truncation(&self, lambda: f64) -> Result<usize> {
        let max_level = self.weights.len();
        (1..=max_level)
            .find(|&l| self.tail_bound(lambda, l) < self.tol)
            .ok_or(Error::ToleranceUnreachable {
                requested: self.tol,
                achievable: self.tail_bound(lambda, max_level),
            })
    }

    fn plan(&self, l: usize) -> Result<Arc<EliminationPlan>> {
        {
            let plans = self.plans.lock().expect("plan cache poisoned");
            if let Some(p) = plans.get(l - 1) {
                return Ok(Arc::clone(p));
            }
        }
        // build outside the lock; plans are deterministic so a racing duplicate is harmless
        let mut built = Vec::new();
        let start = self.plans.lock().expect("plan cache poisoned").len() + 1;
        for k in start..=l {
            let chain = chain_index_structure(&self.basis, self.obs.ell(), k)?;
            built.push(Arc::new(checked_plan(
                &chain,
                self.dist.support_size(),
                self.budget,
            )?));
        }
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        if plans.len() + 1 == start {
            plans.extend(built);
        }
        Ok(Arc::clone(&plans[l - 1]))
    }

    /// `(ln R_l(λF), d ln R_l/dλ)` by exact enumeration.
    pub fn ln_r_l(&self, lambda: f64, l: usize) -> Result<(f64, f64)> {
        Ok(self.plan(l)?.eval(&self.dist, &self.obs, lambda))
    }

    pub fn eval(&self, lambda: f64) -> Result<PressureValue> {
        if !lambda.is_finite() {
            return Err(Error::input(format!("lambda must be finite, got {lambda}")));
        }
        let truncation = self.truncation(lambda)?;
        let mut value = CompensatedSum::new();
        let mut derivative = CompensatedSum::new();
        for l in 1..=truncation {
            let (ln_r, d_ln_r) = match self.ln_r_l(lambda, l) {
                Ok(v) => v,
                Err(Error::BudgetExceeded { .. }) => {
                    return Err(Error::ToleranceUnreachable {
                        requested: self.tol,
                        achievable: self.tail_bound(lambda, l - 1),
                    })
                }
                Err(e) => return Err(e),
            };
            let w = self.weights[l - 1];
            value.add(w * ln_r);
            derivative.add(w * d_ln_r);
        }
        let r = self.basis.r_const();
        Ok(PressureValue {
            lambda,
            value: r * value.value(),
            derivative: r * derivative.value(),
            truncation,
            tail_bound: self.tail_bound(lambda, truncation),
        })
    }

    pub fn value(&self, lambda: f64) -> Result<f64> {
        self.eval(lambda).map(|p| p.value)
    }

    /// `(1/N)·ln E exp(λ S_N)`, reusing this pressure's plans.
    pub fn finite(&self, lambda: f64, n: u64) -> Result<f64> {
        if n < 1 {
            return Err(Error::input("N must be at least 1"));
        }
        let mut by_len: BTreeMap<usize, u64> = BTreeMap::new();
        for (_, size) in fiber_sizes(&self.basis, n) {
            *by_len.entry(size).or_default() += 1;
        }
        let mut total = CompensatedSum::new();
        for (l, count) in by_len {
            total.add(count as f64 * self.ln_r_l(lambda, l)?.0);
        }
        Ok(total.value() / n as f64)
    }
}

/// Weights `w_l` and tails `Σ_{l>L} l·w_l` from the generated smooth numbers.
fn series_bookkeeping(smooth: &SmoothSequence) -> (Vec<f64>, Vec<f64>) {
    if smooth.basis().m() == 0 {
        // single smooth number h₁ = 1, h₂ = ∞: all mass at l = 1
        return (vec![1.0], vec![1.0, 0.0]);
    }
    let g = smooth.values().len();
    let max_level = g - 1;
    let weights: Vec<f64> = (1..=max_level).map(|l| smooth.weight(l)).collect();
    // suffix[i] = Σ_{l ≥ i+1} 1/h_l including the certified tail past h_g
    let mut suffix = vec![0.0; g + 1];
    let mut acc = CompensatedSum::new();
    acc.add(smooth.reciprocal_tail_bound());
    suffix[g] = acc.value();
    for i in (0..g).rev() {
        acc.add(1.0 / smooth.values()[i] as f64);
        suffix[i] = acc.value();
    }
    let weighted_tail = (0..=max_level)
        .map(|big_l| {
            // (L+1)/h_{L+1} + Σ_{l ≥ L+2} 1/h_l
            (big_l + 1) as f64 / smooth.values()[big_l] as f64 + suffix[big_l + 1]
        })
        .collect();
    (weights, weighted_tail)
}

/// `(1/N)·ln E exp(λ S_N) = (1/N)·Σ_{a∈A_N} ln R_{|B_N(a)|}(λF)`.
///
/// Distinct fibers never share an index: the part of `j·a·h` coprime to the
/// basis is `a`, so the fiber sums are independent.
pub fn finite_pressure(
    dist: &FiniteDistribution,
    obs: &Observable,
    basis: &PrimeBasis,
    lambda: f64,
    n: u64,
) -> Result<f64> {
    Pressure::new(dist, obs, basis, 1.0)?.finite(lambda, n)
}

/// `Q(λF)` at tolerance `tol`.
pub fn pressure(
    dist: &FiniteDistribution,
    obs: &Observable,
    basis: &PrimeBasis,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    Pressure::new(dist, obs, basis, tol)?.value(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::primes_up_to;
    use crate::rates::cramer::ln_mgf;

    fn rademacher_product(ell: usize) -> (FiniteDistribution, Observable, PrimeBasis) {
        let d = FiniteDistribution::uniform(vec![-1.0, 1.0]).unwrap();
        let f = Observable::product(&d, ell).unwrap();
        (d, f, primes_up_to(ell).unwrap())
    }

    #[test]
    fn rademacher_is_ln_cosh() {
        let (d, f, b) = rademacher_product(2);
        let p = Pressure::new(&d, &f, &b, 1e-10).unwrap();
        for lambda in [-2.0, -0.3, 0.25, 0.5, 1.0, 2.0, 30.0] {
            let q = p.eval(lambda).unwrap();
            let closed = f64::cosh(lambda).ln();
            assert!(
                (q.value - closed).abs() < 1e-9,
                "λ={lambda}: {} vs {closed}",
                q.value
            );
            assert!((q.derivative - lambda.tanh()).abs() < 1e-9);
            assert!(q.tail_bound < 1e-10);
        }
        assert!((p.value(1.0).unwrap() - 0.4337809).abs() < 1e-7);
        assert_eq!(p.value(0.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_observable_gives_linear_pressure() {
        let d = FiniteDistribution::uniform(vec![0.0, 1.0]).unwrap();
        for (ell, tol) in [(1usize, 1e-10), (2, 1e-10), (3, 1e-2)] {
            let c = Observable::constant(&d, ell, 0.6).unwrap();
            let p = Pressure::new(&d, &c, &primes_up_to(ell).unwrap(), tol).unwrap();
            for lambda in [-1.5, 0.5, 2.0] {
                assert!(
                    (p.value(lambda).unwrap() - 0.6 * lambda).abs() < tol,
                    "ell={ell}"
                );
            }
        }
    }

    #[test]
    fn ell_one_is_log_mgf() {
        let d = FiniteDistribution::new(vec![-1.0, 0.0, 2.0], vec![0.3, 0.5, 0.2]).unwrap();
        let f = Observable::from_fn(&d, 1, |x| x[0] * x[0] - x[0])
            .unwrap()
            .center();
        let p = Pressure::new(&d, &f, &primes_up_to(1).unwrap(), 1e-12).unwrap();
        for lambda in [-3.0, -0.1, 0.7, 4.0] {
            assert!((p.value(lambda).unwrap() - ln_mgf(&f, lambda)).abs() < 1e-12);
            assert_eq!(p.eval(lambda).unwrap().truncation, 1);
        }
    }

    #[test]
    fn fiber_densities_account_for_every_integer() {
        // Σ_l l·r·w_l = r·Σ_l 1/h_l = r·Π(1 − 1/p)^{-1} = 1
        let d = FiniteDistribution::uniform(vec![-1.0, 1.0]).unwrap();
        for ell in [2usize, 3, 5, 7] {
            let f = Observable::product(&d, ell).unwrap();
            let b = primes_up_to(ell).unwrap();
            let p = Pressure::new(&d, &f, &b, 1.0).unwrap();
            let total = b.r_const() * p.weighted_tail[0];
            assert!(
                total >= 1.0 - 1e-12 && total < 1.0 + 1e-7,
                "ell={ell}: {total}"
            );
        }
        let f = Observable::product(&d, 3).unwrap();
        assert!(Pressure::new(&d, &f, &primes_up_to(2).unwrap(), 1.0).is_err());
    }

    #[test]
    fn tail_bound_dominates_true_tail_ell2() {
        let (d, f, b) = rademacher_product(2);
        let p = Pressure::new(&d, &f, &b, 1.0).unwrap();
        for big_l in 0..40 {
            let exact = (big_l + 2) as f64 * 0.5f64.powi(big_l as i32);
            assert!(
                (p.weighted_tail[big_l] - exact).abs() <= 1e-15 * exact.max(1.0),
                "L={big_l}"
            );
        }
    }

    #[test]
    fn unreachable_tolerance_reports_achievable() {
        let d = FiniteDistribution::uniform(vec![-1.0, 0.0, 1.0]).unwrap();
        let f = Observable::product(&d, 3).unwrap();
        let p = Pressure::new(&d, &f, &primes_up_to(3).unwrap(), 1e-12)
            .unwrap()
            .with_budget(10_000);
        match p.eval(1.0) {
            Err(Error::ToleranceUnreachable {
                requested,
                achievable,
            }) => {
                assert_eq!(requested, 1e-12);
                assert!(achievable > 1e-12 && achievable.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn finite_pressure_small_cases() {
        let d = FiniteDistribution::uniform(vec![0.0, 1.0]).unwrap();
        let f = Observable::product(&d, 2).unwrap().center();
        let b = primes_up_to(2).unwrap();
        let fp = finite_pressure(&d, &f, &b, 0.8, 1).unwrap();
        assert!((fp - ln_mgf(&f, 0.8)).abs() < 1e-14);

        let f1 = Observable::from_fn(&d, 1, |x| x[0] - 0.5).unwrap();
        let b1 = primes_up_to(1).unwrap();
        for n in [1, 7, 100] {
            assert!(
                (finite_pressure(&d, &f1, &b1, 1.3, n).unwrap() - ln_mgf(&f1, 1.3)).abs() < 1e-14
            );
        }
    }

    #[test]
    fn finite_pressure_converges_ell2() {
        let (d, f, b) = rademacher_product(2);
        let fp = finite_pressure(&d, &f, &b, 1.0, 4096).unwrap();
        assert!((fp - 1f64.cosh().ln()).abs() < 0.01);
    }
}
