//! Exact `φ(t) = E exp(t·F(X₁, …, X_ℓ))` and the Cramér rate `I(α) = sup_t (tα − ln φ(t))`.

use crate::conjugate::bisect_increasing;
use crate::error::Result;
use crate::model::{FiniteDistribution, Observable};
use crate::numeric::compensated_sum;

use super::RateValue;

pub fn mgf(dist: &FiniteDistribution, obs: &Observable, t: f64) -> Result<f64> {
    obs.require_compatible(dist)?;
    Ok(compensated_sum(
        obs.law().iter().map(|&(v, p)| p * (t * v).exp()),
    ))
}

/// `ln φ(t)`, shifted so that large `|t|` does not overflow.
pub fn ln_mgf(obs: &Observable, t: f64) -> f64 {
    let shift = obs
        .law()
        .iter()
        .map(|&(v, _)| t * v)
        .fold(f64::NEG_INFINITY, f64::max);
    shift + compensated_sum(obs.law().iter().map(|&(v, p)| p * (t * v - shift).exp())).ln()
}

/// `φ′(t)/φ(t)`, the mean of `F` under the tilted law; strictly increasing when `σ² > 0`.
pub fn tilted_mean(obs: &Observable, t: f64) -> f64 {
    let shift = obs
        .law()
        .iter()
        .map(|&(v, _)| t * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut zf = 0.0;
    for &(v, p) in obs.law() {
        let w = p * (t * v - shift).exp();
        z += w;
        zf += w * v;
    }
    zf / z
}

/// Evaluable Cramér rate of a centered, nondegenerate observable.
#[derive(Debug, Clone)]
pub struct CramerRate {
    obs: Observable,
    t_cap: f64,
}

/// How far the bracket may grow past `t_cap` when the optimum lies beyond it.
const MAX_BRACKET_DOUBLINGS: u32 = 40;

impl CramerRate {
    pub fn new(dist: &FiniteDistribution, obs: &Observable) -> Result<Self> {
        obs.require_compatible(dist)?;
        obs.require_nondegenerate()?;
        obs.require_centered()?;
        let t_cap = 60.0 / obs.sup_abs();
        Ok(Self {
            obs: obs.clone(),
            t_cap,
        })
    }

    pub fn with_t_cap(mut self, t_cap: f64) -> Self {
        self.t_cap = t_cap;
        self
    }

    pub fn t_cap(&self) -> f64 {
        self.t_cap
    }

    pub fn observable(&self) -> &Observable {
        &self.obs
    }

    pub fn eval(&self, alpha: f64) -> RateValue {
        let obs = &self.obs;
        let (m_pos, m_neg) = (obs.sup_pos(), obs.sup_neg());
        if alpha == 0.0 {
            return RateValue::Finite(0.0);
        }
        let edge_tol = 1e-12 * obs.sup_abs();
        if alpha > m_pos + edge_tol || alpha < -m_neg - edge_tol {
            return RateValue::Infinite;
        }
        // at an endpoint the supremum is approached as t → ±∞: I = −ln P{F = endpoint}
        if alpha >= m_pos - edge_tol {
            let mass = obs.law().last().map_or(0.0, |&(_, p)| p);
            return RateValue::Finite(-mass.ln());
        }
        if alpha <= -m_neg + edge_tol {
            let mass = obs.law().first().map_or(0.0, |&(_, p)| p);
            return RateValue::Finite(-mass.ln());
        }
        let sign = alpha.signum();
        // search t ≥ 0 for α > 0 and t ≤ 0 for α < 0; in u = sign·t the slope is increasing
        let slope = |u: f64| sign * tilted_mean(obs, sign * u) - sign * alpha;
        let mut hi = self.t_cap;
        let mut doublings = 0;
        while slope(hi) < 0.0 && doublings < MAX_BRACKET_DOUBLINGS {
            hi *= 2.0;
            doublings += 1;
        }
        let u = if slope(hi) < 0.0 {
            hi
        } else {
            let lo = if doublings == 0 { 0.0 } else { hi / 2.0 };
            bisect_increasing(slope, lo, hi)
        };
        let t = sign * u;
        RateValue::Finite((t * alpha - ln_mgf(obs, t)).max(0.0))
    }

    /// `I` on a grid of `α` values.
    pub fn curve(&self, alphas: &[f64]) -> Vec<RateValue> {
        alphas.iter().map(|&a| self.eval(a)).collect()
    }
}

pub fn cramer_rate(dist: &FiniteDistribution, obs: &Observable, alpha: f64) -> Result<RateValue> {
    Ok(CramerRate::new(dist, obs)?.eval(alpha))
}
