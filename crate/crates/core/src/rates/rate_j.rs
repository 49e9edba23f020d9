//! `J(u) = sup_λ (λu − Q(λF))`, restricted to `λ ≥ 0` for `u ≥ 0` and `λ ≤ 0` for `u ≤ 0`.

use serde::Serialize;

use crate::conjugate::golden_section_max;
use crate::error::Result;

use super::pressure::Pressure;
use super::RateValue;

/// Evaluable nonconventional rate function built on a [`Pressure`].
#[derive(Debug)]
pub struct RateJ {
    pressure: Pressure,
    lambda_cap: f64,
    slope_tol: f64,
}

/// Numerically detected finiteness bounds: `L₊ = Q′(λ_cap)`, `L₋ = −Q′(−λ_cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Endpoints {
    pub upper: f64,
    pub lower: f64,
    pub lambda_cap: f64,
}

/// Relative width at which the golden-section bracket stops.
const LAMBDA_REL_TOL: f64 = 1e-10;

impl RateJ {
    /// Requires a centered, nondegenerate observable; `λ_cap` defaults to `60/M`.
    pub fn new(pressure: Pressure) -> Result<Self> {
        pressure.observable().require_nondegenerate()?;
        pressure.observable().require_centered()?;
        let lambda_cap = 60.0 / pressure.observable().sup_abs();
        Ok(Self {
            pressure,
            lambda_cap,
            slope_tol: 1e-9,
        })
    }

    pub fn with_lambda_cap(mut self, cap: f64) -> Self {
        self.lambda_cap = cap;
        self
    }

    pub fn with_slope_tol(mut self, tol: f64) -> Self {
        self.slope_tol = tol;
        self
    }

    pub fn pressure(&self) -> &Pressure {
        &self.pressure
    }

    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }

    pub fn endpoints(&self) -> Result<Endpoints> {
        Ok(Endpoints {
            upper: self.pressure.eval(self.lambda_cap)?.derivative,
            lower: -self.pressure.eval(-self.lambda_cap)?.derivative,
            lambda_cap: self.lambda_cap,
        })
    }

    pub fn eval(&self, u: f64) -> Result<RateValue> {
        if u == 0.0 {
            return Ok(RateValue::Finite(0.0));
        }
        let sign = u.signum();
        let cap = self.lambda_cap;
        // objective v ↦ v|u| − Q(sign·v) is concave; still rising at the cap means +∞
        let edge_slope = u.abs() - sign * self.pressure.eval(sign * cap)?.derivative;
        if edge_slope >= self.slope_tol {
            return Ok(RateValue::Infinite);
        }
        let mut failure = None;
        let (_, best) = golden_section_max(
            |v| match self.pressure.value(sign * v) {
                Ok(q) => v * u.abs() - q,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            0.0,
            cap,
            LAMBDA_REL_TOL * cap,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(RateValue::Finite(best.max(0.0)))
    }

    pub fn curve(&self, us: &[f64]) -> Result<Vec<RateValue>> {
        us.iter().map(|&u| self.eval(u)).collect()
    }
}

pub fn rate_j(pressure: Pressure, u: f64) -> Result<RateValue> {
    RateJ::new(pressure)?.eval(u)
}
