//! Log-moment generating functions and their Legendre transforms.
//!
//! * [`cramer`]: `φ(t)`, the Cramér rate `I`.
//! * [`chain`]: the dependency structure of one fiber and the exact `R_l(λF)`.
//! * [`pressure`]: `Q(λF)` as the weighted series over fiber lengths, and the finite-`N` pressure.
//! * [`rate_j`]: the nonconventional rate `J`.

use serde::Serialize;

pub mod chain;
pub mod cramer;
pub mod pressure;
pub mod rate_j;

pub use chain::{
    chain_index_structure, ln_r_l, r_l, r_l_mc, ChainStructure, McEstimate, DEFAULT_BUDGET,
};
pub use cramer::{cramer_rate, ln_mgf, mgf, CramerRate};
pub use pressure::{finite_pressure, pressure, Pressure, PressureValue};
pub use rate_j::{rate_j, RateJ};

/// Value of a rate function: finite, or `+∞` outside its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RateValue {
    Finite(f64),
    Infinite,
}

impl RateValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, RateValue::Infinite)
    }

    /// As `f64`, with `+∞` for [`RateValue::Infinite`].
    pub fn value(&self) -> f64 {
        match *self {
            RateValue::Finite(v) => v,
            RateValue::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            RateValue::Finite(v) => Some(v),
            RateValue::Infinite => None,
        }
    }
}

impl From<RateValue> for f64 {
    fn from(v: RateValue) -> f64 {
        v.value()
    }
}
