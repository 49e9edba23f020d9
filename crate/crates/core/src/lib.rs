//! Large deviations and Erdős–Rényi laws for nonconventional sums
//! `S_N = Σ_{n≤N} F(X_n, X_{2n}, …, X_{ℓn})` over i.i.d. finitely supported `X`.
//!
//! * [`model`]: distributions and observables on `ℓ`-tuples.
//! * [`lattice`]: smooth numbers over the primes `≤ ℓ` and the fibers of `{1..N}`.
//! * [`rates`]: the Cramér rate `I`, the pressure `Q` and its transform `J`.
//! * [`simulate`]: reproducible trajectories and Monte Carlo tail estimates.
//! * [`erlaw`]: the maximal window increment statistic.

pub mod conjugate;
pub mod erlaw;
pub mod error;
pub mod lattice;
pub mod model;
pub mod numeric;
pub mod preset;
pub mod rates;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{FiniteDistribution, Observable, ObservableKind};
pub use preset::{Model, Preset};
