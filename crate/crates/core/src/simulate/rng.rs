//! Counter-based randomness: `X_i` is a pure function of `(seed, i)`.
//!
//! The construction is SplitMix64 evaluated at an arbitrary position:
//!
//! ```text
//! key      = mix64(seed)
//! word(i)  = mix64(key + i·0x9E3779B97F4A7C15)        (wrapping u64 arithmetic)
//! u(i)     = (word(i) >> 11) · 2^-53                    ∈ [0, 1)
//! X_i      = first support index j with u(i) < cdf[j]
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer (Stafford's "Mix13"). Replica
//! seeds are `word` evaluated on a separate key, `mix64(root ^ REPLICA_DOMAIN)`,
//! at position `replica`.

use crate::model::FiniteDistribution;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const REPLICA_DOMAIN: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn word_at(key: u64, i: u64) -> u64 {
    mix64(key.wrapping_add(i.wrapping_mul(GOLDEN_GAMMA)))
}

/// 64 random bits at position `i` of the stream named by `seed`.
#[inline]
pub fn counter_u64(seed: u64, i: u64) -> u64 {
    word_at(mix64(seed), i)
}

#[inline]
pub fn unit_f64(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replica `k` under `root`; independent of evaluation order.
#[inline]
pub fn derive_seed(root: u64, k: u64) -> u64 {
    word_at(mix64(root ^ REPLICA_DOMAIN), k)
}

/// Random-access sampler of `X₁, X₂, …` as support indices.
#[derive(Debug, Clone, Copy)]
pub struct CounterSampler<'a> {
    key: u64,
    dist: &'a FiniteDistribution,
}

impl<'a> CounterSampler<'a> {
    pub fn new(dist: &'a FiniteDistribution, seed: u64) -> Self {
        Self {
            key: mix64(seed),
            dist,
        }
    }

    #[inline]
    pub fn index(&self, i: u64) -> usize {
        self.dist.quantile_index(unit_f64(word_at(self.key, i)))
    }
}

/// Support index of `X_i` under `seed`.
pub fn x_value(dist: &FiniteDistribution, seed: u64, i: u64) -> usize {
    CounterSampler::new(dist, seed).index(i)
}
