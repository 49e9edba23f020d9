//! Index combinatorics behind nonconventional sums.
//!
//! With `r₁ < … < r_m` the primes not exceeding `ℓ`, every integer `n ≥ 1`
//! factors uniquely as `n = a·h` with `a` coprime to all `r_i` and `h` a
//! product of the `r_i` (an `r`-smooth number). The sets
//! `B_N(a) = {a·h ≤ N}` therefore partition `{1, …, N}`, and the summands of
//! `S_N` indexed by different fibers share no `X` values.
//!
//! The number of lattice points `|D(ρ)|` equals the number of smooth numbers
//! `≤ e^ρ`, so with `h₁ = 1 < h₂ < …` the smooth numbers in order,
//! `|D(ρ)| = l` exactly on `[ln h_l, ln h_{l+1})`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

/// The primes `r₁ < … < r_m` not exceeding `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimeBasis {
    ell: usize,
    primes: Vec<u64>,
    r_const: f64,
}

impl PrimeBasis {
    pub fn new(ell: usize) -> Result<Self> {
        primes_up_to(ell)
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn m(&self) -> usize {
        self.primes.len()
    }

    /// `r = Π (1 − 1/r_k)`, the density of integers coprime to the basis.
    pub fn r_const(&self) -> f64 {
        self.r_const
    }

    pub fn is_coprime(&self, a: u64) -> bool {
        self.primes.iter().all(|&p| a % p != 0)
    }
}

pub fn primes_up_to(ell: usize) -> Result<PrimeBasis> {
    if ell < 1 {
        return Err(Error::input("ell must be at least 1"));
    }
    let mut composite = vec![false; ell + 1];
    let mut primes = Vec::new();
    for n in 2..=ell {
        if !composite[n] {
            primes.push(n as u64);
            let mut k = n * n;
            while k <= ell {
                composite[k] = true;
                k += n;
            }
        }
    }
    let r_const = primes.iter().map(|&p| 1.0 - 1.0 / p as f64).product();
    Ok(PrimeBasis {
        ell,
        primes,
        r_const,
    })
}

/// Increasing smooth numbers `h₁ = 1 < h₂ < …` over a prime basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothSequence {
    basis: PrimeBasis,
    h: Vec<u128>,
}

/// Dijkstra-style k-way merge of the streams `r_i·h`, stopping when `keep_going`
/// declines the next value. The flag reports that every stream overflowed `u128`.
fn merge_until(
    primes: &[u64],
    mut keep_going: impl FnMut(&[u128], u128) -> bool,
) -> (Vec<u128>, bool) {
    let mut h = vec![1u128];
    if primes.is_empty() {
        return (h, false);
    }
    let mut cursors = vec![0usize; primes.len()];
    let mut heads: Vec<Option<u128>> = primes.iter().map(|&p| Some(p as u128)).collect();
    loop {
        let Some(next) = heads.iter().flatten().copied().min() else {
            return (h, true);
        };
        if !keep_going(&h, next) {
            return (h, false);
        }
        h.push(next);
        for ((head, cursor), &p) in heads.iter_mut().zip(cursors.iter_mut()).zip(primes) {
            if *head == Some(next) {
                // h[cursor] < next, so cursor + 1 is still in range
                *cursor += 1;
                *head = h[*cursor].checked_mul(p as u128);
            }
        }
    }
}

/// First `count + 1` smooth numbers, so that `h_l` and `h_{l+1}` are known for `l ≤ count`.
pub fn smooth_numbers(basis: &PrimeBasis, count: usize) -> Result<SmoothSequence> {
    if count < 1 {
        return Err(Error::input("count must be at least 1"));
    }
    if basis.m() == 0 {
        return Err(Error::input(
            "the empty basis (ell = 1) has the single smooth number 1",
        ));
    }
    let (h, overflowed) = merge_until(basis.primes(), |h, _| h.len() < count + 1);
    if overflowed && h.len() < count + 1 {
        return Err(Error::Capacity(format!(
            "smooth number h_{} exceeds the 128-bit integer range (ell = {})",
            h.len() + 1,
            basis.ell()
        )));
    }
    Ok(SmoothSequence {
        basis: basis.clone(),
        h,
    })
}

/// All smooth numbers `≤ x` in increasing order.
pub fn smooth_up_to(basis: &PrimeBasis, x: u128) -> Vec<u128> {
    if x == 0 {
        return Vec::new();
    }
    merge_until(basis.primes(), |_, next| next <= x).0
}

impl SmoothSequence {
    /// As many smooth numbers as fit in `u128`, at most `max_len`. Works for the empty basis too.
    pub(crate) fn up_to_capacity(basis: &PrimeBasis, max_len: usize) -> Self {
        let (h, _) = merge_until(basis.primes(), |h, _| h.len() < max_len);
        SmoothSequence {
            basis: basis.clone(),
            h,
        }
    }

    pub fn basis(&self) -> &PrimeBasis {
        &self.basis
    }

    /// All generated values `h₁, h₂, …`.
    pub fn values(&self) -> &[u128] {
        &self.h
    }

    /// Number of levels `l` for which both `h_l` and `h_{l+1}` are known.
    pub fn levels(&self) -> usize {
        self.h.len().saturating_sub(1)
    }

    /// `h_l`, 1-based.
    pub fn h(&self, l: usize) -> u128 {
        self.h[l - 1]
    }

    /// `ρ_min(l) = ln h_l`
    pub fn rho_min(&self, l: usize) -> f64 {
        (self.h(l) as f64).ln()
    }

    /// `ρ_max(l) = ln h_{l+1}`
    pub fn rho_max(&self, l: usize) -> f64 {
        (self.h(l + 1) as f64).ln()
    }

    /// `w_l = 1/h_l − 1/h_{l+1}` from the exact integers, rounded once per factor.
    pub fn weight(&self, l: usize) -> f64 {
        let (lo, hi) = (self.h(l), self.h(l + 1));
        ((hi - lo) as f64 / lo as f64) / hi as f64
    }

    /// `w_l` as an exact rational.
    pub fn weight_exact(&self, l: usize) -> Ratio<BigUint> {
        let (lo, hi) = (BigUint::from(self.h(l)), BigUint::from(self.h(l + 1)));
        Ratio::new(&hi - &lo, lo * hi)
    }

    /// Upper bound on `Σ_{l > len} 1/h_l`, the reciprocal mass beyond the generated values.
    ///
    /// Takes the smaller of two certified bounds: the lower growth bound
    /// `h_l ≥ 2^{l^{1/m} − 1}` integrated past the last index, and the
    /// lattice-point bound `Ψ(x) ≤ Π (1 + ln x / ln r_i)` integrated against `dx/x²`.
    pub fn reciprocal_tail_bound(&self) -> f64 {
        let m = self.basis.m();
        if m == 0 {
            return 0.0;
        }
        growth_tail_bound(m, self.h.len())
            .min(lattice_tail_bound(&self.basis, *self.h.last().unwrap()))
    }
}

/// `∫_G^∞ 2^{1 − x^{1/m}} dx = 2m·Γ(m, G^{1/m} ln 2) / (ln 2)^m`.
fn growth_tail_bound(m: usize, g: usize) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let z = (g as f64).powf(1.0 / m as f64) * ln2;
    // Γ(m, z) = (m−1)! e^{−z} Σ_{k<m} z^k / k!
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..m {
        term *= z / k as f64;
        series += term;
    }
    let fact: f64 = (1..m).map(|k| k as f64).product();
    2.0 * m as f64 * fact * (-z).exp() * series / ln2.powi(m as i32)
}

/// `∫_H^∞ Π(1 + ln x / ln r_i) x^{−2} dx = e^{−y₀} Σ_k P^{(k)}(y₀)` with `y₀ = ln H`.
fn lattice_tail_bound(basis: &PrimeBasis, h_last: u128) -> f64 {
    // coefficients of P(y) = Π (1 + y / ln r_i), lowest degree first
    let mut poly = vec![1.0];
    for &p in basis.primes() {
        let c = 1.0 / (p as f64).ln();
        let mut next = vec![0.0; poly.len() + 1];
        for (k, &a) in poly.iter().enumerate() {
            next[k] += a;
            next[k + 1] += a * c;
        }
        poly = next;
    }
    let y0 = (h_last as f64).ln();
    let mut total = 0.0;
    let mut deriv = poly;
    while !deriv.is_empty() {
        total += deriv.iter().rev().fold(0.0, |acc, &a| acc * y0 + a);
        deriv = deriv
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| a * k as f64)
            .collect();
    }
    (-y0).exp() * total
}

/// `|D(ρ)|`: lattice points `n ≥ 0` with `Σ n_i ln r_i ≤ ρ`.
///
/// Resolved against the smooth integers `≤ e^ρ`. When `e^ρ` lands within the
/// rounding error of `ln`/`exp` of an integer, that integer is used, so
/// `d_count(ln 8)` counts 8.
pub fn d_count(basis: &PrimeBasis, rho: f64) -> Result<u64> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::input(format!(
            "rho must be finite and nonnegative, got {rho}"
        )));
    }
    let x = rho.exp();
    if x >= 2f64.powi(120) {
        return Err(Error::Capacity(format!(
            "e^rho = {x:e} exceeds the exact integer range"
        )));
    }
    let nearest = x.round();
    // an ulp of ρ is a relative error of about ρ·ε in e^ρ
    let slack = 2.0 * (rho + 2.0) * f64::EPSILON * x.max(1.0);
    let bound = if (x - nearest).abs() <= slack {
        nearest
    } else {
        x.floor()
    };
    Ok(d_count_int(basis, bound as u128))
}

/// Number of smooth numbers `≤ x`.
pub fn d_count_int(basis: &PrimeBasis, x: u128) -> u64 {
    smooth_up_to(basis, x).len() as u64
}

/// `A_N`: integers `a ≤ N` coprime to every prime of the basis.
pub fn coprime_set(basis: &PrimeBasis, n: u64) -> Vec<u64> {
    let mut keep = vec![true; n as usize + 1];
    keep[0] = false;
    for &p in basis.primes() {
        let mut k = p;
        while k <= n {
            keep[k as usize] = false;
            k += p;
        }
    }
    keep.iter()
        .enumerate()
        .filter_map(|(a, &k)| k.then_some(a as u64))
        .collect()
}

/// `B_N(a) = {a·h ≤ N : h smooth}` for `a` coprime to the basis.
pub fn b_set(basis: &PrimeBasis, a: u64, n: u64) -> Result<Vec<u64>> {
    if a == 0 || !basis.is_coprime(a) {
        return Err(Error::input(format!(
            "a = {a} is not a positive integer coprime to the primes {:?}",
            basis.primes()
        )));
    }
    if a > n {
        return Ok(Vec::new());
    }
    Ok(smooth_up_to(basis, (n / a) as u128)
        .into_iter()
        .map(|h| a * h as u64)
        .collect())
}

/// `(a, |B_N(a)|)` for every `a ∈ A_N`.
pub fn fiber_sizes(basis: &PrimeBasis, n: u64) -> Vec<(u64, usize)> {
    let smooth = smooth_up_to(basis, n as u128);
    coprime_set(basis, n)
        .into_iter()
        .map(|a| {
            let cap = (n / a) as u128;
            (a, smooth.partition_point(|&h| h <= cap))
        })
        .collect()
}

/// Whether the fibers `B_N(a)`, `a ∈ A_N`, are disjoint and cover `{1, …, N}`.
pub fn partition_check(basis: &PrimeBasis, n: u64) -> bool {
    let smooth = smooth_up_to(basis, n as u128);
    let mut seen = vec![false; n as usize + 1];
    for a in coprime_set(basis, n) {
        for &h in &smooth {
            let b = a as u128 * h;
            if b > n as u128 {
                break;
            }
            let slot = &mut seen[b as usize];
            if *slot {
                return false;
            }
            *slot = true;
        }
    }
    seen[1..].iter().all(|&s| s)
}

/// `{j·k : m < k ≤ m + b, 1 ≤ j ≤ ℓ}`
pub fn window_index_set(m: u64, b: u64, ell: u64) -> BTreeSet<u64> {
    (m + 1..=m + b)
        .flat_map(|k| (1..=ell).map(move |j| j * k))
        .collect()
}

/// Whether the summands `F(X_k, …, X_{ℓk})`, `m < k ≤ m + b`, touch pairwise
/// disjoint indices, i.e. no `i·k = j·k̃` with `k ≠ k̃`.
pub fn windows_iid(m: u64, b: u64, ell: u64) -> bool {
    window_index_set(m, b, ell).len() as u64 == b * ell
}
