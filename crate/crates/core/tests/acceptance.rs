//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nonconv_core::erlaw::{experiment, ErConfig, ErExperiment};
use nonconv_core::lattice::{d_count, fiber_sizes, partition_check, primes_up_to, smooth_numbers};
use nonconv_core::rates::{
    cramer_rate, finite_pressure, r_l, CramerRate, Pressure, RateJ, DEFAULT_BUDGET,
};
use nonconv_core::simulate::{ldp_estimate, LdpEstimate, Mode};
use nonconv_core::{FiniteDistribution, Model, Observable, Preset};
use num_bigint::BigUint;
use num_rational::Ratio;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= limit, || {
        format!("took {took:.1?}, limit {limit:?}")
    })
}

fn lattice_count(primes: &[u64], x: u64) -> u64 {
    match primes.split_first() {
        None => 1,
        Some((&p, rest)) => {
            let (mut total, mut q) = (0, x);
            loop {
                total += lattice_count(rest, q);
                if q < p {
                    return total;
                }
                q /= p;
            }
        }
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    for ell in [2usize, 3, 5] {
        let basis = primes_up_to(ell).map_err(|e| e.to_string())?;
        ensure(partition_check(&basis, 1_000_000), || {
            format!("partition fails, ell={ell}")
        })?;
        let total: usize = fiber_sizes(&basis, 1_000_000).iter().map(|&(_, s)| s).sum();
        ensure(total == 1_000_000, || {
            format!("Σ|B_N(a)| = {total}, ell={ell}")
        })?;
        for k in 1..=10_000u64 {
            let got = d_count(&basis, (k as f64).ln()).map_err(|e| e.to_string())?;
            let want = lattice_count(basis.primes(), k);
            ensure(got == want, || {
                format!("d_count(ln {k}) = {got}, oracle {want}, ell={ell}")
            })?;
        }
        let levels = (1..=500)
            .rev()
            .find(|&l| smooth_numbers(&basis, l).is_ok())
            .unwrap();
        let seq = smooth_numbers(&basis, levels).unwrap();
        let m = basis.m() as f64;
        for l in 1..=levels {
            let lower = ((l as f64).powf(1.0 / m) - 1.0) * std::f64::consts::LN_2;
            ensure(
                seq.rho_max(l) > seq.rho_min(l) && seq.rho_min(l) >= lower - 1e-12,
                || format!("growth bound fails at l={l}, ell={ell}"),
            )?;
        }
    }
    within_time(start, Duration::from_secs(10))?;
    Ok(format!(
        "N=1e6 partitions, d_count oracle k≤1e4, growth bound ({:.1?})",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let basis = primes_up_to(2).unwrap();
    let seq = smooth_numbers(&basis, 101).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for l in 1..=100usize {
        let want = Ratio::new(BigUint::from(1u8), BigUint::from(1u8) << l);
        ensure(seq.weight_exact(l) == want, || format!("w_{l} ≠ 2^-{l}"))?;
        let expected = (l - 1) as f64 * std::f64::consts::LN_2;
        let err = (seq.rho_min(l) - expected).abs();
        worst = worst.max(err / expected.max(1.0));
        ensure(err <= 1e-14 * expected.max(1.0), || {
            format!("ρ_min({l}) off by {err:e}")
        })?;
    }
    Ok(format!(
        "w_l = 2^-l exactly for l ≤ 100, max rel ρ_min error {worst:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let model = Preset::RademacherProduct.build(2).unwrap();
    let basis = primes_up_to(2).unwrap();
    let p = Pressure::new(&model.dist, &model.obs, &basis, 1e-9).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for lambda in [0.25, 0.5, 1.0, 2.0] {
        let q = p.value(lambda).map_err(|e| e.to_string())?;
        let err = (q - f64::cosh(lambda).ln()).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("Q({lambda}) = {q}, error {err:e}"))?;
    }
    let c = Observable::constant(&model.dist, 2, 0.7).unwrap();
    let pc = Pressure::new(&model.dist, &c, &basis, 1e-10).map_err(|e| e.to_string())?;
    for lambda in [-2.0, -0.5, 0.25, 1.0, 2.0] {
        let q = pc.value(lambda).map_err(|e| e.to_string())?;
        ensure((q - 0.7 * lambda).abs() <= 1e-8, || {
            format!("constant: Q({lambda}) = {q}")
        })?;
    }
    within_time(start, Duration::from_secs(5))?;
    Ok(format!(
        "max |Q − ln cosh| = {worst:.1e}, constant F exact ({:.1?})",
        start.elapsed()
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    // gaps at the level of rounding noise are compared with this slack
    const NOISE: f64 = 1e-13;
    let basis = primes_up_to(2).unwrap();
    let mut report = Vec::new();
    for preset in Preset::ALL {
        let Model { dist, obs } = preset.build(2).unwrap();
        let q = Pressure::new(&dist, &obs, &basis, 1e-12)
            .and_then(|p| p.value(1.0))
            .map_err(|e| e.to_string())?;
        let gaps: Vec<f64> = (6..=14)
            .map(|k| finite_pressure(&dist, &obs, &basis, 1.0, 1 << k).map(|f| (f - q).abs()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let last = *gaps.last().unwrap();
        ensure(last <= 0.01, || {
            format!("{}: gap at 2^14 is {last}", preset.name())
        })?;
        for (k, w) in gaps.windows(2).enumerate() {
            ensure(w[1] <= w[0] + NOISE, || {
                format!(
                    "{}: gap rises from {:e} to {:e} at N=2^{}",
                    preset.name(),
                    w[0],
                    w[1],
                    k + 7
                )
            })?;
        }
        report.push(format!("{} {:.1e}", preset.name(), last));
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "gap at N=2^14: {} ({:.1?})",
        report.join(", "),
        start.elapsed()
    ))
}

fn criterion_5() -> Outcome {
    let model = Preset::RademacherProduct.build(2).unwrap();
    let basis = primes_up_to(2).unwrap();
    let j = RateJ::new(
        Pressure::new(&model.dist, &model.obs, &basis, 1e-11).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let (mut worst_i, mut worst_j) = (0.0f64, 0.0f64);
    for k in 1..=9 {
        let a = k as f64 / 10.0;
        let closed = 0.5 * (1.0 + a) * (1.0 + a).ln() + 0.5 * (1.0 - a) * (1.0 - a).ln();
        let i = cramer_rate(&model.dist, &model.obs, a)
            .map_err(|e| e.to_string())?
            .value();
        let jv = j.eval(a).map_err(|e| e.to_string())?.value();
        worst_i = worst_i.max((i - closed).abs());
        worst_j = worst_j.max((jv - i).abs());
    }
    ensure(worst_i <= 1e-8, || {
        format!("|I − closed form| = {worst_i:e}")
    })?;
    ensure(worst_j <= 1e-5, || format!("|J − I| = {worst_j:e}"))?;
    let basis1 = primes_up_to(1).unwrap();
    let mut worst_1 = 0.0f64;
    for preset in Preset::ALL {
        let Model { dist, obs } = preset.build(1).unwrap();
        if obs.is_degenerate() {
            // indicator-match has a single coordinate and is constant
            continue;
        }
        let j1 = RateJ::new(Pressure::new(&dist, &obs, &basis1, 1e-12).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let i1 = CramerRate::new(&dist, &obs).map_err(|e| e.to_string())?;
        let (lo, hi) = (-obs.sup_neg(), obs.sup_pos());
        for k in 1..20 {
            let u = lo + (hi - lo) * k as f64 / 20.0;
            let (a, b) = (
                j1.eval(u).map_err(|e| e.to_string())?.value(),
                i1.eval(u).value(),
            );
            worst_1 = worst_1.max((a - b).abs());
        }
    }
    ensure(worst_1 <= 1e-6, || format!("ell=1: |J − I| = {worst_1:e}"))?;
    Ok(format!(
        "|I − closed| {worst_i:.1e}, |J − I| {worst_j:.1e}, ell=1 |J − I| {worst_1:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let basis = primes_up_to(2).unwrap();
    let mut report = Vec::new();
    for preset in Preset::ALL {
        let Model { dist, obs } = preset.build(2).unwrap();
        let j = RateJ::new(Pressure::new(&dist, &obs, &basis, 1e-10).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let ends = j.endpoints().map_err(|e| e.to_string())?;
        let name = preset.name();
        ensure(
            j.eval(0.0).map_err(|e| e.to_string())?.value() == 0.0,
            || format!("{name}: J(0) ≠ 0"),
        )?;
        let (lo, hi) = (-1.2 * ends.lower, 1.2 * ends.upper);
        let grid: Vec<f64> = (0..200)
            .map(|i| lo + (hi - lo) * i as f64 / 199.0)
            .collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&u| j.eval(u).map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (&u, &v) in grid.iter().zip(&vals) {
            if u > ends.upper + 1e-9 || u < -ends.lower - 1e-9 {
                ensure(v.is_infinite(), || {
                    format!("{name}: J({u}) = {v}, expected +∞")
                })?;
            } else if u != 0.0 {
                ensure(v > 0.0, || format!("{name}: J({u}) = {v} not positive"))?;
            }
        }
        for i in 1..199 {
            let (a, m, b) = (vals[i - 1], vals[i], vals[i + 1]);
            if a.is_finite() && b.is_finite() {
                ensure(m <= 0.5 * (a + b) + 1e-8, || {
                    format!("{name}: convexity fails at u={}", grid[i])
                })?;
            }
        }
        let inc: Vec<(f64, f64)> = grid
            .iter()
            .zip(&vals)
            .filter(|(&u, _)| u >= 0.05 && u <= 0.9 * ends.upper)
            .map(|(&u, &v)| (u, v))
            .collect();
        for w in inc.windows(2) {
            ensure(w[1].1 > w[0].1, || {
                format!("{name}: J not increasing at u={}", w[1].0)
            })?;
        }
        report.push(format!("{name} L+={:.4}", ends.upper));
    }
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("{} ({:.1?})", report.join(", "), start.elapsed()))
}

/// `E exp(λ S_N)` over all `s^{2N}` assignments, with the probability mass
/// aggregated per value of `S_N` before exponentiating.
fn brute_force_mgf(dist: &FiniteDistribution, obs: &Observable, lambda: f64, n: usize) -> f64 {
    let k = 2 * n;
    let s = dist.support_size();
    let mut x = vec![0usize; k + 1];
    let mut mass: BTreeMap<u64, f64> = BTreeMap::new();
    for code in 0..s.pow(k as u32) {
        let (mut c, mut prob) = (code, 1.0);
        for xi in x[1..].iter_mut() {
            *xi = c % s;
            c /= s;
            prob *= dist.probs()[*xi];
        }
        let sum: f64 = (1..=n)
            .map(|m| obs.evaluate(&[x[m], x[2 * m]]).unwrap())
            .sum();
        *mass.entry(sum.to_bits()).or_default() += prob;
    }
    mass.iter()
        .map(|(&bits, &p)| p * (lambda * f64::from_bits(bits)).exp())
        .sum()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let Model { dist, obs } = Preset::RademacherProduct.build(2).unwrap();
    let basis = primes_up_to(2).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=10 {
        for lambda in [-1.0, -0.5, 0.5, 1.0] {
            let exact = brute_force_mgf(&dist, &obs, lambda, n);
            let mut product = 1.0;
            for (_, size) in fiber_sizes(&basis, n as u64) {
                product *= r_l(&dist, &obs, &basis, lambda, size, DEFAULT_BUDGET)
                    .map_err(|e| e.to_string())?;
            }
            let err = (product - exact).abs();
            worst = worst.max(err);
            ensure(err <= 1e-10, || {
                format!("N={n} λ={lambda}: {product} vs {exact}")
            })?;
        }
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "max |Π R − E e^(λS_N)| = {worst:.1e} for N ≤ 10 ({:.1?})",
        start.elapsed()
    ))
}

fn ldp_runs() -> Result<Vec<LdpEstimate>, String> {
    [1usize, 2]
        .iter()
        .map(|&ell| {
            let Model { dist, obs } = Preset::RademacherProduct.build(ell).unwrap();
            ldp_estimate(&dist, &obs, 60, 0.3, 100_000, 1, Mode::Nonconventional)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// `P(Bin(60, 1/2) ≥ 39)`, which is `P(S_60 ≥ 18)` for a ±1 walk.
fn binomial_tail() -> f64 {
    let mut c = 1.0f64;
    let mut tail = 0.0;
    for k in 0..=60u32 {
        if k >= 39 {
            tail += c;
        }
        c = c * (60 - k) as f64 / (k + 1) as f64;
    }
    tail / 2f64.powi(60)
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let runs = ldp_runs()?;
    let i_alpha = 0.045701;
    let band = (0.7 * i_alpha, 1.3 * i_alpha);
    let p_exact = binomial_tail();
    let exact_rate = -p_exact.ln() / 60.0;
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for (ell, est) in [1, 2].into_iter().zip(&runs) {
        // the ±1 product sum is exactly a binomial walk for both ell = 1 and ell = 2
        let se = (p_exact * (1.0 - p_exact) / est.replicas as f64).sqrt();
        if (est.p_hat - p_exact).abs() > 4.0 * se {
            failures.push(format!(
                "ell={ell}: p_hat {} disagrees with binomial {p_exact}",
                est.p_hat
            ));
        }
        if !(band.0..=band.1).contains(&est.rate_hat) {
            failures.push(format!(
                "ell={ell}: rate_hat {:.5} outside [{:.5}, {:.5}]",
                est.rate_hat, band.0, band.1
            ));
        }
        report.push(format!("ell={ell} rate_hat {:.5}", est.rate_hat));
    }
    within_time(start, Duration::from_secs(60))?;
    let detail = format!(
        "{}; exact binomial rate at N=60 is {exact_rate:.5} = {:.3}·I(0.3) ({:.1?})",
        report.join(", "),
        exact_rate / i_alpha,
        start.elapsed()
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn er_run() -> Result<ErExperiment, String> {
    let Model { dist, obs } = Preset::RademacherProduct.build(2).unwrap();
    let mut cfg = ErConfig::new(vec![0.5], vec![10_000, 1_000_000]);
    cfg.modes = vec![Mode::Nonconventional, Mode::Iid];
    experiment(&dist, &obs, &cfg).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let out = er_run()?;
    let get = |n: usize, mode: Mode| {
        out.summary
            .iter()
            .find(|s| s.n == n && s.mode == mode)
            .copied()
            .unwrap()
    };
    let big = get(1_000_000, Mode::Nonconventional);
    let small = get(10_000, Mode::Nonconventional);
    let iid = get(1_000_000, Mode::Iid);
    let b_n = out.rows.iter().find(|r| r.n == 1_000_000).unwrap().b_n;
    ensure(b_n == 105, || format!("b_n = {b_n}, expected 105"))?;
    ensure((0.4..=0.6).contains(&big.mean), || {
        format!("mean statistic {:.4} outside [0.4, 0.6]", big.mean)
    })?;
    ensure(big.mean_abs_dev <= small.mean_abs_dev, || {
        format!(
            "mean |stat − α| grew: {:.4} at 1e4, {:.4} at 1e6",
            small.mean_abs_dev, big.mean_abs_dev
        )
    })?;
    ensure((iid.mean - big.mean).abs() < 0.1, || {
        format!(
            "iid mean {:.4} vs nonconventional {:.4}",
            iid.mean, big.mean
        )
    })?;
    within_time(start, Duration::from_secs(300))?;
    Ok(format!(
        "mean {:.4}, |stat − α| {:.4} (1e4) → {:.4} (1e6), iid mean {:.4} ({:.1?})",
        big.mean,
        small.mean_abs_dev,
        big.mean_abs_dev,
        iid.mean,
        start.elapsed()
    ))
}

fn criterion_10() -> Outcome {
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| {
            let ldp = serde_json::to_string(&ldp_runs()?).map_err(|e| e.to_string())?;
            let er = serde_json::to_string(&er_run()?).map_err(|e| e.to_string())?;
            Ok(ldp + &er)
        })
    };
    let one = run(1)?;
    for threads in [2, 4] {
        ensure(run(threads)? == one, || {
            format!("output differs with {threads} threads")
        })?;
    }
    ensure(run(1)? == one, || {
        "repeated single-thread run differs".to_string()
    })?;
    Ok(format!(
        "criteria 8–9 outputs identical across 1, 2, 4 threads ({} bytes)",
        one.len()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("lattice exactness", criterion_1),
        ("weight collapse at ell=2", criterion_2),
        ("pressure closed form", criterion_3),
        ("finite pressure convergence", criterion_4),
        ("Legendre oracles", criterion_5),
        ("rate function shape", criterion_6),
        ("brute-force pressure oracle", criterion_7),
        ("LDP desk check", criterion_8),
        ("Erdős–Rényi law", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
