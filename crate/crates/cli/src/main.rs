mod config;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use nonconv_core::erlaw::{experiment, ErConfig};
use nonconv_core::lattice::{
    fiber_sizes, partition_check, primes_up_to, smooth_numbers, PrimeBasis,
};
use nonconv_core::rates::{CramerRate, Pressure, RateJ, RateValue, DEFAULT_BUDGET};
use nonconv_core::simulate::{ldp_estimate, simulate, Mode, TrajectorySpec};
use nonconv_core::{Error, Model, Preset, Result};

use report::{Cell, Format, Report, Table};

/// Large deviations and Erdős–Rényi statistics for nonconventional sums.
#[derive(Debug, Parser)]
#[command(name = "nonconv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, env = "NONCONV_THREADS")]
    threads: Option<usize>,

    /// TOML file with default option values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coprime skeleton, fiber sizes and smooth-number levels of {1..N}.
    Structure(StructureArgs),
    /// Cramér rate I(α) of F under μ^ℓ.
    RateI(RateIArgs),
    /// Pressure Q(λF) with its certified truncation.
    Pressure(PressureArgs),
    /// Nonconventional rate J(u), the Legendre transform of Q.
    RateJ(RateJArgs),
    /// Erdős–Rényi maximal-increment experiment.
    Erlaw(ErlawArgs),
    /// Monte Carlo estimate of P(S_N/N ≥ u) against the rate functions.
    LdpCheck(LdpArgs),
    /// Dump a trajectory (k, S_k).
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in model.
    #[arg(long, value_enum, conflicts_with = "model")]
    preset: Option<PresetArg>,

    /// JSON model file with `values`, `probs`, `ell`, `kind`, optional `table` and `center`.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Number of coordinates ℓ for a preset; must match the file if given with --model.
    #[arg(long)]
    ell: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    RademacherProduct,
    BernoulliProduct,
    IndicatorMatch,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::RademacherProduct => Preset::RademacherProduct,
            PresetArg::BernoulliProduct => Preset::BernoulliProduct,
            PresetArg::IndicatorMatch => Preset::IndicatorMatch,
        }
    }
}

impl ModelArgs {
    fn load(&self) -> Result<(Model, String)> {
        match (&self.model, self.preset) {
            (Some(path), _) => {
                let model = Model::from_path(path)?;
                if let Some(ell) = self.ell {
                    if ell != model.obs.ell() {
                        return Err(Error::Input(format!(
                            "--ell {ell} does not match ell = {} in {}",
                            model.obs.ell(),
                            path.display()
                        )));
                    }
                }
                let id = path
                    .file_stem()
                    .map_or("model".into(), |s| s.to_string_lossy().into_owned());
                Ok((model, id))
            }
            (None, preset) => {
                let preset: Preset = preset.unwrap_or(PresetArg::RademacherProduct).into();
                Ok((
                    preset.build(self.ell.unwrap_or(2))?,
                    preset.name().to_string(),
                ))
            }
        }
    }
}

/// A list of points, or a grid `from, from+step, …, ≤ to`.
#[derive(Debug, Args)]
struct GridArgs {
    /// Grid start.
    #[arg(long, requires_all = ["to", "step"])]
    from: Option<f64>,
    /// Grid end (inclusive).
    #[arg(long)]
    to: Option<f64>,
    /// Grid step.
    #[arg(long)]
    step: Option<f64>,
}

impl GridArgs {
    fn points(&self, explicit: &[f64], name: &str) -> Result<Vec<f64>> {
        let mut pts = explicit.to_vec();
        if let (Some(from), Some(to), Some(step)) = (self.from, self.to, self.step) {
            if !from.is_finite() || !to.is_finite() || !step.is_finite() {
                return Err(Error::Input("grid bounds and step must be finite".into()));
            }
            if !(step > 0.0) {
                return Err(Error::Input(format!(
                    "grid step must be positive, got {step}"
                )));
            }
            if to < from {
                return Err(Error::Input(format!(
                    "grid end {to} is below its start {from}"
                )));
            }
            let count = ((to - from) / step * (1.0 + 1e-12)).floor() as usize;
            if count > 10_000_000 {
                return Err(Error::Capacity(format!("grid has {count} points")));
            }
            pts.extend((0..=count).map(|i| from + i as f64 * step));
        }
        if pts.is_empty() {
            return Err(Error::Input(format!(
                "give --{name} values or a --from/--to/--step grid"
            )));
        }
        if let Some(bad) = pts.iter().find(|x| !x.is_finite()) {
            return Err(Error::Input(format!("--{name} must be finite, got {bad}")));
        }
        Ok(pts)
    }
}

#[derive(Debug, Args)]
struct StructureArgs {
    #[arg(long, default_value_t = 2)]
    ell: usize,
    /// N, at most 1e7.
    #[arg(long, value_parser = parse_count)]
    n: u64,
    /// List every fiber (a, |B_N(a)|) instead of the per-level table.
    #[arg(long)]
    fibers: bool,
}

#[derive(Debug, Args)]
struct RateIArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Points α; comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct PressureOpts {
    /// Certified absolute error of the truncated series.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Table-operation budget for each exact R_l.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Debug, Args)]
struct PressureArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Points λ; comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    opts: PressureOpts,
}

#[derive(Debug, Args)]
struct RateJArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Points u; comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    opts: PressureOpts,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Nonconventional,
    Iid,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Nonconventional => vec![Mode::Nonconventional],
            ModeArg::Iid => vec![Mode::Iid],
            ModeArg::Both => vec![Mode::Nonconventional, Mode::Iid],
        }
    }

    fn single(self) -> Result<Mode> {
        match self {
            ModeArg::Nonconventional => Ok(Mode::Nonconventional),
            ModeArg::Iid => Ok(Mode::Iid),
            ModeArg::Both => Err(Error::Input(
                "--mode both is only supported by erlaw".into(),
            )),
        }
    }
}

#[derive(Debug, Args)]
struct ErlawArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Levels α in (0, M₊); comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<f64>,
    /// Increasing trajectory lengths; comma separated, `1e6` notation accepted.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_count)]
    n: Vec<u64>,
    /// Use seeds 1..=K.
    #[arg(long, default_value_t = 5, conflicts_with = "seed_list")]
    seeds: u64,
    /// Explicit seeds; comma separated.
    #[arg(long, value_delimiter = ',')]
    seed_list: Vec<u64>,
    #[arg(long, value_enum, default_value = "nonconventional")]
    mode: ModeArg,
}

#[derive(Debug, Args)]
struct LdpArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of summands N.
    #[arg(long = "N", value_parser = parse_count)]
    big_n: u64,
    /// Threshold u > 0.
    #[arg(long)]
    u: f64,
    #[arg(long, default_value = "100000", value_parser = parse_count)]
    replicas: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "nonconventional")]
    mode: ModeArg,
    #[command(flatten)]
    opts: PressureOpts,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_count)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Emit every stride-th prefix sum.
    #[arg(long, default_value = "1", value_parser = parse_count)]
    stride: u64,
    #[arg(long, value_enum, default_value = "nonconventional")]
    mode: ModeArg,
}

/// Nonnegative integer, also in exact `1e6` notation.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if f >= 0.0 && f.fract() == 0.0 && f <= 2f64.powi(53) {
        Ok(f as u64)
    } else {
        Err(format!("`{s}` is not a nonnegative integer"))
    }
}

const STRUCTURE_MAX_N: u64 = 10_000_000;

fn structure(args: &StructureArgs) -> Result<Report> {
    if args.n < 1 || args.n > STRUCTURE_MAX_N {
        return Err(Error::Input(format!(
            "N must be in 1..=1e7, got {}",
            args.n
        )));
    }
    let basis = primes_up_to(args.ell)?;
    let fibers = fiber_sizes(&basis, args.n);
    let ok = partition_check(&basis, args.n);
    let report = Report::default()
        .meta("ell", args.ell)
        .meta("N", args.n)
        .meta(
            "primes",
            basis
                .primes()
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta("a_count", fibers.len())
        .meta("partition_ok", ok);
    if args.fibers {
        let mut t = Table::new("fibers", &["a", "size"]);
        for (a, size) in fibers {
            t.push(vec![a.into(), size.into()]);
        }
        return Ok(Report {
            tables: vec![t],
            ..report
        });
    }
    let max_len = fibers.iter().map(|&(_, s)| s).max().unwrap_or(0);
    let mut counts = vec![0u64; max_len + 1];
    for &(_, s) in &fibers {
        counts[s] += 1;
    }
    let mut t = Table::new(
        "levels",
        &["l", "h_l", "rho_min", "rho_max", "w_l", "fibers"],
    );
    if basis.m() == 0 {
        // no primes: h₁ = 1 is the only smooth number and all weight sits at l = 1
        t.push(vec![
            1usize.into(),
            1u64.into(),
            0.0.into(),
            f64::INFINITY.into(),
            1.0.into(),
            counts[1].into(),
        ]);
    } else {
        let seq = smooth_numbers(&basis, max_len)?;
        for l in 1..=max_len {
            t.push(vec![
                l.into(),
                seq.h(l).into(),
                seq.rho_min(l).into(),
                seq.rho_max(l).into(),
                seq.weight(l).into(),
                counts[l].into(),
            ]);
        }
    }
    Ok(Report {
        tables: vec![t],
        ..report
    })
}

fn rate_cells(v: RateValue) -> [Cell; 2] {
    [v.value().into(), v.is_infinite().into()]
}

fn rate_i(args: &RateIArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let alphas = args.grid.points(&args.alpha, "alpha")?;
    let rate = CramerRate::new(&m.dist, &m.obs)?;
    let mut t = Table::new("rows", &["alpha", "I", "is_infinite"]);
    for a in alphas {
        let [v, inf] = rate_cells(rate.eval(a));
        t.push(vec![a.into(), v, inf]);
    }
    Ok(Report::single(t)
        .meta("observable", id)
        .meta("ell", m.obs.ell()))
}

fn build_pressure(m: &Model, opts: &PressureOpts) -> Result<Pressure> {
    let basis = PrimeBasis::new(m.obs.ell())?;
    Ok(Pressure::new(&m.dist, &m.obs, &basis, opts.tol)?.with_budget(opts.budget))
}

fn pressure(args: &PressureArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let lambdas = args.grid.points(&args.lambda, "lambda")?;
    let p = build_pressure(&m, &args.opts)?;
    let mut t = Table::new(
        "rows",
        &["lambda", "Q", "dQ", "truncation", "tol", "tail_bound"],
    );
    for l in lambdas {
        let q = p.eval(l)?;
        t.push(vec![
            l.into(),
            q.value.into(),
            q.derivative.into(),
            q.truncation.into(),
            args.opts.tol.into(),
            q.tail_bound.into(),
        ]);
    }
    Ok(Report::single(t)
        .meta("observable", id)
        .meta("ell", m.obs.ell()))
}

fn rate_j(args: &RateJArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let us = args.grid.points(&args.u, "u")?;
    let j = RateJ::new(build_pressure(&m, &args.opts)?)?;
    let ends = j.endpoints()?;
    let mut t = Table::new("rows", &["u", "J", "is_infinite"]);
    for u in us {
        let [v, inf] = rate_cells(j.eval(u)?);
        t.push(vec![u.into(), v, inf]);
    }
    Ok(Report::single(t)
        .meta("observable", id)
        .meta("ell", m.obs.ell())
        .meta("upper_endpoint", ends.upper)
        .meta("lower_endpoint", ends.lower)
        .meta("lambda_cap", ends.lambda_cap))
}

fn erlaw(args: &ErlawArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let mut cfg = ErConfig::new(
        args.alpha.clone(),
        args.n.iter().map(|&n| n as usize).collect(),
    );
    cfg.seeds = if args.seed_list.is_empty() {
        (1..=args.seeds).collect()
    } else {
        args.seed_list.clone()
    };
    cfg.modes = args.mode.modes();
    let out = experiment(&m.dist, &m.obs, &cfg)?;
    let ell = m.obs.ell();
    let mut rows = Table::new(
        "rows",
        &[
            "ell",
            "observable_id",
            "alpha",
            "I_alpha",
            "n",
            "b_n",
            "seed",
            "mode",
            "max_increment",
            "statistic",
            "normalized",
        ],
    );
    for r in &out.rows {
        rows.push(vec![
            ell.into(),
            id.as_str().into(),
            r.alpha.into(),
            r.i_alpha.into(),
            r.n.into(),
            r.b_n.into(),
            r.seed.into(),
            r.mode.as_str().into(),
            r.max_increment.into(),
            r.statistic.into(),
            r.normalized.into(),
        ]);
    }
    let mut summary = Table::new(
        "summary",
        &[
            "alpha",
            "n",
            "mode",
            "seeds",
            "mean",
            "min",
            "max",
            "mean_abs_dev",
            "max_abs_dev",
        ],
    );
    for s in &out.summary {
        summary.push(vec![
            s.alpha.into(),
            s.n.into(),
            s.mode.as_str().into(),
            s.seeds.into(),
            s.mean.into(),
            s.min.into(),
            s.max.into(),
            s.mean_abs_dev.into(),
            s.max_abs_dev.into(),
        ]);
    }
    Ok(Report {
        meta: Vec::new(),
        tables: vec![rows, summary],
    })
}

fn ldp_check(args: &LdpArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let mode = args.mode.single()?;
    let est = ldp_estimate(
        &m.dist,
        &m.obs,
        args.big_n as usize,
        args.u,
        args.replicas as usize,
        args.seed,
        mode,
    )?;
    let theory_i = CramerRate::new(&m.dist, &m.obs)?.eval(args.u).value();
    let theory_j = match mode {
        // the i.i.d. comparison sum follows I, not J
        Mode::Iid => theory_i,
        Mode::Nonconventional => {
            match RateJ::new(build_pressure(&m, &args.opts)?).and_then(|j| j.eval(args.u)) {
                Ok(v) => v.value(),
                Err(e @ (Error::ToleranceUnreachable { .. } | Error::BudgetExceeded { .. })) => {
                    eprintln!("warning: theory_J unavailable ({e}); reported as nan");
                    f64::NAN
                }
                Err(e) => return Err(e),
            }
        }
    };
    let mut t = Table::new(
        "rows",
        &[
            "N", "u", "replicas", "p_hat", "rate_hat", "ci_low", "ci_high", "theory_J", "theory_I",
        ],
    );
    t.push(vec![
        est.n.into(),
        est.u.into(),
        est.replicas.into(),
        est.p_hat.into(),
        est.rate_hat.into(),
        est.ci_low.into(),
        est.ci_high.into(),
        theory_j.into(),
        theory_i.into(),
    ]);
    Ok(Report::single(t)
        .meta("observable", id)
        .meta("ell", m.obs.ell())
        .meta("mode", mode.as_str())
        .meta("seed", args.seed)
        .meta("hits", est.hits)
        .meta("zero_count", est.zero_count))
}

fn simulate_cmd(args: &SimulateArgs) -> Result<Report> {
    let (m, id) = args.model.load()?;
    let mode = args.mode.single()?;
    if args.stride < 1 {
        return Err(Error::Input("--stride must be at least 1".into()));
    }
    let traj = simulate(&TrajectorySpec {
        seed: args.seed,
        n: args.n as usize,
        dist: &m.dist,
        obs: &m.obs,
        mode,
    })?;
    let mut t = Table::new("rows", &["k", "S_k"]);
    for (k, s) in traj.strided(args.stride as usize) {
        t.push(vec![k.into(), s.into()]);
    }
    Ok(Report::single(t)
        .meta("observable", id)
        .meta("ell", m.obs.ell())
        .meta("mode", mode.as_str())
        .meta("seed", args.seed))
}

fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Structure(a) => structure(a),
        Command::RateI(a) => rate_i(a),
        Command::Pressure(a) => pressure(a),
        Command::RateJ(a) => rate_j(a),
        Command::Erlaw(a) => erlaw(a),
        Command::LdpCheck(a) => ldp_check(a),
        Command::Simulate(a) => simulate_cmd(a),
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let obj =
        serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    eprintln!("{obj}");
    ExitCode::from(code)
}

fn fail_with(e: &Error) -> ExitCode {
    fail(e.kind(), &e.to_string(), e.exit_code() as u8)
}

/// The value of `--config` in raw arguments, if any.
fn config_path(args: &[String]) -> Option<PathBuf> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--config=").map(PathBuf::from)
        }
    })
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    let prog = args.remove(0);
    if let Some(path) = config_path(&args) {
        args = match config::merge(&Cli::command(), args, &path) {
            Ok(a) => a,
            Err(e) => return fail_with(&e),
        };
    }
    let cli = match Cli::try_parse_from(std::iter::once(prog).chain(args)) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("input", e.render().to_string().trim(), 2),
    };

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            return fail("input", &format!("cannot set up {threads} threads: {e}"), 2);
        }
    }

    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => return fail_with(&e),
    };
    let written = match &cli.output {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report.write(cli.format, &mut w)?;
            w.flush()
        }),
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            report.write(cli.format, &mut w).and_then(|_| w.flush())
        }
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("io", &format!("cannot write output: {e}"), 1),
    }
}
