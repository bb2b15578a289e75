use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sparseci::bounds::minimax::{
    length_floor_for, maximized_bound, write_bounds_csv, BoundFamily, FloorCase, SweepGrid,
};
use sparseci::bounds::thresholds::{default_c_s, DEFAULT_C_PRIME};
use sparseci::bounds::{
    lb_noncoverage_g, lb_noncoverage_g_two_sided, lb_support_escape_one_sided,
    lb_support_escape_two_sided, thresholds, BoundValue,
};
use sparseci::intervals::{write_interval_csv, Method, Procedure};
use sparseci::model::{Observation, ProblemParams};
use sparseci::sim::{
    cardinality_trace, default_alpha_prime_grid, default_snr_grid, run_experiment,
    run_sensitivity, write_outputs, ExperimentSpec, SENSITIVITY_SNRS,
};
use sparseci::Error;

#[derive(Parser)]
#[command(name = "sparseci", version, about = "Sparse confidence sets for Gaussian means")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print SNR cutoffs and classify a/sigma.
    Thresholds(ThresholdArgs),
    /// Evaluate minimax lower bounds.
    Bounds(BoundArgs),
    /// Build a confidence set from an observation CSV.
    Construct(ConstructArgs),
    /// Coverage, distance and cardinality over an SNR grid.
    Simulate(SimArgs),
    /// Sweep alpha' at fixed SNR values.
    Sensitivity(SimArgs),
    /// Mean selected-set size per SNR.
    Cardinality(SimArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Defaults to alpha / 2.
    #[arg(long)]
    alpha_prime: Option<f64>,
    #[arg(long, default_value_t = 0.7)]
    delta: f64,
}

impl Common {
    fn params(&self, d: usize, s: usize, a: f64) -> Result<ProblemParams, Error> {
        let ap = self.alpha_prime.unwrap_or(self.alpha / 2.0);
        ProblemParams::new(d, s, a, self.sigma, self.alpha, ap, self.delta)
    }
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    a: f64,
    #[command(flatten)]
    common: Common,
    /// Defaults to log(s + 1).
    #[arg(long)]
    c_s: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_C_PRIME)]
    c_prime: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Thm1,
    Thm4,
    Thm6,
    Thm8,
    Cor3,
}

#[derive(Clone, Copy, ValueEnum)]
enum Index {
    D,
    S,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    a: f64,
    #[command(flatten)]
    common: Common,
    /// Maximise over (rho, A) instead of evaluating one point.
    #[arg(long)]
    sweep: bool,
    /// Bound on expected gap or length.
    #[arg(long)]
    m: Option<f64>,
    /// Index the bound on d or on s.
    #[arg(long, value_enum, default_value = "d")]
    index: Index,
    /// Sub-support size A (or B).
    #[arg(long = "A")]
    big_a: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// Sequence W (or V) for the length floor.
    #[arg(long = "W")]
    big_w: Option<f64>,
    #[arg(long, default_value_t = 200)]
    rho_points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    method: Method,
    /// CSV with header `j,x`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    declared_s: Option<usize>,
    #[arg(long)]
    declared_a: Option<f64>,
    #[command(flatten)]
    common: Common,
    /// Build below the feasibility cutoff.
    #[arg(long)]
    force: bool,
    /// Known support for the oracle method, comma separated.
    #[arg(long, value_delimiter = ',')]
    support: Vec<usize>,
    /// Assert d >= 2 s for the adaptive method.
    #[arg(long)]
    assume_d_ge_2s: bool,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 1000)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    s: usize,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    snr_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',')]
    alpha_prime_grid: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Validation(String),
    Infeasible(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } | Error::Regime(_) => Failure::Infeasible(e.to_string()),
            Error::Io(_) | Error::Internal(_) => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn out_writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_thresholds(args: ThresholdArgs) -> Result<(), Failure> {
    let p = args.common.params(args.d, args.s, args.a)?;
    let c_s = args.c_s.unwrap_or_else(|| default_c_s(p.s()));
    let r = thresholds(&p, c_s, args.c_prime)?;
    let mut out = io::stdout().lock();
    for (name, v) in r.entries() {
        writeln!(out, "{name},{v:.6}")?;
    }
    let snr = p.snr();
    writeln!(out, "snr,{snr:.6}")?;
    writeln!(out, "regime_one_sided,{}", r.classify_one_sided(snr).as_str())?;
    writeln!(out, "regime_two_sided,{}", r.classify_two_sided(snr).as_str())?;
    writeln!(out, "bar_one_sided,{}", r.bar_one_sided(snr).as_str())?;
    writeln!(out, "bar_two_sided,{}", r.bar_two_sided(snr).as_str())?;
    Ok(())
}

fn cmd_bounds(args: BoundArgs) -> Result<(), Failure> {
    let p = args.common.params(args.d, args.s, args.a)?;
    let need_m = || args.m.ok_or_else(|| invalid("--m is required for this bound"));
    let need_a = || args.big_a.ok_or_else(|| invalid("--A is required for this bound"));
    let dim = match args.index {
        Index::D => p.d(),
        Index::S => p.s(),
    };
    let rows: Vec<BoundValue> = match args.kind {
        BoundKind::Thm1 => vec![BoundValue {
            name: "escape".into(),
            value: lb_support_escape_one_sided(&p).value(),
            inputs: vec![
                ("s".into(), p.s() as f64),
                ("delta".into(), p.delta()),
                ("snr".into(), p.snr()),
            ],
        }],
        BoundKind::Thm6 => vec![BoundValue {
            name: "escape_ts".into(),
            value: lb_support_escape_two_sided(&p).value(),
            inputs: vec![
                ("s".into(), p.s() as f64),
                ("delta".into(), p.delta()),
                ("snr".into(), p.snr()),
            ],
        }],
        BoundKind::Thm4 | BoundKind::Thm8 => {
            let two = matches!(args.kind, BoundKind::Thm8);
            let m = need_m()?;
            if args.sweep {
                let grid = SweepGrid {
                    rho_points: args.rho_points,
                    ..SweepGrid::default()
                };
                let family = if two { BoundFamily::TwoSided } else { BoundFamily::OneSided };
                maximized_bound(&p, m, family, grid)?
            } else {
                let a = need_a()?;
                let rho = args.rho.ok_or_else(|| invalid("--rho is required without --sweep"))?;
                let v = if two {
                    lb_noncoverage_g_two_sided(dim, a, rho, m, p.sigma())?
                } else {
                    lb_noncoverage_g(dim, a, rho, m, p.sigma())?
                };
                vec![BoundValue {
                    name: if two { "g_ts" } else { "g" }.into(),
                    value: v.value(),
                    inputs: vec![
                        ("dim".into(), dim as f64),
                        ("A".into(), a as f64),
                        ("rho".into(), rho),
                        ("m".into(), m),
                    ],
                }]
            }
        }
        BoundKind::Cor3 => {
            let w = args.big_w.ok_or_else(|| invalid("--W is required for cor3"))?;
            let case = match args.index {
                Index::D => FloorCase::Dimension,
                Index::S => FloorCase::Sparsity,
            };
            vec![length_floor_for(&p, case, need_a()?, w)?]
        }
    };
    write_bounds_csv(&rows, out_writer(&args.out)?)?;
    Ok(())
}

fn cmd_construct(args: ConstructArgs) -> Result<(), Failure> {
    let c = &args.common;
    let file = File::open(&args.input)
        .map_err(|e| invalid(format!("cannot open {}: {e}", args.input.display())))?;
    let obs = Observation::read_csv(BufReader::new(file), c.sigma)?;
    let d = obs.dim();
    let ap = c.alpha_prime.unwrap_or(c.alpha / 2.0);
    let needs_params = matches!(
        args.method,
        Method::OneSidedHat | Method::OneSidedBar | Method::TwoSidedHat | Method::TwoSidedBar
    );
    let params = || -> Result<ProblemParams, Failure> {
        let s = args.declared_s.ok_or_else(|| invalid("--declared-s is required"))?;
        let a = args.declared_a.ok_or_else(|| invalid("--declared-a is required"))?;
        Ok(c.params(d, s, a)?)
    };
    let proc = match args.method {
        _ if needs_params => {
            let p = params()?;
            match args.method {
                Method::OneSidedHat => Procedure::one_sided_hat(&p, args.force)?,
                Method::OneSidedBar => Procedure::one_sided_bar(&p, args.force)?,
                Method::TwoSidedHat => Procedure::two_sided_hat(&p, args.force)?,
                _ => Procedure::two_sided_bar(&p, args.force)?,
            }
        }
        Method::Adaptive => Procedure::adaptive(d, c.sigma, c.alpha, ap, args.assume_d_ge_2s)?,
        Method::Bonferroni => Procedure::bonferroni(d, c.sigma, c.alpha)?,
        Method::Oracle => Procedure::oracle(d, c.sigma, args.support.clone(), c.alpha)?,
        _ => Procedure::plug_in(d, c.sigma, c.alpha)?,
    };
    for w in proc.warnings() {
        eprintln!("warning: {w}");
    }
    if let Some(tag) = proc.region() {
        eprintln!("region: {}", tag.region.as_str());
    }
    let built = proc.construct_with_info(&obs)?;
    if let Some(s_hat) = built.s_hat {
        let capped = if s_hat.capped { " (capped)" } else { "" };
        eprintln!("s_hat: {}{capped}", s_hat.value);
    }
    write_interval_csv(&built.set, out_writer(&args.out)?)?;
    Ok(())
}

#[derive(Clone, Copy)]
enum SimKind {
    Experiment,
    Sensitivity,
    Cardinality,
}

fn cmd_sim(args: SimArgs, kind: SimKind) -> Result<(), Failure> {
    let c = &args.common;
    let snr_grid = if !args.snr_grid.is_empty() {
        args.snr_grid.clone()
    } else if matches!(kind, SimKind::Sensitivity) {
        SENSITIVITY_SNRS.to_vec()
    } else {
        default_snr_grid()
    };
    let methods = if !args.methods.is_empty() {
        args.methods.clone()
    } else if matches!(kind, SimKind::Cardinality) {
        vec![Method::OneSidedHat, Method::OneSidedBar, Method::PlugIn]
    } else {
        Method::ALL.to_vec()
    };
    // a is set per grid point; the first grid value only seeds validation
    let a0 = snr_grid.first().copied().unwrap_or(1.0) * c.sigma;
    let params = c.params(args.d, args.s, a0)?;
    let alpha_prime_grid = match kind {
        SimKind::Sensitivity if args.alpha_prime_grid.is_empty() => {
            Some(default_alpha_prime_grid(c.alpha))
        }
        SimKind::Sensitivity => Some(args.alpha_prime_grid.clone()),
        _ if !args.alpha_prime_grid.is_empty() => {
            return Err(invalid("--alpha-prime-grid only applies to sensitivity"));
        }
        _ => None,
    };
    let spec = ExperimentSpec {
        params,
        snr_grid,
        methods,
        reps: args.reps,
        seed: args.seed,
        alpha_prime_grid,
        force: args.force,
    };
    let (summary, label) = match kind {
        SimKind::Experiment => (run_experiment(&spec)?, "experiment"),
        SimKind::Sensitivity => (run_sensitivity(&spec)?, "sensitivity"),
        SimKind::Cardinality => (cardinality_trace(&spec)?, "cardinality"),
    };
    write_outputs(&summary, &spec, label, &args.out)?;
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SPARSECI_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| invalid(format!("SPARSECI_THREADS = {v:?} must be a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Failure::Other(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Thresholds(a) => cmd_thresholds(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Simulate(a) => cmd_sim(a, SimKind::Experiment),
        Command::Sensitivity(a) => cmd_sim(a, SimKind::Sensitivity),
        Command::Cardinality(a) => cmd_sim(a, SimKind::Cardinality),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("error: {m}");
            eprintln!("rerun with --force to build anyway");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
