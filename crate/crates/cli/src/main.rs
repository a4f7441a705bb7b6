//! Command-line frontend: parse, validate, sample, infer, exact, sweep.
//!
//! Every subcommand is deterministic given its flags and seed. Exit codes:
//! 0 on success, 1 on usage errors (bad flags, unreadable or malformed
//! inputs), 2 on inference errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use smp_core::cluster::{
    build_join_graph, build_junction_tree, validate_running_intersection, JoinGraphParams,
};
use smp_core::engine::{
    format_marginals, run_algorithm_1, EngineConfig, ReprKind, RunOutput, Schedule,
};
use smp_core::eval::{
    envelope_to_csv, generate_deterministic, generate_ising, lower_envelope, records_to_csv,
    run_sweep, summary_to_csv, SweepAxis, SweepSpec,
};
use smp_core::exact::{bruteforce_marginals, exact_marginals_capped};
use smp_core::model::{apply_evidence, parse_evidence, parse_uai, GraphicalModel};
use smp_core::sample::{dump_samples, generate, SampleMethod, SamplerConfig};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_INFERENCE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "smp",
    about = "Structured message passing for discrete graphical models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and print a summary
    Parse(ParseArgs),
    /// Build a cluster graph and report running-intersection violations
    Validate(ValidateArgs),
    /// Generate samples and write one assignment per line
    Sample(SampleArgs),
    /// Run structured message passing and write per-variable marginals
    Infer(InferArgs),
    /// Exact marginals and partition function by bucket-tree elimination
    Exact(ExactArgs),
    /// Parameter sweep writing one CSV row per run plus summary rows
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ReprArg {
    Dense,
    Sparse,
    Add,
}

impl From<ReprArg> for ReprKind {
    fn from(r: ReprArg) -> Self {
        match r {
            ReprArg::Dense => ReprKind::Dense,
            ReprArg::Sparse => ReprKind::Sparse,
            ReprArg::Add => ReprKind::Add,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gibbs,
    Importance,
}

impl From<MethodArg> for SampleMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gibbs => SampleMethod::Gibbs,
            MethodArg::Importance => SampleMethod::Importance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    SumProduct,
    BeliefUpdate,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::SumProduct => Schedule::SumProduct,
            ScheduleArg::BeliefUpdate => Schedule::BeliefUpdate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    K,
    Epsilon,
    Ibound,
    Time,
}

#[derive(Args)]
struct ParseArgs {
    /// Model file in the MARKOV text format
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Model file in the MARKOV text format
    #[arg(long)]
    model: PathBuf,
    /// Maximum variables per cluster for the join graph
    #[arg(long, default_value_t = 6)]
    i_bound: usize,
    /// Validate the junction tree instead of the join graph
    #[arg(long)]
    junction_tree: bool,
    /// Keep construction edge labels instead of minimizing them
    #[arg(long)]
    no_minimize_labels: bool,
}

#[derive(Args)]
struct SampleArgs {
    /// Model file in the MARKOV text format
    #[arg(long)]
    model: PathBuf,
    /// Sampling method
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Number of samples
    #[arg(long)]
    k: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Gibbs burn-in sweeps
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    /// Keep every n-th Gibbs sweep
    #[arg(long, default_value_t = 2)]
    thinning: usize,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Model file in the MARKOV text format
    #[arg(long)]
    model: PathBuf,
    /// Evidence file: count then (variable, value) pairs
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Message representation
    #[arg(long, value_enum, default_value = "dense")]
    repr: ReprArg,
    /// Maximum variables per cluster
    #[arg(long, default_value_t = 6)]
    i_bound: usize,
    /// Run without sampling (full supports); the default unless --k is given
    #[arg(long)]
    lossless: bool,
    /// Number of samples inducing the supports (requires --method)
    #[arg(long)]
    k: Option<usize>,
    /// Sampling method (required with --k)
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Random seed for the sampler
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Gibbs burn-in sweeps
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    /// Keep every n-th Gibbs sweep
    #[arg(long, default_value_t = 2)]
    thinning: usize,
    /// Quantization bound on message values (0 disables)
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Message-passing schedule
    #[arg(long, value_enum, default_value = "sum-product")]
    schedule: ScheduleArg,
    /// Iteration bound
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Convergence tolerance on normalized message values
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Damping factor in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    /// Disable support augmentation with factor tuples
    #[arg(long)]
    no_augment: bool,
    /// Per-run wall-clock budget in milliseconds (unset: no budget)
    #[arg(long)]
    time_budget_ms: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    /// Model file in the MARKOV text format
    #[arg(long)]
    model: PathBuf,
    /// Evidence file: count then (variable, value) pairs
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Induced-width cap (default 20, or the SMP_WIDTH_CAP env var)
    #[arg(long)]
    width_cap: Option<usize>,
    /// Use plain enumeration instead of bucket-tree elimination
    #[arg(long)]
    brute_force: bool,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Model file (alternative to --gen)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Generate the model instead: ising | deterministic
    #[arg(long)]
    gen: Option<String>,
    /// Ising grid rows
    #[arg(long, default_value_t = 5)]
    rows: usize,
    /// Ising grid columns
    #[arg(long, default_value_t = 5)]
    cols: usize,
    /// Interaction strength range lower bound
    #[arg(long, default_value_t = 0.05)]
    strength_lo: f64,
    /// Interaction strength range upper bound
    #[arg(long, default_value_t = 0.35)]
    strength_hi: f64,
    /// Variable count for the deterministic generator
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Clause density for the deterministic generator
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    /// Sweep axis
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis values
    #[arg(long)]
    values: String,
    /// Repetitions per axis point
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Message representation
    #[arg(long, value_enum, default_value = "sparse")]
    repr: ReprArg,
    /// Fixed i-bound (non-ibound axes)
    #[arg(long, default_value_t = 6)]
    i_bound: usize,
    /// Fixed sample count (non-k axes); 0 means lossless
    #[arg(long, default_value_t = 512)]
    k: usize,
    /// Fixed quantization bound (non-epsilon axes)
    #[arg(long, default_value_t = 9.5367431640625e-7)]
    epsilon: f64,
    /// Sampling method
    #[arg(long, value_enum, default_value = "gibbs")]
    method: MethodArg,
    /// Message-passing schedule
    #[arg(long, value_enum, default_value = "sum-product")]
    schedule: ScheduleArg,
    /// Base seed; each repetition derives a fresh sampler seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads for independent runs
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Record real wall-clock times (off keeps output byte-reproducible)
    #[arg(long)]
    wall_clock: bool,
    /// Raw CSV output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Envelope CSV output file (time axis only)
    #[arg(long)]
    envelope_output: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.into(),
    }
}

fn inference(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INFERENCE,
        msg: msg.into(),
    }
}

fn load_model(path: &PathBuf, evidence: Option<&PathBuf>) -> Result<GraphicalModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let model = parse_uai(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    match evidence {
        None => Ok(model),
        Some(ep) => {
            let etext = std::fs::read_to_string(ep)
                .map_err(|e| usage(format!("cannot read {}: {e}", ep.display())))?;
            let pairs =
                parse_evidence(&etext).map_err(|e| usage(format!("{}: {e}", ep.display())))?;
            apply_evidence(&model, &pairs).map_err(|e| usage(format!("{}: {e}", ep.display())))
        }
    }
}

fn write_out(path: Option<&PathBuf>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn width_cap_default() -> usize {
    std::env::var("SMP_WIDTH_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(smp_core::exact::DEFAULT_WIDTH_CAP)
}

fn cmd_parse(args: &ParseArgs) -> Result<(), Failure> {
    let model = load_model(&args.model, None)?;
    let max_arity = model
        .factors()
        .iter()
        .map(|f| f.scope().len())
        .max()
        .unwrap_or(0);
    let zeros = model
        .factors()
        .iter()
        .flat_map(|f| f.values())
        .filter(|&&v| v == 0.0)
        .count();
    let cells: usize = model.factors().iter().map(|f| f.len()).sum();
    println!("variables {}", model.n_vars());
    println!("factors {}", model.factors().len());
    println!("max-arity {max_arity}");
    println!("table-cells {cells}");
    println!("zero-cells {zeros}");
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let model = load_model(&args.model, None)?;
    let graph = if args.junction_tree {
        build_junction_tree(&model, width_cap_default()).map_err(|e| inference(e.to_string()))?
    } else {
        let mut params = JoinGraphParams::new(args.i_bound);
        params.minimize_edge_labels = !args.no_minimize_labels;
        build_join_graph(&model, &params).map_err(|e| inference(e.to_string()))?
    };
    let violations = validate_running_intersection(&graph);
    if violations.is_empty() {
        println!("OK");
    } else {
        for v in violations {
            println!("{v}");
        }
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> Result<(), Failure> {
    let model = load_model(&args.model, None)?;
    let mut config = match args.method {
        MethodArg::Gibbs => SamplerConfig::gibbs(args.k, args.seed),
        MethodArg::Importance => SamplerConfig::importance(args.k, args.seed),
    };
    config.burn_in = args.burn_in;
    config.thinning = args.thinning;
    let samples = generate(&model, &config).map_err(|e| inference(e.to_string()))?;
    write_out(args.output.as_ref(), &dump_samples(&samples))
}

fn cmd_infer(args: &InferArgs) -> Result<(), Failure> {
    if args.k.is_some() && args.lossless {
        return Err(usage("--k conflicts with --lossless"));
    }
    if args.k.is_some() && args.method.is_none() {
        return Err(usage("--k requires --method"));
    }
    if args.method.is_some() && args.k.is_none() {
        return Err(usage("--method requires --k"));
    }
    if !(0.0..1.0).contains(&args.damping) {
        return Err(usage("--damping must lie in [0, 1)"));
    }
    let model = load_model(&args.model, args.evidence.as_ref())?;
    let sampler = match (args.k, args.method) {
        (Some(k), Some(m)) => {
            let mut c = match m {
                MethodArg::Gibbs => SamplerConfig::gibbs(k, args.seed),
                MethodArg::Importance => SamplerConfig::importance(k, args.seed),
            };
            c.burn_in = args.burn_in;
            c.thinning = args.thinning;
            Some(c)
        }
        _ => None,
    };
    let params = JoinGraphParams::new(args.i_bound);
    let cfg = EngineConfig {
        epsilon: args.epsilon,
        schedule: args.schedule.into(),
        max_iterations: args.max_iters,
        tolerance: args.tolerance,
        damping: args.damping,
        augment_support: !args.no_augment,
        time_budget_ms: args.time_budget_ms,
    };
    let out: RunOutput = run_algorithm_1(&model, &params, sampler.as_ref(), &cfg, args.repr.into())
        .map_err(|e| inference(e.to_string()))?;
    let mut header: Vec<(&str, String)> = Vec::new();
    if let Some(seed) = out.meta.seed {
        header.push(("seed", seed.to_string()));
    }
    header.push(("iterations", out.meta.iterations.to_string()));
    header.push(("converged", out.meta.converged.to_string()));
    if let Some(w) = &out.meta.warning {
        header.push(("warning", w.clone()));
        eprintln!("warning: {w}");
    }
    eprintln!("wall_ms {}", out.meta.wall_ms);
    write_out(
        args.output.as_ref(),
        &format_marginals(&out.marginals, &out.flagged, &header),
    )
}

fn cmd_exact(args: &ExactArgs) -> Result<(), Failure> {
    let model = load_model(&args.model, args.evidence.as_ref())?;
    let cap = args.width_cap.unwrap_or_else(width_cap_default);
    let result = if args.brute_force {
        bruteforce_marginals(&model, smp_core::model::DEFAULT_ENUM_CAP)
    } else {
        exact_marginals_capped(&model, cap)
    }
    .map_err(|e| inference(e.to_string()))?;
    let flagged = vec![!result.defined; model.n_vars()];
    let header: Vec<(&str, String)> = vec![
        ("z", format!("{:.12e}", result.z)),
        ("width", result.width.to_string()),
    ];
    write_out(
        args.output.as_ref(),
        &format_marginals(&result.marginals, &flagged, &header),
    )
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    let vals: Result<Vec<T>, _> = s.split(',').map(|t| t.trim().parse::<T>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(usage(format!(
            "cannot parse --values as {what} list: `{s}`"
        ))),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let model = match (&args.model, &args.gen) {
        (Some(path), None) => load_model(path, None)?,
        (None, Some(kind)) => match kind.as_str() {
            "ising" => generate_ising(
                args.rows,
                args.cols,
                args.strength_lo,
                args.strength_hi,
                args.gen_seed,
            ),
            "deterministic" => generate_deterministic(args.n, args.density, args.gen_seed),
            other => return Err(usage(format!("unknown generator `{other}`"))),
        },
        _ => return Err(usage("exactly one of --model or --gen is required")),
    };
    let exact = exact_marginals_capped(&model, width_cap_default())
        .map_err(|e| inference(format!("exact oracle: {e}")))?;
    let axis = match args.axis {
        AxisArg::K => SweepAxis::K(parse_list(&args.values, "integer")?),
        AxisArg::Epsilon => SweepAxis::Epsilon(parse_list(&args.values, "real")?),
        AxisArg::Ibound => SweepAxis::IBound(parse_list(&args.values, "integer")?),
        AxisArg::Time => SweepAxis::Time(parse_list(&args.values, "integer")?),
    };
    let is_time = matches!(axis, SweepAxis::Time(_));
    let mut spec = SweepSpec::new(axis);
    spec.reps = args.reps;
    spec.repr = args.repr.into();
    spec.i_bound = args.i_bound;
    spec.k = args.k;
    spec.epsilon = args.epsilon;
    spec.schedule = args.schedule.into();
    spec.method = args.method.into();
    spec.base_seed = args.seed;
    let result = run_sweep(&model, &exact, &spec, args.parallel.max(1));
    let mut csv = records_to_csv(&result.records, args.wall_clock || is_time);
    csv.push_str(&summary_to_csv(&spec, &result.summary));
    write_out(args.output.as_ref(), &csv)?;
    if is_time {
        let SweepAxis::Time(points) = &spec.axis else {
            unreachable!()
        };
        let env = lower_envelope(&result.records, points);
        let env_csv = envelope_to_csv(&env);
        match &args.envelope_output {
            Some(p) => std::fs::write(p, env_csv)
                .map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?,
            None => print!("{env_csv}"),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // keep clap's rendered help/usage text but exit 1 on bad usage
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    let result = match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
