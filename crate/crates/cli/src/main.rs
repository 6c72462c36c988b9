//! `polyent`: generate states, evaluate entanglement measures and check
//! monogamy/polygamy inequalities from the command line.
//!
//! Exit codes: 0 on success, 2 when a check reports a certified violation,
//! 1 on any usage or runtime error.

mod dispatch;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use polyent::harness::{self, BatchSpec, Sampler, SampleReport, Status};
use polyent::qstate::{self, DimVector, State};
use polyent::report::{Format, ReportWriter, RunInfo};
use polyent::{InequalityId, OptimizerConfig};

#[derive(Parser, Debug)]
#[command(name = "polyent", version, about = "Entanglement measures and monogamy/polygamy checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a named or random state file.
    State(StateArgs),
    /// Evaluate one entanglement measure on a state file.
    Measure(MeasureArgs),
    /// Check an inequality on a state file or on a batch of sampled states.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct StateArgs {
    /// Named state: bell, ghz, w or werner.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    name: Option<String>,
    /// Number of parties (ghz, w).
    #[arg(long)]
    n: Option<usize>,
    /// Local dimension (ghz).
    #[arg(long)]
    d: Option<usize>,
    /// Singlet weight (werner).
    #[arg(long)]
    p: Option<f64>,
    /// Draw a random state instead of a named one.
    #[arg(long)]
    random: bool,
    /// Subsystem dimensions for --random, e.g. 2,2,2.
    #[arg(long, requires = "random")]
    dims: Option<String>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank of a random mixed state; omit for a Haar-random pure state.
    #[arg(long, requires = "random")]
    rank: Option<usize>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct OptimizerArgs {
    /// Random restarts per optimization.
    #[arg(long)]
    restarts: Option<usize>,
    /// Iteration cap per restart.
    #[arg(long)]
    iterations: Option<usize>,
    /// Ensemble size for convex-roof searches.
    #[arg(long)]
    cardinality: Option<usize>,
    /// Outcome count for measurement searches.
    #[arg(long)]
    outcomes: Option<usize>,
}

impl OptimizerArgs {
    fn config(&self, seed: u64) -> Result<OptimizerConfig, String> {
        let mut cfg = OptimizerConfig::with_seed(seed);
        let positive = |flag: &str, v: usize| {
            if v == 0 {
                Err(format!("--{flag} must be positive"))
            } else {
                Ok(v)
            }
        };
        if let Some(v) = self.restarts {
            cfg.restarts = positive("restarts", v)?;
        }
        if let Some(v) = self.iterations {
            cfg.max_iterations = positive("iterations", v)?;
        }
        if let Some(v) = self.cardinality {
            cfg.ensemble_cardinality = Some(positive("cardinality", v)?);
        }
        if let Some(v) = self.outcomes {
            cfg.measurement_outcomes = Some(positive("outcomes", v)?);
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// entropy, eof, eoa, ue, tangle, tangle_assist, mutual_info,
    /// concurrence or concurrence_assist.
    #[arg(long)]
    measure: String,
    /// State file.
    #[arg(long)]
    state: PathBuf,
    /// Bipartition such as 0:1 or 0,1:2; defaults to subsystem 0 vs the rest.
    #[arg(long)]
    cut: Option<String>,
    /// Optimizer seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// json or csv.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// ckw, dual_tangle, tradeoff, ue_mutual, poly, poly_mixed or npoly.
    #[arg(long)]
    inequality: String,
    /// Check a single state file.
    #[arg(long, conflicts_with_all = ["dims", "samples", "rank"])]
    state: Option<PathBuf>,
    /// Subsystem dimensions of sampled states, e.g. 2,2,2.
    #[arg(long, required_unless_present = "state")]
    dims: Option<String>,
    /// Number of sampled states.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Rank of sampled mixed states; random per sample when omitted.
    #[arg(long)]
    rank: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Focus subsystem for polygamy checks.
    #[arg(long, default_value_t = 0)]
    focus: usize,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// Re-run inconclusive samples once with doubled restarts.
    #[arg(long)]
    escalate: bool,
    /// Record wall-clock times (makes output nondeterministic).
    #[arg(long)]
    timing: bool,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| format!("--out {}: {e}", p.display())),
    }
}

fn parse_dims(text: &str) -> Result<DimVector, String> {
    let dims = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("--dims '{text}': expected comma-separated positive integers"))?;
    if dims.iter().any(|&d| d < 2) {
        return Err(format!("--dims '{text}': every dimension must be at least 2"));
    }
    DimVector::new(dims).map_err(|e| format!("--dims '{text}': {e}"))
}

fn load(path: &PathBuf) -> Result<State, String> {
    qstate::load_state(path).map_err(|e| format!("--state {}: {e}", path.display()))
}

fn cmd_state(args: StateArgs) -> Result<ExitCode, String> {
    let state = if args.random {
        let text = args.dims.as_deref().ok_or("--random needs --dims")?;
        let dims = parse_dims(text)?;
        match args.rank {
            None => State::Pure(qstate::haar_pure(&dims, args.seed)),
            Some(r) => State::Mixed(
                qstate::random_mixed(&dims, r, args.seed).map_err(|e| format!("--rank {r}: {e}"))?,
            ),
        }
    } else {
        let name = args.name.as_deref().ok_or("--name or --random is required")?;
        let mut params = BTreeMap::new();
        if let Some(n) = args.n {
            params.insert("n".to_string(), n as f64);
        }
        if let Some(d) = args.d {
            params.insert("d".to_string(), d as f64);
        }
        if let Some(p) = args.p {
            params.insert("p".to_string(), p);
        }
        qstate::named_state(name, &params).map_err(|e| format!("--name {name}: {e}"))?
    };
    let text = qstate::state_to_json(&state).map_err(|e| e.to_string())?;
    let mut out = open_out(&args.out)?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| format!("--out: {e}"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_measure(args: MeasureArgs) -> Result<ExitCode, String> {
    let kind = args.measure.parse().map_err(|e| format!("--measure: {e}"))?;
    let format: Format = args.format.parse().map_err(|e| format!("--format: {e}"))?;
    let cfg = args.opt.config(args.seed)?;
    let state = load(&args.state)?;
    let outcome = dispatch::measure(kind, &state, args.cut.as_deref(), &cfg)?;
    let mut out = open_out(&args.out)?;
    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&outcome).map_err(|e| e.to_string())?;
            s.push('\n');
            s
        }
        Format::Csv => outcome.to_csv(),
    };
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| format!("--out: {e}"))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, String> {
    let inequality: InequalityId = args.inequality.parse().map_err(|e| format!("--inequality: {e}"))?;
    let format: Format = args.format.parse().map_err(|e| format!("--format: {e}"))?;
    let cfg = args.opt.config(args.seed)?;
    let info = RunInfo { inequality, master_seed: args.seed, timing: args.timing };

    if let Some(path) = &args.state {
        let state = load(path)?;
        let started = Instant::now();
        let flag = |e: polyent::Error| format!("--inequality {inequality} on --state {}: {e}", path.display());
        let mut report = harness::check_state(inequality, &state, args.focus, &cfg).map_err(flag)?;
        let mut escalated = false;
        if args.escalate && report.status == Status::Inconclusive {
            report = harness::check_state(inequality, &state, args.focus, &cfg.escalated()).map_err(flag)?;
            escalated = true;
        }
        let sample = SampleReport {
            sample_id: 0,
            seed: args.seed,
            report,
            escalated,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        let summary = harness::BatchSummary::from_reports([&sample.report]);
        let mut w = ReportWriter::new(open_out(&args.out)?, format, info).map_err(|e| e.to_string())?;
        w.write_sample(&sample).map_err(|e| e.to_string())?;
        w.finish(&summary).map_err(|e| e.to_string())?;
        return Ok(exit_for(summary.violated_certified));
    }

    let dims_text = args.dims.as_deref().ok_or("--dims or --state is required")?;
    let dims = parse_dims(dims_text)?;
    let mut spec = BatchSpec::new(inequality, dims, args.samples, args.seed);
    spec.cfg = cfg;
    spec.focus = args.focus;
    spec.escalate = args.escalate;
    if let Some(r) = args.rank {
        if inequality.takes_pure_states() {
            return Err(format!("--rank: {inequality} samples pure states"));
        }
        spec.sampler = Sampler::RandomMixed { rank: Some(r) };
    }
    spec.validate().map_err(|e| format!("--inequality {inequality} with --dims {dims_text}: {e}"))?;

    let mut w = ReportWriter::new(open_out(&args.out)?, format, info).map_err(|e| e.to_string())?;
    let summary = harness::batch_run_streaming(&spec, |s| w.write_sample(s))
        .map_err(|e| format!("--inequality {inequality}: {e}"))?;
    w.finish(&summary).map_err(|e| e.to_string())?;
    Ok(exit_for(summary.violated_certified))
}

fn exit_for(violations: usize) -> ExitCode {
    if violations > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::State(a) => cmd_state(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
