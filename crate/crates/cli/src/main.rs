//! `levy-exit`: command-line front end for the exact first exit samplers.
//!
//! Exit codes: 0 success, 1 a validation suite failed, 2 usage or parameter
//! error, 3 internal or truncation error. Errors go to stderr as
//! `error[<kind>]: <message>`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use levy_exit::densities::{self, Representation};
use levy_exit::engine::{sample_passage_event_with, EngineOptions};
use levy_exit::exit_time::sample_exit_time;
use levy_exit::pre_exit::{EnvelopeKind, PreExitSampler};
use levy_exit::subordinator::{PassageKind, StableHalfParams};
use levy_exit::validation::suites::{run_suite, Suite};
use levy_exit::{Error, ExitProblem, ProcessSpec, RandomStream, Side, StopReason, Subordinator};

use output::{Field, Format, RowWriter};

/// Events are generated and written in blocks of this many.
const BLOCK: u64 = 4096;

#[derive(Parser, Debug)]
#[command(name = "levy-exit", version, about = "Exact first exit sampling for subordinated Brownian motion")]
struct Cli {
    /// Worker threads; output order does not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Report progress on stderr.
    #[arg(long, global = true)]
    progress: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// First exit events (time, pre-exit value, exit value) of the process.
    Fpe(FpeArgs),
    /// Brownian first exit times from (-a, a).
    BmExitTime(ExitTimeArgs),
    /// Brownian position at time T given exit at T + t through one side.
    BmPreExit(PreExitArgs),
    /// First passage triplets of the index-1/2 stable subordinator.
    SubordinatorFp(SubordinatorArgs),
    /// Evaluate a Brownian exit density series with its error bound.
    Density(DensityArgs),
    /// Run validation suites and print a summary.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct Sink {
    /// Number of draws.
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct FpeArgs {
    /// `stable:c=<levy coefficient>` or `drift:d2=<delta squared>`.
    #[arg(long)]
    subordinator: String,
    /// Jump truncation radius, `inf` for none.
    #[arg(long, allow_hyphen_values = true)]
    r: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    t0: f64,
    #[arg(long, value_enum, default_value_t = Envelope::Adaptive)]
    envelope: Envelope,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args, Debug)]
struct ExitTimeArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args, Debug)]
struct PreExitArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long = "T", allow_hyphen_values = true)]
    big_t: f64,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, value_enum)]
    side: SideArg,
    #[arg(long, value_enum, default_value_t = Envelope::Adaptive)]
    envelope: Envelope,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args, Debug)]
struct SubordinatorArgs {
    /// Lévy coefficient c of the subordinated process (sigma = c pi).
    #[arg(long, allow_hyphen_values = true)]
    c: f64,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    #[arg(long, default_value_t = f64::INFINITY, allow_hyphen_values = true)]
    horizon: f64,
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    /// Starting points; repeat or comma-separate for a table.
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Exit side, for `exit-side`.
    #[arg(long, value_enum, default_value_t = SideArg::Top)]
    side: SideArg,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Repr::Auto)]
    repr: Repr,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 20_240_917)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the JSON report on stdout instead of the summary.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Envelope {
    Adaptive,
    Paper,
}

impl From<Envelope> for EnvelopeKind {
    fn from(e: Envelope) -> Self {
        match e {
            Envelope::Adaptive => EnvelopeKind::Adaptive,
            Envelope::Paper => EnvelopeKind::Paper,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SideArg {
    #[value(alias = "+")]
    Top,
    #[value(alias = "-")]
    Bottom,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Top => Side::Top,
            SideArg::Bottom => Side::Bottom,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Which {
    ExitTime,
    ExitSide,
    PreExit,
    Survival,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Repr {
    Auto,
    Hitting,
    Eigen,
}

impl From<Repr> for Representation {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Auto => Representation::Auto,
            Repr::Hitting => Representation::Hitting,
            Repr::Eigen => Representation::Eigen,
        }
    }
}

/// Everything that can stop a command.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(io::Error),
    ValidationFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn param(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::Parameter(msg.into()))
}

fn parse_subordinator(spec: &str) -> Result<Subordinator, Failure> {
    let bad = || param(format!("--subordinator expects stable:c=<v> or drift:d2=<v>, got {spec:?}"));
    let (family, rest) = spec.split_once(':').ok_or_else(bad)?;
    let (key, value) = rest.split_once('=').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    Ok(match (family.trim(), key.trim()) {
        ("stable", "c") => Subordinator::stable_half(value)?,
        ("drift", "d2") => Subordinator::drift(value)?,
        _ => return Err(bad()),
    })
}

struct Runner {
    pool: rayon::ThreadPool,
    progress: bool,
}

impl Runner {
    /// Draws `n` rows, row `i` from stream `i` of `seed`, and writes them in
    /// index order. The output file is created only after `draw` is known to
    /// be configured, and removed again if a draw fails.
    fn run<R: Send>(
        &self,
        sink: &Sink,
        columns: &'static [&'static str],
        draw: impl Fn(&mut RandomStream) -> levy_exit::Result<R> + Sync,
        fields: impl Fn(&R) -> Vec<Field>,
    ) -> Result<(), Failure> {
        with_output(sink.out.as_ref(), |w| {
            let mut rows = RowWriter::new(w, sink.format, columns)?;
            let mut start = 0;
            while start < sink.n {
                let end = (start + BLOCK).min(sink.n);
                let block: Vec<R> = self.pool.install(|| {
                    (start..end)
                        .into_par_iter()
                        .map(|i| draw(&mut RandomStream::new(sink.seed, i)))
                        .collect::<levy_exit::Result<_>>()
                })?;
                for (i, r) in (start..end).zip(&block) {
                    let mut row = vec![Field::Int(sink.seed), Field::Int(i)];
                    row.extend(fields(r));
                    rows.row(&row)?;
                }
                start = end;
                if self.progress {
                    eprintln!("progress: {end}/{}", sink.n);
                }
            }
            rows.finish()?;
            Ok(())
        })
    }
}

/// Runs `body` against the output file or stdout; deletes a partial file on error.
fn with_output(
    path: Option<&PathBuf>,
    body: impl FnOnce(&mut dyn Write) -> Result<(), Failure>,
) -> Result<(), Failure> {
    match path {
        None => {
            let stdout = io::stdout();
            let mut lock = BufWriter::new(stdout.lock());
            body(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
        Some(p) => {
            let mut file = BufWriter::new(File::create(p)?);
            let result = body(&mut file).and_then(|_| file.flush().map_err(Failure::from));
            if result.is_err() {
                drop(file);
                let _ = std::fs::remove_file(p);
            }
            result
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(param(format!("--{name} must be finite and > 0, got {v}")))
    }
}

fn fpe(runner: &Runner, args: &FpeArgs) -> Result<(), Failure> {
    let spec = ProcessSpec::new(args.r, parse_subordinator(&args.subordinator)?)?;
    let problem = ExitProblem::new(args.b, args.c, args.t0)?;
    problem.check(&spec)?;
    let options = EngineOptions {
        envelope: args.envelope.into(),
        ..EngineOptions::default()
    };
    const COLUMNS: &[&str] = &["seed", "stream", "time", "pre_value", "value", "stopped_by", "side", "iterations"];
    runner.run(
        &args.sink,
        COLUMNS,
        |s| sample_passage_event_with(&spec, &problem, &options, s, |_| {}),
        |e| {
            vec![
                Field::Real(e.time),
                Field::Real(e.pre_value),
                Field::Real(e.value),
                Field::Text(match e.stopped_by {
                    StopReason::Exit => "exit",
                    StopReason::Horizon => "horizon",
                }),
                Field::Text(match e.side {
                    Some(Side::Top) => "top",
                    Some(Side::Bottom) => "bottom",
                    None => "none",
                }),
                Field::Int(e.iterations),
            ]
        },
    )
}

fn bm_exit_time(runner: &Runner, args: &ExitTimeArgs) -> Result<(), Failure> {
    positive("a", args.a)?;
    runner.run(&args.sink, &["seed", "stream", "time"], |s| sample_exit_time(s, args.a), |t| {
        vec![Field::Real(*t)]
    })
}

fn bm_pre_exit(runner: &Runner, args: &PreExitArgs) -> Result<(), Failure> {
    let sampler = PreExitSampler::new(args.a, args.big_t, args.t, args.envelope.into())?;
    let side: Side = args.side.into();
    runner.run(&args.sink, &["seed", "stream", "x"], |s| sampler.sample(s, side), |x| {
        vec![Field::Real(*x)]
    })
}

fn subordinator_fp(runner: &Runner, args: &SubordinatorArgs) -> Result<(), Failure> {
    let params = StableHalfParams::from_levy_coefficient(args.c)?;
    positive("h", args.h)?;
    if !(args.horizon > 0.0) {
        return Err(param(format!("--horizon must be > 0, got {}", args.horizon)));
    }
    const COLUMNS: &[&str] = &["seed", "stream", "t", "s_minus", "s_plus", "kind"];
    runner.run(
        &args.sink,
        COLUMNS,
        |s| params.sample_first_passage_with_horizon(s, args.h, args.horizon),
        |tr| {
            vec![
                Field::Real(tr.t),
                Field::Real(tr.s_minus),
                Field::Real(tr.s_plus),
                Field::Text(match tr.kind {
                    PassageKind::Jump => "jump",
                    PassageKind::Creep => "creep",
                    PassageKind::Horizon => "horizon",
                }),
            ]
        },
    )
}

fn density(args: &DensityArgs) -> Result<(), Failure> {
    let repr: Representation = args.repr.into();
    let side: Side = args.side.into();
    if matches!(args.which, Which::Survival) && args.x.iter().any(|&x| x != 0.0) {
        return Err(param("survival is tabulated from the centre only; drop --x"));
    }
    // evaluate everything first so a bad point never leaves a partial table
    let values = args
        .x
        .iter()
        .map(|&x| {
            let v = match args.which {
                Which::ExitTime => densities::exit_time_density_with(args.a, args.t, x, args.tol, repr)?,
                Which::ExitSide => densities::exit_side_density_with(args.a, args.t, x, side, args.tol, repr)?,
                Which::PreExit => densities::pre_exit_density_with(args.a, args.t, x, args.tol, repr)?,
                Which::Survival => densities::exit_time_survival_with(args.a, args.t, args.tol, repr)?,
            };
            Ok((x, v))
        })
        .collect::<levy_exit::Result<Vec<_>>>()?;
    let which = match args.which {
        Which::ExitTime => "exit-time",
        Which::ExitSide => "exit-side",
        Which::PreExit => "pre-exit",
        Which::Survival => "survival",
    };
    const COLUMNS: &[&str] = &["which", "a", "t", "x", "value", "error_bound", "terms"];
    with_output(args.out.as_ref(), |w| {
        let mut rows = RowWriter::new(w, args.format, COLUMNS)?;
        for (x, v) in &values {
            rows.row(&[
                Field::Text(which),
                Field::Real(args.a),
                Field::Real(args.t),
                Field::Real(*x),
                Field::Real(v.value),
                Field::Real(v.error_bound),
                Field::Int(v.terms_used as u64),
            ])?;
        }
        rows.finish()?;
        Ok(())
    })
}

fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    let suite: Suite = args.suite.parse()?;
    let report = run_suite(suite, args.seed);
    let json = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
    if let Some(p) = &args.report {
        std::fs::write(p, &json)?;
    }
    let mut out = io::stdout().lock();
    if args.json {
        writeln!(out, "{json}")?;
    } else {
        for c in &report.criteria {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "criterion {} {verdict}: {} ({:.1} s)", c.criterion, c.title, c.seconds)?;
            for check in &c.checks {
                writeln!(out, "    {} {}", if check.pass { "ok  " } else { "FAIL" }, check.summary())?;
            }
            if let Some(e) = &c.error {
                writeln!(out, "    error: {e}")?;
            }
        }
    }
    if report.pass {
        Ok(())
    } else {
        Err(Failure::ValidationFailed)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads == 0 {
        return Err(param("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::Lib(Error::Internal(format!("thread pool: {e}"))))?;
    let runner = Runner {
        pool,
        progress: cli.progress,
    };
    match &cli.command {
        Command::Fpe(a) => fpe(&runner, a),
        Command::BmExitTime(a) => bm_exit_time(&runner, a),
        Command::BmPreExit(a) => bm_pre_exit(&runner, a),
        Command::SubordinatorFp(a) => subordinator_fp(&runner, a),
        Command::Density(a) => density(a),
        Command::Validate(a) => validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprint!("error[usage]: {}", text.strip_prefix("error: ").unwrap_or(&text));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::ValidationFailed) => {
            eprintln!("error[validation]: at least one criterion failed");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error[io]: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e)) => {
            let message = e.to_string();
            let message = message.split_once(": ").map_or(message.as_str(), |(_, m)| m);
            eprintln!("error[{}]: {message}", e.kind());
            ExitCode::from(if matches!(e, Error::Parameter(_)) { 2 } else { 3 })
        }
    }
}
