use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use verirank::commands::{check_files, distill_from_config, evaluate_pools, write_labels};
use verirank::config::{BackendKind, ExternalSettings, Format, RunConfig, TransportKind};
use verirank::pipeline::backend_for;
use verirank::report::{emit_merged, load_run};
use verirank::{compare_strategies, exit, run_benchmark, RunError, DEFAULT_ALPHA};
use verirank_core::rerank::Strategy;

#[derive(Parser)]
#[command(
    name = "verirank",
    version,
    about = "Rerank, evaluate and compare Verilog candidate pools"
)]
struct Cli {
    /// More logging (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score and select one candidate per problem, then write a run directory.
    Rerank(RerankArgs),
    /// Execute every candidate against its testbench and write labels.
    Eval(EvalArgs),
    /// Build a teacher-reasoning dataset from seed examples.
    Distill(DistillArgs),
    /// Check Verilog files; prints `file:line:col: severity: message`.
    CheckSyntax {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// One-sided signed-rank test that run A selects better than run B.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        json: bool,
    },
    /// Merge run directories into one table.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<FormatArg>>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Txt,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Txt => Format::Txt,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendArg {
    Mini,
    Icarus,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Mini => BackendKind::Mini,
            BackendArg::Icarus => BackendKind::Icarus,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TransportArg {
    Http,
    Synthetic,
}

/// Settings shared by commands that may call model endpoints.
#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
    /// Serve model calls from the cache only.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RerankArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problems: Option<PathBuf>,
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(short, long)]
    m: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `name=value`, e.g. `random=7`.
    #[arg(long = "seed", value_parser = parse_seed)]
    seeds: Vec<(String, u64)>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<FormatArg>>,
    #[arg(long)]
    model_label: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    problems: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value = "mini")]
    backend: BackendArg,
    /// Labels output (JSON Lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DistillArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seeds: PathBuf,
    #[arg(short, long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_seed(s: &str) -> Result<(String, u64), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    Ok((name.to_string(), value.parse().map_err(|e| format!("{e}"))?))
}

fn base_config(common: &Common) -> Result<RunConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(b) = common.backend {
        cfg.backend = b.into();
    }
    if let Some(t) = common.transport {
        cfg.transport = match t {
            TransportArg::Http => TransportKind::Http,
            TransportArg::Synthetic => TransportKind::Synthetic,
        };
    }
    cfg.offline |= common.offline;
    if let Some(dir) = &common.cache_dir {
        cfg.cache_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn rerank(args: RerankArgs) -> Result<i32, RunError> {
    let mut cfg = base_config(&args.common)?;
    if let Some(p) = args.problems {
        cfg.problems = p;
    }
    if let Some(c) = args.candidates {
        cfg.candidates = Some(c);
        cfg.generator = None;
    }
    if args.labels.is_some() {
        cfg.labels = args.labels;
    }
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    cfg.seeds.extend(args.seeds);
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(f) = args.format {
        cfg.formats = f.into_iter().map(Format::from).collect();
    }
    if args.model_label.is_some() {
        cfg.model_label = args.model_label;
    }
    let report = run_benchmark(cfg)?;
    let s = &report.summary;
    println!(
        "{}: {} problems, {} decided, {} errored -> {}",
        report.manifest.strategy,
        s.problems,
        s.decided,
        s.errored,
        report.config.out_dir.display()
    );
    if let (Some(p1), Some(r), Some(pk)) = (&s.pass1, &s.reranked_pass1, &s.passk) {
        println!(
            "pass@1 {}  reranked {}  pass@{} {}",
            p1.rounded(),
            r.rounded(),
            report.manifest.k,
            pk.rounded()
        );
    }
    Ok(exit::OK)
}

fn eval(args: EvalArgs) -> Result<i32, RunError> {
    let cfg = RunConfig {
        backend: args.backend.into(),
        external: ExternalSettings::default(),
        ..RunConfig::default()
    };
    let backend = backend_for(&cfg)?;
    let (labels, summary) = evaluate_pools(&args.problems, &args.candidates, args.k, backend.as_ref())?;
    write_labels(&labels, &args.out)?;
    println!(
        "{} candidates, {} unlabeled, {}/{} problems evaluated",
        summary.candidates, summary.unlabeled, summary.evaluated, summary.problems
    );
    if let (Some(p1), Some(pk)) = (&summary.pass1, &summary.passk) {
        println!("pass@1 {}  pass@{} {}", p1.rounded(), args.k, pk.rounded());
    }
    Ok(exit::OK)
}

fn distill(args: DistillArgs) -> Result<i32, RunError> {
    let mut cfg = base_config(&args.common)?;
    if cfg.cache_dir.is_none() {
        cfg.cache_dir = Some(args.out.parent().unwrap_or(Path::new("")).join("cache"));
    }
    let m = distill_from_config(&cfg, &args.seeds, args.k, &args.out)?;
    println!("{} records -> {}", m.records, args.out.display());
    Ok(exit::OK)
}

fn check_syntax(files: &[PathBuf]) -> Result<i32, RunError> {
    let (lines, valid) = check_files(files)?;
    for l in lines {
        println!("{l}");
    }
    Ok(if valid { exit::OK } else { exit::VALIDATION })
}

fn compare(a: &Path, b: &Path, alpha: f64, json: bool) -> Result<i32, RunError> {
    let ra = load_run(a)?;
    let rb = load_run(b)?;
    match compare_strategies(&ra, &rb, alpha) {
        Ok(c) if json => println!("{}", serde_json::to_string_pretty(&c).expect("serializable")),
        Ok(c) => print!("{}", c.to_text()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(exit::VALIDATION);
        }
    }
    Ok(exit::OK)
}

fn report(runs: &[PathBuf], out: &Path, format: Option<Vec<FormatArg>>) -> Result<i32, RunError> {
    let loaded = runs.iter().map(|r| load_run(r)).collect::<Result<Vec<_>, _>>()?;
    let formats: Vec<Format> =
        format.map_or_else(|| Format::ALL.to_vec(), |f| f.into_iter().map(Format::from).collect());
    for path in emit_merged(&loaded, out, &formats)? {
        println!("{}", path.display());
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    let result = match cli.command {
        Command::Rerank(a) => rerank(a),
        Command::Eval(a) => eval(a),
        Command::Distill(a) => distill(a),
        Command::CheckSyntax { files } => check_syntax(&files),
        Command::Compare {
            run_a,
            run_b,
            alpha,
            json,
        } => compare(&run_a, &run_b, alpha, json),
        Command::Report { runs, out, format } => report(&runs, &out, format),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                exit::VALIDATION
            } else {
                exit::RUNTIME
            }
        }
    };
    ExitCode::from(code as u8)
}
