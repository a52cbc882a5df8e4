use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use essograph::citest::{audit_closure, CiLedger};
use essograph::data::{load_table, Dataset};
use essograph::graph::serialize::{to_dot, to_json};
use essograph::learner::{learn, Algorithm, LearnerConfig};
use essograph::synth::{run_experiment, ExperimentConfig};
use essograph::Error;

/// Learns essential graphs from categorical data.
#[derive(Parser)]
#[command(name = "essograph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn an essential graph from a CSV or TSV file.
    Learn(LearnArgs),
    /// Run simulation trials from a key = value config file, writing JSON lines.
    Synth {
        config: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a dumped ledger for closure violations.
    Audit { ledger: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    M3pc,
    Mmpc,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(clap::Args)]
struct LearnArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Largest conditioning set tested.
    #[arg(long, default_value_t = 3)]
    max_cond: usize,
    #[arg(long)]
    no_consistency: bool,
    #[arg(long, value_enum, default_value = "m3pc")]
    algorithm: AlgorithmArg,
    /// Comma-separated column names giving the processing order.
    #[arg(long)]
    order: Option<String>,
    /// Tie-break seed for graph repair; 0 is lexicographic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dot")]
    format: Format,
    /// Write the run report (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the graph here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the ledger dump here, for later auditing.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string())),
    }
}

fn apply_order(ds: Dataset, order: Option<&str>) -> Result<Dataset, Error> {
    let Some(order) = order else { return Ok(ds) };
    let perm = order
        .split(',')
        .map(|name| {
            let name = name.trim();
            ds.index_of(name).ok_or_else(|| Error::Argument(format!("--order names unknown column {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ds.permute_columns(&perm)
}

fn cmd_learn(args: &LearnArgs) -> Result<(), Error> {
    let config = LearnerConfig {
        alpha: args.alpha,
        max_cond: args.max_cond,
        consistency: !args.no_consistency,
        algorithm: match args.algorithm {
            AlgorithmArg::M3pc => Algorithm::M3pc,
            AlgorithmArg::Mmpc => Algorithm::Mmpc,
        },
        seed: args.seed,
        ..LearnerConfig::default()
    };
    config.validate()?;
    let file = fs::File::open(&args.input).map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let ds = apply_order(load_table(file)?, args.order.as_deref())?;
    let (outcome, ledger) = learn(&ds, &config)?;
    let text = match args.format {
        Format::Dot => to_dot(&outcome.graph, ds.names())?,
        Format::Json => to_json(&outcome.graph, ds.names())?,
    };
    emit(args.output.as_deref(), &text)?;
    if let Some(path) = &args.report {
        let mut json = serde_json::to_string_pretty(&outcome.report).map_err(|e| Error::Io(e.to_string()))?;
        json.push('\n');
        emit(Some(path), &json)?;
    }
    if let Some(path) = &args.ledger {
        emit(Some(path), &ledger.dump())?;
    }
    Ok(())
}

fn cmd_synth(config: &Path, output: Option<&Path>) -> Result<(), Error> {
    let text = fs::read_to_string(config).map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let mut out = String::new();
    for r in run_experiment(&cfg) {
        out.push_str(&serde_json::to_string(&r).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    emit(output, &out)
}

fn cmd_audit(path: &Path) -> Result<usize, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let ledger = CiLedger::parse_dump(&text)?;
    let violations = audit_closure(&ledger);
    for v in &violations {
        println!("{v}");
    }
    println!("{} statements, {} violations", ledger.len(), violations.len());
    Ok(violations.len())
}

fn configure_threads() {
    let Ok(value) = std::env::var("ESSOGRAPH_THREADS") else { return };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("essograph: ignoring ESSOGRAPH_THREADS={value:?}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Learn(args) => cmd_learn(args).map(|_| 0),
        Command::Synth { config, output } => cmd_synth(config, output.as_deref()).map(|_| 0),
        Command::Audit { ledger } => cmd_audit(ledger).map(|n| u8::from(n > 0)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("essograph: {e}");
            match e {
                Error::Unrecoverable { .. } | Error::RepairDiverged(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
