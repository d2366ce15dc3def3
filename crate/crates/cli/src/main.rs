mod config;
mod run;
mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_seeds, read_config_file, resolve, Diagnostics, ExperimentKind};

/// Default output root when `--out` is absent.
const OUT_ENV: &str = "DPA_LAB_OUT";

#[derive(Parser)]
#[command(
    name = "dpa-lab",
    version,
    about = "Distributional principal autoencoder experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment end to end.
    Run(RunArgs),
    /// Redraw figure.svg from the CSVs of an earlier run.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    /// Plain-text `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive range `A..B`.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory; defaults to `$DPA_LAB_OUT/<kind>/<hash prefix>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallel_seeds: usize,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn config_error(d: Diagnostics) -> ExitCode {
    eprintln!("invalid configuration:\n{d}");
    ExitCode::from(2)
}

fn run_command(args: RunArgs) -> ExitCode {
    let mut map = match &args.config {
        Some(p) => match read_config_file(p) {
            Ok(m) => m,
            Err(d) => return config_error(d),
        },
        None => BTreeMap::new(),
    };
    for (key, value) in [
        ("dataset", &args.dataset),
        ("beta", &args.beta),
        ("models", &args.models),
        ("epochs", &args.epochs),
    ] {
        if let Some(v) = value {
            map.insert(key.to_string(), v.clone());
        }
    }
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => return config_error(Diagnostics(vec![format!("--set: expected KEY=VALUE, got `{kv}`")])),
        }
    }
    let seeds = match (&args.seed, &args.seeds) {
        (Some(s), _) => Some(vec![*s]),
        (None, Some(r)) => match parse_seeds(r) {
            Ok(s) => Some(s),
            Err(e) => return config_error(Diagnostics(vec![format!("--seeds: {e}")])),
        },
        (None, None) => None,
    };
    if args.parallel_seeds == 0 {
        return config_error(Diagnostics(vec!["--parallel-seeds: must be positive".into()]));
    }
    let cfg = match resolve(args.kind, &map, seeds) {
        Ok(c) => c,
        Err(d) => return config_error(d),
    };
    let out = args.out.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(cfg.kind.name()).join(&cfg.hash()[..12])
    });
    match run::run(&cfg, &out, args.parallel_seeds) {
        Ok((manifest, summary)) => {
            print!("{summary}");
            println!(
                "wrote {} artifacts to {} in {:.1}s (config_hash={})",
                manifest.artifacts.len(),
                out.display(),
                manifest.wall_clock_secs,
                manifest.config_hash
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Render { input, output } => match run::render(&input, output.as_deref()) {
            Ok(path) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(1)
            }
        },
    }
}
