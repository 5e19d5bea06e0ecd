//! `linknoise` command-line front end.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linknoise::{DissimilarityMetric, Method, ModelKind};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "linknoise",
    version,
    about = "Link-noise guided targeted attacks on graph convolutional networks"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for every section of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a GCN or SGC and save it.
    Train {
        /// Dataset directory or `synthetic:<profile>`.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// Attack individual targets and write one result per target.
    Attack {
        #[arg(long)]
        dataset: Option<String>,
        /// Comma-separated methods (NGA, NMA, NMAB).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        metric: Option<DissimilarityMetric>,
        /// Comma-separated target nodes.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
        #[arg(long)]
        n_targets: Option<usize>,
        /// Saved surrogate model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a full campaign and write the report and summary CSV.
    Evaluate {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        n_targets: Option<usize>,
    },
    /// Recompute adversarial-node statistics from a campaign report and check them.
    Analyze {
        /// Report to analyse (default `<out>/report.json`).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep the toy-model degree and similarity claims.
    VerifyProps,
    /// Exhaustively rank small adversary sets of the noisiest candidates.
    Containment {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<usize>,
    },
    /// Write a synthetic stand-in dataset in the plain-text format.
    Synth {
        /// `cora`, `citeseer` or `pubmed`.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

/// Merges flags over the config file over defaults.
fn resolve(cli: &Cli) -> Result<(Config, PathBuf), CliError> {
    let mut cfg = match &cli.global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(jobs) = cli.global.jobs {
        cfg.jobs = Some(jobs);
    }
    if let Some(seed) = cli.global.seed {
        cfg.seed = Some(seed);
    }
    if let Some(seed) = cfg.seed {
        cfg.train.seed = seed;
        cfg.attack.seed = seed;
        cfg.evaluate.seeds = vec![seed];
        cfg.props.seed = seed;
        cfg.containment.seed = seed;
        cfg.synth.seed = seed;
    }
    let out = cli
        .global
        .out
        .clone()
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Train { dataset, model } => {
            if let Some(d) = dataset {
                cfg.train.dataset = d.clone();
            }
            if let Some(m) = model {
                cfg.train.model = *m;
            }
        }
        Command::Attack {
            dataset,
            methods,
            metric,
            targets,
            n_targets,
            model,
        } => {
            if let Some(d) = dataset {
                cfg.attack.dataset = d.clone();
            }
            if !methods.is_empty() {
                cfg.attack.methods = methods.clone();
            }
            if let Some(m) = metric {
                cfg.attack.metric = *m;
            }
            if !targets.is_empty() {
                cfg.attack.targets = targets.clone();
            }
            if let Some(n) = n_targets {
                cfg.attack.n_targets = *n;
            }
            if let Some(m) = model {
                cfg.attack.model = Some(m.clone());
            }
        }
        Command::Evaluate { dataset, n_targets } => {
            if let Some(d) = dataset {
                cfg.evaluate.dataset = d.clone();
            }
            if let Some(n) = n_targets {
                cfg.evaluate.n_targets = *n;
            }
        }
        Command::Analyze { report } => {
            if let Some(r) = report {
                cfg.analyze.report = Some(r.clone());
            }
        }
        Command::VerifyProps => {}
        Command::Containment { dataset, targets } => {
            if let Some(d) = dataset {
                cfg.containment.dataset = d.clone();
            }
            if !targets.is_empty() {
                cfg.containment.targets = targets.clone();
            }
        }
        Command::Synth { profile, dir } => {
            if let Some(p) = profile {
                cfg.synth.profile = p.clone();
            }
            if let Some(d) = dir {
                cfg.synth.dir = Some(d.clone());
            }
        }
    }
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (cfg, out) = resolve(cli)?;
    if let Some(jobs) = cfg.jobs {
        if jobs == 0 {
            return Err(CliError::new("config", "jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::new("config", e.to_string()))?;
    }
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::new("io", format!("{}: {e}", out.display())))?;
    match cli.command {
        Command::Train { .. } => commands::train(&cfg.train, &out),
        Command::Attack { .. } => commands::attack(&cfg.attack, &out),
        Command::Evaluate { .. } => commands::evaluate(&cfg.evaluate, &out),
        Command::Analyze { .. } => commands::analyze(&cfg.analyze, &out),
        Command::VerifyProps => commands::verify_props(&cfg.props, &out),
        Command::Containment { .. } => commands::containment(&cfg.containment, &out),
        Command::Synth { .. } => commands::synth(&cfg.synth, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                CliError::new("usage", e.to_string().trim_end()).to_json()
            );
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(written) => {
            let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::json!({ "written": files }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
