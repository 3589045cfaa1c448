//! Argument parsing and dispatch for the `kenn` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kenn_core::miner::{MinerConfig, DEFAULT_MAX_LEN};
use kenn_core::train::{Strategy, TrainConfig};

use crate::checkpoint::Paradigm;
use crate::commands::{self, Check, MineOptions, TrainOptions};
use crate::error::{CliError, Result};
use crate::io::write_text;

#[derive(Debug, Parser)]
#[command(name = "kenn", version, about = "Knowledge-enhanced neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine signed-label association rules and write them as clauses.
    Mine(MineArgs),
    /// Train a model on multi-label data or on a node classification graph.
    Train(TrainArgs),
    /// Evaluate a checkpoint on its test split.
    Eval(EvalArgs),
    /// Show the XOR construction that a plain logistic regression cannot fit.
    DemoXor {
        #[arg(long, default_value_t = 5000)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate collision probabilities of the argmax under boosting.
    DemoCollisions {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for boosts smaller than the hard boost that still satisfy a clause.
    CheckMinimality {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference gradient check of a relational model.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0, 1], got {v}"))
    }
}

fn open_unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0, 1), got {v}"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Multi-label CSV, or a CSV of 0/1 label columns only.
    pub labels: PathBuf,
    /// Thresholds used for the Yeast data (support 0.2, confidence 0.99).
    #[arg(long, conflicts_with = "emotions")]
    pub yeast: bool,
    /// Thresholds used for the Emotions data (support 0.2, confidence 0.7).
    #[arg(long)]
    pub emotions: bool,
    /// Minimum support; overrides the preset. Default 0.2.
    #[arg(long, value_parser = unit_interval)]
    pub support: Option<f64>,
    /// Minimum confidence; overrides the preset. Default 0.99.
    #[arg(long, value_parser = unit_interval)]
    pub confidence: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    pub max_len: usize,
    /// Clause file to write; stdout gets the JSON summary either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Schema file to write for the label predicates.
    #[arg(long)]
    pub schema_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyArg {
    E2e,
    Greedy,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Multi-label CSV, or node CSV (`id,<features>,label`) with --edges.
    #[arg(long)]
    pub data: PathBuf,
    /// Edge CSV; switches to node classification.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub schema: PathBuf,
    /// Clause file; without it the base network is trained alone.
    #[arg(long)]
    pub clauses: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "e2e")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "transductive")]
    pub paradigm: Paradigm,
    #[arg(long, default_value_t = 0.5, value_parser = open_unit_interval)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001, value_parser = positive)]
    pub lr: f64,
    /// Minibatch size for multi-label data; full batch when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden layer widths, comma separated; none gives a linear base.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
    /// Number of runs, with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Checkpoint of the first run.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines report file; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Print the JSON line instead of the human summary.
    #[arg(long)]
    pub json: bool,
    /// Evaluate on every row instead of the test split.
    #[arg(long)]
    pub all: bool,
}

fn mine_config(a: &MineArgs) -> MinerConfig {
    let preset = if a.emotions {
        MinerConfig::EMOTIONS
    } else {
        MinerConfig::YEAST
    };
    MinerConfig {
        min_support: a.support.unwrap_or(preset.min_support),
        min_confidence: a.confidence.unwrap_or(preset.min_confidence),
        max_len: a.max_len,
    }
}

fn finish(check: Check, out: &mut dyn Write, name: &str) -> Result<()> {
    let _ = out.write_all(check.text.as_bytes());
    if check.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("{name} failed")))
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Mine(a) => {
            let mined = commands::mine(&MineOptions {
                labels: a.labels.clone(),
                config: mine_config(&a),
            })?;
            if let Some(p) = &a.out {
                write_text(p, &mined.knowledge.to_string())?;
            }
            if let Some(p) = &a.schema_out {
                write_text(p, &mined.schema.to_string())?;
            }
            let _ = out.write_all(mined.output.report.as_bytes());
            let _ = err.write_all(mined.output.human.as_bytes());
        }
        Command::Train(a) => {
            let opts = TrainOptions {
                data: a.data,
                edges: a.edges,
                schema: a.schema,
                clauses: a.clauses,
                paradigm: a.paradigm,
                train_frac: a.train_frac,
                hidden: a.hidden,
                repeat: a.repeat,
                config: TrainConfig {
                    strategy: match a.strategy {
                        StrategyArg::E2e => Strategy::EndToEnd,
                        StrategyArg::Greedy => Strategy::Greedy,
                    },
                    lr: a.lr,
                    epochs: a.epochs,
                    batch_size: a.batch_size,
                    seed: a.seed,
                    ..TrainConfig::default()
                },
            };
            let trained = commands::train_command(&opts)?;
            if let Some(p) = &a.out {
                trained.checkpoint.save(p)?;
            }
            match &a.report {
                Some(p) => write_text(p, &trained.output.report)?,
                None => {
                    let _ = out.write_all(trained.output.report.as_bytes());
                }
            }
            let _ = err.write_all(trained.output.human.as_bytes());
        }
        Command::Eval(a) => {
            let (_, o) = commands::eval_command(&a.model, &a.data, a.edges.as_deref(), a.all)?;
            let text = if a.json { o.report } else { o.human };
            let _ = out.write_all(text.as_bytes());
        }
        Command::DemoXor { epochs, seed } => {
            finish(commands::demo_xor(epochs, seed)?, out, "demo-xor")?
        }
        Command::DemoCollisions { samples, seed } => finish(
            commands::demo_collisions(samples, seed)?,
            out,
            "demo-collisions",
        )?,
        Command::CheckMinimality {
            instances,
            trials,
            seed,
        } => finish(
            commands::minimality(instances, trials, seed)?.1,
            out,
            "check-minimality",
        )?,
        Command::Gradcheck {
            seeds,
            seed,
            tolerance,
        } => finish(
            commands::gradcheck(seeds, seed, tolerance)?,
            out,
            "gradcheck",
        )?,
    }
    Ok(())
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
