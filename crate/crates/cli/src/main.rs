use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};
use cxr_severity::dataset::GroupingMode;
use cxr_severity_cli::commands::{self, Context};
use cxr_severity_cli::config::{PipelineConfig, Resolved};
use cxr_severity_cli::manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "cxr-severity", version, about = "Chest X-ray severity scoring pipeline")]
struct Cli {
    /// Pipeline config (TOML). Relative paths inside it are resolved against its directory.
    #[arg(long, global = true, default_value = "pipeline.toml")]
    config: PathBuf,
    /// Use the built-in mock runners instead of model files.
    #[arg(long, global = true)]
    mock_models: bool,
    /// Worker threads for per-image stages (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_parser = parse_grouping)]
    grouping: Option<GroupingMode>,
    #[command(subcommand)]
    command: Command,
}

fn parse_grouping(s: &str) -> Result<GroupingMode, String> {
    s.parse().map_err(|e: cxr_severity::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equalize, segment, clean masks, crop lungs and apply CLAHE.
    Preprocess,
    /// Pathology features of the preprocessed images into features.csv.
    Extract,
    /// Fit the severity model and run the separability study.
    Train,
    /// Score the validation images into scores.csv.
    Score,
    /// Group scores, check trends, compare scorers and write the report.
    Evaluate,
    /// Score followed by evaluate.
    Report,
    /// Every stage in order: preprocess, extract, train, score, evaluate.
    Run,
    /// Dice between predicted and reference masks paired by file name.
    Dice {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "dice.csv")]
        out: PathBuf,
    },
}

fn context(cli: &Cli) -> Result<Context> {
    let mut config = PipelineConfig::load(&cli.config)?;
    config.mock_models |= cli.mock_models;
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }
    if let Some(g) = cli.grouping {
        config.grouping = g;
    }
    let base = cli
        .config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    Context::new(Resolved::new(config, base).context("invalid config")?)
}

fn report(m: &Manifest) -> usize {
    println!("{}: {} ok, {} failed", m.command, m.succeeded, m.failed);
    for f in m.failures() {
        println!("  FAILED {}: {}", f.id, f.detail.as_deref().unwrap_or(""));
    }
    m.failed
}

fn print_trend(r: &cxr_severity::eval::Report) {
    for s in &r.comparison.scorers {
        let counts: Vec<String> = s.grouped.counts.iter().map(|(g, n)| format!("{g}={n}")).collect();
        println!("{}: groups {}", s.name, counts.join(" "));
        for p in &s.trend.predicates {
            println!("  {} {:?}: {}", p.id, p.status, p.expected);
        }
    }
    for e in &r.comparison.spearman {
        match e.rho {
            Some(rho) => println!("spearman {} vs {}: {rho:.4} (n={})", e.a, e.b, e.n_common),
            None => println!("spearman {} vs {}: undefined (n={})", e.a, e.b, e.n_common),
        }
    }
}

fn run(cli: &Cli) -> Result<usize> {
    if let Command::Dice { pred, gold, out } = &cli.command {
        let s = commands::dice_dirs(pred, gold)?;
        commands::write_dice_csv(out, &s)?;
        match s.mean {
            Some(mean) => println!("dice: {} pairs, mean {mean:.6}", s.rows.len()),
            None => println!("dice: no pairs"),
        }
        for id in &s.unpaired {
            println!("  UNPAIRED {id}");
        }
        for (id, why) in &s.failures {
            println!("  FAILED {id}: {why}");
        }
        return Ok(s.unpaired.len() + s.failures.len());
    }
    let ctx = context(cli)?;
    let mut failed = 0;
    let stages: &[&str] = match cli.command {
        Command::Preprocess => &["preprocess"],
        Command::Extract => &["extract"],
        Command::Train => &["train"],
        Command::Score => &["score"],
        Command::Evaluate => &["evaluate"],
        Command::Report => &["score", "evaluate"],
        Command::Run => &["preprocess", "extract", "train", "score", "evaluate"],
        Command::Dice { .. } => unreachable!(),
    };
    for stage in stages {
        failed += match *stage {
            "preprocess" => report(&commands::preprocess(&ctx)?),
            "extract" => report(&commands::extract(&ctx)?),
            "train" => {
                let (m, sep) = commands::train(&ctx)?;
                println!(
                    "train: logistic accuracy {:.4}, tree {}, leave-two-out {}",
                    sep.logistic.train_accuracy,
                    sep.tree
                        .as_ref()
                        .map_or("skipped".to_string(), |t| format!("accuracy {:.4}", t.train_accuracy)),
                    sep.cross_validation
                        .as_ref()
                        .map_or("skipped".to_string(), |c| format!("accuracy {:.4}", c.accuracy)),
                );
                report(&m)
            }
            "score" => report(&commands::score(&ctx)?),
            "evaluate" => {
                let (m, r) = commands::evaluate(&ctx)?;
                print_trend(&r);
                report(&m)
            }
            _ => unreachable!(),
        };
    }
    Ok(failed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
