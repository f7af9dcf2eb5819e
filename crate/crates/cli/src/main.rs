use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use stethogate::objective::reference::run_oracle_suite;
use stethogate::pipeline::{cmd_condition, cmd_evaluate, cmd_featurize, cmd_synth, PipelineConfig};
use stethogate::Error;

/// Multichannel heart-sound noise gating and feature extraction.
#[derive(Debug, Parser)]
#[command(name = "stethogate", version)]
struct Cli {
    /// Pipeline configuration (flat TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic cohort and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Gate and condition every subject of a manifest.
    Condition {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan fragments and write standardised per-split feature files.
    Featurize {
        /// Output directory of `condition`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured test fold.
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Score fragment predictions at fragment and subject level.
    Evaluate {
        /// `subject_id fragment_index label` lines.
        #[arg(long)]
        pred: PathBuf,
        /// Same layout; a feature index file works as is.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the loss and metric kernels against direct reference forms.
    LossCheck {
        #[arg(long, default_value_t = 100)]
        batches: usize,
    },
    /// Print the effective configuration as TOML.
    Config,
}

/// 1 configuration, 2 data, 3 internal invariant.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 1,
        Error::Invariant(_) => 3,
        Error::Io(_)
        | Error::Format(_)
        | Error::Unsupported(_)
        | Error::Incompatible(_)
        | Error::Degenerate(_)
        | Error::Contract(_) => 2,
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Error> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Synth { out } => {
            let s = cmd_synth(&cfg, &out)?;
            println!("{} subjects ({} CAD) -> {}", s.subjects, s.cad, s.manifest.display());
        }
        Command::Condition { manifest, out } => {
            let s = cmd_condition(&manifest, &cfg, &out)?;
            for e in &s.entries {
                println!("{}\t{}\t{}\t{:.4}", e.subject_id, e.label, e.status, e.rejected_fraction);
            }
        }
        Command::Featurize { input, out, fold } => {
            if let Some(f) = fold {
                cfg.fold = f;
                cfg.validate()?;
            }
            let s = cmd_featurize(&input, &cfg, &out)?;
            for c in &s.counts {
                println!("{}\t{}\t{} subjects\t{} fragments", c.split, c.label, c.subjects, c.fragments);
            }
            for (id, why) in &s.excluded {
                println!("excluded {id}: {why}");
            }
        }
        Command::Evaluate { pred, truth, out } => {
            let r = cmd_evaluate(&pred, &truth, &out)?;
            print!("{}{}", r.fragment.to_text(), r.subject.to_text());
        }
        Command::LossCheck { batches } => {
            let checks = run_oracle_suite(cfg.seed, batches)?;
            let mut failed = Vec::new();
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {} cases={} max_abs_err={:.3e} tol={:.0e}",
                    c.name, c.cases, c.max_abs_err, c.tolerance
                );
                if !c.passed() {
                    failed.push(c.name);
                }
            }
            if !failed.is_empty() {
                return Err(Error::Invariant(format!("reference mismatch in {}", failed.join(", "))));
            }
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    };
    info!("using {} worker threads", pool.current_num_threads());
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
