use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dock_cli::{cmd_ablate, cmd_eval, cmd_report, cmd_train, out_root, CliError};
use dock_core::eval::summary_csv;
use dock_core::ppo::AblationId;

/// Train, evaluate and compare docking policies.
///
/// Exit codes: 0 ok, 1 other failure, 2 config error, 3 numerical failure,
/// 4 checkpoint/config fingerprint mismatch, 5 no completed runs.
#[derive(Parser)]
#[command(name = "dock", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one policy and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory [default: $DOCK_OUT_ROOT/<config>-s<seed>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 300)]
        n_envs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate even if the config does not match the checkpoint's.
        #[arg(long)]
        allow_mismatch: bool,
        /// Task config to evaluate under [default: the checkpoint's own].
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train and evaluate every (config, seed) pair and tabulate the results.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "A,B,C,D")]
        configs: Vec<AblationId>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Output directory [default: $DOCK_OUT_ROOT/ablation].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base config; the ablation section is replaced per run.
        #[arg(long)]
        base_config: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        n_envs: usize,
    },
    /// Rebuild the combined tables from stored evaluation records.
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Train { config, seed, out } => {
            let ckpt = cmd_train(&config, seed, out.as_deref())?;
            println!("{}", ckpt.display());
        }
        Cmd::Eval {
            checkpoint,
            n_envs,
            seed,
            out,
            allow_mismatch,
            config,
        } => {
            let r = cmd_eval(&checkpoint, n_envs, seed, out.as_deref(), allow_mismatch, config.as_deref())?;
            print!("{}", summary_csv(&[(r.config.to_string(), r.summary)]));
        }
        Cmd::Ablate {
            configs,
            seeds,
            out,
            base_config,
            n_envs,
        } => {
            let out = out.unwrap_or_else(|| out_root().join("ablation"));
            let report = cmd_ablate(&configs, &seeds, &out, base_config.as_deref(), n_envs)?;
            print!("{}", summary_csv(&report.rows));
        }
        Cmd::Report { runs } => {
            let report = cmd_report(&runs)?;
            print!("{}", summary_csv(&report.rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
