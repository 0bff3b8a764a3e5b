use cernn_cli::{compare_runs, dump_diag_scatter, run_experiment_from_file, CliError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cernn",
    about = "Train and inspect structured-operator recurrent models on desk-scale benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's step budget.
        #[arg(long)]
        max_steps: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<String>,
    },
    /// Summarize finished runs side by side.
    Compare {
        dirs: Vec<PathBuf>,
        /// Also report the first step with loss below this value.
        #[arg(long)]
        threshold: Option<f64>,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Dump the realized diagonal entries of a checkpoint as CSV.
    Diag {
        checkpoint: PathBuf,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            max_steps,
            out,
        } => match run_experiment_from_file(&config, seed, max_steps, out) {
            Ok(summary) => {
                println!(
                    "run complete: model={} seed={} steps={} final_window_loss={:.6e} -> {}",
                    summary.model,
                    summary.seed,
                    summary.steps,
                    summary.final_window_loss,
                    summary.out_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(err) => fail(err),
        },
        Command::Compare {
            dirs,
            threshold,
            json,
        } => match compare_runs(&dirs, threshold) {
            Ok(report) => {
                if json {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                } else {
                    print!("{}", report.text_table());
                }
                ExitCode::SUCCESS
            }
            Err(err) => fail(err),
        },
        Command::Diag { checkpoint, out } => match dump_diag_scatter(&checkpoint) {
            Ok(csv) => {
                if let Some(path) = out {
                    if let Err(e) = std::fs::write(&path, csv.as_bytes()) {
                        eprintln!("writing {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                } else {
                    print!("{csv}");
                }
                ExitCode::SUCCESS
            }
            Err(err) => fail(err),
        },
    }
}
