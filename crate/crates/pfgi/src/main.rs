use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfgi::{
    compare_modes, export_mask, run_experiment, Experiment, ExperimentConfig, RunError,
    OUTPUT_DIR_ENV,
};

const METRICS_HELP: &str = "\
metrics.csv has one row per reconstruction mode with the columns:

  mode             traditional | naked_eye_digital | naked_eye_analog | closed_form_oracle
  scene            scene label (letter or file stem)
  pearson          Pearson correlation of the first window image with the object
  visibility_mean  mean (max - min) / (max + min) over all row segments
  mse_vs_oracle    mean squared difference from the mode's noise-free closed form
  frames           frames integrated per exposure window
  seed             noise seed from the config

trace_<mode>.csv has one row per displayed frame:

  frame_index, T (transmissivity), I_settled, steps,
  flag (settled | settled_clamped | hit_max_steps | hit_max_steps_clamped)";

/// Photoelectric-feedback ghost imaging simulator.
#[derive(Debug, Parser)]
#[command(name = "pfgi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured controller and write image, trace and metrics.
    Run {
        config: PathBuf,
        /// Output directory, overriding `outputs.directory`.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Run baseline, digital, analog and closed-form pipelines side by side.
    Compare {
        config: PathBuf,
        /// Output directory, overriding `outputs.directory`.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Mask sequence utilities.
    Mask {
        #[command(subcommand)]
        command: MaskCommand,
    },
    /// Describe the metrics and trace CSV columns.
    #[command(after_help = METRICS_HELP)]
    Metrics,
}

#[derive(Debug, Subcommand)]
enum MaskCommand {
    /// Write every frame as a 0/255 PGM plus manifest.json.
    Export { n: usize, k: usize, dir: PathBuf },
}

fn load(config: &Path, output_dir: Option<PathBuf>) -> Result<Experiment, RunError> {
    Ok(ExperimentConfig::load(config)?.validate(output_dir)?)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let manifest = run_experiment(&load(&config, output_dir)?)?;
            report(&manifest);
        }
        Command::Compare { config, output_dir } => {
            let manifest = compare_modes(&load(&config, output_dir)?)?;
            report(&manifest);
        }
        Command::Mask {
            command: MaskCommand::Export { n, k, dir },
        } => {
            let m = export_mask(n, k, &dir)?;
            println!("wrote {} frames to {}", m.m, dir.display());
        }
        Command::Metrics => println!("{METRICS_HELP}"),
    }
    Ok(())
}

fn report(manifest: &pfgi::RunManifest) {
    for row in &manifest.metrics {
        println!(
            "{:<20} pearson {:+.4}  visibility {:.4}  mse_vs_oracle {:.3e}",
            row.mode, row.pearson, row.visibility_mean, row.mse_vs_oracle
        );
    }
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("outputs in {}", manifest.output_directory);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
