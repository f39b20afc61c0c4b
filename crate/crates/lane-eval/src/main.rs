//! Command-line evaluation harness: simulate scenarios, run recorded feature
//! streams through the lane tracker, and compare line functions.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use lane_eval::{
    compare_models, load_config, load_frame_inputs, load_scenario, run_eval,
    write_comparison_outputs, write_eval_outputs, ModelKind, DEFAULT_LANE_WIDTH,
};

#[derive(Parser)]
#[command(name = "lane-eval", about = "Lane model evaluation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate features, odometry, and ground truth for a scenario.
    Simulate {
        /// Scenario file (key = value format).
        scenario: PathBuf,
        /// Output directory for features.csv, odometry.csv, truth.csv.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run recorded features through the tracker and score against truth.
    Eval {
        /// Feature CSV (frame_id,x,y,theta,var_x,var_y,var_theta,type,color).
        frames: PathBuf,
        /// Odometry CSV (frame_id,dx,dy,dpsi).
        odometry: PathBuf,
        /// Ground-truth CSV (pose/line records).
        truth: PathBuf,
        /// Line function: spline or clothoid.
        #[arg(long, default_value = "spline")]
        model: String,
        /// Tracker configuration overrides (key = value format).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for bins.csv, frames.csv, samples.csv, summary.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run spline and clothoid modes on one scenario and compare errors.
    Compare {
        /// Scenario file (key = value format).
        scenario: PathBuf,
        /// Output directory for the comparison tables.
        #[arg(long)]
        out: PathBuf,
        /// Tracker configuration overrides (key = value format).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            seed,
        } => {
            let mut spec = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let sim = lane_sim::simulate(&spec)?;
            std::fs::create_dir_all(&out)?;
            lane_sim::io::write_features(&out.join("features.csv"), &sim.frames)?;
            lane_sim::io::write_odometry(&out.join("odometry.csv"), &sim.frames)?;
            lane_sim::io::write_truth(&out.join("truth.csv"), &sim.poses, &sim.truth)?;
            println!(
                "simulated {} frames into {}",
                sim.frames.len(),
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            frames,
            odometry,
            truth,
            model,
            config,
            out,
        } => {
            let kind = ModelKind::parse(&model)
                .ok_or_else(|| anyhow::anyhow!("unknown model `{model}`; use spline or clothoid"))?;
            let config = kind.apply(load_config(config.as_deref())?);
            let inputs = load_frame_inputs(&frames, &odometry)?;
            let (poses, truth_lines) = lane_sim::io::read_truth(&truth)?;
            if poses.is_empty() || truth_lines.is_empty() {
                anyhow::bail!("ground truth {} has no poses or lines", truth.display());
            }
            let output = run_eval(&inputs, &poses, &truth_lines, config, DEFAULT_LANE_WIDTH)?;
            write_eval_outputs(&out, &output, kind)?;
            println!(
                "evaluated {} frames ({} with an empty model), overall rmse {}",
                output.total_frames, output.empty_model_frames, output.overall_rmse
            );
            Ok(())
        }
        Command::Compare {
            scenario,
            out,
            config,
        } => {
            let spec = load_scenario(&scenario)?;
            let config = load_config(config.as_deref())?;
            let sim = lane_sim::simulate(&spec)?;
            let cmp = compare_models(&spec, &sim, config)?;
            write_comparison_outputs(&out, &cmp)?;
            println!(
                "compared {} frames: max rmse spline {}, clothoid {}, ratio {}",
                cmp.spline.total_frames,
                cmp.max_spline_rmse,
                cmp.max_clothoid_rmse,
                cmp.max_rmse_ratio
            );
            Ok(())
        }
    }
}
