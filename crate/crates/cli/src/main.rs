use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpm_cli::commands::{
    cmd_bench, cmd_eval, cmd_gen, cmd_lp, cmd_oracle, cmd_render, cmd_solve, cmd_tree, report_json, GenArgs, SolveArgs,
};
use gpm_cli::CliError;

/// Joint actor-action labeling with a supervoxel grouping process.
#[derive(Parser)]
#[command(name = "gpm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and its truth file.
    Gen {
        /// Generator config (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Re-randomize the unaries of this fraction of segments.
        #[arg(long, default_value_t = 0.0)]
        flip_fraction: f64,
        /// Instance output path.
        #[arg(long)]
        out: PathBuf,
        /// Truth output path [default: <out stem>.truth.json].
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Solve an instance, or every instance in a directory.
    Solve {
        input: PathBuf,
        /// Solution path, or output directory for a directory input
        /// [default: <input stem>.solution.json].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace path [default: <solution stem>.trace.json].
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Stop after the initial labeling.
        #[arg(long)]
        no_gpm: bool,
        /// Drop video-level terms and fix the video labels empty.
        #[arg(long)]
        no_video: bool,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Nonzero seeds shuffle the expansion order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Select a slice before the first labeling solve.
        #[arg(long)]
        slice_first: bool,
    },
    /// Score a labeling (solution or truth file) against a truth file.
    Eval { solution: PathBuf, truth: PathBuf },
    /// Compare the solvers with exhaustive search on a small instance.
    Oracle { instance: PathBuf },
    /// Time the inference phases.
    Bench {
        instance: PathBuf,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long)]
        no_video: bool,
    },
    /// Write one frame of a labeling as a PPM image.
    Render {
        labeling: PathBuf,
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a supervoxel tree from flat segmentation levels.
    Tree {
        #[arg(required = true)]
        levels: Vec<PathBuf>,
        /// Per-segment voxel counts, whitespace separated.
        #[arg(long)]
        sizes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the slice program for a labeling in LP format.
    Lp { instance: PathBuf, labeling: PathBuf },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Gen {
            config,
            seed,
            flip_fraction,
            out,
            truth,
        } => cmd_gen(&GenArgs {
            config,
            seed,
            flip_fraction,
            out,
            truth,
        }),
        Command::Solve {
            input,
            out,
            trace,
            no_gpm,
            no_video,
            max_iters,
            seed,
            slice_first,
        } => cmd_solve(&SolveArgs {
            input,
            out,
            trace,
            no_gpm,
            no_video,
            max_iters,
            seed,
            slice_first,
        }),
        Command::Eval { solution, truth } => cmd_eval(&solution, &truth).map(|r| report_json(&r)),
        Command::Oracle { instance } => cmd_oracle(&instance).map(|r| report_json(&r)),
        Command::Bench {
            instance,
            repeats,
            no_video,
        } => {
            let args = SolveArgs {
                no_video,
                ..Default::default()
            };
            cmd_bench(&instance, repeats, &args.options()).map(|r| report_json(&r))
        }
        Command::Render {
            labeling,
            instance,
            frame,
            out,
        } => cmd_render(&labeling, &instance, frame, &out),
        Command::Tree { levels, sizes, out } => cmd_tree(&levels, sizes.as_deref(), &out),
        Command::Lp { instance, labeling } => cmd_lp(&instance, &labeling),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::FAILURE
        }
    }
}
