//! One function per subcommand. Each returns the text for stdout.

use std::path::{Path, PathBuf};
use std::time::Duration;

use gpm_core::energy::Labeling;
use gpm_core::gpm::{compute_video_labels, infer_timed, infer_with, Schedule, Solution, SolverOptions};
use gpm_core::hierarchy::{build_tree, parse_flat_segmentation};
use gpm_core::instance::{validate_instance, Instance};
use gpm_core::label_solver::{
    alpha_expansion, brute_force_labeling, build_expansion_problem, check_submodular, icm, VideoTerms,
};
use gpm_core::slice_solver::{brute_force_slice, export_blp, slice_costs, solve_slice_dp};
use gpm_core::synth::{corrupt, generate, SynthConfig};
use gpm_core::GpmError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::files::{is_derived, read_json, read_labeling, sibling, to_pretty, write_json, write_text, SolutionFile, TruthFile};
use crate::metrics::{evaluate, EvalReport};
use crate::render::render_frame;
use crate::CliError;

pub fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let inst: Instance = read_json(path)?;
    let report = validate_instance(&inst);
    if !report.is_valid() {
        return Err(GpmError::InvalidInstance(format!("{}: {}", path.display(), report.to_string().replace('\n', "; "))).into());
    }
    Ok(inst)
}

#[derive(Clone, Debug, Default)]
pub struct GenArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Fraction of segments whose unaries are re-randomized after
    /// generation.
    pub flip_fraction: f64,
    pub out: PathBuf,
    pub truth: Option<PathBuf>,
}

pub fn cmd_gen(args: &GenArgs) -> Result<String, CliError> {
    let mut config = match &args.config {
        Some(path) => read_json::<SynthConfig>(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (mut inst, truth) = generate(&config)?;
    if args.flip_fraction > 0.0 {
        inst = corrupt(&inst, &truth, args.flip_fraction, config.seed.wrapping_add(1))?;
    } else if args.flip_fraction < 0.0 {
        return Err(GpmError::InvalidConfig {
            field: "flip_fraction",
            message: "must be in [0, 1]".into(),
        }
        .into());
    }
    let truth_path = args.truth.clone().unwrap_or_else(|| sibling(&args.out, "truth"));
    write_text(&args.out, &inst.to_json()?)?;
    write_json(
        &truth_path,
        &TruthFile {
            segment_sizes: inst.graph.segment_sizes.clone(),
            n_labels: inst.n_labels(),
            labeling: truth,
        },
    )?;
    Ok(format!(
        "wrote {} ({} segments, {} tree nodes, {} labels) and {}\n",
        args.out.display(),
        inst.n_segments(),
        inst.tree.n_nodes(),
        inst.n_labels(),
        truth_path.display()
    ))
}

#[derive(Clone, Debug, Default)]
pub struct SolveArgs {
    pub input: PathBuf,
    /// Solution file, or output directory when `input` is a directory.
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub no_gpm: bool,
    pub no_video: bool,
    pub max_iters: Option<usize>,
    pub seed: u64,
    pub slice_first: bool,
}

impl SolveArgs {
    pub fn options(&self) -> SolverOptions {
        let max_iters = if self.no_gpm { Some(0) } else { self.max_iters };
        SolverOptions {
            max_iters,
            use_video: !self.no_video,
            schedule: if self.slice_first {
                Schedule::SliceFirst
            } else {
                Schedule::LabelingFirst
            },
            ..SolverOptions::default()
        }
        .with_seed(self.seed)
    }
}

fn solve_one(input: &Path, solution: &Path, trace: &Path, options: &SolverOptions) -> Result<Solution, CliError> {
    let inst = load_instance(input)?;
    let sol = infer_with(&inst, options)?;
    write_json(solution, &SolutionFile::from(&sol))?;
    write_text(trace, &sol.trace.to_json()?)?;
    Ok(sol)
}

fn summary(path: &Path, sol: &Solution) -> String {
    format!(
        "{}: {} iterations, converged {}, {} active nodes\n",
        path.display(),
        sol.iterations,
        sol.converged,
        sol.slice.n_active()
    )
}

pub fn cmd_solve(args: &SolveArgs) -> Result<String, CliError> {
    let options = args.options();
    if !args.input.is_dir() {
        let solution = args.out.clone().unwrap_or_else(|| sibling(&args.input, "solution"));
        let trace = args.trace.clone().unwrap_or_else(|| sibling(&solution, "trace"));
        let sol = solve_one(&args.input, &solution, &trace, &options)?;
        return Ok(summary(&solution, &sol));
    }
    let out_dir = args.out.clone().unwrap_or_else(|| args.input.clone());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let mut inputs = Vec::new();
    for entry in std::fs::read_dir(&args.input).map_err(|e| CliError::io(&args.input, e))? {
        let path = entry.map_err(|e| CliError::io(&args.input, e))?.path();
        if path.extension().is_some_and(|e| e == "json") && !is_derived(&path) {
            inputs.push(path);
        }
    }
    inputs.sort();
    let results: Vec<Result<String, CliError>> = inputs
        .par_iter()
        .map(|input| {
            let name = input.file_name().expect("listed file has a name");
            let solution = sibling(&out_dir.join(name), "solution");
            let sol = solve_one(input, &solution, &sibling(&out_dir.join(name), "trace"), &options)?;
            Ok(summary(&solution, &sol))
        })
        .collect();
    let mut out = String::new();
    for r in results {
        out.push_str(&r?);
    }
    Ok(out)
}

pub fn cmd_eval(solution: &Path, truth: &Path) -> Result<EvalReport, CliError> {
    let predicted = read_labeling(solution)?;
    let truth: TruthFile = read_json(truth)?;
    evaluate(&predicted.0, &truth.labeling.0, &truth.segment_sizes, truth.n_labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub slice_dp: f64,
    pub slice_brute_force: f64,
    pub slice_gap: f64,
    pub labeling_solver: String,
    pub labeling_solver_energy: f64,
    pub labeling_brute_force: f64,
    /// `(solver - optimum) / max(|optimum|, 1)`
    pub labeling_relative_gap: f64,
}

/// Compares the production solvers with the exhaustive oracles on the
/// first slice problem after initialization and on the grouped labeling
/// problem built from that slice.
pub fn cmd_oracle(instance: &Path) -> Result<OracleReport, CliError> {
    let inst = load_instance(instance)?;
    let v = compute_video_labels(&inst);
    let init = infer_with(
        &inst,
        &SolverOptions {
            max_iters: Some(0),
            ..Default::default()
        },
    )?
    .labeling;
    let costs = slice_costs(&init, &inst);
    let dp = solve_slice_dp(&inst.tree, &costs);
    let brute = brute_force_slice(&inst.tree, &costs)?;
    let problem = build_expansion_problem(&inst, &dp, VideoTerms::Enabled(&v), &init)?;
    let optimum = problem.energy(&brute_force_labeling(&problem)?);
    let (name, solved) = if check_submodular(&problem) {
        ("expansion", alpha_expansion(&problem, &problem.unary_argmin())?)
    } else {
        ("icm", icm(&problem, &problem.unary_argmin())?)
    };
    let energy = problem.energy(&solved);
    let (a, b) = (costs.objective(&dp), costs.objective(&brute));
    Ok(OracleReport {
        slice_dp: a,
        slice_brute_force: b,
        slice_gap: a - b,
        labeling_solver: name.to_string(),
        labeling_solver_energy: energy,
        labeling_brute_force: optimum,
        labeling_relative_gap: (energy - optimum) / optimum.abs().max(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSamples {
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
}

impl PhaseSamples {
    fn new(samples: Vec<Duration>) -> Self {
        let samples_ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        PhaseSamples {
            median_ms: median(&samples_ms),
            samples_ms,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub n_segments: usize,
    pub n_tree_nodes: usize,
    pub iterations: usize,
    pub init: PhaseSamples,
    /// Mean time of one slice step within each run.
    pub slice_per_iteration: PhaseSamples,
    /// Mean time of one labeling step within each run.
    pub labeling_per_iteration: PhaseSamples,
    pub total: PhaseSamples,
}

pub fn cmd_bench(instance: &Path, repeats: usize, options: &SolverOptions) -> Result<BenchReport, CliError> {
    if repeats == 0 {
        return Err(CliError::Invalid("repeats must be at least 1".into()));
    }
    let inst = load_instance(instance)?;
    let mean = |d: &[Duration]| {
        if d.is_empty() {
            Duration::ZERO
        } else {
            d.iter().sum::<Duration>() / d.len() as u32
        }
    };
    let (mut init, mut slice, mut labeling, mut total) = (vec![], vec![], vec![], vec![]);
    let mut iterations = 0;
    for _ in 0..repeats {
        let (sol, t) = infer_timed(&inst, options)?;
        iterations = sol.iterations;
        init.push(t.init);
        slice.push(mean(&t.slice));
        labeling.push(mean(&t.labeling));
        total.push(t.total);
    }
    Ok(BenchReport {
        repeats,
        n_segments: inst.n_segments(),
        n_tree_nodes: inst.tree.n_nodes(),
        iterations,
        init: PhaseSamples::new(init),
        slice_per_iteration: PhaseSamples::new(slice),
        labeling_per_iteration: PhaseSamples::new(labeling),
        total: PhaseSamples::new(total),
    })
}

pub fn cmd_render(labeling: &Path, instance: &Path, frame: usize, out: &Path) -> Result<String, CliError> {
    let inst = load_instance(instance)?;
    let l = read_labeling(labeling)?;
    let img = render_frame(&inst, &l, frame)?;
    std::fs::write(out, img).map_err(|e| CliError::io(out, e))?;
    Ok(format!("wrote {}\n", out.display()))
}

/// Builds a tree from flat segmentation files (one per level, any order)
/// and optional per-segment sizes (one integer per line).
pub fn cmd_tree(levels: &[PathBuf], sizes: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let mut parsed = Vec::with_capacity(levels.len());
    for path in levels {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        parsed.push(parse_flat_segmentation(&text)?);
    }
    let n = parsed.first().map_or(0, Vec::len);
    let segment_sizes: Vec<u64> = match sizes {
        None => vec![1; n],
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            text.split_whitespace()
                .map(|t| {
                    t.parse::<u64>()
                        .map_err(|_| GpmError::Parse(format!("{}: bad segment size {t:?}", path.display())))
                })
                .collect::<Result<_, _>>()?
        }
    };
    let tree = build_tree(&parsed, &segment_sizes)?;
    write_json(out, &tree)?;
    Ok(format!(
        "wrote {} ({} nodes, {} leaves)\n",
        out.display(),
        tree.n_nodes(),
        tree.leaves().len()
    ))
}

/// Slice program for the costs induced by a labeling, in LP format.
pub fn cmd_lp(instance: &Path, labeling: &Path) -> Result<String, CliError> {
    let inst = load_instance(instance)?;
    let l: Labeling = read_labeling(labeling)?;
    if l.len() != inst.n_segments() {
        return Err(CliError::Mismatch(format!(
            "labeling has {} segments, instance has {}",
            l.len(),
            inst.n_segments()
        )));
    }
    Ok(export_blp(&inst.tree, &slice_costs(&l, &inst)))
}

pub fn report_json<T: Serialize>(value: &T) -> String {
    to_pretty(value)
}
