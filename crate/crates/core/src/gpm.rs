//! Bidirectional inference: alternate the tree-slice problem and the
//! labeling problem until the slice stops changing and the labeling energy
//! settles.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, Labeling, Slice, VideoLabels};
use crate::error::{GpmError, Result};
use crate::label_solver::{
    alpha_expansion_with, build_expansion_problem, check_submodular, icm, ExpansionOptions, ExpansionOrder,
    ExpansionProblem, VideoTerms,
};
use crate::slice_solver::{is_valid_slice, slice_costs, solve_slice_dp};
use crate::instance::Instance;

/// Order of the two conditional solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    /// Initialize by solving the labeling problem without groups, then
    /// alternate slice and labeling steps.
    #[default]
    LabelingFirst,
    /// Skip the initial labeling solve and select the first slice from the
    /// per-segment unary argmin.
    SliceFirst,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Overrides `params.max_iters`.
    pub max_iters: Option<usize>,
    /// When false, the video labels are empty, label costs are dropped and
    /// refinement is ungated.
    pub use_video: bool,
    pub schedule: Schedule,
    pub order: ExpansionOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: None,
            use_video: true,
            schedule: Schedule::LabelingFirst,
            order: ExpansionOrder::Sequential,
        }
    }
}

impl SolverOptions {
    /// Seed `n` shuffles the expansion order; seed 0 keeps index order.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.order = if seed == 0 {
            ExpansionOrder::Sequential
        } else {
            ExpansionOrder::Shuffled(seed)
        };
        self
    }
}

/// Which solver handled a labeling step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSolver {
    Expansion,
    /// Fallback for problems with a non-metric pairwise table.
    Icm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Slice objective of the previous slice and of the new one, both under
    /// the costs of the labeling entering this iteration.
    pub slice_objective_before: f64,
    pub slice_objective: f64,
    /// Labeling objective at the warm start and after the solve.
    pub labeling_energy_before: f64,
    pub labeling_energy: f64,
    pub total_energy: f64,
    pub active_nodes: usize,
    pub labels_changed: usize,
    pub solver: LabelSolver,
    pub submodular: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceTrace {
    /// Labeling objective of the initial labeling (no groups).
    pub initial_energy: f64,
    pub init_solver: Option<LabelSolver>,
    pub iterations: Vec<IterationRecord>,
    pub notes: Vec<String>,
}

impl InferenceTrace {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub labeling: Labeling,
    pub slice: Slice,
    pub video: VideoLabels,
    pub trace: InferenceTrace,
    pub converged: bool,
    pub iterations: usize,
}

/// Wall time per phase of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub init: Duration,
    pub slice: Vec<Duration>,
    pub labeling: Vec<Duration>,
    pub total: Duration,
}

/// `v_z = 1` iff the response strictly exceeds the threshold.
pub fn compute_video_labels(inst: &Instance) -> VideoLabels {
    let th = inst.params.response_threshold;
    VideoLabels(inst.unaries.video_response.iter().map(|&r| r > th).collect())
}

/// Labeling objective without groups, minimized by alpha-expansion from the
/// unary argmin.
pub fn initialize_labeling(inst: &Instance, v: &VideoLabels) -> Result<Labeling> {
    let mut trace = InferenceTrace::default();
    init_step(inst, VideoTerms::Enabled(v), &ExpansionOptions::default(), &mut trace)
}

fn init_step(
    inst: &Instance,
    video: VideoTerms<'_>,
    expansion: &ExpansionOptions,
    trace: &mut InferenceTrace,
) -> Result<Labeling> {
    let empty = Slice(vec![false; inst.tree.n_nodes()]);
    let placeholder = Labeling(vec![0; inst.n_segments()]);
    let problem = build_expansion_problem(inst, &empty, video, &placeholder)?;
    let start = problem.unary_argmin();
    let (l, solver) = solve_labeling(&problem, &start, expansion, trace)?;
    let (before, after) = (problem.energy(&start), problem.energy(&l));
    check_monotone("initial labeling", before, after)?;
    trace.initial_energy = after;
    trace.init_solver = Some(solver);
    Ok(l)
}

fn solve_labeling(
    problem: &ExpansionProblem,
    init: &Labeling,
    expansion: &ExpansionOptions,
    trace: &mut InferenceTrace,
) -> Result<(Labeling, LabelSolver)> {
    match alpha_expansion_with(problem, init, expansion) {
        Ok(out) => Ok((out.labeling, LabelSolver::Expansion)),
        Err(GpmError::NonMetric { table }) => {
            trace
                .notes
                .push(format!("pairwise table {table} is not a metric; labeling solved by icm"));
            Ok((icm(problem, init)?, LabelSolver::Icm))
        }
        Err(e) => Err(e),
    }
}

fn check_monotone(step: &'static str, before: f64, after: f64) -> Result<()> {
    if after > before + 1e-9 * (1.0 + before.abs()) {
        return Err(GpmError::Monotonicity { step, before, after });
    }
    Ok(())
}

/// Full inference with default options.
pub fn infer(inst: &Instance) -> Result<Solution> {
    infer_with(inst, &SolverOptions::default())
}

pub fn infer_with(inst: &Instance, options: &SolverOptions) -> Result<Solution> {
    infer_timed(inst, options).map(|(s, _)| s)
}

/// Inference plus per-phase wall times.
pub fn infer_timed(inst: &Instance, options: &SolverOptions) -> Result<(Solution, PhaseTimings)> {
    let started = Instant::now();
    let mut timings = PhaseTimings::default();
    let mut trace = InferenceTrace::default();
    let expansion = ExpansionOptions {
        order: options.order,
        ..ExpansionOptions::default()
    };
    let v = if options.use_video {
        compute_video_labels(inst)
    } else {
        VideoLabels::empty(inst.labels.n_joint())
    };
    let video = if options.use_video {
        VideoTerms::Enabled(&v)
    } else {
        VideoTerms::Disabled
    };
    let pm = inst.tree.path_matrix();
    let max_iters = options.max_iters.unwrap_or(inst.params.max_iters);

    let phase = Instant::now();
    let mut l = match options.schedule {
        Schedule::LabelingFirst => init_step(inst, video, &expansion, &mut trace)?,
        Schedule::SliceFirst => {
            let empty = Slice(vec![false; inst.tree.n_nodes()]);
            let placeholder = Labeling(vec![0; inst.n_segments()]);
            let problem = build_expansion_problem(inst, &empty, video, &placeholder)?;
            let start = problem.unary_argmin();
            trace.initial_energy = problem.energy(&start);
            start
        }
    };
    timings.init = phase.elapsed();

    let energy_scale = trace.initial_energy.abs().max(1.0);
    let mut s = Slice::root_only(inst.tree.n_nodes(), inst.tree.root());
    let mut converged = false;
    let mut iterations = 0;
    for iteration in 1..=max_iters {
        let phase = Instant::now();
        let costs = slice_costs(&l, inst);
        let next_s = solve_slice_dp(&inst.tree, &costs);
        let slice_before = costs.objective(&s);
        let slice_after = costs.objective(&next_s);
        check_monotone("slice selection", slice_before, slice_after)?;
        if !is_valid_slice(&next_s, &pm) {
            return Err(GpmError::InvalidSlice(format!("iteration {iteration} produced an invalid slice")));
        }
        s = next_s;
        timings.slice.push(phase.elapsed());

        let phase = Instant::now();
        let problem = build_expansion_problem(inst, &s, video, &l)?;
        let submodular = check_submodular(&problem);
        let (next_l, solver) = solve_labeling(&problem, &l, &expansion, &mut trace)?;
        let before = problem.energy(&l);
        let after = problem.energy(&next_l);
        check_monotone("labeling", before, after)?;
        timings.labeling.push(phase.elapsed());

        let labels_changed = l.0.iter().zip(&next_l.0).filter(|(a, b)| a != b).count();
        l = next_l;
        iterations = iteration;
        trace.iterations.push(IterationRecord {
            iteration,
            slice_objective_before: slice_before,
            slice_objective: slice_after,
            labeling_energy_before: before,
            labeling_energy: after,
            total_energy: total_energy(&l, &s, &v, inst),
            active_nodes: s.n_active(),
            labels_changed,
            solver,
            submodular,
        });

        let settled = before - after < inst.params.epsilon * energy_scale;
        if settled && solve_slice_dp(&inst.tree, &slice_costs(&l, inst)) == s {
            converged = true;
            break;
        }
    }

    // the reported slice is always the optimal one for the final labeling
    let slice = solve_slice_dp(&inst.tree, &slice_costs(&l, inst));
    debug_assert!(is_valid_slice(&slice, &pm));
    timings.total = started.elapsed();
    Ok((
        Solution {
            labeling: l,
            slice,
            video: v,
            trace,
            converged,
            iterations,
        },
        timings,
    ))
}
