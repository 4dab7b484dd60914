//! Multi-label segment labeling given a fixed slice and video labels.
//!
//! [`build_expansion_problem`] unfolds the segment CRF, the refinement
//! cliques of the active supervoxels and the label costs into an explicit
//! pairwise problem with label-subset costs. That problem is minimized by
//! [`alpha_expansion`] (metric tables) or [`icm`] (anything), and checked
//! against [`brute_force_labeling`] on small inputs.

mod expansion;
mod icm;
pub mod maxflow;

use std::collections::BTreeMap;

pub use expansion::{alpha_expansion, alpha_expansion_with, ExpansionOptions, ExpansionOrder, ExpansionOutcome};
pub use icm::icm;

use crate::energy::{joint_pair_energy, refine_gates, Gating, Labeling, Slice, VideoLabels};
use crate::error::{GpmError, Result};
use crate::instance::Instance;

/// Largest search space accepted by [`brute_force_labeling`].
pub const BRUTE_FORCE_MAX_STATES: u128 = 2_000_000;

/// Dense `n_labels x n_labels` pairwise table, row = first endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    n_labels: usize,
    values: Vec<f64>,
}

impl PairTable {
    pub fn from_fn(n_labels: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_labels * n_labels);
        for a in 0..n_labels {
            for b in 0..n_labels {
                values.push(f(a, b));
            }
        }
        PairTable { n_labels, values }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.n_labels + b]
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Zero diagonal and `V(a,b) <= V(a,c) + V(c,b)` for all triples.
    pub fn is_metric(&self) -> bool {
        let n = self.n_labels;
        if self.values.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if (0..n).any(|a| self.get(a, a) != 0.0) {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * (1.0 + scale);
        for a in 0..n {
            for b in 0..n {
                let ab = self.get(a, b);
                for c in 0..n {
                    if ab > self.get(a, c) + self.get(c, b) + tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Pairwise term between nodes `a` and `b` using table `table`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEdge {
    pub a: usize,
    pub b: usize,
    pub table: usize,
}

/// Cost charged once if any node takes a label in `labels`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSubsetCost {
    pub labels: Vec<usize>,
    pub cost: f64,
    mask: Vec<bool>,
}

impl LabelSubsetCost {
    pub fn new(n_labels: usize, labels: Vec<usize>, cost: f64) -> Self {
        let mut mask = vec![false; n_labels];
        for &l in &labels {
            mask[l] = true;
        }
        LabelSubsetCost { labels, cost, mask }
    }

    #[inline]
    pub fn contains(&self, label: usize) -> bool {
        self.mask[label]
    }
}

/// Explicit labeling objective: unaries, pairwise tables (segment graph
/// edges and supervoxel group edges) and label-subset costs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionProblem {
    pub n_nodes: usize,
    pub n_labels: usize,
    unary: Vec<f64>,
    pub tables: Vec<PairTable>,
    pub pairwise_edges: Vec<PairEdge>,
    pub group_edges: Vec<PairEdge>,
    pub label_costs: Vec<LabelSubsetCost>,
}

impl ExpansionProblem {
    /// `unary[i * n_labels + l]` is the cost of node `i` taking `l`.
    pub fn new(n_nodes: usize, n_labels: usize, unary: Vec<f64>) -> Self {
        assert_eq!(unary.len(), n_nodes * n_labels, "unary table shape");
        ExpansionProblem {
            n_nodes,
            n_labels,
            unary,
            tables: Vec::new(),
            pairwise_edges: Vec::new(),
            group_edges: Vec::new(),
            label_costs: Vec::new(),
        }
    }

    pub fn add_table(&mut self, table: PairTable) -> usize {
        assert_eq!(table.n_labels, self.n_labels);
        self.tables.push(table);
        self.tables.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, table: usize) {
        self.pairwise_edges.push(PairEdge { a, b, table });
    }

    pub fn add_group_edge(&mut self, a: usize, b: usize, table: usize) {
        self.group_edges.push(PairEdge { a, b, table });
    }

    pub fn add_label_cost(&mut self, labels: Vec<usize>, cost: f64) {
        self.label_costs.push(LabelSubsetCost::new(self.n_labels, labels, cost));
    }

    #[inline]
    pub fn unary(&self, i: usize, l: usize) -> f64 {
        self.unary[i * self.n_labels + l]
    }

    pub fn edges(&self) -> impl Iterator<Item = &PairEdge> {
        self.pairwise_edges.iter().chain(&self.group_edges)
    }

    /// Full objective of a labeling.
    pub fn energy(&self, l: &Labeling) -> f64 {
        let f = &l.0;
        let mut e: f64 = (0..self.n_nodes).map(|i| self.unary(i, f[i])).sum();
        for edge in self.edges() {
            e += self.tables[edge.table].get(f[edge.a], f[edge.b]);
        }
        for lc in &self.label_costs {
            if f.iter().any(|&x| lc.contains(x)) {
                e += lc.cost;
            }
        }
        e
    }

    /// Per-node unary argmin, ties to the lowest label.
    pub fn unary_argmin(&self) -> Labeling {
        Labeling(
            (0..self.n_nodes)
                .map(|i| {
                    let mut best = 0;
                    for l in 1..self.n_labels {
                        if self.unary(i, l) < self.unary(i, best) {
                            best = l;
                        }
                    }
                    best
                })
                .collect(),
        )
    }

    fn check_labeling(&self, l: &Labeling) -> Result<()> {
        if l.len() != self.n_nodes || l.0.iter().any(|&x| x >= self.n_labels) {
            return Err(GpmError::InvalidInstance(format!(
                "labeling of length {} does not fit a problem with {} nodes and {} labels",
                l.len(),
                self.n_nodes,
                self.n_labels
            )));
        }
        Ok(())
    }

    /// Index of the first referenced table that is not a metric.
    pub fn first_non_metric_table(&self) -> Option<usize> {
        let mut used = vec![false; self.tables.len()];
        for e in self.edges() {
            used[e.table] = true;
        }
        (0..self.tables.len()).find(|&k| used[k] && !self.tables[k].is_metric())
    }
}

/// True iff every pairwise table in use has a zero diagonal and satisfies
/// the triangle inequality, i.e. every expansion move is graph-representable.
pub fn check_submodular(problem: &ExpansionProblem) -> bool {
    problem.first_non_metric_table().is_none()
}

/// Which video-level information enters the labeling objective.
#[derive(Clone, Copy, Debug)]
pub enum VideoTerms<'a> {
    /// Label costs for unsupported actors and actions, video-gated
    /// refinement.
    Enabled(&'a VideoLabels),
    /// No label costs, ungated refinement.
    Disabled,
}

impl<'a> VideoTerms<'a> {
    fn gating(self) -> Gating<'a> {
        match self {
            VideoTerms::Enabled(v) => Gating::Video(v),
            VideoTerms::Disabled => Gating::Always,
        }
    }
}

/// Builds the labeling objective for slice `s`.
///
/// Every active node contributes one group edge per unordered member pair;
/// its actor (action) component is on only when the node's dominant actor
/// (action) under `current` is supported by the video labels. Nodes with
/// both components off add nothing. Edges repeated across overlapping
/// active nodes are merged by summing tables.
pub fn build_expansion_problem(
    inst: &Instance,
    s: &Slice,
    video: VideoTerms<'_>,
    current: &Labeling,
) -> Result<ExpansionProblem> {
    let tree = &inst.tree;
    if s.0.len() != tree.n_nodes() {
        return Err(GpmError::InvalidSlice(format!(
            "slice has {} entries, tree has {} nodes",
            s.0.len(),
            tree.n_nodes()
        )));
    }
    let n = inst.n_segments();
    if current.len() != n {
        return Err(GpmError::InvalidInstance(format!(
            "labeling has {} entries, expected {n}",
            current.len()
        )));
    }
    let labels = &inst.labels;
    let k = labels.n_labels();
    let p = &inst.params;

    let mut unary = Vec::with_capacity(n * k);
    for i in 0..n {
        for l in 0..k {
            unary.push(inst.unary(i, l));
        }
    }
    let mut problem = ExpansionProblem::new(n, k, unary);

    // Segment graph: one shared table per distinct contrast weight.
    let mut by_weight: BTreeMap<u64, usize> = BTreeMap::new();
    for &(i, j, w) in &inst.graph.edges {
        let table = *by_weight.entry(w.to_bits()).or_insert_with(|| {
            problem.add_table(PairTable::from_fn(k, |a, b| {
                joint_pair_energy(labels, a, b, p.potts_actor * w, p.potts_action * w)
            }))
        });
        problem.add_edge(i, j, table);
    }

    // Group edges of active supervoxels.
    let gating = video.gating();
    let mut group: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for t in s.active_nodes() {
        let (actor_on, action_on) = refine_gates(t, current, gating, inst);
        let table = PairTable::from_fn(k, |a, b| {
            let mut e = 0.0;
            if actor_on && labels.actor_of(a) != labels.actor_of(b) {
                e += p.group_strength;
            }
            if action_on && labels.action_of(a) != labels.action_of(b) {
                e += p.group_strength;
            }
            e
        });
        if table.is_zero() {
            continue;
        }
        let table = problem.add_table(table);
        let members = tree.members(t);
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                match group.get(&(a, b)).copied() {
                    None => {
                        group.insert((a, b), table);
                    }
                    Some(prev) => {
                        let (pt, nt) = (&problem.tables[prev], &problem.tables[table]);
                        let merged = PairTable::from_fn(k, |u, v| pt.get(u, v) + nt.get(u, v));
                        let merged = problem.add_table(merged);
                        group.insert((a, b), merged);
                    }
                }
            }
        }
    }
    for ((a, b), table) in group {
        problem.add_group_edge(a, b, table);
    }

    if let VideoTerms::Enabled(v) = video {
        if p.label_cost > 0.0 {
            let actor_support = v.supported_actors(labels);
            let action_support = v.supported_actions(labels);
            for (x, &supported) in actor_support.iter().enumerate() {
                let subset: Vec<usize> = (0..labels.n_joint()).filter(|&z| labels.joint[z].0 == x).collect();
                if !supported && !subset.is_empty() {
                    problem.add_label_cost(subset, p.label_cost);
                }
            }
            for (y, &supported) in action_support.iter().enumerate() {
                let subset: Vec<usize> = (0..labels.n_joint()).filter(|&z| labels.joint[z].1 == y).collect();
                if !supported && !subset.is_empty() {
                    problem.add_label_cost(subset, p.label_cost);
                }
            }
        }
    }

    Ok(problem)
}

/// Exhaustive minimum of the full objective; ties go to the
/// lexicographically smallest labeling.
pub fn brute_force_labeling(problem: &ExpansionProblem) -> Result<Labeling> {
    let states = (problem.n_labels as u128).checked_pow(problem.n_nodes as u32);
    match states {
        Some(s) if s <= BRUTE_FORCE_MAX_STATES => {}
        _ => {
            return Err(GpmError::TooLarge {
                what: "labelings (labels^segments)",
                actual: states.unwrap_or(u128::MAX),
                limit: BRUTE_FORCE_MAX_STATES,
            })
        }
    }
    let n = problem.n_nodes;
    let k = problem.n_labels;
    let mut current = Labeling(vec![0; n]);
    let mut best = (problem.energy(&current), current.clone());
    if n == 0 {
        return Ok(best.1);
    }
    loop {
        // odometer with the last node fastest: lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(best.1);
            }
            pos -= 1;
            current.0[pos] += 1;
            if current.0[pos] < k {
                break;
            }
            current.0[pos] = 0;
        }
        let e = problem.energy(&current);
        if e < best.0 {
            best = (e, current.clone());
        }
    }
}
