//! Problem instances: label space, segment graph, unary tables, hierarchy
//! and parameters, plus validation and the on-disk JSON form.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hierarchy::SupervoxelTree;

/// Actor classes, action classes and the valid joint pairs.
///
/// Joint labels are indexed `0..joint.len()`; index `joint.len()` is the
/// background label, whose actor and action projections are both null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub actors: Vec<String>,
    pub actions: Vec<String>,
    pub joint: Vec<(usize, usize)>,
    #[serde(default = "default_background")]
    pub background: String,
}

fn default_background() -> String {
    "background".to_string()
}

impl LabelSpace {
    /// Full product space of the given actors and actions.
    pub fn product(actors: &[&str], actions: &[&str]) -> Self {
        let joint = (0..actors.len())
            .flat_map(|x| (0..actions.len()).map(move |y| (x, y)))
            .collect();
        LabelSpace {
            actors: actors.iter().map(|s| s.to_string()).collect(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
            joint,
            background: default_background(),
        }
    }

    pub fn n_joint(&self) -> usize {
        self.joint.len()
    }

    /// Joint labels plus background.
    pub fn n_labels(&self) -> usize {
        self.joint.len() + 1
    }

    pub fn background_label(&self) -> usize {
        self.joint.len()
    }

    pub fn is_background(&self, label: usize) -> bool {
        label == self.joint.len()
    }

    pub fn actor_of(&self, label: usize) -> Option<usize> {
        self.joint.get(label).map(|&(x, _)| x)
    }

    pub fn action_of(&self, label: usize) -> Option<usize> {
        self.joint.get(label).map(|&(_, y)| y)
    }

    pub fn label_name(&self, label: usize) -> String {
        match self.joint.get(label) {
            Some(&(x, y)) => format!("{}-{}", self.actors[x], self.actions[y]),
            None => self.background.clone(),
        }
    }

    pub fn find(&self, actor: &str, action: &str) -> Option<usize> {
        let x = self.actors.iter().position(|a| a == actor)?;
        let y = self.actions.iter().position(|a| a == action)?;
        self.joint.iter().position(|&p| p == (x, y))
    }
}

/// Voxel layout of segments produced from a regular block grid.
///
/// Segment index of voxel `(x, y, f)` is
/// `((f / block) * ny + y / block) * nx + x / block` with
/// `nx = width / block`, `ny = height / block`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub block: usize,
}

impl GridLayout {
    pub fn blocks(&self) -> (usize, usize, usize) {
        (self.width / self.block, self.height / self.block, self.frames / self.block)
    }

    pub fn n_segments(&self) -> usize {
        let (nx, ny, nf) = self.blocks();
        nx * ny * nf
    }

    pub fn segment_at(&self, x: usize, y: usize, frame: usize) -> usize {
        let (nx, ny, _) = self.blocks();
        ((frame / self.block) * ny + y / self.block) * nx + x / self.block
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentGraph {
    pub n_segments: usize,
    /// Undirected edges `(i, j, w_ij)` with contrast weight `w_ij >= 0`.
    pub edges: Vec<(usize, usize, f64)>,
    pub segment_sizes: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_of: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridLayout>,
}

/// Unary energies (lower is better) and video-level classifier responses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnaryTables {
    /// `N x |actors|`
    pub actor: Vec<Vec<f64>>,
    /// `N x |actions|`
    pub action: Vec<Vec<f64>>,
    /// `N x (|joint| + 1)`, background last.
    pub joint: Vec<Vec<f64>>,
    /// One response per joint label.
    pub video_response: Vec<f64>,
}

impl UnaryTables {
    /// Combined unary of segment `i` taking `label`: actor + action + joint
    /// compatibility. Background only has the joint term.
    pub fn combined(&self, labels: &LabelSpace, i: usize, label: usize) -> f64 {
        let mut e = self.joint[i][label];
        if let Some((x, y)) = labels.joint.get(label) {
            e += self.actor[i][*x] + self.action[i][*y];
        }
        e
    }

    /// Sum of absolute values over all three segment tables.
    pub fn abs_sum(&self) -> f64 {
        [&self.actor, &self.action, &self.joint]
            .iter()
            .flat_map(|t| t.iter().flatten())
            .map(|v| v.abs())
            .sum()
    }
}

/// Model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Penalty per disagreeing member pair inside an active supervoxel.
    pub group_strength: f64,
    /// Prior cost per active supervoxel.
    pub depth_prior: f64,
    /// Penalty per root-to-leaf path violating the slice constraint.
    pub slice_penalty: f64,
    /// Video-level response threshold.
    pub response_threshold: f64,
    /// Video-level unary scale.
    pub video_scale: f64,
    /// Cost of an actor or action present in the labeling but unsupported
    /// at the video level.
    pub label_cost: f64,
    pub potts_actor: f64,
    pub potts_action: f64,
    pub max_iters: usize,
    /// Convergence tolerance, relative to the initial labeling energy.
    pub epsilon: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            group_strength: 0.5,
            depth_prior: 50.0,
            slice_penalty: 1.0e6,
            response_threshold: 0.5,
            video_scale: 100.0,
            label_cost: 5.0,
            potts_actor: 1.0,
            potts_action: 1.0,
            max_iters: 10,
            epsilon: 1.0e-6,
        }
    }
}

impl Params {
    /// Smallest slice penalty accepted for the given unaries.
    pub fn min_slice_penalty(unaries: &UnaryTables) -> f64 {
        10.0 * unaries.abs_sum()
    }
}

/// Complete solver input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub labels: LabelSpace,
    pub graph: SegmentGraph,
    pub unaries: UnaryTables,
    pub tree: SupervoxelTree,
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<usize>>,
}

impl Instance {
    pub fn n_segments(&self) -> usize {
        self.graph.n_segments
    }

    pub fn n_labels(&self) -> usize {
        self.labels.n_labels()
    }

    pub fn unary(&self, i: usize, label: usize) -> f64 {
        self.unaries.combined(&self.labels, i, label)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Invariant violations found in an instance; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// True if some violation message contains `needle`.
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle) || v.field.contains(needle))
    }

    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn check_table(report: &mut ValidationReport, field: &str, table: &[Vec<f64>], rows: usize, cols: usize) {
    if table.len() != rows {
        report.push(field, format!("has {} rows, expected {rows}", table.len()));
        return;
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != cols {
            report.push(field, format!("row {i} has {} columns, expected {cols}", row.len()));
            return;
        }
        if row.iter().any(|v| !v.is_finite()) {
            report.push(field, format!("row {i} has a non-finite entry"));
            return;
        }
    }
}

/// Checks every instance invariant and returns the violations found.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let labels = &inst.labels;
    let n_actors = labels.actors.len();
    let n_actions = labels.actions.len();

    if labels.joint.is_empty() {
        report.push("labels.joint", "joint label space is empty");
    }
    let mut seen = BTreeSet::new();
    for &(x, y) in &labels.joint {
        if x >= n_actors || y >= n_actions {
            report.push("labels.joint", format!("pair ({x}, {y}) references an unknown actor or action"));
        }
        if !seen.insert((x, y)) {
            report.push("labels.joint", format!("pair ({x}, {y}) listed twice"));
        }
    }
    if labels.actors.contains(&labels.background) || labels.actions.contains(&labels.background) {
        report.push("labels.background", "background name collides with an actor or action");
    }

    let graph = &inst.graph;
    let n = graph.n_segments;
    if n == 0 {
        report.push("graph.n_segments", "instance has no segments");
    }
    let mut edge_set = BTreeSet::new();
    for &(i, j, w) in &graph.edges {
        if i >= n || j >= n {
            report.push("graph.edges", format!("edge ({i}, {j}) out of range"));
        } else if i == j {
            report.push("graph.edges", format!("self-loop on segment {i}"));
        } else if !edge_set.insert((i.min(j), i.max(j))) {
            report.push("graph.edges", format!("duplicate edge ({i}, {j})"));
        }
        if !(w.is_finite() && w >= 0.0) {
            report.push("graph.edges", format!("edge ({i}, {j}) has invalid weight {w}"));
        }
    }
    if graph.segment_sizes.len() != n {
        report.push("graph.segment_sizes", format!("has {} entries, expected {n}", graph.segment_sizes.len()));
    } else if let Some(i) = graph.segment_sizes.iter().position(|&s| s == 0) {
        report.push("graph.segment_sizes", format!("segment {i} has zero size"));
    }
    if let Some(frames) = &graph.frame_of {
        if frames.len() != n {
            report.push("graph.frame_of", format!("has {} entries, expected {n}", frames.len()));
        }
    }
    if let Some(grid) = &graph.grid {
        let b = grid.block;
        if b == 0 || grid.width % b != 0 || grid.height % b != 0 || grid.frames % b != 0 {
            report.push("graph.grid", "grid dimensions not divisible by block");
        } else if grid.n_segments() != n {
            report.push("graph.grid", format!("grid implies {} segments, expected {n}", grid.n_segments()));
        }
    }

    let u = &inst.unaries;
    check_table(&mut report, "unaries.actor", &u.actor, n, n_actors);
    check_table(&mut report, "unaries.action", &u.action, n, n_actions);
    check_table(&mut report, "unaries.joint", &u.joint, n, labels.n_labels());
    if u.video_response.len() != labels.n_joint() {
        report.push(
            "unaries.video_response",
            format!("has {} entries, expected {}", u.video_response.len(), labels.n_joint()),
        );
    } else if u.video_response.iter().any(|v| !v.is_finite()) {
        report.push("unaries.video_response", "non-finite response");
    }

    let p = &inst.params;
    let finite = [
        p.group_strength,
        p.depth_prior,
        p.slice_penalty,
        p.response_threshold,
        p.video_scale,
        p.label_cost,
        p.potts_actor,
        p.potts_action,
        p.epsilon,
    ];
    if finite.iter().any(|v| !v.is_finite()) {
        report.push("params", "non-finite parameter");
    }
    for (name, v) in [
        ("params.group_strength", p.group_strength),
        ("params.depth_prior", p.depth_prior),
        ("params.label_cost", p.label_cost),
        ("params.potts_actor", p.potts_actor),
        ("params.potts_action", p.potts_action),
        ("params.epsilon", p.epsilon),
    ] {
        if v < 0.0 {
            report.push(name, "must be non-negative");
        }
    }
    if !(p.video_scale > 0.0) {
        report.push("params.video_scale", "must be positive");
    }
    if !(p.video_scale > 2.0 * p.label_cost) {
        report.push("params.video_scale", "theta_B must exceed 2*theta_V");
    }
    let min_penalty = Params::min_slice_penalty(u);
    if !(p.slice_penalty >= min_penalty) {
        report.push(
            "params.slice_penalty",
            format!("theta_tau {} below required {min_penalty} (10x total unary magnitude)", p.slice_penalty),
        );
    }

    let tree = &inst.tree;
    let mut owner = vec![0usize; n];
    for t in tree.leaves() {
        for &i in tree.members(t) {
            match owner.get_mut(i) {
                Some(c) => *c += 1,
                None => report.push("tree", format!("leaf {t} lists unknown segment {i}")),
            }
        }
    }
    for (i, &c) in owner.iter().enumerate() {
        if c != 1 {
            report.push("tree", format!("coverage: segment {i} belongs to {c} leaves, expected 1"));
        }
    }
    if graph.segment_sizes.len() == n {
        for t in 0..tree.n_nodes() {
            let sum: u64 = tree
                .members(t)
                .iter()
                .filter_map(|&i| graph.segment_sizes.get(i))
                .sum();
            if sum != tree.size(t) {
                report.push("tree", format!("node {t} size {} differs from member total {sum}", tree.size(t)));
            }
        }
    }

    if let Some(gt) = &inst.ground_truth {
        if gt.len() != n {
            report.push("ground_truth", format!("has {} entries, expected {n}", gt.len()));
        }
        if let Some(&l) = gt.iter().find(|&&l| l >= labels.n_labels()) {
            report.push("ground_truth", format!("label {l} out of range"));
        }
    }

    report
}
