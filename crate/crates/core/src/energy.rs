//! Energy evaluators.
//!
//! Every solver in the crate optimizes some combination of these terms, and
//! the oracles in the test suites are checked against them, so they are
//! written for clarity rather than speed.

use serde::{Deserialize, Serialize};

use crate::hierarchy::PathMatrix;
use crate::instance::{Instance, LabelSpace};

/// Per-segment joint label (background = `labels.background_label()`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling(pub Vec<usize>);

/// Per-node activation flags over the supervoxel tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Slice(pub Vec<bool>);

/// Per-joint-label activation flags at the video level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VideoLabels(pub Vec<bool>);

impl Labeling {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Slice {
    pub fn root_only(n_nodes: usize, root: usize) -> Self {
        let mut s = vec![false; n_nodes];
        s[root] = true;
        Slice(s)
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| a).map(|(t, _)| t)
    }

    pub fn n_active(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }
}

impl VideoLabels {
    pub fn empty(n_joint: usize) -> Self {
        VideoLabels(vec![false; n_joint])
    }

    /// Per-actor flag: some active joint label has this actor.
    pub fn supported_actors(&self, labels: &LabelSpace) -> Vec<bool> {
        let mut out = vec![false; labels.actors.len()];
        for (z, &(x, _)) in labels.joint.iter().enumerate() {
            out[x] |= self.0[z];
        }
        out
    }

    pub fn supported_actions(&self, labels: &LabelSpace) -> Vec<bool> {
        let mut out = vec![false; labels.actions.len()];
        for (z, &(_, y)) in labels.joint.iter().enumerate() {
            out[y] |= self.0[z];
        }
        out
    }
}

/// Natural-log entropy of the label frequencies of `labels`.
pub fn entropy(labels: impl IntoIterator<Item = usize>, n_labels: usize) -> f64 {
    let mut counts = vec![0usize; n_labels];
    let mut total = 0usize;
    for l in labels {
        counts[l] += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Pairwise term between two joint labels: contrast-sensitive actor and
/// action Potts values `actor_w` and `action_w`, combined multiplicatively
/// when both projections differ. Background projects to a null actor and
/// a null action.
pub fn joint_pair_energy(labels: &LabelSpace, a: usize, b: usize, actor_w: f64, action_w: f64) -> f64 {
    let actor_differs = labels.actor_of(a) != labels.actor_of(b);
    let action_differs = labels.action_of(a) != labels.action_of(b);
    match (actor_differs, action_differs) {
        (true, false) => actor_w,
        (false, true) => action_w,
        (true, true) => actor_w * action_w,
        (false, false) => 0.0,
    }
}

/// Segment-level CRF: combined unaries plus the pairwise term on every
/// graph edge.
pub fn segment_crf_energy(l: &Labeling, inst: &Instance) -> f64 {
    let p = &inst.params;
    let unary: f64 = l.0.iter().enumerate().map(|(i, &li)| inst.unary(i, li)).sum();
    let pairwise: f64 = inst
        .graph
        .edges
        .iter()
        .map(|&(i, j, w)| joint_pair_energy(&inst.labels, l.0[i], l.0[j], p.potts_actor * w, p.potts_action * w))
        .sum();
    unary + pairwise
}

/// Video-level unary over `v`.
pub fn video_unary_energy(v: &VideoLabels, inst: &Instance) -> f64 {
    let p = &inst.params;
    v.0.iter()
        .zip(&inst.unaries.video_response)
        .filter(|(&on, _)| on)
        .map(|(_, &xi)| -(xi - p.response_threshold) * p.video_scale)
        .sum()
}

/// Label cost: one `label_cost` per actor and per action that appears in
/// `l` without support in `v`. Background never pays.
pub fn label_cost_energy(l: &Labeling, v: &VideoLabels, inst: &Instance) -> f64 {
    let labels = &inst.labels;
    let mut actor_present = vec![false; labels.actors.len()];
    let mut action_present = vec![false; labels.actions.len()];
    for &li in &l.0 {
        if let Some((x, y)) = labels.joint.get(li) {
            actor_present[*x] = true;
            action_present[*y] = true;
        }
    }
    let actor_support = v.supported_actors(labels);
    let action_support = v.supported_actions(labels);
    let unsupported = actor_present.iter().zip(&actor_support).filter(|(&p, &s)| p && !s).count()
        + action_present.iter().zip(&action_support).filter(|(&p, &s)| p && !s).count();
    unsupported as f64 * inst.params.label_cost
}

pub fn video_level_energy(l: &Labeling, v: &VideoLabels, inst: &Instance) -> f64 {
    video_unary_energy(v, inst) + label_cost_energy(l, v, inst)
}

/// Entropy of the joint labels over the members of node `t`.
pub fn node_entropy(t: usize, l: &Labeling, inst: &Instance) -> f64 {
    entropy(inst.tree.members(t).iter().map(|&i| l.0[i]), inst.n_labels())
}

/// Grouping cue of node `t`: `(H * |s_t| + depth_prior) * s_t`.
pub fn grouping_energy(t: usize, l: &Labeling, active: bool, inst: &Instance) -> f64 {
    if !active {
        return 0.0;
    }
    node_entropy(t, l, inst) * inst.tree.size(t) as f64 + inst.params.depth_prior
}

/// `slice_penalty` times the number of root-to-leaf paths without exactly
/// one active node.
pub fn slice_penalty(s: &Slice, pm: &PathMatrix, inst: &Instance) -> f64 {
    let violated = pm
        .paths
        .iter()
        .filter(|path| path.iter().filter(|&&t| s.0[t]).count() != 1)
        .count();
    violated as f64 * inst.params.slice_penalty
}

/// Majority actor and action (segment counts) over the members of `t`.
/// `None` is the null projection of background; ties go to the lowest
/// index with null ordered last.
pub fn dominant_labels(t: usize, l: &Labeling, inst: &Instance) -> (Option<usize>, Option<usize>) {
    let labels = &inst.labels;
    let n_actors = labels.actors.len();
    let n_actions = labels.actions.len();
    let mut actor_counts = vec![0usize; n_actors + 1];
    let mut action_counts = vec![0usize; n_actions + 1];
    for &i in inst.tree.members(t) {
        actor_counts[labels.actor_of(l.0[i]).unwrap_or(n_actors)] += 1;
        action_counts[labels.action_of(l.0[i]).unwrap_or(n_actions)] += 1;
    }
    let argmax = |counts: &[usize]| {
        let mut best = 0;
        for (k, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = k;
            }
        }
        best
    };
    let x = argmax(&actor_counts);
    let y = argmax(&action_counts);
    ((x < n_actors).then_some(x), (y < n_actions).then_some(y))
}

/// Which refinement components are switched on for an active node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gating<'a> {
    /// Each component is on only when the node's dominant actor (action)
    /// is supported by the video labels.
    Video(&'a VideoLabels),
    /// Both components always on; used when video-level terms are disabled.
    Always,
}

/// Actor and action gates of node `t` under the current labeling.
pub fn refine_gates(t: usize, l: &Labeling, gating: Gating<'_>, inst: &Instance) -> (bool, bool) {
    match gating {
        Gating::Always => (true, true),
        Gating::Video(v) => {
            let (x, y) = dominant_labels(t, l, inst);
            let actor_on = x.is_some_and(|x| v.supported_actors(&inst.labels)[x]);
            let action_on = y.is_some_and(|y| v.supported_actions(&inst.labels)[y]);
            (actor_on, action_on)
        }
    }
}

/// Number of unordered member pairs whose keys differ.
fn disagreeing_pairs(keys: impl Iterator<Item = usize>, n_keys: usize) -> usize {
    let mut counts = vec![0usize; n_keys];
    let mut m = 0usize;
    for k in keys {
        counts[k] += 1;
        m += 1;
    }
    let same: usize = counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
    m * m.saturating_sub(1) / 2 - same
}

/// Refinement energy of node `t` with explicit gating.
pub fn refine_energy(t: usize, l: &Labeling, gating: Gating<'_>, active: bool, inst: &Instance) -> f64 {
    if !active {
        return 0.0;
    }
    let labels = &inst.labels;
    let (actor_on, action_on) = refine_gates(t, l, gating, inst);
    let members = inst.tree.members(t);
    let mut pairs = 0;
    if actor_on {
        let n = labels.actors.len();
        pairs += disagreeing_pairs(members.iter().map(|&i| labels.actor_of(l.0[i]).unwrap_or(n)), n + 1);
    }
    if action_on {
        let n = labels.actions.len();
        pairs += disagreeing_pairs(members.iter().map(|&i| labels.action_of(l.0[i]).unwrap_or(n)), n + 1);
    }
    pairs as f64 * inst.params.group_strength
}

/// Video-gated refinement energy of node `t`.
pub fn gpm_refine_energy(t: usize, l: &Labeling, v: &VideoLabels, active: bool, inst: &Instance) -> f64 {
    refine_energy(t, l, Gating::Video(v), active, inst)
}

/// The five components of the total energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub segment_crf: f64,
    pub video_level: f64,
    pub slice_penalty: f64,
    pub refine: f64,
    pub grouping: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.segment_crf + self.video_level + self.slice_penalty + self.refine + self.grouping
    }
}

pub fn energy_breakdown(l: &Labeling, s: &Slice, v: &VideoLabels, inst: &Instance) -> EnergyBreakdown {
    let pm = inst.tree.path_matrix();
    let mut refine = 0.0;
    let mut grouping = 0.0;
    for t in 0..inst.tree.n_nodes() {
        refine += gpm_refine_energy(t, l, v, s.0[t], inst);
        grouping += grouping_energy(t, l, s.0[t], inst);
    }
    EnergyBreakdown {
        segment_crf: segment_crf_energy(l, inst),
        video_level: video_level_energy(l, v, inst),
        slice_penalty: slice_penalty(s, &pm, inst),
        refine,
        grouping,
    }
}

/// Full model energy of `(l, s, v)`.
pub fn total_energy(l: &Labeling, s: &Slice, v: &VideoLabels, inst: &Instance) -> f64 {
    energy_breakdown(l, s, v, inst).total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::SupervoxelTree;
    use crate::instance::tests::small_instance;
    use crate::instance::{Params, SegmentGraph, UnaryTables};

    fn two_segment(actor_w: f64, action_w: f64) -> Instance {
        let mut inst = small_instance();
        inst.graph = SegmentGraph {
            n_segments: 2,
            edges: vec![(0, 1, 1.0)],
            segment_sizes: vec![1, 1],
            frame_of: None,
            grid: None,
        };
        inst.unaries = UnaryTables {
            actor: vec![vec![0.0; 2]; 2],
            action: vec![vec![0.0; 2]; 2],
            joint: vec![vec![0.0; 5]; 2],
            video_response: vec![0.0; 4],
        };
        inst.tree = SupervoxelTree::single_node(&[1, 1]);
        inst.params.potts_actor = actor_w;
        inst.params.potts_action = action_w;
        inst
    }

    // labels: 0 dog-running, 1 dog-eating, 2 cat-running, 3 cat-eating, 4 bg

    #[test]
    fn same_label_pairwise_is_zero() {
        let inst = two_segment(0.7, 0.4);
        assert_eq!(segment_crf_energy(&Labeling(vec![2, 2]), &inst), 0.0);
    }

    #[test]
    fn actor_only_difference_costs_actor_potts() {
        let inst = two_segment(0.7, 0.4);
        // dog-running vs cat-running
        assert_eq!(segment_crf_energy(&Labeling(vec![0, 2]), &inst), 0.7);
    }

    #[test]
    fn both_differ_costs_product() {
        let inst = two_segment(0.5, 0.4);
        // dog-running vs cat-eating
        let e = segment_crf_energy(&Labeling(vec![0, 3]), &inst);
        assert!((e - 0.2).abs() < 1e-15);
        // background differs from everything in both projections
        let e = segment_crf_energy(&Labeling(vec![4, 1]), &inst);
        assert!((e - 0.2).abs() < 1e-15);
    }

    #[test]
    fn video_unary_examples() {
        let mut inst = two_segment(1.0, 1.0);
        inst.params.response_threshold = 0.5;
        inst.params.video_scale = 100.0;
        inst.unaries.video_response = vec![0.5, 0.8, 0.0, 0.0];
        assert_eq!(video_unary_energy(&VideoLabels(vec![true, false, false, false]), &inst), 0.0);
        let e = video_unary_energy(&VideoLabels(vec![false, true, false, false]), &inst);
        assert!((e + 30.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_actor_and_action_cost_twice() {
        let mut inst = two_segment(1.0, 1.0);
        inst.params.label_cost = 10.0;
        // dog-running everywhere, only cat-eating supported
        let v = VideoLabels(vec![false, false, false, true]);
        assert_eq!(label_cost_energy(&Labeling(vec![0, 0]), &v, &inst), 20.0);
        // dog-eating: action supported, actor not
        assert_eq!(label_cost_energy(&Labeling(vec![1, 4]), &v, &inst), 10.0);
        // background is free
        assert_eq!(label_cost_energy(&Labeling(vec![4, 4]), &v, &inst), 0.0);
    }

    fn flat_group(n: usize, depth_prior: f64, group_strength: f64) -> Instance {
        let mut inst = two_segment(1.0, 1.0);
        let sizes = vec![1; n];
        inst.graph = SegmentGraph {
            n_segments: n,
            edges: vec![],
            segment_sizes: sizes.clone(),
            frame_of: None,
            grid: None,
        };
        inst.unaries = UnaryTables {
            actor: vec![vec![0.0; 2]; n],
            action: vec![vec![0.0; 2]; n],
            joint: vec![vec![0.0; 5]; n],
            video_response: vec![0.0; 4],
        };
        inst.tree = SupervoxelTree::single_node(&sizes);
        inst.params = Params {
            depth_prior,
            group_strength,
            ..inst.params
        };
        inst
    }

    #[test]
    fn grouping_energy_examples() {
        let inst = flat_group(10, 5.0, 0.0);
        let pure = Labeling(vec![3; 10]);
        assert_eq!(grouping_energy(0, &pure, false, &inst), 0.0);
        assert_eq!(grouping_energy(0, &pure, true, &inst), 5.0);

        let inst = flat_group(10, 0.0, 0.0);
        let split = Labeling((0..10).map(|i| i % 2).collect());
        let e = grouping_energy(0, &split, true, &inst);
        assert!((e - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((e - 6.9315).abs() < 1e-4);
    }

    #[test]
    fn entropy_pure_and_uniform() {
        assert_eq!(entropy([3, 3, 3, 3], 5), 0.0);
        for k in 1..8usize {
            let labels: Vec<usize> = (0..k * 3).map(|i| i % k).collect();
            assert!((entropy(labels, 8) - (k as f64).ln()).abs() < 1e-12);
        }
    }

    fn slice_tree() -> Instance {
        // root 7 with leaves 0..7 (seven leaves)
        let mut inst = flat_group(7, 0.0, 0.0);
        let mut parent = vec![Some(7); 7];
        parent.push(None);
        let mut leaves: Vec<Vec<usize>> = (0..7).map(|i| vec![i]).collect();
        leaves.push(vec![]);
        let mut level = vec![0; 7];
        level.push(1);
        inst.tree = SupervoxelTree::from_leaves(parent, leaves, level, &[1; 7]).unwrap();
        inst.params.slice_penalty = 1000.0;
        inst
    }

    #[test]
    fn slice_penalty_examples() {
        let inst = slice_tree();
        let pm = inst.tree.path_matrix();
        let valid = Slice::root_only(8, 7);
        assert_eq!(slice_penalty(&valid, &pm, &inst), 0.0);
        assert_eq!(slice_penalty(&Slice(vec![false; 8]), &pm, &inst), 7000.0);
        let mut s = valid.clone();
        s.0[3] = true;
        assert_eq!(slice_penalty(&s, &pm, &inst), 1000.0);
    }

    #[test]
    fn refine_energy_examples() {
        let inst = flat_group(3, 0.0, 2.0);
        let all_dog_running = VideoLabels(vec![true, false, false, false]);
        // identical labels
        assert_eq!(gpm_refine_energy(0, &Labeling(vec![1, 1, 1]), &all_dog_running, true, &inst), 0.0);
        // actors (dog, dog, cat), actions all running, dog supported
        let l = Labeling(vec![0, 0, 2]);
        assert_eq!(gpm_refine_energy(0, &l, &all_dog_running, true, &inst), 4.0);
        assert_eq!(gpm_refine_energy(0, &l, &all_dog_running, false, &inst), 0.0);
        // dominant actor cat unsupported -> actor term 0; actions agree
        let l = Labeling(vec![2, 2, 0]);
        assert_eq!(gpm_refine_energy(0, &l, &all_dog_running, true, &inst), 0.0);
        // action gate on, actor gate off: (cat-running, cat-running, cat-eating)
        let l = Labeling(vec![2, 2, 3]);
        assert_eq!(gpm_refine_energy(0, &l, &all_dog_running, true, &inst), 4.0);
    }

    #[test]
    fn refine_counts_match_pair_enumeration() {
        let inst = flat_group(6, 0.0, 1.5);
        let l = Labeling(vec![0, 1, 2, 4, 0, 3]);
        let e = refine_energy(0, &l, Gating::Always, true, &inst);
        let labels = &inst.labels;
        let mut expected = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                if labels.actor_of(l.0[i]) != labels.actor_of(l.0[j]) {
                    expected += 1.5;
                }
                if labels.action_of(l.0[i]) != labels.action_of(l.0[j]) {
                    expected += 1.5;
                }
            }
        }
        assert_eq!(e, expected);
    }

    #[test]
    fn dominant_ties_break_low() {
        let inst = flat_group(4, 0.0, 0.0);
        // actors: dog, dog, cat, cat -> dog; actions: running x2, eating x2 -> running
        assert_eq!(dominant_labels(0, &Labeling(vec![0, 1, 2, 3]), &inst), (Some(0), Some(0)));
        // background majority -> null
        assert_eq!(dominant_labels(0, &Labeling(vec![4, 4, 4, 3]), &inst), (None, None));
    }

    #[test]
    fn all_zero_total() {
        let mut inst = flat_group(1, 0.0, 0.0);
        inst.unaries.joint = vec![vec![0.0; 5]];
        let l = Labeling(vec![0]);
        let e = total_energy(&l, &Slice(vec![true]), &VideoLabels::empty(4), &inst);
        // dog-running unsupported: label cost is charged unless zero
        inst.params.label_cost = 0.0;
        let e0 = total_energy(&l, &Slice(vec![true]), &VideoLabels::empty(4), &inst);
        assert!(e > 0.0);
        assert_eq!(e0, 0.0);
    }
}
