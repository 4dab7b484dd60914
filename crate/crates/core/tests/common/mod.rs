#![allow(dead_code)]

use gpm_core::energy::{Labeling, Slice, VideoLabels};
use gpm_core::hierarchy::SupervoxelTree;
use gpm_core::instance::{Instance, LabelSpace, Params, SegmentGraph, UnaryTables};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rooted tree with `n_nodes` nodes (node 0 is the root, parents
/// precede children) whose leaves share `n_segments >= n_leaves` segments.
pub fn random_tree(rng: &mut ChaCha8Rng, n_nodes: usize, extra_segments: usize) -> (SupervoxelTree, usize) {
    let parent: Vec<Option<usize>> = (0..n_nodes)
        .map(|t| (t > 0).then(|| rng.random_range(0..t)))
        .collect();
    let mut is_leaf = vec![true; n_nodes];
    for p in parent.iter().flatten() {
        is_leaf[*p] = false;
    }
    let leaves: Vec<usize> = (0..n_nodes).filter(|&t| is_leaf[t]).collect();
    let n_segments = leaves.len() + extra_segments;
    let mut leaf_members = vec![Vec::new(); n_nodes];
    for (i, &leaf) in leaves.iter().enumerate() {
        leaf_members[leaf].push(i);
    }
    for i in leaves.len()..n_segments {
        leaf_members[leaves[rng.random_range(0..leaves.len())]].push(i);
    }
    let mut depth = vec![0usize; n_nodes];
    for t in 1..n_nodes {
        depth[t] = depth[parent[t].unwrap()] + 1;
    }
    let max_depth = *depth.iter().max().unwrap();
    let level = depth.iter().map(|d| max_depth - d).collect();
    let sizes: Vec<u64> = (0..n_segments).map(|_| rng.random_range(1..10)).collect();
    let tree = SupervoxelTree::from_leaves(parent, leaf_members, level, &sizes).unwrap();
    (tree, n_segments)
}

/// Random valid instance over a random tree. Pairwise strengths are kept
/// inside the range where the bilayer table stays a metric.
pub fn random_instance(rng: &mut ChaCha8Rng, max_nodes: usize, extra_segments: usize) -> Instance {
    let n_nodes = rng.random_range(1..=max_nodes);
    let (tree_shape, n) = random_tree(rng, n_nodes, extra_segments);
    let n_actors = rng.random_range(1..=2);
    let n_actions = rng.random_range(1..=2);
    let actors: Vec<String> = (0..n_actors).map(|x| format!("actor{x}")).collect();
    let actions: Vec<String> = (0..n_actions).map(|y| format!("action{y}")).collect();
    let mut joint: Vec<(usize, usize)> = (0..n_actors).flat_map(|x| (0..n_actions).map(move |y| (x, y))).collect();
    if joint.len() > 1 && rng.random_bool(0.3) {
        joint.remove(rng.random_range(0..joint.len()));
    }
    let labels = LabelSpace {
        actors,
        actions,
        joint,
        background: "background".into(),
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.4) {
                edges.push((i, j, rng.random_range(0.5..=1.0)));
            }
        }
    }
    let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(1..6)).collect();
    let tree = SupervoxelTree::from_leaves(
        (0..tree_shape.n_nodes()).map(|t| tree_shape.parent(t)).collect(),
        (0..tree_shape.n_nodes())
            .map(|t| {
                if tree_shape.is_leaf(t) {
                    tree_shape.members_of(t).unwrap().to_vec()
                } else {
                    vec![]
                }
            })
            .collect(),
        (0..tree_shape.n_nodes()).map(|t| tree_shape.level(t)).collect(),
        &sizes,
    )
    .unwrap();
    let table = |rng: &mut ChaCha8Rng, cols: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let unaries = UnaryTables {
        actor: table(rng, n_actors),
        action: table(rng, n_actions),
        joint: table(rng, labels.n_labels()),
        video_response: (0..labels.n_joint()).map(|_| rng.random_range(0.0..1.0)).collect(),
    };
    let potts = rng.random_range(1.0..=2.0);
    let params = Params {
        group_strength: rng.random_range(0.0..2.0),
        depth_prior: rng.random_range(0.0..3.0),
        slice_penalty: Params::min_slice_penalty(&unaries) + 1.0,
        response_threshold: 0.5,
        video_scale: 10.0,
        label_cost: rng.random_range(0.0..3.0),
        potts_actor: potts,
        potts_action: potts,
        max_iters: 10,
        epsilon: 1e-6,
    };
    Instance {
        labels,
        graph: SegmentGraph {
            n_segments: n,
            edges,
            segment_sizes: sizes,
            frame_of: None,
            grid: None,
        },
        unaries,
        tree,
        params,
        ground_truth: None,
    }
}

pub fn random_labeling(rng: &mut ChaCha8Rng, inst: &Instance) -> Labeling {
    Labeling((0..inst.n_segments()).map(|_| rng.random_range(0..inst.n_labels())).collect())
}

pub fn random_slice(rng: &mut ChaCha8Rng, inst: &Instance) -> Slice {
    Slice((0..inst.tree.n_nodes()).map(|_| rng.random_bool(0.4)).collect())
}

pub fn random_video(rng: &mut ChaCha8Rng, inst: &Instance) -> VideoLabels {
    VideoLabels((0..inst.labels.n_joint()).map(|_| rng.random_bool(0.5)).collect())
}
