//! Planted-truth instances: moving boxes on a voxel grid.
//!
//! Segments are cubic blocks of `segment_block` voxels. Each planted
//! object is an axis-aligned box with its own joint label that moves with
//! a constant velocity, bouncing off the borders; later objects occlude
//! earlier ones. A segment's truth is the majority owner of its voxels
//! (background wins ties).
//!
//! Unaries are built so the combined unary is 0 for the true label and 1
//! for every other label, then Gaussian noise is added to the joint table.
//! Video responses are `1 + noise` for planted labels and `0 + noise`
//! otherwise.
//!
//! Contrast: `w = 1` between segments with the same owner, `boundary_weight`
//! between segments with different owners.
//!
//! Hierarchy: level `k` groups segments by (owner, cell of `2^(k+1)` blocks
//! per side), so supervoxels never straddle an object boundary and member
//! counts stay bounded. The levels go through `build_tree`, which adds a
//! virtual root when the coarsest level has several supervoxels.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::energy::Labeling;
use crate::error::{GpmError, Result};
use crate::hierarchy::build_tree;
use crate::instance::{GridLayout, Instance, LabelSpace, Params, SegmentGraph, UnaryTables};

/// Per-projection share of the unit unary gap for a wrong actor or action.
const PROJECTION_GAP: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub segment_block: usize,
    pub n_actors_present: usize,
    pub label_space: LabelSpace,
    pub tree_levels: usize,
    pub unary_noise: f64,
    pub response_noise: f64,
    /// Box side range as fractions of the grid side.
    pub box_fraction: (f64, f64),
    /// Largest per-frame displacement along x and y, in voxels.
    pub max_speed: usize,
    /// Contrast weight between segments with different owners.
    pub boundary_weight: f64,
    pub params: Params,
    pub seed: u64,
}

/// Three actors, three actions, one invalid pair.
pub fn default_label_space() -> LabelSpace {
    let mut labels = LabelSpace::product(&["adult", "dog", "ball"], &["walking", "running", "rolling"]);
    // a ball does not walk
    labels.joint.retain(|&p| p != (2, 0));
    labels
}

/// Parameters for generated instances. Segment sizes are `block^3` voxels,
/// so entropy costs scale fast; a larger depth prior lets coarse pure
/// supervoxels win over their leaves.
pub fn default_params() -> Params {
    Params {
        depth_prior: 500.0,
        ..Params::default()
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 32,
            height: 32,
            frames: 16,
            segment_block: 4,
            n_actors_present: 2,
            label_space: default_label_space(),
            tree_levels: 3,
            unary_noise: 0.3,
            response_noise: 0.1,
            box_fraction: (0.375, 0.625),
            max_speed: 1,
            boundary_weight: 0.5,
            params: default_params(),
            seed: 0,
        }
    }
}

fn config_err(field: &'static str, message: impl Into<String>) -> GpmError {
    GpmError::InvalidConfig {
        field,
        message: message.into(),
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let b = self.segment_block;
        if b == 0 {
            return Err(config_err("segment_block", "must be positive"));
        }
        for (field, side) in [("width", self.width), ("height", self.height), ("frames", self.frames)] {
            if side == 0 || side % b != 0 {
                return Err(config_err(field, format!("{side} is not a positive multiple of segment_block {b}")));
            }
        }
        if self.tree_levels == 0 {
            return Err(config_err("tree_levels", "must be at least 1"));
        }
        if !(self.unary_noise >= 0.0 && self.unary_noise.is_finite()) {
            return Err(config_err("unary_noise", "must be finite and non-negative"));
        }
        if !(self.response_noise >= 0.0 && self.response_noise.is_finite()) {
            return Err(config_err("response_noise", "must be finite and non-negative"));
        }
        if self.label_space.joint.is_empty() {
            return Err(config_err("label_space", "joint label space is empty"));
        }
        if self.n_actors_present > self.label_space.n_joint() {
            return Err(config_err(
                "n_actors_present",
                format!(
                    "{} objects need distinct labels but only {} exist",
                    self.n_actors_present,
                    self.label_space.n_joint()
                ),
            ));
        }
        let (lo, hi) = self.box_fraction;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(config_err("box_fraction", "need 0 < min <= max <= 1"));
        }
        let fits = (self.width as f64 * lo).floor() >= 1.0 && (self.height as f64 * lo).floor() >= 1.0;
        if self.n_actors_present > 0 && !fits {
            return Err(config_err("box_fraction", "smallest box does not fit the grid"));
        }
        if !(self.boundary_weight >= 0.0 && self.boundary_weight.is_finite()) {
            return Err(config_err("boundary_weight", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn layout(&self) -> GridLayout {
        GridLayout {
            width: self.width,
            height: self.height,
            frames: self.frames,
            block: self.segment_block,
        }
    }
}

struct MovingBox {
    x: f64,
    y: f64,
    w: usize,
    h: usize,
    vx: i64,
    vy: i64,
}

impl MovingBox {
    /// Top-left corner at `frame`, reflecting off the borders.
    fn corner(&self, frame: usize, width: usize, height: usize) -> (usize, usize) {
        let bounce = |start: f64, v: i64, range: usize| -> usize {
            if range == 0 {
                return 0;
            }
            let period = 2 * range as i64;
            let p = (start as i64 + v * frame as i64).rem_euclid(period);
            (if p > range as i64 { period - p } else { p }) as usize
        };
        (bounce(self.x, self.vx, width - self.w), bounce(self.y, self.vy, height - self.h))
    }
}

/// Per-voxel owner: `0` background, `k + 1` object `k`.
fn render_owners(config: &SynthConfig, boxes: &[MovingBox]) -> Vec<u32> {
    let (w, h) = (config.width, config.height);
    let mut owner = vec![0u32; w * h * config.frames];
    for f in 0..config.frames {
        for (k, b) in boxes.iter().enumerate() {
            let (cx, cy) = b.corner(f, w, h);
            for y in cy..cy + b.h {
                let row = (f * h + y) * w;
                owner[row + cx..row + cx + b.w].fill(k as u32 + 1);
            }
        }
    }
    owner
}

/// Majority owner per segment; ties go to the lowest owner code.
fn segment_owners(config: &SynthConfig, voxels: &[u32], n_objects: usize) -> Vec<usize> {
    let layout = config.layout();
    let mut counts = vec![vec![0usize; n_objects + 1]; layout.n_segments()];
    for f in 0..config.frames {
        for y in 0..config.height {
            for x in 0..config.width {
                let o = voxels[(f * config.height + y) * config.width + x] as usize;
                counts[layout.segment_at(x, y, f)][o] += 1;
            }
        }
    }
    counts
        .iter()
        .map(|c| {
            let mut best = 0;
            for (o, &n) in c.iter().enumerate() {
                if n > c[best] {
                    best = o;
                }
            }
            best
        })
        .collect()
}

/// Unary rows for `target`: combined unary 0 at `target`, 1 elsewhere.
fn planted_rows(labels: &LabelSpace, target: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let tx = labels.actor_of(target);
    let ty = labels.action_of(target);
    let actor: Vec<f64> = (0..labels.actors.len())
        .map(|x| if Some(x) == tx { 0.0 } else { PROJECTION_GAP })
        .collect();
    let action: Vec<f64> = (0..labels.actions.len())
        .map(|y| if Some(y) == ty { 0.0 } else { PROJECTION_GAP })
        .collect();
    let joint = (0..labels.n_labels())
        .map(|l| {
            let goal = if l == target { 0.0 } else { 1.0 };
            match labels.joint.get(l) {
                Some(&(x, y)) => goal - actor[x] - action[y],
                None => goal,
            }
        })
        .collect();
    (actor, action, joint)
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

/// Generates an instance and its planted truth labeling.
pub fn generate(config: &SynthConfig) -> Result<(Instance, Labeling)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels = config.label_space.clone();
    let layout = config.layout();
    let n = layout.n_segments();
    let (nx, ny, nf) = layout.blocks();

    let mut planted: Vec<usize> = (0..labels.n_joint()).collect();
    planted.shuffle(&mut rng);
    planted.truncate(config.n_actors_present);

    let (lo, hi) = config.box_fraction;
    let side = |rng: &mut ChaCha8Rng, extent: usize| {
        let a = ((extent as f64 * lo).floor() as usize).max(1);
        let b = ((extent as f64 * hi).floor() as usize).clamp(a, extent);
        rng.random_range(a..=b)
    };
    let speed = config.max_speed as i64;
    let boxes: Vec<MovingBox> = planted
        .iter()
        .map(|_| {
            let w = side(&mut rng, config.width);
            let h = side(&mut rng, config.height);
            let x = rng.random_range(0..=config.width - w) as f64;
            let y = rng.random_range(0..=config.height - h) as f64;
            let (mut vx, mut vy) = (0, 0);
            while speed > 0 && vx == 0 && vy == 0 {
                vx = rng.random_range(-speed..=speed);
                vy = rng.random_range(-speed..=speed);
            }
            MovingBox { x, y, w, h, vx, vy }
        })
        .collect();

    let voxels = render_owners(config, &boxes);
    let owner = segment_owners(config, &voxels, boxes.len());
    let truth: Vec<usize> = owner
        .iter()
        .map(|&o| if o == 0 { labels.background_label() } else { planted[o - 1] })
        .collect();

    let unary_noise = normal(config.unary_noise);
    let mut unaries = UnaryTables {
        actor: Vec::with_capacity(n),
        action: Vec::with_capacity(n),
        joint: Vec::with_capacity(n),
        video_response: Vec::with_capacity(labels.n_joint()),
    };
    for &t in &truth {
        let (actor, action, mut joint) = planted_rows(&labels, t);
        if config.unary_noise > 0.0 {
            for v in &mut joint {
                *v += unary_noise.sample(&mut rng);
            }
        }
        unaries.actor.push(actor);
        unaries.action.push(action);
        unaries.joint.push(joint);
    }
    let response_noise = normal(config.response_noise);
    for z in 0..labels.n_joint() {
        let base = if planted.contains(&z) { 1.0 } else { 0.0 };
        let noise = if config.response_noise > 0.0 {
            response_noise.sample(&mut rng)
        } else {
            0.0
        };
        unaries.video_response.push(base + noise);
    }

    let index = |bx: usize, by: usize, bf: usize| (bf * ny + by) * nx + bx;
    let mut edges = Vec::new();
    for bf in 0..nf {
        for by in 0..ny {
            for bx in 0..nx {
                let i = index(bx, by, bf);
                let mut link = |j: usize| {
                    let w = if owner[i] == owner[j] { 1.0 } else { config.boundary_weight };
                    edges.push((i, j, w));
                };
                if bx + 1 < nx {
                    link(index(bx + 1, by, bf));
                }
                if by + 1 < ny {
                    link(index(bx, by + 1, bf));
                }
                if bf + 1 < nf {
                    link(index(bx, by, bf + 1));
                }
            }
        }
    }
    let block = config.segment_block;
    let segment_sizes = vec![(block * block * block) as u64; n];
    let frame_of = (0..n).map(|i| (i / (nx * ny)) * block).collect();

    let levels: Vec<Vec<usize>> = (0..config.tree_levels)
        .map(|k| {
            let scale = 1usize << (k + 1);
            let mut ids: BTreeMap<(usize, usize, usize, usize), usize> = BTreeMap::new();
            (0..n)
                .map(|i| {
                    let (bx, by, bf) = (i % nx, (i / nx) % ny, i / (nx * ny));
                    let key = (owner[i], bx / scale, by / scale, bf / scale);
                    let next = ids.len();
                    *ids.entry(key).or_insert(next)
                })
                .collect()
        })
        .collect();
    let tree = build_tree(&levels, &segment_sizes)?;

    let mut params = config.params.clone();
    params.slice_penalty = params.slice_penalty.max(Params::min_slice_penalty(&unaries));

    let inst = Instance {
        labels,
        graph: SegmentGraph {
            n_segments: n,
            edges,
            segment_sizes,
            frame_of: Some(frame_of),
            grid: Some(layout),
        },
        unaries,
        tree,
        params,
        ground_truth: None,
    };
    Ok((inst, Labeling(truth)))
}

/// Replaces the unary rows of `round(flip_fraction * N)` random segments so
/// that their argmin is a uniformly chosen wrong label. The new rows put 0
/// on that label and `1 + U[0, 0.5)` on every other label.
pub fn corrupt(inst: &Instance, truth: &Labeling, flip_fraction: f64, seed: u64) -> Result<Instance> {
    if !(0.0..=1.0).contains(&flip_fraction) {
        return Err(config_err("flip_fraction", format!("{flip_fraction} is outside [0, 1]")));
    }
    let n = inst.n_segments();
    if truth.len() != n {
        return Err(GpmError::InvalidInstance(format!(
            "truth has {} entries, expected {n}",
            truth.len()
        )));
    }
    let labels = &inst.labels;
    let k = labels.n_labels();
    let mut out = inst.clone();
    if k < 2 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_flip = (flip_fraction * n as f64).round() as usize;
    for &i in &order[..n_flip.min(n)] {
        let mut wrong = rng.random_range(0..k - 1);
        if wrong >= truth.0[i] {
            wrong += 1;
        }
        let (actor, action, mut joint) = planted_rows(labels, wrong);
        for (l, v) in joint.iter_mut().enumerate() {
            if l != wrong {
                *v += rng.random_range(0.0..0.5);
            }
        }
        out.unaries.actor[i] = actor;
        out.unaries.action[i] = action;
        out.unaries.joint[i] = joint;
    }
    out.params.slice_penalty = out.params.slice_penalty.max(Params::min_slice_penalty(&out.unaries));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;

    #[test]
    fn planted_rows_have_unit_gap() {
        let labels = default_label_space();
        for target in 0..labels.n_labels() {
            let (actor, action, joint) = planted_rows(&labels, target);
            let u = UnaryTables {
                actor: vec![actor],
                action: vec![action],
                joint: vec![joint],
                video_response: vec![0.0; labels.n_joint()],
            };
            for l in 0..labels.n_labels() {
                let expected = if l == target { 0.0 } else { 1.0 };
                assert!((u.combined(&labels, 0, l) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_config_is_valid() {
        let (inst, truth) = generate(&SynthConfig::default()).unwrap();
        assert!(validate_instance(&inst).is_valid(), "{}", validate_instance(&inst));
        assert_eq!(truth.len(), 256);
        assert!(truth.0.iter().any(|&l| !inst.labels.is_background(l)));
    }

    #[test]
    fn no_objects_gives_background_truth() {
        let config = SynthConfig {
            n_actors_present: 0,
            ..Default::default()
        };
        let (inst, truth) = generate(&config).unwrap();
        assert!(truth.0.iter().all(|&l| inst.labels.is_background(l)));
    }

    #[test]
    fn same_seed_same_instance() {
        let config = SynthConfig {
            seed: 11,
            ..Default::default()
        };
        assert_eq!(generate(&config).unwrap(), generate(&config).unwrap());
    }

    #[test]
    fn bad_block_names_field() {
        let config = SynthConfig {
            width: 30,
            ..Default::default()
        };
        match generate(&config) {
            Err(GpmError::InvalidConfig { field, .. }) => assert_eq!(field, "width"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_many_objects_rejected() {
        let config = SynthConfig {
            n_actors_present: 9,
            ..Default::default()
        };
        assert!(matches!(generate(&config), Err(GpmError::InvalidConfig { field: "n_actors_present", .. })));
    }

    #[test]
    fn corrupt_extremes() {
        let (inst, truth) = generate(&SynthConfig::default()).unwrap();
        assert_eq!(corrupt(&inst, &truth, 0.0, 3).unwrap(), inst);
        let all = corrupt(&inst, &truth, 1.0, 3).unwrap();
        for i in 0..inst.n_segments() {
            let argmin = (0..inst.n_labels())
                .min_by(|&a, &b| all.unary(i, a).total_cmp(&all.unary(i, b)))
                .unwrap();
            assert_ne!(argmin, truth.0[i]);
        }
        assert!(validate_instance(&all).is_valid());
        assert!(corrupt(&inst, &truth, 1.5, 3).is_err());
    }

    #[test]
    fn hierarchy_respects_owners() {
        let (inst, truth) = generate(&SynthConfig::default()).unwrap();
        for t in inst.tree.leaves() {
            let m = inst.tree.members(t);
            assert!(m.iter().all(|&i| truth.0[i] == truth.0[m[0]]));
            assert!(m.len() <= 8);
        }
    }
}
