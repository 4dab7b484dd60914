//! Tree-slice selection: choose active supervoxels minimizing a linear cost
//! with exactly one active node on every root-to-leaf path.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::energy::{node_entropy, Labeling, Slice};
use crate::error::{GpmError, Result};
use crate::hierarchy::{PathMatrix, SupervoxelTree};
use crate::instance::Instance;

/// Largest tree accepted by [`brute_force_slice`].
pub const BRUTE_FORCE_MAX_NODES: usize = 22;

/// Per-node slice cost `H(s_t) * |s_t| + depth_prior`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceCosts(pub Vec<f64>);

impl SliceCosts {
    /// Objective of `s`, summed in node order.
    pub fn objective(&self, s: &Slice) -> f64 {
        self.0.iter().zip(&s.0).filter(|(_, &on)| on).map(|(c, _)| c).sum()
    }
}

pub fn slice_costs(l: &Labeling, inst: &Instance) -> SliceCosts {
    let tree = &inst.tree;
    SliceCosts(
        (0..tree.n_nodes())
            .map(|t| node_entropy(t, l, inst) * tree.size(t) as f64 + inst.params.depth_prior)
            .collect(),
    )
}

/// Exact minimum-cost slice by tree dynamic programming. On a tie between a
/// node and the best cover by its descendants, the node itself wins.
pub fn solve_slice_dp(tree: &SupervoxelTree, costs: &SliceCosts) -> Slice {
    let n = tree.n_nodes();
    let mut best = vec![0.0; n];
    let mut take = vec![false; n];
    for &t in tree.post_order() {
        if tree.is_leaf(t) {
            best[t] = costs.0[t];
            take[t] = true;
        } else {
            let below: f64 = tree.children(t).iter().map(|&c| best[c]).sum();
            take[t] = costs.0[t] <= below;
            best[t] = if take[t] { costs.0[t] } else { below };
        }
    }
    let mut active = vec![false; n];
    let mut stack = vec![tree.root()];
    while let Some(t) = stack.pop() {
        if take[t] {
            active[t] = true;
        } else {
            stack.extend_from_slice(tree.children(t));
        }
    }
    Slice(active)
}

/// Exhaustive minimum over all `2^n` activation vectors. Ties go to the
/// lexicographically smallest vector (node 0 most significant, off < on).
pub fn brute_force_slice(tree: &SupervoxelTree, costs: &SliceCosts) -> Result<Slice> {
    let n = tree.n_nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(GpmError::TooLarge {
            what: "tree nodes",
            actual: n as u128,
            limit: BRUTE_FORCE_MAX_NODES as u128,
        });
    }
    let pm = tree.path_matrix();
    let mut best: Option<(f64, Slice)> = None;
    for code in 0u64..(1u64 << n) {
        // node 0 is the most significant bit, so counting up is lexicographic
        let s = Slice((0..n).map(|t| code >> (n - 1 - t) & 1 == 1).collect());
        if !is_valid_slice(&s, &pm) {
            continue;
        }
        let obj = costs.objective(&s);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, s));
        }
    }
    Ok(best.expect("root-only slice is always valid").1)
}

/// True iff every root-to-leaf path has exactly one active node.
pub fn is_valid_slice(s: &Slice, pm: &PathMatrix) -> bool {
    pm.paths
        .iter()
        .all(|path| path.iter().filter(|&&t| s.0[t]).count() == 1)
}

/// Writes the slice program in CPLEX LP format: minimize the linear cost
/// subject to one equality row per root-to-leaf path, all variables binary.
/// Variable `s<t>` is node `t`; constraint `p<k>` is the `k`-th leaf path.
pub fn export_blp(tree: &SupervoxelTree, costs: &SliceCosts) -> String {
    let mut out = String::new();
    out.push_str("\\ tree slice selection\n");
    out.push_str("Minimize\n obj:");
    for (t, &c) in costs.0.iter().enumerate() {
        write_term(&mut out, c, t, t == 0);
    }
    out.push_str("\nSubject To\n");
    for (k, path) in tree.path_matrix().paths.iter().enumerate() {
        let vars: Vec<String> = path.iter().map(|t| format!("s{t}")).collect();
        let _ = writeln!(out, " p{k}: {} = 1", vars.join(" + "));
    }
    out.push_str("Binary\n");
    for t in 0..tree.n_nodes() {
        let _ = writeln!(out, " s{t}");
    }
    out.push_str("End\n");
    out
}

fn write_term(out: &mut String, coef: f64, t: usize, first: bool) {
    let sign = if coef.is_sign_negative() { "-" } else { "+" };
    if first && sign == "+" {
        let _ = write!(out, " {} s{t}", coef.abs());
    } else {
        let _ = write!(out, " {sign} {} s{t}", coef.abs());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root_two_leaves() -> SupervoxelTree {
        SupervoxelTree::from_leaves(
            vec![None, Some(0), Some(0)],
            vec![vec![], vec![0], vec![1]],
            vec![1, 0, 0],
            &[1, 1],
        )
        .unwrap()
    }

    #[test]
    fn single_node_is_active() {
        let tree = SupervoxelTree::single_node(&[3]);
        let costs = SliceCosts(vec![4.0]);
        assert_eq!(solve_slice_dp(&tree, &costs), Slice(vec![true]));
        assert_eq!(brute_force_slice(&tree, &costs).unwrap(), Slice(vec![true]));
    }

    #[test]
    fn cheap_leaves_win() {
        let tree = root_two_leaves();
        let costs = SliceCosts(vec![5.0, 1.0, 1.0]);
        let s = solve_slice_dp(&tree, &costs);
        assert_eq!(s, Slice(vec![false, true, true]));
        assert_eq!(costs.objective(&s), 2.0);
    }

    #[test]
    fn cheap_root_wins() {
        let tree = root_two_leaves();
        let costs = SliceCosts(vec![1.0, 3.0, 3.0]);
        let s = solve_slice_dp(&tree, &costs);
        assert_eq!(s, Slice(vec![true, false, false]));
        assert_eq!(costs.objective(&s), 1.0);
    }

    #[test]
    fn dp_tie_prefers_coarser_node() {
        let tree = root_two_leaves();
        let costs = SliceCosts(vec![2.0, 1.0, 1.0]);
        assert_eq!(solve_slice_dp(&tree, &costs), Slice(vec![true, false, false]));
    }

    #[test]
    fn brute_force_tie_is_lexicographic() {
        let tree = root_two_leaves();
        let costs = SliceCosts(vec![2.0, 1.0, 1.0]);
        // (0,1,1) < (1,0,0)
        assert_eq!(brute_force_slice(&tree, &costs).unwrap(), Slice(vec![false, true, true]));
    }

    #[test]
    fn brute_force_rejects_large_trees() {
        let n = BRUTE_FORCE_MAX_NODES + 1;
        let tree = SupervoxelTree::from_leaves(
            (0..n).map(|t| (t > 0).then_some(0)).collect(),
            (0..n).map(|t| if t == 0 { vec![] } else { vec![t - 1] }).collect(),
            (0..n).map(|t| usize::from(t == 0)).collect(),
            &vec![1; n - 1],
        )
        .unwrap();
        assert!(matches!(
            brute_force_slice(&tree, &SliceCosts(vec![0.0; n])),
            Err(GpmError::TooLarge { .. })
        ));
    }

    #[test]
    fn validity_examples() {
        let tree = root_two_leaves();
        let pm = tree.path_matrix();
        assert!(is_valid_slice(&Slice(vec![true, false, false]), &pm));
        assert!(is_valid_slice(&Slice(vec![false, true, true]), &pm));
        assert!(!is_valid_slice(&Slice(vec![true, true, false]), &pm));
        assert!(!is_valid_slice(&Slice(vec![false, true, false]), &pm));
    }

    #[test]
    fn lp_export_shapes() {
        let single = SupervoxelTree::single_node(&[1]);
        let lp = export_blp(&single, &SliceCosts(vec![1.5]));
        assert!(lp.contains(" obj: 1.5 s0\n"));
        assert_eq!(lp.matches(" = 1").count(), 1);

        let lp = export_blp(&root_two_leaves(), &SliceCosts(vec![-2.0, 0.25, 3.0]));
        assert!(lp.contains(" obj: - 2 s0 + 0.25 s1 + 3 s2\n"));
        assert!(lp.contains(" p0: s0 + s1 = 1\n"));
        assert!(lp.contains(" p1: s0 + s2 = 1\n"));
        assert_eq!(lp.matches(" = 1").count(), 2);
        assert!(lp.contains("Binary\n s0\n s1\n s2\nEnd\n"));
    }
}
