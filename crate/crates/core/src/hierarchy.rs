//! Supervoxel trees.
//!
//! A [`SupervoxelTree`] is built from a stack of flat segmentations of the
//! same segment set, finest first. Every finer supervoxel is attached to the
//! coarser supervoxel it overlaps most (in voxels), and a virtual root is
//! added when the coarsest level still has several supervoxels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GpmError, Result};

/// Rooted tree of supervoxels; each node owns a set of segment indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRecord", into = "TreeRecord")]
pub struct SupervoxelTree {
    parent: Vec<Option<usize>>,
    members: Vec<Vec<usize>>,
    size: Vec<u64>,
    level: Vec<usize>,
    children: Vec<Vec<usize>>,
    root: usize,
    post_order: Vec<usize>,
}

/// On-disk form of a tree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeRecord {
    pub parent: Vec<Option<usize>>,
    pub members: Vec<Vec<usize>>,
    pub size: Vec<u64>,
    pub level: Vec<usize>,
}

impl TryFrom<TreeRecord> for SupervoxelTree {
    type Error = GpmError;

    fn try_from(r: TreeRecord) -> Result<Self> {
        SupervoxelTree::new(r.parent, r.members, r.size, r.level)
    }
}

impl From<SupervoxelTree> for TreeRecord {
    fn from(t: SupervoxelTree) -> Self {
        TreeRecord {
            parent: t.parent,
            members: t.members,
            size: t.size,
            level: t.level,
        }
    }
}

fn herr(msg: impl Into<String>) -> GpmError {
    GpmError::Hierarchy(msg.into())
}

impl SupervoxelTree {
    /// Builds a tree from explicit per-node data, checking the structural
    /// invariants (single root, acyclic, members are unions of children,
    /// nonempty leaves). Member lists are normalized to sorted order.
    pub fn new(
        parent: Vec<Option<usize>>,
        mut members: Vec<Vec<usize>>,
        size: Vec<u64>,
        level: Vec<usize>,
    ) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(herr("tree has no nodes"));
        }
        if members.len() != n || size.len() != n || level.len() != n {
            return Err(herr("per-node arrays have mismatched lengths"));
        }
        let mut children = vec![Vec::new(); n];
        let mut root = None;
        for (t, p) in parent.iter().enumerate() {
            match *p {
                None => {
                    if root.replace(t).is_some() {
                        return Err(herr("more than one root"));
                    }
                }
                Some(p) if p >= n => return Err(herr(format!("node {t} has parent {p} out of range"))),
                Some(p) if p == t => return Err(herr(format!("node {t} is its own parent"))),
                Some(p) => children[p].push(t),
            }
        }
        let root = root.ok_or_else(|| herr("no root"))?;

        // Iterative DFS; any node not reached sits on a cycle.
        let mut post_order = Vec::with_capacity(n);
        let mut stack = vec![(root, false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                post_order.push(t);
            } else {
                stack.push((t, true));
                for &c in children[t].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        if post_order.len() != n {
            return Err(herr("parent links contain a cycle"));
        }

        for m in members.iter_mut() {
            m.sort_unstable();
        }
        for t in 0..n {
            if members[t].windows(2).any(|w| w[0] == w[1]) {
                return Err(herr(format!("node {t} lists a segment twice")));
            }
            if children[t].is_empty() {
                if members[t].is_empty() {
                    return Err(herr(format!("leaf {t} has no members")));
                }
            } else {
                let mut union: Vec<usize> = children[t]
                    .iter()
                    .flat_map(|&c| members[c].iter().copied())
                    .collect();
                union.sort_unstable();
                union.dedup();
                if union != members[t] {
                    return Err(herr(format!(
                        "members of node {t} differ from the union of its children"
                    )));
                }
            }
        }

        Ok(SupervoxelTree {
            parent,
            members,
            size,
            level,
            children,
            root,
            post_order,
        })
    }

    /// Builds a tree from parent links and leaf members only: internal
    /// members are unions and sizes are sums of `segment_sizes`.
    pub fn from_leaves(
        parent: Vec<Option<usize>>,
        leaf_members: Vec<Vec<usize>>,
        level: Vec<usize>,
        segment_sizes: &[u64],
    ) -> Result<Self> {
        let n = parent.len();
        if leaf_members.len() != n {
            return Err(herr("leaf member list length mismatch"));
        }
        let mut children = vec![Vec::new(); n];
        for (t, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p < n && p != t {
                    children[p].push(t);
                }
            }
        }
        // Reversed preorder visits children before parents.
        let root = parent.iter().position(Option::is_none).ok_or_else(|| herr("no root"))?;
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(t) = stack.pop() {
            order.push(t);
            if order.len() > n {
                return Err(herr("parent links contain a cycle"));
            }
            stack.extend(children[t].iter().copied());
        }
        let mut members = leaf_members;
        for &t in order.iter().rev() {
            if !children[t].is_empty() {
                let mut union: Vec<usize> = children[t]
                    .iter()
                    .flat_map(|&c| members[c].iter().copied())
                    .collect();
                union.sort_unstable();
                union.dedup();
                members[t] = union;
            }
        }
        let mut size = Vec::with_capacity(n);
        for m in &members {
            let mut s = 0u64;
            for &i in m {
                s += *segment_sizes
                    .get(i)
                    .ok_or_else(|| herr(format!("segment {i} has no size")))?;
            }
            size.push(s);
        }
        SupervoxelTree::new(parent, members, size, level)
    }

    /// One node holding every segment.
    pub fn single_node(segment_sizes: &[u64]) -> Self {
        let members = (0..segment_sizes.len()).collect();
        let size = segment_sizes.iter().sum();
        SupervoxelTree::new(vec![None], vec![members], vec![size], vec![0])
            .expect("single node tree with members")
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, t: usize) -> Option<usize> {
        self.parent[t]
    }

    pub fn children(&self, t: usize) -> &[usize] {
        &self.children[t]
    }

    pub fn is_leaf(&self, t: usize) -> bool {
        self.children[t].is_empty()
    }

    /// Voxel count of node `t`.
    pub fn size(&self, t: usize) -> u64 {
        self.size[t]
    }

    pub fn level(&self, t: usize) -> usize {
        self.level[t]
    }

    /// Nodes ordered so every child precedes its parent.
    pub fn post_order(&self) -> &[usize] {
        &self.post_order
    }

    /// Leaf nodes in index order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&t| self.is_leaf(t)).collect()
    }

    /// Segment indices grouped under node `t`, sorted.
    pub fn members_of(&self, t: usize) -> Result<&[usize]> {
        self.members
            .get(t)
            .map(Vec::as_slice)
            .ok_or(GpmError::NodeOutOfRange {
                index: t,
                n_nodes: self.n_nodes(),
            })
    }

    pub(crate) fn members(&self, t: usize) -> &[usize] {
        &self.members[t]
    }

    /// Root-to-leaf paths, one per leaf.
    pub fn path_matrix(&self) -> PathMatrix {
        let paths = self
            .leaves()
            .into_iter()
            .map(|leaf| {
                let mut path = vec![leaf];
                let mut t = leaf;
                while let Some(p) = self.parent[t] {
                    path.push(p);
                    t = p;
                }
                path.reverse();
                path
            })
            .collect();
        PathMatrix { paths }
    }
}

/// All root-to-leaf paths of a tree; row `p` lists node indices from the
/// root down to the `p`-th leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathMatrix {
    pub paths: Vec<Vec<usize>>,
}

impl PathMatrix {
    pub fn n_leaves(&self) -> usize {
        self.paths.len()
    }
}

/// Extracts a tree from flat segmentations of the same segments.
///
/// `levels[k][i]` is the supervoxel id of segment `i` at level `k`. Levels
/// are reordered fine-to-coarse by descending supervoxel count (stable, so
/// equal counts keep input order). Each finer supervoxel gets as parent the
/// coarser one with maximal voxel overlap, ties going to the lowest id.
/// Coarse supervoxels that end up with no children are dropped.
pub fn build_tree(levels: &[Vec<usize>], segment_sizes: &[u64]) -> Result<SupervoxelTree> {
    if levels.is_empty() {
        return Err(herr("no segmentation levels given"));
    }
    let n_segments = segment_sizes.len();
    for (k, level) in levels.iter().enumerate() {
        if level.is_empty() {
            return Err(herr(format!("level {k} has zero supervoxels")));
        }
        if level.len() != n_segments {
            return Err(herr(format!(
                "level {k} labels {} segments, expected {n_segments}",
                level.len()
            )));
        }
    }

    let distinct = |level: &Vec<usize>| {
        let mut ids = level.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let mut sorted: Vec<(Vec<usize>, &Vec<usize>)> = levels.iter().map(|l| (distinct(l), l)).collect();
    sorted.sort_by(|a, b| b.0.len().cmp(&a.0.len()));

    // Node bookkeeping per level: ids, alive flag, parent (as coarse id).
    let n_levels = sorted.len();
    let mut alive: Vec<Vec<bool>> = Vec::with_capacity(n_levels);
    let mut parent_id: Vec<Vec<Option<usize>>> = Vec::with_capacity(n_levels);
    for (ids, _) in &sorted {
        alive.push(vec![false; ids.len()]);
        parent_id.push(vec![None; ids.len()]);
    }
    alive[0].iter_mut().for_each(|a| *a = true);

    for k in 0..n_levels.saturating_sub(1) {
        let (fine_ids, fine) = &sorted[k];
        let (coarse_ids, coarse) = &sorted[k + 1];
        let mut overlap: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); fine_ids.len()];
        for i in 0..n_segments {
            let a = fine_ids.binary_search(&fine[i]).expect("id present");
            *overlap[a].entry(coarse[i]).or_insert(0) += segment_sizes[i];
        }
        for (a, ov) in overlap.iter().enumerate() {
            if !alive[k][a] {
                continue;
            }
            // BTreeMap iterates ids ascending, so strict `>` keeps the lowest id on ties.
            let mut best: Option<(usize, u64)> = None;
            for (&id, &v) in ov {
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((id, v));
                }
            }
            let (id, _) = best.expect("every supervoxel covers a segment");
            parent_id[k][a] = Some(id);
            let b = coarse_ids.binary_search(&id).expect("id present");
            alive[k + 1][b] = true;
        }
    }

    // Dense node numbering over surviving supervoxels, finest level first.
    let mut index: Vec<Vec<Option<usize>>> = Vec::with_capacity(n_levels);
    let mut next = 0;
    for a in &alive {
        index.push(
            a.iter()
                .map(|&live| {
                    live.then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect(),
        );
    }
    let n_real = next;
    let top_alive = alive[n_levels - 1].iter().filter(|&&a| a).count();
    let virtual_root = top_alive > 1;
    let n_nodes = n_real + usize::from(virtual_root);

    let mut parent = vec![None; n_nodes];
    let mut level = vec![0; n_nodes];
    let mut leaf_members = vec![Vec::new(); n_nodes];
    for k in 0..n_levels {
        let coarse_ids = sorted.get(k + 1).map(|s| &s.0);
        for (a, idx) in index[k].iter().enumerate() {
            let Some(t) = *idx else { continue };
            level[t] = k;
            parent[t] = match (parent_id[k][a], coarse_ids) {
                (Some(id), Some(ids)) => {
                    let b = ids.binary_search(&id).expect("id present");
                    index[k + 1][b]
                }
                _ => virtual_root.then_some(n_real),
            };
        }
    }
    if virtual_root {
        level[n_real] = n_levels;
    }
    let (fine_ids, fine) = &sorted[0];
    for i in 0..n_segments {
        let a = fine_ids.binary_search(&fine[i]).expect("id present");
        let t = index[0][a].expect("finest level is alive");
        leaf_members[t].push(i);
    }

    SupervoxelTree::from_leaves(parent, leaf_members, level, segment_sizes)
}

/// Parses one flat segmentation: rows of `segment_id supervoxel_id`.
/// Blank lines and lines starting with `#` are skipped. Every segment id in
/// `0..n` must appear exactly once, where `n` is the number of rows.
pub fn parse_flat_segmentation(text: &str) -> Result<Vec<usize>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let parse = |f: Option<&str>| -> Result<usize> {
            f.ok_or_else(|| GpmError::Parse(format!("line {}: expected two columns", lineno + 1)))?
                .parse()
                .map_err(|e| GpmError::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let seg = parse(fields.next())?;
        let sv = parse(fields.next())?;
        if fields.next().is_some() {
            return Err(GpmError::Parse(format!("line {}: expected two columns", lineno + 1)));
        }
        rows.push((seg, sv));
    }
    let mut out = vec![None; rows.len()];
    for (seg, sv) in rows {
        let slot = out
            .get_mut(seg)
            .ok_or_else(|| GpmError::Parse(format!("segment id {seg} out of range")))?;
        if slot.replace(sv).is_some() {
            return Err(GpmError::Parse(format!("segment id {seg} listed twice")));
        }
    }
    Ok(out.into_iter().map(|s| s.expect("all ids filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> SupervoxelTree {
        // root(2) - mid(1) - leaf(0)
        SupervoxelTree::from_leaves(
            vec![Some(1), Some(2), None],
            vec![vec![0], vec![], vec![]],
            vec![0, 1, 2],
            &[1],
        )
        .unwrap()
    }

    #[test]
    fn nested_levels_use_containing_parent() {
        let fine = vec![0, 0, 1, 1, 2, 2];
        let coarse = vec![7, 7, 7, 7, 9, 9];
        let tree = build_tree(&[coarse, fine], &[1; 6]).unwrap();
        // fine supervoxels 0,1,2 then coarse 7,9, then virtual root
        assert_eq!(tree.n_nodes(), 6);
        assert_eq!(tree.parent(0), Some(3));
        assert_eq!(tree.parent(1), Some(3));
        assert_eq!(tree.parent(2), Some(4));
        assert_eq!(tree.root(), 5);
        assert_eq!(tree.members_of(5).unwrap(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn three_coarse_supervoxels_get_virtual_root() {
        let fine = vec![0, 1, 2, 3, 4, 5];
        let coarse = vec![0, 0, 1, 1, 2, 2];
        let tree = build_tree(&[fine, coarse], &[2; 6]).unwrap();
        let root = tree.root();
        assert_eq!(tree.children(root).len(), 3);
        assert_eq!(tree.level(root), 2);
        assert_eq!(tree.size(root), 12);
    }

    #[test]
    fn single_coarse_supervoxel_is_the_root() {
        let tree = build_tree(&[vec![0, 1], vec![5, 5]], &[1, 1]).unwrap();
        assert_eq!(tree.n_nodes(), 3);
        assert_eq!(tree.root(), 2);
    }

    #[test]
    fn overlap_60_40_picks_larger_parent() {
        // Fine supervoxel 0 spans segments 0..10; four of them lie in coarse
        // supervoxel 0 and six in coarse supervoxel 1. Two extra segments
        // keep the fine level strictly finer.
        let mut fine = vec![0; 10];
        fine.extend([1, 2]);
        let mut coarse = vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        coarse.extend([0, 0]);
        let in0 = (0..10).filter(|&i| coarse[i] == 0).count();
        let in1 = (0..10).filter(|&i| coarse[i] == 1).count();
        assert_eq!((in0, in1), (4, 6));
        let tree = build_tree(&[fine, coarse], &[1; 12]).unwrap();
        // nodes: fine 0,1,2 -> 0,1,2; coarse 0,1 -> 3,4; virtual root 5
        assert_eq!(tree.parent(0), Some(4));
        assert_eq!(tree.parent(1), Some(3));
        assert_eq!(tree.members_of(4).unwrap(), &(0..10).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn childless_coarse_supervoxel_is_dropped() {
        // coarse 0 only overlaps fine 0 in a minority
        let fine = vec![0, 0, 0, 1];
        let coarse = vec![0, 1, 1, 1];
        let tree = build_tree(&[fine, coarse], &[1; 4]).unwrap();
        assert_eq!(tree.n_nodes(), 3);
        assert_eq!(tree.root(), 2);
        assert_eq!(tree.members_of(2).unwrap(), &[0, 1, 2, 3]);
    }

    #[test]
    fn overlap_by_voxel_size_not_segment_count() {
        // Fine supervoxel 0 = segments {0,1,2}: segment 0 (size 6) in coarse 1,
        // segments 1,2 (size 2 each) in coarse 0 -> 60/40 by voxels.
        let fine = vec![0, 0, 0, 1, 2];
        let coarse = vec![1, 0, 0, 0, 1];
        let sizes = [6, 2, 2, 1, 1];
        let tree = build_tree(&[fine, coarse], &sizes).unwrap();
        // nodes: fine 0,1,2 -> 0,1,2; coarse 0,1 -> 3,4; root 5
        assert_eq!(tree.parent(0), Some(4));
        assert_eq!(tree.parent(1), Some(3));
        assert_eq!(tree.parent(2), Some(4));
    }

    #[test]
    fn overlap_tie_goes_to_lowest_id() {
        let fine = vec![0, 0, 1];
        let coarse = vec![4, 3, 3];
        let tree = build_tree(&[fine, coarse], &[1, 1, 1]).unwrap();
        // fine 0 overlaps 3 and 4 equally -> 3 (node index 2)
        assert_eq!(tree.parent(0), Some(2));
    }

    #[test]
    fn build_tree_errors() {
        assert!(build_tree(&[], &[1]).is_err());
        assert!(build_tree(&[vec![]], &[]).is_err());
        assert!(build_tree(&[vec![0, 1]], &[1]).is_err());
    }

    #[test]
    fn equal_counts_keep_input_order() {
        let a = vec![0, 1];
        let b = vec![1, 0];
        let tree = build_tree(&[a, b], &[1, 1]).unwrap();
        assert_eq!(tree.level(0), 0);
        // a's supervoxels are the leaves
        assert_eq!(tree.members_of(0).unwrap(), &[0]);
        assert_eq!(tree.members_of(1).unwrap(), &[1]);
        assert_eq!(tree.parent(0), Some(3)); // b id 1 -> node 3
    }

    #[test]
    fn path_matrix_examples() {
        let single = SupervoxelTree::single_node(&[1, 1]);
        assert_eq!(single.path_matrix().paths, vec![vec![0]]);

        let two = SupervoxelTree::from_leaves(
            vec![Some(2), Some(2), None],
            vec![vec![0], vec![1], vec![]],
            vec![0, 0, 1],
            &[1, 1],
        )
        .unwrap();
        assert_eq!(two.path_matrix().paths, vec![vec![2, 0], vec![2, 1]]);

        assert_eq!(chain().path_matrix().paths, vec![vec![2, 1, 0]]);
    }

    #[test]
    fn members_of_examples() {
        let tree = SupervoxelTree::from_leaves(
            vec![Some(2), Some(2), Some(3), None, Some(3)],
            vec![vec![0, 1], vec![2], vec![], vec![], vec![3]],
            vec![0, 0, 1, 2, 0],
            &[1; 4],
        )
        .unwrap();
        assert_eq!(tree.members_of(0).unwrap(), &[0, 1]);
        assert_eq!(tree.members_of(2).unwrap(), &[0, 1, 2]);
        assert_eq!(tree.members_of(3).unwrap(), &[0, 1, 2, 3]);
        assert!(matches!(
            tree.members_of(9),
            Err(GpmError::NodeOutOfRange { index: 9, n_nodes: 5 })
        ));
    }

    #[test]
    fn rejects_malformed_trees() {
        assert!(SupervoxelTree::new(vec![None, None], vec![vec![0], vec![1]], vec![1, 1], vec![0, 0]).is_err());
        assert!(SupervoxelTree::new(vec![Some(1), Some(0)], vec![vec![0], vec![0]], vec![1, 1], vec![0, 0]).is_err());
        // parent members not the union of children
        assert!(SupervoxelTree::new(
            vec![Some(1), None],
            vec![vec![0], vec![0, 1]],
            vec![1, 2],
            vec![0, 1]
        )
        .is_err());
        // empty leaf
        assert!(SupervoxelTree::new(vec![None], vec![vec![]], vec![0], vec![0]).is_err());
    }

    #[test]
    fn parses_flat_segmentation() {
        let text = "# seg sv\n0 3\n2 1\n1 3\n\n";
        assert_eq!(parse_flat_segmentation(text).unwrap(), vec![3, 3, 1]);
        assert!(parse_flat_segmentation("0 1\n0 2\n").is_err());
        assert!(parse_flat_segmentation("0 1\n5 2\n").is_err());
        assert!(parse_flat_segmentation("0\n").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let tree = chain();
        let json = serde_json::to_string(&tree).unwrap();
        let back: SupervoxelTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
