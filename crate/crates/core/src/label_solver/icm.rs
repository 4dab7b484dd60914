//! Iterated conditional modes: one node at a time, best label given the
//! rest. Works for any table, including non-metric ones.

use super::ExpansionProblem;
use crate::energy::Labeling;
use crate::error::Result;

const MAX_SWEEPS: usize = 1000;

/// Coordinate descent from `init` until no single-node change strictly
/// lowers the full objective.
pub fn icm(problem: &ExpansionProblem, init: &Labeling) -> Result<Labeling> {
    problem.check_labeling(init)?;
    let n = problem.n_nodes;
    let k = problem.n_labels;
    // (neighbor, table, node is the row endpoint)
    let mut adjacency: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for e in problem.edges() {
        adjacency[e.a].push((e.b, e.table, true));
        adjacency[e.b].push((e.a, e.table, false));
    }
    let mut f = init.0.clone();
    let mut subset_counts: Vec<usize> = problem
        .label_costs
        .iter()
        .map(|lc| f.iter().filter(|&&x| lc.contains(x)).count())
        .collect();

    let mut local = vec![0.0; k];
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for p in 0..n {
            let cur = f[p];
            for (l, slot) in local.iter_mut().enumerate() {
                let mut e = problem.unary(p, l);
                for &(q, t, row) in &adjacency[p] {
                    let table = &problem.tables[t];
                    e += if row { table.get(l, f[q]) } else { table.get(f[q], l) };
                }
                for (lc, &count) in problem.label_costs.iter().zip(&subset_counts) {
                    let others = count - usize::from(lc.contains(cur));
                    if others == 0 && lc.contains(l) {
                        e += lc.cost;
                    }
                }
                *slot = e;
            }
            let mut best = cur;
            for l in 0..k {
                if local[l] < local[best] - 1e-12 * (1.0 + local[best].abs()) {
                    best = l;
                }
            }
            if best != cur {
                for (lc, count) in problem.label_costs.iter().zip(subset_counts.iter_mut()) {
                    *count -= usize::from(lc.contains(cur));
                    *count += usize::from(lc.contains(best));
                }
                f[p] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Labeling(f))
}
