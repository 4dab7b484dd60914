//! Alpha-expansion with label-subset costs.
//!
//! A move toward `alpha` is a binary problem over `x_p` (1 = switch to
//! `alpha`). Node `p` on the source side of the cut means `x_p = 0`.
//! Label-subset costs get one auxiliary node each, as in the standard
//! label-cost extension of expansion moves.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maxflow::FlowGraph;
use super::ExpansionProblem;
use crate::energy::Labeling;
use crate::error::{GpmError, Result};

/// Order in which labels are visited within each cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ExpansionOrder {
    /// `0, 1, ..., k-1` every cycle.
    #[default]
    Sequential,
    /// A fresh permutation per cycle from a seeded generator.
    Shuffled(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionOptions {
    pub order: ExpansionOrder,
    /// Hard cap on full cycles over the labels.
    pub max_cycles: usize,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            order: ExpansionOrder::Sequential,
            max_cycles: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionOutcome {
    pub labeling: Labeling,
    pub initial_energy: f64,
    pub energy: f64,
    pub cycles: usize,
    pub moves: usize,
    /// False iff the cycle cap stopped the solver.
    pub converged: bool,
}

/// Alpha-expansion from `init` with default options.
pub fn alpha_expansion(problem: &ExpansionProblem, init: &Labeling) -> Result<Labeling> {
    alpha_expansion_with(problem, init, &ExpansionOptions::default()).map(|o| o.labeling)
}

/// Cycles over labels, committing an expansion move only when it strictly
/// lowers the full objective. Stops after a cycle without commits.
pub fn alpha_expansion_with(
    problem: &ExpansionProblem,
    init: &Labeling,
    options: &ExpansionOptions,
) -> Result<ExpansionOutcome> {
    problem.check_labeling(init)?;
    if let Some(table) = problem.first_non_metric_table() {
        return Err(GpmError::NonMetric { table });
    }
    let k = problem.n_labels;
    let mut rng = match options.order {
        ExpansionOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        ExpansionOrder::Sequential => None,
    };
    let mut labeling = init.clone();
    let initial_energy = problem.energy(&labeling);
    let mut energy = initial_energy;
    let mut moves = 0;
    let mut order: Vec<usize> = (0..k).collect();
    for cycle in 1..=options.max_cycles {
        if let Some(rng) = rng.as_mut() {
            order.sort_unstable();
            order.shuffle(rng);
        }
        let mut improved = false;
        for &alpha in &order {
            let (candidate, predicted) = expansion_move(problem, &labeling, alpha);
            let e = problem.energy(&candidate);
            debug_assert!(
                (e - predicted).abs() <= 1e-7 * (1.0 + e.abs()),
                "cut value {predicted} disagrees with direct energy {e}"
            );
            if e < energy - 1e-10 * (1.0 + energy.abs()) {
                labeling = candidate;
                energy = e;
                moves += 1;
                improved = true;
            }
        }
        if !improved {
            return Ok(ExpansionOutcome {
                labeling,
                initial_energy,
                energy,
                cycles: cycle,
                moves,
                converged: true,
            });
        }
    }
    Ok(ExpansionOutcome {
        labeling,
        initial_energy,
        energy,
        cycles: options.max_cycles,
        moves,
        converged: false,
    })
}

/// Binary energy accumulated as `constant + cut`.
struct MoveGraph {
    constant: f64,
    arcs: Vec<(usize, usize, f64)>,
    infinite: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
}

impl MoveGraph {
    /// Adds `d * x_p`.
    fn linear(&mut self, p: usize, d: f64) {
        if d >= 0.0 {
            self.arcs.push((self.source, p, d));
        } else {
            self.constant += d;
            self.arcs.push((p, self.sink, -d));
        }
    }
}

/// Optimal expansion of `current` toward `alpha`; returns the labeling and
/// its energy as predicted by the cut.
fn expansion_move(problem: &ExpansionProblem, current: &Labeling, alpha: usize) -> (Labeling, f64) {
    let n = problem.n_nodes;
    let f = &current.0;
    let n_aux = problem.label_costs.len();
    let source = n + n_aux;
    let sink = source + 1;
    let mut g = MoveGraph {
        constant: 0.0,
        arcs: Vec::new(),
        infinite: Vec::new(),
        source,
        sink,
    };

    for (p, &fp) in f.iter().enumerate() {
        let e0 = problem.unary(p, fp);
        let e1 = problem.unary(p, alpha);
        g.constant += e0;
        g.linear(p, e1 - e0);
    }

    for edge in problem.edges() {
        let table = &problem.tables[edge.table];
        let (p, q) = (edge.a, edge.b);
        let a = table.get(f[p], f[q]);
        let b = table.get(f[p], alpha);
        let c = table.get(alpha, f[q]);
        let d = table.get(alpha, alpha);
        g.constant += a;
        g.linear(p, c - a);
        g.linear(q, d - c);
        let w = b + c - a - d;
        // metric tables guarantee w >= 0 up to rounding
        debug_assert!(w >= -1e-9 * (1.0 + a.abs() + b.abs() + c.abs()), "non-submodular move term {w}");
        if w > 0.0 {
            g.arcs.push((p, q, w));
        }
    }

    for (j, lc) in problem.label_costs.iter().enumerate() {
        let y = n + j;
        if lc.contains(alpha) {
            if f.iter().any(|&x| lc.contains(x)) {
                g.constant += lc.cost;
            } else {
                // paid iff some node switches
                g.arcs.push((source, y, lc.cost));
                for p in 0..n {
                    g.infinite.push((y, p));
                }
            }
        } else {
            // paid iff some current member keeps its label
            let mut any = false;
            for (p, &fp) in f.iter().enumerate() {
                if lc.contains(fp) {
                    g.infinite.push((p, y));
                    any = true;
                }
            }
            if any {
                g.arcs.push((y, sink, lc.cost));
            }
        }
    }

    let finite: f64 = g.arcs.iter().map(|a| a.2).sum();
    let big = 2.0 * finite + 1.0;
    let mut flow = FlowGraph::new(n + n_aux);
    debug_assert_eq!(flow.source(), source);
    for &(u, v, c) in &g.arcs {
        flow.add_edge(u, v, c);
    }
    for &(u, v) in &g.infinite {
        flow.add_edge(u, v, big);
    }
    let cut = flow.max_flow();
    let side = flow.source_side();
    let next = Labeling(
        f.iter()
            .enumerate()
            .map(|(p, &fp)| if side[p] { fp } else { alpha })
            .collect(),
    );
    (next, g.constant + cut)
}
