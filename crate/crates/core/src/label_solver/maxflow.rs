//! Dinic max-flow on a directed graph with non-negative `f64` capacities.

use std::collections::VecDeque;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: f64,
}

/// Flow network with dedicated source and sink nodes.
#[derive(Clone, Debug)]
pub struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    source: usize,
    sink: usize,
    max_cap: f64,
}

impl FlowGraph {
    /// `n` ordinary nodes `0..n`; source and sink are appended.
    pub fn new(n: usize) -> Self {
        FlowGraph {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n + 2],
            source: n,
            sink: n + 1,
            max_cap: 0.0,
        }
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Directed arc `u -> v`.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(cap >= 0.0, "negative capacity {cap}");
        if cap <= 0.0 {
            return;
        }
        self.max_cap = self.max_cap.max(cap);
        self.adj[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, cap });
        self.adj[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, cap: 0.0 });
    }

    /// Runs max-flow from source to sink and returns the flow value.
    pub fn max_flow(&mut self) -> f64 {
        let eps = 1e-12 * (1.0 + self.max_cap);
        let n = self.adj.len();
        let mut total = 0.0;
        let mut level = vec![usize::MAX; n];
        let mut next = vec![0usize; n];
        loop {
            level.iter_mut().for_each(|l| *l = usize::MAX);
            level[self.source] = 0;
            let mut queue = VecDeque::from([self.source]);
            while let Some(u) = queue.pop_front() {
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > eps && level[arc.to] == usize::MAX {
                        level[arc.to] = level[u] + 1;
                        queue.push_back(arc.to);
                    }
                }
            }
            if level[self.sink] == usize::MAX {
                return total;
            }
            next.iter_mut().for_each(|x| *x = 0);
            loop {
                let pushed = self.augment(self.source, f64::INFINITY, &level, &mut next, eps);
                if pushed <= eps {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, limit: f64, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        if u == self.sink {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            if cap > eps && level[to] == level[u] + 1 {
                let pushed = self.augment(to, limit.min(cap), level, next, eps);
                if pushed > eps {
                    self.arcs[a].cap -= pushed;
                    self.arcs[a ^ 1].cap += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Nodes reachable from the source in the residual graph, after
    /// [`FlowGraph::max_flow`]. These form the source side of a minimum cut.
    pub fn source_side(&self) -> Vec<bool> {
        let eps = 1e-12 * (1.0 + self.max_cap);
        let mut seen = vec![false; self.adj.len()];
        seen[self.source] = true;
        let mut stack = vec![self.source];
        while let Some(u) = stack.pop() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if arc.cap > eps && !seen[arc.to] {
                    seen[arc.to] = true;
                    stack.push(arc.to);
                }
            }
        }
        seen
    }
}
