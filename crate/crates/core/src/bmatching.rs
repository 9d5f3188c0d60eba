//! Minimum-weight perfect b-matching by the same primal-dual scheme: the
//! tight edges form a flow network, a short max flow yields a demand-weighted
//! Hall violator from its min cut, and the dual is raised on that set.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{edge_slack, first_violation, BipartiteInstance, DualVector};
use crate::hungarian::{HallViolator, SolveStats};

/// A bipartite instance with a demand `b_v >= 1` on every vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BInstance {
    instance: BipartiteInstance,
    b_left: Vec<i64>,
    b_right: Vec<i64>,
}

impl BInstance {
    /// Validates demand lengths, positivity and balance `Σ_L b = Σ_R b`.
    pub fn new(instance: BipartiteInstance, b_left: Vec<i64>, b_right: Vec<i64>) -> Result<Self> {
        if b_left.len() != instance.n_left() || b_right.len() != instance.n_right() {
            return Err(Error::DimensionMismatch {
                expected: instance.n_left() + instance.n_right(),
                found: b_left.len() + b_right.len(),
            });
        }
        if let Some(bad) = b_left.iter().chain(&b_right).find(|&&b| b < 1) {
            return Err(Error::InvalidInstance(format!("demand {bad} < 1")));
        }
        let (sl, sr): (i64, i64) = (b_left.iter().sum(), b_right.iter().sum());
        if sl != sr {
            return Err(Error::InvalidInstance(format!(
                "unbalanced demands: left {sl}, right {sr}"
            )));
        }
        Ok(Self {
            instance,
            b_left,
            b_right,
        })
    }

    /// Unit demands on a balanced instance.
    pub fn unit(instance: BipartiteInstance) -> Result<Self> {
        let (nl, nr) = (instance.n_left(), instance.n_right());
        Self::new(instance, vec![1; nl], vec![1; nr])
    }

    pub fn instance(&self) -> &BipartiteInstance {
        &self.instance
    }

    pub fn b_left(&self) -> &[i64] {
        &self.b_left
    }

    pub fn b_right(&self) -> &[i64] {
        &self.b_right
    }

    /// Demands in flat vertex order (left block, then right block).
    pub fn flat_demands(&self) -> Vec<i64> {
        self.b_left.iter().chain(&self.b_right).copied().collect()
    }

    pub fn total_demand(&self) -> i64 {
        self.b_left.iter().sum()
    }

    /// `B = max_v b_v`.
    pub fn max_demand(&self) -> i64 {
        self.b_left
            .iter()
            .chain(&self.b_right)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Demand-weighted dual objective `Σ b_v y_v`.
    pub fn dual_objective(&self, y: &DualVector) -> i64 {
        let l: i64 = self.b_left.iter().zip(&y.left).map(|(b, v)| b * v).sum();
        let r: i64 = self.b_right.iter().zip(&y.right).map(|(b, v)| b * v).sum();
        l + r
    }
}

/// `Σ_v b_v |y_v - y'_v|`.
pub fn weighted_l1(y: &DualVector, other: &DualVector, b: &[i64]) -> Result<i64> {
    if !y.same_shape(other) || b.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: if y.same_shape(other) {
                b.len()
            } else {
                other.len()
            },
        });
    }
    Ok(y.iter()
        .zip(other.iter())
        .zip(b)
        .map(|((a, c), w)| w * (a - c).abs())
        .sum())
}

/// Directed network with integral capacities; arcs come in forward/reverse
/// pairs (`a`, `a ^ 1`).
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    residual: Vec<i64>,
    capacity: Vec<i64>,
    pub source: usize,
    pub sink: usize,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize, source: usize, sink: usize) -> Self {
        Self {
            adj: vec![Vec::new(); num_nodes],
            to: Vec::new(),
            residual: Vec::new(),
            capacity: Vec::new(),
            source,
            sink,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds arc `u -> v`; returns its id.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: i64) -> usize {
        let id = self.to.len();
        self.to.extend([v, u]);
        self.residual.extend([cap, 0]);
        self.capacity.extend([cap, 0]);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently routed on forward arc `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.capacity[id] - self.residual[id]
    }

    fn levels(&self) -> Vec<u32> {
        let mut level = vec![u32::MAX; self.num_nodes()];
        let mut queue = VecDeque::new();
        level[self.source] = 0;
        queue.push_back(self.source);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.residual[a] > 0 && level[v] == u32::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn blocking_dfs(&mut self, u: usize, pushed: i64, level: &[u32], cursor: &mut [usize]) -> i64 {
        if u == self.sink {
            return pushed;
        }
        while cursor[u] < self.adj[u].len() {
            let a = self.adj[u][cursor[u]];
            let v = self.to[a];
            if self.residual[a] > 0 && level[v] == level[u] + 1 {
                let got = self.blocking_dfs(v, pushed.min(self.residual[a]), level, cursor);
                if got > 0 {
                    self.residual[a] -= got;
                    self.residual[a ^ 1] += got;
                    return got;
                }
            }
            cursor[u] += 1;
        }
        0
    }
}

/// Value of a maximum flow and the source side of a minimum cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxFlow {
    pub value: i64,
    /// Augmenting paths pushed.
    pub paths: u64,
    pub source_side: Vec<bool>,
}

/// Dinic's blocking-flow algorithm. Flows stay readable on `net` afterwards.
pub fn max_flow(net: &mut FlowNetwork) -> MaxFlow {
    let mut value = 0;
    let mut paths = 0;
    loop {
        let level = net.levels();
        if level[net.sink] == u32::MAX {
            let source_side = level.iter().map(|&l| l != u32::MAX).collect();
            return MaxFlow {
                value,
                paths,
                source_side,
            };
        }
        let mut cursor = vec![0usize; net.num_nodes()];
        loop {
            let got = net.blocking_dfs(net.source, i64::MAX, &level, &mut cursor);
            if got == 0 {
                break;
            }
            value += got;
            paths += 1;
        }
    }
}

/// Flow network on the tight edges of `binst` under `y`:
/// `s -> i` with capacity `b_i`, `j -> t` with `b_j`, tight `i -> j`
/// uncapacitated (capacity `Σ_L b`).
#[derive(Debug, Clone)]
pub struct TightNetwork {
    pub net: FlowNetwork,
    /// `(arc id, instance edge index)` for every tight edge.
    pub tight_arcs: Vec<(usize, usize)>,
    n_left: usize,
}

impl TightNetwork {
    pub fn build(binst: &BInstance, y: &DualVector) -> Self {
        let inst = binst.instance();
        let (nl, nr) = (inst.n_left(), inst.n_right());
        let (s, t) = (nl + nr, nl + nr + 1);
        let mut net = FlowNetwork::new(nl + nr + 2, s, t);
        for (i, &b) in binst.b_left().iter().enumerate() {
            net.add_arc(s, i, b);
        }
        for (j, &b) in binst.b_right().iter().enumerate() {
            net.add_arc(nl + j, t, b);
        }
        let unbounded = binst.total_demand();
        let mut tight_arcs = Vec::new();
        for e in 0..inst.num_edges() {
            if edge_slack(inst, y, e) == 0 {
                let id = net.add_arc(inst.left(e), nl + inst.right(e), unbounded);
                tight_arcs.push((id, e));
            }
        }
        Self {
            net,
            tight_arcs,
            n_left: nl,
        }
    }
}

/// `S` = left vertices on the source side of the min cut, `Γ(S)` their tight
/// neighbors. `None` when the flow saturates every left demand.
pub fn b_hall_violator(
    binst: &BInstance,
    tn: &TightNetwork,
    flow: &MaxFlow,
) -> Option<HallViolator> {
    if flow.value >= binst.total_demand() {
        return None;
    }
    let inst = binst.instance();
    let left: Vec<usize> = (0..tn.n_left).filter(|&i| flow.source_side[i]).collect();
    let mut in_gamma = vec![false; inst.n_right()];
    for &(_, e) in &tn.tight_arcs {
        if flow.source_side[inst.left(e)] {
            in_gamma[inst.right(e)] = true;
        }
    }
    let violator = HallViolator {
        left,
        neighborhood: (0..inst.n_right()).filter(|&j| in_gamma[j]).collect(),
    };
    debug_assert!(violator.weighted_deficiency(binst.b_left(), binst.b_right()) >= 1);
    Some(violator)
}

/// Integral b-matching: multiplicity per instance edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BMatching {
    pub x: Vec<i64>,
    pub cost: i64,
}

impl BMatching {
    /// Whether every vertex is covered exactly `b_v` times.
    pub fn is_perfect_for(&self, binst: &BInstance) -> bool {
        let inst = binst.instance();
        let mut deg_l = vec![0i64; inst.n_left()];
        let mut deg_r = vec![0i64; inst.n_right()];
        for (e, &x) in self.x.iter().enumerate() {
            deg_l[inst.left(e)] += x;
            deg_r[inst.right(e)] += x;
        }
        self.x.len() == inst.num_edges()
            && self.x.iter().all(|&x| x >= 0)
            && deg_l == binst.b_left()
            && deg_r == binst.b_right()
    }
}

#[derive(Debug, Clone)]
pub struct BSolution {
    pub matching: BMatching,
    pub duals: DualVector,
    /// Dual objectives are demand-weighted; augmentations count flow paths
    /// over all max-flow rebuilds.
    pub stats: SolveStats,
}

/// Minimum-weight perfect b-matching from a feasible integral dual.
pub fn solve_mwbm(binst: &BInstance, y_init: &DualVector) -> Result<BSolution> {
    let start = Instant::now();
    let inst = binst.instance();
    if !y_init.fits(inst) {
        return Err(Error::DimensionMismatch {
            expected: inst.n_left() + inst.n_right(),
            found: y_init.len(),
        });
    }
    if let Some(err) = first_violation(inst, y_init) {
        return Err(err);
    }
    let mut y = y_init.clone();
    let mut stats = SolveStats {
        initial_dual_objective: binst.dual_objective(&y),
        ..SolveStats::default()
    };

    let tn = loop {
        let mut tn = TightNetwork::build(binst, &y);
        let flow = max_flow(&mut tn.net);
        stats.augmentations += flow.paths;
        let Some(violator) = b_hall_violator(binst, &tn, &flow) else {
            break tn;
        };
        let mut in_s = vec![false; inst.n_left()];
        let mut in_gamma = vec![false; inst.n_right()];
        violator.left.iter().for_each(|&i| in_s[i] = true);
        violator
            .neighborhood
            .iter()
            .for_each(|&j| in_gamma[j] = true);

        let eps = violator
            .left
            .iter()
            .flat_map(|&i| inst.row(i))
            .filter(|&e| !in_gamma[inst.right(e)])
            .map(|e| edge_slack(inst, &y, e))
            .min()
            .ok_or(Error::Infeasible {
                deficient_side: violator.left.len(),
            })?;
        debug_assert!(eps >= 1);
        for i in violator.left.iter().copied() {
            y.left[i] += eps;
        }
        for j in violator.neighborhood.iter().copied() {
            y.right[j] -= eps;
        }
        stats.iterations += 1;
        debug_assert!(first_violation(inst, &y).is_none());
    };

    let mut x = vec![0i64; inst.num_edges()];
    for &(arc, e) in &tn.tight_arcs {
        x[e] = tn.net.flow(arc);
    }
    let cost = x.iter().enumerate().map(|(e, &k)| k * inst.cost(e)).sum();
    stats.final_dual_objective = binst.dual_objective(&y);
    debug_assert_eq!(cost, stats.final_dual_objective);
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok(BSolution {
        matching: BMatching { x, cost },
        duals: y,
        stats,
    })
}
