//! Exhaustive reference solvers for small inputs.
//!
//! Nothing here reuses the production algorithms; only the input types are
//! shared. Every entry point checks an [`OracleBudget`] first and fails with
//! [`Error::BudgetExceeded`] instead of truncating the search.

use serde::{Deserialize, Serialize};

use crate::bmatching::BInstance;
use crate::error::{Error, Result};
use crate::feasibility::ViolationGraph;
use crate::graph::BipartiteInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Largest side size for permutation search.
    pub max_n: usize,
    /// Largest violation graph, in vertices.
    pub max_cover_vertices: usize,
    /// Largest residual in a violation graph.
    pub max_residual: i64,
    /// Largest one-side demand total for b-matching enumeration.
    pub max_total_demand: i64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_n: 8,
            max_cover_vertices: 6,
            max_residual: 10,
            max_total_demand: 10,
        }
    }
}

fn over_budget(what: impl Into<String>) -> Error {
    Error::BudgetExceeded(what.into())
}

/// Dense cost table; `None` where the instance has no edge.
fn dense(inst: &BipartiteInstance) -> Vec<Vec<Option<i64>>> {
    let mut table = vec![vec![None; inst.n_right()]; inst.n_left()];
    for e in inst.edges() {
        table[e.left][e.right] = Some(e.cost);
    }
    table
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleMatching {
    pub cost: i64,
    /// `(left, right)` pairs, ascending by left.
    pub pairs: Vec<(usize, usize)>,
}

/// Minimum-cost perfect matching by trying every permutation.
pub fn brute_mwpm(inst: &BipartiteInstance, budget: &OracleBudget) -> Result<OracleMatching> {
    let n = inst.n_left();
    if n != inst.n_right() {
        return Err(Error::InvalidInstance(format!(
            "unbalanced sides {n} and {}",
            inst.n_right()
        )));
    }
    if n > budget.max_n {
        return Err(over_budget(format!("n = {n} > {}", budget.max_n)));
    }
    fn search(
        table: &[Vec<Option<i64>>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        partial: i64,
        best: &mut Option<(i64, Vec<usize>)>,
    ) {
        if row == table.len() {
            if best.as_ref().is_none_or(|(c, _)| partial < *c) {
                *best = Some((partial, current.clone()));
            }
            return;
        }
        for j in 0..used.len() {
            if let (false, Some(c)) = (used[j], table[row][j]) {
                used[j] = true;
                current.push(j);
                search(table, row + 1, used, current, partial + c, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let table = dense(inst);
    let mut best = None;
    search(
        &table,
        0,
        &mut vec![false; n],
        &mut Vec::with_capacity(n),
        0,
        &mut best,
    );
    let (cost, perm) = best.ok_or(Error::Infeasible { deficient_side: n })?;
    Ok(OracleMatching {
        cost,
        pairs: perm.into_iter().enumerate().collect(),
    })
}

/// Exact minimum of `Σ w_v δ_v` over integral `δ ∈ [0, max r]^V` covering
/// every violated edge.
pub fn brute_weighted_cover_opt(
    vg: &ViolationGraph,
    weights: &[i64],
    budget: &OracleBudget,
) -> Result<i64> {
    let nv = vg.num_vertices();
    if nv > budget.max_cover_vertices {
        return Err(over_budget(format!(
            "{nv} vertices > {}",
            budget.max_cover_vertices
        )));
    }
    if weights.len() != nv {
        return Err(Error::DimensionMismatch {
            expected: nv,
            found: weights.len(),
        });
    }
    if weights.iter().any(|&w| w < 0) {
        return Err(Error::InvalidInstance("negative cover weight".into()));
    }
    let max_r = vg.edges().iter().map(|e| e.residual).max().unwrap_or(0);
    if max_r > budget.max_residual {
        return Err(over_budget(format!(
            "residual {max_r} > {}",
            budget.max_residual
        )));
    }
    // Edges keyed by their later endpoint, checked once both ends are fixed.
    let mut back: Vec<Vec<(usize, i64)>> = vec![Vec::new(); nv];
    for e in vg.edges() {
        let (lo, hi) = (e.u.min(e.v), e.u.max(e.v));
        back[hi].push((lo, e.residual));
    }
    fn search(
        v: usize,
        back: &[Vec<(usize, i64)>],
        weights: &[i64],
        max_r: i64,
        delta: &mut [i64],
        partial: i64,
        best: &mut i64,
    ) {
        if v == delta.len() {
            *best = (*best).min(partial);
            return;
        }
        for d in 0..=max_r {
            let cost = partial + weights[v] * d;
            if cost >= *best {
                break;
            }
            if back[v].iter().all(|&(u, r)| delta[u] + d >= r) {
                delta[v] = d;
                search(v + 1, back, weights, max_r, delta, cost, best);
            }
        }
        delta[v] = 0;
    }
    let mut best = i64::MAX;
    search(0, &back, weights, max_r, &mut vec![0; nv], 0, &mut best);
    Ok(best)
}

/// Exact integral optimum of the unweighted cover problem.
pub fn brute_cover_opt(vg: &ViolationGraph, budget: &OracleBudget) -> Result<i64> {
    brute_weighted_cover_opt(vg, &vec![1; vg.num_vertices()], budget)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleBMatching {
    pub cost: i64,
    /// Multiplicity per instance edge, in instance edge order.
    pub x: Vec<i64>,
}

/// Minimum-cost perfect b-matching by enumerating every integral assignment.
pub fn brute_mwbm(binst: &BInstance, budget: &OracleBudget) -> Result<OracleBMatching> {
    let total = binst.total_demand();
    if total > budget.max_total_demand {
        return Err(over_budget(format!(
            "total demand {total} > {}",
            budget.max_total_demand
        )));
    }
    let inst = binst.instance();
    let edges: Vec<(usize, usize, i64)> = inst.edges().map(|e| (e.left, e.right, e.cost)).collect();

    struct Search<'a> {
        edges: &'a [(usize, usize, i64)],
        left: Vec<i64>,
        right: Vec<i64>,
        x: Vec<i64>,
        best: Option<(i64, Vec<i64>)>,
    }
    impl Search<'_> {
        fn run(&mut self, e: usize, partial: i64) {
            if e == self.edges.len() {
                let done = self.left.iter().chain(&self.right).all(|&r| r == 0);
                if done && self.best.as_ref().is_none_or(|(c, _)| partial < *c) {
                    self.best = Some((partial, self.x.clone()));
                }
                return;
            }
            let (i, j, c) = self.edges[e];
            // Edges are grouped by left vertex: once i's last edge is passed
            // its residual demand must be zero.
            let last_of_row = self.edges.get(e + 1).is_none_or(|n| n.0 != i);
            let cap = self.left[i].min(self.right[j]);
            let lo = if last_of_row { self.left[i] } else { 0 };
            if lo > cap {
                return;
            }
            for k in lo..=cap {
                self.left[i] -= k;
                self.right[j] -= k;
                self.x[e] = k;
                self.run(e + 1, partial + k * c);
                self.left[i] += k;
                self.right[j] += k;
            }
            self.x[e] = 0;
        }
    }
    let mut s = Search {
        edges: &edges,
        left: binst.b_left().to_vec(),
        right: binst.b_right().to_vec(),
        x: vec![0; edges.len()],
        best: None,
    };
    s.run(0, 0);
    let (cost, x) = s.best.ok_or(Error::Infeasible {
        deficient_side: inst.n_left(),
    })?;
    Ok(OracleBMatching { cost, x })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> OracleBudget {
        OracleBudget::default()
    }

    #[test]
    fn mwpm_small_cases() {
        let one = BipartiteInstance::from_cost_matrix(&[vec![7]]).unwrap();
        assert_eq!(brute_mwpm(&one, &budget()).unwrap().cost, 7);
        let two = BipartiteInstance::from_cost_matrix(&[vec![1, 2], vec![2, 1]]).unwrap();
        let m = brute_mwpm(&two, &budget()).unwrap();
        assert_eq!(m.cost, 2);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn mwpm_budget_and_infeasible() {
        let nine = BipartiteInstance::from_cost_matrix(&vec![vec![0; 9]; 9]).unwrap();
        assert!(matches!(
            brute_mwpm(&nine, &budget()),
            Err(Error::BudgetExceeded(_))
        ));
        let sparse = BipartiteInstance::new(2, 2, [(0, 0, 1), (1, 0, 1)]).unwrap();
        assert!(matches!(
            brute_mwpm(&sparse, &budget()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn cover_small_cases() {
        let empty = ViolationGraph::from_edges(3, []).unwrap();
        assert_eq!(brute_cover_opt(&empty, &budget()).unwrap(), 0);
        let single = ViolationGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        assert_eq!(brute_cover_opt(&single, &budget()).unwrap(), 3);
        let path = ViolationGraph::from_edges(3, [(0, 1, 4), (1, 2, 2)]).unwrap();
        assert_eq!(brute_cover_opt(&path, &budget()).unwrap(), 4);
        let heavy = ViolationGraph::from_edges(2, [(0, 1, 11)]).unwrap();
        assert!(brute_cover_opt(&heavy, &budget()).is_err());
        let big = ViolationGraph::from_edges(7, [(0, 1, 1)]).unwrap();
        assert!(brute_cover_opt(&big, &budget()).is_err());
    }

    #[test]
    fn weighted_cover_prefers_cheap_vertex() {
        let single = ViolationGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        assert_eq!(
            brute_weighted_cover_opt(&single, &[5, 2], &budget()).unwrap(),
            6
        );
    }

    #[test]
    fn mwbm_cases() {
        let inst = BipartiteInstance::from_cost_matrix(&[vec![1, 5], vec![5, 1]]).unwrap();
        let b = BInstance::new(inst.clone(), vec![2, 2], vec![2, 2]).unwrap();
        let m = brute_mwbm(&b, &budget()).unwrap();
        assert_eq!(m.cost, 4);
        assert_eq!(m.x, vec![2, 0, 0, 2]);

        let unit = BInstance::unit(inst.clone()).unwrap();
        assert_eq!(
            brute_mwbm(&unit, &budget()).unwrap().cost,
            brute_mwpm(&inst, &budget()).unwrap().cost
        );

        let sparse = BipartiteInstance::new(2, 2, [(0, 0, 1), (1, 0, 1)]).unwrap();
        let b = BInstance::new(sparse, vec![1, 1], vec![1, 1]).unwrap();
        assert!(matches!(
            brute_mwbm(&b, &budget()),
            Err(Error::Infeasible { .. })
        ));

        let b = BInstance::new(inst, vec![6, 5], vec![5, 6]).unwrap();
        assert!(matches!(
            brute_mwbm(&b, &budget()),
            Err(Error::BudgetExceeded(_))
        ));
    }
}
