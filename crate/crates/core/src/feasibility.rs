//! Repairing predicted duals into nearby feasible integral duals.
//!
//! An infeasible prediction `ŷ` is fixed by subtracting a nonnegative
//! perturbation `δ` that covers every violated edge: `δ_i + δ_j >= r_e` with
//! residual `r_e = ŷ_i + ŷ_j - c_e`. For unit matching the cover comes from a
//! linear-time greedy walk (within 2x of the cheapest cover); for b-matching
//! from a greedy fractional packing whose dual is rounded to integers.
//!
//! Vertices are addressed in flat order: left vertex `i` is `i`, right vertex
//! `j` is `n_left + j`.

use num_rational::Ratio;

use crate::bmatching::BInstance;
use crate::error::{Error, Result};
use crate::graph::{slacks, BipartiteInstance, DualVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViolatedEdge {
    pub u: usize,
    pub v: usize,
    /// Residual `r_e >= 1`.
    pub residual: i64,
}

/// The violated edges `F` of a prediction with their residuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationGraph {
    num_vertices: usize,
    edges: Vec<ViolatedEdge>,
}

impl ViolationGraph {
    /// Builds a violation graph directly; residuals must be positive.
    pub fn from_edges(
        num_vertices: usize,
        edges: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        let edges = edges
            .into_iter()
            .map(|(u, v, residual)| {
                if u >= num_vertices || v >= num_vertices || u == v {
                    Err(Error::InvalidInstance(format!(
                        "violated edge ({u}, {v}) invalid for {num_vertices} vertices"
                    )))
                } else if residual < 1 {
                    Err(Error::InvalidInstance(format!(
                        "violated edge ({u}, {v}) has residual {residual} < 1"
                    )))
                } else {
                    Ok(ViolatedEdge { u, v, residual })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            num_vertices,
            edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[ViolatedEdge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Whether `delta` satisfies `δ_u + δ_v >= r_e` on every edge.
    pub fn is_covered_by(&self, delta: &[i64]) -> bool {
        delta.len() == self.num_vertices
            && self
                .edges
                .iter()
                .all(|e| delta[e.u] + delta[e.v] >= e.residual)
    }

    /// Incident edge ids per vertex, ascending.
    fn incidence(&self) -> (Vec<usize>, Vec<usize>) {
        let mut offsets = vec![0usize; self.num_vertices + 1];
        for e in &self.edges {
            offsets[e.u + 1] += 1;
            offsets[e.v + 1] += 1;
        }
        for k in 0..self.num_vertices {
            offsets[k + 1] += offsets[k];
        }
        let mut fill = offsets.clone();
        let mut ids = vec![0usize; 2 * self.edges.len()];
        for (id, e) in self.edges.iter().enumerate() {
            for w in [e.u, e.v] {
                ids[fill[w]] = id;
                fill[w] += 1;
            }
        }
        (offsets, ids)
    }
}

/// `F` and `r` for prediction `ŷ` on `inst`.
pub fn violation_graph(inst: &BipartiteInstance, y_hat: &DualVector) -> Result<ViolationGraph> {
    if !y_hat.fits(inst) {
        return Err(Error::DimensionMismatch {
            expected: inst.n_left() + inst.n_right(),
            found: y_hat.len(),
        });
    }
    let n_left = inst.n_left();
    let edges = slacks(inst, y_hat)
        .filter_map(|(e, s)| {
            let r = -s;
            (r > 0).then(|| ViolatedEdge {
                u: inst.left(e),
                v: n_left + inst.right(e),
                residual: r,
            })
        })
        .collect();
    Ok(ViolationGraph {
        num_vertices: n_left + inst.n_right(),
        edges,
    })
}

/// Nonnegative per-vertex decrease, flat vertex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbation {
    pub delta: Vec<i64>,
}

impl Perturbation {
    pub fn total(&self) -> i64 {
        self.delta.iter().sum()
    }

    pub fn weighted_total(&self, b: &[i64]) -> i64 {
        self.delta.iter().zip(b).map(|(d, w)| d * w).sum()
    }
}

/// Greedy walk cover: from the lowest-index vertex that still has edges, set
/// `δ_i` to the largest residual among its remaining edges, delete `i`, and
/// continue from that edge's other endpoint until the walk runs out of edges.
///
/// Each vertex and edge is touched O(1) times. The result costs at most twice
/// the optimal fractional cover.
pub fn fast_approx_cover(vg: &ViolationGraph) -> Perturbation {
    let n = vg.num_vertices;
    let mut delta = vec![0i64; n];
    let (offsets, ids) = vg.incidence();
    let mut deleted = vec![false; n];
    let other = |id: usize, w: usize| {
        let e = vg.edges[id];
        if e.u == w {
            e.v
        } else {
            e.u
        }
    };
    // Heaviest remaining edge at `w`, ties to the lowest neighbor index.
    let best_edge = |w: usize, deleted: &[bool]| -> Option<(usize, i64)> {
        let mut best: Option<(usize, i64)> = None;
        for &id in &ids[offsets[w]..offsets[w + 1]] {
            let x = other(id, w);
            if deleted[x] {
                continue;
            }
            let r = vg.edges[id].residual;
            best = match best {
                Some((bx, br)) if br > r || (br == r && bx <= x) => Some((bx, br)),
                _ => Some((x, r)),
            };
        }
        best
    };

    for start in 0..n {
        if deleted[start] {
            continue;
        }
        let mut i = start;
        while let Some((j, r)) = best_edge(i, &deleted) {
            delta[i] = r;
            deleted[i] = true;
            i = j;
        }
    }
    Perturbation { delta }
}

/// Feasible integral dual `ŷ - δ` with `δ` from [`fast_approx_cover`].
pub fn project_duals(inst: &BipartiteInstance, y_hat: &DualVector) -> Result<DualVector> {
    let vg = violation_graph(inst, y_hat)?;
    if vg.is_empty() {
        return Ok(y_hat.clone());
    }
    let cover = fast_approx_cover(&vg);
    let mut out = y_hat.clone();
    for (v, d) in cover.delta.iter().enumerate() {
        *out.get_mut(v) -= d;
    }
    Ok(out)
}

/// Greedy fractional packing for the b-weighted cover problem and the cover
/// fitted to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyBDual {
    /// Packing value per violated edge, indexed like [`ViolationGraph::edges`].
    pub gamma: Vec<i64>,
    /// `δ_i = (Σ_{e ∋ i} γ_e r_e) / b_i`, exact.
    pub delta: Vec<Ratio<i64>>,
}

impl GreedyBDual {
    /// Packing objective `Σ r_e γ_e`.
    pub fn dual_value(&self, vg: &ViolationGraph) -> i64 {
        vg.edges
            .iter()
            .zip(&self.gamma)
            .map(|(e, g)| e.residual * g)
            .sum()
    }

    /// Cover objective `Σ b_i δ_i`.
    pub fn primal_value(&self, b: &[i64]) -> Ratio<i64> {
        self.delta
            .iter()
            .zip(b)
            .map(|(d, &w)| d * w)
            .fold(Ratio::from_integer(0), |acc, x| acc + x)
    }
}

/// Processes violated edges by decreasing residual (ties by edge order) and
/// packs each as much as both endpoint budgets `b` allow.
pub fn greedy_b_dual(vg: &ViolationGraph, b: &[i64]) -> Result<GreedyBDual> {
    if b.len() != vg.num_vertices {
        return Err(Error::DimensionMismatch {
            expected: vg.num_vertices,
            found: b.len(),
        });
    }
    if let Some(bad) = b.iter().find(|&&w| w < 1) {
        return Err(Error::InvalidInstance(format!("demand {bad} < 1")));
    }
    let mut order: Vec<usize> = (0..vg.edges.len()).collect();
    order.sort_by_key(|&id| std::cmp::Reverse(vg.edges[id].residual));

    let mut budget = b.to_vec();
    let mut gamma = vec![0i64; vg.edges.len()];
    let mut packed = vec![0i64; vg.num_vertices];
    for id in order {
        let e = vg.edges[id];
        let g = budget[e.u].min(budget[e.v]);
        if g > 0 {
            gamma[id] = g;
            budget[e.u] -= g;
            budget[e.v] -= g;
            packed[e.u] += g * e.residual;
            packed[e.v] += g * e.residual;
        }
    }
    let delta = packed
        .iter()
        .zip(b)
        .map(|(&p, &w)| Ratio::new(p, w))
        .collect();
    Ok(GreedyBDual { gamma, delta })
}

/// `δ_i <- floor(2 δ_i)` when `δ_i >= 1/2`, else 0.
pub fn round_b_perturbation(delta: &[Ratio<i64>]) -> Perturbation {
    let half = Ratio::new(1, 2);
    Perturbation {
        delta: delta
            .iter()
            .map(|d| {
                if *d >= half {
                    (d * 2).floor().to_integer()
                } else {
                    0
                }
            })
            .collect(),
    }
}

/// Feasible integral dual for a b-matching instance: greedy packing, fitted
/// cover, rounding.
pub fn project_b_duals(binst: &BInstance, y_hat: &DualVector) -> Result<DualVector> {
    let vg = violation_graph(binst.instance(), y_hat)?;
    if vg.is_empty() {
        return Ok(y_hat.clone());
    }
    let fractional = greedy_b_dual(&vg, &binst.flat_demands())?;
    let cover = round_b_perturbation(&fractional.delta);
    let mut out = y_hat.clone();
    for (v, d) in cover.delta.iter().enumerate() {
        *out.get_mut(v) -= d;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_dual_feasible;

    #[test]
    fn feasible_prediction_has_no_violations() {
        let inst = BipartiteInstance::from_cost_matrix(&[vec![1, 2], vec![2, 1]]).unwrap();
        let y = DualVector {
            left: vec![1, 1],
            right: vec![0, 0],
        };
        assert!(violation_graph(&inst, &y).unwrap().is_empty());
        assert_eq!(project_duals(&inst, &y).unwrap(), y);
        let empty = violation_graph(&inst, &y).unwrap();
        assert_eq!(fast_approx_cover(&empty).delta, vec![0; 4]);
    }

    #[test]
    fn single_violated_edge() {
        let inst = BipartiteInstance::new(1, 1, [(0, 0, 2)]).unwrap();
        let y = DualVector {
            left: vec![3],
            right: vec![2],
        };
        let vg = violation_graph(&inst, &y).unwrap();
        assert_eq!(
            vg.edges(),
            &[ViolatedEdge {
                u: 0,
                v: 1,
                residual: 3
            }]
        );
        assert_eq!(fast_approx_cover(&vg).delta, vec![3, 0]);
        let fixed = project_duals(&inst, &y).unwrap();
        assert_eq!(fixed.left, vec![0]);
        assert_eq!(fixed.right, vec![2]);
        assert!(is_dual_feasible(&inst, &fixed));
    }

    #[test]
    fn walk_on_a_path() {
        // a=0, b=1, c=2 with r_ab = 4, r_bc = 2.
        let vg = ViolationGraph::from_edges(3, [(0, 1, 4), (1, 2, 2)]).unwrap();
        let cover = fast_approx_cover(&vg);
        assert_eq!(cover.delta, vec![4, 2, 0]);
        assert_eq!(cover.total(), 6);
    }

    #[test]
    fn walk_breaks_ties_toward_lower_index() {
        let vg = ViolationGraph::from_edges(3, [(0, 2, 5), (0, 1, 5)]).unwrap();
        assert_eq!(fast_approx_cover(&vg).delta, vec![5, 0, 0]);
        let vg = ViolationGraph::from_edges(4, [(1, 3, 2), (1, 2, 2), (0, 1, 1)]).unwrap();
        // 0 -> 1 (δ_0 = 1), then 1 picks neighbor 2 over 3 on the tie.
        let cover = fast_approx_cover(&vg);
        assert_eq!(cover.delta, vec![1, 2, 0, 0]);
        assert!(vg.is_covered_by(&cover.delta));
    }

    #[test]
    fn greedy_b_single_edge_doubles() {
        let vg = ViolationGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        let g = greedy_b_dual(&vg, &[2, 2]).unwrap();
        assert_eq!(g.gamma, vec![2]);
        assert_eq!(
            g.delta,
            vec![Ratio::from_integer(3), Ratio::from_integer(3)]
        );
        assert_eq!(g.dual_value(&vg), 6);
        assert_eq!(g.primal_value(&[2, 2]), Ratio::from_integer(12));
    }

    #[test]
    fn greedy_b_star_takes_heaviest_edge() {
        // Center 0, leaves 1 (r = 5) and 2 (r = 3).
        let vg = ViolationGraph::from_edges(3, [(0, 2, 3), (0, 1, 5)]).unwrap();
        let g = greedy_b_dual(&vg, &[1, 1, 1]).unwrap();
        assert_eq!(g.gamma, vec![0, 1]);
        assert_eq!(g.delta[0], Ratio::from_integer(5));
        assert_eq!(round_b_perturbation(&g.delta).delta, vec![10, 10, 0]);
    }

    #[test]
    fn greedy_b_empty() {
        let vg = ViolationGraph::from_edges(3, []).unwrap();
        let g = greedy_b_dual(&vg, &[1, 2, 3]).unwrap();
        assert!(g.gamma.is_empty());
        assert!(g.delta.iter().all(|d| *d == Ratio::from_integer(0)));
    }

    #[test]
    fn rounding_cases() {
        let zero = round_b_perturbation(&[Ratio::from_integer(0)]);
        assert_eq!(zero.delta, vec![0]);
        assert_eq!(
            round_b_perturbation(&[Ratio::from_integer(3)]).delta,
            vec![6]
        );
        let mixed = round_b_perturbation(&[Ratio::new(2, 5), Ratio::new(13, 5)]);
        assert_eq!(mixed.delta, vec![0, 5]);
        let vg = ViolationGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        assert!(vg.is_covered_by(&mixed.delta));
        assert_eq!(round_b_perturbation(&[Ratio::new(1, 2)]).delta, vec![1]);
    }

    #[test]
    fn rejects_bad_demands() {
        let vg = ViolationGraph::from_edges(2, [(0, 1, 3)]).unwrap();
        assert!(greedy_b_dual(&vg, &[1]).is_err());
        assert!(greedy_b_dual(&vg, &[0, 1]).is_err());
    }
}
