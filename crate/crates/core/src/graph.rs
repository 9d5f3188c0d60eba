//! Bipartite instances, dual price vectors and the slack queries every solver
//! in the crate is built on.
//!
//! Edges are kept sorted by `(left, right)` so the edge list doubles as a
//! compressed adjacency structure: the edges of left vertex `i` occupy the
//! index range returned by [`BipartiteInstance::row`].

use std::ops::Range;

use crate::error::{Error, Result};

/// One edge of a bipartite instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub cost: i64,
}

/// A bipartite graph with nonnegative integer edge costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteInstance {
    n_left: usize,
    n_right: usize,
    offsets: Vec<usize>,
    lefts: Vec<u32>,
    rights: Vec<u32>,
    costs: Vec<i64>,
    max_cost: i64,
}

impl BipartiteInstance {
    /// Builds an instance from an unordered edge list.
    ///
    /// Rejects out-of-range endpoints, duplicate pairs, negative costs, and
    /// instances whose completion cost `C * n^2` would overflow `i64`.
    pub fn new(
        n_left: usize,
        n_right: usize,
        edges: impl IntoIterator<Item = (usize, usize, i64)>,
    ) -> Result<Self> {
        if u32::try_from(n_left.max(n_right)).is_err() {
            return Err(Error::InvalidInstance(format!(
                "{n_left}x{n_right} instance exceeds the vertex index range"
            )));
        }
        let mut edges: Vec<(usize, usize, i64)> = edges.into_iter().collect();
        edges.sort_unstable_by_key(|&(i, j, _)| (i, j));

        let mut offsets = vec![0usize; n_left + 1];
        let mut max_cost = 0i64;
        for (k, &(i, j, c)) in edges.iter().enumerate() {
            if i >= n_left || j >= n_right {
                return Err(Error::InvalidInstance(format!(
                    "edge ({i}, {j}) out of range for {n_left}x{n_right} instance"
                )));
            }
            if c < 0 {
                return Err(Error::InvalidInstance(format!(
                    "edge ({i}, {j}) has negative cost {c}"
                )));
            }
            if k > 0 && edges[k - 1].0 == i && edges[k - 1].1 == j {
                return Err(Error::InvalidInstance(format!("duplicate edge ({i}, {j})")));
            }
            offsets[i + 1] += 1;
            max_cost = max_cost.max(c);
        }
        for i in 0..n_left {
            offsets[i + 1] += offsets[i];
        }

        let side = n_left.max(n_right) as i64;
        side.checked_mul(side)
            .and_then(|sq| sq.checked_mul(max_cost.max(1)))
            .ok_or_else(|| {
                Error::InvalidInstance(format!(
                    "completion cost C*n^2 overflows for C={max_cost}, n={side}"
                ))
            })?;

        let lefts = edges.iter().map(|e| e.0 as u32).collect();
        let rights = edges.iter().map(|e| e.1 as u32).collect();
        let costs = edges.iter().map(|e| e.2).collect();
        Ok(Self {
            n_left,
            n_right,
            offsets,
            lefts,
            rights,
            costs,
            max_cost,
        })
    }

    /// Complete `n x n` instance from a dense cost matrix.
    pub fn from_cost_matrix(costs: &[Vec<i64>]) -> Result<Self> {
        let n = costs.len();
        if let Some(row) = costs.iter().find(|row| row.len() != n) {
            return Err(Error::InvalidInstance(format!(
                "cost matrix is not square: row of length {} in {n}x{n}",
                row.len()
            )));
        }
        Self::new(
            n,
            n,
            costs
                .iter()
                .enumerate()
                .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &c)| (i, j, c))),
        )
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn is_balanced(&self) -> bool {
        self.n_left == self.n_right
    }

    pub fn is_complete(&self) -> bool {
        self.num_edges() == self.n_left * self.n_right
    }

    pub fn num_edges(&self) -> usize {
        self.costs.len()
    }

    /// Largest edge cost present (0 for an edgeless instance).
    pub fn max_cost(&self) -> i64 {
        self.max_cost
    }

    /// Edge indices incident to left vertex `i`, ordered by right endpoint.
    #[inline]
    pub fn row(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    #[inline]
    pub fn left(&self, e: usize) -> usize {
        self.lefts[e] as usize
    }

    #[inline]
    pub fn right(&self, e: usize) -> usize {
        self.rights[e] as usize
    }

    #[inline]
    pub fn cost(&self, e: usize) -> i64 {
        self.costs[e]
    }

    pub fn edge(&self, e: usize) -> Edge {
        Edge {
            left: self.lefts[e] as usize,
            right: self.rights[e] as usize,
            cost: self.costs[e],
        }
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = Edge> + '_ {
        (0..self.num_edges()).map(move |e| self.edge(e))
    }

    /// Index of edge `(i, j)`, if present.
    pub fn find_edge(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n_left || j >= self.n_right {
            return None;
        }
        let row = self.row(i);
        self.rights[row.clone()]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| row.start + k)
    }

    /// Cost of a list of `(left, right)` pairs, failing on pairs that are not edges.
    pub fn pairs_cost(&self, pairs: &[(usize, usize)]) -> Result<i64> {
        pairs.iter().try_fold(0i64, |acc, &(i, j)| {
            let e = self.find_edge(i, j).ok_or(Error::UnknownEdge(i, j))?;
            Ok(acc + self.costs[e])
        })
    }
}

/// Integer dual prices: one value per left vertex and one per right vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DualVector {
    pub left: Vec<i64>,
    pub right: Vec<i64>,
}

impl DualVector {
    pub fn zeros(n_left: usize, n_right: usize) -> Self {
        Self {
            left: vec![0; n_left],
            right: vec![0; n_right],
        }
    }

    pub fn zeros_for(inst: &BipartiteInstance) -> Self {
        Self::zeros(inst.n_left(), inst.n_right())
    }

    /// Splits a flat vector laid out as the left block followed by the right block.
    pub fn from_flat(n_left: usize, values: Vec<i64>) -> Self {
        let mut left = values;
        let right = left.split_off(n_left.min(left.len()));
        Self { left, right }
    }

    /// Number of coordinates, `n_left + n_right`.
    pub fn len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates in flat order: left block then right block.
    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }

    /// Flat coordinate `v` (right vertex `j` lives at `n_left + j`).
    pub fn get(&self, v: usize) -> i64 {
        if v < self.left.len() {
            self.left[v]
        } else {
            self.right[v - self.left.len()]
        }
    }

    pub fn get_mut(&mut self, v: usize) -> &mut i64 {
        let n_left = self.left.len();
        if v < n_left {
            &mut self.left[v]
        } else {
            &mut self.right[v - n_left]
        }
    }

    pub fn same_shape(&self, other: &DualVector) -> bool {
        self.left.len() == other.left.len() && self.right.len() == other.right.len()
    }

    /// Dual objective `sum_v y_v`.
    pub fn objective(&self) -> i64 {
        self.iter().sum()
    }

    pub fn l1_distance(&self, other: &DualVector) -> i64 {
        debug_assert!(self.same_shape(other));
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn fits(&self, inst: &BipartiteInstance) -> bool {
        self.left.len() == inst.n_left() && self.right.len() == inst.n_right()
    }
}

/// A set of vertex-disjoint edges together with its total cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub cost: i64,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Builds a matching from a left-to-right mate table, pricing each pair by
    /// its edge in `inst`.
    pub fn from_mates(inst: &BipartiteInstance, mate_left: &[Option<usize>]) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = mate_left
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| (i, j)))
            .collect();
        let cost = inst.pairs_cost(&pairs)?;
        Ok(Self { pairs, cost })
    }

    pub fn is_perfect_for(&self, inst: &BipartiteInstance) -> bool {
        inst.is_balanced() && self.pairs.len() == inst.n_left()
    }
}

fn check_shape(inst: &BipartiteInstance, y: &DualVector) -> Result<()> {
    if y.fits(inst) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: inst.n_left() + inst.n_right(),
            found: y.len(),
        })
    }
}

/// Adds every missing pair with cost `C * n^2` so the instance becomes complete.
pub fn complete_instance(inst: &BipartiteInstance) -> Result<BipartiteInstance> {
    if !inst.is_balanced() {
        return Err(Error::InvalidInstance(format!(
            "completion needs a balanced instance, got {}x{}",
            inst.n_left(),
            inst.n_right()
        )));
    }
    if inst.is_complete() {
        return Ok(inst.clone());
    }
    let n = inst.n_left() as i64;
    let filler = inst.max_cost() * n * n;
    let mut edges = Vec::with_capacity(inst.n_left() * inst.n_right());
    for i in 0..inst.n_left() {
        let mut present = inst.row(i).map(|e| inst.right(e)).peekable();
        for j in 0..inst.n_right() {
            match present.peek() {
                Some(&r) if r == j => {
                    present.next();
                }
                _ => edges.push((i, j, filler)),
            }
        }
    }
    edges.extend(inst.edges().map(|e| (e.left, e.right, e.cost)));
    BipartiteInstance::new(inst.n_left(), inst.n_right(), edges)
}

/// Reduced cost `c_e - y_i - y_j` of edge index `e`.
#[inline]
pub fn edge_slack(inst: &BipartiteInstance, y: &DualVector, e: usize) -> i64 {
    inst.cost(e) - y.left[inst.left(e)] - y.right[inst.right(e)]
}

/// `(edge, slack)` for every edge in edge order, scanned row by row.
pub(crate) fn slacks<'a>(
    inst: &'a BipartiteInstance,
    y: &'a DualVector,
) -> impl Iterator<Item = (usize, i64)> + 'a {
    (0..inst.n_left).flat_map(move |i| {
        let yi = y.left[i];
        inst.row(i)
            .map(move |e| (e, inst.costs[e] - yi - y.right[inst.rights[e] as usize]))
    })
}

/// Reduced cost of edge `(i, j)`; negative when `y` violates that edge.
pub fn slack(inst: &BipartiteInstance, y: &DualVector, i: usize, j: usize) -> Result<i64> {
    check_shape(inst, y)?;
    let e = inst.find_edge(i, j).ok_or(Error::UnknownEdge(i, j))?;
    Ok(edge_slack(inst, y, e))
}

/// Edge indices with zero slack. Fails if `y` is infeasible anywhere.
pub fn tight_subgraph(inst: &BipartiteInstance, y: &DualVector) -> Result<Vec<usize>> {
    check_shape(inst, y)?;
    let mut tight = Vec::new();
    for e in 0..inst.num_edges() {
        let s = edge_slack(inst, y, e);
        if s < 0 {
            return Err(Error::InfeasibleDual {
                left: inst.left(e),
                right: inst.right(e),
                slack: s,
            });
        }
        if s == 0 {
            tight.push(e);
        }
    }
    Ok(tight)
}

pub fn is_dual_feasible(inst: &BipartiteInstance, y: &DualVector) -> bool {
    y.fits(inst) && (0..inst.num_edges()).all(|e| edge_slack(inst, y, e) >= 0)
}

/// First edge with negative slack, if any.
pub(crate) fn first_violation(inst: &BipartiteInstance, y: &DualVector) -> Option<Error> {
    slacks(inst, y).find_map(|(e, s)| {
        (s < 0).then(|| Error::InfeasibleDual {
            left: inst.left(e),
            right: inst.right(e),
            slack: s,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> BipartiteInstance {
        BipartiteInstance::from_cost_matrix(&[vec![1, 2], vec![2, 1]]).unwrap()
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(BipartiteInstance::new(2, 2, [(0, 0, 1), (0, 0, 2)]).is_err());
        assert!(BipartiteInstance::new(2, 2, [(2, 0, 1)]).is_err());
        assert!(BipartiteInstance::new(2, 2, [(0, 0, -1)]).is_err());
        assert!(BipartiteInstance::new(4, 4, [(0, 0, i64::MAX / 4)]).is_err());
    }

    #[test]
    fn completion_adds_expensive_edges() {
        let inst = BipartiteInstance::new(2, 2, [(0, 0, 3), (1, 1, 4)]).unwrap();
        let full = complete_instance(&inst).unwrap();
        assert!(full.is_complete());
        assert_eq!(full.cost(full.find_edge(0, 1).unwrap()), 16);
        assert_eq!(full.cost(full.find_edge(1, 0).unwrap()), 16);
        assert_eq!(full.cost(full.find_edge(0, 0).unwrap()), 3);
        assert_eq!(full.cost(full.find_edge(1, 1).unwrap()), 4);
    }

    #[test]
    fn completion_of_complete_is_identity() {
        let inst = two_by_two();
        assert_eq!(complete_instance(&inst).unwrap(), inst);
    }

    #[test]
    fn completion_with_zero_max_cost() {
        let empty = BipartiteInstance::new(3, 3, []).unwrap();
        let full = complete_instance(&empty).unwrap();
        assert_eq!(full.num_edges(), 9);
        assert!(full.edges().all(|e| e.cost == 0));
    }

    #[test]
    fn completion_requires_balance() {
        let inst = BipartiteInstance::new(2, 3, []).unwrap();
        assert!(complete_instance(&inst).is_err());
    }

    #[test]
    fn slack_arithmetic() {
        let inst = BipartiteInstance::new(1, 1, [(0, 0, 5)]).unwrap();
        let y = DualVector {
            left: vec![2],
            right: vec![1],
        };
        assert_eq!(slack(&inst, &y, 0, 0).unwrap(), 2);
        let y = DualVector {
            left: vec![4],
            right: vec![3],
        };
        assert_eq!(slack(&inst, &y, 0, 0).unwrap(), -2);
        assert_eq!(slack(&inst, &DualVector::zeros(1, 1), 0, 0).unwrap(), 5);
        assert!(matches!(
            slack(&inst, &y, 0, 1),
            Err(Error::UnknownEdge(0, 1))
        ));
    }

    #[test]
    fn tight_subgraph_cases() {
        let inst = two_by_two();
        assert!(tight_subgraph(&inst, &DualVector::zeros(2, 2))
            .unwrap()
            .is_empty());

        let zero = BipartiteInstance::new(2, 2, [(0, 1, 0), (1, 0, 0)]).unwrap();
        assert_eq!(
            tight_subgraph(&zero, &DualVector::zeros(2, 2)).unwrap(),
            vec![0, 1]
        );

        let y = DualVector {
            left: vec![1, 1],
            right: vec![0, 0],
        };
        let pairs: Vec<_> = tight_subgraph(&inst, &y)
            .unwrap()
            .into_iter()
            .map(|e| (inst.left(e), inst.right(e)))
            .collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);

        let bad = DualVector {
            left: vec![2, 0],
            right: vec![0, 0],
        };
        assert!(matches!(
            tight_subgraph(&inst, &bad),
            Err(Error::InfeasibleDual { .. })
        ));
    }

    #[test]
    fn feasibility_predicate() {
        let inst = two_by_two();
        assert!(is_dual_feasible(&inst, &DualVector::zeros(2, 2)));
        let y = DualVector {
            left: vec![2, 0],
            right: vec![0, 0],
        };
        assert!(!is_dual_feasible(&inst, &y));
        assert!(!is_dual_feasible(&inst, &DualVector::zeros(3, 2)));
    }

    #[test]
    fn flat_layout_round_trips() {
        let y = DualVector::from_flat(2, vec![1, 2, 3]);
        assert_eq!(y.left, vec![1, 2]);
        assert_eq!(y.right, vec![3]);
        assert_eq!(y.iter().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(y.get(2), 3);
        assert_eq!(y.objective(), 6);
    }
}
