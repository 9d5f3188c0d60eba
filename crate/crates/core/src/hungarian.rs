//! Dual-seedable primal-dual solver for minimum-weight perfect matching.
//!
//! The scheme keeps a feasible dual `y` and a maximum matching among the
//! edges that are tight under `y`. While that matching is not perfect, a Hall
//! violator `S` (left vertices outside a König cover) is raised by the
//! smallest slack leaving it, which strictly increases the dual objective.
//! With König violators and incremental Hopcroft-Karp augmentation this is
//! the Hungarian method, but it accepts any feasible integral starting dual,
//! and its number of dual updates is bounded by how far that dual is from
//! optimal.

use std::collections::VecDeque;
use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_slack, first_violation, BipartiteInstance, DualVector, Matching};

const UNREACHED: u32 = u32::MAX;

/// Read-only view of a bipartite graph for the matching routines.
///
/// Arcs of left vertex `i` are numbered by [`Adjacency::arcs`]; an arc may be
/// inactive (for example a non-tight edge), in which case [`Adjacency::head`]
/// returns `None`.
pub trait Adjacency {
    fn n_left(&self) -> usize;
    fn n_right(&self) -> usize;
    fn arcs(&self, i: usize) -> Range<usize>;
    fn head(&self, arc: usize) -> Option<usize>;
}

/// The tight edges of an instance under a dual, evaluated lazily.
pub struct TightEdges<'a> {
    pub inst: &'a BipartiteInstance,
    pub y: &'a DualVector,
}

impl Adjacency for TightEdges<'_> {
    fn n_left(&self) -> usize {
        self.inst.n_left()
    }

    fn n_right(&self) -> usize {
        self.inst.n_right()
    }

    #[inline]
    fn arcs(&self, i: usize) -> Range<usize> {
        self.inst.row(i)
    }

    #[inline]
    fn head(&self, arc: usize) -> Option<usize> {
        (edge_slack(self.inst, self.y, arc) == 0).then(|| self.inst.right(arc))
    }
}

/// An explicit edge set in compressed row form.
#[derive(Debug, Clone)]
pub struct EdgeList {
    n_left: usize,
    n_right: usize,
    offsets: Vec<usize>,
    heads: Vec<usize>,
}

impl EdgeList {
    pub fn new(n_left: usize, n_right: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut offsets = vec![0; n_left + 1];
        for &(i, j) in &sorted {
            if i >= n_left || j >= n_right {
                return Err(Error::UnknownEdge(i, j));
            }
            offsets[i + 1] += 1;
        }
        for i in 0..n_left {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            n_left,
            n_right,
            offsets,
            heads: sorted.into_iter().map(|(_, j)| j).collect(),
        })
    }
}

impl Adjacency for EdgeList {
    fn n_left(&self) -> usize {
        self.n_left
    }

    fn n_right(&self) -> usize {
        self.n_right
    }

    fn arcs(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn head(&self, arc: usize) -> Option<usize> {
        Some(self.heads[arc])
    }
}

/// Mate tables for a matching in a bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mates {
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
}

impl Mates {
    pub fn empty(n_left: usize, n_right: usize) -> Self {
        Self {
            left: vec![None; n_left],
            right: vec![None; n_right],
        }
    }

    pub fn from_pairs(n_left: usize, n_right: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut mates = Self::empty(n_left, n_right);
        for &(i, j) in pairs {
            if i >= n_left || j >= n_right {
                return Err(Error::UnknownEdge(i, j));
            }
            if mates.left[i].is_some() || mates.right[j].is_some() {
                return Err(Error::InvalidInstance(format!(
                    "pair ({i}, {j}) shares a vertex with another pair"
                )));
            }
            mates.left[i] = Some(j);
            mates.right[j] = Some(i);
        }
        Ok(mates)
    }

    pub fn size(&self) -> usize {
        self.left.iter().filter(|m| m.is_some()).count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.left
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|j| (i, j)))
            .collect()
    }

    /// Every left vertex is matched.
    pub fn covers_left(&self) -> bool {
        self.left.iter().all(Option::is_some)
    }
}

/// Left vertex set with a too-small neighborhood in the tight subgraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HallViolator {
    /// `S`, ascending.
    pub left: Vec<usize>,
    /// `Γ(S)`, ascending.
    pub neighborhood: Vec<usize>,
}

impl HallViolator {
    /// `|S| - |Γ(S)|`.
    pub fn deficiency(&self) -> i64 {
        self.left.len() as i64 - self.neighborhood.len() as i64
    }

    /// `Σ_S b - Σ_Γ(S) b` for demands split by side.
    pub fn weighted_deficiency(&self, b_left: &[i64], b_right: &[i64]) -> i64 {
        self.left.iter().map(|&i| b_left[i]).sum::<i64>()
            - self.neighborhood.iter().map(|&j| b_right[j]).sum::<i64>()
    }
}

/// Reusable buffers for Hopcroft-Karp phases.
struct HkScratch {
    dist: Vec<u32>,
    cursor: Vec<usize>,
    queue: VecDeque<usize>,
}

impl HkScratch {
    fn new(n_left: usize) -> Self {
        Self {
            dist: vec![UNREACHED; n_left],
            cursor: vec![0; n_left],
            queue: VecDeque::with_capacity(n_left),
        }
    }
}

fn hk_bfs<G: Adjacency>(g: &G, mates: &Mates, s: &mut HkScratch) -> bool {
    s.queue.clear();
    for i in 0..g.n_left() {
        if mates.left[i].is_none() {
            s.dist[i] = 0;
            s.queue.push_back(i);
        } else {
            s.dist[i] = UNREACHED;
        }
    }
    let mut found = false;
    while let Some(i) = s.queue.pop_front() {
        for arc in g.arcs(i) {
            let Some(j) = g.head(arc) else { continue };
            match mates.right[j] {
                None => found = true,
                Some(i2) if s.dist[i2] == UNREACHED => {
                    s.dist[i2] = s.dist[i] + 1;
                    s.queue.push_back(i2);
                }
                Some(_) => {}
            }
        }
    }
    found
}

fn hk_dfs<G: Adjacency>(g: &G, i: usize, mates: &mut Mates, s: &mut HkScratch) -> bool {
    let end = g.arcs(i).end;
    while s.cursor[i] < end {
        let arc = s.cursor[i];
        s.cursor[i] += 1;
        let Some(j) = g.head(arc) else { continue };
        let advance = match mates.right[j] {
            None => true,
            Some(i2) => s.dist[i2] == s.dist[i] + 1 && hk_dfs(g, i2, mates, s),
        };
        if advance {
            mates.left[i] = Some(j);
            mates.right[j] = Some(i);
            return true;
        }
    }
    s.dist[i] = UNREACHED;
    false
}

fn augment_in_place<G: Adjacency>(g: &G, mates: &mut Mates, s: &mut HkScratch) -> usize {
    let mut augmentations = 0;
    while hk_bfs(g, mates, s) {
        for i in 0..g.n_left() {
            s.cursor[i] = g.arcs(i).start;
        }
        for i in 0..g.n_left() {
            if mates.left[i].is_none() && hk_dfs(g, i, mates, s) {
                augmentations += 1;
            }
        }
    }
    augmentations
}

/// Hopcroft-Karp maximum-cardinality matching.
///
/// `warm` must be a valid matching of `g`; it is only ever augmented. Returns
/// the maximum matching and the number of augmenting paths applied.
pub fn max_cardinality_matching<G: Adjacency>(g: &G, warm: Option<Mates>) -> (Mates, usize) {
    let mut mates = warm.unwrap_or_else(|| Mates::empty(g.n_left(), g.n_right()));
    let mut scratch = HkScratch::new(g.n_left());
    let augmentations = augment_in_place(g, &mut mates, &mut scratch);
    (mates, augmentations)
}

/// Marks of the alternating-reachability search from unmatched left vertices.
struct Reach {
    left: Vec<bool>,
    right: Vec<bool>,
}

fn alternating_reach<G: Adjacency>(g: &G, mates: &Mates, queue: &mut VecDeque<usize>) -> Reach {
    let mut reach = Reach {
        left: vec![false; g.n_left()],
        right: vec![false; g.n_right()],
    };
    queue.clear();
    for (i, m) in mates.left.iter().enumerate() {
        if m.is_none() {
            reach.left[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for arc in g.arcs(i) {
            let Some(j) = g.head(arc) else { continue };
            if reach.right[j] {
                continue;
            }
            reach.right[j] = true;
            // A free right vertex here means `mates` was not maximum.
            debug_assert!(mates.right[j].is_some(), "matching is not maximum");
            if let Some(i2) = mates.right[j] {
                if !reach.left[i2] {
                    reach.left[i2] = true;
                    queue.push_back(i2);
                }
            }
        }
    }
    reach
}

fn violator_from_reach(reach: &Reach) -> HallViolator {
    HallViolator {
        left: (0..reach.left.len()).filter(|&i| reach.left[i]).collect(),
        neighborhood: (0..reach.right.len()).filter(|&j| reach.right[j]).collect(),
    }
}

/// `S = L \ C` for the König cover `C` derived from a maximum matching.
///
/// Returns `None` when every left vertex is matched (no violator exists).
pub fn hall_violator<G: Adjacency>(g: &G, mates: &Mates) -> Option<HallViolator> {
    if mates.covers_left() {
        return None;
    }
    let reach = alternating_reach(g, mates, &mut VecDeque::new());
    Some(violator_from_reach(&reach))
}

fn min_leaving_slack(
    inst: &BipartiteInstance,
    y: &DualVector,
    in_s: &[bool],
    in_gamma: &[bool],
) -> Option<i64> {
    let mut eps: Option<i64> = None;
    for i in (0..inst.n_left()).filter(|&i| in_s[i]) {
        for e in inst.row(i) {
            if !in_gamma[inst.right(e)] {
                let s = edge_slack(inst, y, e);
                eps = Some(eps.map_or(s, |cur| cur.min(s)));
            }
        }
    }
    eps
}

fn apply_update(y: &mut DualVector, in_s: &[bool], in_gamma: &[bool], eps: i64) {
    for (v, &hit) in y.left.iter_mut().zip(in_s) {
        if hit {
            *v += eps;
        }
    }
    for (v, &hit) in y.right.iter_mut().zip(in_gamma) {
        if hit {
            *v -= eps;
        }
    }
}

fn masks(inst: &BipartiteInstance, violator: &HallViolator) -> Result<(Vec<bool>, Vec<bool>)> {
    let mut in_s = vec![false; inst.n_left()];
    let mut in_gamma = vec![false; inst.n_right()];
    for &i in &violator.left {
        *in_s.get_mut(i).ok_or(Error::DimensionMismatch {
            expected: inst.n_left(),
            found: i + 1,
        })? = true;
    }
    for &j in &violator.neighborhood {
        *in_gamma.get_mut(j).ok_or(Error::DimensionMismatch {
            expected: inst.n_right(),
            found: j + 1,
        })? = true;
    }
    Ok((in_s, in_gamma))
}

/// Raises `y` on `S` and lowers it on `Γ(S)` by the smallest slack from `S`
/// to `R \ Γ(S)`. Returns the new dual and that step `ε`.
///
/// Fails with [`Error::Infeasible`] when `S` has no edge leaving `Γ(S)` at
/// all, which certifies that no perfect matching exists.
pub fn dual_update(
    inst: &BipartiteInstance,
    y: &DualVector,
    violator: &HallViolator,
) -> Result<(DualVector, i64)> {
    let (in_s, in_gamma) = masks(inst, violator)?;
    let eps = min_leaving_slack(inst, y, &in_s, &in_gamma).ok_or(Error::Infeasible {
        deficient_side: violator.left.len(),
    })?;
    let mut next = y.clone();
    apply_update(&mut next, &in_s, &in_gamma, eps);
    Ok((next, eps))
}

/// Raises every left dual by its smallest incident slack, so each left vertex
/// with an edge gets at least one tight edge.
pub fn tighten(inst: &BipartiteInstance, y: &DualVector) -> DualVector {
    let mut out = y.clone();
    for i in 0..inst.n_left() {
        if let Some(min) = inst.row(i).map(|e| edge_slack(inst, y, e)).min() {
            out.left[i] += min;
        }
    }
    out
}

/// The all-zero dual; feasible because costs are nonnegative.
pub fn cold_start_dual(inst: &BipartiteInstance) -> DualVector {
    DualVector::zeros_for(inst)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Apply [`tighten`] once to the seed before the main loop.
    pub use_tighten: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Dual-update rounds.
    pub iterations: u64,
    /// Augmenting paths applied, including those of the initial matching.
    pub augmentations: u64,
    /// Seconds, monotonic clock.
    pub wall_time: f64,
    /// Objective of the dual entering the main loop (after tightening).
    pub initial_dual_objective: i64,
    pub final_dual_objective: i64,
}

impl SolveStats {
    pub fn dual_gap(&self) -> i64 {
        self.final_dual_objective - self.initial_dual_objective
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub matching: Matching,
    pub duals: DualVector,
    pub stats: SolveStats,
}

/// Minimum-weight perfect matching, warm-started from a feasible dual.
///
/// Fails on unbalanced instances, infeasible seeds (repair those with
/// [`crate::feasibility::project_duals`]) and instances with no perfect
/// matching.
pub fn solve_mwpm(
    inst: &BipartiteInstance,
    y_init: &DualVector,
    options: SolveOptions,
) -> Result<Solution> {
    let start = Instant::now();
    if !inst.is_balanced() {
        return Err(Error::InvalidInstance(format!(
            "perfect matching needs a balanced instance, got {}x{}",
            inst.n_left(),
            inst.n_right()
        )));
    }
    if !y_init.fits(inst) {
        return Err(Error::DimensionMismatch {
            expected: inst.n_left() + inst.n_right(),
            found: y_init.len(),
        });
    }
    if let Some(err) = first_violation(inst, y_init) {
        return Err(err);
    }

    let mut y = if options.use_tighten {
        tighten(inst, y_init)
    } else {
        y_init.clone()
    };
    let mut stats = SolveStats {
        initial_dual_objective: y.objective(),
        ..SolveStats::default()
    };

    let n = inst.n_left();
    let mut mates = Mates::empty(n, n);
    let mut scratch = HkScratch::new(n);
    let mut queue = VecDeque::with_capacity(n);
    loop {
        let tight = TightEdges { inst, y: &y };
        stats.augmentations += augment_in_place(&tight, &mut mates, &mut scratch) as u64;
        if mates.covers_left() {
            break;
        }
        let reach = alternating_reach(&tight, &mates, &mut queue);
        let eps = min_leaving_slack(inst, &y, &reach.left, &reach.right).ok_or_else(|| {
            Error::Infeasible {
                deficient_side: reach.left.iter().filter(|&&b| b).count(),
            }
        })?;
        debug_assert!(eps >= 1);
        apply_update(&mut y, &reach.left, &reach.right, eps);
        stats.iterations += 1;
        debug_assert!(first_violation(inst, &y).is_none());
        debug_assert!(mates.pairs().iter().all(|&(i, j)| {
            inst.find_edge(i, j)
                .is_some_and(|e| edge_slack(inst, &y, e) == 0)
        }));
    }

    stats.final_dual_objective = y.objective();
    let matching = Matching::from_mates(inst, &mates.left)?;
    debug_assert_eq!(matching.cost, stats.final_dual_objective);
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok(Solution {
        matching,
        duals: y,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_dual_feasible;

    fn pairs(m: &Mates) -> Vec<(usize, usize)> {
        m.pairs()
    }

    #[test]
    fn matching_on_empty_and_diagonal() {
        let g = EdgeList::new(3, 3, &[]).unwrap();
        assert_eq!(max_cardinality_matching(&g, None).0.size(), 0);
        let g = EdgeList::new(3, 3, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        let (m, aug) = max_cardinality_matching(&g, None);
        assert_eq!(pairs(&m), vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(aug, 3);
    }

    #[test]
    fn matching_three_by_three_has_size_two() {
        let g = EdgeList::new(3, 3, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        assert_eq!(max_cardinality_matching(&g, None).0.size(), 2);
    }

    #[test]
    fn warm_matching_is_only_augmented() {
        // Greedy start (1,0) must be rerouted through an augmenting path.
        let g = EdgeList::new(2, 2, &[(0, 0), (1, 0), (1, 1)]).unwrap();
        let warm = Mates::from_pairs(2, 2, &[(1, 0)]).unwrap();
        let (m, aug) = max_cardinality_matching(&g, Some(warm));
        assert_eq!(m.size(), 2);
        assert_eq!(aug, 1);
    }

    #[test]
    fn violator_for_isolated_vertex() {
        let g = EdgeList::new(2, 2, &[(1, 1)]).unwrap();
        let (m, _) = max_cardinality_matching(&g, None);
        let v = hall_violator(&g, &m).unwrap();
        assert!(v.left.contains(&0));
        assert!(v.deficiency() >= 1);
    }

    #[test]
    fn violator_for_shared_neighbor() {
        let g = EdgeList::new(2, 2, &[(0, 0), (1, 0)]).unwrap();
        let (m, _) = max_cardinality_matching(&g, None);
        let v = hall_violator(&g, &m).unwrap();
        assert_eq!(v.left, vec![0, 1]);
        assert_eq!(v.neighborhood, vec![0]);
    }

    #[test]
    fn violator_on_three_by_three() {
        let g = EdgeList::new(3, 3, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let (m, _) = max_cardinality_matching(&g, None);
        let v = hall_violator(&g, &m).unwrap();
        assert_eq!(v.deficiency(), 1);
        assert!(v.left.len() >= 2);
    }

    #[test]
    fn no_violator_for_perfect_matching() {
        let g = EdgeList::new(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let (m, _) = max_cardinality_matching(&g, None);
        assert!(hall_violator(&g, &m).is_none());
    }

    #[test]
    fn dual_update_step_is_min_leaving_slack() {
        let inst = BipartiteInstance::new(1, 2, [(0, 0, 0), (0, 1, 2)]).unwrap();
        let y = DualVector::zeros(1, 2);
        let v = HallViolator {
            left: vec![0],
            neighborhood: vec![0],
        };
        let (next, eps) = dual_update(&inst, &y, &v).unwrap();
        assert_eq!(eps, 2);
        assert_eq!(next.left, vec![2]);
        assert_eq!(next.right, vec![-2, 0]);
        assert!(is_dual_feasible(&inst, &next));
    }

    #[test]
    fn equal_slacks_all_become_tight() {
        let inst =
            BipartiteInstance::from_cost_matrix(&[vec![3, 3, 3], vec![3, 3, 3], vec![3, 3, 3]])
                .unwrap();
        let y = DualVector::zeros(3, 3);
        let v = HallViolator {
            left: vec![0, 1, 2],
            neighborhood: vec![],
        };
        let (next, eps) = dual_update(&inst, &y, &v).unwrap();
        assert_eq!(eps, 3);
        assert!(inst
            .edges()
            .all(|e| e.cost - next.left[e.left] - next.right[e.right] == 0));
    }

    #[test]
    fn dual_update_reports_infeasibility() {
        let inst = BipartiteInstance::new(2, 2, [(0, 0, 1), (1, 0, 1)]).unwrap();
        let v = HallViolator {
            left: vec![0, 1],
            neighborhood: vec![0],
        };
        assert!(matches!(
            dual_update(&inst, &DualVector::zeros(2, 2), &v),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn tighten_is_row_reduction() {
        let inst = BipartiteInstance::from_cost_matrix(&[vec![4, 2], vec![3, 7]]).unwrap();
        let t = tighten(&inst, &DualVector::zeros(2, 2));
        assert_eq!(t.left, vec![2, 3]);
        assert_eq!(tighten(&inst, &t), t);
    }

    #[test]
    fn solves_two_by_two() {
        let inst = BipartiteInstance::from_cost_matrix(&[vec![1, 2], vec![2, 1]]).unwrap();
        let sol = solve_mwpm(&inst, &cold_start_dual(&inst), SolveOptions::default()).unwrap();
        assert_eq!(sol.matching.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(sol.matching.cost, 2);
        assert_eq!(sol.stats.final_dual_objective, 2);
        assert!(sol.stats.iterations as i64 <= sol.stats.dual_gap());

        let again = solve_mwpm(&inst, &sol.duals, SolveOptions::default()).unwrap();
        assert_eq!(again.stats.iterations, 0);
    }

    #[test]
    fn solve_rejects_infeasible_seed_and_instance() {
        let inst = BipartiteInstance::from_cost_matrix(&[vec![1, 2], vec![2, 1]]).unwrap();
        let bad = DualVector {
            left: vec![5, 0],
            right: vec![0, 0],
        };
        assert!(matches!(
            solve_mwpm(&inst, &bad, SolveOptions::default()),
            Err(Error::InfeasibleDual { .. })
        ));

        let sparse = BipartiteInstance::new(2, 2, [(0, 0, 1), (1, 0, 1)]).unwrap();
        assert!(matches!(
            solve_mwpm(&sparse, &DualVector::zeros(2, 2), SolveOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }
}
