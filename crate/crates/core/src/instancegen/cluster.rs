use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::points::PointSet;
use super::stream_rng;
use crate::error::{Error, Result};
use crate::graph::BipartiteInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterModelConfig {
    /// Clusters per side; also the instance size.
    pub k: usize,
    /// Euclidean distances are multiplied by this before rounding.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_scale() -> f64 {
    1000.0
}

fn default_max_iter() -> usize {
    50
}

impl ClusterModelConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            scale: default_scale(),
            seed,
            max_iter: default_max_iter(),
        }
    }
}

/// Lloyd iterations stop once the objective improves by less than this fraction.
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Clustering {
    pub points: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    /// Member indices into `points`, per cluster.
    pub members: Vec<Vec<usize>>,
    /// Sum of squared distances after each assignment step.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClusterPrep {
    pub left: Clustering,
    pub right: Clustering,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = (0..points.len())
            .filter(|&i| !chosen[i])
            .map(|i| d2[i])
            .sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for i in (0..points.len()).filter(|&i| !chosen[i]) {
                target -= d2[i];
                pick = Some(i);
                if target <= 0.0 && d2[i] > 0.0 {
                    break;
                }
            }
            pick
        } else {
            // Only duplicates remain.
            (0..points.len()).find(|&i| !chosen[i])
        };
        let pick = pick.expect("k does not exceed the point count");
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[pick]));
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations (at most `max_iter`).
///
/// A cluster that empties out is given the point farthest from its current
/// centroid, so every cluster ends non-empty when `k <= points.len()`.
pub fn kmeans<R: Rng + ?Sized>(
    points: Vec<Vec<f64>>,
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<Clustering> {
    if k == 0 || k > points.len() {
        return Err(Error::Config(format!(
            "k={k} clusters requested from {} points",
            points.len()
        )));
    }
    let mut centroids = plus_plus_seeds(&points, k, rng);
    let mut assign = vec![0usize; points.len()];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut dist = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            (assign[i], dist[i]) = nearest(p, &centroids);
        }
        let mut sizes = vec![0usize; k];
        for &c in &assign {
            sizes[c] += 1;
        }
        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| sizes[assign[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                    .expect("k does not exceed the point count");
                sizes[assign[far]] -= 1;
                sizes[c] = 1;
                assign[far] = c;
                dist[far] = 0.0;
                centroids[c] = points[far].clone();
            }
        }
        let objective: f64 = dist.iter().sum();
        let converged = trace
            .last()
            .is_some_and(|&prev: &f64| prev - objective <= REL_TOL * prev);
        trace.push(objective);

        let mut sums = vec![vec![0.0; points[0].len()]; k];
        for (i, p) in points.iter().enumerate() {
            for (s, x) in sums[assign[i]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
        }
        if converged {
            break;
        }
    }
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assign.iter().enumerate() {
        members[c].push(i);
    }
    Ok(Clustering {
        points,
        centroids,
        members,
        objective_trace: trace,
    })
}

/// Splits the points at random into two halves and clusters each side.
pub fn cluster_model_prepare(points: &PointSet, cfg: &ClusterModelConfig) -> Result<ClusterPrep> {
    if cfg.k == 0 || points.len() < 2 * cfg.k {
        return Err(Error::Config(format!(
            "k={} needs at least {} points, found {}",
            cfg.k,
            2 * cfg.k,
            points.len()
        )));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let half = points.len() / 2;
    let left_pts = order[..half]
        .iter()
        .map(|&i| points.rows[i].clone())
        .collect();
    let right_pts = order[half..]
        .iter()
        .map(|&i| points.rows[i].clone())
        .collect();
    Ok(ClusterPrep {
        left: kmeans(left_pts, cfg.k, cfg.max_iter, &mut rng)?,
        right: kmeans(right_pts, cfg.k, cfg.max_iter, &mut rng)?,
    })
}

/// The `index`-th instance: one random member per cluster on each side, costs
/// are rounded scaled Euclidean distances.
pub fn cluster_model_instance(
    prep: &ClusterPrep,
    cfg: &ClusterModelConfig,
    index: u64,
) -> Result<BipartiteInstance> {
    let mut rng = stream_rng(cfg.seed, index + 1);
    let mut sample = |c: &Clustering| -> Result<Vec<Vec<f64>>> {
        c.members
            .iter()
            .enumerate()
            .map(|(k, m)| {
                m.get(rng.random_range(0..m.len().max(1)))
                    .map(|&i| c.points[i].clone())
                    .ok_or_else(|| Error::InvalidInstance(format!("cluster {k} is empty")))
            })
            .collect()
    };
    let left = sample(&prep.left)?;
    let right = sample(&prep.right)?;
    let mut edges = Vec::with_capacity(left.len() * right.len());
    for (i, p) in left.iter().enumerate() {
        for (j, q) in right.iter().enumerate() {
            let cost = (cfg.scale * sq_dist(p, q).sqrt()).round();
            if !(0.0..=i64::MAX as f64).contains(&cost) {
                return Err(Error::InvalidInstance(format!(
                    "scaled distance {cost} is not a valid cost"
                )));
            }
            edges.push((i, j, cost as i64));
        }
    }
    BipartiteInstance::new(left.len(), right.len(), edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> PointSet {
        let mut rng = stream_rng(99, 0);
        PointSet::new(
            (0..n)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_clusters_when_k_equals_side() {
        let pts = grid(20);
        let prep = cluster_model_prepare(&pts, &ClusterModelConfig::new(10, 1)).unwrap();
        assert!(prep.left.members.iter().all(|m| m.len() == 1));
        assert!(prep.right.members.iter().all(|m| m.len() == 1));
    }

    #[test]
    fn clustering_is_seeded() {
        let pts = grid(200);
        let cfg = ClusterModelConfig::new(8, 5);
        let a = cluster_model_prepare(&pts, &cfg).unwrap();
        let b = cluster_model_prepare(&pts, &cfg).unwrap();
        assert_eq!(a.left.members, b.left.members);
        assert_eq!(a.right.members, b.right.members);
        assert_eq!(
            cluster_model_instance(&a, &cfg, 3).unwrap(),
            cluster_model_instance(&b, &cfg, 3).unwrap()
        );
    }

    #[test]
    fn lloyd_objective_never_increases() {
        for seed in 0..5 {
            let pts = grid(300);
            let prep = cluster_model_prepare(&pts, &ClusterModelConfig::new(12, seed)).unwrap();
            for c in [&prep.left, &prep.right] {
                for w in c.objective_trace.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", c.objective_trace);
                }
            }
        }
    }

    #[test]
    fn unit_square_costs_are_bounded() {
        let pts = grid(100);
        let cfg = ClusterModelConfig::new(10, 2);
        let prep = cluster_model_prepare(&pts, &cfg).unwrap();
        let inst = cluster_model_instance(&prep, &cfg, 0).unwrap();
        assert!(inst.is_complete());
        assert!(inst.max_cost() <= 1414);
    }

    #[test]
    fn coincident_points_cost_zero() {
        let pts = PointSet::new(vec![vec![0.5, 0.5]; 4]).unwrap();
        let cfg = ClusterModelConfig {
            scale: 1.0,
            ..ClusterModelConfig::new(2, 0)
        };
        let prep = cluster_model_prepare(&pts, &cfg).unwrap();
        let inst = cluster_model_instance(&prep, &cfg, 0).unwrap();
        assert!(inst.edges().all(|e| e.cost == 0));
    }

    #[test]
    fn rounded_costs_nearly_satisfy_triangle_inequality() {
        let pts = grid(60);
        let cfg = ClusterModelConfig::new(6, 4);
        let prep = cluster_model_prepare(&pts, &cfg).unwrap();
        let inst = cluster_model_instance(&prep, &cfg, 0).unwrap();
        let c = |i: usize, j: usize| inst.cost(inst.find_edge(i, j).unwrap());
        // Left i -> right j -> left i2 -> right j2 bounds the direct i -> j2 distance.
        for i in 0..6 {
            for j in 0..6 {
                for i2 in 0..6 {
                    for j2 in 0..6 {
                        assert!(c(i, j2) <= c(i, j) + c(i2, j) + c(i2, j2) + 2);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_large_k() {
        assert!(cluster_model_prepare(&grid(10), &ClusterModelConfig::new(6, 0)).is_err());
    }
}
