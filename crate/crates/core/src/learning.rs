//! Learning a dual prediction from sample instances.
//!
//! Each training instance contributes one fixed optimal dual (the output of a
//! deterministic cold solve). The prediction minimizing the average
//! `ℓ1` distance to those duals is their coordinate-wise median; with even
//! sample counts the lower median is taken so the prediction stays integral.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::graph::{BipartiteInstance, DualVector};
use crate::hungarian::{cold_start_dual, solve_mwpm, SolveOptions};

/// The fixed optimal dual of `inst`: a cold solve without tightening.
pub fn optimal_dual(inst: &BipartiteInstance) -> Result<DualVector> {
    Ok(solve_mwpm(inst, &cold_start_dual(inst), SolveOptions::default())?.duals)
}

/// Optimal duals of a training set, all of one shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSample {
    duals: Vec<DualVector>,
}

impl DualSample {
    pub fn new(duals: Vec<DualVector>) -> Result<Self> {
        let first = duals.first().ok_or(Error::EmptySample)?;
        if let Some(bad) = duals.iter().find(|y| !y.same_shape(first)) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                found: bad.len(),
            });
        }
        Ok(Self { duals })
    }

    pub fn duals(&self) -> &[DualVector] {
        &self.duals
    }

    pub fn len(&self) -> usize {
        self.duals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.duals.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predictor {
    pub duals: DualVector,
    pub training_loss: Ratio<i64>,
}

impl Predictor {
    /// Restricts every entry to `[-bound, bound]`.
    pub fn clamp(mut self, bound: i64) -> Self {
        let bound = bound.abs();
        for v in self
            .duals
            .left
            .iter_mut()
            .chain(self.duals.right.iter_mut())
        {
            *v = (*v).clamp(-bound, bound);
        }
        self
    }
}

fn lower_median(values: &mut [i64]) -> i64 {
    let mid = (values.len() - 1) / 2;
    *values.select_nth_unstable(mid).1
}

/// Coordinate-wise lower median of the sample duals.
pub fn erm_median(samples: &DualSample) -> Result<Predictor> {
    let first = samples.duals.first().ok_or(Error::EmptySample)?;
    let mut column = Vec::with_capacity(samples.len());
    let values = (0..first.len())
        .map(|v| {
            column.clear();
            column.extend(samples.duals.iter().map(|y| y.get(v)));
            lower_median(&mut column)
        })
        .collect();
    let duals = DualVector::from_flat(first.left.len(), values);
    let training_loss = empirical_loss(&duals, samples, None)?;
    Ok(Predictor {
        duals,
        training_loss,
    })
}

/// Average `ℓ1` distance (or `b`-weighted distance) from `y` to the samples.
pub fn empirical_loss(
    y: &DualVector,
    samples: &DualSample,
    b: Option<&[i64]>,
) -> Result<Ratio<i64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(bad) = samples.duals.iter().find(|s| !s.same_shape(y)) {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: bad.len(),
        });
    }
    if let Some(b) = b.filter(|b| b.len() != y.len()) {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: b.len(),
        });
    }
    let total: i64 = samples
        .duals
        .iter()
        .map(|s| {
            y.iter()
                .zip(s.iter())
                .enumerate()
                .map(|(v, (a, c))| b.map_or(1, |b| b[v]) * (a - c).abs())
                .sum::<i64>()
        })
        .sum();
    Ok(Ratio::new(total, samples.len() as i64))
}

/// Running lower median of one coordinate.
#[derive(Debug, Clone, Default)]
struct RunningMedian {
    lower: BinaryHeap<i64>,
    upper: BinaryHeap<Reverse<i64>>,
}

impl RunningMedian {
    fn insert(&mut self, x: i64) {
        match self.lower.peek() {
            Some(&top) if x > top => self.upper.push(Reverse(x)),
            _ => self.lower.push(x),
        }
        if self.lower.len() > self.upper.len() + 1 {
            let moved = self.lower.pop().expect("lower is non-empty");
            self.upper.push(Reverse(moved));
        } else if self.upper.len() > self.lower.len() {
            let Reverse(moved) = self.upper.pop().expect("upper is non-empty");
            self.lower.push(moved);
        }
    }

    fn median(&self) -> Option<i64> {
        self.lower.peek().copied()
    }
}

/// Streaming median predictor: after each observed optimal dual the current
/// prediction equals [`erm_median`] over every dual seen so far.
#[derive(Debug, Clone)]
pub struct OnlineMedian {
    n_left: usize,
    coords: Vec<RunningMedian>,
    seen: usize,
}

impl OnlineMedian {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        Self {
            n_left,
            coords: vec![RunningMedian::default(); n_left + n_right],
            seen: 0,
        }
    }

    pub fn observations(&self) -> usize {
        self.seen
    }

    /// Adds one optimal dual in `O(n log s)`.
    pub fn update(&mut self, sample: &DualVector) -> Result<()> {
        if sample.left.len() != self.n_left || sample.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: sample.len(),
            });
        }
        for (coord, x) in self.coords.iter_mut().zip(sample.iter()) {
            coord.insert(x);
        }
        self.seen += 1;
        Ok(())
    }

    /// Current prediction; `None` before the first observation.
    pub fn predictor(&self) -> Option<DualVector> {
        let values = self
            .coords
            .iter()
            .map(RunningMedian::median)
            .collect::<Option<Vec<i64>>>()?;
        Some(DualVector::from_flat(self.n_left, values))
    }
}
