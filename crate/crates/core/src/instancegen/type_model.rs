use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::error::{Error, Result};
use crate::graph::BipartiteInstance;

/// Group-structured costs: `n` vertices per side split into `groups` equal
/// groups, a geometric base weight per group pair, and per-instance integral
/// noise of variance `variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeModelConfig {
    pub n: usize,
    pub groups: usize,
    #[serde(default = "default_mean_weight")]
    pub mean_weight: f64,
    pub variance: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_mean_weight() -> f64 {
    250.0
}

impl TypeModelConfig {
    pub fn new(n: usize, groups: usize, variance: u64, seed: u64) -> Self {
        Self {
            n,
            groups,
            mean_weight: default_mean_weight(),
            variance,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.groups == 0 || !self.n.is_multiple_of(self.groups) {
            return Err(Error::Config(format!(
                "type model needs groups dividing n, got n={} groups={}",
                self.n, self.groups
            )));
        }
        if self.mean_weight.is_nan() || self.mean_weight < 1.0 {
            return Err(Error::Config(format!(
                "mean weight must be at least 1, got {}",
                self.mean_weight
            )));
        }
        Ok(())
    }

    fn group_of(&self, v: usize) -> usize {
        v / (self.n / self.groups)
    }
}

/// Base weights `W` indexed by (left group, right group).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseWeights {
    pub groups: usize,
    pub weights: Vec<i64>,
}

impl BaseWeights {
    pub fn get(&self, gl: usize, gr: usize) -> i64 {
        self.weights[gl * self.groups + gr]
    }
}

/// One noisy draw and how many of its costs were clamped up to 1.
#[derive(Debug, Clone)]
pub struct NoisyInstance {
    pub instance: BipartiteInstance,
    pub clamped: usize,
}

/// Draws `W`: i.i.d. geometric weights on {1, 2, ...} with the configured mean.
pub fn type_model_base(cfg: &TypeModelConfig) -> Result<BaseWeights> {
    cfg.validate()?;
    let geo = Geometric::new(1.0 / cfg.mean_weight)
        .map_err(|e| Error::Config(format!("geometric distribution: {e}")))?;
    let mut rng = stream_rng(cfg.seed, 0);
    let weights = (0..cfg.groups * cfg.groups)
        .map(|_| geo.sample(&mut rng) as i64 + 1)
        .collect();
    Ok(BaseWeights {
        groups: cfg.groups,
        weights,
    })
}

/// Mean-zero integral noise `Binomial(4v, 1/2) - 2v`, variance exactly `v`.
pub fn binomial_noise<R: Rng + ?Sized>(variance: u64, rng: &mut R) -> Result<i64> {
    if variance == 0 {
        return Ok(0);
    }
    let trials = variance
        .checked_mul(4)
        .ok_or_else(|| Error::Config(format!("noise variance {variance} too large")))?;
    let bin = Binomial::new(trials, 0.5)
        .map_err(|e| Error::Config(format!("binomial distribution: {e}")))?;
    Ok(bin.sample(rng) as i64 - 2 * variance as i64)
}

/// The `index`-th instance of the distribution: complete `n x n`, cost of
/// `(i, j)` is `max(1, W[g(i)][g(j)] + noise)`.
pub fn type_model_instance(
    base: &BaseWeights,
    cfg: &TypeModelConfig,
    index: u64,
) -> Result<NoisyInstance> {
    cfg.validate()?;
    if base.groups != cfg.groups {
        return Err(Error::Config(format!(
            "base weights have {} groups, config has {}",
            base.groups, cfg.groups
        )));
    }
    let mut rng = stream_rng(cfg.seed, index + 1);
    let mut clamped = 0;
    let mut edges = Vec::with_capacity(cfg.n * cfg.n);
    for i in 0..cfg.n {
        for j in 0..cfg.n {
            let raw = base.get(cfg.group_of(i), cfg.group_of(j))
                + binomial_noise(cfg.variance, &mut rng)?;
            if raw < 1 {
                clamped += 1;
            }
            edges.push((i, j, raw.max(1)));
        }
    }
    Ok(NoisyInstance {
        instance: BipartiteInstance::new(cfg.n, cfg.n, edges)?,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_is_reproducible_and_positive() {
        let cfg = TypeModelConfig::new(20, 5, 0, 7);
        let a = type_model_base(&cfg).unwrap();
        assert_eq!(a, type_model_base(&cfg).unwrap());
        assert!(a.weights.iter().all(|&w| w >= 1));
    }

    #[test]
    fn geometric_mean_is_250() {
        let geo = Geometric::new(1.0 / 250.0).unwrap();
        let mut rng = stream_rng(11, 0);
        let draws = 100_000;
        let mean = (0..draws)
            .map(|_| geo.sample(&mut rng) as f64 + 1.0)
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 250.0).abs() <= 5.0, "mean {mean}");
    }

    #[test]
    fn noise_moments() {
        let mut rng = stream_rng(3, 9);
        let v = 200u64;
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws)
            .map(|_| binomial_noise(v, &mut rng).unwrap() as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        assert!(mean.abs() < 0.5, "mean {mean}");
        assert!((var - v as f64).abs() <= 0.05 * v as f64, "variance {var}");
    }

    #[test]
    fn zero_variance_reproduces_base() {
        let cfg = TypeModelConfig::new(12, 3, 0, 5);
        let base = type_model_base(&cfg).unwrap();
        let a = type_model_instance(&base, &cfg, 0).unwrap();
        let b = type_model_instance(&base, &cfg, 1).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.clamped, 0);
        for e in a.instance.edges() {
            assert_eq!(e.cost, base.get(e.left / 4, e.right / 4));
        }
    }

    #[test]
    fn heavy_noise_is_clamped() {
        let cfg = TypeModelConfig::new(10, 2, 1 << 20, 5);
        let base = type_model_base(&cfg).unwrap();
        let draw = type_model_instance(&base, &cfg, 0).unwrap();
        assert!(draw.instance.is_complete());
        assert!(draw.instance.edges().all(|e| e.cost >= 1));
        assert!(draw.clamped > 0);
    }

    #[test]
    fn rejects_indivisible_groups() {
        assert!(TypeModelConfig::new(10, 3, 0, 0).validate().is_err());
    }
}
