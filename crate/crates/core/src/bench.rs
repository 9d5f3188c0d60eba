//! Batch and online warm-start experiments.
//!
//! Every method solves the same test instances; rows record iteration counts,
//! timings and dual gaps. Instances depend only on the configuration and seed,
//! so everything except the timing columns is reproducible.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::project_duals;
use crate::graph::{BipartiteInstance, DualVector};
use crate::hungarian::{cold_start_dual, solve_mwpm, SolveOptions, SolveStats};
use crate::instancegen::{
    cluster_model_instance, cluster_model_prepare, load_points, resolve_dataset_path,
    type_model_base, type_model_instance, BaseWeights, ClusterModelConfig, ClusterPrep,
    LoadOptions, TypeModelConfig,
};
use crate::learning::{erm_median, DualSample, OnlineMedian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Batch,
    Online,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Batch => "batch",
            Mode::Online => "online",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "cold")]
    Cold,
    #[serde(rename = "learned+project")]
    LearnedProject,
    #[serde(rename = "learned+project+tighten")]
    LearnedProjectTighten,
}

impl Method {
    pub const ALL: [Method; 3] = [
        Method::Cold,
        Method::LearnedProject,
        Method::LearnedProjectTighten,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cold => "cold",
            Method::LearnedProject => "learned+project",
            Method::LearnedProjectTighten => "learned+project+tighten",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Clustered point data as an instance source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSource {
    /// CSV of numeric rows; relative paths may resolve against the dataset
    /// directory variable.
    pub points: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    /// Keep this many rows, chosen with the experiment seed.
    #[serde(default)]
    pub subsample: Option<usize>,
    pub k: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_scale() -> f64 {
    ClusterModelConfig::new(1, 0).scale
}

fn default_max_iter() -> usize {
    ClusterModelConfig::new(1, 0).max_iter
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorConfig {
    TypeModel(TypeModelConfig),
    Cluster(ClusterSource),
}

fn default_s_train() -> usize {
    20
}
fn default_n_test() -> usize {
    10
}
fn default_steps() -> usize {
    20
}
fn default_repetitions() -> usize {
    20
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// One experiment. The generator's own seed field is ignored; instances are
/// drawn from `seed` (batch) or `seed + repetition` (online).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub generator: GeneratorConfig,
    #[serde(default = "default_s_train")]
    pub s_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Time points per online repetition.
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, generator: GeneratorConfig, seed: u64) -> Self {
        Self {
            mode,
            generator,
            s_train: default_s_train(),
            n_test: default_n_test(),
            steps: default_steps(),
            repetitions: default_repetitions(),
            methods: default_methods(),
            seed,
            output: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = match self.mode {
            Mode::Batch => [("s_train", self.s_train), ("n_test", self.n_test)],
            Mode::Online => [("steps", self.steps), ("repetitions", self.repetitions)],
        };
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        match &self.generator {
            GeneratorConfig::TypeModel(tm) => tm.validate(),
            GeneratorConfig::Cluster(c) if c.k == 0 => {
                Err(Error::Config("cluster count k must be positive".into()))
            }
            GeneratorConfig::Cluster(c) if !(c.scale > 0.0 && c.scale.is_finite()) => Err(
                Error::Config(format!("distance scale must be positive, got {}", c.scale)),
            ),
            GeneratorConfig::Cluster(_) => Ok(()),
        }
    }
}

/// A seeded instance distribution.
pub enum Sampler {
    TypeModel {
        cfg: TypeModelConfig,
        base: BaseWeights,
    },
    Cluster {
        cfg: ClusterModelConfig,
        prep: ClusterPrep,
    },
}

impl Sampler {
    pub fn new(generator: &GeneratorConfig, seed: u64) -> Result<Self> {
        match generator {
            GeneratorConfig::TypeModel(tm) => {
                let cfg = TypeModelConfig { seed, ..tm.clone() };
                let base = type_model_base(&cfg)?;
                Ok(Sampler::TypeModel { cfg, base })
            }
            GeneratorConfig::Cluster(src) => {
                let opts = LoadOptions {
                    has_header: src.has_header,
                    subsample: src.subsample.map(|count| (count, seed)),
                };
                let points = load_points(&resolve_dataset_path(&src.points), &opts)?;
                let cfg = ClusterModelConfig {
                    k: src.k,
                    scale: src.scale,
                    seed,
                    max_iter: src.max_iter,
                };
                let prep = cluster_model_prepare(&points, &cfg)?;
                Ok(Sampler::Cluster { cfg, prep })
            }
        }
    }

    /// The `index`-th instance and how many of its costs were clamped.
    pub fn sample(&self, index: u64) -> Result<(BipartiteInstance, u64)> {
        match self {
            Sampler::TypeModel { cfg, base } => {
                let noisy = type_model_instance(base, cfg, index)?;
                Ok((noisy.instance, noisy.clamped as u64))
            }
            Sampler::Cluster { cfg, prep } => Ok((cluster_model_instance(prep, cfg, index)?, 0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub mode: Mode,
    /// Test instance index (batch) or 1-based time point (online).
    pub step: u64,
    pub iterations: u64,
    pub augmentations: u64,
    pub wall_time_s: f64,
    pub projection_time_s: f64,
    pub dual_gap: i64,
    /// Seed the row's instances were drawn from.
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// Instance costs raised to 1 by the type model's clamp.
    pub clamped_costs: u64,
    pub instances: u64,
}

struct Measured {
    stats: SolveStats,
    projection_time: f64,
    cost: i64,
    duals: DualVector,
}

fn run_method(
    inst: &BipartiteInstance,
    method: Method,
    prediction: Option<&DualVector>,
) -> Result<Measured> {
    let (seed, projection_time) = match (method, prediction) {
        (Method::Cold, _) | (_, None) => (cold_start_dual(inst), 0.0),
        (_, Some(y_hat)) => {
            let start = Instant::now();
            let y = project_duals(inst, y_hat)?;
            (y, start.elapsed().as_secs_f64())
        }
    };
    let options = SolveOptions {
        use_tighten: method == Method::LearnedProjectTighten,
    };
    let sol = solve_mwpm(inst, &seed, options)?;
    Ok(Measured {
        cost: sol.matching.cost,
        stats: sol.stats,
        projection_time,
        duals: sol.duals,
    })
}

/// Runs every configured method on `inst`. The optimal dual returned is the
/// cold solve's, computed even when cold is not among the reported methods.
fn evaluate(
    inst: &BipartiteInstance,
    methods: &[Method],
    prediction: Option<&DualVector>,
    mut emit: impl FnMut(Method, &Measured),
) -> Result<DualVector> {
    let cold = run_method(inst, Method::Cold, None)?;
    for &method in methods {
        let m = if method == Method::Cold {
            None
        } else {
            Some(run_method(inst, method, prediction)?)
        };
        let m = m.as_ref().unwrap_or(&cold);
        assert_eq!(
            m.cost, cold.cost,
            "{method} reached a different optimum than the cold start"
        );
        emit(method, m);
    }
    Ok(cold.duals)
}

fn row(method: Method, mode: Mode, step: u64, seed: u64, m: &Measured) -> ResultRow {
    ResultRow {
        method,
        mode,
        step,
        iterations: m.stats.iterations,
        augmentations: m.stats.augmentations,
        wall_time_s: m.stats.wall_time,
        projection_time_s: m.projection_time,
        dual_gap: m.stats.dual_gap(),
        seed,
    }
}

/// Trains on `s_train` instances, then runs each method on `n_test` more.
/// Rows are ordered by test instance, then by configured method order.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let sampler = Sampler::new(&cfg.generator, cfg.seed)?;
    let mut out = ExperimentOutput::default();

    let mut duals = Vec::with_capacity(cfg.s_train);
    let mut max_cost = 0;
    for k in 0..cfg.s_train as u64 {
        let (inst, clamped) = sampler.sample(k)?;
        out.clamped_costs += clamped;
        out.instances += 1;
        max_cost = max_cost.max(inst.max_cost());
        duals.push(run_method(&inst, Method::Cold, None)?.duals);
    }
    let predictor = erm_median(&DualSample::new(duals)?)?.clamp(max_cost);

    for t in 0..cfg.n_test as u64 {
        let (inst, clamped) = sampler.sample(cfg.s_train as u64 + t)?;
        out.clamped_costs += clamped;
        out.instances += 1;
        evaluate(&inst, &cfg.methods, Some(&predictor.duals), |method, m| {
            out.rows.push(row(method, Mode::Batch, t, cfg.seed, m));
        })?;
    }
    Ok(out)
}

/// Streams `steps` instances per repetition. At step `t` the prediction is
/// the running median of the optimal duals from steps `1..t`; at step 1 it
/// is the zero dual, so the learned methods start out as the cold start.
pub fn run_online(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = ExperimentOutput::default();
    for rep in 0..cfg.repetitions as u64 {
        let seed = cfg.seed.wrapping_add(rep);
        let sampler = Sampler::new(&cfg.generator, seed)?;
        let mut online: Option<OnlineMedian> = None;
        let mut max_cost = 0;
        for t in 1..=cfg.steps as u64 {
            let (inst, clamped) = sampler.sample(t - 1)?;
            out.clamped_costs += clamped;
            out.instances += 1;
            let prediction = match &online {
                Some(o) => o.predictor(),
                None => Some(cold_start_dual(&inst)),
            }
            .map(|y| clamp_dual(y, max_cost));
            let y_star = evaluate(&inst, &cfg.methods, prediction.as_ref(), |method, m| {
                out.rows.push(row(method, Mode::Online, t, seed, m));
            })?;
            online
                .get_or_insert_with(|| OnlineMedian::new(inst.n_left(), inst.n_right()))
                .update(&y_star)?;
            max_cost = max_cost.max(inst.max_cost());
        }
    }
    Ok(out)
}

fn clamp_dual(mut y: DualVector, bound: i64) -> DualVector {
    for v in y.left.iter_mut().chain(y.right.iter_mut()) {
        *v = (*v).clamp(-bound, bound);
    }
    y
}

/// Dispatches on `cfg.mode`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.mode {
        Mode::Batch => run_batch(cfg),
        Mode::Online => run_online(cfg),
    }
}

/// Mean iterations per method (and step, when grouped by step) with a 95%
/// normal-approximation confidence half-width `1.96 * stderr`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub step: Option<u64>,
    pub count: usize,
    pub mean_iterations: f64,
    pub ci95_half_width: f64,
    pub mean_wall_time_s: f64,
    pub mean_projection_time_s: f64,
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Groups rows by method (and by step when `by_step`), in order of first
/// appearance.
pub fn summarize(rows: &[ResultRow], by_step: bool) -> Vec<MethodSummary> {
    let mut keys: Vec<(Method, Option<u64>)> = Vec::new();
    for r in rows {
        let key = (r.method, by_step.then_some(r.step));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, step)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && (step.is_none() || step == Some(r.step)))
                .collect();
            let iters: Vec<f64> = group.iter().map(|r| r.iterations as f64).collect();
            let (mean, ci) = mean_ci(&iters);
            let n = group.len() as f64;
            MethodSummary {
                method,
                step,
                count: group.len(),
                mean_iterations: mean,
                ci95_half_width: ci,
                mean_wall_time_s: group.iter().map(|r| r.wall_time_s).sum::<f64>() / n,
                mean_projection_time_s: group.iter().map(|r| r.projection_time_s).sum::<f64>() / n,
            }
        })
        .collect()
}

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "mode",
    "step",
    "iterations",
    "augmentations",
    "wall_time_s",
    "projection_time_s",
    "dual_gap",
    "seed",
];

/// Writes the header and one line per row, in row order.
pub fn write_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config(
            "refusing to write an empty result table".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            r.mode.as_str().to_string(),
            r.step.to_string(),
            r.iterations.to_string(),
            r.augmentations.to_string(),
            r.wall_time_s.to_string(),
            r.projection_time_s.to_string(),
            r.dual_gap.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config(
            "refusing to write an empty result table".into(),
        ));
    }
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::parse(1, "unexpected result header"));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn parse_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn type_model(n: usize, groups: usize, variance: u64) -> GeneratorConfig {
        GeneratorConfig::TypeModel(TypeModelConfig::new(n, groups, variance, 0))
    }

    fn small_batch(variance: u64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            s_train: 5,
            n_test: 4,
            ..ExperimentConfig::new(Mode::Batch, type_model(12, 3, variance), seed)
        }
    }

    #[test]
    fn parses_toml_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            mode = "online"
            seed = 9
            methods = ["cold", "learned+project"]
            [generator]
            kind = "type-model"
            n = 10
            groups = 5
            variance = 3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Online);
        assert_eq!((cfg.steps, cfg.repetitions, cfg.s_train), (20, 20, 20));
        assert_eq!(cfg.methods, vec![Method::Cold, Method::LearnedProject]);
        assert_eq!(cfg.generator, type_model(10, 5, 3));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "mode = \"batch\"\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 3\nvariance = 1\n",
            "mode = \"batch\"\nmethods = []\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 5\nvariance = 1\n",
            "mode = \"batch\"\ns_train = 0\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 5\nvariance = 1\n",
            "mode = \"sideways\"\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 5\nvariance = 1\n",
            "mode = \"batch\"\ntypo = 1\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 5\nvariance = 1\n",
            "mode = \"batch\"\n[generator]\nkind = \"type-model\"\nn = 10\ngroups = 5\nvariance = 1\nextra = 2\n",
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn zero_variance_batch_needs_no_iterations() {
        let out = run_batch(&small_batch(0, 3)).unwrap();
        assert_eq!(out.rows.len(), 4 * 3);
        for r in out.rows.iter().filter(|r| r.method != Method::Cold) {
            assert_eq!(r.iterations, 0, "{r:?}");
        }
    }

    #[test]
    fn cold_rows_ignore_training() {
        let a = run_batch(&small_batch(20, 1)).unwrap();
        let b = run_batch(&ExperimentConfig {
            s_train: 1,
            n_test: 4,
            ..small_batch(20, 1)
        })
        .unwrap();
        // Test instances shift with s_train, so compare against fresh solves.
        let sampler = Sampler::new(&type_model(12, 3, 20), 1).unwrap();
        for (out, offset) in [(&a, 5), (&b, 1)] {
            for r in out.rows.iter().filter(|r| r.method == Method::Cold) {
                let (inst, _) = sampler.sample(offset + r.step).unwrap();
                let sol =
                    solve_mwpm(&inst, &cold_start_dual(&inst), SolveOptions::default()).unwrap();
                assert_eq!(r.iterations, sol.stats.iterations);
            }
        }
    }

    #[test]
    fn online_first_step_matches_cold() {
        let cfg = ExperimentConfig {
            steps: 4,
            repetitions: 2,
            ..ExperimentConfig::new(Mode::Online, type_model(12, 3, 10), 5)
        };
        let out = run_online(&cfg).unwrap();
        assert_eq!(out.rows.len(), 4 * 2 * 3);
        for seed in [5, 6] {
            let first: Vec<&ResultRow> = out
                .rows
                .iter()
                .filter(|r| r.step == 1 && r.seed == seed)
                .collect();
            assert_eq!(first[0].method, Method::Cold);
            assert_eq!(first[1].iterations, first[0].iterations);
            assert_eq!(first[1].dual_gap, first[0].dual_gap);
        }
    }

    #[test]
    fn online_zero_variance_learns_after_one_step() {
        let cfg = ExperimentConfig {
            steps: 3,
            repetitions: 1,
            methods: vec![Method::LearnedProject],
            ..ExperimentConfig::new(Mode::Online, type_model(12, 3, 0), 2)
        };
        let out = run_online(&cfg).unwrap();
        assert!(out
            .rows
            .iter()
            .filter(|r| r.step >= 2)
            .all(|r| r.iterations == 0));
    }

    #[test]
    fn summary_statistics() {
        let mk = |method, iterations| ResultRow {
            method,
            mode: Mode::Batch,
            step: 0,
            iterations,
            augmentations: 0,
            wall_time_s: 1.0,
            projection_time_s: 0.0,
            dual_gap: 0,
            seed: 0,
        };
        let rows = vec![
            mk(Method::Cold, 2),
            mk(Method::Cold, 4),
            mk(Method::LearnedProject, 1),
        ];
        let s = summarize(&rows, false);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean_iterations, 3.0);
        // Sample sd sqrt(2), stderr 1.
        assert!((s[0].ci95_half_width - 1.96).abs() < 1e-12);
        assert_eq!(s[1].ci95_half_width, 0.0);
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let out = run_batch(&small_batch(10, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        emit_csv(&out.rows, &path).unwrap();
        assert_eq!(parse_csv(&path).unwrap(), out.rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "method,mode,step,iterations,augmentations,wall_time_s,projection_time_s,dual_gap,seed\n"
        ));

        let again = run_batch(&small_batch(10, 4)).unwrap();
        let strip = |rows: &[ResultRow]| -> Vec<ResultRow> {
            rows.iter()
                .map(|r| ResultRow {
                    wall_time_s: 0.0,
                    projection_time_s: 0.0,
                    ..r.clone()
                })
                .collect()
        };
        assert_eq!(strip(&out.rows), strip(&again.rows));
        assert!(emit_csv(&[], &path).is_err());
    }
}
