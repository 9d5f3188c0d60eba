//! Instance distributions: the synthetic type model and clustering-derived
//! Euclidean instances, plus point-data ingestion.

mod cluster;
mod points;
mod type_model;

pub use cluster::{
    cluster_model_instance, cluster_model_prepare, kmeans, ClusterModelConfig, ClusterPrep,
    Clustering,
};
pub use points::{
    load_points, resolve_dataset_path, save_points, LoadOptions, PointSet, DATA_DIR_ENV,
};
pub use type_model::{
    binomial_noise, type_model_base, type_model_instance, BaseWeights, NoisyInstance,
    TypeModelConfig,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
