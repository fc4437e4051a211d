//! Metrics, synthetic benchmarks, and clustering evaluation.

mod cluster;
mod metrics;
mod synth;

pub use cluster::{
    adjusted_rand_index, kmeans, normalized_mutual_information, wcss, LabelVector,
    DEFAULT_KMEANS_ITERS, DEFAULT_RESTARTS,
};
pub use metrics::{
    column_mean_impute, default_ranks, per_group_grassmann, per_group_subspace_error,
    relative_frobenius_error, rmse_on, MetricValue, SUBSPACE_RANK_REL_TOL,
};
pub use synth::{
    generate_crossed_groups, generate_planted_groups, CrossedComponents, CrossedGroups,
    PlantedGroups, ScoreNormalization, SyntheticSpec,
};
