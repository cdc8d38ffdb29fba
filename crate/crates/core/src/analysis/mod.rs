//! Statistics linking layers and latent variables.

mod cosine;
mod profiles;
mod ranking;
mod spectral;
mod stats;

pub use cosine::{cosine_distance, nearest_maps_by_cosine, MapDistance};
pub use profiles::{build_profiles, mean_maps, ActivationProfile, Condition};
pub use ranking::{
    fit_logistic, permutation_threshold, rank_by_magnitude, rank_latents, LatentRanking, RankMethod, RankedLatent,
};
pub use spectral::{
    jacobi_eigen, kmeans, partition_of, spectral_cluster, ClusterResult, KMeans, DEFAULT_GAMMA, DEFAULT_K,
    KMEANS_RESTARTS,
};
pub use stats::{linear_regression, pearson, t_two_sided_p, Regression};
