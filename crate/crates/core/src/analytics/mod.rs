//! Similarity, clustering and retrieval evaluation over latent profiles.

pub mod cluster;
pub mod retrieval;
pub mod similarity;

pub use cluster::{hamming_distance, hamming_kmeans, rand_index, rand_index_overlap, ClusterAssignment};
pub use retrieval::{average_precision, map_at_k, ndcg, ndcg_at_k, rank_by_distance, RetrievalResult};
pub use similarity::{jaccard, spearman};
