//! # embedot
//!
//! Treats fixed-row-count embedding matrices (for example `77 x 768` CLIP
//! prompt embeddings) as uniform point clouds and interpolates between them
//! along Wasserstein-2 geodesics.
//!
//! - [`cloud`]: the matrix/point-cloud equivalence and multiset comparison.
//! - [`assignment`]: exact linear assignment plus a brute-force reference.
//! - [`geometry`]: `W2`, displacement interpolation, barycenters, path length.
//! - [`coupling`]: optimal, row-order and seeded random couplings.
//! - [`attention`]: scaled dot-product attention and its permutation checks.
//! - [`stats`] / [`report`]: perceptual path length and Wilcoxon tests per group.
//! - [`io`] / [`pipeline`]: `EPC1` files, manifests, batch runs and reports.
//!
//! The math is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision used by the file formats and the pipeline.
//!
//! ```
//! use embedot::{wasserstein_distance, PointCloud64};
//!
//! let mu = PointCloud64::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
//! let nu = PointCloud64::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
//! let (w2, coupling) = wasserstein_distance(&mu, &nu).unwrap();
//! assert_eq!(w2, 2f64.sqrt());
//! assert_eq!(coupling.sigma.as_slice(), &[1, 0]);
//! ```

pub mod assignment;
pub mod attention;
pub mod cloud;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod pixel;
pub mod report;
pub mod scalar;
pub mod stats;

pub use assignment::{
    build_cost_matrix, solve_assignment_bruteforce, solve_assignment_exact, Assignment, CostMatrix,
};
pub use attention::{attention, check_cross_attention_invariance, AttentionWeights};
pub use cloud::{cloud_to_matrix, clouds_equivalent, matrix_to_cloud, Permutation, PointCloud};
pub use coupling::{
    clip_coupling, couple, ot_coupling, random_coupling, Coupling, Method, MethodTag, Pairing,
};
pub use error::{Error, Result};
pub use geometry::{
    barycenter, coupling_cost, discretized_length, geodesic_point, path_length, sample_path,
    wasserstein_distance, GeodesicPath,
};
pub use matrix::{EmbeddingMatrix, Matrix};
pub use scalar::Scalar;
pub use stats::{ppl, wilcoxon_signed_rank, ScoreSeries, Stars, WilcoxonResult};

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type PointCloud64 = PointCloud<f64>;
pub type PointCloud32 = PointCloud<f32>;
pub type CostMatrix64 = CostMatrix<f64>;
pub type Coupling64 = Coupling<f64>;
pub type Coupling32 = Coupling<f32>;
pub type GeodesicPath64 = GeodesicPath<f64>;
pub type AttentionWeights64 = AttentionWeights<f64>;
