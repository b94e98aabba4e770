//! Language similarity from learner English and typology prediction.
//!
//! The core is generic over the floating-point type; the aliases at the
//! crate root fix it to `f64` (the default) or `f32`.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hierarchy;
pub mod nli;
pub mod optim;
pub mod pipeline;
pub mod predict;
pub mod scalar;
pub mod similarity;
pub mod synth;
pub mod wals;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NliModel64 = nli::NliModel<f64>;
pub type NliModel32 = nli::NliModel<f32>;
pub type SimilarityMatrix64 = similarity::SimilarityMatrix<f64>;
pub type SimilarityMatrix32 = similarity::SimilarityMatrix<f32>;
pub type ClusterTree64 = hierarchy::ClusterTree<f64>;
pub type ClusterTree32 = hierarchy::ClusterTree<f32>;
