//! Core library of the `preictal` workspace: generating and storing
//! multichannel EEG segments, reducing their dimensionality with PCA
//! whitening plus a Gibbs-sampled sparse-source model, classifying windows
//! with stacked sparse autoencoders and a softmax head, and scoring the
//! whole chain under leave-one-out cross-validation.
//!
//! The math modules are generic over the scalar type (see [`num::Real`]);
//! the aliases below fix the shipped pipeline at `f32`, which roughly
//! halves training time. Model files store `f64` regardless, and the
//! correctness-sensitive tests instantiate the generic code at `f64`.

pub mod deepnet;
pub mod dimred;
pub mod eval;
pub mod mat;
pub mod num;
pub mod signal;
pub mod spectral;
pub mod store;

pub use num::Real;

/// Scalar the shipped pipeline runs at.
pub type Scalar = f32;

/// Dense matrix over the shipped scalar.
pub type Matrix = mat::Mat<Scalar>;

/// Fitted dimensionality-reduction pipeline over the shipped scalar.
pub type Pipeline = dimred::DimredPipeline<Scalar>;

/// Trained classifier network over the shipped scalar.
pub type Network = deepnet::StackedNetwork<Scalar>;
