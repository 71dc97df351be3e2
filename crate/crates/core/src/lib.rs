//! Point convolution on point clouds with kernels embedded in learnable
//! potential fields.
//!
//! A potential field assigns every point of the local neighborhood ball a
//! scalar potential; a Gaussian correlation turns that potential into a
//! kernel weight, so the zero-potential surface is where a point contributes
//! most. The crate provides:
//!
//! - [`geometry`] — point-cloud containers, radius neighborhoods (grid hash
//!   plus brute-force oracle), farthest point sampling, normal estimation
//! - [`fields`] — linear / normal-augmented / quadratic / small-MLP potential
//!   functions, the correlation function, and batched evaluation
//! - [`layers`] — differentiable layers with explicit forward/backward:
//!   potential convolution, point-wise convolution, batch norm, activations,
//!   global pooling, and softmax cross-entropy
//! - [`baselines`] — discrete (rigid kernel points) and continuous
//!   (weight-regressing MLP) convolution baselines behind the same interface
//! - [`model`] — host classifier/segmenter assembly and checkpointing
//! - [`train`] — optimizers, metrics, synthetic data, training loop, and the
//!   sparse-input evaluation sweep
//! - [`io`] — OFF/XYZ ingestion, mesh surface sampling, colored PLY export
//! - [`gradcheck`] — finite-difference verification of every analytic
//!   gradient
//! - [`viz`] — field visualization exports (argmax coloring, isosurface
//!   point sets)

pub mod baselines;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod model;
pub mod real;
pub mod train;
pub mod vec3;
pub mod viz;

pub use error::{Error, Result};
pub use fields::{correlation, correlation_with_grad, FieldBank, FieldKind};
pub use geometry::{
    brute_force_radius, estimate_normals, farthest_point_sampling, radius_neighbors, recenter,
    NeighborIndex, PointCloud,
};
pub use model::{KernelFamily, Model, ModelConfig, Task};
pub use real::Real;
pub use train::{Dataset, Metrics, TrainConfig};
