//! Sphere-based knowledge graph embeddings with exact set retrieval.
//!
//! Entities are embedded as spheres (a center vector plus a scalar radius)
//! and relations as blockwise rotations of the center space. A fact (h, r, t)
//! holds when the rotated head sphere and the tail sphere are non-disjoint,
//! which turns head/tail queries into exact set-retrieval tests instead of
//! ranked lists.
//!
//! Modules:
//! - [`kg`]: triple files, vocabularies, ground-truth answer index, relation
//!   mapping properties.
//! - [`rotation`]: 2D angle, 3D quaternion, and kD Householder-chain rotation
//!   kernels with exact inverses.
//! - [`model`]: learnable parameters, distances, and the sphere-intersection
//!   retrieval criterion.
//! - [`train`]: negative sampling, self-adversarial sigmoid loss, analytic
//!   gradients, Adam loop.
//! - [`eval`]: set retrieval, top-l baselines, F1 / retrieve-rate metrics,
//!   inference-pattern suite, radius statistics.
//! - [`checkpoint`]: versioned binary serialization of trained models.

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod kg;
pub mod model;
pub mod rotation;
pub mod train;

pub use error::{Result, SphereError};
