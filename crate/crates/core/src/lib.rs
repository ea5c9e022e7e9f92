//! Latent-space network models with hyperbolic (Poincaré disk) or
//! spherical (S²) latent coordinates.
//!
//! Edges form independently with `logit p_ij = α − d(z_i, z_j)`. The crate
//! covers simulation, anchor-based removal of the isometry
//! non-identifiability, Metropolis-within-Gibbs posterior sampling,
//! score-function black-box variational inference, and posterior-predictive
//! summaries.
//!
//! With the default `parallel` feature, dyad sums, Monte Carlo batches and
//! embedding restarts run on rayon. Results do not depend on the thread
//! count: every parallel reduction combines per-item partial results in a
//! fixed order.

pub mod bbvi;
pub mod cli;
pub mod data;
pub mod distributions;
pub mod evaluate;
pub mod geometry;
pub mod identifiability;
pub mod init;
pub mod mcmc;
pub mod model;
pub mod par;
pub mod special;

pub use geometry::{DiskPoint, Geometry, LatentPoint, SpherePoint};
pub use model::{LatentConfiguration, Network, PriorSpec, ThetaZ};
