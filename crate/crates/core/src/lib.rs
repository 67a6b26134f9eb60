//! Adaptive client sampling for federated learning.
//!
//! The server picks `K` of `M` clients each round and only learns about the
//! clients it picked. This crate learns the sampling distribution online with
//! stochastic mirror descent over the simplex with a floor `alpha / M` on every
//! entry, combines several learning rates with exponential weights, and ships
//! a small federated SGD simulator for measuring the result.
//!
//! ```
//! use fedsamp::{floor_kl_projection, FloorConstraint};
//!
//! let c = FloorConstraint::new(0.4, 2).unwrap();
//! let p = floor_kl_projection(&[0.1, 0.9], &c).unwrap();
//! assert!((p[0] - 0.2).abs() < 1e-12);
//! ```

pub mod ensemble;
pub mod error;
pub mod feedback;
pub mod osmd;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod simplex;
pub mod wor;

pub use ensemble::{BlockSchedule, DoublingState, EnsembleState, ExpertGrid};
pub use error::{Error, Result};
pub use feedback::{BanditFeedback, Observation, Selection};
pub use osmd::{OsmdState, RateSchedule};
pub use rng::RngStream;
pub use sampler::{BanditSampler, UniformSampler};
pub use simplex::{floor_kl_projection, FloorConstraint, PositiveWeights, SimplexPoint};
pub use wor::{LocalUpdate, LocalUpdateSet, OrderedSelection};
