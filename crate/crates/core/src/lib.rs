//! Sparse system identification with l0-norm constrained LMS adaptive filters.
//!
//! The crate is split the way an experiment is put together:
//!
//! - [`filters`]: the LMS / NLMS / l0-LMS / l0-NLMS recursions, the zero
//!   attractor and the sequential one-in-Q partial update of the attractor cache.
//! - [`systems`]: ground-truth sparse impulse responses (general and clustered)
//!   and abrupt echo-path changes.
//! - [`signals`]: seeded white and AR(1) excitation, power normalization and
//!   desired-signal synthesis.
//! - [`sim`]: single trials, Monte-Carlo ensembles, MSD learning curves,
//!   steady-state statistics and the three reference experiment presets.
//! - [`config`]: the flat `key = value` experiment description format.

pub mod config;
pub mod error;
pub mod filters;
pub mod signals;
pub mod sim;
pub mod systems;

pub use error::{Error, Result};
pub use filters::{AlgorithmConfig, FilterState, InputTap, Regressor, Variant};
pub use sim::{LearningCurve, SteadyStateStats, TrialConfig};
pub use systems::{ChangeEvent, ImpulseResponse};
