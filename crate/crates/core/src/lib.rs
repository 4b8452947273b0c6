//! Simulation and verification of the ratio structure of the largest points
//! of a Poisson process as its intensity vanishes.
//!
//! Points are generated by inverting the tail of the Lévy measure at unit
//! Poisson arrivals. Trial loops run on rayon when the `parallel` feature is
//! enabled (the default) and sequentially otherwise; both paths produce
//! identical output for a given seed.

pub mod error;
pub mod io;
pub mod limit_laws;
pub mod par;
pub mod quad;
pub mod rng;
pub mod samplers;
pub mod special;
pub mod tail_models;
pub mod verify;

pub use error::{Error, Result};
pub use par::Execution;
pub use rng::RngStream;
pub use tail_models::{InverseSpec, TailIndex, TailKind, TailModel};
