//! Blind separation of delayed, non-dispersive signal mixtures.
//!
//! Given only an observation matrix of sensor recordings, this crate
//! estimates the number of sources, their waveforms, mixing weights and
//! per-sensor delays (shifted nonnegative matrix factorization with
//! stability-based model-order selection), then the source positions and
//! the propagation speed (weighted least squares on delay differences),
//! and finally posterior uncertainties (adaptive Metropolis sampling).

pub mod error;
pub mod io;
pub mod localization;
pub mod mcmc;
pub mod model;
pub mod pipeline;
pub mod selection;
pub mod solver;
pub mod synth;

mod assignment;
mod optim;
mod seed;
mod spectrum;

pub use error::{Error, Result};
