//! Moderately interacting particle systems with mollified kernels: grid functions, kernel
//! families, coupled particle simulation, mean-field and two-particle Liouville solvers, and
//! relative-entropy diagnostics.

pub mod diagnostics;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod error;
pub mod gridfn;
pub mod kernels;
pub mod meanfield_pde;
pub mod numerics;
pub mod rng;
pub mod sde;

pub use error::{Error, ErrorClass, Result};
pub use gridfn::{FourierMultiplier, Grid, GridFunction, Norm, Spectrum, Tolerances};
