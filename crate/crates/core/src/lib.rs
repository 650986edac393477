//! Spectral simulation of vector stochastic Allen-Cahn equations on the unit
//! torus, top Lyapunov exponent estimation, and closed-form evaluation of the
//! associated asymptotic bounds.

pub mod error;
pub mod experiments;
pub mod fft;
pub mod field;
pub mod integrator;
pub mod lyapunov;
pub mod noise;
pub mod output;
pub mod potential;
pub mod selftest;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use experiments::{ExperimentPlan, SyncReport};
pub use field::{Field, GridSpec, SpectralField};
pub use integrator::{Clock, Scheme, SimConfig, Trajectory};
pub use noise::NoiseStream;
pub use potential::{PotentialKind, PotentialSpec};
pub use lyapunov::{LyapunovOptions, LyapunovReport, TangentState};
pub use theory::{GaussianMoments, TheoryBound};
