//! Monte-Carlo simulation of coherent backscattering of near-resonant light
//! from a cold gas of multilevel atoms.
//!
//! The crate is organised bottom-up:
//!
//! * [`atomic`]: angular momentum algebra, Zeeman-resolved scattering tensors, cross sections.
//! * [`medium`]: Gaussian cloud, column densities, free-path sampling.
//! * [`transport`]: trajectory sampling, direct/reciprocal path amplitudes, accumulators.
//! * [`spectra`]: detuning scans, bandwidth response, backscattering cones.
//! * [`cli`]: configuration files, orchestration and output writers.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod cli;
pub mod geometry;
pub mod medium;
pub mod spectra;
pub mod transport;
