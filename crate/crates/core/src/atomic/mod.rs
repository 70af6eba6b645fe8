//! Angular-momentum algebra, Zeeman-resolved scattering amplitudes and cross
//! sections of a hyperfine F -> {F'} transition manifold.

pub mod angular;
pub mod levels;
pub mod scattering;

use thiserror::Error;

pub use angular::{clebsch_gordan, dipole_cg, wigner_3j, wigner_6j, AngularError};
pub use levels::{AtomSpec, ExcitedLevel, GroundPopulation, PopulationPreset, ZeemanState};
pub use scattering::{
    gauss_legendre, normalize_differential, phase, scattering_amplitude, total_cross_section, CMat3, ScatteringModel,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtomicError {
    #[error("invalid atomic configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("differential normalization did not converge (coarse {coarse}, fine {fine})")]
    Quadrature { coarse: f64, fine: f64 },
}
