//! Monte-Carlo multiple-scattering engine.
//!
//! A trajectory is a chain of scattering events inside the cloud. Each event
//! contributes, by local estimation, an amplitude for light leaving the chain
//! toward the detector, together with the amplitude of the same chain
//! traversed in reverse. Ladder and crossed intensities are accumulated from
//! these amplitude pairs.
//!
//! Frequencies are expressed in units of gamma relative to the reference
//! transition; atom velocities in units of the most probable speed v0.

mod accumulator;
mod amplitude;
mod engine;
mod extinction;
mod sampling;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::AtomicError;
use crate::geometry::{circular, linear, CVec3, Vec3};
use crate::medium::MediumError;

pub use accumulator::{enhancement, jackknife, Accumulator, Block, Enhancement, FixedSum, SpectrumBins};
pub use amplitude::{path_amplitudes, PathPair};
pub use engine::{Setup, Simulation, DEFAULT_BLOCK_SIZE};
pub use extinction::Extinction;
pub use sampling::{sample_laser_frequency, sample_velocity, truncated_cauchy_cdf, LASER_TRUNCATION};
pub use trajectory::{ScatterEvent, Segment, Termination, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error(transparent)]
    Atomic(#[from] AtomicError),
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error("invalid transport settings: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("accumulator is empty or has zero ladder intensity")]
    EmptyAccumulator,
    #[error("accumulators with different layouts cannot be merged")]
    LayoutMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Polarization {
    /// Linear polarization at `angle_deg` from the x axis of the transverse frame.
    Linear { angle_deg: f64 },
    /// Circular polarization of helicity ±1 with respect to the beam.
    Helicity { helicity: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSpec {
    /// Carrier detuning ω_L - ω_0, units of gamma.
    pub detuning: f64,
    /// Lorentzian FWHM γ_L, units of gamma.
    #[serde(default)]
    pub bandwidth: f64,
    #[serde(default = "unit_intensity")]
    pub intensity: f64,
    pub polarization: Polarization,
    #[serde(default = "beam_axis")]
    pub direction: [f64; 3],
}

fn unit_intensity() -> f64 {
    1.0
}

fn beam_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl LaserSpec {
    pub fn new(detuning: f64, polarization: Polarization) -> Self {
        LaserSpec { detuning, bandwidth: 0.0, intensity: 1.0, polarization, direction: beam_axis() }
    }

    pub fn helicity(detuning: f64) -> Self {
        Self::new(detuning, Polarization::Helicity { helicity: 1 })
    }

    pub fn linear(detuning: f64) -> Self {
        Self::new(detuning, Polarization::Linear { angle_deg: 0.0 })
    }

    pub fn for_channel(detuning: f64, channel: Channel) -> Self {
        if channel.is_helicity() {
            Self::helicity(detuning)
        } else {
            Self::linear(detuning)
        }
    }

    pub fn beam_direction(&self) -> Vec3 {
        Vec3::from(self.direction).normalize()
    }

    pub fn polarization_vector(&self) -> CVec3 {
        let dir = self.beam_direction();
        match self.polarization {
            Polarization::Linear { angle_deg } => linear(&dir, angle_deg.to_radians()),
            Polarization::Helicity { helicity } => circular(&dir, helicity),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !self.detuning.is_finite() {
            problems.push("laser.detuning must be finite".into());
        }
        if !(self.bandwidth >= 0.0) || !self.bandwidth.is_finite() {
            problems.push(format!("laser.bandwidth = {} must be >= 0", self.bandwidth));
        }
        if !(self.intensity > 0.0) {
            problems.push(format!("laser.intensity = {} must be positive", self.intensity));
        }
        if let Polarization::Helicity { helicity } = self.polarization {
            if helicity != 1 && helicity != -1 {
                problems.push(format!("laser.polarization.helicity = {helicity} must be +1 or -1"));
            }
        }
        let n = Vec3::from(self.direction).norm();
        if !(n > 0.0) || !n.is_finite() {
            problems.push("laser.direction must be a non-zero vector".into());
        }
        problems
    }
}

/// Maxwell-Boltzmann gas characterised by k v0 in units of gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub kv0: f64,
}

impl ThermalSpec {
    pub fn cold() -> Self {
        ThermalSpec { kv0: 0.0 }
    }

    /// k v0 / gamma for temperature `t_kelvin`, with v0 = sqrt(2 k_B T / m).
    pub fn from_temperature(t_kelvin: f64, mass_kg: f64, wavelength_nm: f64, gamma_mhz: f64) -> Self {
        const K_B: f64 = 1.380_649e-23;
        let v0 = (2.0 * K_B * t_kelvin / mass_kg).sqrt();
        let k = 2.0 * std::f64::consts::PI / (wavelength_nm * 1e-9);
        let gamma = 2.0 * std::f64::consts::PI * gamma_mhz * 1e6;
        ThermalSpec { kv0: k * v0 / gamma }
    }
}

/// Polarization analyzer relative to the incident polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "ll")]
    LinPar,
    #[serde(rename = "lperp")]
    LinPerp,
    #[serde(rename = "hh")]
    HelPar,
    #[serde(rename = "hperp")]
    HelPerp,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::LinPar, Channel::LinPerp, Channel::HelPar, Channel::HelPerp];

    pub fn is_helicity(self) -> bool {
        matches!(self, Channel::HelPar | Channel::HelPerp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::LinPar => "ll",
            Channel::LinPerp => "lperp",
            Channel::HelPar => "hh",
            Channel::HelPerp => "hperp",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Analyzer vector for backscattered light, given the incident polarization
    /// and beam direction.
    pub fn analyzer(self, laser: &LaserSpec) -> CVec3 {
        let e_in = laser.polarization_vector();
        match self {
            Channel::LinPar => e_in,
            Channel::LinPerp => {
                let dir = laser.beam_direction();
                let rotated = dir.cross(&Vec3::new(e_in.x.re, e_in.y.re, e_in.z.re));
                rotated.map(|c| num_complex::Complex64::new(c, 0.0))
            }
            // Same helicity with respect to the reversed direction.
            Channel::HelPar => e_in.map(|c| c.conj()),
            Channel::HelPerp => e_in,
        }
    }

    pub fn compatible(self, laser: &LaserSpec) -> bool {
        matches!(
            (self.is_helicity(), laser.polarization),
            (true, Polarization::Helicity { .. }) | (false, Polarization::Linear { .. })
        )
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSampling {
    /// Uniform on the sphere with weight 4π.
    #[default]
    Isotropic,
    /// Dipole radiation pattern of the field scattered along the direct path.
    PhaseFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttenuationModel {
    /// Extinction of the unpolarized ground state.
    Isotropic,
    /// Extinction of the configured population for the incident polarization.
    /// Identical to `Isotropic` for an unpolarized population.
    #[default]
    PopulationWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Controls {
    pub max_order: usize,
    pub roulette_threshold: f64,
    pub direction_sampling: DirectionSampling,
    pub attenuation: AttenuationModel,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            max_order: 30,
            roulette_threshold: 1e-4,
            direction_sampling: DirectionSampling::Isotropic,
            attenuation: AttenuationModel::PopulationWeighted,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.max_order == 0 {
            problems.push("max_order must be at least 1".into());
        }
        if !(self.roulette_threshold >= 0.0 && self.roulette_threshold < 1.0) {
            problems.push(format!("roulette_threshold = {} must lie in [0, 1)", self.roulette_threshold));
        }
        problems
    }
}
