//! Scan drivers: enhancement versus detuning, finite-bandwidth response
//! spectra and backscattering cone profiles.

mod cone;
mod response;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::{AtomSpec, GroundPopulation};
use crate::medium::CloudSpec;
use crate::transport::{
    enhancement, Accumulator, Channel, Controls, Enhancement, LaserSpec, Polarization, Setup, Simulation, ThermalSpec,
    TransportError,
};

pub use cone::{cone_profile, convolve_instrument, fit_lorentzian, ConeProfile, LorentzianFit};
pub use response::{response_spectrum, ResponseSpectrum, ResponseStatistic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("invalid scan: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("zero ladder intensity at detuning {detuning} in channel {channel}")]
    ZeroLadder { detuning: f64, channel: Channel },
    #[error("angular grid spacing {spacing} rad does not resolve the instrument width {fwhm} rad by 8 points")]
    GridTooCoarse { spacing: f64, fwhm: f64 },
}

/// Parameters shared by all scan drivers.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub atom: AtomSpec,
    pub cloud: CloudSpec,
    /// Polarization, bandwidth and direction; the carrier detuning is taken
    /// from `detunings` for scans and used as is for single-point drivers.
    pub laser: LaserSpec,
    pub thermal: ThermalSpec,
    pub population: GroundPopulation,
    pub controls: Controls,
    pub channels: Vec<Channel>,
    /// Carrier detunings in units of gamma.
    pub detunings: Vec<f64>,
    pub trajectories: u64,
    pub seed: u64,
}

impl ScanConfig {
    /// Unpolarized cold atoms in the default scan cloud, both analyzers of the laser polarization.
    pub fn new(atom: AtomSpec, laser: LaserSpec, detunings: Vec<f64>, trajectories: u64, seed: u64) -> Self {
        let population = GroundPopulation::isotropic(atom.ground_f);
        let channels = Channel::ALL.into_iter().filter(|c| c.compatible(&laser)).collect();
        ScanConfig {
            atom,
            cloud: CloudSpec::scan_default(),
            laser,
            thermal: ThermalSpec::cold(),
            population,
            controls: Controls::default(),
            channels,
            detunings,
            trajectories,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SpectraError> {
        let mut problems = Vec::new();
        if self.detunings.is_empty() {
            problems.push("detuning grid is empty".into());
        }
        if self.detunings.iter().any(|d| !d.is_finite()) {
            problems.push("detuning grid must be finite".into());
        }
        if self.detunings.windows(2).any(|w| w[1] <= w[0]) {
            problems.push("detuning grid must be strictly increasing".into());
        }
        if self.trajectories == 0 {
            problems.push("trajectory budget must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SpectraError::Invalid(problems))
        }
    }

    pub(crate) fn setup(&self, detuning: f64) -> Setup {
        Setup {
            atom: self.atom.clone(),
            cloud: self.cloud.clone(),
            laser: LaserSpec { detuning, ..self.laser.clone() },
            thermal: self.thermal,
            population: self.population.clone(),
            controls: self.controls,
            channels: self.channels.clone(),
            theta_rad: Vec::new(),
            spectrum: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub channel: Channel,
    pub enhancement: Enhancement,
    /// Mean ladder and crossed intensity per order (index `order - 1`).
    pub ladder_by_order: Vec<f64>,
    pub crossed_by_order: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Carrier detuning, units of gamma.
    pub detuning: f64,
    pub channels: Vec<ChannelPoint>,
}

impl ScanPoint {
    pub fn channel(&self, channel: Channel) -> Option<&ChannelPoint> {
        self.channels.iter().find(|c| c.channel == channel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub gamma_mhz: f64,
    pub bandwidth: f64,
    pub kv0: f64,
    pub trajectories: u64,
    pub seed: u64,
}

impl ScanResult {
    /// (detuning, enhancement) series of one channel.
    pub fn series(&self, channel: Channel) -> Vec<(f64, Enhancement)> {
        self.points.iter().filter_map(|p| p.channel(channel).map(|c| (p.detuning, c.enhancement))).collect()
    }

    pub fn at(&self, detuning: f64, channel: Channel) -> Option<Enhancement> {
        self.points
            .iter()
            .find(|p| (p.detuning - detuning).abs() < 1e-9)
            .and_then(|p| p.channel(channel))
            .map(|c| c.enhancement)
    }
}

fn channel_point(acc: &Accumulator, detuning: f64) -> Result<ChannelPoint, SpectraError> {
    let e = enhancement(acc).map_err(|err| match err {
        TransportError::EmptyAccumulator => SpectraError::ZeroLadder { detuning, channel: acc.channel },
        other => other.into(),
    })?;
    let (ladder_by_order, crossed_by_order) = acc.per_order();
    Ok(ChannelPoint { channel: acc.channel, enhancement: e, ladder_by_order, crossed_by_order })
}

/// Enhancement spectrum over the detuning grid. Every grid point uses the
/// same seed, so neighbouring points are positively correlated.
pub fn scan_detuning(config: &ScanConfig) -> Result<ScanResult, SpectraError> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.detunings.len());
    for &detuning in &config.detunings {
        let sim = Simulation::new(config.setup(detuning))?;
        let accs = sim.run(config.seed, config.trajectories);
        let channels = accs.iter().map(|a| channel_point(a, detuning)).collect::<Result<Vec<_>, _>>()?;
        points.push(ScanPoint { detuning, channels });
    }
    Ok(ScanResult {
        points,
        gamma_mhz: config.atom.gamma_mhz,
        bandwidth: config.laser.bandwidth,
        kv0: config.thermal.kv0,
        trajectories: config.trajectories,
        seed: config.seed,
    })
}

/// Detuning scan of a medium fully oriented along the beam (stretched
/// M = +F population), probed with circular polarization.
pub fn scan_oriented(config: &ScanConfig) -> Result<ScanResult, SpectraError> {
    let Polarization::Helicity { helicity } = config.laser.polarization else {
        return Err(SpectraError::Invalid(vec!["oriented scans need a circularly polarized laser".into()]));
    };
    let f = config.atom.ground_f;
    let mut weights = vec![0.0; (2 * f + 1) as usize];
    // Orientation along the beam: the sublevel pumped by the probe helicity.
    if helicity > 0 {
        weights[(2 * f) as usize] = 1.0;
    } else {
        weights[0] = 1.0;
    }
    let population = GroundPopulation::new(f, weights).map_err(TransportError::from)?;
    scan_detuning(&ScanConfig { population, ..config.clone() })
}

/// One detuning scan per laser bandwidth (units of gamma).
pub fn scan_bandwidth(config: &ScanConfig, bandwidths: &[f64]) -> Result<Vec<ScanResult>, SpectraError> {
    bandwidths
        .iter()
        .map(|&bw| {
            let laser = LaserSpec { bandwidth: bw, ..config.laser.clone() };
            scan_detuning(&ScanConfig { laser, ..config.clone() })
        })
        .collect()
}

/// Monochromatic scan convolved afterwards with a Lorentzian laser line of
/// FWHM `bandwidth`, separately for ladder and crossed intensities. Kept for
/// comparison with per-trajectory frequency sampling; the grid must be
/// uniform and wide compared with `bandwidth`.
pub fn posthoc_bandwidth(result: &ScanResult, bandwidth: f64) -> ScanResult {
    let d: Vec<f64> = result.points.iter().map(|p| p.detuning).collect();
    let step = if d.len() > 1 { d[1] - d[0] } else { 1.0 };
    let half = 0.5 * bandwidth;
    let kernel = |x: f64| half / (std::f64::consts::PI * (x * x + half * half));
    let points = result
        .points
        .iter()
        .map(|p| {
            let channels = p
                .channels
                .iter()
                .map(|c| {
                    let (mut l, mut cr, mut norm) = (0.0, 0.0, 0.0);
                    for q in &result.points {
                        let k = kernel(p.detuning - q.detuning) * step;
                        let e = q.channel(c.channel).expect("channels are shared").enhancement;
                        l += k * e.ladder;
                        cr += k * e.crossed;
                        norm += k;
                    }
                    let (l, cr) = (l / norm, cr / norm);
                    let enhancement = Enhancement { x: 1.0 + cr / l, ladder: l, crossed: cr, ..c.enhancement };
                    ChannelPoint { enhancement, ..c.clone() }
                })
                .collect();
            ScanPoint { detuning: p.detuning, channels }
        })
        .collect();
    ScanResult { points, bandwidth, ..result.clone() }
}

/// Detuning grid from `lo` to `hi` inclusive in steps of `step`.
pub fn detuning_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}
