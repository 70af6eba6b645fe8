//! Run configuration files.
//!
//! A run is described by a TOML file with dotted sections. The file schema
//! ([`ConfigFile`]) is kept separate from the resolved [`RunConfig`] so that
//! command-line overrides can be applied before validation and the final
//! file can be echoed into the metadata sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::{AtomSpec, ExcitedLevel, PopulationPreset};
use crate::medium::CloudSpec;
use crate::spectra::{detuning_grid, ScanConfig};
use crate::transport::{Channel, Controls, LaserSpec, Polarization, ThermalSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanType {
    Detuning,
    Oriented,
    Bandwidth,
    Response,
    Cone,
}

impl ScanType {
    pub fn name(self) -> &'static str {
        match self {
            ScanType::Detuning => "detuning",
            ScanType::Oriented => "oriented",
            ScanType::Bandwidth => "bandwidth",
            ScanType::Response => "response",
            ScanType::Cone => "cone",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ScanType::Detuning, ScanType::Oriented, ScanType::Bandwidth, ScanType::Response, ScanType::Cone]
            .into_iter()
            .find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomPreset {
    #[default]
    Rb85D2,
    Rb85SingleLine,
    ClassicalDipole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyUnit {
    #[default]
    Gamma,
    Mhz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationKind {
    #[default]
    Helicity,
    Linear,
}

/// `[atom]`: a preset with any of its fields replaced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    #[serde(default)]
    pub preset: AtomPreset,
    pub ground_f: Option<i32>,
    pub gamma_mhz: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub mass_kg: Option<f64>,
    pub sigma0_cm2: Option<f64>,
    pub excited: Option<Vec<ExcitedLevel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSection {
    pub n0_cm3: f64,
    /// Isotropic radius; ignored when `radii_mm` is given.
    pub r0_mm: Option<f64>,
    pub radii_mm: Option<[f64; 3]>,
    #[serde(default)]
    pub center_mm: [f64; 3],
}

impl Default for CloudSection {
    fn default() -> Self {
        let c = CloudSpec::scan_default();
        CloudSection { n0_cm3: c.n0_cm3, r0_mm: Some(c.radii_mm[0]), radii_mm: None, center_mm: c.center_mm }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    #[serde(default)]
    pub polarization: PolarizationKind,
    #[serde(default = "plus_one")]
    pub helicity: i32,
    #[serde(default)]
    pub angle_deg: f64,
    /// Carrier detuning for single-point scans (response, cone), in `unit`.
    #[serde(default)]
    pub detuning: f64,
    /// Lorentzian FWHM, in `unit`.
    #[serde(default)]
    pub bandwidth: f64,
    #[serde(default)]
    pub unit: FrequencyUnit,
    #[serde(default = "beam_axis")]
    pub direction: [f64; 3],
}

fn plus_one() -> i32 {
    1
}

fn beam_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl Default for LaserSection {
    fn default() -> Self {
        LaserSection {
            polarization: PolarizationKind::Helicity,
            helicity: 1,
            angle_deg: 0.0,
            detuning: 0.0,
            bandwidth: 0.0,
            unit: FrequencyUnit::Gamma,
            direction: beam_axis(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    /// One series per value, units of gamma.
    #[serde(default = "cold")]
    pub kv0: Vec<f64>,
}

fn cold() -> Vec<f64> {
    vec![0.0]
}

impl Default for ThermalSection {
    fn default() -> Self {
        ThermalSection { kv0: cold() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub preset: PopulationPreset,
}

impl Default for PopulationSection {
    fn default() -> Self {
        PopulationSection { preset: PopulationPreset::Isotropic }
    }
}

/// `[grid]`: either an explicit list or `min`, `max`, `step`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default)]
    pub unit: FrequencyUnit,
    pub detunings: Option<Vec<f64>>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthSection {
    /// Laser FWHM values, units of gamma.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    #[serde(default = "theta_max")]
    pub theta_max_urad: f64,
    #[serde(default = "theta_step")]
    pub theta_step_urad: f64,
    /// Instrument FWHM; 0 disables the convolution.
    #[serde(default = "instrument")]
    pub instrument_fwhm_urad: f64,
}

fn theta_max() -> f64 {
    5000.0
}

fn theta_step() -> f64 {
    12.5
}

fn instrument() -> f64 {
    100.0
}

impl Default for ConeSection {
    fn default() -> Self {
        ConeSection { theta_max_urad: theta_max(), theta_step_urad: theta_step(), instrument_fwhm_urad: instrument() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSection {
    pub bins: usize,
}

impl Default for ResponseSection {
    fn default() -> Self {
        ResponseSection { bins: 40 }
    }
}

/// On-disk schema. Every section except the top-level keys is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub scan: ScanType,
    /// Trajectories per grid point.
    pub trajectories: u64,
    /// Analyzer channels; all channels matching the laser when absent.
    pub channels: Option<Vec<Channel>>,
    /// Worker threads; 0 or absent uses every core.
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub atom: AtomSection,
    #[serde(default)]
    pub cloud: CloudSection,
    #[serde(default)]
    pub laser: LaserSection,
    #[serde(default)]
    pub thermal: ThermalSection,
    #[serde(default)]
    pub population: PopulationSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub bandwidth: BandwidthSection,
    #[serde(default)]
    pub cone: ConeSection,
    #[serde(default)]
    pub response: ResponseSection,
    #[serde(default)]
    pub controls: Controls,
}

/// Validated run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scan: ScanType,
    pub seed: u64,
    pub trajectories: u64,
    pub workers: usize,
    pub output: PathBuf,
    pub atom: AtomSpec,
    pub cloud: CloudSpec,
    pub laser: LaserSpec,
    pub kv0: Vec<f64>,
    pub population: PopulationPreset,
    pub channels: Vec<Channel>,
    /// Detuning grid, units of gamma.
    pub detunings: Vec<f64>,
    /// Laser FWHM values of a bandwidth scan, units of gamma.
    pub bandwidths: Vec<f64>,
    pub theta_rad: Vec<f64>,
    pub instrument_fwhm_rad: Option<f64>,
    pub response_bins: usize,
    pub controls: Controls,
}

impl RunConfig {
    /// Engine configuration for the series with thermal width `kv0`.
    pub fn scan_config(&self, kv0: f64) -> ScanConfig {
        let mut cfg = ScanConfig::new(
            self.atom.clone(),
            self.laser.clone(),
            self.detunings.clone(),
            self.trajectories,
            self.seed,
        );
        cfg.cloud = self.cloud.clone();
        cfg.thermal = ThermalSpec { kv0 };
        cfg.population = self.population.build(self.atom.ground_f);
        cfg.controls = self.controls;
        cfg.channels = self.channels.clone();
        if cfg.detunings.is_empty() {
            cfg.detunings = vec![self.laser.detuning];
        }
        cfg
    }
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    read_config_file(path)?.resolve()
}

pub fn read_config_file(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.to_path_buf(), message },
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<ConfigFile, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::from("<input>"), message: e.to_string() })
}

fn resolve_atom(section: &AtomSection, problems: &mut Vec<String>) -> Option<AtomSpec> {
    let mut atom = match section.preset {
        AtomPreset::Rb85D2 => AtomSpec::rb85_d2(),
        AtomPreset::Rb85SingleLine => AtomSpec::rb85_single_line(),
        AtomPreset::ClassicalDipole => AtomSpec::classical_dipole(),
    };
    if let Some(v) = section.ground_f {
        atom.ground_f = v;
    }
    if let Some(v) = section.gamma_mhz {
        atom.gamma_mhz = v;
    }
    if let Some(v) = section.wavelength_nm {
        atom.wavelength_nm = v;
    }
    if let Some(v) = section.mass_kg {
        atom.mass_kg = v;
    }
    if let Some(v) = section.sigma0_cm2 {
        atom.sigma0_cm2 = v;
    }
    if let Some(v) = &section.excited {
        atom.excited = v.clone();
    }
    match atom.validate() {
        Ok(()) => Some(atom),
        Err(e) => {
            problems.push(format!("atom: {e}"));
            None
        }
    }
}

impl ConfigFile {
    /// Check every invariant and build the run description. All violations
    /// are reported together.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut problems = Vec::new();
        if self.seed.is_none() {
            problems.push("seed is required".to_string());
        }
        if self.trajectories == 0 {
            problems.push("trajectories must be positive".to_string());
        }

        let atom = resolve_atom(&self.atom, &mut problems);
        let gamma_mhz = atom.as_ref().map_or(1.0, |a| a.gamma_mhz);
        let to_gamma = |v: f64, unit: FrequencyUnit| match unit {
            FrequencyUnit::Gamma => v,
            FrequencyUnit::Mhz => v / gamma_mhz,
        };

        let radii = match (self.cloud.radii_mm, self.cloud.r0_mm) {
            (Some(r), _) => r,
            (None, Some(r0)) => [r0; 3],
            (None, None) => {
                problems.push("cloud: either r0_mm or radii_mm is required".to_string());
                [1.0; 3]
            }
        };
        let cloud = CloudSpec { n0_cm3: self.cloud.n0_cm3, radii_mm: radii, center_mm: self.cloud.center_mm };
        if let Err(e) = cloud.validate() {
            problems.push(format!("cloud: {e}"));
        }

        let l = &self.laser;
        let polarization = match l.polarization {
            PolarizationKind::Helicity => Polarization::Helicity { helicity: l.helicity },
            PolarizationKind::Linear => Polarization::Linear { angle_deg: l.angle_deg },
        };
        let laser = LaserSpec {
            detuning: to_gamma(l.detuning, l.unit),
            bandwidth: to_gamma(l.bandwidth, l.unit),
            intensity: 1.0,
            polarization,
            direction: l.direction,
        };
        problems.extend(laser.validate());

        for &k in &self.thermal.kv0 {
            if !(k >= 0.0) || !k.is_finite() {
                problems.push(format!("thermal.kv0 = {k} must be >= 0"));
            }
        }
        if self.thermal.kv0.is_empty() {
            problems.push("thermal.kv0 must list at least one value".to_string());
        }
        problems.extend(self.controls.validate().into_iter().map(|p| format!("controls.{p}")));

        let channels = match &self.channels {
            Some(list) => {
                if list.is_empty() {
                    problems.push("channels must not be empty".to_string());
                }
                for c in list {
                    if !c.compatible(&laser) {
                        problems.push(format!("channel {c} does not match laser.polarization"));
                    }
                }
                list.clone()
            }
            None => Channel::ALL.into_iter().filter(|c| c.compatible(&laser)).collect(),
        };

        let detunings = self.detuning_grid(&mut problems, |v| to_gamma(v, self.grid.unit));

        let bandwidths = self.bandwidth.values.clone();
        for &b in &bandwidths {
            if !(b >= 0.0) || !b.is_finite() {
                problems.push(format!("bandwidth.values entry {b} must be >= 0"));
            }
        }

        let (mut theta_rad, mut instrument_fwhm_rad) = (Vec::new(), None);
        match self.scan {
            ScanType::Detuning | ScanType::Oriented | ScanType::Bandwidth => {
                if detunings.is_empty() {
                    problems.push(format!("grid: a {} scan needs detunings or min/max/step", self.scan.name()));
                }
            }
            ScanType::Response => {
                if !(laser.bandwidth > 0.0) {
                    problems.push("laser.bandwidth must be > 0 for a response scan".to_string());
                }
                if self.response.bins == 0 {
                    problems.push("response.bins must be positive".to_string());
                }
            }
            ScanType::Cone => {
                let c = &self.cone;
                if !(c.theta_step_urad > 0.0) || !(c.theta_max_urad >= c.theta_step_urad) {
                    problems.push(format!(
                        "cone: need 0 < theta_step_urad ({}) <= theta_max_urad ({})",
                        c.theta_step_urad, c.theta_max_urad
                    ));
                } else {
                    let n = (c.theta_max_urad / c.theta_step_urad + 1e-9).floor() as usize;
                    theta_rad = (0..=n).map(|i| i as f64 * c.theta_step_urad * 1e-6).collect();
                }
                if c.instrument_fwhm_urad < 0.0 || !c.instrument_fwhm_urad.is_finite() {
                    problems.push(format!("cone.instrument_fwhm_urad = {} must be >= 0", c.instrument_fwhm_urad));
                } else if c.instrument_fwhm_urad > 0.0 {
                    if c.theta_step_urad > c.instrument_fwhm_urad / 8.0 {
                        problems.push(format!(
                            "cone.theta_step_urad = {} must be <= instrument_fwhm_urad / 8",
                            c.theta_step_urad
                        ));
                    }
                    instrument_fwhm_rad = Some(c.instrument_fwhm_urad * 1e-6);
                }
            }
        }
        if self.scan == ScanType::Bandwidth && bandwidths.is_empty() {
            problems.push("bandwidth.values must list at least one bandwidth".to_string());
        }
        if self.scan == ScanType::Oriented && !matches!(laser.polarization, Polarization::Helicity { .. }) {
            problems.push("an oriented scan needs laser.polarization = \"helicity\"".to_string());
        }

        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        Ok(RunConfig {
            scan: self.scan,
            seed: self.seed.expect("checked above"),
            trajectories: self.trajectories,
            workers: self.workers.unwrap_or(0),
            output: self.output.clone().unwrap_or_else(|| PathBuf::from("cbs-output")),
            atom: atom.expect("checked above"),
            cloud,
            laser,
            kv0: self.thermal.kv0.clone(),
            population: self.population.preset,
            channels,
            detunings,
            bandwidths,
            theta_rad,
            instrument_fwhm_rad,
            response_bins: self.response.bins,
            controls: self.controls,
        })
    }

    fn detuning_grid(&self, problems: &mut Vec<String>, to_gamma: impl Fn(f64) -> f64) -> Vec<f64> {
        let g = &self.grid;
        let grid = match (&g.detunings, g.min, g.max, g.step) {
            (Some(list), None, None, None) => list.iter().map(|&v| to_gamma(v)).collect(),
            (None, Some(lo), Some(hi), Some(step)) => {
                if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
                    problems.push(format!("grid: need step > 0 and max >= min (min {lo}, max {hi}, step {step})"));
                    return Vec::new();
                }
                detuning_grid(to_gamma(lo), to_gamma(hi), to_gamma(step))
            }
            (None, None, None, None) => return Vec::new(),
            _ => {
                problems.push("grid: give either detunings or all of min, max, step".to_string());
                return Vec::new();
            }
        };
        if grid.iter().any(|d: &f64| !d.is_finite()) {
            problems.push("grid: detunings must be finite".to_string());
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            problems.push("grid: detunings must be strictly increasing".to_string());
        }
        grid
    }
}
