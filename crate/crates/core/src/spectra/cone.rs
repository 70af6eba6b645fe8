//! Angular profile of the backscattering cone.

use serde::{Deserialize, Serialize};

use super::{ScanConfig, SpectraError};
use crate::transport::{enhancement, Block, Channel, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProfile {
    pub channel: Channel,
    /// Angles from exact backscattering, radians; starts at 0.
    pub theta_rad: Vec<f64>,
    /// Ladder intensity, flat on the scale of the cone.
    pub ladder: f64,
    pub crossed: Vec<f64>,
    pub enhancement: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Copy convolved with the instrument response, if any.
    pub convolved: Option<Vec<f64>>,
    pub instrument_fwhm_rad: Option<f64>,
}

/// Least-squares fit of y = amplitude / (1 + (θ/hwhm)^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub hwhm: f64,
    pub r_squared: f64,
}

impl ConeProfile {
    /// Lorentzian fit to X(θ) - 1.
    pub fn fit(&self) -> LorentzianFit {
        let y: Vec<f64> = self.enhancement.iter().map(|x| x - 1.0).collect();
        fit_lorentzian(&self.theta_rad, &y)
    }

    /// Full width at half maximum of the fitted cone, radians.
    pub fn width_fwhm(&self) -> f64 {
        2.0 * self.fit().hwhm
    }

    /// Copy with X(θ) replaced by 1 plus the fitted Lorentzian.
    pub fn lorentzian_model(&self) -> ConeProfile {
        let fit = self.fit();
        let enhancement = self.theta_rad.iter().map(|t| 1.0 + fit.amplitude / (1.0 + (t / fit.hwhm).powi(2))).collect();
        ConeProfile { enhancement, convolved: None, instrument_fwhm_rad: None, ..self.clone() }
    }

    /// Drop of the peak enhancement caused by the instrument convolution.
    pub fn peak_reduction(&self) -> Option<f64> {
        self.convolved.as_ref().map(|c| self.enhancement[0] - c[0])
    }
}

fn fit_error(theta: &[f64], y: &[f64], hwhm: f64) -> (f64, f64) {
    let f: Vec<f64> = theta.iter().map(|t| 1.0 / (1.0 + (t / hwhm).powi(2))).collect();
    let fy: f64 = f.iter().zip(y).map(|(a, b)| a * b).sum();
    let ff: f64 = f.iter().map(|a| a * a).sum();
    let amplitude = fy / ff;
    let sse = f.iter().zip(y).map(|(a, b)| (b - amplitude * a).powi(2)).sum();
    (amplitude, sse)
}

pub fn fit_lorentzian(theta: &[f64], y: &[f64]) -> LorentzianFit {
    let span = theta.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let lo = (span * 1e-4).ln();
    let hi = (span * 10.0).ln();
    // Coarse scan in log width, then golden-section refinement.
    let n = 200;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=n {
        let s = lo + (hi - lo) * i as f64 / n as f64;
        let (_, e) = fit_error(theta, y, s.exp());
        if e < best.1 {
            best = (s, e);
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if fit_error(theta, y, c.exp()).1 < fit_error(theta, y, d.exp()).1 {
            b = d;
        } else {
            a = c;
        }
    }
    let hwhm = (0.5 * (a + b)).exp();
    let (amplitude, sse) = fit_error(theta, y, hwhm);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    LorentzianFit { amplitude, hwhm, r_squared: 1.0 - sse / sst }
}

/// Enhancement versus angle at the carrier detuning `config.laser.detuning`.
pub fn cone_profile(config: &ScanConfig, channel: Channel, theta_rad: &[f64]) -> Result<ConeProfile, SpectraError> {
    let mut problems = Vec::new();
    if theta_rad.first() != Some(&0.0) {
        problems.push("cone grid must start at 0".to_string());
    }
    if theta_rad.windows(2).any(|w| w[1] <= w[0]) {
        problems.push("cone grid must be strictly increasing".to_string());
    }
    if config.trajectories == 0 {
        problems.push("trajectory budget must be positive".to_string());
    }
    if !problems.is_empty() {
        return Err(SpectraError::Invalid(problems));
    }
    let mut setup = config.setup(config.laser.detuning);
    setup.channels = vec![channel];
    setup.theta_rad = theta_rad.to_vec();
    let sim = Simulation::new(setup)?;
    let acc = sim.run(config.seed, config.trajectories).remove(0);
    let e = enhancement(&acc).map_err(|_| SpectraError::ZeroLadder { detuning: config.laser.detuning, channel })?;

    let extract = |b: &Block| {
        let mut v = vec![b.ladder_total()];
        v.extend(b.crossed_theta.iter().map(|x| x.value()));
        v
    };
    let mut crossed = Vec::with_capacity(theta_rad.len());
    let mut enhancement_values = Vec::with_capacity(theta_rad.len());
    let mut stderr = Vec::with_capacity(theta_rad.len());
    for i in 0..theta_rad.len() {
        let (c, _) = acc.jackknife(extract, |m| m[i + 1]);
        let (x, s) = acc.jackknife(extract, |m| 1.0 + m[i + 1] / m[0]);
        crossed.push(c);
        enhancement_values.push(x);
        stderr.push(s);
    }
    Ok(ConeProfile {
        channel,
        theta_rad: theta_rad.to_vec(),
        ladder: e.ladder,
        crossed,
        enhancement: enhancement_values,
        stderr,
        convolved: None,
        instrument_fwhm_rad: None,
    })
}

/// Trapezoid weights of a grid.
fn trapezoid(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (x[i + 1] - x[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Convolve X(θ) - 1 with a unit-area Lorentzian of the given FWHM.
///
/// The profile is mirrored to negative angles. Each grid point spreads its
/// mass with the kernel plus its mirror images at the grid edges; the images
/// are scaled so that the tail mass leaving the grid is folded back near the
/// edges, and the trapezoidal integral of X(θ) - 1 is preserved exactly.
pub fn convolve_instrument(profile: &ConeProfile, fwhm_rad: f64) -> Result<ConeProfile, SpectraError> {
    if !(fwhm_rad > 0.0) {
        return Err(SpectraError::Invalid(vec!["instrument width must be positive".into()]));
    }
    let theta = &profile.theta_rad;
    if theta.len() < 2 {
        return Err(SpectraError::Invalid(vec!["cone grid needs at least two angles".into()]));
    }
    let spacing = theta.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if spacing > fwhm_rad / 8.0 * (1.0 + 1e-9) {
        return Err(SpectraError::GridTooCoarse { spacing, fwhm: fwhm_rad });
    }
    let n = theta.len();
    let full: Vec<f64> = theta[1..].iter().rev().map(|t| -t).chain(theta.iter().cloned()).collect();
    let y: Vec<f64> =
        profile.enhancement[1..].iter().rev().chain(profile.enhancement.iter()).map(|x| x - 1.0).collect();
    let w = trapezoid(&full);
    let half = 0.5 * fwhm_rad;
    let kernel = |d: f64| half / (std::f64::consts::PI * (d * d + half * half));
    let edge = theta[n - 1];
    let image = |t: f64, s: f64| kernel(2.0 * edge - t - s) + kernel(-2.0 * edge - t - s);
    let mut out = vec![0.0; full.len()];
    for j in 0..full.len() {
        let mass = w[j] * y[j];
        if mass == 0.0 {
            continue;
        }
        let s = full[j];
        let direct: f64 = full.iter().zip(&w).map(|(t, wi)| wi * kernel(t - s)).sum();
        let mirrored: f64 = full.iter().zip(&w).map(|(t, wi)| wi * image(*t, s)).sum();
        let scale = (1.0 - direct) / mirrored;
        for (o, t) in out.iter_mut().zip(&full) {
            *o += mass * (kernel(t - s) + scale * image(*t, s));
        }
    }
    let convolved = out[n - 1..].iter().map(|v| 1.0 + v).collect();
    Ok(ConeProfile { convolved: Some(convolved), instrument_fwhm_rad: Some(fwhm_rad), ..profile.clone() })
}
