//! Output spectral response for a laser of finite bandwidth.

use serde::{Deserialize, Serialize};

use super::{channel_point, ScanConfig, SpectraError};
use crate::transport::{truncated_cauchy_cdf, Block, Channel, Enhancement, Simulation, SpectrumBins};

/// Half-width of the response window in units of the laser bandwidth.
pub const RESPONSE_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseStatistic {
    pub value: f64,
    pub stderr: f64,
}

impl ResponseStatistic {
    /// Value in units of its standard error.
    pub fn significance(&self) -> f64 {
        self.value / self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpectrum {
    pub channel: Channel,
    /// Laser carrier detuning and bandwidth, units of gamma.
    pub detuning: f64,
    pub bandwidth: f64,
    /// Bin centres, output frequency minus the reference resonance, units of gamma.
    pub omega: Vec<f64>,
    /// Ladder plus crossed intensity per unit frequency.
    pub total_response: Vec<f64>,
    pub total_stderr: Vec<f64>,
    /// Crossed intensity per unit frequency divided by (X_EF - 1)/X_EF.
    pub interference_response: Vec<f64>,
    pub interference_stderr: Vec<f64>,
    /// Laser line shape scaled to the in-window total intensity.
    pub input_lorentzian: Vec<f64>,
    /// Total intensity over all output frequencies, and the part outside the window.
    pub total_intensity: ResponseStatistic,
    pub outside_window: f64,
    pub enhancement: Enhancement,
    /// Mean of (ω - ω_L) over the in-window total response.
    pub mean_shift: ResponseStatistic,
    /// Standardized third central moment of the in-window total response.
    pub skewness: ResponseStatistic,
    /// Per bin: normalized total minus normalized interference profile.
    pub shape_difference: Vec<ResponseStatistic>,
}

impl ResponseSpectrum {
    pub fn bin_width(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            2.0 * RESPONSE_WINDOW * self.bandwidth
        }
    }

    /// Integral of the total response over the window plus the outside part.
    pub fn integrated_total(&self) -> f64 {
        self.total_response.iter().sum::<f64>() * self.bin_width() + self.outside_window
    }
}

fn moments(values: &[f64], centers: &[f64]) -> (f64, f64, f64) {
    let total: f64 = values.iter().sum();
    let mean = values.iter().zip(centers).map(|(v, x)| v * x).sum::<f64>() / total;
    let m2 = values.iter().zip(centers).map(|(v, x)| v * (x - mean).powi(2)).sum::<f64>() / total;
    let m3 = values.iter().zip(centers).map(|(v, x)| v * (x - mean).powi(3)).sum::<f64>() / total;
    (mean, m2, m3)
}

/// Histogram of detected output frequencies at the single carrier detuning
/// `config.laser.detuning`, for channel `channel`, with `bins` bins over
/// ω_L ± 10 γ_L.
pub fn response_spectrum(config: &ScanConfig, channel: Channel, bins: usize) -> Result<ResponseSpectrum, SpectraError> {
    let bw = config.laser.bandwidth;
    let mut problems = Vec::new();
    if !(bw > 0.0) {
        problems.push("response spectra need a laser bandwidth > 0".to_string());
    }
    if bins == 0 {
        problems.push("response spectra need at least one bin".to_string());
    }
    if config.trajectories == 0 {
        problems.push("trajectory budget must be positive".to_string());
    }
    if !problems.is_empty() {
        return Err(SpectraError::Invalid(problems));
    }
    let detuning = config.laser.detuning;
    let layout = SpectrumBins { lo: detuning - RESPONSE_WINDOW * bw, hi: detuning + RESPONSE_WINDOW * bw, count: bins };
    let mut setup = config.setup(detuning);
    setup.channels = vec![channel];
    setup.spectrum = Some(layout);
    let sim = Simulation::new(setup)?;
    let acc = sim.run(config.seed, config.trajectories).remove(0);
    let point = channel_point(&acc, detuning)?;
    let e = point.enhancement;

    let width = layout.width();
    let centers: Vec<f64> = (0..bins).map(|i| layout.center(i)).collect();
    let offsets: Vec<f64> = centers.iter().map(|c| c - detuning).collect();
    let slots = bins + 2;
    // Per block: ladder slots, crossed slots.
    let extract = |b: &Block| {
        let mut v: Vec<f64> = b.spectrum_ladder.iter().map(|x| x.value()).collect();
        v.extend(b.spectrum_crossed.iter().map(|x| x.value()));
        v
    };
    let ladder = |m: &[f64], i: usize| m[i + 1];
    let crossed = |m: &[f64], i: usize| m[slots + i + 1];
    let in_window = |m: &[f64]| (0..bins).map(|i| ladder(m, i) + crossed(m, i)).collect::<Vec<f64>>();
    let x_factor = |m: &[f64]| {
        let l: f64 = m[..slots].iter().sum();
        let c: f64 = m[slots..].iter().sum();
        c / (l + c)
    };

    let mut total_response = Vec::with_capacity(bins);
    let mut total_stderr = Vec::with_capacity(bins);
    let mut interference_response = Vec::with_capacity(bins);
    let mut interference_stderr = Vec::with_capacity(bins);
    let mut shape_difference = Vec::with_capacity(bins);
    for i in 0..bins {
        let (t, ts) = acc.jackknife(extract, |m| (ladder(m, i) + crossed(m, i)) / width);
        let (c, cs) = acc.jackknife(extract, |m| crossed(m, i) / width / x_factor(m));
        total_response.push(t);
        total_stderr.push(ts);
        interference_response.push(c);
        interference_stderr.push(cs);
        let (d, ds) = acc.jackknife(extract, |m| {
            let tot = in_window(m);
            let t_sum: f64 = tot.iter().sum();
            let c_sum: f64 = (0..bins).map(|j| crossed(m, j)).sum();
            tot[i] / t_sum - crossed(m, i) / c_sum
        });
        shape_difference.push(ResponseStatistic { value: d, stderr: ds });
    }
    let (total, total_se) = acc.jackknife(extract, |m| m.iter().sum());
    let (outside_window, _) = acc.jackknife(extract, |m| m[0] + m[slots - 1] + m[slots] + m[2 * slots - 1]);
    let (mean_shift, mean_se) = acc.jackknife(extract, |m| moments(&in_window(m), &offsets).0);
    let (skewness, skew_se) = acc.jackknife(extract, |m| {
        let (_, m2, m3) = moments(&in_window(m), &offsets);
        m3 / m2.powf(1.5)
    });

    let in_total: f64 = total_response.iter().sum::<f64>() * width;
    let input_lorentzian = centers
        .iter()
        .map(|c| {
            let lo = truncated_cauchy_cdf(c - detuning - 0.5 * width, bw);
            let hi = truncated_cauchy_cdf(c - detuning + 0.5 * width, bw);
            let window =
                truncated_cauchy_cdf(RESPONSE_WINDOW * bw, bw) - truncated_cauchy_cdf(-RESPONSE_WINDOW * bw, bw);
            in_total * (hi - lo) / window / width
        })
        .collect();

    Ok(ResponseSpectrum {
        channel,
        detuning,
        bandwidth: bw,
        omega: centers,
        total_response,
        total_stderr,
        interference_response,
        interference_stderr,
        input_lorentzian,
        total_intensity: ResponseStatistic { value: total, stderr: total_se },
        outside_window,
        enhancement: e,
        mean_shift: ResponseStatistic { value: mean_shift, stderr: mean_se },
        skewness: ResponseStatistic { value: skewness, stderr: skew_se },
        shape_difference,
    })
}
