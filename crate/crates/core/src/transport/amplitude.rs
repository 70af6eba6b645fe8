//! Direct and reversed path amplitudes toward the exact backscattering direction.

use num_complex::Complex64;

use super::engine::{Simulation, CM2_TO_MM2};
use super::trajectory::Trajectory;
use crate::atomic::phase;
use crate::geometry::{project_transverse, CVec3, Vec3};

/// Amplitude pair of the chain truncated at `order` events.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub order: usize,
    pub weight: f64,
    /// Fields leaving toward the detector, in mm; project onto an analyzer to
    /// obtain amplitudes.
    pub direct: CVec3,
    pub reverse: CVec3,
    /// Detected laboratory frequencies of the two paths, units of gamma.
    pub freq_direct: f64,
    pub freq_reverse: f64,
    /// First minus last scattering position, mm.
    pub separation: Vec3,
}

impl PathPair {
    pub fn amplitudes(&self, analyzer: &CVec3) -> (Complex64, Complex64) {
        (analyzer.dotc(&self.direct), analyzer.dotc(&self.reverse))
    }
}

fn scale(v: CVec3, s: Complex64) -> CVec3 {
    v.map(|c| c * s)
}

/// Amplitude pairs for every truncation order of `traj`.
///
/// The reversed path visits the same atoms, in the same internal transitions,
/// in opposite order. Under Doppler shifts its frequencies depend on the
/// truncation order, so it is rebuilt for each order.
pub fn path_amplitudes(sim: &Simulation, traj: &Trajectory) -> Vec<PathPair> {
    let kv0 = sim.thermal.kv0;
    let det = -sim.beam;
    let sqrt_c = Complex64::new((sim.model.norm_cm2() * CM2_TO_MM2).sqrt(), 0.0);
    let events = &traj.events;
    let sigma_l = sim.extinction.sigma(traj.laser_frequency);
    let mut pairs = Vec::with_capacity(events.len());

    for (n, last) in events.iter().enumerate() {
        let scattered = sim.model.tensor(last.mi, last.mf, last.rest_frequency(kv0)) * last.field_in;
        let freq_direct = last.frequency_toward(kv0, &det);
        let out = phase(-sim.k * det.dot(&last.position))
            * (-0.5 * sim.extinction.sigma(freq_direct) * last.beam_column_cm2).exp();
        let direct = scale(project_transverse(&scattered, &det), sqrt_c * out);

        let (reverse, freq_reverse) =
            if n == 0 { (direct, freq_direct) } else { reverse_path(sim, traj, n, sigma_l, sqrt_c) };
        pairs.push(PathPair {
            order: n + 1,
            weight: last.weight,
            direct,
            reverse,
            freq_direct,
            freq_reverse,
            separation: events[0].position - last.position,
        });
    }
    pairs
}

/// Reversed path through events `last..=0`.
fn reverse_path(sim: &Simulation, traj: &Trajectory, last: usize, sigma_l: f64, sqrt_c: Complex64) -> (CVec3, f64) {
    let kv0 = sim.thermal.kv0;
    let det = -sim.beam;
    let events = &traj.events;
    let start = &events[last];
    let mut field =
        scale(sim.e_in, phase(sim.k * sim.beam.dot(&start.position)) * (-0.5 * sigma_l * start.beam_column_cm2).exp());
    let mut freq = traj.laser_frequency;
    let mut dir_in = sim.beam;
    for j in (0..=last).rev() {
        let ev = &events[j];
        let rest = freq - kv0 * dir_in.dot(&ev.velocity);
        let scattered = scale(sim.model.tensor(ev.mi, ev.mf, rest) * field, sqrt_c);
        if j == 0 {
            let out_freq = freq - kv0 * (dir_in - det).dot(&ev.velocity);
            let out = phase(-sim.k * det.dot(&ev.position))
                * (-0.5 * sim.extinction.sigma(out_freq) * ev.beam_column_cm2).exp();
            return (scale(project_transverse(&scattered, &det), out), out_freq);
        }
        let prev = &events[j - 1];
        let seg = prev.segment.expect("inner events have segments");
        let dir_out = -prev.dir_out;
        let out_freq = freq - kv0 * (dir_in - dir_out).dot(&ev.velocity);
        let atten = (-0.5 * sim.extinction.sigma(out_freq) * seg.column_cm2).exp() / seg.length_mm;
        field = scale(project_transverse(&scattered, &dir_out), phase(sim.k * seg.length_mm) * atten);
        freq = out_freq;
        dir_in = dir_out;
    }
    unreachable!("loop returns at the first event")
}
