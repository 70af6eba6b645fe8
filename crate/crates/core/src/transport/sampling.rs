//! Per-event random variates: atom velocities and laser frequencies.

use rand::Rng;
use rand_distr::StandardNormal;

use super::LaserSpec;
use crate::geometry::Vec3;

/// Half-width of the laser frequency distribution support, in units of γ_L.
pub const LASER_TRUNCATION: f64 = 50.0;

/// Maxwell-Boltzmann velocity in units of v0 (each component has variance 1/2).
/// No random numbers are consumed when `kv0 == 0`.
pub fn sample_velocity<R: Rng + ?Sized>(rng: &mut R, kv0: f64) -> Vec3 {
    if kv0 == 0.0 {
        return Vec3::zeros();
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(x * s, y * s, z * s)
}

/// CDF of the Lorentzian of FWHM `width` truncated to ±`LASER_TRUNCATION * width`.
pub fn truncated_cauchy_cdf(x: f64, width: f64) -> f64 {
    let half = 0.5 * width;
    let edge = (LASER_TRUNCATION * width / half).atan();
    let x = x.clamp(-LASER_TRUNCATION * width, LASER_TRUNCATION * width);
    0.5 + 0.5 * (x / half).atan() / edge
}

/// Laser frequency (units of gamma from the reference line) by inverse-CDF
/// sampling of the truncated Lorentzian line. One uniform is always consumed,
/// so runs that differ only in bandwidth share their random streams.
pub fn sample_laser_frequency<R: Rng + ?Sized>(rng: &mut R, laser: &LaserSpec) -> f64 {
    let u: f64 = rng.random();
    if laser.bandwidth == 0.0 {
        return laser.detuning;
    }
    let half = 0.5 * laser.bandwidth;
    let edge = (LASER_TRUNCATION * laser.bandwidth / half).atan();
    laser.detuning + half * ((2.0 * u - 1.0) * edge).tan()
}
