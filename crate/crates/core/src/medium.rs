//! Gaussian atomic cloud: densities, column densities along rays, optical
//! depths and exponential free-path sampling.
//!
//! Positions and path lengths are in mm, densities in cm^-3, column
//! densities in cm^-2 and cross sections in cm^2.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atomic::{total_cross_section, AtomSpec};
use crate::geometry::Vec3;

const MM_TO_CM: f64 = 0.1;
/// Path length, in units of the Gaussian width along the ray, past which the
/// remaining column density is below e^-800 of the peak.
const TAIL_WIDTHS: f64 = 40.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("invalid cloud: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("ray direction has norm {0}, expected a unit vector")]
    NotUnit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    /// Peak density, cm^-3.
    pub n0_cm3: f64,
    /// Gaussian radii (r_x, r_y, r_z), mm, with n = n0 exp(-x^2/2r_x^2 - ...).
    pub radii_mm: [f64; 3],
    #[serde(default)]
    pub center_mm: [f64; 3],
}

impl CloudSpec {
    pub fn isotropic(n0_cm3: f64, r0_mm: f64) -> Self {
        CloudSpec { n0_cm3, radii_mm: [r0_mm; 3], center_mm: [0.0; 3] }
    }

    /// The cloud used for the detuning scans: n0 = 1.6e10 cm^-3, r0 = 1 mm.
    pub fn scan_default() -> Self {
        Self::isotropic(1.6e10, 1.0)
    }

    pub fn validate(&self) -> Result<(), MediumError> {
        let mut problems = Vec::new();
        if !(self.n0_cm3 > 0.0) {
            problems.push(format!("n0_cm3 = {} must be positive", self.n0_cm3));
        }
        for (axis, r) in ["x", "y", "z"].iter().zip(self.radii_mm) {
            if !(r > 0.0) {
                problems.push(format!("radius along {axis} = {r} must be positive"));
            }
        }
        if self.center_mm.iter().any(|c| !c.is_finite()) {
            problems.push("center must be finite".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(MediumError::Invalid(problems))
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center_mm)
    }

    pub fn max_radius(&self) -> f64 {
        self.radii_mm.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, MediumError> {
        let norm = direction.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(MediumError::NotUnit(norm));
        }
        Ok(Ray { origin, direction })
    }

    /// Normalizes `direction` (which must be non-zero).
    pub fn towards(origin: Vec3, direction: Vec3) -> Self {
        Ray { origin, direction: direction.normalize() }
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.origin + self.direction * s
    }
}

pub fn density(cloud: &CloudSpec, r: &Vec3) -> f64 {
    let c = cloud.center();
    let q: f64 = (0..3).map(|i| ((r[i] - c[i]) / cloud.radii_mm[i]).powi(2)).sum();
    cloud.n0_cm3 * (-0.5 * q).exp()
}

/// erf(b) - erf(a) without cancellation in the tails.
fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else if a <= 0.0 && b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else {
        libm::erf(b) - libm::erf(a)
    }
}

/// The cloud density restricted to a ray is a 1-D Gaussian in the path length:
/// n(s) = peak * exp(-curvature (s - s_peak)^2 / 2).
#[derive(Debug, Clone, Copy)]
pub struct RayProfile {
    peak: f64,
    s_peak: f64,
    curvature: f64,
}

impl RayProfile {
    pub fn new(cloud: &CloudSpec, ray: &Ray) -> Self {
        let c = cloud.center();
        let (mut a, mut b, mut q) = (0.0, 0.0, 0.0);
        for i in 0..3 {
            let inv = 1.0 / (cloud.radii_mm[i] * cloud.radii_mm[i]);
            let o = ray.origin[i] - c[i];
            let d = ray.direction[i];
            a += d * d * inv;
            b += o * d * inv;
            q += o * o * inv;
        }
        let s_peak = -b / a;
        let h = (q - b * b / a).max(0.0);
        RayProfile { peak: cloud.n0_cm3 * (-0.5 * h).exp(), s_peak, curvature: a }
    }

    pub fn density(&self, s: f64) -> f64 {
        let x = s - self.s_peak;
        self.peak * (-0.5 * self.curvature * x * x).exp()
    }

    /// Column density between path lengths `s0 < s1` (either may be infinite), cm^-2.
    pub fn column(&self, s0: f64, s1: f64) -> f64 {
        let k = (0.5 * self.curvature).sqrt();
        let pref = self.peak * (std::f64::consts::PI / (2.0 * self.curvature)).sqrt() * MM_TO_CM;
        pref * erf_diff(k * (s0 - self.s_peak), k * (s1 - self.s_peak))
    }

    /// Path length beyond which the remaining column is negligible.
    pub fn far_end(&self) -> f64 {
        self.s_peak.max(0.0) + TAIL_WIDTHS / self.curvature.sqrt()
    }

    /// Path length `s` with `sigma * column(0, s) = depth`, or `None` when the
    /// whole ray is thinner than `depth`.
    pub fn invert(&self, sigma_cm2: f64, depth: f64) -> Option<f64> {
        let total = sigma_cm2 * self.column(0.0, f64::INFINITY);
        if !(depth < total) {
            return None;
        }
        if depth <= 0.0 {
            return Some(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.far_end());
        // Safeguarded Newton: fall back to bisection whenever the step leaves the bracket.
        let mut s = 0.5 * (lo + hi);
        let tol = 1e-13 * depth;
        for _ in 0..200 {
            let f = sigma_cm2 * self.column(0.0, s) - depth;
            if f.abs() <= tol {
                return Some(s);
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = sigma_cm2 * self.density(s) * MM_TO_CM;
            let newton = s - f / slope;
            s = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * hi.max(1.0) {
                return Some(s);
            }
        }
        Some(s)
    }
}

/// Column density along `ray` from its origin to path length `s_max` (mm, may be infinite), cm^-2.
pub fn column_density(cloud: &CloudSpec, ray: &Ray, s_max: f64) -> f64 {
    RayProfile::new(cloud, ray).column(0.0, s_max)
}

/// Resonant optical depth through the centre along the z axis at detuning `delta`.
pub fn optical_depth_center(cloud: &CloudSpec, atom: &AtomSpec, delta: f64) -> f64 {
    let ray = Ray { origin: cloud.center(), direction: Vec3::z() };
    let full = 2.0 * column_density(cloud, &ray, f64::INFINITY);
    total_cross_section(atom, delta) * full
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreePath {
    Scatter { distance: f64, position: Vec3 },
    Escape,
}

/// Exponential free path along `ray` for extinction cross section `sigma_cm2`,
/// drawn from the uniform `u` in (0, 1).
pub fn sample_free_path_sigma(cloud: &CloudSpec, sigma_cm2: f64, ray: &Ray, u: f64) -> FreePath {
    let profile = RayProfile::new(cloud, ray);
    match profile.invert(sigma_cm2, -u.ln()) {
        Some(distance) => FreePath::Scatter { distance, position: ray.at(distance) },
        None => FreePath::Escape,
    }
}

/// [`sample_free_path_sigma`] with the unpolarized extinction at detuning `delta_local`.
pub fn sample_free_path(cloud: &CloudSpec, atom: &AtomSpec, delta_local: f64, ray: &Ray, u: f64) -> FreePath {
    sample_free_path_sigma(cloud, total_cross_section(atom, delta_local), ray, u)
}

/// Field amplitude transmitted from the ray origin to infinity, exp(-σ N / 2).
pub fn escape_amplitude_sigma(cloud: &CloudSpec, sigma_cm2: f64, ray: &Ray) -> f64 {
    (-0.5 * sigma_cm2 * column_density(cloud, ray, f64::INFINITY)).exp()
}

pub fn escape_amplitude(cloud: &CloudSpec, atom: &AtomSpec, delta_local: f64, ray: &Ray) -> f64 {
    escape_amplitude_sigma(cloud, total_cross_section(atom, delta_local), ray)
}
