//! Small vector helpers shared by the transport code.

use nalgebra::Vector3;
use num_complex::Complex64;

pub type Vec3 = Vector3<f64>;
pub type CVec3 = Vector3<Complex64>;

/// Right-handed orthonormal pair spanning the plane perpendicular to `dir`.
///
/// For `dir = z` this returns `(x, y)`, and for `dir = -z` it returns `(x, -y)`.
pub fn transverse_basis(dir: &Vec3) -> (Vec3, Vec3) {
    let helper = if dir.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let mut a = if dir.z.abs() < 0.9 { helper.cross(dir) } else { dir.cross(&helper).cross(dir) };
    if dir.z.abs() >= 0.9 {
        // Keep (x, y) for propagation along +z.
        a = a.normalize();
        if a.x < 0.0 {
            a = -a;
        }
    } else {
        a = a.normalize();
    }
    let b = dir.cross(&a);
    (a, b)
}

pub fn complexify(v: &Vec3) -> CVec3 {
    v.map(|c| Complex64::new(c, 0.0))
}

/// Linear polarization at angle `angle` (radians) from the first transverse axis.
pub fn linear(dir: &Vec3, angle: f64) -> CVec3 {
    let (a, b) = transverse_basis(dir);
    complexify(&(a * angle.cos() + b * angle.sin()))
}

/// Circular polarization of helicity `h = ±1` with respect to `dir`
/// (the spherical unit vector e_{+h} when `dir = z`).
pub fn circular(dir: &Vec3, helicity: i32) -> CVec3 {
    let (a, b) = transverse_basis(dir);
    let h = helicity.signum() as f64;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    complexify(&a).map(|c| c * (-h * s)) + complexify(&b).map(|c| c * Complex64::new(0.0, -s))
}

/// Transverse projection `(1 - n n^T) v`.
pub fn project_transverse(v: &CVec3, n: &Vec3) -> CVec3 {
    let dot = v.x * n.x + v.y * n.y + v.z * n.z;
    CVec3::new(v.x - dot * n.x, v.y - dot * n.y, v.z - dot * n.z)
}

/// Isotropic unit vector from two uniforms.
pub fn isotropic_direction(u1: f64, u2: f64) -> Vec3 {
    let cos_t = 1.0 - 2.0 * u1;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}
