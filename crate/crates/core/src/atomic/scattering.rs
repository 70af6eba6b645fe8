//! Resonant scattering tensors and cross sections for an F -> {F'} manifold.
//!
//! Frequencies are in units of the natural width gamma, measured from the
//! reference line. A single scattering event from ground sublevel `Mi` to
//! `Mf` is described by the 3x3 Cartesian tensor
//!
//! ```text
//! alpha_ab(w) = sum_F' g_F' / (w - w_F' + i/2) * sum_M' conj(D_a(F'M'; F Mf)) D_b(F'M'; F Mi)
//! ```
//!
//! where `D(F'M'; F M)` is the Cartesian dipole vector built from
//! `<F M; 1 q | F' M'>` in the spherical basis and `g_F'` the line coupling.
//! The scattered field for an incident polarization `e` is `alpha * e`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

use super::angular::dipole_cg;
use super::levels::{AtomSpec, GroundPopulation};
use super::AtomicError;
use crate::geometry::{transverse_basis, CVec3, Vec3};

pub type CMat3 = Matrix3<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Cartesian dipole vector of the spherical component `q`: conj(e_q).
fn spherical_dual(q: i32) -> CVec3 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match q {
        1 => Vector3::new(Complex64::new(-s, 0.0), Complex64::new(0.0, s), Complex64::new(0.0, 0.0)),
        -1 => Vector3::new(Complex64::new(s, 0.0), Complex64::new(0.0, s), Complex64::new(0.0, 0.0)),
        0 => Vector3::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        _ => unreachable!("dipole component out of range"),
    }
}

/// `<F' M'| d |F M>` as a Cartesian vector, so that `<F'M'|d.e|FM> = D . e`.
fn dipole_vector(f: i32, m: i32, fp: i32, mp: i32) -> CVec3 {
    let q = mp - m;
    if q.abs() > 1 {
        return CVec3::zeros();
    }
    spherical_dual(q) * Complex64::new(dipole_cg(f, m, q, fp, mp), 0.0)
}

/// Pole data of one excited line.
#[derive(Debug, Clone)]
struct Line {
    f_prime: i32,
    /// Line centre, units of gamma.
    center: f64,
    /// Amplitude coupling; 1 for the reference line.
    coupling: f64,
    strength: f64,
    branching: f64,
}

/// Precomputed tensors for every allowed (Mi, Mf) pair.
#[derive(Debug, Clone)]
pub struct ScatteringModel {
    ground_f: i32,
    lines: Vec<Line>,
    /// Indexed by `(Mi + F) * 5 + (Mf - Mi + 2)`, then by line.
    tensors: Vec<Vec<CMat3>>,
    sigma0_cm2: f64,
    /// Multiplies |alpha e|^2 to give a differential cross section in cm^2/sr.
    norm_cm2: f64,
}

impl ScatteringModel {
    pub fn new(atom: &AtomSpec) -> Result<Self, AtomicError> {
        atom.validate()?;
        let f = atom.ground_f;
        let reference = atom.reference_line();
        let ref_weight = reference.strength * reference.branching / (2 * reference.f_prime + 1) as f64;
        let lines: Vec<Line> = atom
            .excited
            .iter()
            .map(|e| Line {
                f_prime: e.f_prime,
                center: atom.offset_gamma(e),
                coupling: (e.strength * e.branching / (2 * e.f_prime + 1) as f64 / ref_weight).sqrt(),
                strength: e.strength,
                branching: e.branching,
            })
            .collect();

        let nm = (2 * f + 1) as usize;
        let mut tensors = vec![Vec::new(); nm * 5];
        for mi in -f..=f {
            for dm in -2..=2 {
                let mf = mi + dm;
                if mf.abs() > f {
                    continue;
                }
                let slot = &mut tensors[(mi + f) as usize * 5 + (dm + 2) as usize];
                for line in &lines {
                    let fp = line.f_prime;
                    let mut t = CMat3::zeros();
                    for mp in -fp..=fp {
                        let d_in = dipole_vector(f, mi, fp, mp);
                        let d_out = dipole_vector(f, mf, fp, mp);
                        t += d_out.map(|c| c.conj()) * d_in.transpose();
                    }
                    slot.push(t * Complex64::new(line.coupling, 0.0));
                }
            }
        }
        let mut model = ScatteringModel { ground_f: f, lines, tensors, sigma0_cm2: atom.sigma0_cm2, norm_cm2: 1.0 };
        model.norm_cm2 = model.differential_norm(&GroundPopulation::isotropic(f))?;
        Ok(model)
    }

    pub fn ground_f(&self) -> i32 {
        self.ground_f
    }

    pub fn sigma0_cm2(&self) -> f64 {
        self.sigma0_cm2
    }

    /// Normalization constant c: `c * |alpha e|^2` is dσ/dΩ in cm^2/sr.
    pub fn norm_cm2(&self) -> f64 {
        self.norm_cm2
    }

    fn slot(&self, mi: i32, mf: i32) -> Option<&[CMat3]> {
        let f = self.ground_f;
        let dm = mf - mi;
        if dm.abs() > 2 || mi.abs() > f || mf.abs() > f {
            return None;
        }
        Some(&self.tensors[(mi + f) as usize * 5 + (dm + 2) as usize])
    }

    /// Scattering tensor at rest-frame frequency `omega` (units of gamma from the reference line).
    pub fn tensor(&self, mi: i32, mf: i32, omega: f64) -> CMat3 {
        let Some(parts) = self.slot(mi, mf) else {
            return CMat3::zeros();
        };
        let mut out = CMat3::zeros();
        for (line, t) in self.lines.iter().zip(parts) {
            let pole = Complex64::new(omega - line.center, 0.5).inv();
            out += t * pole;
        }
        out
    }

    /// Amplitude `e_out^† alpha e_in` (dimensionless; scale by sqrt(c) for cm).
    pub fn amplitude(&self, omega: f64, e_in: &CVec3, e_out: &CVec3, mi: i32, mf: i32) -> Complex64 {
        let field = self.tensor(mi, mf, omega) * e_in;
        e_out.dotc(&field)
    }

    /// Sublevels reachable from `mi`.
    pub fn allowed_final(&self, mi: i32) -> impl Iterator<Item = i32> + '_ {
        let f = self.ground_f;
        ((mi - 2).max(-f)..=(mi + 2).min(f)).filter(move |&mf| self.slot(mi, mf).is_some())
    }

    fn lorentzian(&self, line: &Line, delta: f64) -> f64 {
        let x = 2.0 * (delta - line.center);
        1.0 / (1.0 + x * x)
    }

    /// Extinction cross section of the unpolarized ground state, cm^2.
    pub fn total_cross_section(&self, delta: f64) -> f64 {
        self.sigma0_cm2 * self.lines.iter().map(|l| l.strength * self.lorentzian(l, delta)).sum::<f64>()
    }

    /// Elastic (F -> F) scattering cross section of the unpolarized ground state, cm^2.
    pub fn elastic_cross_section(&self, delta: f64) -> f64 {
        self.sigma0_cm2 * self.lines.iter().map(|l| l.strength * l.branching * self.lorentzian(l, delta)).sum::<f64>()
    }

    /// Relative absorption of polarization `e` by `population` on each line,
    /// equal to 1 for an isotropic population.
    fn population_factor(&self, line: &Line, population: &GroundPopulation, e: &CVec3) -> f64 {
        let f = self.ground_f;
        let fp = line.f_prime;
        let mut acc = 0.0;
        for mi in -f..=f {
            let p = population.weight(mi);
            if p == 0.0 {
                continue;
            }
            for mp in -fp..=fp {
                acc += p * dipole_vector(f, mi, fp, mp).dot(e).norm_sqr();
            }
        }
        acc * 3.0 * (2 * f + 1) as f64 / (2 * fp + 1) as f64
    }

    /// Extinction for a given population and incident polarization, cm^2.
    pub fn total_cross_section_population(&self, population: &GroundPopulation, e_in: &CVec3, delta: f64) -> f64 {
        self.sigma0_cm2
            * self
                .lines
                .iter()
                .map(|l| l.strength * self.population_factor(l, population, e_in) * self.lorentzian(l, delta))
                .sum::<f64>()
    }

    pub fn elastic_cross_section_population(&self, population: &GroundPopulation, e_in: &CVec3, delta: f64) -> f64 {
        self.sigma0_cm2
            * self
                .lines
                .iter()
                .map(|l| {
                    l.strength * l.branching * self.population_factor(l, population, e_in) * self.lorentzian(l, delta)
                })
                .sum::<f64>()
    }

    /// Line centres and extinction cross sections at resonance (cm^2), optionally
    /// weighted for a population probed with polarization `e`.
    pub fn line_extinction(&self, polarized: Option<(&GroundPopulation, &CVec3)>) -> Vec<(f64, f64)> {
        self.lines
            .iter()
            .map(|l| {
                let factor = polarized.map_or(1.0, |(p, e)| self.population_factor(l, p, e));
                (l.center, self.sigma0_cm2 * l.strength * factor)
            })
            .collect()
    }

    /// ∫dΩ Σ_pol Σ_Mf Σ_Mi p(Mi) |A|^2 by product Gauss-Legendre x trapezoid quadrature.
    pub fn integrated_intensity(&self, population: &GroundPopulation, e_in: &CVec3, delta: f64, n_theta: usize) -> f64 {
        let (nodes, weights) = gauss_legendre(n_theta);
        let n_phi = 2 * n_theta;
        let f = self.ground_f;
        let fields: Vec<(f64, CVec3)> = (-f..=f)
            .filter(|&mi| population.weight(mi) > 0.0)
            .flat_map(|mi| self.allowed_final(mi).map(move |mf| (mi, mf)))
            .map(|(mi, mf)| (population.weight(mi), self.tensor(mi, mf, delta) * e_in))
            .collect();
        let mut total = 0.0;
        for (x, wx) in nodes.iter().zip(&weights) {
            let sin_t = (1.0 - x * x).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                let dir = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), *x);
                let (b1, b2) = transverse_basis(&dir);
                let mut s = 0.0;
                for (p, field) in &fields {
                    for b in [b1, b2] {
                        let pol = b.map(|c| Complex64::new(c, 0.0));
                        s += p * pol.dotc(field).norm_sqr();
                    }
                }
                total += wx * s * (2.0 * PI / n_phi as f64);
            }
        }
        total
    }

    /// Normalization constant c for the given population, checked for
    /// quadrature convergence at 1e-6 relative.
    pub fn differential_norm(&self, population: &GroundPopulation) -> Result<f64, AtomicError> {
        let e_in = CVec3::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let reference = self.lines.iter().find(|l| l.center == 0.0).expect("validated atom has a reference line");
        let delta = reference.center;
        let coarse = self.integrated_intensity(population, &e_in, delta, 6);
        let fine = self.integrated_intensity(population, &e_in, delta, 12);
        if !(fine > 0.0) || ((coarse - fine) / fine).abs() > 1e-6 {
            return Err(AtomicError::Quadrature { coarse, fine });
        }
        Ok(self.elastic_cross_section_population(population, &e_in, delta) / fine)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Convenience wrapper building the model on the fly. Prefer [`ScatteringModel::amplitude`] in loops.
pub fn scattering_amplitude(
    atom: &AtomSpec,
    omega_rest: f64,
    e_in: &CVec3,
    e_out: &CVec3,
    mi: i32,
    mf: i32,
) -> Result<Complex64, AtomicError> {
    Ok(ScatteringModel::new(atom)?.amplitude(omega_rest, e_in, e_out, mi, mf))
}

/// Extinction cross section in cm^2 at detuning `delta` (units of gamma).
pub fn total_cross_section(atom: &AtomSpec, delta: f64) -> f64 {
    atom.sigma0_cm2
        * atom
            .excited
            .iter()
            .map(|e| {
                let x = 2.0 * (delta - atom.offset_gamma(e));
                e.strength / (1.0 + x * x)
            })
            .sum::<f64>()
}

/// Normalization constant c with `c ∫dΩ Σ_pol Σ_Mf <|A|^2>_Mi` equal to the elastic cross section.
pub fn normalize_differential(atom: &AtomSpec, population: &GroundPopulation) -> Result<f64, AtomicError> {
    ScatteringModel::new(atom)?.differential_norm(population)
}

/// Phase factor e^{i x}.
pub fn phase(x: f64) -> Complex64 {
    (I * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::circular;
    use approx::assert_relative_eq;

    fn cv(x: f64, y: f64, z: f64) -> CVec3 {
        CVec3::new(Complex64::new(x, 0.0), Complex64::new(y, 0.0), Complex64::new(z, 0.0))
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let int = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert_relative_eq!(int(0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(int(10), 2.0 / 11.0, epsilon = 1e-14);
    }

    #[test]
    fn classical_dipole_is_scalar() {
        let model = ScatteringModel::new(&AtomSpec::classical_dipole()).unwrap();
        let t = model.tensor(0, 0, 0.0);
        let expect = Complex64::new(0.0, -2.0);
        for a in 0..3 {
            for b in 0..3 {
                let e = if a == b { expect } else { Complex64::new(0.0, 0.0) };
                assert!((t[(a, b)] - e).norm() < 1e-14);
            }
        }
        // Linear e_in = e_out at resonance: purely imaginary amplitude.
        let a = model.amplitude(0.0, &cv(1.0, 0.0, 0.0), &cv(1.0, 0.0, 0.0), 0, 0);
        assert!(a.re.abs() < 1e-14 && a.im.abs() > 1.0);
        // Analytic dipole normalization: c = 3 sigma0 / (32 pi).
        let sigma0 = AtomSpec::classical_dipole().sigma0_cm2;
        assert_relative_eq!(model.norm_cm2(), 3.0 * sigma0 / (32.0 * PI), max_relative = 1e-12);
    }

    #[test]
    fn stretched_state_single_intermediate() {
        let atom = AtomSpec::rb85_d2();
        let model = ScatteringModel::new(&atom).unwrap();
        let sigma_plus = circular(&Vec3::z(), 1);
        // Absorbed field couples only to F'=4 M'=4 from M=3: the amplitude has a single pole.
        for mf in model.allowed_final(3).collect::<Vec<_>>() {
            let out = model.tensor(3, mf, 0.0) * sigma_plus;
            if mf != 3 {
                assert!(out.norm() < 1e-14, "M=3 -> {mf} must vanish for sigma+");
            }
        }
        let detuned = |w: f64| (model.tensor(3, 3, w) * sigma_plus).norm() * Complex64::new(w, 0.5).norm();
        assert_relative_eq!(detuned(-20.0), detuned(3.0), max_relative = 1e-12);
    }

    #[test]
    fn far_sublevels_vanish() {
        let model = ScatteringModel::new(&AtomSpec::rb85_d2()).unwrap();
        let e = cv(1.0, 0.0, 0.0);
        assert_eq!(model.amplitude(0.0, &e, &e, 0, 3), Complex64::new(0.0, 0.0));
        assert_eq!(model.allowed_final(-3).count(), 3);
        assert_eq!(model.allowed_final(0).count(), 5);
    }

    #[test]
    fn cross_sections() {
        let atom = AtomSpec::rb85_d2();
        let s0 = total_cross_section(&atom, 0.0) / atom.sigma0_cm2;
        assert!(s0 > 1.0 && s0 - 1.0 < 1e-2);
        let single = AtomSpec::rb85_single_line();
        assert_relative_eq!(total_cross_section(&single, 0.5), single.sigma0_cm2 / 2.0, max_relative = 1e-14);
        // sigma0 against 3 lambda^2 / 2pi times the isotropic Zeeman average (2F'+1)/(3(2F+1)).
        let lambda_cm = atom.wavelength_nm * 1e-7;
        let estimate = 3.0 * lambda_cm * lambda_cm / (2.0 * PI) * 9.0 / 21.0;
        assert_relative_eq!(atom.sigma0_cm2, estimate, max_relative = 1e-2);
        assert!((atom.sigma0_cm2 - 1.25e-9).abs() < 0.01e-9);
        let model = ScatteringModel::new(&atom).unwrap();
        assert_relative_eq!(model.total_cross_section(1.3), total_cross_section(&atom, 1.3), max_relative = 1e-14);
        // Far wings fall off like delta^-2.
        let r = model.total_cross_section(1e4) / model.total_cross_section(2e4);
        assert_relative_eq!(r, 4.0, max_relative = 1e-2);
    }

    #[test]
    fn stretched_population_absorbs_sigma_plus_more() {
        let model = ScatteringModel::new(&AtomSpec::rb85_d2()).unwrap();
        let e = circular(&Vec3::z(), 1);
        let stretched = GroundPopulation::stretched(3);
        let iso = GroundPopulation::isotropic(3);
        assert_relative_eq!(
            model.total_cross_section_population(&iso, &e, 0.7),
            model.total_cross_section(0.7),
            max_relative = 1e-12
        );
        // Only F'=4 is reachable and the CG is 1: factor 3 * 7 / 9.
        let s = model.total_cross_section_population(&stretched, &e, 0.0);
        assert_relative_eq!(s, model.sigma0_cm2() * 7.0 / 3.0, max_relative = 1e-12);
    }
}
