//! Level schemes, Zeeman states and ground-state populations.

use serde::{Deserialize, Serialize};

use super::angular::wigner_6j;
use super::AtomicError;

/// One excited hyperfine level reachable from the ground level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitedLevel {
    /// Total angular momentum F'.
    pub f_prime: i32,
    /// Frequency offset of the F -> F' line from the reference line, in MHz.
    pub offset_mhz: f64,
    /// Relative absorption strength S_FF', the reference line being 1.
    pub strength: f64,
    /// Fraction of the F' decay that returns to the ground level F.
    #[serde(default = "one")]
    pub branching: f64,
}

fn one() -> f64 {
    1.0
}

/// Hyperfine level scheme of a single F -> {F'} transition manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub ground_f: i32,
    pub excited: Vec<ExcitedLevel>,
    /// Natural width of the reference line, MHz.
    pub gamma_mhz: f64,
    pub wavelength_nm: f64,
    pub mass_kg: f64,
    /// Resonant cross section of the reference line for an unpolarized ground state, cm^2.
    pub sigma0_cm2: f64,
}

/// 85Rb D2 hyperfine splittings relative to F'=4, MHz.
pub const RB85_F3_OFFSET_MHZ: f64 = -120.6;
pub const RB85_F2_OFFSET_MHZ: f64 = -184.0;
/// Peak cross section that gives an optical depth of 6 for
/// n0 = 1.6e10 cm^-3 and r0 = 1.2 mm.
pub const RB85_SIGMA0_CM2: f64 = 6.0 / (2.506_628_274_631_000_2 * 1.6e10 * 0.12);
const ATOMIC_MASS_UNIT_KG: f64 = 1.660_539_066_60e-27;

/// Relative absorption strength and decay branching of each F -> F' line of a
/// J -> J' fine-structure transition with nuclear spin I.
///
/// Strengths are (2F'+1)(2J+1){J J' 1; F' F I}^2 and branchings
/// (2F+1)(2J'+1){J J' 1; F' F I}^2.
pub fn hyperfine_line_factors(j: f64, j_prime: f64, nuclear_spin: f64, f: i32, f_prime: i32) -> (f64, f64) {
    let six = wigner_6j(j, j_prime, 1.0, f_prime as f64, f as f64, nuclear_spin).unwrap_or(0.0);
    let strength = (2.0 * f_prime as f64 + 1.0) * (2.0 * j + 1.0) * six * six;
    let branching = (2.0 * f as f64 + 1.0) * (2.0 * j_prime + 1.0) * six * six;
    (strength, branching)
}

impl AtomSpec {
    /// 85Rb, 5s S1/2 F=3 -> 5p P3/2 F'=4,3,2.
    pub fn rb85_d2() -> Self {
        let (s_ref, _) = hyperfine_line_factors(0.5, 1.5, 2.5, 3, 4);
        let excited = [(4, 0.0), (3, RB85_F3_OFFSET_MHZ), (2, RB85_F2_OFFSET_MHZ)]
            .into_iter()
            .map(|(fp, offset)| {
                let (s, b) = hyperfine_line_factors(0.5, 1.5, 2.5, 3, fp);
                ExcitedLevel { f_prime: fp, offset_mhz: offset, strength: s / s_ref, branching: b.min(1.0) }
            })
            .collect();
        AtomSpec {
            ground_f: 3,
            excited,
            gamma_mhz: 5.9,
            wavelength_nm: 780.24,
            mass_kg: 85.0 * ATOMIC_MASS_UNIT_KG,
            sigma0_cm2: RB85_SIGMA0_CM2,
        }
    }

    /// Same atom with only the reference F=3 -> F'=4 line.
    pub fn rb85_single_line() -> Self {
        let mut atom = Self::rb85_d2();
        atom.excited.retain(|e| e.offset_mhz == 0.0);
        atom
    }

    /// F=0 -> F'=1 transition: a classical isotropic dipole scatterer.
    pub fn classical_dipole() -> Self {
        AtomSpec {
            ground_f: 0,
            excited: vec![ExcitedLevel { f_prime: 1, offset_mhz: 0.0, strength: 1.0, branching: 1.0 }],
            ..Self::rb85_d2()
        }
    }

    pub fn reference_line(&self) -> &ExcitedLevel {
        self.excited.iter().find(|e| e.offset_mhz == 0.0).expect("validated atom has a reference line")
    }

    /// Offset of line `e` from the reference line in units of gamma.
    pub fn offset_gamma(&self, e: &ExcitedLevel) -> f64 {
        e.offset_mhz / self.gamma_mhz
    }

    pub fn wavenumber_per_mm(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.wavelength_nm * 1e-6)
    }

    /// Collect every invariant violation.
    pub fn validate(&self) -> Result<(), AtomicError> {
        let mut problems = Vec::new();
        if self.ground_f < 0 {
            problems.push(format!("ground_f = {} is negative", self.ground_f));
        }
        if !(self.gamma_mhz > 0.0) {
            problems.push(format!("gamma_mhz = {} must be positive", self.gamma_mhz));
        }
        if !(self.wavelength_nm > 0.0) {
            problems.push(format!("wavelength_nm = {} must be positive", self.wavelength_nm));
        }
        if !(self.mass_kg > 0.0) {
            problems.push(format!("mass_kg = {} must be positive", self.mass_kg));
        }
        if !(self.sigma0_cm2 > 0.0) {
            problems.push(format!("sigma0_cm2 = {} must be positive", self.sigma0_cm2));
        }
        let refs: Vec<_> = self.excited.iter().filter(|e| e.offset_mhz == 0.0).collect();
        if refs.len() != 1 {
            problems.push(format!("exactly one excited level needs offset 0, found {}", refs.len()));
        } else if (refs[0].strength - 1.0).abs() > 1e-12 {
            problems.push(format!("reference line strength is {}, expected 1", refs[0].strength));
        }
        for e in &self.excited {
            if (e.f_prime - self.ground_f).abs() > 1 || e.f_prime < 0 || (e.f_prime == 0 && self.ground_f == 0) {
                problems.push(format!("F' = {} not dipole-coupled to F = {}", e.f_prime, self.ground_f));
            }
            if !(e.strength > 0.0) {
                problems.push(format!("strength of F' = {} must be positive", e.f_prime));
            }
            if !(e.branching > 0.0 && e.branching <= 1.0) {
                problems.push(format!("branching of F' = {} must lie in (0, 1]", e.f_prime));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(AtomicError::Invalid(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZeemanState {
    pub f: i32,
    pub m: i32,
}

impl ZeemanState {
    pub fn new(f: i32, m: i32) -> Result<Self, AtomicError> {
        if m.abs() > f {
            return Err(AtomicError::Invalid(vec![format!("|M| = {} exceeds F = {f}", m.abs())]));
        }
        Ok(ZeemanState { f, m })
    }
}

/// Probabilities of the ground Zeeman sublevels, indexed by `M + F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundPopulation {
    f: i32,
    weights: Vec<f64>,
}

impl GroundPopulation {
    pub fn new(f: i32, weights: Vec<f64>) -> Result<Self, AtomicError> {
        let mut problems = Vec::new();
        if weights.len() != (2 * f + 1) as usize {
            problems.push(format!("expected {} weights, got {}", 2 * f + 1, weights.len()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            problems.push("population weights must be non-negative".to_string());
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            problems.push(format!("population weights sum to {total}, expected 1"));
        }
        if problems.is_empty() {
            Ok(GroundPopulation { f, weights })
        } else {
            Err(AtomicError::Invalid(problems))
        }
    }

    pub fn isotropic(f: i32) -> Self {
        let n = (2 * f + 1) as usize;
        GroundPopulation { f, weights: vec![1.0 / n as f64; n] }
    }

    /// All atoms in the M = +F sublevel.
    pub fn stretched(f: i32) -> Self {
        let n = (2 * f + 1) as usize;
        let mut weights = vec![0.0; n];
        weights[n - 1] = 1.0;
        GroundPopulation { f, weights }
    }

    pub fn f(&self) -> i32 {
        self.f
    }

    pub fn weight(&self, m: i32) -> f64 {
        if m.abs() > self.f {
            0.0
        } else {
            self.weights[(m + self.f) as usize]
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Inverse-CDF draw of a sublevel.
    pub fn sample(&self, u: f64) -> i32 {
        let mut acc = 0.0;
        let mut last = -self.f;
        for (i, w) in self.weights.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = i as i32 - self.f;
            if u < acc {
                return last;
            }
        }
        last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationPreset {
    Isotropic,
    Stretched,
}

impl PopulationPreset {
    pub fn build(self, f: i32) -> GroundPopulation {
        match self {
            PopulationPreset::Isotropic => GroundPopulation::isotropic(f),
            PopulationPreset::Stretched => GroundPopulation::stretched(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rb85_defaults_are_valid() {
        let atom = AtomSpec::rb85_d2();
        atom.validate().unwrap();
        let s: Vec<f64> = atom.excited.iter().map(|e| e.strength).collect();
        assert!((s[1] - 70.0 / 162.0).abs() < 1e-12);
        assert!((s[2] - 70.0 / 567.0).abs() < 1e-12);
        let b: Vec<f64> = atom.excited.iter().map(|e| e.branching).collect();
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!((b[1] - 5.0 / 9.0).abs() < 1e-12);
        assert!((b[2] - 2.0 / 9.0).abs() < 1e-12);
        AtomSpec::classical_dipole().validate().unwrap();
        AtomSpec::rb85_single_line().validate().unwrap();
    }

    #[test]
    fn invalid_atoms_report_all_problems() {
        let mut atom = AtomSpec::rb85_d2();
        atom.gamma_mhz = -1.0;
        atom.excited[1].f_prime = 5;
        atom.excited[0].offset_mhz = 3.0;
        let AtomicError::Invalid(problems) = atom.validate().unwrap_err() else { panic!() };
        assert_eq!(problems.len(), 3, "{problems:?}");
    }

    #[test]
    fn populations() {
        assert!(GroundPopulation::new(1, vec![0.5, 0.5, 0.1]).is_err());
        assert!(GroundPopulation::new(1, vec![1.5, -0.5, 0.0]).is_err());
        let p = GroundPopulation::stretched(3);
        assert_eq!(p.sample(0.0), 3);
        assert_eq!(p.sample(0.999), 3);
        let iso = GroundPopulation::isotropic(3);
        assert_eq!(iso.sample(0.0), -3);
        assert_eq!(iso.sample(0.5), 0);
        assert_eq!(iso.sample(0.9999), 3);
        assert!(ZeemanState::new(3, 4).is_err());
    }
}
