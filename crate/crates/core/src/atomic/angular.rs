//! Wigner 3j / 6j symbols and Clebsch-Gordan coefficients.
//!
//! Angular momenta are accepted as `f64` and must be integer or half-integer.
//! Internally everything is carried as doubled integers so the selection rules
//! are exact.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AngularError {
    #[error("angular momentum {0} is negative")]
    NegativeJ(f64),
    #[error("{0} is not an integer or half-integer")]
    NotHalfInteger(f64),
}

const MAX_FACTORIAL: usize = 170;

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0 && (n as usize) <= MAX_FACTORIAL);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn doubled(x: f64) -> Result<i32, AngularError> {
    let d = 2.0 * x;
    if (d - d.round()).abs() > 1e-9 {
        return Err(AngularError::NotHalfInteger(x));
    }
    Ok(d.round() as i32)
}

fn doubled_j(x: f64) -> Result<i32, AngularError> {
    if x < 0.0 {
        return Err(AngularError::NegativeJ(x));
    }
    doubled(x)
}

fn triangle(dj1: i32, dj2: i32, dj3: i32) -> bool {
    dj3 >= (dj1 - dj2).abs() && dj3 <= dj1 + dj2 && (dj1 + dj2 + dj3) % 2 == 0
}

/// Triangle coefficient Δ(abc) from doubled arguments; caller checks the triangle rule.
fn delta(da: i32, db: i32, dc: i32) -> f64 {
    let f = |n: i32| factorial(n / 2);
    (f(da + db - dc) * f(da - db + dc) * f(-da + db + dc) / f(da + db + dc + 2)).sqrt()
}

/// 3j symbol from doubled arguments using the Racah sum.
pub(crate) fn wigner_3j_doubled(dj1: i32, dj2: i32, dj3: i32, dm1: i32, dm2: i32, dm3: i32) -> f64 {
    if dm1 + dm2 + dm3 != 0 || !triangle(dj1, dj2, dj3) {
        return 0.0;
    }
    if dm1.abs() > dj1 || dm2.abs() > dj2 || dm3.abs() > dj3 {
        return 0.0;
    }
    if (dj1 + dm1) % 2 != 0 || (dj2 + dm2) % 2 != 0 || (dj3 + dm3) % 2 != 0 {
        return 0.0;
    }
    let f = |n: i32| factorial(n / 2);
    let pre = delta(dj1, dj2, dj3)
        * (f(dj1 + dm1) * f(dj1 - dm1) * f(dj2 + dm2) * f(dj2 - dm2) * f(dj3 + dm3) * f(dj3 - dm3)).sqrt();

    // Summation bounds, all in doubled units.
    let kmin = 0.max(dj2 - dj3 - dm1).max(dj1 - dj3 + dm2);
    let kmax = (dj1 + dj2 - dj3).min(dj1 - dm1).min(dj2 + dm2);
    let mut sum = 0.0;
    let mut k = kmin;
    while k <= kmax {
        let denom = f(k)
            * f(dj1 + dj2 - dj3 - k)
            * f(dj1 - dm1 - k)
            * f(dj2 + dm2 - k)
            * f(dj3 - dj2 + dm1 + k)
            * f(dj3 - dj1 - dm2 + k);
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
        k += 2;
    }
    let phase = if ((dj1 - dj2 - dm3) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * pre * sum
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
///
/// Violated selection rules give `0.0`; negative or non-half-integer
/// arguments are rejected.
pub fn wigner_3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64, AngularError> {
    let (dj1, dj2, dj3) = (doubled_j(j1)?, doubled_j(j2)?, doubled_j(j3)?);
    let (dm1, dm2, dm3) = (doubled(m1)?, doubled(m2)?, doubled(m3)?);
    Ok(wigner_3j_doubled(dj1, dj2, dj3, dm1, dm2, dm3))
}

pub(crate) fn wigner_6j_doubled(dj1: i32, dj2: i32, dj3: i32, dj4: i32, dj5: i32, dj6: i32) -> f64 {
    // Triads: (j1 j2 j3), (j1 j5 j6), (j4 j2 j6), (j4 j5 j3).
    if !triangle(dj1, dj2, dj3) || !triangle(dj1, dj5, dj6) || !triangle(dj4, dj2, dj6) || !triangle(dj4, dj5, dj3) {
        return 0.0;
    }
    let f = |n: i32| factorial(n / 2);
    let pre = delta(dj1, dj2, dj3) * delta(dj1, dj5, dj6) * delta(dj4, dj2, dj6) * delta(dj4, dj5, dj3);
    let a = [dj1 + dj2 + dj3, dj1 + dj5 + dj6, dj4 + dj2 + dj6, dj4 + dj5 + dj3];
    let b = [dj1 + dj2 + dj4 + dj5, dj2 + dj3 + dj5 + dj6, dj3 + dj1 + dj6 + dj4];
    let tmin = *a.iter().max().unwrap();
    let tmax = *b.iter().min().unwrap();
    let mut sum = 0.0;
    let mut t = tmin;
    while t <= tmax {
        let mut denom = 1.0;
        for &ai in &a {
            denom *= f(t - ai);
        }
        for &bi in &b {
            denom *= f(bi - t);
        }
        let sign = if (t / 2) % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * f(t + 2) / denom;
        t += 2;
    }
    pre * sum
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}`.
pub fn wigner_6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64, AngularError> {
    Ok(wigner_6j_doubled(
        doubled_j(j1)?,
        doubled_j(j2)?,
        doubled_j(j3)?,
        doubled_j(j4)?,
        doubled_j(j5)?,
        doubled_j(j6)?,
    ))
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` (Condon-Shortley phases).
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> Result<f64, AngularError> {
    let (dj1, dj2, dj) = (doubled_j(j1)?, doubled_j(j2)?, doubled_j(j)?);
    let (dm1, dm2, dm) = (doubled(m1)?, doubled(m2)?, doubled(m)?);
    Ok(clebsch_gordan_doubled(dj1, dm1, dj2, dm2, dj, dm))
}

pub(crate) fn clebsch_gordan_doubled(dj1: i32, dm1: i32, dj2: i32, dm2: i32, dj: i32, dm: i32) -> f64 {
    if dm1 + dm2 != dm {
        return 0.0;
    }
    let w = wigner_3j_doubled(dj1, dj2, dj, dm1, dm2, -dm);
    let phase = if ((dj1 - dj2 + dm) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * ((dj + 1) as f64).sqrt() * w
}

/// Dipole coupling `<F M; 1 q | F' M'>` with integer angular momenta.
pub fn dipole_cg(f: i32, m: i32, q: i32, fp: i32, mp: i32) -> f64 {
    if !(-1..=1).contains(&q) || m + q != mp {
        return 0.0;
    }
    clebsch_gordan_doubled(2 * f, 2 * m, 2, 2 * q, 2 * fp, 2 * mp)
}
