mod common;

use cbs_core::atomic::total_cross_section;
use cbs_core::atomic::AtomSpec;
use cbs_core::medium::{column_density, density, optical_depth_center, sample_free_path, CloudSpec, FreePath, Ray};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{adaptive_simpson, ks_p_value, ks_statistic};

fn cigar() -> CloudSpec {
    CloudSpec { n0_cm3: 1.6e10, radii_mm: [1.1, 1.38, 1.2], center_mm: [0.2, -0.1, 0.0] }
}

/// Column density by quadrature of the density along the ray, cm^-2.
fn quadrature_column(cloud: &CloudSpec, ray: &Ray, s_max: f64) -> f64 {
    let f = |s: f64| density(cloud, &ray.at(s)) * 0.1;
    let end = s_max.min(60.0);
    adaptive_simpson(&f, 0.0, end, 1e-3)
}

#[test]
fn closed_form_matches_quadrature() {
    let cloud = cigar();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let origin =
            Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let dir = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let ray = Ray::towards(origin, dir);
        for s_max in [0.3, 2.0, f64::INFINITY] {
            let exact = column_density(&cloud, &ray, s_max);
            let quad = quadrature_column(&cloud, &ray, s_max);
            assert!((exact - quad).abs() <= 1e-10 * quad + 1e-2, "{exact} vs {quad}");
        }
    }
}

#[test]
fn optical_depth_formula() {
    let cloud = CloudSpec::isotropic(1.6e10, 1.2);
    let atom = AtomSpec::rb85_single_line();
    let b = optical_depth_center(&cloud, &atom, 0.0);
    let formula = (2.0 * std::f64::consts::PI).sqrt() * atom.sigma0_cm2 * 1.6e10 * 0.12;
    assert!(((b - formula) / formula).abs() < 1e-12);
}

fn free_path_samples(n: usize) -> (Vec<f64>, CloudSpec, Ray, f64) {
    let cloud = cigar();
    let atom = AtomSpec::rb85_d2();
    let ray = Ray::towards(Vector3::new(0.4, 0.3, -6.0), Vector3::new(0.1, 0.05, 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples = (0..n)
        .map(|_| match sample_free_path(&cloud, &atom, 0.3, &ray, 1.0 - rng.random::<f64>()) {
            FreePath::Scatter { distance, .. } => distance,
            FreePath::Escape => f64::INFINITY,
        })
        .collect();
    (samples, cloud, ray, total_cross_section(&atom, 0.3))
}

#[test]
fn free_path_distribution_ks() {
    let n = 100_000;
    let (mut samples, cloud, ray, sigma) = free_path_samples(n);
    let cdf = |s: f64| if s.is_finite() { 1.0 - (-sigma * quadrature_column(&cloud, &ray, s)).exp() } else { 1.0 };
    let d = ks_statistic(&mut samples, cdf);
    let p = ks_p_value(d, n);
    assert!(p > 0.01, "D = {d}, p = {p}");
}

#[test]
fn free_path_depth_chi_squared() {
    let n = 100_000;
    let (samples, cloud, ray, sigma) = free_path_samples(n);
    let escape = (-sigma * quadrature_column(&cloud, &ray, f64::INFINITY)).exp();
    let bins = 20;
    let mut counts = vec![0usize; bins + 1];
    for s in &samples {
        if s.is_finite() {
            let f = 1.0 - (-sigma * quadrature_column(&cloud, &ray, *s)).exp();
            counts[((f / (1.0 - escape) * bins as f64) as usize).min(bins - 1)] += 1;
        } else {
            counts[bins] += 1;
        }
    }
    let mut chi2 = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let p = if i < bins { (1.0 - escape) / bins as f64 } else { escape };
        let e = p * n as f64;
        chi2 += (c as f64 - e).powi(2) / e;
    }
    // 20 degrees of freedom, p = 0.001.
    assert!(chi2 < 45.3, "chi2 = {chi2}, counts {counts:?}");
}
