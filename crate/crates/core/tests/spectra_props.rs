use cbs_core::atomic::AtomSpec;
use cbs_core::spectra::{cone_profile, response_spectrum, scan_bandwidth, scan_detuning, ScanConfig};
use cbs_core::transport::{Channel, Enhancement, LaserSpec};

fn combined(a: &Enhancement, b: &Enhancement) -> f64 {
    (a.x - b.x).abs() / a.stderr.hypot(b.stderr)
}

#[test]
fn analyzer_sums_agree_between_polarizations() {
    let n = 40_000;
    let lin = scan_detuning(&ScanConfig::new(AtomSpec::rb85_d2(), LaserSpec::linear(0.0), vec![0.0], n, 3)).unwrap();
    let hel = scan_detuning(&ScanConfig::new(AtomSpec::rb85_d2(), LaserSpec::helicity(0.0), vec![0.0], n, 4)).unwrap();
    let sum = |r: &cbs_core::spectra::ScanResult, a: Channel, b: Channel| {
        let (ea, eb) = (r.at(0.0, a).unwrap(), r.at(0.0, b).unwrap());
        // Both analyzers come from the same trajectories, so errors add linearly.
        (ea.ladder + eb.ladder, ea.ladder_stderr + eb.ladder_stderr)
    };
    let (l, ls) = sum(&lin, Channel::LinPar, Channel::LinPerp);
    let (h, hs) = sum(&hel, Channel::HelPar, Channel::HelPerp);
    assert!((l - h).abs() < 3.0 * ls.hypot(hs), "linear {l} +- {ls}, helicity {h} +- {hs}");
}

#[test]
fn zero_bandwidth_is_monochromatic() {
    let cfg = ScanConfig::new(AtomSpec::rb85_d2(), LaserSpec::helicity(0.0), vec![-1.0, 0.0, 1.0], 3_000, 11);
    let mono = scan_detuning(&cfg).unwrap();
    let zero = scan_bandwidth(&cfg, &[0.0]).unwrap().remove(0);
    assert_eq!(mono, zero);
}

#[test]
fn seeds_agree_statistically() {
    let run = |seed| {
        let cfg = ScanConfig::new(AtomSpec::rb85_d2(), LaserSpec::helicity(0.0), vec![0.0], 20_000, seed);
        scan_detuning(&cfg).unwrap()
    };
    let (a, b) = (run(101), run(202));
    assert_ne!(a, b);
    for ch in [Channel::HelPar, Channel::HelPerp] {
        let (ea, eb) = (a.at(0.0, ch).unwrap(), b.at(0.0, ch).unwrap());
        assert!(combined(&ea, &eb) < 3.0, "{ch}: {} +- {} vs {} +- {}", ea.x, ea.stderr, eb.x, eb.stderr);
    }
}

#[test]
fn response_integrates_to_total_intensity() {
    let mut laser = LaserSpec::helicity(1.5);
    laser.bandwidth = 1.0 / 6.0;
    let cfg = ScanConfig::new(AtomSpec::rb85_d2(), laser, vec![1.5], 20_000, 5);
    let r = response_spectrum(&cfg, Channel::HelPar, 40).unwrap();
    let total = r.total_intensity.value;
    assert!((r.integrated_total() - total).abs() <= 1e-9 * total, "{} vs {total}", r.integrated_total());
    let e = r.enhancement;
    assert!((e.ladder + e.crossed - total).abs() <= 1e-9 * total, "{} vs {total}", e.ladder + e.crossed);
    assert!(r.outside_window >= 0.0 && r.outside_window < 0.2 * total);
}

#[test]
fn cone_vanishes_at_large_angles() {
    let cfg = ScanConfig::new(AtomSpec::rb85_d2(), LaserSpec::helicity(0.0), vec![0.0], 20_000, 9);
    let p = cone_profile(&cfg, Channel::HelPar, &[0.0, 0.02, 0.04]).unwrap();
    assert!(p.enhancement[0] > 1.05, "{}", p.enhancement[0]);
    for i in 1..3 {
        assert!((p.enhancement[i] - 1.0).abs() < 3.0 * p.stderr[i] + 0.01, "{} +- {}", p.enhancement[i], p.stderr[i]);
    }
}

#[test]
fn single_line_spectrum_is_symmetric() {
    // Separate seeds: a shared stream would mirror every trajectory exactly.
    let side = |d: f64, seed| {
        let cfg = ScanConfig::new(AtomSpec::rb85_single_line(), LaserSpec::helicity(0.0), vec![d], 30_000, seed);
        scan_detuning(&cfg).unwrap()
    };
    let (a, b) = (side(-2.0, 17), side(2.0, 18));
    for ch in [Channel::HelPar, Channel::HelPerp] {
        let (lo, hi) = (a.at(-2.0, ch).unwrap(), b.at(2.0, ch).unwrap());
        assert!(combined(&lo, &hi) < 3.0, "{ch}: {} +- {} vs {} +- {}", lo.x, lo.stderr, hi.x, hi.stderr);
    }
}
