#![allow(dead_code)]

/// Kolmogorov-Smirnov statistic of `samples` against the CDF `cdf`, which is
/// continuous on the finite reals. Infinite samples form an atom at +inf.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS statistic.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Sampled and exhaustive intensities of the last order of a fixed chain,
/// as (estimate, stderr, exact).
pub struct ChainCheck {
    pub channel: cbs_core::transport::Channel,
    pub ladder: (f64, f64, f64),
    pub crossed: (f64, f64, f64),
}

/// Sublevels sampled per atom versus the sum over every (Mi, Mf) chain,
/// weighted by the isotropic initial populations. Positions and velocities
/// are fixed.
pub fn fixed_chain_comparison(
    sim: &cbs_core::transport::Simulation,
    positions: &[nalgebra::Vector3<f64>],
    velocities: &[nalgebra::Vector3<f64>],
    samples: u64,
) -> Vec<ChainCheck> {
    use cbs_core::atomic::GroundPopulation;
    use cbs_core::transport::{path_amplitudes, Block};
    use rand::SeedableRng;

    let n = positions.len();
    let freq = sim.laser().detuning;
    let model = sim.model();
    let f = model.ground_f();
    let population = GroundPopulation::isotropic(f);
    let fixed = |chain: &[(i32, i32)], weight: f64| {
        let atoms: Vec<_> = (0..n).map(|k| (positions[k], velocities[k], chain[k].0, chain[k].1)).collect();
        path_amplitudes(sim, &sim.fixed_chain(freq, &atoms, weight))
    };

    let mut chains: Vec<(Vec<(i32, i32)>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..n {
        chains = chains
            .into_iter()
            .flat_map(|(chain, p)| {
                let population = &population;
                (-f..=f).flat_map(move |mi| {
                    let chain = chain.clone();
                    model.allowed_final(mi).map(move |mf| {
                        let mut c = chain.clone();
                        c.push((mi, mf));
                        (c, p * population.weight(mi))
                    })
                })
            })
            .collect();
    }
    let channels = sim.channels();
    let mut exact = vec![(0.0, 0.0); channels.len()];
    for (chain, p) in &chains {
        let pair = &fixed(chain, *p)[n - 1];
        for (k, ch) in channels.iter().enumerate() {
            let (ad, ar) = pair.amplitudes(&ch.analyzer(sim.laser()));
            exact[k].0 += 0.5 * p * (ad.norm_sqr() + ar.norm_sqr());
            exact[k].1 += p * (ad * ar.conj()).re;
        }
    }
    // Bring intensities to order one, well above the accumulator resolution.
    let scale = 1.0 / exact[0].0;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut accs = sim.empty_accumulators();
    for i in 0..samples {
        let mut weight = scale;
        let chain: Vec<_> = (0..n)
            .map(|_| {
                let (mi, mf, w) = sim.sample_sublevels(&mut rng);
                weight *= w;
                (mi, mf)
            })
            .collect();
        let pairs = fixed(&chain, weight);
        for acc in &mut accs {
            acc.accumulate(i / 1000, &pairs[n - 1..]);
        }
    }
    accs.iter()
        .zip(exact)
        .map(|(acc, (ladder, crossed))| {
            let slot = n - 1;
            let extract = |b: &Block| vec![b.ladder[slot].value(), b.crossed[slot].value()];
            let (l, ls) = acc.jackknife(extract, |m| m[0]);
            let (c, cs) = acc.jackknife(extract, |m| m[1]);
            ChainCheck { channel: acc.channel, ladder: (l, ls, ladder * scale), crossed: (c, cs, crossed * scale) }
        })
        .collect()
}
