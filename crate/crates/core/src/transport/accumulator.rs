//! Exact, order-independent tallies of ladder and crossed intensities.
//!
//! Contributions are stored as 128-bit fixed-point integers so that merging
//! partial results is exactly associative and commutative: totals do not
//! depend on how trajectories were split between workers. Trajectories are
//! grouped in blocks, one per random stream, and standard errors come from a
//! jackknife over blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::amplitude::PathPair;
use super::{Channel, TransportError};
use crate::geometry::{CVec3, Vec3};

const FRACTION_BITS: i32 = 64;

/// Fixed-point sum with 64 fractional bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedSum(i128);

impl FixedSum {
    /// Largest magnitude accepted by [`FixedSum::encode`].
    pub const LIMIT: f64 = 1e15;

    /// Fixed-point encoding, `None` for non-finite or out-of-range input.
    pub fn encode(x: f64) -> Option<i128> {
        if !x.is_finite() || x.abs() > Self::LIMIT {
            return None;
        }
        Some((x * 2f64.powi(FRACTION_BITS)).round() as i128)
    }

    pub fn add_raw(&mut self, raw: i128) {
        self.0 = self.0.saturating_add(raw);
    }

    pub fn add(&mut self, x: f64) -> bool {
        match Self::encode(x) {
            Some(raw) => {
                self.add_raw(raw);
                true
            }
            None => false,
        }
    }

    pub fn merge(&mut self, other: &FixedSum) {
        self.0 = self.0.saturating_add(other.0);
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 * 2f64.powi(-FRACTION_BITS)
    }

    pub fn raw(&self) -> i128 {
        self.0
    }
}

fn merge_vec(a: &mut [FixedSum], b: &[FixedSum]) {
    for (x, y) in a.iter_mut().zip(b) {
        x.merge(y);
    }
}

/// Histogram of detected frequencies, with one underflow and one overflow bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl SpectrumBins {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Slot index: 0 is underflow, `count + 1` overflow.
    pub fn slot(&self, omega: f64) -> usize {
        if omega < self.lo {
            0
        } else if omega >= self.hi {
            self.count + 1
        } else {
            (((omega - self.lo) / self.width()) as usize).min(self.count - 1) + 1
        }
    }
}

/// Tallies of one random stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub trajectories: u64,
    pub rejected: u64,
    /// Per order, index `order - 1`.
    pub ladder: Vec<FixedSum>,
    pub crossed: Vec<FixedSum>,
    /// Crossed intensity summed over orders, per cone angle.
    pub crossed_theta: Vec<FixedSum>,
    /// Per spectrum slot.
    pub spectrum_ladder: Vec<FixedSum>,
    pub spectrum_crossed: Vec<FixedSum>,
}

impl Block {
    fn merge(&mut self, other: &Block) {
        self.trajectories += other.trajectories;
        self.rejected += other.rejected;
        merge_vec(&mut self.ladder, &other.ladder);
        merge_vec(&mut self.crossed, &other.crossed);
        merge_vec(&mut self.crossed_theta, &other.crossed_theta);
        merge_vec(&mut self.spectrum_ladder, &other.spectrum_ladder);
        merge_vec(&mut self.spectrum_crossed, &other.spectrum_crossed);
    }

    pub fn ladder_total(&self) -> f64 {
        sum_values(&self.ladder)
    }

    pub fn crossed_total(&self) -> f64 {
        sum_values(&self.crossed)
    }
}

fn sum_values(v: &[FixedSum]) -> f64 {
    let mut acc = FixedSum::default();
    for x in v {
        acc.merge(x);
    }
    acc.value()
}

/// Ladder and crossed tallies for one analyzer channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub channel: Channel,
    analyzer: CVec3,
    k: f64,
    beam: Vec3,
    max_order: usize,
    theta_rad: Vec<f64>,
    spectrum: Option<SpectrumBins>,
    blocks: BTreeMap<u64, Block>,
}

/// Contributions of one trajectory before they are committed.
struct Staged {
    ladder: Vec<(usize, i128)>,
    crossed: Vec<(usize, i128)>,
    theta: Vec<i128>,
    spectrum_ladder: Vec<(usize, i128)>,
    spectrum_crossed: Vec<(usize, i128)>,
}

impl Accumulator {
    pub fn new(
        channel: Channel,
        analyzer: CVec3,
        k_per_mm: f64,
        beam: Vec3,
        max_order: usize,
        theta_rad: Vec<f64>,
        spectrum: Option<SpectrumBins>,
    ) -> Self {
        Accumulator { channel, analyzer, k: k_per_mm, beam, max_order, theta_rad, spectrum, blocks: BTreeMap::new() }
    }

    /// Empty accumulator with the same layout.
    pub fn empty_like(&self) -> Self {
        Accumulator { blocks: BTreeMap::new(), ..self.clone() }
    }

    fn new_block(&self) -> Block {
        let slots = self.spectrum.map_or(0, |s| s.count + 2);
        Block {
            trajectories: 0,
            rejected: 0,
            ladder: vec![FixedSum::default(); self.max_order],
            crossed: vec![FixedSum::default(); self.max_order],
            crossed_theta: vec![FixedSum::default(); self.theta_rad.len()],
            spectrum_ladder: vec![FixedSum::default(); slots],
            spectrum_crossed: vec![FixedSum::default(); slots],
        }
    }

    pub fn theta_rad(&self) -> &[f64] {
        &self.theta_rad
    }

    pub fn spectrum(&self) -> Option<SpectrumBins> {
        self.spectrum
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&u64, &Block)> {
        self.blocks.iter()
    }

    /// Azimuthally averaged interference phase at cone angle `theta`.
    fn cone_factor(&self, theta: f64, separation: &Vec3) -> (f64, f64) {
        let along = separation.dot(&self.beam);
        let across = (separation - self.beam * along).norm();
        let j0 = libm::j0(self.k * theta.sin() * across);
        let phi = self.k * (1.0 - theta.cos()) * along;
        (j0 * phi.cos(), j0 * phi.sin())
    }

    fn stage(&self, pairs: &[PathPair]) -> Option<Staged> {
        let mut staged = Staged {
            ladder: Vec::with_capacity(pairs.len()),
            crossed: Vec::with_capacity(pairs.len()),
            theta: vec![0; self.theta_rad.len()],
            spectrum_ladder: Vec::new(),
            spectrum_crossed: Vec::new(),
        };
        for pair in pairs {
            if pair.order == 0 || pair.order > self.max_order {
                return None;
            }
            let slot = pair.order - 1;
            let (ad, ar) = pair.amplitudes(&self.analyzer);
            let w = pair.weight;
            let (ladder, product) = if pair.order == 1 {
                (w * ad.norm_sqr(), None)
            } else {
                (0.5 * w * (ad.norm_sqr() + ar.norm_sqr()), Some(ad * ar.conj() * w))
            };
            staged.ladder.push((slot, FixedSum::encode(ladder)?));
            let crossed = product.map_or(0.0, |p| p.re);
            staged.crossed.push((slot, FixedSum::encode(crossed)?));
            if let Some(p) = product {
                for (i, &theta) in self.theta_rad.iter().enumerate() {
                    let (c, s) = self.cone_factor(theta, &pair.separation);
                    staged.theta[i] = staged.theta[i].checked_add(FixedSum::encode(p.re * c - p.im * s)?)?;
                }
            }
            if let Some(bins) = self.spectrum {
                if pair.order == 1 {
                    staged.spectrum_ladder.push((bins.slot(pair.freq_direct), FixedSum::encode(ladder)?));
                } else {
                    let ld = 0.5 * w * ad.norm_sqr();
                    let lr = 0.5 * w * ar.norm_sqr();
                    staged.spectrum_ladder.push((bins.slot(pair.freq_direct), FixedSum::encode(ld)?));
                    staged.spectrum_ladder.push((bins.slot(pair.freq_reverse), FixedSum::encode(lr)?));
                    let half = FixedSum::encode(0.5 * crossed)?;
                    staged.spectrum_crossed.push((bins.slot(pair.freq_direct), half));
                    staged.spectrum_crossed.push((bins.slot(pair.freq_reverse), half));
                }
            }
        }
        Some(staged)
    }

    /// Add the contributions of one trajectory to block `block`. Trajectories
    /// with non-finite or out-of-range contributions are counted as rejected.
    pub fn accumulate(&mut self, block: u64, pairs: &[PathPair]) {
        let staged = self.stage(pairs);
        let fresh = self.new_block();
        let b = self.blocks.entry(block).or_insert(fresh);
        b.trajectories += 1;
        let Some(s) = staged else {
            b.rejected += 1;
            return;
        };
        for (slot, raw) in s.ladder {
            b.ladder[slot].add_raw(raw);
        }
        for (slot, raw) in s.crossed {
            b.crossed[slot].add_raw(raw);
        }
        for (x, raw) in b.crossed_theta.iter_mut().zip(s.theta) {
            x.add_raw(raw);
        }
        for (slot, raw) in s.spectrum_ladder {
            b.spectrum_ladder[slot].add_raw(raw);
        }
        for (slot, raw) in s.spectrum_crossed {
            b.spectrum_crossed[slot].add_raw(raw);
        }
    }

    fn same_layout(&self, other: &Accumulator) -> bool {
        self.channel == other.channel
            && self.analyzer == other.analyzer
            && self.k == other.k
            && self.beam == other.beam
            && self.max_order == other.max_order
            && self.theta_rad == other.theta_rad
            && self.spectrum == other.spectrum
    }

    /// Exact merge; blocks present in both are summed.
    pub fn merge(&mut self, other: &Accumulator) -> Result<(), TransportError> {
        if !self.same_layout(other) {
            return Err(TransportError::LayoutMismatch);
        }
        for (id, block) in &other.blocks {
            match self.blocks.get_mut(id) {
                Some(b) => b.merge(block),
                None => {
                    self.blocks.insert(*id, block.clone());
                }
            }
        }
        Ok(())
    }

    pub fn trajectories(&self) -> u64 {
        self.blocks.values().map(|b| b.trajectories).sum()
    }

    pub fn rejected(&self) -> u64 {
        self.blocks.values().map(|b| b.rejected).sum()
    }

    /// All blocks merged into one.
    pub fn total(&self) -> Block {
        let mut t = self.new_block();
        for b in self.blocks.values() {
            t.merge(b);
        }
        t
    }

    /// Mean ladder and crossed intensity per trajectory, by order (index `order - 1`).
    pub fn per_order(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.total();
        let n = t.trajectories.max(1) as f64;
        (t.ladder.iter().map(|x| x.value() / n).collect(), t.crossed.iter().map(|x| x.value() / n).collect())
    }

    /// Jackknife estimate of `f` applied to per-trajectory means of the
    /// quantities extracted by `extract` from each block.
    pub fn jackknife<E, F>(&self, extract: E, f: F) -> (f64, f64)
    where
        E: Fn(&Block) -> Vec<f64>,
        F: Fn(&[f64]) -> f64,
    {
        let samples: Vec<(u64, Vec<f64>)> = self.blocks.values().map(|b| (b.trajectories, extract(b))).collect();
        jackknife(&samples, f)
    }
}

/// Jackknife over blocks. Each sample is (trajectory count, sums); `f` is
/// evaluated on the per-trajectory means.
pub fn jackknife<F: Fn(&[f64]) -> f64>(samples: &[(u64, Vec<f64>)], f: F) -> (f64, f64) {
    let Some((_, first)) = samples.first() else {
        return (f64::NAN, f64::NAN);
    };
    let dim = first.len();
    let mut total = vec![0.0; dim];
    let mut count = 0u64;
    for (n, v) in samples {
        count += n;
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    let mean = |sums: &[f64], n: u64| sums.iter().map(|s| s / n as f64).collect::<Vec<_>>();
    let estimate = f(&mean(&total, count));
    let b = samples.len();
    if b < 2 {
        return (estimate, f64::NAN);
    }
    let mut loo = Vec::with_capacity(b);
    let mut scratch = vec![0.0; dim];
    for (n, v) in samples {
        for ((s, t), x) in scratch.iter_mut().zip(&total).zip(v) {
            *s = t - x;
        }
        loo.push(f(&mean(&scratch, count - n)));
    }
    let avg = loo.iter().sum::<f64>() / b as f64;
    let var = loo.iter().map(|x| (x - avg).powi(2)).sum::<f64>() * (b - 1) as f64 / b as f64;
    (estimate, var.sqrt())
}

/// Summary at exact backscattering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub x: f64,
    pub stderr: f64,
    /// Mean intensities per trajectory, mm^2.
    pub ladder: f64,
    pub crossed: f64,
    pub ladder_stderr: f64,
    pub crossed_stderr: f64,
    /// Share of the ladder intensity from single scattering.
    pub n1_fraction: f64,
    pub trajectories: u64,
    pub rejected: u64,
}

/// X_EF = 1 + C(θ=0)/L with a jackknife standard error.
pub fn enhancement(acc: &Accumulator) -> Result<Enhancement, TransportError> {
    let total = acc.total();
    if total.trajectories == 0 || !(total.ladder_total() > 0.0) {
        return Err(TransportError::EmptyAccumulator);
    }
    let extract = |b: &Block| vec![b.ladder_total(), b.crossed_total(), b.ladder.first().map_or(0.0, |x| x.value())];
    let (x, stderr) = acc.jackknife(extract, |m| 1.0 + m[1] / m[0]);
    let (ladder, ladder_stderr) = acc.jackknife(extract, |m| m[0]);
    let (crossed, crossed_stderr) = acc.jackknife(extract, |m| m[1]);
    let (n1_fraction, _) = acc.jackknife(extract, |m| m[2] / m[0]);
    Ok(Enhancement {
        x,
        stderr,
        ladder,
        crossed,
        ladder_stderr,
        crossed_stderr,
        n1_fraction,
        trajectories: total.trajectories,
        rejected: total.rejected,
    })
}
