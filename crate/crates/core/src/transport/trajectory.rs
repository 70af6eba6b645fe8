//! Random walk of the direct path through the cloud.

use rand::Rng;

use super::engine::{Simulation, CM2_TO_MM2};
use super::sampling::{sample_laser_frequency, sample_velocity};
use super::DirectionSampling;
use crate::atomic::phase;
use crate::geometry::{isotropic_direction, project_transverse, transverse_basis, CVec3, Vec3};
use crate::medium::{Ray, RayProfile};

use num_complex::Complex64;
use std::f64::consts::PI;

/// Distance upstream of the cloud centre, in units of the largest radius,
/// where incident rays start.
const UPSTREAM_RADII: f64 = 10.0;
/// Width of the transverse sampling Gaussian in units of the largest radius.
const SPOT_RADII: f64 = 1.25;
/// Lowest survival probability used by Russian roulette.
const MIN_SURVIVAL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub length_mm: f64,
    pub column_cm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterEvent {
    pub position: Vec3,
    /// Velocity in units of v0.
    pub velocity: Vec3,
    pub mi: i32,
    pub mf: i32,
    pub dir_in: Vec3,
    /// Direction toward the next event, or the escape direction for the last one.
    pub dir_out: Vec3,
    /// Laboratory frequencies before and after scattering, units of gamma.
    pub freq_in: f64,
    pub freq_out: f64,
    /// Cumulative importance weight of the chain ending here.
    pub weight: f64,
    /// Direct-path field incident on this atom, including propagation and
    /// attenuation factors (dimensionless for the first atom).
    pub field_in: CVec3,
    /// Column density from here to outside the cloud against the beam, cm^-2.
    pub beam_column_cm2: f64,
    /// Path to the next event, absent for the last one.
    pub segment: Option<Segment>,
}

impl ScatterEvent {
    pub fn rest_frequency(&self, kv0: f64) -> f64 {
        self.freq_in - kv0 * self.dir_in.dot(&self.velocity)
    }

    /// Laboratory frequency after scattering into `dir`.
    pub fn frequency_toward(&self, kv0: f64, dir: &Vec3) -> f64 {
        self.freq_in - kv0 * (self.dir_in - dir).dot(&self.velocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The incident ray missed the cloud (zero optical thickness).
    Missed,
    Escaped,
    MaxOrder,
    Roulette,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub laser_frequency: f64,
    pub events: Vec<ScatterEvent>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn order(&self) -> usize {
        self.events.len()
    }
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl Simulation {
    pub(crate) fn spot_width(&self) -> f64 {
        SPOT_RADII * self.cloud.max_radius()
    }

    /// Column density from `r` to infinity along `-beam`.
    pub(crate) fn beam_column(&self, r: &Vec3) -> f64 {
        RayProfile::new(&self.cloud, &Ray { origin: *r, direction: -self.beam }).column(0.0, f64::INFINITY)
    }

    /// Initial sublevel from the population, final sublevel uniform over the
    /// allowed ones; returns the weight of the uniform choice.
    pub fn sample_sublevels<R: Rng + ?Sized>(&self, rng: &mut R) -> (i32, i32, f64) {
        let mi = self.population.sample(rng.random());
        let finals: Vec<i32> = self.model.allowed_final(mi).collect();
        let mf = finals[((rng.random::<f64>() * finals.len() as f64) as usize).min(finals.len() - 1)];
        (mi, mf, finals.len() as f64)
    }

    /// Deterministic chain through fixed atoms with weight `weight`. Each atom
    /// is given as (position mm, velocity in units of v0, initial and final
    /// sublevel). Attenuation follows the actual cloud.
    pub fn fixed_chain(&self, laser_frequency: f64, atoms: &[(Vec3, Vec3, i32, i32)], weight: f64) -> Trajectory {
        let kv0 = self.thermal.kv0;
        let sqrt_c = (self.model.norm_cm2() * CM2_TO_MM2).sqrt();
        let mut events = Vec::with_capacity(atoms.len());
        let first = atoms.first().map(|a| a.0).unwrap_or_else(|| self.cloud.center());
        let sigma_l = self.extinction.sigma(laser_frequency);
        let mut field =
            self.e_in * (phase(self.k * self.beam.dot(&first)) * (-0.5 * sigma_l * self.beam_column(&first)).exp());
        let mut dir_in = self.beam;
        let mut freq_in = laser_frequency;
        for (i, &(position, velocity, mi, mf)) in atoms.iter().enumerate() {
            let omega_rest = freq_in - kv0 * dir_in.dot(&velocity);
            let scattered = self.model.tensor(mi, mf, omega_rest) * field * Complex64::new(sqrt_c, 0.0);
            let mut event = ScatterEvent {
                position,
                velocity,
                mi,
                mf,
                dir_in,
                dir_out: dir_in,
                freq_in,
                freq_out: freq_in,
                weight,
                field_in: field,
                beam_column_cm2: self.beam_column(&position),
                segment: None,
            };
            if let Some(next) = atoms.get(i + 1) {
                let delta = next.0 - position;
                let r = delta.norm();
                let dir_out = delta / r;
                let freq_out = freq_in - kv0 * (dir_in - dir_out).dot(&velocity);
                let ray = Ray { origin: position, direction: dir_out };
                let column = RayProfile::new(&self.cloud, &ray).column(0.0, r);
                let tau = self.extinction.sigma(freq_out) * column;
                event.dir_out = dir_out;
                event.freq_out = freq_out;
                event.segment = Some(Segment { length_mm: r, column_cm2: column });
                field = project_transverse(&scattered, &dir_out) * (phase(self.k * r) * ((-0.5 * tau).exp() / r));
                dir_in = dir_out;
                freq_in = freq_out;
            }
            events.push(event);
        }
        Trajectory { laser_frequency, events, termination: Termination::MaxOrder }
    }

    /// Sample one trajectory of the direct path.
    pub fn build_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Trajectory {
        let kv0 = self.thermal.kv0;
        let omega_l = sample_laser_frequency(rng, &self.laser);
        let mut events: Vec<ScatterEvent> = Vec::new();

        // First event: Gaussian transverse offset and forced collision along the beam.
        let width = self.spot_width();
        let (ta, tb) = transverse_basis(&self.beam);
        let u1 = open_uniform(rng);
        let u2: f64 = rng.random();
        let radius = width * (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * PI * u2;
        let (ox, oy) = (radius * angle.cos(), radius * angle.sin());
        let p_xy = (-(ox * ox + oy * oy) / (2.0 * width * width)).exp() / (2.0 * PI * width * width);
        let origin = self.cloud.center() + ta * ox + tb * oy - self.beam * (UPSTREAM_RADII * self.cloud.max_radius());
        let ray = Ray { origin, direction: self.beam };
        let profile = RayProfile::new(&self.cloud, &ray);
        let sigma_l = self.extinction.sigma(omega_l);
        let thickness = sigma_l * profile.column(0.0, f64::INFINITY);
        let u: f64 = rng.random();
        let capture = -(-thickness).exp_m1();
        if !(capture > 0.0) {
            return Trajectory { laser_frequency: omega_l, events, termination: Termination::Missed };
        }
        let depth = -(-u * capture).ln_1p();
        let Some(s) = profile.invert(sigma_l, depth) else {
            return Trajectory { laser_frequency: omega_l, events, termination: Termination::Missed };
        };
        let mut position = ray.at(s);
        let mut weight = capture / (p_xy * sigma_l * CM2_TO_MM2 * (-depth).exp());
        let mut field = self.e_in * (phase(self.k * self.beam.dot(&position)) * (-0.5 * depth).exp());
        let mut dir_in = self.beam;
        let mut freq_in = omega_l;
        let mut first_throughput = None;
        let sqrt_c = (self.model.norm_cm2() * CM2_TO_MM2).sqrt();

        loop {
            let velocity = sample_velocity(rng, kv0);
            let (mi, mf, sublevel_weight) = self.sample_sublevels(rng);
            weight *= sublevel_weight;

            let omega_rest = freq_in - kv0 * dir_in.dot(&velocity);
            let scattered = self.model.tensor(mi, mf, omega_rest) * field * Complex64::new(sqrt_c, 0.0);
            let beam_column = self.beam_column(&position);

            let mut event = ScatterEvent {
                position,
                velocity,
                mi,
                mf,
                dir_in,
                dir_out: dir_in,
                freq_in,
                freq_out: freq_in,
                weight,
                field_in: field,
                beam_column_cm2: beam_column,
                segment: None,
            };

            let throughput = weight * scattered.norm_squared();
            let reference = *first_throughput.get_or_insert(throughput);
            if events.len() + 1 >= self.controls.max_order {
                events.push(event);
                return Trajectory { laser_frequency: omega_l, events, termination: Termination::MaxOrder };
            }
            if self.controls.roulette_threshold > 0.0 && throughput < self.controls.roulette_threshold * reference {
                let survival = if reference > 0.0 {
                    (throughput / (self.controls.roulette_threshold * reference)).max(MIN_SURVIVAL)
                } else {
                    MIN_SURVIVAL
                };
                if rng.random::<f64>() >= survival {
                    events.push(event);
                    return Trajectory { laser_frequency: omega_l, events, termination: Termination::Roulette };
                }
                weight /= survival;
            }

            // Zero-length segments are degenerate and re-sampled.
            let (dir_out, dir_weight, freq_out, sigma_s, out_ray, out_profile, r) = loop {
                let (dir_out, dir_weight) = match self.controls.direction_sampling {
                    DirectionSampling::Isotropic => (isotropic_direction(rng.random(), rng.random()), 4.0 * PI),
                    DirectionSampling::PhaseFunction => sample_dipole_direction(rng, &scattered),
                };
                let freq_out = freq_in - kv0 * (dir_in - dir_out).dot(&velocity);
                let sigma_s = self.extinction.sigma(freq_out);
                let out_ray = Ray { origin: position, direction: dir_out };
                let out_profile = RayProfile::new(&self.cloud, &out_ray);
                let depth = -open_uniform(rng).ln();
                match out_profile.invert(sigma_s, depth) {
                    Some(r) if r > 0.0 => break (dir_out, dir_weight, freq_out, sigma_s, out_ray, out_profile, r),
                    Some(_) => continue,
                    None => {
                        event.dir_out = dir_out;
                        event.freq_out = freq_out;
                        events.push(event);
                        return Trajectory { laser_frequency: omega_l, events, termination: Termination::Escaped };
                    }
                }
            };
            event.dir_out = dir_out;
            event.freq_out = freq_out;
            let column = out_profile.column(0.0, r);
            event.segment = Some(Segment { length_mm: r, column_cm2: column });
            events.push(event);

            let tau = sigma_s * column;
            weight *= dir_weight * r * r * tau.exp() / (sigma_s * CM2_TO_MM2);
            field = project_transverse(&scattered, &dir_out) * (phase(self.k * r) * ((-0.5 * tau).exp() / r));
            position = out_ray.at(r);
            dir_in = dir_out;
            freq_in = freq_out;
        }
    }
}

/// Direction drawn from the dipole radiation pattern |P(u) F|^2 by rejection,
/// with weight 1/pdf.
fn sample_dipole_direction<R: Rng + ?Sized>(rng: &mut R, field: &CVec3) -> (Vec3, f64) {
    let total = field.norm_squared();
    if !(total > 0.0) {
        return (isotropic_direction(rng.random(), rng.random()), 4.0 * PI);
    }
    loop {
        let dir = isotropic_direction(rng.random(), rng.random());
        let along = (field.x * dir.x + field.y * dir.y + field.z * dir.z).norm_sqr();
        let accept = ((total - along) / total).max(0.0);
        if rng.random::<f64>() < accept {
            let pdf = 3.0 * accept / (8.0 * PI);
            return (dir, 1.0 / pdf);
        }
    }
}
