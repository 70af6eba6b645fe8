//! Batch execution: block-wise random streams, parallel or sequential.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::accumulator::{Accumulator, SpectrumBins};
use super::amplitude::path_amplitudes;
use super::extinction::Extinction;
use super::sampling::LASER_TRUNCATION;
use super::{AttenuationModel, Channel, Controls, LaserSpec, ThermalSpec, TransportError};
use crate::atomic::{AtomSpec, GroundPopulation, ScatteringModel};
use crate::geometry::{CVec3, Vec3};
use crate::medium::CloudSpec;

pub(crate) const CM2_TO_MM2: f64 = 100.0;

/// Trajectories per random stream for large budgets.
pub const DEFAULT_BLOCK_SIZE: u64 = 1000;
/// Smallest number of blocks a budget is split into, for the jackknife.
const MIN_BLOCKS: u64 = 32;

/// Everything needed to run the engine at one parameter point.
#[derive(Debug, Clone)]
pub struct Setup {
    pub atom: AtomSpec,
    pub cloud: CloudSpec,
    pub laser: LaserSpec,
    pub thermal: ThermalSpec,
    pub population: GroundPopulation,
    pub controls: Controls,
    pub channels: Vec<Channel>,
    /// Cone angles in radians at which the crossed term is tallied.
    pub theta_rad: Vec<f64>,
    pub spectrum: Option<SpectrumBins>,
}

impl Setup {
    /// Cold, unpolarized atoms with default controls; both analyzers that
    /// match the laser polarization.
    pub fn new(atom: AtomSpec, cloud: CloudSpec, laser: LaserSpec) -> Self {
        let population = GroundPopulation::isotropic(atom.ground_f);
        let channels = Channel::ALL.into_iter().filter(|c| c.compatible(&laser)).collect();
        Setup {
            atom,
            cloud,
            laser,
            thermal: ThermalSpec::cold(),
            population,
            controls: Controls::default(),
            channels,
            theta_rad: Vec::new(),
            spectrum: None,
        }
    }
}

/// Validated, precomputed engine state for one parameter point.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub(crate) atom: AtomSpec,
    pub(crate) model: ScatteringModel,
    pub(crate) cloud: CloudSpec,
    pub(crate) laser: LaserSpec,
    pub(crate) thermal: ThermalSpec,
    pub(crate) population: GroundPopulation,
    pub(crate) controls: Controls,
    pub(crate) extinction: Extinction,
    pub(crate) k: f64,
    pub(crate) beam: Vec3,
    pub(crate) e_in: CVec3,
    template: Vec<Accumulator>,
}

impl Simulation {
    pub fn new(setup: Setup) -> Result<Self, TransportError> {
        let model = ScatteringModel::new(&setup.atom)?;
        setup.cloud.validate()?;
        let mut problems = setup.laser.validate();
        problems.extend(setup.controls.validate());
        if !(setup.thermal.kv0 >= 0.0) || !setup.thermal.kv0.is_finite() {
            problems.push(format!("thermal.kv0 = {} must be >= 0", setup.thermal.kv0));
        }
        if setup.population.f() != setup.atom.ground_f {
            problems.push(format!(
                "population is for F = {}, atom has F = {}",
                setup.population.f(),
                setup.atom.ground_f
            ));
        }
        if setup.channels.is_empty() {
            problems.push("at least one channel is required".into());
        }
        for c in &setup.channels {
            if !c.compatible(&setup.laser) {
                problems.push(format!("channel {c} does not match the laser polarization"));
            }
        }
        if setup.theta_rad.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            problems.push("cone angles must be finite and >= 0".into());
        }
        if let Some(s) = setup.spectrum {
            if s.count == 0 || !(s.hi > s.lo) {
                problems.push("spectrum bins need count > 0 and hi > lo".into());
            }
        }
        if !problems.is_empty() {
            return Err(TransportError::Invalid(problems));
        }

        let beam = setup.laser.beam_direction();
        let e_in = setup.laser.polarization_vector();
        let lines = match setup.controls.attenuation {
            AttenuationModel::Isotropic => model.line_extinction(None),
            AttenuationModel::PopulationWeighted => model.line_extinction(Some((&setup.population, &e_in))),
        };
        let kv0 = setup.thermal.kv0;
        let reach = LASER_TRUNCATION * setup.laser.bandwidth + 12.0 * kv0 + 10.0;
        let extinction =
            Extinction::new(lines, kv0).with_table(setup.laser.detuning - reach, setup.laser.detuning + reach);
        let k = setup.atom.wavenumber_per_mm();
        let template = setup
            .channels
            .iter()
            .map(|&c| {
                Accumulator::new(
                    c,
                    c.analyzer(&setup.laser),
                    k,
                    beam,
                    setup.controls.max_order,
                    setup.theta_rad.clone(),
                    setup.spectrum,
                )
            })
            .collect();
        Ok(Simulation {
            atom: setup.atom,
            model,
            cloud: setup.cloud,
            laser: setup.laser,
            thermal: setup.thermal,
            population: setup.population,
            controls: setup.controls,
            extinction,
            k,
            beam,
            e_in,
            template,
        })
    }

    pub fn model(&self) -> &ScatteringModel {
        &self.model
    }

    pub fn atom(&self) -> &AtomSpec {
        &self.atom
    }

    pub fn laser(&self) -> &LaserSpec {
        &self.laser
    }

    pub fn channels(&self) -> Vec<Channel> {
        self.template.iter().map(|a| a.channel).collect()
    }

    /// Extinction cross section at laboratory frequency `omega`, cm^2.
    pub fn extinction_cm2(&self, omega: f64) -> f64 {
        self.extinction.sigma(omega)
    }

    pub fn empty_accumulators(&self) -> Vec<Accumulator> {
        self.template.iter().map(Accumulator::empty_like).collect()
    }

    /// Random stream of block `block` under master seed `seed`.
    pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        rng
    }

    /// Block size used for a budget; depends only on the budget.
    pub fn block_size(trajectories: u64) -> u64 {
        (trajectories / MIN_BLOCKS).clamp(1, DEFAULT_BLOCK_SIZE)
    }

    fn blocks(trajectories: u64) -> Vec<(u64, u64)> {
        let size = Self::block_size(trajectories);
        let full = trajectories / size;
        let mut out: Vec<(u64, u64)> = (0..full).map(|b| (b, size)).collect();
        if !trajectories.is_multiple_of(size) {
            out.push((full, trajectories % size));
        }
        out
    }

    /// Run `count` trajectories on the stream of block `block`.
    pub fn run_block(&self, seed: u64, block: u64, count: u64) -> Vec<Accumulator> {
        let mut rng = Self::block_rng(seed, block);
        let mut accs = self.empty_accumulators();
        for _ in 0..count {
            let traj = self.build_trajectory(&mut rng);
            let pairs = path_amplitudes(self, &traj);
            for acc in &mut accs {
                acc.accumulate(block, &pairs);
            }
        }
        accs
    }

    fn merge_into(into: &mut [Accumulator], from: &[Accumulator]) {
        for (a, b) in into.iter_mut().zip(from) {
            a.merge(b).expect("accumulators share the simulation layout");
        }
    }

    pub fn run_sequential(&self, seed: u64, trajectories: u64) -> Vec<Accumulator> {
        let mut accs = self.empty_accumulators();
        for (block, count) in Self::blocks(trajectories) {
            Self::merge_into(&mut accs, &self.run_block(seed, block, count));
        }
        accs
    }

    #[cfg(feature = "parallel")]
    pub fn run_parallel(&self, seed: u64, trajectories: u64) -> Vec<Accumulator> {
        use rayon::prelude::*;
        Self::blocks(trajectories).into_par_iter().map(|(block, count)| self.run_block(seed, block, count)).reduce(
            || self.empty_accumulators(),
            |mut a, b| {
                Self::merge_into(&mut a, &b);
                a
            },
        )
    }

    /// Run a trajectory budget. Results are identical for any worker count.
    pub fn run(&self, seed: u64, trajectories: u64) -> Vec<Accumulator> {
        #[cfg(feature = "parallel")]
        {
            self.run_parallel(seed, trajectories)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.run_sequential(seed, trajectories)
        }
    }
}
