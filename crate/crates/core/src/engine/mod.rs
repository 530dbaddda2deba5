//! The iterate recursion `x_{n+1} = x_n + a(n) (h(x_n) + M_{n+1})`, its
//! limiting ODE, and per-block diagnostics comparing the two.

mod martingale;
mod ode;
mod trajectory;

pub use martingale::{martingale_path, truncate_increment, MartingaleDiagnostics};
pub use ode::{ode_flow, rk4_step, Rk4Scratch};
pub use trajectory::{BlockDiagnostics, Trajectory};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::noise::NoiseModel;
use crate::problem::{Problem, ProblemError};
use crate::schedule::{ScheduleError, StepSchedule};

/// Subsampled points per block used by estimators.
pub const DEFAULT_POINTS_PER_BLOCK: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("horizon {horizon} must exceed n0 {n0}")]
    BadHorizon { n0: u64, horizon: u64 },
    #[error("flow diverged")]
    FlowDiverged,
    #[error("time {t} is outside the recorded range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("iterate {0} was not recorded (trajectory is decimated there)")]
    NotRecorded(u64),
    #[error("block {0} is not contained in the trajectory")]
    NoSuchBlock(usize),
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// Problem, step schedule, and noise model of one recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SaSystem {
    pub problem: Problem,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
}

/// How [`SaSystem::run_sa_with`] records states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOptions {
    /// Keep every `every`-th iterate. Block boundaries and the final iterate
    /// are always kept.
    pub every: u64,
    /// Block length `T` used for the stored partition.
    pub block_length: f64,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            every: 1,
            block_length: 1.0,
        }
    }
}

/// Mutable state of one running recursion.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    system: &'a SaSystem,
    n: u64,
    t: f64,
    x: Vec<f64>,
    next: Vec<f64>,
    h: Vec<f64>,
    m: Vec<f64>,
}

impl<'a> Stepper<'a> {
    /// Starts at iterate `n0` with clock `t(n0)` computed by the schedule.
    pub fn new(system: &'a SaSystem, n0: u64, x0: &[f64]) -> Self {
        Self::with_clock(system, n0, system.schedule.elapsed_time(n0), x0)
    }

    /// Starts with a precomputed clock value (must equal `t(n0)`).
    pub fn with_clock(system: &'a SaSystem, n0: u64, t0: f64, x0: &[f64]) -> Self {
        let d = x0.len();
        Stepper {
            system,
            n: n0,
            t: t0,
            x: x0.to_vec(),
            next: vec![0.0; d],
            h: vec![0.0; d],
            m: vec![0.0; d],
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// The noise draw used by the most recent step.
    pub fn last_noise(&self) -> &[f64] {
        &self.m
    }

    /// Performs one step. If the new state is not finite the step is not
    /// committed and `false` is returned; the stepper keeps `x_n`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let a = self.system.schedule.step(self.n);
        self.system.problem.drift_into(&self.x, &mut self.h);
        self.system.noise.sample_into(&self.x, rng, &mut self.m);
        let mut finite = true;
        for i in 0..self.x.len() {
            self.next[i] = self.x[i] + a * (self.h[i] + self.m[i]);
            finite &= self.next[i].is_finite();
        }
        if finite {
            std::mem::swap(&mut self.x, &mut self.next);
            self.t += a;
            self.n += 1;
        }
        finite
    }
}

/// Iterate indices at which estimators observe a replica: every block
/// boundary plus evenly spaced points inside each block, and the last index.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPlan {
    pub n0: u64,
    pub t0: f64,
    pub end: u64,
    pub indices: Vec<u64>,
    /// `t(n)` at each checkpoint.
    pub times: Vec<f64>,
}

impl CheckpointPlan {
    /// Runs until `t(n) - t(n0) >= horizon_time`.
    pub fn by_time(
        schedule: &StepSchedule,
        n0: u64,
        horizon_time: f64,
        block_length: f64,
        per_block: usize,
    ) -> Result<Self, EngineError> {
        if !(horizon_time.is_finite() && horizon_time > 0.0) {
            return Err(EngineError::BadParameter("horizon time must be positive"));
        }
        Self::build(schedule, n0, block_length, per_block, |_, t, t0| {
            t - t0 >= horizon_time
        })
    }

    /// Runs through iterate index `horizon`.
    pub fn by_index(
        schedule: &StepSchedule,
        n0: u64,
        horizon: u64,
        block_length: f64,
        per_block: usize,
    ) -> Result<Self, EngineError> {
        if horizon <= n0 {
            return Err(EngineError::BadHorizon { n0, horizon });
        }
        Self::build(schedule, n0, block_length, per_block, |n, _, _| n >= horizon)
    }

    fn build(
        schedule: &StepSchedule,
        n0: u64,
        block_length: f64,
        per_block: usize,
        done: impl Fn(u64, f64, f64) -> bool,
    ) -> Result<Self, EngineError> {
        if !(block_length.is_finite() && block_length > 0.0) {
            return Err(EngineError::BadParameter("block length must be positive"));
        }
        let t0 = schedule.elapsed_time(n0);
        let mut boundaries = vec![n0];
        let (mut n, mut t) = (n0, t0);
        let mut target = t0 + block_length;
        while !done(n, t, t0) {
            t += schedule.step(n);
            n += 1;
            if t >= target {
                boundaries.push(n);
                target = t + block_length;
            }
        }
        let end = n;
        if *boundaries.last().expect("nonempty") != end {
            boundaries.push(end);
        }
        let mut indices = Vec::new();
        for w in boundaries.windows(2) {
            let len = w[1] - w[0];
            for k in 0..per_block.max(1) as u64 {
                indices.push(w[0] + k * len / per_block.max(1) as u64);
            }
        }
        indices.push(end);
        indices.sort_unstable();
        indices.dedup();

        let mut times = Vec::with_capacity(indices.len());
        let mut t = t0;
        let mut n = n0;
        for &k in &indices {
            while n < k {
                t += schedule.step(n);
                n += 1;
            }
            times.push(t);
        }
        Ok(CheckpointPlan {
            n0,
            t0,
            end,
            indices,
            times,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// States observed at the checkpoints of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRun {
    pub dim: usize,
    /// Flattened states, one per reached checkpoint.
    pub states: Vec<f64>,
    pub diverged_at: Option<u64>,
}

impl CheckpointRun {
    pub fn reached(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn state(&self, k: usize) -> Option<&[f64]> {
        self.states.get(k * self.dim..(k + 1) * self.dim)
    }
}

impl SaSystem {
    pub fn new(problem: Problem, schedule: StepSchedule, noise: NoiseModel) -> Self {
        SaSystem {
            problem,
            schedule,
            noise,
        }
    }

    /// Runs iterates `n0..=horizon` from `x_init` with the noise stream
    /// `ChaCha8Rng::seed_from_u64(seed)`, recording every state.
    pub fn run_sa(
        &self,
        n0: u64,
        x_init: &[f64],
        horizon: u64,
        seed: u64,
    ) -> Result<Trajectory, EngineError> {
        self.run_sa_with(n0, x_init, horizon, seed, RecordOptions::default())
    }

    pub fn run_sa_with(
        &self,
        n0: u64,
        x_init: &[f64],
        horizon: u64,
        seed: u64,
        options: RecordOptions,
    ) -> Result<Trajectory, EngineError> {
        self.problem.check_state(x_init)?;
        if horizon <= n0 {
            return Err(EngineError::BadHorizon { n0, horizon });
        }
        if options.every == 0 {
            return Err(EngineError::BadParameter("record interval must be positive"));
        }
        if !(options.block_length.is_finite() && options.block_length > 0.0) {
            return Err(EngineError::BadParameter("block length must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stepper = Stepper::new(self, n0, x_init);
        let mut builder = trajectory::Builder::new(self, n0, seed, options, stepper.time(), x_init);
        while stepper.n() < horizon {
            if !stepper.step(&mut rng) {
                return Ok(builder.finish_diverged(&stepper));
            }
            builder.observe(stepper.n(), stepper.time(), stepper.state(), stepper.n() == horizon);
        }
        Ok(builder.finish())
    }

    /// Runs one replica through `plan`, drawing nothing but noise from `rng`.
    pub fn run_checkpoints<R: Rng + ?Sized>(
        &self,
        plan: &CheckpointPlan,
        x0: &[f64],
        rng: &mut R,
    ) -> CheckpointRun {
        let d = x0.len();
        let mut states = Vec::with_capacity(plan.len() * d);
        let mut stepper = Stepper::with_clock(self, plan.n0, plan.t0, x0);
        let mut diverged_at = None;
        'outer: for &k in &plan.indices {
            while stepper.n() < k {
                if !stepper.step(rng) {
                    diverged_at = Some(stepper.n() + 1);
                    break 'outer;
                }
            }
            states.extend_from_slice(stepper.state());
        }
        CheckpointRun {
            dim: d,
            states,
            diverged_at,
        }
    }
}
