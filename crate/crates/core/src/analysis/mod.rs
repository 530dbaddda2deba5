//! Monte Carlo estimators and closed-form bound evaluators.

mod bounds;
mod complexity;
mod lockin;
mod moment;
mod rho;
mod tightness;

pub use bounds::{
    azuma_bound, convex_region_limit, is_convex_on, superadditivity_check, theoretical_bound,
    BoundFamily,
};
pub use complexity::{
    compute_delta, compute_gamma, estimate_sample_complexity, max_admissible_delta, max_v_on_b,
    trapped_distance, SampleComplexityOptions, SampleComplexityResult,
};
pub use lockin::{
    estimate_lockin, fit_failure_curve, BoundFit, LockinCurve, LockinOptions,
};
pub use moment::{moment_bound_check, probe_grid, MomentBoundReport, MomentOptions};
pub use rho::{compare_rho, max_block_deviation, RhoComparison, RhoOptions};
pub use tightness::{estimate_tightness, TightnessOptions, TightnessResult};

use rand::Rng;
use thiserror::Error;

use crate::engine::EngineError;
use crate::noise::NoiseError;
use crate::problem::{Problem, ProblemError, Region};
use crate::schedule::ScheduleError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("schedule {0} is test-only; its squared steps are not summable")]
    TestOnlySchedule(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{diverged} of {replicas} replicas diverged (limit 1%)")]
    TooManyDiverged { diverged: usize, replicas: usize },
    #[error("no replica converged at n0 = {n0}: problem or horizon misconfigured")]
    Misconfigured { n0: u64 },
    #[error("only {uncensored} uncensored points ({censored} with zero failures); need 3 to fit")]
    Censored { uncensored: usize, censored: usize },
    #[error("descent margin {min} is not positive: epsilon too large or T too small")]
    NonpositiveDelta { min: f64 },
    #[error("gamma {gamma} is not below the horizon time {horizon_time}")]
    HorizonTooShort { gamma: f64, horizon_time: f64 },
}

fn bad(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::BadParameter(msg.into())
}

/// Distribution of the initial iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Point(Vec<f64>),
    /// Uniform on a box.
    Uniform(Region),
    /// Uniform on the problem's domain `B`.
    Domain,
}

impl InitialLaw {
    /// Checks dimensions and, when `inside_b`, that every draw lands in `B`.
    pub fn validate(&self, problem: &Problem, inside_b: bool) -> Result<(), AnalysisError> {
        let dim = match self {
            InitialLaw::Point(x) => {
                problem.check_state(x)?;
                if inside_b && !problem.domain().contains(x) {
                    return Err(bad("initial point lies outside B"));
                }
                x.len()
            }
            InitialLaw::Uniform(r) => {
                let r = Region::new(r.lo.clone(), r.hi.clone())?;
                if inside_b {
                    let b = problem.domain();
                    let corners_inside = (0..1usize << r.dim()).all(|mask| {
                        let c: Vec<f64> = (0..r.dim())
                            .map(|i| if mask >> i & 1 == 1 { r.hi[i] } else { r.lo[i] })
                            .collect();
                        b.contains_closed(&c)
                    });
                    if !corners_inside {
                        return Err(bad("initial box is not contained in B"));
                    }
                }
                r.dim()
            }
            InitialLaw::Domain => problem.dim(),
        };
        if dim != problem.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: problem.dim(),
                got: dim,
            }
            .into());
        }
        Ok(())
    }

    /// Draws one initial state. A point law consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, problem: &Problem, rng: &mut R) -> Vec<f64> {
        match self {
            InitialLaw::Point(x) => x.clone(),
            InitialLaw::Uniform(r) => {
                let mut x = vec![0.0; r.dim()];
                r.sample(rng, &mut x);
                x
            }
            InitialLaw::Domain => {
                let mut x = vec![0.0; problem.dim()];
                problem.domain().sample(rng, &mut x);
                x
            }
        }
    }
}

fn check_replicas(replicas: usize, min: usize) -> Result<(), AnalysisError> {
    if replicas < min {
        return Err(bad(format!("need at least {min} replicas, got {replicas}")));
    }
    Ok(())
}
