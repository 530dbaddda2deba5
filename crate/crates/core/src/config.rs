//! TOML experiment configuration.
//!
//! A config names a problem, a step schedule, a noise model, an initial law,
//! and optional parameter tables for each command. Missing command tables
//! take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::InitialLaw;
use crate::engine::SaSystem;
use crate::noise::{NoiseError, NoiseFamily, NoiseModel, TailClass, DEFAULT_PARETO_SHAPE};
use crate::problem::{Domain, Drift, Problem, ProblemError, Region};
use crate::schedule::{ScheduleError, StepSchedule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    pub problem: ProblemSpec,
    pub schedule: ScheduleSpec,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tightness: Option<TightnessParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lockin: Option<LockinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_complexity: Option<SampleComplexityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_check: Option<ScheduleCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_check: Option<NoiseCheckParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    LinearWell {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    DoubleWell {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    Spiral {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    ZeroDrift {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<DomainSpec>,
    },
    /// One-dimensional polynomial drift `sum_k coeffs[k] x^k`.
    Poly1 {
        name: String,
        coeffs: Vec<f64>,
        center: Vec<f64>,
        targets: Vec<Vec<f64>>,
        domain: DomainSpec,
    },
    /// Planar polynomial drift `h_k = sum_{i,j} coeffs[k][i][j] x1^i x2^j`.
    Poly2 {
        name: String,
        coeffs: [Vec<Vec<f64>>; 2],
        center: Vec<f64>,
        targets: Vec<Vec<f64>>,
        domain: DomainSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl From<&DomainSpec> for Domain {
    fn from(d: &DomainSpec) -> Self {
        match d {
            DomainSpec::Box { lo, hi } => Domain::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            DomainSpec::Ball { center, radius } => Domain::Ball {
                center: center.clone(),
                radius: *radius,
            },
        }
    }
}

fn default_offset() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `a(n) = 1 / ((n + offset)^alpha ln(n + offset)^beta)`.
    PolyLog {
        alpha: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default = "default_offset")]
        offset: u64,
    },
    /// Constant step; test-only, rejected by estimators that need summable squares.
    Constant { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySpec {
    BoundedUniform,
    Gaussian,
    Laplace,
    Pareto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClassSpec {
    Bounded,
    SubExponential,
    Heavy,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: FamilySpec,
    /// 0 gives zero noise.
    pub scale: f64,
    #[serde(default = "yes")]
    pub state_coupling: bool,
    /// Pareto tail exponent; defaults to 2.5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    /// Declared tail class, checked against the family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_class: Option<TailClassSpec>,
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel, ConfigError> {
        let family = match self.family {
            FamilySpec::BoundedUniform => NoiseFamily::BoundedUniform,
            FamilySpec::Gaussian => NoiseFamily::Gaussian,
            FamilySpec::Laplace => NoiseFamily::Laplace,
            FamilySpec::Pareto => NoiseFamily::Pareto {
                shape: self.shape.unwrap_or(DEFAULT_PARETO_SHAPE),
            },
        };
        if self.shape.is_some() && self.family != FamilySpec::Pareto {
            return Err(invalid("noise.shape only applies to the pareto family"));
        }
        Ok(match self.tail_class {
            None => NoiseModel::new(family, self.scale, self.state_coupling)?,
            Some(c) => {
                let class = match c {
                    TailClassSpec::Bounded => TailClass::Bounded,
                    TailClassSpec::SubExponential => TailClass::SubExponential,
                    TailClassSpec::Heavy => TailClass::Heavy,
                };
                NoiseModel::declared(family, self.scale, self.state_coupling, class)?
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    Point {
        x: Vec<f64>,
    },
    Uniform {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Uniform on `B`.
    #[default]
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub n0: u64,
    pub horizon: u64,
    pub block_length: f64,
    pub record_every: u64,
    /// Stopping-time threshold for the martingale diagnostics.
    pub delta: f64,
    /// Truncation level for the martingale diagnostics.
    pub v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            n0: 0,
            horizon: 1000,
            block_length: 1.0,
            record_every: 1,
            delta: 0.1,
            v: 1.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    pub samples: usize,
    /// Audit region; defaults to the bounding box of `B`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<BoxSpec>,
    pub probes_per_axis: usize,
    pub noise_samples: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams {
            samples: 400,
            region: None,
            probes_per_axis: 5,
            noise_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessParams {
    pub replicas: usize,
    pub n0: u64,
    pub horizon: u64,
    pub radius_grid: Vec<f64>,
    /// A radius is a tightness witness when its escape fraction is at most this.
    pub level: f64,
    pub block_length: f64,
    pub per_block: usize,
    /// Also run the moment-bound check on the same setup.
    pub moment_check: bool,
    /// Negative-control noise run with the same seeds; it must escape more at the witness radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<NoiseSpec>,
}

impl Default for TightnessParams {
    fn default() -> Self {
        TightnessParams {
            replicas: 1000,
            n0: 0,
            horizon: 10_000,
            radius_grid: (1..=20).map(|k| 0.25 * k as f64).collect(),
            level: 0.01,
            block_length: 1.0,
            per_block: 8,
            moment_check: true,
            control: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LockinParams {
    pub replicas: usize,
    pub n0_values: Vec<u64>,
    pub horizon_time: f64,
    pub conv_tol: f64,
    pub conv_window: f64,
    pub block_length: f64,
    pub per_block: usize,
}

impl Default for LockinParams {
    fn default() -> Self {
        LockinParams {
            replicas: 2000,
            n0_values: vec![10, 100, 1000, 10_000],
            horizon_time: 30.0,
            conv_tol: 0.05,
            conv_window: 0.1,
            block_length: 1.0,
            per_block: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitParams {
    /// A `lockin.csv` from an earlier run; when absent the lock-in curve is estimated first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lockin_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleComplexityParams {
    pub replicas: usize,
    pub n0_values: Vec<u64>,
    pub epsilon: f64,
    pub delta_nbhd: f64,
    pub block_length: f64,
    pub horizon_time: f64,
    pub grid_resolution: usize,
    pub dt: f64,
    pub per_block: usize,
    /// Verdict threshold on the trapped fraction at the largest `n0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_trapped: Option<f64>,
}

impl Default for SampleComplexityParams {
    fn default() -> Self {
        SampleComplexityParams {
            replicas: 1000,
            n0_values: vec![100, 10_000],
            epsilon: 0.04,
            delta_nbhd: 0.01,
            block_length: 1.0,
            horizon_time: 70.0,
            grid_resolution: 401,
            dt: 1e-3,
            per_block: 8,
            min_trapped: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleCheckParams {
    pub n0: u64,
    pub block_length: f64,
    /// Last index covered by the block partition.
    pub horizon: u64,
    /// Horizon for the divergent-sum / summable-squares checks.
    pub a2_horizon: u64,
    /// Slack added to `e^{T + a_max}` in the block-ratio verdict.
    pub tolerance: f64,
}

impl Default for ScheduleCheckParams {
    fn default() -> Self {
        ScheduleCheckParams {
            n0: 1000,
            block_length: 1.0,
            horizon: 1_000_000,
            a2_horizon: 1_000_000,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseCheckParams {
    /// Probe states; defaults to the origin.
    pub probes: Vec<Vec<f64>>,
    pub v_grid: Vec<f64>,
    pub samples: usize,
    pub second_moment_samples: usize,
}

impl Default for NoiseCheckParams {
    fn default() -> Self {
        NoiseCheckParams {
            probes: Vec::new(),
            v_grid: (2..=8).map(f64::from).collect(),
            samples: 200_000,
            second_moment_samples: 20_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }

    /// Reads, parses, and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config = Self::from_toml_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Builds every referenced object once, so that name or range errors
    /// surface before any command runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let system = self.system()?;
        self.initial_law(&system.problem)?;
        if let Some(t) = &self.tightness {
            if let Some(c) = &t.control {
                c.build()?;
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let with = |p: Problem, d: &Option<DomainSpec>| -> Result<Problem, ConfigError> {
            match d {
                Some(d) => Ok(p.with_domain(d.into())?),
                None => Ok(p),
            }
        };
        match &self.problem {
            ProblemSpec::LinearWell { dim, domain } => {
                check_dim(*dim)?;
                with(Problem::linear_well(*dim), domain)
            }
            ProblemSpec::DoubleWell { domain } => with(Problem::double_well(), domain),
            ProblemSpec::Spiral { domain } => with(Problem::spiral(), domain),
            ProblemSpec::ZeroDrift { dim, domain } => {
                check_dim(*dim)?;
                with(Problem::zero_drift(*dim), domain)
            }
            ProblemSpec::Poly1 {
                name,
                coeffs,
                center,
                targets,
                domain,
            } => Ok(Problem::polynomial(
                name,
                Drift::Poly1 {
                    coeffs: coeffs.clone(),
                },
                center.clone(),
                targets.clone(),
                domain.into(),
            )?),
            ProblemSpec::Poly2 {
                name,
                coeffs,
                center,
                targets,
                domain,
            } => Ok(Problem::polynomial(
                name,
                Drift::Poly2 {
                    coeffs: coeffs.clone(),
                },
                center.clone(),
                targets.clone(),
                domain.into(),
            )?),
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule, ConfigError> {
        Ok(match self.schedule {
            ScheduleSpec::PolyLog {
                alpha,
                beta,
                offset,
            } => StepSchedule::poly_log(alpha, beta, offset)?,
            ScheduleSpec::Constant { step } => StepSchedule::constant_test_only(step)?,
        })
    }

    pub fn system(&self) -> Result<SaSystem, ConfigError> {
        Ok(SaSystem::new(
            self.problem()?,
            self.schedule()?,
            self.noise.build()?,
        ))
    }

    pub fn initial_law(&self, problem: &Problem) -> Result<InitialLaw, ConfigError> {
        let law = match &self.init {
            InitSpec::Point { x } => InitialLaw::Point(x.clone()),
            InitSpec::Uniform { lo, hi } => InitialLaw::Uniform(Region::new(lo.clone(), hi.clone())?),
            InitSpec::Domain => InitialLaw::Domain,
        };
        law.validate(problem, false)
            .map_err(|e| invalid(format!("init: {e}")))?;
        Ok(law)
    }
}

fn check_dim(dim: usize) -> Result<(), ConfigError> {
    if dim == 0 {
        return Err(invalid("problem dimension must be positive"));
    }
    Ok(())
}
