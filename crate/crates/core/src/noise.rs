//! Martingale-difference noise `M_{n+1}` conditioned on the current state.
//!
//! Every family is symmetric about zero, so the conditional mean vanishes by
//! construction. With state coupling on, `M = (1 + ||x||) xi` where `xi` has
//! i.i.d. coordinates drawn from the family.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::problem::norm;
use crate::stats::linear_fit;

/// Tail exponent of the default heavy-tailed control.
pub const DEFAULT_PARETO_SHAPE: f64 = 2.5;

/// Grid points with fewer exceedances than this are left out of tail fits.
pub const MIN_EXCEEDANCES: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise scale must be finite and nonnegative, got {0}")]
    BadScale(f64),
    #[error("pareto shape must exceed 2 for finite variance, got {0}")]
    BadShape(f64),
    #[error("declared tail class {declared:?} does not match the {family} family ({actual:?})")]
    TailClassMismatch {
        family: &'static str,
        declared: TailClass,
        actual: TailClass,
    },
    #[error("v grid must be nonempty, finite, positive, and strictly increasing")]
    BadGrid,
    #[error("need at least {0} samples per probe point")]
    TooFewSamples(usize),
    #[error("no probe points given")]
    NoProbes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    /// Uniform on `[-scale, scale]`.
    BoundedUniform,
    /// Normal with standard deviation `scale`.
    Gaussian,
    /// Laplace with scale `scale`: `P(|xi| > v) = exp(-v / scale)`.
    Laplace,
    /// Symmetrized Pareto with minimum `scale`: `P(|xi| > v) = (scale / v)^shape`.
    Pareto { shape: f64 },
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::BoundedUniform => "bounded-uniform",
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Pareto { .. } => "pareto",
        }
    }

    pub fn tail_class(&self) -> TailClass {
        match self {
            NoiseFamily::BoundedUniform => TailClass::Bounded,
            // Gaussian tails sit below any exponential bound for large v.
            NoiseFamily::Gaussian | NoiseFamily::Laplace => TailClass::SubExponential,
            NoiseFamily::Pareto { .. } => TailClass::Heavy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailClass {
    Bounded,
    SubExponential,
    Heavy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    family: NoiseFamily,
    scale: f64,
    state_coupling: bool,
}

impl NoiseModel {
    /// A scale of zero gives identically zero noise.
    pub fn new(family: NoiseFamily, scale: f64, state_coupling: bool) -> Result<Self, NoiseError> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(NoiseError::BadScale(scale));
        }
        if let NoiseFamily::Pareto { shape } = family {
            if !(shape.is_finite() && shape > 2.0) {
                return Err(NoiseError::BadShape(shape));
            }
        }
        Ok(NoiseModel {
            family,
            scale,
            state_coupling,
        })
    }

    /// Like [`NoiseModel::new`] but also checks a declared tail class.
    pub fn declared(
        family: NoiseFamily,
        scale: f64,
        state_coupling: bool,
        tail_class: TailClass,
    ) -> Result<Self, NoiseError> {
        let actual = family.tail_class();
        let consistent = match actual {
            TailClass::Heavy => tail_class == TailClass::Heavy,
            // bounded noise also satisfies an exponential tail bound
            TailClass::Bounded => tail_class != TailClass::Heavy,
            TailClass::SubExponential => tail_class == TailClass::SubExponential,
        };
        if !consistent {
            return Err(NoiseError::TailClassMismatch {
                family: family.name(),
                declared: tail_class,
                actual,
            });
        }
        Self::new(family, scale, state_coupling)
    }

    pub fn zero() -> Self {
        NoiseModel {
            family: NoiseFamily::BoundedUniform,
            scale: 0.0,
            state_coupling: false,
        }
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn state_coupling(&self) -> bool {
        self.state_coupling
    }

    pub fn tail_class(&self) -> TailClass {
        self.family.tail_class()
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    pub fn id(&self) -> String {
        let shape = match self.family {
            NoiseFamily::Pareto { shape } => format!(",shape={shape}"),
            _ => String::new(),
        };
        format!(
            "{}(scale={}{shape},coupling={})",
            self.family.name(),
            self.scale,
            self.state_coupling
        )
    }

    /// One base draw `xi` for a single coordinate.
    #[inline]
    fn base<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.scale;
        match self.family {
            NoiseFamily::BoundedUniform => s * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            NoiseFamily::Laplace => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    s * e
                } else {
                    -s * e
                }
            }
            NoiseFamily::Pareto { shape } => {
                let u: f64 = rng.random();
                let magnitude = s * (1.0 - u).powf(-1.0 / shape);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    /// Draws `M` at state `x` into `out`. Zero-scale models write zeros and
    /// leave the generator untouched.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        if self.scale == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let factor = if self.state_coupling {
            1.0 + norm(x)
        } else {
            1.0
        };
        for o in out.iter_mut() {
            *o = factor * self.base(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.sample_into(x, rng, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    /// Exponential shape fits.
    Pass,
    /// No exceedances anywhere on the grid; bounded noise trivially satisfies the tail bound.
    TooLightPass,
    /// Not of exponential shape.
    Fail,
    /// Exceedances exist but too few grid points qualify for a fit.
    Inconclusive,
}

impl TailVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, TailVerdict::Pass | TailVerdict::TooLightPass)
    }
}

/// Fit of `P[||M||/(1+||x||) > v] ~ C1 exp(-C2 v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub c1_hat: f64,
    /// `+inf` when the tail is too light to fit.
    pub c2_hat: f64,
    pub r_squared: f64,
    pub v_grid: Vec<f64>,
    /// Max over probes of the exceedance frequency at each `v`.
    pub exceedance_probs: Vec<f64>,
    /// Exceedance count behind each entry of `exceedance_probs`.
    pub exceedance_counts: Vec<u64>,
    /// Decay rate on the far half of the fitted points divided by that on the
    /// near half. Near 1 for an exponential tail, well below 1 for a power law.
    pub decay_ratio: f64,
    pub verdict: TailVerdict,
}

/// Fitted log-tails whose decay rate falls below this fraction of the
/// near-tail rate are treated as convex (power-law-like).
pub const MIN_DECAY_RATIO: f64 = 0.5;
/// Minimum `R^2` of the log-linear tail fit.
pub const MIN_TAIL_R2: f64 = 0.9;

pub fn verify_tail(
    model: &NoiseModel,
    x_probe: &[Vec<f64>],
    v_grid: &[f64],
    samples_per_point: usize,
    rng_seed: u64,
) -> Result<TailFit, NoiseError> {
    if samples_per_point < 10_000 {
        return Err(NoiseError::TooFewSamples(10_000));
    }
    if x_probe.is_empty() {
        return Err(NoiseError::NoProbes);
    }
    let grid_ok = !v_grid.is_empty()
        && v_grid.iter().all(|v| v.is_finite() && *v > 0.0)
        && v_grid.windows(2).all(|w| w[1] > w[0]);
    if !grid_ok {
        return Err(NoiseError::BadGrid);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut counts = vec![0u64; v_grid.len()];
    for x in x_probe {
        let mut local = vec![0u64; v_grid.len()];
        let scale = 1.0 + norm(x);
        let mut m = vec![0.0; x.len()];
        for _ in 0..samples_per_point {
            model.sample_into(x, &mut rng, &mut m);
            let r = norm(&m) / scale;
            // grid is increasing: count every v below r
            let k = v_grid.partition_point(|v| *v < r);
            for c in &mut local[..k] {
                *c += 1;
            }
        }
        for (c, l) in counts.iter_mut().zip(local) {
            *c = (*c).max(l);
        }
    }
    let n = samples_per_point as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();

    let mut fit = TailFit {
        c1_hat: f64::NAN,
        c2_hat: f64::NAN,
        r_squared: f64::NAN,
        v_grid: v_grid.to_vec(),
        exceedance_probs: probs.clone(),
        exceedance_counts: counts.clone(),
        decay_ratio: f64::NAN,
        verdict: TailVerdict::Inconclusive,
    };
    if counts.iter().all(|&c| c == 0) {
        fit.c2_hat = f64::INFINITY;
        fit.c1_hat = 0.0;
        fit.verdict = TailVerdict::TooLightPass;
        return Ok(fit);
    }
    let (vs, logs): (Vec<f64>, Vec<f64>) = v_grid
        .iter()
        .zip(&counts)
        .zip(&probs)
        .filter(|((_, &c), _)| c >= MIN_EXCEEDANCES)
        .map(|((&v, _), &p)| (v, p.ln()))
        .unzip();
    if vs.len() < 3 {
        return Ok(fit);
    }
    let line = linear_fit(&vs, &logs).expect("distinct grid points");
    fit.c1_hat = line.intercept.exp();
    fit.c2_hat = -line.slope;
    fit.r_squared = line.r_squared;

    let convex = if vs.len() >= 4 {
        let half = vs.len() / 2;
        let near = linear_fit(&vs[..half], &logs[..half]).expect("two points");
        let far = linear_fit(&vs[half..], &logs[half..]).expect("two points");
        fit.decay_ratio = far.slope / near.slope;
        near.slope < 0.0 && fit.decay_ratio < MIN_DECAY_RATIO
    } else {
        false
    };
    fit.verdict = if fit.c2_hat > 0.0 && fit.r_squared >= MIN_TAIL_R2 && !convex {
        TailVerdict::Pass
    } else {
        TailVerdict::Fail
    };
    Ok(fit)
}

/// Max over probes of `E[||M||^2 | x] / (1 + ||x||^2)`.
pub fn verify_second_moment(
    model: &NoiseModel,
    x_probe: &[Vec<f64>],
    samples_per_point: usize,
    rng_seed: u64,
) -> Result<f64, NoiseError> {
    Ok(second_moment_ratios(model, x_probe, samples_per_point, rng_seed)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// The per-probe ratios behind [`verify_second_moment`].
pub fn second_moment_ratios(
    model: &NoiseModel,
    x_probe: &[Vec<f64>],
    samples_per_point: usize,
    rng_seed: u64,
) -> Result<Vec<f64>, NoiseError> {
    if samples_per_point < 10_000 {
        return Err(NoiseError::TooFewSamples(10_000));
    }
    if x_probe.is_empty() {
        return Err(NoiseError::NoProbes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(x_probe
        .iter()
        .map(|x| {
            let mut m = vec![0.0; x.len()];
            let mut acc = 0.0;
            for _ in 0..samples_per_point {
                model.sample_into(x, &mut rng, &mut m);
                acc += m.iter().map(|v| v * v).sum::<f64>();
            }
            acc / samples_per_point as f64 / (1.0 + norm(x).powi(2))
        })
        .collect())
}
