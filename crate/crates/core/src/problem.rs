//! Drift fields, quadratic Lyapunov functions, target sets, and numerical
//! audits of the regularity assumptions on them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Threshold on `grad V . h` above which a sample counts as a descent violation.
pub const TOL_DESCENT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("state has dimension {got}, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state contains a non-finite coordinate")]
    NonFinite,
    #[error("invalid problem definition: {0}")]
    Invalid(String),
    #[error("degenerate region: every side must have positive finite length")]
    DegenerateRegion,
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ProblemError> {
        let ok = lo.len() == hi.len()
            && !lo.is_empty()
            && lo
                .iter()
                .zip(&hi)
                .all(|(l, h)| l.is_finite() && h.is_finite() && h > l);
        if ok {
            Ok(Region { lo, hi })
        } else {
            Err(ProblemError::DegenerateRegion)
        }
    }

    /// The cube `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Result<Self, ProblemError> {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, l), h) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = l + (h - l) * rng.random::<f64>();
        }
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((v, l), h)| *v >= *l && *v <= *h)
    }
}

/// The bounded open set `B` around the target set.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo)
                .zip(hi)
                .all(|((v, l), h)| *v > *l && *v < *h),
            Domain::Ball { center, radius } => distance(x, center) < *radius,
        }
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo)
                .zip(hi)
                .all(|((v, l), h)| *v >= *l && *v <= *h),
            Domain::Ball { center, radius } => distance(x, center) <= *radius,
        }
    }

    pub fn bounding_region(&self) -> Region {
        match self {
            Domain::Box { lo, hi } => Region {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            Domain::Ball { center, radius } => Region {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            },
        }
    }

    /// Uniform draw from the domain (rejection sampling for balls).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let region = self.bounding_region();
        loop {
            region.sample(rng, out);
            if self.contains(out) {
                return;
            }
        }
    }

    /// Euclidean distance from `x` to the complement of the open set.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo)
                .zip(hi)
                .map(|((v, l), h)| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            Domain::Ball { center, radius } => radius - distance(x, center),
        }
    }
}

/// Vector field `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    /// `h(x) = -x`.
    Linear,
    /// `h(x) = x - x^3`, attractors at `+-1`.
    DoubleWell,
    /// `h(x) = (-x1 - x2, x1 - x2)`.
    Spiral,
    /// `h = 0`.
    Zero,
    /// `h(x) = sum_k c_k x^k`.
    Poly1 { coeffs: Vec<f64> },
    /// `h_k(x) = sum_{i,j} c_k[i][j] x1^i x2^j` for `k = 0, 1`.
    Poly2 { coeffs: [Vec<Vec<f64>>; 2] },
}

/// A stochastic-approximation test problem with `V(x) = ||x - center||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    name: String,
    dim: usize,
    drift: Drift,
    lyapunov_center: Vec<f64>,
    targets: Vec<Vec<f64>>,
    domain: Domain,
}

/// All four primitives at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub drift: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub distance: f64,
}

impl Problem {
    /// `h(x) = -x`, `V = ||x||^2`, `H = {0}`, `B = (-2, 2)^dim`.
    pub fn linear_well(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Problem {
            name: "linear-well".into(),
            dim,
            drift: Drift::Linear,
            lyapunov_center: vec![0.0; dim],
            targets: vec![vec![0.0; dim]],
            domain: Domain::Box {
                lo: vec![-2.0; dim],
                hi: vec![2.0; dim],
            },
        }
    }

    /// `h(x) = x - x^3` with `H = {1}`, `B = (0.2, 1.8)`, `V = (x-1)^2`.
    /// The competing attractor sits at `-1`.
    pub fn double_well() -> Self {
        Problem {
            name: "double-well".into(),
            dim: 1,
            drift: Drift::DoubleWell,
            lyapunov_center: vec![1.0],
            targets: vec![vec![1.0]],
            domain: Domain::Box {
                lo: vec![0.2],
                hi: vec![1.8],
            },
        }
    }

    /// Contracting spiral in the plane; a non-gradient drift.
    pub fn spiral() -> Self {
        Problem {
            name: "spiral".into(),
            dim: 2,
            drift: Drift::Spiral,
            lyapunov_center: vec![0.0, 0.0],
            targets: vec![vec![0.0, 0.0]],
            domain: Domain::Ball {
                center: vec![0.0, 0.0],
                radius: 2.0,
            },
        }
    }

    /// `h = 0`; every point is a fixed point.
    pub fn zero_drift(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Problem {
            name: "zero-drift".into(),
            dim,
            drift: Drift::Zero,
            lyapunov_center: vec![0.0; dim],
            targets: vec![vec![0.0; dim]],
            domain: Domain::Box {
                lo: vec![-2.0; dim],
                hi: vec![2.0; dim],
            },
        }
    }

    /// A user-defined polynomial drift (1-d or 2-d).
    pub fn polynomial(
        name: impl Into<String>,
        drift: Drift,
        lyapunov_center: Vec<f64>,
        targets: Vec<Vec<f64>>,
        domain: Domain,
    ) -> Result<Self, ProblemError> {
        let dim = match &drift {
            Drift::Poly1 { .. } => 1,
            Drift::Poly2 { .. } => 2,
            _ => {
                return Err(ProblemError::Invalid(
                    "polynomial problems take Poly1 or Poly2 drift".into(),
                ))
            }
        };
        let problem = Problem {
            name: name.into(),
            dim,
            drift,
            lyapunov_center,
            targets,
            domain,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Replaces `B`.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self, ProblemError> {
        self.domain = domain;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ProblemError> {
        let invalid = |m: &str| Err(ProblemError::Invalid(m.into()));
        if self.lyapunov_center.len() != self.dim {
            return invalid("lyapunov center dimension mismatch");
        }
        if self.targets.is_empty() || self.targets.iter().any(|t| t.len() != self.dim) {
            return invalid("targets must be a nonempty list of points of the problem dimension");
        }
        if self.domain.dim() != self.dim {
            return invalid("domain dimension mismatch");
        }
        if let Domain::Ball { radius, .. } = &self.domain {
            if !(radius.is_finite() && *radius > 0.0) {
                return invalid("ball radius must be positive");
            }
        }
        if let Domain::Box { lo, hi } = &self.domain {
            if Region::new(lo.clone(), hi.clone()).is_err() {
                return invalid("box domain is degenerate");
            }
        }
        if !self.targets.iter().all(|t| self.domain.contains(t)) {
            return invalid("target set must lie inside the domain");
        }
        if let Drift::Poly2 { coeffs } = &self.drift {
            if coeffs.iter().any(|c| c.is_empty()) {
                return invalid("2-d polynomial needs coefficients for both components");
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn drift_kind(&self) -> &Drift {
        &self.drift
    }

    pub fn lyapunov_center(&self) -> &[f64] {
        &self.lyapunov_center
    }

    /// Writes `h(x)` into `out`. No validation; hot path of the recursion.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.drift {
            Drift::Linear => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -v;
                }
            }
            Drift::DoubleWell => out[0] = x[0] - x[0] * x[0] * x[0],
            Drift::Spiral => {
                out[0] = -x[0] - x[1];
                out[1] = x[0] - x[1];
            }
            Drift::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Drift::Poly1 { coeffs } => {
                // Horner
                out[0] = coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c);
            }
            Drift::Poly2 { coeffs } => {
                for (o, table) in out.iter_mut().zip(coeffs) {
                    *o = table
                        .iter()
                        .enumerate()
                        .map(|(i, row)| {
                            x[0].powi(i as i32)
                                * row.iter().rev().fold(0.0, |acc, c| acc * x[1] + c)
                        })
                        .sum();
                }
            }
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out);
        out
    }

    /// `V(x) = ||x - center||^2`.
    #[inline]
    pub fn lyapunov(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.lyapunov_center)
            .map(|(v, c)| (v - c) * (v - c))
            .sum()
    }

    pub fn lyapunov_grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lyapunov_center)
            .map(|(v, c)| 2.0 * (v - c))
            .collect()
    }

    /// `dist(x, H)`, Euclidean, with `H` a finite point set.
    #[inline]
    pub fn distance_to_target(&self, x: &[f64]) -> f64 {
        self.targets
            .iter()
            .map(|t| distance(x, t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_state(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ProblemError> {
        self.check_state(x)?;
        Ok(Evaluation {
            drift: self.drift(x),
            value: self.lyapunov(x),
            gradient: self.lyapunov_grad(x),
            distance: self.distance_to_target(x),
        })
    }

    /// `grad V(x) . h(x)`.
    pub fn descent_rate(&self, x: &[f64]) -> f64 {
        self.lyapunov_grad(x)
            .iter()
            .zip(self.drift(x))
            .map(|(g, h)| g * h)
            .sum()
    }

    /// Central finite-difference estimate of `d_i d_j V` with step
    /// `max(1e-4, 1e-4 ||x||)`.
    pub fn lyapunov_hessian_fd(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let h = (1e-4 * norm(x)).max(1e-4);
        let mut y = x.to_vec();
        let mut at = |di: f64, dj: f64| {
            y.copy_from_slice(x);
            y[i] += di;
            y[j] += dj;
            self.lyapunov(&y)
        };
        if i == j {
            (at(h, 0.0) - 2.0 * at(0.0, 0.0) + at(-h, 0.0)) / (h * h)
        } else {
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Pass/fail limits for [`audit_assumptions_with`]. Infinite limits only
/// require finite estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditThresholds {
    pub lipschitz_max: f64,
    pub hessian_max: f64,
    pub growth_max: f64,
}

impl Default for AuditThresholds {
    fn default() -> Self {
        AuditThresholds {
            lipschitz_max: f64::INFINITY,
            hessian_max: f64::INFINITY,
            growth_max: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditFlags {
    pub lipschitz: bool,
    pub hessian: bool,
    pub quadratic_growth: bool,
    pub descent: bool,
}

impl AuditFlags {
    pub fn all(&self) -> bool {
        self.lipschitz && self.hessian && self.quadratic_growth && self.descent
    }
}

/// Sampled estimates of the Lipschitz constant of `h`, the Hessian bound of
/// `V`, the quadratic-growth constant, and descent violations.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionAudit {
    pub lipschitz_estimate: f64,
    pub hessian_bound_estimate: f64,
    pub quadratic_growth_c: f64,
    pub descent_violations: usize,
    pub samples_used: usize,
    pub pass_flags: AuditFlags,
}

pub fn audit_assumptions(
    problem: &Problem,
    sample_count: usize,
    region: &Region,
    rng_seed: u64,
) -> Result<AssumptionAudit, ProblemError> {
    audit_assumptions_with(
        problem,
        sample_count,
        region,
        rng_seed,
        AuditThresholds::default(),
    )
}

/// Audits over `sample_count` uniform draws from `region`. The Lipschitz
/// estimate takes the max secant slope over all sample pairs, so the cost is
/// quadratic in `sample_count`.
pub fn audit_assumptions_with(
    problem: &Problem,
    sample_count: usize,
    region: &Region,
    rng_seed: u64,
    thresholds: AuditThresholds,
) -> Result<AssumptionAudit, ProblemError> {
    if sample_count < 2 {
        return Err(ProblemError::TooFewSamples(2));
    }
    // re-validate: Region fields are public
    let region = Region::new(region.lo.clone(), region.hi.clone())?;
    if region.dim() != problem.dim() {
        return Err(ProblemError::DimensionMismatch {
            expected: problem.dim(),
            got: region.dim(),
        });
    }
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut xs = vec![0.0; sample_count * d];
    for x in xs.chunks_mut(d) {
        region.sample(&mut rng, x);
    }
    let hs: Vec<f64> = xs.chunks(d).flat_map(|x| problem.drift(x)).collect();

    let mut lipschitz: f64 = 0.0;
    for i in 0..sample_count {
        let (xi, hi) = (&xs[i * d..(i + 1) * d], &hs[i * d..(i + 1) * d]);
        for j in (i + 1)..sample_count {
            let dx = distance(xi, &xs[j * d..(j + 1) * d]);
            if dx > 0.0 {
                lipschitz = lipschitz.max(distance(hi, &hs[j * d..(j + 1) * d]) / dx);
            }
        }
    }

    let mut hessian: f64 = 0.0;
    let mut growth: f64 = 0.0;
    let mut violations = 0;
    for x in xs.chunks(d) {
        for i in 0..d {
            for j in i..d {
                hessian = hessian.max(problem.lyapunov_hessian_fd(x, i, j).abs());
            }
        }
        growth = growth.max(norm(x).powi(2) / (1.0 + problem.lyapunov(x)));
        if problem.descent_rate(x) > TOL_DESCENT {
            violations += 1;
        }
    }

    let within = |v: f64, max: f64| v.is_finite() && v <= max;
    Ok(AssumptionAudit {
        lipschitz_estimate: lipschitz,
        hessian_bound_estimate: hessian,
        quadratic_growth_c: growth,
        descent_violations: violations,
        samples_used: sample_count,
        pass_flags: AuditFlags {
            lipschitz: within(lipschitz, thresholds.lipschitz_max),
            hessian: within(hessian, thresholds.hessian_max),
            quadratic_growth: within(growth, thresholds.growth_max),
            descent: violations == 0,
        },
    })
}
