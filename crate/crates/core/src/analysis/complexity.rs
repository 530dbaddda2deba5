use super::{bad, check_replicas, AnalysisError, InitialLaw};
use crate::engine::{ode_flow, CheckpointPlan, SaSystem, DEFAULT_POINTS_PER_BLOCK};
use crate::problem::{distance, Domain, Problem};
use crate::replica::{run_replicas, McOptions};

/// `max V` over the closure of `B`. `V` is a squared distance, so the
/// maximum sits at the farthest point of `B` from the Lyapunov center.
pub fn max_v_on_b(problem: &Problem) -> f64 {
    let c = problem.lyapunov_center();
    match problem.domain() {
        Domain::Box { lo, hi } => c
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (l, h))| (l - c).powi(2).max((h - c).powi(2)))
            .sum(),
        Domain::Ball { center, radius } => (distance(c, center) + radius).powi(2),
    }
}

/// Points of the grid over the bounding box of `B` that lie in its closure,
/// plus the points where `V` crosses `epsilon` along grid edges.
fn delta_candidates(problem: &Problem, epsilon: f64, resolution: usize) -> Vec<Vec<f64>> {
    let region = problem.domain().bounding_region();
    let d = region.dim();
    let total = resolution.pow(d as u32);
    let point = |mut k: usize| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let j = k % resolution;
                k /= resolution;
                region.lo[i] + (region.hi[i] - region.lo[i]) * j as f64 / (resolution - 1) as f64
            })
            .collect()
    };
    let domain = problem.domain();
    let mut out = Vec::new();
    for k in 0..total {
        let x = point(k);
        if !domain.contains_closed(&x) {
            continue;
        }
        let vx = problem.lyapunov(&x);
        let mut stride = 1;
        for i in 0..d {
            let coord = (k / stride) % resolution;
            if coord + 1 < resolution {
                let y = point(k + stride);
                let vy = problem.lyapunov(&y);
                if domain.contains_closed(&y) && (vx - epsilon) * (vy - epsilon) < 0.0 {
                    out.push(bisect_level(problem, &x, &y, epsilon));
                }
            }
            stride *= resolution;
            let _ = i;
        }
        if vx >= epsilon {
            out.push(x);
        }
    }
    out
}

/// Point on the segment `[x, y]` where `V = level`, assuming a sign change.
fn bisect_level(problem: &Problem, x: &[f64], y: &[f64], level: f64) -> Vec<f64> {
    let at = |w: f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a + w * (b - a)).collect() };
    let below_at_zero = problem.lyapunov(x) < level;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (problem.lyapunov(&at(mid)) < level) == below_at_zero {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the outer end keeps V >= level
    at(if below_at_zero { hi } else { lo })
}

/// `min V(x) - V(phi_T(x))` over a grid of `closure(B) \ {V < epsilon}`,
/// including the level-set crossings of the grid edges.
pub fn compute_delta(
    problem: &Problem,
    epsilon: f64,
    t_flow: f64,
    grid_resolution: usize,
    dt: f64,
) -> Result<f64, AnalysisError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(bad("epsilon must be positive"));
    }
    if !(t_flow.is_finite() && t_flow >= 0.0) {
        return Err(bad("flow time must be nonnegative"));
    }
    if grid_resolution < 2 {
        return Err(bad("grid resolution must be at least 2"));
    }
    let c = problem.lyapunov_center();
    if problem.domain().distance_to_boundary(c) <= epsilon.sqrt() {
        return Err(AnalysisError::Precondition(format!(
            "the sublevel set V <= {epsilon} is not contained in B"
        )));
    }
    let candidates = delta_candidates(problem, epsilon, grid_resolution);
    if candidates.is_empty() {
        return Err(AnalysisError::Precondition(
            "the grid has no points outside the epsilon core".into(),
        ));
    }
    let mut min = f64::INFINITY;
    for x in &candidates {
        let y = ode_flow(problem, x, t_flow, dt)?;
        min = min.min(problem.lyapunov(x) - problem.lyapunov(&y));
    }
    if min > 0.0 {
        Ok(min)
    } else {
        Err(AnalysisError::NonpositiveDelta { min })
    }
}

/// `((max V - epsilon) / (Delta / 2)) (T + 1)`.
pub fn compute_gamma(max_v: f64, epsilon: f64, delta_v: f64, t_flow: f64) -> Result<f64, AnalysisError> {
    if !(max_v - epsilon > 0.0) {
        return Err(bad("max V on B must exceed epsilon"));
    }
    if !(delta_v > 0.0) {
        return Err(AnalysisError::NonpositiveDelta { min: delta_v });
    }
    if !(t_flow >= 0.0) {
        return Err(bad("flow time must be nonnegative"));
    }
    Ok((max_v - epsilon) / (delta_v / 2.0) * (t_flow + 1.0))
}

/// Largest neighborhood radius with `N_delta({V < epsilon})` inside `B`
/// and `|V(x) - V(y)| < Delta / 2` whenever `||x - y|| < delta` on `closure(B)`.
/// With `V = ||x - c||^2` and `R = sqrt(max V)`, the second condition holds
/// for `delta <= Delta / (4 R)`.
pub fn max_admissible_delta(problem: &Problem, epsilon: f64, delta_v: f64) -> f64 {
    let r = max_v_on_b(problem).sqrt();
    let c = problem.lyapunov_center();
    let room = problem.domain().distance_to_boundary(c) - epsilon.sqrt();
    (delta_v / (4.0 * r)).min(room).max(0.0)
}

/// Euclidean distance from `x` to `{V <= level}`.
pub fn trapped_distance(problem: &Problem, x: &[f64], level: f64) -> f64 {
    (distance(x, problem.lyapunov_center()) - level.max(0.0).sqrt()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleComplexityOptions {
    pub n0: u64,
    pub epsilon: f64,
    pub delta_nbhd: f64,
    /// Flow time `T` in the descent condition; also the block length.
    pub block_length: f64,
    pub horizon_time: f64,
    pub grid_resolution: usize,
    pub dt: f64,
    pub per_block: usize,
}

impl SampleComplexityOptions {
    pub fn new(n0: u64, epsilon: f64, delta_nbhd: f64, horizon_time: f64) -> Self {
        SampleComplexityOptions {
            n0,
            epsilon,
            delta_nbhd,
            block_length: 1.0,
            horizon_time,
            grid_resolution: 401,
            dt: 1e-3,
            per_block: DEFAULT_POINTS_PER_BLOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleComplexityResult {
    pub n0: u64,
    pub epsilon: f64,
    pub delta_nbhd: f64,
    /// The descent margin `Delta`.
    pub delta_v: f64,
    pub gamma: f64,
    pub max_v: f64,
    pub horizon_time: f64,
    pub trapped: usize,
    pub trapped_fraction: f64,
    pub replicas: usize,
    pub diverged: usize,
}

/// Fraction of replicas whose checkpoints in `[t(n0) + gamma, t(n0) + horizon_time]`
/// all lie within `delta_nbhd` of `{V <= epsilon + Delta / 2}`.
pub fn estimate_sample_complexity(
    system: &SaSystem,
    law: &InitialLaw,
    options: &SampleComplexityOptions,
    mc: &McOptions,
) -> Result<SampleComplexityResult, AnalysisError> {
    check_replicas(mc.replicas, 1)?;
    let problem = &system.problem;
    let o = options;
    let delta_v = compute_delta(problem, o.epsilon, o.block_length, o.grid_resolution, o.dt)?;
    let max_v = max_v_on_b(problem);
    let gamma = compute_gamma(max_v, o.epsilon, delta_v, o.block_length)?;
    if gamma >= o.horizon_time {
        return Err(AnalysisError::HorizonTooShort {
            gamma,
            horizon_time: o.horizon_time,
        });
    }
    let limit = max_admissible_delta(problem, o.epsilon, delta_v);
    if !(o.delta_nbhd > 0.0 && o.delta_nbhd <= limit) {
        return Err(AnalysisError::Precondition(format!(
            "delta_nbhd must lie in (0, {limit}] for these epsilon and Delta"
        )));
    }
    law.validate(problem, true)?;
    let plan = CheckpointPlan::by_time(&system.schedule, o.n0, o.horizon_time, o.block_length, o.per_block)?;
    let first = plan.times.partition_point(|t| *t - plan.t0 < gamma);
    let level = o.epsilon + delta_v / 2.0;
    let outcomes = run_replicas(mc, |_, rng| {
        let x0 = law.sample(problem, rng);
        let run = system.run_checkpoints(&plan, &x0, rng);
        if run.diverged_at.is_some() {
            return (false, true);
        }
        let ok = (first..plan.len())
            .all(|k| trapped_distance(problem, run.state(k).expect("reached"), level) <= o.delta_nbhd);
        (ok, false)
    });
    let trapped = outcomes.iter().filter(|o| o.0).count();
    Ok(SampleComplexityResult {
        n0: o.n0,
        epsilon: o.epsilon,
        delta_nbhd: o.delta_nbhd,
        delta_v,
        gamma,
        max_v,
        horizon_time: o.horizon_time,
        trapped,
        trapped_fraction: trapped as f64 / mc.replicas as f64,
        replicas: mc.replicas,
        diverged: outcomes.iter().filter(|o| o.1).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFamily, NoiseModel};
    use crate::schedule::StepSchedule;

    #[test]
    fn gamma_arithmetic() {
        assert!((compute_gamma(0.64, 0.04, 0.2, 1.0).unwrap() - 12.0).abs() < 1e-12);
        let g1 = compute_gamma(0.64, 0.04, 0.1, 2.0).unwrap();
        let g2 = compute_gamma(0.64, 0.04, 0.2, 2.0).unwrap();
        assert!((g1 - 2.0 * g2).abs() < 1e-12);
        assert!((compute_gamma(0.64, 0.04, 0.2, 0.0).unwrap() - 6.0).abs() < 1e-12);
        assert!(compute_gamma(0.04, 0.04, 0.2, 1.0).is_err());
    }

    #[test]
    fn linear_well_closed_form() {
        // V(phi_T x) = e^{-2T} V(x): the minimum sits on V = epsilon
        let p = Problem::linear_well(1);
        let d = compute_delta(&p, 0.01, 1.0, 401, 1e-3).unwrap();
        let want = 0.01 * (1.0 - (-2.0f64).exp());
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
        assert!((want - 0.008647).abs() < 1e-6);
    }

    #[test]
    fn linear_well_two_dims() {
        let p = Problem::linear_well(2);
        let d = compute_delta(&p, 0.01, 1.0, 81, 1e-3).unwrap();
        let want = 0.01 * (1.0 - (-2.0f64).exp());
        assert!((d - want).abs() < 1e-9, "{d} vs {want}");
    }

    #[test]
    fn double_well_positive() {
        let p = Problem::double_well();
        let d = compute_delta(&p, 0.04, 1.0, 1601, 1e-3).unwrap();
        assert!(d > 0.0);
        // dense-grid oracle built from the scalar flow directly
        let oracle = (0..=16000)
            .map(|k| 0.2 + 1.6 * k as f64 / 16000.0)
            .filter(|x| (x - 1.0f64).powi(2) >= 0.04)
            .chain([0.8, 1.2])
            .map(|x| {
                let y = ode_flow(&p, &[x], 1.0, 1e-4).unwrap()[0];
                (x - 1.0f64).powi(2) - (y - 1.0).powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((d - oracle).abs() < 1e-6 * oracle.max(1.0) + 1e-7, "{d} vs {oracle}");
    }

    #[test]
    fn zero_time_is_rejected() {
        let p = Problem::double_well();
        assert!(matches!(
            compute_delta(&p, 0.04, 0.0, 101, 1e-3),
            Err(AnalysisError::NonpositiveDelta { .. })
        ));
    }

    #[test]
    fn core_must_fit_in_b() {
        let p = Problem::double_well();
        // sqrt(0.81) = 0.9 > distance 0.8 to the boundary of (0.2, 1.8)
        assert!(matches!(
            compute_delta(&p, 0.81, 1.0, 101, 1e-3),
            Err(AnalysisError::Precondition(_))
        ));
    }

    #[test]
    fn nondecreasing_in_epsilon() {
        for p in [Problem::linear_well(1), Problem::double_well(), Problem::spiral()] {
            let mut last = 0.0;
            for eps in [0.01, 0.02, 0.04, 0.08, 0.16] {
                let d = compute_delta(&p, eps, 1.0, if p.dim() == 1 { 401 } else { 61 }, 1e-2).unwrap();
                assert!(d >= last * (1.0 - 1e-9), "{}: {d} < {last} at {eps}", p.name());
                last = d;
            }
        }
    }

    #[test]
    fn max_v_exact() {
        assert!((max_v_on_b(&Problem::double_well()) - 0.64).abs() < 1e-12);
        assert!((max_v_on_b(&Problem::linear_well(2)) - 8.0).abs() < 1e-12);
        assert!((max_v_on_b(&Problem::spiral()) - 4.0).abs() < 1e-12);
    }

    fn dw(noise: NoiseModel) -> SaSystem {
        SaSystem::new(
            Problem::double_well(),
            StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
            noise,
        )
    }

    #[test]
    fn zero_noise_is_trapped() {
        let o = SampleComplexityOptions::new(100, 0.04, 0.01, 70.0);
        let r = estimate_sample_complexity(&dw(NoiseModel::zero()), &InitialLaw::Domain, &o, &McOptions::new(40, 3))
            .unwrap();
        assert_eq!(r.trapped_fraction, 1.0);
        assert!(r.gamma < 70.0 && r.delta_v > 0.0);
    }

    #[test]
    fn bigger_neighborhood_traps_more() {
        let sys = dw(NoiseModel::new(NoiseFamily::Laplace, 3.0, true).unwrap());
        let mc = McOptions::new(100, 8);
        let small = SampleComplexityOptions::new(10, 0.04, 0.001, 70.0);
        let big = SampleComplexityOptions {
            delta_nbhd: 0.012,
            ..small
        };
        let a = estimate_sample_complexity(&sys, &InitialLaw::Domain, &small, &mc).unwrap();
        let b = estimate_sample_complexity(&sys, &InitialLaw::Domain, &big, &mc).unwrap();
        assert!(b.trapped >= a.trapped);
        assert!(matches!(
            estimate_sample_complexity(&sys, &InitialLaw::Domain, &SampleComplexityOptions { delta_nbhd: 0.5, ..small }, &mc),
            Err(AnalysisError::Precondition(_))
        ));
        assert!(matches!(
            estimate_sample_complexity(&sys, &InitialLaw::Domain, &SampleComplexityOptions { horizon_time: 10.0, ..small }, &mc),
            Err(AnalysisError::HorizonTooShort { .. })
        ));
    }
}
