use super::{check_replicas, AnalysisError, InitialLaw};
use crate::engine::{CheckpointPlan, SaSystem, DEFAULT_POINTS_PER_BLOCK};
use crate::noise::verify_second_moment;
use crate::problem::{audit_assumptions, AssumptionAudit, Region};
use crate::replica::{run_replicas, McOptions};
use crate::stats::Moments;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentOptions {
    pub n0: u64,
    /// Last iterate index.
    pub horizon: u64,
    /// Region sampled by the assumption audit and the noise probes.
    /// Defaults to the bounding box of `B`.
    pub audit_region: Option<Region>,
    pub audit_samples: usize,
    /// Probe points per axis for the second-moment constant.
    pub probes_per_axis: usize,
    pub noise_samples: usize,
    pub audit_seed: u64,
    pub block_length: f64,
    pub per_block: usize,
}

impl MomentOptions {
    pub fn new(n0: u64, horizon: u64) -> Self {
        MomentOptions {
            n0,
            horizon,
            audit_region: None,
            audit_samples: 400,
            probes_per_axis: 5,
            noise_samples: 20_000,
            audit_seed: 0,
            block_length: 1.0,
            per_block: DEFAULT_POINTS_PER_BLOCK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub audit: AssumptionAudit,
    /// Second-moment constant from the noise check.
    pub noise_c: f64,
    /// `quadratic growth c * noise c * Hessian bound`.
    pub c_hat: f64,
    pub indices: Vec<u64>,
    /// `1 + E[V(x_n)]` over the non-diverged replicas.
    pub curve: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `exp(c_hat sum_{i=n0}^{n-1} a(i)^2) (1 + E[V(x_{n0})])`.
    pub envelope: Vec<f64>,
    pub replicas: usize,
    pub diverged: usize,
    /// Checkpoints where `curve > envelope (1 + 3 se)`.
    pub violations: Vec<u64>,
}

impl MomentBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Grid of `per_axis^d` probe points spanning `region`.
pub fn probe_grid(region: &Region, per_axis: usize) -> Vec<Vec<f64>> {
    let d = region.dim();
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut k| {
            (0..d)
                .map(|i| {
                    let j = k % per_axis;
                    k /= per_axis;
                    let w = j as f64 / (per_axis - 1) as f64;
                    region.lo[i] + w * (region.hi[i] - region.lo[i])
                })
                .collect()
        })
        .collect()
}

/// Compares the Monte Carlo curve `1 + E[V(x_n)]` with the moment envelope.
/// Divergent replicas are excluded; more than 1% of them is an error.
pub fn moment_bound_check(
    system: &SaSystem,
    law: &InitialLaw,
    options: &MomentOptions,
    mc: &McOptions,
) -> Result<MomentBoundReport, AnalysisError> {
    check_replicas(mc.replicas, 2)?;
    if system.schedule.is_test_only() {
        return Err(AnalysisError::TestOnlySchedule(system.schedule.id()));
    }
    law.validate(&system.problem, false)?;
    let problem = &system.problem;
    let region = options
        .audit_region
        .clone()
        .unwrap_or_else(|| problem.domain().bounding_region());
    let audit = audit_assumptions(problem, options.audit_samples, &region, options.audit_seed)?;
    if !audit.pass_flags.all() {
        return Err(AnalysisError::Precondition(format!(
            "assumption audit failed: {:?}",
            audit.pass_flags
        )));
    }
    let noise_c = verify_second_moment(
        &system.noise,
        &probe_grid(&region, options.probes_per_axis),
        options.noise_samples,
        options.audit_seed,
    )?;
    let c_hat = audit.quadratic_growth_c * noise_c * audit.hessian_bound_estimate;

    let plan = CheckpointPlan::by_index(
        &system.schedule,
        options.n0,
        options.horizon,
        options.block_length,
        options.per_block,
    )?;
    let paths = run_replicas(mc, |_, rng| {
        let x0 = law.sample(problem, rng);
        let run = system.run_checkpoints(&plan, &x0, rng);
        if run.diverged_at.is_some() {
            return None;
        }
        Some(
            (0..plan.len())
                .map(|k| problem.lyapunov(run.state(k).expect("reached")))
                .collect::<Vec<f64>>(),
        )
    });
    let diverged = paths.iter().filter(|p| p.is_none()).count();
    if diverged * 100 > mc.replicas {
        return Err(AnalysisError::TooManyDiverged {
            diverged,
            replicas: mc.replicas,
        });
    }
    let mut moments = vec![Moments::default(); plan.len()];
    for path in paths.iter().flatten() {
        for (m, v) in moments.iter_mut().zip(path) {
            m.push(*v);
        }
    }
    let curve: Vec<f64> = moments.iter().map(|m| 1.0 + m.mean()).collect();
    let std_err: Vec<f64> = moments.iter().map(Moments::std_err).collect();

    let mut envelope = Vec::with_capacity(plan.len());
    let mut sum_sq = 0.0;
    let mut n = plan.n0;
    for &k in &plan.indices {
        while n < k {
            sum_sq += system.schedule.step(n).powi(2);
            n += 1;
        }
        envelope.push((c_hat * sum_sq).exp() * curve[0]);
    }
    let violations = plan
        .indices
        .iter()
        .enumerate()
        .filter(|(k, _)| curve[*k] > envelope[*k] * (1.0 + 3.0 * std_err[*k]))
        .map(|(_, n)| *n)
        .collect();
    Ok(MomentBoundReport {
        audit,
        noise_c,
        c_hat,
        indices: plan.indices.clone(),
        curve,
        std_err,
        envelope,
        replicas: mc.replicas,
        diverged,
        violations,
    })
}
