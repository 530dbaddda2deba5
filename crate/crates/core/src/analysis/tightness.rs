use super::{bad, check_replicas, AnalysisError, InitialLaw};
use crate::engine::{CheckpointPlan, SaSystem, DEFAULT_POINTS_PER_BLOCK};
use crate::problem::norm;
use crate::replica::{run_replicas, McOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessResult {
    pub radii: Vec<f64>,
    /// `max_n` over checkpoints of the fraction of replicas with `||x_n|| > K`.
    pub escape_fraction: Vec<f64>,
    /// Replica count behind each escape fraction.
    pub escape_counts: Vec<usize>,
    /// Checkpoint index at which each maximum is attained (first one).
    pub worst_index: Vec<u64>,
    pub replicas: usize,
    pub diverged: usize,
    pub checkpoints: usize,
}

impl TightnessResult {
    /// Smallest radius whose escape fraction is at most `level`.
    pub fn witness(&self, level: f64) -> Option<f64> {
        self.radii
            .iter()
            .zip(&self.escape_fraction)
            .find(|(_, f)| **f <= level)
            .map(|(k, _)| *k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessOptions {
    pub n0: u64,
    /// Last iterate index.
    pub horizon: u64,
    pub radius_grid: Vec<f64>,
    pub block_length: f64,
    pub per_block: usize,
}

impl TightnessOptions {
    pub fn new(n0: u64, horizon: u64, radius_grid: Vec<f64>) -> Self {
        TightnessOptions {
            n0,
            horizon,
            radius_grid,
            block_length: 1.0,
            per_block: DEFAULT_POINTS_PER_BLOCK,
        }
    }
}

/// Empirical `sup_n P[||x_n|| > K]` over checkpointed `n` for each `K`.
/// A diverged replica counts as outside every ball from its divergence on.
pub fn estimate_tightness(
    system: &SaSystem,
    law: &InitialLaw,
    options: &TightnessOptions,
    mc: &McOptions,
) -> Result<TightnessResult, AnalysisError> {
    let radius_grid = &options.radius_grid[..];
    check_replicas(mc.replicas, 100)?;
    if radius_grid.is_empty()
        || !radius_grid.iter().all(|k| k.is_finite() && *k >= 0.0)
        || !radius_grid.windows(2).all(|w| w[1] > w[0])
    {
        return Err(bad("radius grid must be nonempty, nonnegative, and increasing"));
    }
    law.validate(&system.problem, false)?;
    let plan = CheckpointPlan::by_index(
        &system.schedule,
        options.n0,
        options.horizon,
        options.block_length,
        options.per_block,
    )?;
    let norms = run_replicas(mc, |_, rng| {
        let x0 = law.sample(&system.problem, rng);
        let run = system.run_checkpoints(&plan, &x0, rng);
        let mut out: Vec<f64> = (0..run.reached())
            .map(|k| norm(run.state(k).expect("reached")))
            .collect();
        out.resize(plan.len(), f64::INFINITY);
        (out, run.diverged_at.is_some())
    });

    let mut escape_counts = Vec::with_capacity(radius_grid.len());
    let mut worst_index = Vec::with_capacity(radius_grid.len());
    for &k in radius_grid {
        let (best, at) = (0..plan.len())
            .map(|c| (norms.iter().filter(|(v, _)| v[c] > k).count(), c))
            .fold((0, 0), |acc, (count, c)| if count > acc.0 { (count, c) } else { acc });
        escape_counts.push(best);
        worst_index.push(plan.indices[at]);
    }
    Ok(TightnessResult {
        radii: radius_grid.to_vec(),
        escape_fraction: escape_counts
            .iter()
            .map(|c| *c as f64 / mc.replicas as f64)
            .collect(),
        escape_counts,
        worst_index,
        replicas: mc.replicas,
        diverged: norms.iter().filter(|(_, d)| *d).count(),
        checkpoints: plan.len(),
    })
}
