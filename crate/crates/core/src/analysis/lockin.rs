use super::{bad, check_replicas, AnalysisError, InitialLaw};
use crate::engine::{CheckpointPlan, SaSystem, DEFAULT_POINTS_PER_BLOCK};
use crate::replica::{run_replicas, McOptions};
use crate::stats::{linear_fit, wilson_interval, Z95};

/// Failure rate `q(n0) = 1 - P[converged]` across an `n0` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LockinCurve {
    pub n0_values: Vec<u64>,
    pub replicas: usize,
    pub success_counts: Vec<usize>,
    /// Replicas per cell that produced a non-finite iterate (counted as failures).
    pub diverged_counts: Vec<usize>,
    pub failure_rate: Vec<f64>,
    pub confidence_intervals: Vec<(f64, f64)>,
    /// `b(n0) = sum_{m >= n0} a(m)^2`.
    pub b_values: Vec<f64>,
}

impl LockinCurve {
    /// Builds a curve from raw counts, attaching Wilson intervals.
    pub fn from_counts(
        n0_values: Vec<u64>,
        replicas: usize,
        success_counts: Vec<usize>,
        diverged_counts: Vec<usize>,
        b_values: Vec<f64>,
    ) -> Self {
        let failure_rate: Vec<f64> = success_counts
            .iter()
            .map(|&s| (replicas - s) as f64 / replicas as f64)
            .collect();
        let confidence_intervals = success_counts
            .iter()
            .map(|&s| wilson_interval((replicas - s) as u64, replicas as u64, Z95))
            .collect();
        LockinCurve {
            n0_values,
            replicas,
            success_counts,
            diverged_counts,
            failure_rate,
            confidence_intervals,
            b_values,
        }
    }

    /// Pairs `(i, j)`, `i < j`, where `q(n0_j)` exceeds `q(n0_i)` and the
    /// two 95% intervals do not overlap.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n0_values.len() {
            for j in i + 1..self.n0_values.len() {
                if self.confidence_intervals[j].0 > self.confidence_intervals[i].1 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Least-squares fit of `log q` against `b^{-1/4}` over the uncensored points.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points with zero observed failures, left out of the fit.
    pub censored_points: usize,
    pub points_used: usize,
    /// Negative slope, the direction the bound requires.
    pub shape_consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockinOptions {
    /// ODE time simulated after each `n0`.
    pub horizon_time: f64,
    pub conv_tol: f64,
    /// Trailing fraction of the run (in ODE time) over which convergence is required.
    pub conv_window: f64,
    pub block_length: f64,
    pub per_block: usize,
}

impl Default for LockinOptions {
    fn default() -> Self {
        LockinOptions {
            horizon_time: 30.0,
            conv_tol: 0.05,
            conv_window: 0.1,
            block_length: 1.0,
            per_block: DEFAULT_POINTS_PER_BLOCK,
        }
    }
}

/// Estimates `q(n0)` for each `n0`. Every cell reuses the same replica
/// streams, so cells differ only through `n0`.
pub fn estimate_lockin(
    system: &SaSystem,
    n0_values: &[u64],
    law: &InitialLaw,
    options: &LockinOptions,
    mc: &McOptions,
) -> Result<LockinCurve, AnalysisError> {
    check_replicas(mc.replicas, 1)?;
    if n0_values.is_empty() || !n0_values.windows(2).all(|w| w[1] > w[0]) {
        return Err(bad("n0 values must be nonempty and strictly increasing"));
    }
    if !(options.conv_tol > 0.0 && options.conv_window > 0.0 && options.conv_window <= 1.0) {
        return Err(bad("need conv_tol > 0 and conv_window in (0, 1]"));
    }
    if system.schedule.is_test_only() {
        return Err(AnalysisError::TestOnlySchedule(system.schedule.id()));
    }
    law.validate(&system.problem, true)?;

    let mut successes = Vec::with_capacity(n0_values.len());
    let mut diverged = Vec::with_capacity(n0_values.len());
    let mut b_values = Vec::with_capacity(n0_values.len());
    for &n0 in n0_values {
        let (s, d) = lockin_cell(system, n0, law, options, mc)?;
        successes.push(s);
        diverged.push(d);
        b_values.push(system.schedule.tail_sum_squares_auto(n0)?);
    }
    if successes.last() == Some(&0) {
        return Err(AnalysisError::Misconfigured {
            n0: *n0_values.last().expect("nonempty"),
        });
    }
    Ok(LockinCurve::from_counts(
        n0_values.to_vec(),
        mc.replicas,
        successes,
        diverged,
        b_values,
    ))
}

/// Success and divergence counts for one `n0`.
fn lockin_cell(
    system: &SaSystem,
    n0: u64,
    law: &InitialLaw,
    options: &LockinOptions,
    mc: &McOptions,
) -> Result<(usize, usize), AnalysisError> {
    let plan = CheckpointPlan::by_time(
        &system.schedule,
        n0,
        options.horizon_time,
        options.block_length,
        options.per_block,
    )?;
    let t_end = *plan.times.last().expect("plan ends with the final index");
    let window_start = t_end - options.conv_window * (t_end - plan.t0);
    let first = plan.times.partition_point(|t| *t < window_start);
    let outcomes = run_replicas(mc, |_, rng| {
        let x0 = law.sample(&system.problem, rng);
        let run = system.run_checkpoints(&plan, &x0, rng);
        if run.diverged_at.is_some() {
            return (false, true);
        }
        let ok = (first..plan.len()).all(|k| {
            system
                .problem
                .distance_to_target(run.state(k).expect("reached"))
                < options.conv_tol
        });
        (ok, false)
    });
    Ok((
        outcomes.iter().filter(|o| o.0).count(),
        outcomes.iter().filter(|o| o.1).count(),
    ))
}

/// Fits `log q = intercept + slope b^{-1/4}` over the points with `q > 0`.
pub fn fit_failure_curve(curve: &LockinCurve) -> Result<BoundFit, AnalysisError> {
    if curve.b_values.len() != curve.failure_rate.len() {
        return Err(bad("b values and failure rates differ in length"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .b_values
        .iter()
        .zip(&curve.failure_rate)
        .filter(|(_, q)| **q > 0.0)
        .map(|(b, q)| (b.powf(-0.25), q.ln()))
        .unzip();
    let censored = curve.failure_rate.len() - xs.len();
    if xs.len() < 3 {
        return Err(AnalysisError::Censored {
            uncensored: xs.len(),
            censored,
        });
    }
    let line = linear_fit(&xs, &ys).ok_or_else(|| bad("b values are not distinct"))?;
    let span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(BoundFit {
        slope: line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        censored_points: censored,
        points_used: xs.len(),
        // fitted drop in log q across the data must be visible
        shape_consistent: line.slope * span < -1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseFamily, NoiseModel};
    use crate::problem::Problem;
    use crate::schedule::StepSchedule;

    fn synthetic(b: &[f64], q: impl Fn(f64) -> f64) -> LockinCurve {
        LockinCurve {
            n0_values: (0..b.len() as u64).collect(),
            replicas: 1000,
            success_counts: vec![0; b.len()],
            diverged_counts: vec![0; b.len()],
            failure_rate: b.iter().map(|v| q(*v)).collect(),
            confidence_intervals: vec![(0.0, 1.0); b.len()],
            b_values: b.to_vec(),
        }
    }

    #[test]
    fn recovers_exact_shape() {
        let b = [0.5, 0.1, 0.01, 1e-3, 1e-4];
        let fit = fit_failure_curve(&synthetic(&b, |v| 0.5 * (-2.0 * v.powf(-0.25)).exp())).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-9);
        assert!((fit.intercept - 0.5f64.ln()).abs() < 1e-9);
        assert!(fit.r_squared >= 1.0 - 1e-9);
        assert!(fit.shape_consistent);
    }

    #[test]
    fn flat_curve_is_flagged() {
        let fit = fit_failure_curve(&synthetic(&[0.5, 0.1, 0.01, 1e-3], |_| 0.2)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(!fit.shape_consistent);
    }

    #[test]
    fn censoring() {
        let c = synthetic(&[0.5, 0.1, 0.01, 1e-3], |v| if v < 0.05 { 0.0 } else { 0.1 });
        assert_eq!(
            fit_failure_curve(&c),
            Err(AnalysisError::Censored {
                uncensored: 2,
                censored: 2
            })
        );
        let c = synthetic(&[0.5, 0.1, 0.01, 1e-3], |v| if v < 1e-2 { 0.0 } else { v });
        assert_eq!(fit_failure_curve(&c).unwrap().censored_points, 1);
    }

    #[test]
    fn wilson_and_rates() {
        let c = LockinCurve::from_counts(vec![10, 100], 200, vec![150, 200], vec![3, 0], vec![0.1, 0.01]);
        assert_eq!(c.failure_rate, vec![0.25, 0.0]);
        for (q, (lo, hi)) in c.failure_rate.iter().zip(&c.confidence_intervals) {
            assert!(lo <= q && q <= hi);
        }
        assert!(c.monotonicity_violations().is_empty());
    }

    fn double_well(noise: NoiseModel) -> SaSystem {
        SaSystem::new(
            Problem::double_well(),
            StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
            noise,
        )
    }

    fn short() -> LockinOptions {
        LockinOptions {
            horizon_time: 10.0,
            conv_tol: 0.05,
            ..LockinOptions::default()
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        let c = estimate_lockin(
            &double_well(NoiseModel::zero()),
            &[10, 100, 1000],
            &InitialLaw::Domain,
            &short(),
            &McOptions::new(50, 1),
        )
        .unwrap();
        assert!(c.failure_rate.iter().all(|q| *q == 0.0));
        assert!(c.b_values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }

    #[test]
    fn loud_noise_is_detected() {
        let noise = NoiseModel::new(NoiseFamily::Laplace, 3.0, true).unwrap();
        let c = estimate_lockin(
            &double_well(noise),
            &[2],
            &InitialLaw::Point(vec![1.0]),
            &LockinOptions {
                conv_tol: 1.5,
                ..short()
            },
            &McOptions::new(200, 2),
        )
        .unwrap();
        assert!(c.failure_rate[0] > 0.1, "{:?}", c.failure_rate);
    }

    #[test]
    fn misconfiguration_is_reported() {
        // a tolerance far below the noise floor
        let noise = NoiseModel::new(NoiseFamily::Laplace, 1.0, true).unwrap();
        let r = estimate_lockin(
            &double_well(noise),
            &[10],
            &InitialLaw::Point(vec![1.0]),
            &LockinOptions {
                conv_tol: 1e-9,
                ..short()
            },
            &McOptions::new(20, 3),
        );
        assert_eq!(r, Err(AnalysisError::Misconfigured { n0: 10 }));
    }

    #[test]
    fn deterministic_across_jobs() {
        let noise = NoiseModel::new(NoiseFamily::Laplace, 1.0, true).unwrap();
        let sys = double_well(noise);
        let opts = LockinOptions {
            conv_tol: 0.2,
            ..short()
        };
        let a = estimate_lockin(&sys, &[10, 100], &InitialLaw::Domain, &opts, &McOptions::new(64, 9).with_jobs(1)).unwrap();
        let b = estimate_lockin(&sys, &[10, 100], &InitialLaw::Domain, &opts, &McOptions::new(64, 9).with_jobs(4)).unwrap();
        assert_eq!(a, b);
    }
}
