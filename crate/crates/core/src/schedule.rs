//! Step-size sequences `a(n) = 1 / ((n + offset)^alpha * ln(n + offset)^beta)`.
//!
//! The admissible family is `alpha` in `(1/2, 1)` with any `beta`, or
//! `alpha = 1` with `beta <= 0`. Every member has divergent partial sums and
//! summable squares, and decays slowly enough that steps inside one ODE-time
//! block of length `T` stay within a bounded ratio of each other.
//!
//! A constant schedule exists only for exact-arithmetic tests of the block
//! logic; it is flagged `test_only` and rejected by the Monte Carlo checks
//! that need summable squares.

use statrs::function::gamma::gamma_ui;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("exponents alpha={alpha}, beta={beta} are outside the admissible family (alpha in (1/2,1), or alpha=1 with beta<=0)")]
    Inadmissible { alpha: f64, beta: f64 },
    #[error("offset {offset} is too small: need offset >= 1, and >= 2 when beta != 0")]
    BadOffset { offset: u64 },
    #[error("constant step {0} must be positive and finite")]
    BadConstantStep(f64),
    #[error("the tail sum of squared steps diverges for this schedule")]
    DivergentTail,
    #[error("cutoff {cutoff} must exceed n0 {n0}")]
    BadCutoff { n0: u64, cutoff: u64 },
    #[error("insufficient horizon: no complete block of length {block_length} between n0={n0} and horizon={horizon}")]
    InsufficientHorizon {
        n0: u64,
        horizon: u64,
        block_length: f64,
    },
    #[error("block length must be positive and finite, got {0}")]
    BadBlockLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    PolyLog { alpha: f64, beta: f64, offset: u64 },
    Constant { step: f64 },
}

/// An immutable step-size sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    family: Family,
    a_max: f64,
}

impl StepSchedule {
    /// Builds a member of the poly-log family. Offset defaults to 2 in
    /// configuration; any offset `>= 1` (`>= 2` when `beta != 0`) is accepted.
    pub fn poly_log(alpha: f64, beta: f64, offset: u64) -> Result<Self, ScheduleError> {
        let admissible = alpha.is_finite()
            && beta.is_finite()
            && ((alpha > 0.5 && alpha < 1.0) || (alpha == 1.0 && beta <= 0.0));
        if !admissible {
            return Err(ScheduleError::Inadmissible { alpha, beta });
        }
        if offset < 1 || (beta != 0.0 && offset < 2) {
            return Err(ScheduleError::BadOffset { offset });
        }
        let family = Family::PolyLog {
            alpha,
            beta,
            offset,
        };
        let mut schedule = StepSchedule {
            family,
            a_max: f64::NAN,
        };
        schedule.a_max = schedule.compute_a_max();
        Ok(schedule)
    }

    /// `a(n) = 1/(n+1)`, the textbook harmonic schedule.
    pub fn harmonic() -> Self {
        Self::poly_log(1.0, 0.0, 1).expect("harmonic schedule is admissible")
    }

    /// A constant step. Violates summability of squares, so it is only for
    /// exact-arithmetic tests of the partition logic.
    pub fn constant_test_only(step: f64) -> Result<Self, ScheduleError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(ScheduleError::BadConstantStep(step));
        }
        Ok(StepSchedule {
            family: Family::Constant { step },
            a_max: step,
        })
    }

    pub fn is_test_only(&self) -> bool {
        matches!(self.family, Family::Constant { .. })
    }

    /// `(alpha, beta, offset)` for poly-log schedules.
    pub fn exponents(&self) -> Option<(f64, f64, u64)> {
        match self.family {
            Family::PolyLog {
                alpha,
                beta,
                offset,
            } => Some((alpha, beta, offset)),
            Family::Constant { .. } => None,
        }
    }

    /// Short identifier used in trajectory dumps and reports.
    pub fn id(&self) -> String {
        match self.family {
            Family::PolyLog {
                alpha,
                beta,
                offset,
            } => format!("poly-log(alpha={alpha},beta={beta},offset={offset})"),
            Family::Constant { step } => format!("constant(step={step})"),
        }
    }

    /// `sup_n a(n)`.
    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// The step `a(n)`.
    #[inline]
    pub fn step(&self, n: u64) -> f64 {
        match self.family {
            Family::Constant { step } => step,
            Family::PolyLog {
                alpha,
                beta,
                offset,
            } => poly_log_value(alpha, beta, (n + offset) as f64),
        }
    }

    /// `t(n) = sum_{i<n} a(i)`, accumulated left to right so that it agrees
    /// bit-for-bit with the running clock of the iterate recursion.
    pub fn elapsed_time(&self, n: u64) -> f64 {
        let mut t = 0.0;
        for i in 0..n {
            t += self.step(i);
        }
        t
    }

    /// Approximates `b(n0) = sum_{m >= n0} a(m)^2` as the finite sum up to
    /// `cutoff` plus an integral upper bound on the remainder. The result is
    /// an upper bound on the truncated sum and never below the finite part.
    pub fn tail_sum_squares(&self, n0: u64, cutoff: u64) -> Result<f64, ScheduleError> {
        if cutoff <= n0 {
            return Err(ScheduleError::BadCutoff { n0, cutoff });
        }
        let (alpha, beta, offset) = match self.family {
            Family::Constant { .. } => return Err(ScheduleError::DivergentTail),
            Family::PolyLog {
                alpha,
                beta,
                offset,
            } => (alpha, beta, offset),
        };
        // For beta < 0 the squared step rises until ln u = -beta/alpha; the
        // integral comparison needs the summand nonincreasing past the cutoff.
        let mut cutoff = cutoff;
        if beta < 0.0 {
            let peak = (-beta / alpha).exp().ceil() as u64 + 1;
            if cutoff + offset < peak {
                cutoff = peak - offset;
            }
        }
        let mut sum = 0.0;
        for m in n0..=cutoff {
            let a = self.step(m);
            sum += a * a;
        }
        let u0 = (cutoff + offset) as f64;
        Ok(sum + squared_tail_integral(alpha, beta, u0))
    }

    /// `b(n0)` with a cutoff far enough out that the remainder bound is
    /// negligible next to the finite part.
    pub fn tail_sum_squares_auto(&self, n0: u64) -> Result<f64, ScheduleError> {
        self.tail_sum_squares(n0, n0 + 200_000)
    }

    /// Block boundaries `n_i = min{n : t(n) >= t(n_{i-1}) + T}` starting at
    /// `n0`, keeping every boundary `<= horizon`.
    pub fn partition_blocks(
        &self,
        n0: u64,
        block_length: f64,
        horizon: u64,
    ) -> Result<BlockPartition, ScheduleError> {
        if !(block_length.is_finite() && block_length > 0.0) {
            return Err(ScheduleError::BadBlockLength(block_length));
        }
        let insufficient = ScheduleError::InsufficientHorizon {
            n0,
            horizon,
            block_length,
        };
        if horizon <= n0 {
            return Err(insufficient);
        }
        let mut boundaries = vec![n0];
        let mut times = vec![self.elapsed_time(n0)];
        let mut t = times[0];
        let mut target = t + block_length;
        for n in n0..horizon {
            t += self.step(n);
            if t >= target {
                boundaries.push(n + 1);
                times.push(t);
                target = t + block_length;
            }
        }
        if boundaries.len() < 2 {
            return Err(insufficient);
        }
        Ok(BlockPartition {
            n0,
            block_length,
            boundaries,
            times,
        })
    }

    /// Max over blocks of the within-block step ratio `max a / min a`.
    pub fn block_ratio_stats(&self, partition: &BlockPartition) -> f64 {
        self.block_ratios(partition)
            .into_iter()
            .fold(1.0, f64::max)
    }

    /// Per-block ratio `max_{m1,m2} a(n_i+m1)/a(n_i+m2)` over the steps
    /// `n_i..n_{i+1}` whose time intervals tile block `i`.
    pub fn block_ratios(&self, partition: &BlockPartition) -> Vec<f64> {
        partition
            .boundaries
            .windows(2)
            .map(|w| {
                let (lo, hi) = (w[0]..w[1]).map(|n| self.step(n)).fold(
                    (f64::INFINITY, 0.0_f64),
                    |(lo, hi), a| (lo.min(a), hi.max(a)),
                );
                hi / lo
            })
            .collect()
    }

    /// Doubling-window numerical proxy for (A2): positivity, monotonicity
    /// past a threshold, divergence of `sum a`, and convergence of `sum a^2`.
    pub fn check_a2(&self, horizon: u64) -> A2Report {
        let horizon = horizon.max(16);
        let mut positive = true;
        let mut last_increase = None;
        let mut prev = self.step(0);
        positive &= prev > 0.0 && prev.is_finite();
        for n in 1..=horizon {
            let a = self.step(n);
            positive &= a > 0.0 && a.is_finite();
            if a > prev {
                last_increase = Some(n);
            }
            prev = a;
        }
        let q = horizon / 4;
        let window = |lo: u64, hi: u64, power: i32| -> f64 {
            (lo..hi).map(|n| self.step(n).powi(power)).sum()
        };
        let linear_ratio = window(2 * q, 4 * q, 1) / window(q, 2 * q, 1);
        let square_ratio = window(2 * q, 4 * q, 2) / window(q, 2 * q, 2);
        const TOL: f64 = 1e-3;
        A2Report {
            horizon,
            positive,
            nonincreasing_from: last_increase.unwrap_or(0),
            linear_sum_ratio: linear_ratio,
            square_sum_ratio: square_ratio,
            sum_diverges: linear_ratio >= 1.0 - TOL,
            squares_converge: square_ratio < 1.0 - TOL,
        }
    }

    fn compute_a_max(&self) -> f64 {
        match self.family {
            Family::Constant { step } => step,
            Family::PolyLog {
                alpha,
                beta,
                offset,
            } => {
                // Decreasing once ln u > -beta/alpha; scan up to that point.
                let peak = if beta < 0.0 {
                    (-beta / alpha).exp().ceil() as u64 + 1
                } else {
                    0
                };
                let last = peak.saturating_sub(offset) + 1;
                (0..=last).map(|n| self.step(n)).fold(0.0, f64::max)
            }
        }
    }
}

#[inline]
fn poly_log_value(alpha: f64, beta: f64, u: f64) -> f64 {
    let power = if alpha == 1.0 { 1.0 / u } else { u.powf(-alpha) };
    if beta == 0.0 {
        power
    } else {
        power * u.ln().powf(-beta)
    }
}

/// Upper bound on `int_{u0}^inf u^{-2 alpha} (ln u)^{-2 beta} du`.
fn squared_tail_integral(alpha: f64, beta: f64, u0: f64) -> f64 {
    let lambda = 2.0 * alpha - 1.0;
    let power_part = u0.powf(-lambda) / lambda;
    if beta == 0.0 {
        power_part
    } else if beta > 0.0 {
        // ln u >= ln u0 on the range, so the log factor is at most its value at u0.
        u0.ln().powf(-2.0 * beta) * power_part
    } else {
        // u = e^s turns the integral into an upper incomplete gamma function.
        let shape = 1.0 - 2.0 * beta;
        gamma_ui(shape, lambda * u0.ln()) / lambda.powf(shape)
    }
}

/// Boundaries of the ODE-time blocks of length `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub n0: u64,
    pub block_length: f64,
    /// `[n_0, n_1, ...]`, strictly increasing.
    pub boundaries: Vec<u64>,
    /// `t(n_i)` for each boundary.
    pub times: Vec<f64>,
}

impl BlockPartition {
    pub fn block_count(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    /// ODE-time widths `t(n_{i+1}) - t(n_i)`.
    pub fn widths(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index range `[n_i, n_{i+1}]` of block `i`.
    pub fn block(&self, i: usize) -> Option<(u64, u64)> {
        Some((*self.boundaries.get(i)?, *self.boundaries.get(i + 1)?))
    }
}

/// Result of [`StepSchedule::check_a2`].
#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub horizon: u64,
    pub positive: bool,
    /// Steps are nonincreasing from this index through the horizon.
    pub nonincreasing_from: u64,
    /// `sum_{[N/2,N)} a / sum_{[N/4,N/2)} a`; stays near or above 1 for a divergent series.
    pub linear_sum_ratio: f64,
    /// Same ratio for `a^2`; strictly below 1 when the squares are summable.
    pub square_sum_ratio: f64,
    pub sum_diverges: bool,
    pub squares_converge: bool,
}

impl A2Report {
    pub fn passes(&self) -> bool {
        self.positive && self.sum_diverges && self.squares_converge
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn step_values() {
        let h = StepSchedule::poly_log(1.0, 0.0, 1).unwrap();
        assert_eq!(h.step(0), 1.0);
        assert_eq!(h.step(3), 0.25);
        let s = StepSchedule::poly_log(0.75, 0.0, 1).unwrap();
        assert_relative_eq!(s.step(15), 0.125, max_relative = 1e-15);
    }

    #[test]
    fn elapsed_time_values() {
        let h = StepSchedule::harmonic();
        assert_eq!(h.elapsed_time(0), 0.0);
        assert_relative_eq!(h.elapsed_time(3), 11.0 / 6.0, max_relative = 1e-15);
        let s = StepSchedule::poly_log(0.75, 0.0, 1).unwrap();
        // direct summation: 1 + 2^{-3/4}
        assert_relative_eq!(s.elapsed_time(2), 1.594_603_557_501_36, max_relative = 1e-12);
    }

    #[test]
    fn rejects_outside_family() {
        assert!(StepSchedule::poly_log(0.4, 0.0, 2).is_err());
        assert!(StepSchedule::poly_log(0.5, 0.0, 2).is_err());
        assert!(StepSchedule::poly_log(1.0, 0.5, 2).is_err());
        assert!(StepSchedule::poly_log(1.2, -1.0, 2).is_err());
        assert!(StepSchedule::poly_log(0.75, 1.0, 1).is_err());
        assert!(StepSchedule::poly_log(0.75, 1.0, 0).is_err());
        assert!(StepSchedule::constant_test_only(0.0).is_err());
    }

    #[test]
    fn a_max_tracks_interior_peak() {
        // ln(u)/u peaks at u = e, i.e. n = 1 with offset 2.
        let s = StepSchedule::poly_log(1.0, -1.0, 2).unwrap();
        assert_eq!(s.a_max(), s.step(1));
        assert!(s.step(1) > s.step(0));
        assert_eq!(StepSchedule::harmonic().a_max(), 1.0);
    }

    #[test]
    fn basel_tail() {
        let h = StepSchedule::harmonic();
        let b = h.tail_sum_squares(0, 100_000).unwrap();
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        // finite part plus remainder bound 1/(cutoff+1) overshoots by < 1/cutoff^2
        assert!(b >= basel && b - basel < 1e-9, "{b}");
    }

    #[test]
    fn harmonic_tail_sandwich() {
        let b = StepSchedule::harmonic().tail_sum_squares_auto(100).unwrap();
        assert!(b > 1.0 / 101.0 && b < 1.0 / 100.0, "{b}");
    }

    #[test]
    fn tail_monotone_and_rejects_constant() {
        for s in [
            StepSchedule::harmonic(),
            StepSchedule::poly_log(0.6, 0.0, 2).unwrap(),
            StepSchedule::poly_log(0.75, 0.5, 2).unwrap(),
            StepSchedule::poly_log(1.0, -1.0, 2).unwrap(),
        ] {
            let b10 = s.tail_sum_squares(10, 50_000).unwrap();
            let b100 = s.tail_sum_squares(100, 50_000).unwrap();
            assert!(b10 >= b100);
            assert!(b100 > 0.0);
        }
        let c = StepSchedule::constant_test_only(0.1).unwrap();
        assert_eq!(c.tail_sum_squares(0, 10), Err(ScheduleError::DivergentTail));
        assert!(matches!(
            StepSchedule::harmonic().tail_sum_squares(5, 5),
            Err(ScheduleError::BadCutoff { .. })
        ));
    }

    #[test]
    fn log_tail_remainder_matches_quadrature() {
        // Remainder for a(n) = ln u / u versus a plain trapezoid quadrature in s = ln u.
        let u0: f64 = 1000.0;
        let bound = squared_tail_integral(1.0, -1.0, u0);
        let (s0, s1, steps) = (u0.ln(), 80.0, 400_000);
        let hstep = (s1 - s0) / steps as f64;
        let f = |s: f64| (-s).exp() * s * s;
        let mut q = 0.5 * (f(s0) + f(s1));
        for k in 1..steps {
            q += f(s0 + k as f64 * hstep);
        }
        assert_relative_eq!(bound, q * hstep, max_relative = 1e-6);
    }

    #[test]
    fn constant_partition() {
        let c = StepSchedule::constant_test_only(0.1).unwrap();
        let p = c.partition_blocks(0, 0.35, 20).unwrap();
        assert_eq!(p.boundaries, vec![0, 4, 8, 12, 16, 20]);
        assert_eq!(c.block_ratio_stats(&p), 1.0);
    }

    #[test]
    fn harmonic_first_block() {
        let h = StepSchedule::harmonic();
        let p = h.partition_blocks(0, 1.5, 50).unwrap();
        // brute force: smallest n with t(n) >= 1.5; t(2) = 1 + 1/2 hits it exactly
        let n1 = (0..50).find(|&n| h.elapsed_time(n) >= 1.5).unwrap();
        assert_eq!(n1, 2);
        assert_eq!(p.boundaries[1], n1);
    }

    #[test]
    fn insufficient_horizon() {
        let h = StepSchedule::harmonic();
        assert!(matches!(
            h.partition_blocks(0, 10.0, 20),
            Err(ScheduleError::InsufficientHorizon { .. })
        ));
        assert!(h.partition_blocks(5, 1.0, 5).is_err());
    }

    #[test]
    fn a2_verdicts() {
        assert!(StepSchedule::harmonic().check_a2(100_000).passes());
        assert!(StepSchedule::poly_log(0.6, 0.0, 2).unwrap().check_a2(100_000).passes());
        let r = StepSchedule::poly_log(1.0, -1.0, 2).unwrap().check_a2(100_000);
        assert!(r.passes());
        assert_eq!(r.nonincreasing_from, 1);
        let c = StepSchedule::constant_test_only(0.1).unwrap().check_a2(1000);
        assert!(c.sum_diverges && !c.squares_converge);
    }
}
