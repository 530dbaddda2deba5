//! Small statistics helpers: least-squares lines, Wilson intervals, running moments.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ~ intercept + slope * x`. `None` with fewer than
/// two points or constant `x`. Constant `y` gives `R^2 = 1`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // clamp guards the p = 0 / p = 1 round-off
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// Sum and sum of squares, merged in a fixed order for reproducible output.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean (sample variance with `n - 1`).
    pub fn std_err(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (10, 10), (3, 17), (500, 1000)] {
            let (lo, hi) = wilson_interval(s, n, Z95);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn wilson_coverage() {
        // 1000 repetitions at known p; coverage should be near 95%
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for &p in &[0.1, 0.3, 0.5] {
            let trials = 200u64;
            let covered = (0..1000)
                .filter(|_| {
                    let s = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
                    let (lo, hi) = wilson_interval(s, trials, Z95);
                    lo <= p && p <= hi
                })
                .count();
            let coverage = covered as f64 / 1000.0;
            assert!((coverage - 0.95).abs() <= 0.02, "p={p} coverage={coverage}");
        }
    }

    fn exact_coverage(p: f64, n: u64) -> f64 {
        // binomial pmf by recurrence
        let mut pmf = (1.0 - p).powi(n as i32);
        let mut total = 0.0;
        for s in 0..=n {
            let (lo, hi) = wilson_interval(s, n, Z95);
            if lo <= p && p <= hi {
                total += pmf;
            }
            pmf *= (n - s) as f64 / (s + 1) as f64 * p / (1.0 - p);
        }
        total
    }

    #[test]
    fn exact_coverage_is_near_nominal() {
        for p in [0.1, 0.2, 0.3, 0.5] {
            let c = exact_coverage(p, 200);
            assert!((c - 0.95).abs() <= 0.01, "p={p} exact coverage {c}");
        }
        // discreteness pushes small p above nominal
        assert!(exact_coverage(0.05, 200) > 0.96);
    }

    #[test]
    fn moments() {
        let mut m = Moments::default();
        for v in [1.0, 2.0, 3.0, 4.0] {
            m.push(v);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.std_err() - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
