use super::{bad, AnalysisError};

/// Two-sided Azuma-Hoeffding bound `2 exp(-t^2 / (2 sum c_k^2))`.
pub fn azuma_bound(t: f64, c: &[f64]) -> Result<f64, AnalysisError> {
    if c.is_empty() {
        return Err(bad("azuma bound needs at least one increment bound"));
    }
    if !c.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(bad("increment bounds must be positive"));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(bad("deviation t must be positive"));
    }
    let s: f64 = c.iter().map(|v| v * v).sum();
    Ok(2.0 * (-t * t / (2.0 * s)).exp())
}

/// `c1 exp(-c delta^{2/3} / b^{1/4})`.
pub fn theoretical_bound(c1: f64, c: f64, delta: f64, b_n0: f64) -> Result<f64, AnalysisError> {
    if ![c1, c, delta, b_n0].iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(bad("bound parameters must be positive"));
    }
    Ok(c1 * (-c * delta.powf(2.0 / 3.0) / b_n0.powf(0.25)).exp())
}

/// Functions `g` with `g(0) = 0` fed to [`superadditivity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundFamily {
    /// `g(y) = c1 exp(-c delta^{2/3} / y^{1/4})`, `g(0) = 0`.
    ExpBound { c1: f64, c: f64, delta: f64 },
    /// `g(y) = y^2`.
    Square,
}

impl BoundFamily {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            BoundFamily::ExpBound { c1, c, delta } => {
                if y <= 0.0 {
                    0.0
                } else {
                    c1 * (-c * delta.powf(2.0 / 3.0) / y.powf(0.25)).exp()
                }
            }
            BoundFamily::Square => y * y,
        }
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if let BoundFamily::ExpBound { c1, c, delta } = *self {
            if ![c1, c, delta].iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(bad("bound parameters must be positive"));
            }
        }
        Ok(())
    }
}

const CONVEXITY_SAMPLES: usize = 2000;

/// Second differences of `g` on an even grid over `[0, upper]`, with `g(0)`
/// as the left end.
fn second_differences(g: &BoundFamily, upper: f64, samples: usize) -> Vec<(f64, f64)> {
    let h = upper / samples as f64;
    (1..samples)
        .map(|k| {
            let y = k as f64 * h;
            let (l, m, r) = (g.eval(y - h), g.eval(y), g.eval(y + h));
            let slack = 1e-12 * (l.abs() + 2.0 * m.abs() + r.abs());
            (y, l - 2.0 * m + r + slack)
        })
        .collect()
}

/// True when every sampled second difference on `(0, upper)` is nonnegative.
pub fn is_convex_on(g: &BoundFamily, upper: f64) -> bool {
    second_differences(g, upper, CONVEXITY_SAMPLES)
        .iter()
        .all(|(_, d)| *d >= 0.0)
}

/// Largest sampled `y` in `(0, y_max]` such that `g` is convex on `(0, y)`.
pub fn convex_region_limit(g: &BoundFamily, y_max: f64) -> f64 {
    let diffs = second_differences(g, y_max, CONVEXITY_SAMPLES);
    match diffs.iter().find(|(_, d)| *d < 0.0) {
        Some((y, _)) => y - y_max / CONVEXITY_SAMPLES as f64,
        None => y_max,
    }
}

/// Checks `g(a) + g(b) <= g(a + b)` after verifying convexity of `g` on
/// `(0, region_c)`. A failed convexity check is a precondition error.
pub fn superadditivity_check(
    g: &BoundFamily,
    a: f64,
    b: f64,
    region_c: f64,
) -> Result<bool, AnalysisError> {
    g.validate()?;
    if !(region_c.is_finite() && region_c > 0.0) {
        return Err(bad("region must be a positive length"));
    }
    if !(a >= 0.0 && b >= 0.0 && a + b < region_c) {
        return Err(bad("need a, b >= 0 and a + b < region"));
    }
    if !is_convex_on(g, region_c) {
        return Err(AnalysisError::Precondition(format!(
            "g is not convex on (0, {region_c})"
        )));
    }
    Ok(g.eval(a) + g.eval(b) <= g.eval(a + b) + 1e-12)
}
