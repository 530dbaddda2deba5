//! Classical fourth-order Runge-Kutta for the limiting ODE `x' = h(x)`.

use super::EngineError;
use crate::problem::Problem;

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    y: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            y: vec![0.0; dim],
        }
    }
}

/// One RK4 step of size `dt`, in place.
pub fn rk4_step(problem: &Problem, x: &mut [f64], dt: f64, s: &mut Rk4Scratch) {
    let half = 0.5 * dt;
    problem.drift_into(x, &mut s.k1);
    for i in 0..x.len() {
        s.y[i] = x[i] + half * s.k1[i];
    }
    problem.drift_into(&s.y, &mut s.k2);
    for i in 0..x.len() {
        s.y[i] = x[i] + half * s.k2[i];
    }
    problem.drift_into(&s.y, &mut s.k3);
    for i in 0..x.len() {
        s.y[i] = x[i] + dt * s.k3[i];
    }
    problem.drift_into(&s.y, &mut s.k4);
    for i in 0..x.len() {
        x[i] += dt / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

/// Advances `x` by `duration` using steps of at most `dt`; the last step is
/// shortened to land exactly on `duration`.
pub(crate) fn advance(
    problem: &Problem,
    x: &mut [f64],
    duration: f64,
    dt: f64,
    s: &mut Rk4Scratch,
) -> Result<(), EngineError> {
    if duration <= 0.0 {
        return Ok(());
    }
    let steps = (duration / dt).ceil().max(1.0) as u64;
    for k in 0..steps {
        let h = if k + 1 == steps {
            duration - (steps - 1) as f64 * dt
        } else {
            dt
        };
        rk4_step(problem, x, h, s);
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EngineError::FlowDiverged)
    }
}

/// The flow map: solution of `x' = h(x)` at time `duration` from `x0`.
pub fn ode_flow(
    problem: &Problem,
    x0: &[f64],
    duration: f64,
    dt: f64,
) -> Result<Vec<f64>, EngineError> {
    problem.check_state(x0)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(EngineError::BadParameter("dt must be positive"));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(EngineError::BadParameter("duration must be nonnegative"));
    }
    let mut x = x0.to_vec();
    advance(problem, &mut x, duration, dt, &mut Rk4Scratch::new(x0.len()))?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let p = Problem::linear_well(1);
        let x = ode_flow(&p, &[1.0], 1.0, 1e-3).unwrap();
        assert!((x[0] - (-1.0f64).exp()).abs() <= 1e-8);
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = Problem::spiral();
        assert_eq!(ode_flow(&p, &[0.3, -0.2], 0.0, 1e-2).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let p = Problem::double_well();
        let x = ode_flow(&p, &[1.0], 7.3, 1e-3).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn fourth_order() {
        let p = Problem::linear_well(1);
        let exact = (-1.0f64).exp();
        let err = |dt: f64| (ode_flow(&p, &[1.0], 1.0, dt).unwrap()[0] - exact).abs();
        for dt in [0.2, 0.1, 0.05, 0.02] {
            let ratio = err(dt) / err(dt / 2.0);
            assert!((8.0..=32.0).contains(&ratio), "dt={dt} ratio={ratio}");
        }
    }

    #[test]
    fn partial_last_step_lands_exactly() {
        // duration not a multiple of dt
        let p = Problem::linear_well(1);
        let x = ode_flow(&p, &[1.0], 0.95, 0.1).unwrap();
        assert!((x[0] - (-0.95f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn divergence_is_reported() {
        let p = Problem::polynomial(
            "blowup",
            crate::problem::Drift::Poly1 {
                coeffs: vec![0.0, 0.0, 1.0],
            },
            vec![0.0],
            vec![vec![0.0]],
            crate::problem::Domain::Box {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        )
        .unwrap();
        assert_eq!(ode_flow(&p, &[2.0], 5.0, 0.01), Err(EngineError::FlowDiverged));
        assert!(ode_flow(&p, &[2.0], 1.0, 0.0).is_err());
    }
}
