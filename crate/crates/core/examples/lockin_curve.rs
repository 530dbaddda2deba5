//! Failure-to-lock-in probability against n0 and the fitted bound shape.

use salab::analysis::{estimate_lockin, fit_failure_curve, InitialLaw, LockinOptions};
use salab::engine::SaSystem;
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::{Problem, Region};
use salab::replica::McOptions;
use salab::schedule::StepSchedule;

fn main() {
    let system = SaSystem::new(
        Problem::double_well(),
        StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
        NoiseModel::new(NoiseFamily::Laplace, 1.75, true).unwrap(),
    );
    let law = InitialLaw::Uniform(Region::new(vec![0.3], vec![1.7]).unwrap());
    let options = LockinOptions {
        conv_tol: 0.2,
        ..LockinOptions::default()
    };
    let curve = estimate_lockin(
        &system,
        &[10, 100, 1000, 10_000],
        &law,
        &options,
        &McOptions::new(1000, 97),
    )
    .unwrap();
    for i in 0..curve.n0_values.len() {
        let (lo, hi) = curve.confidence_intervals[i];
        println!(
            "n0 = {:>5}: b = {:.4}, q_hat = {:.4} [{lo:.4}, {hi:.4}], diverged {}",
            curve.n0_values[i], curve.b_values[i], curve.failure_rate[i], curve.diverged_counts[i]
        );
    }
    match fit_failure_curve(&curve) {
        Ok(fit) => println!(
            "log q = {:.3} + {:.3} b^(-1/4), R^2 = {:.3}, {} censored",
            fit.intercept, fit.slope, fit.r_squared, fit.censored_points
        ),
        Err(e) => println!("no fit: {e}"),
    }
}
