//! Empirical 1 + E[V(x_n)] against the audited exponential envelope.

use salab::analysis::{moment_bound_check, InitialLaw, MomentOptions};
use salab::engine::SaSystem;
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::Problem;
use salab::replica::McOptions;
use salab::schedule::StepSchedule;

fn main() {
    let system = SaSystem::new(
        Problem::linear_well(2),
        StepSchedule::poly_log(1.0, 0.0, 2).unwrap(),
        NoiseModel::new(NoiseFamily::BoundedUniform, 1.0, true).unwrap(),
    );
    let report = moment_bound_check(
        &system,
        &InitialLaw::Domain,
        &MomentOptions::new(0, 10_000),
        &McOptions::new(1000, 2024),
    )
    .unwrap();
    println!(
        "c_hat = {:.3} (growth {:.3} x noise {:.3} x hessian {:.3})",
        report.c_hat, report.audit.quadratic_growth_c, report.noise_c, report.audit.hessian_bound_estimate
    );
    for k in (0..report.indices.len()).step_by(8) {
        println!(
            "n = {:>6}: 1 + E[V] = {:.4} +- {:.4}, envelope {:.4}",
            report.indices[k], report.curve[k], report.std_err[k], report.envelope[k]
        );
    }
    println!("passed: {}", report.passed());
}
