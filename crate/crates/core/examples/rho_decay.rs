//! Paired comparison of block deviations at a small and a large start index.

use salab::analysis::{compare_rho, InitialLaw, RhoOptions};
use salab::engine::SaSystem;
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::Problem;
use salab::replica::McOptions;
use salab::schedule::StepSchedule;

fn main() {
    for scale in [0.0, 1.0] {
        let system = SaSystem::new(
            Problem::linear_well(1),
            StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
            NoiseModel::new(NoiseFamily::Laplace, scale, true).unwrap(),
        );
        let c = compare_rho(
            &system,
            &InitialLaw::Domain,
            &RhoOptions::new(100, 10_000, 5),
            &McOptions::new(200, 515),
        )
        .unwrap();
        println!(
            "laplace scale {scale}: median max rho {:.3e} -> {:.3e}, wins {}/{}, Wilson 95% [{:.3}, {:.3}]",
            c.median_small(),
            c.median_large(),
            c.wins,
            c.small.len() - c.ties,
            c.win_interval.0,
            c.win_interval.1
        );
    }
}
