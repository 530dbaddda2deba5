//! Escape fractions over a radius grid, with a heavy-tailed control.

use salab::analysis::{estimate_tightness, InitialLaw, TightnessOptions};
use salab::engine::SaSystem;
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::Problem;
use salab::replica::McOptions;
use salab::schedule::StepSchedule;

fn main() {
    let grid: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let options = TightnessOptions::new(0, 10_000, grid);
    let mc = McOptions::new(1000, 11);
    let run = |noise| {
        let system = SaSystem::new(
            Problem::linear_well(2),
            StepSchedule::poly_log(1.0, 0.0, 2).unwrap(),
            noise,
        );
        estimate_tightness(&system, &InitialLaw::Domain, &options, &mc).unwrap()
    };
    let bounded = run(NoiseModel::new(NoiseFamily::BoundedUniform, 1.0, true).unwrap());
    let pareto = run(NoiseModel::new(NoiseFamily::Pareto { shape: 2.5 }, 1.0, true).unwrap());
    println!("   K  bounded  pareto");
    for i in 0..bounded.radii.len() {
        println!(
            "{:>4}  {:>7.3}  {:>6.3}",
            bounded.radii[i], bounded.escape_fraction[i], pareto.escape_fraction[i]
        );
    }
    println!("witness at 1%: bounded {:?}, pareto {:?}", bounded.witness(0.01), pareto.witness(0.01));
}
