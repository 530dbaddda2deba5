//! Exponential-tail fits for the four noise families.

use salab::noise::{verify_second_moment, verify_tail, NoiseFamily, NoiseModel};

fn main() {
    let probes = [vec![0.0], vec![1.0]];
    let grid = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    for family in [
        NoiseFamily::BoundedUniform,
        NoiseFamily::Gaussian,
        NoiseFamily::Laplace,
        NoiseFamily::Pareto { shape: 2.5 },
    ] {
        let model = NoiseModel::new(family, 1.0, false).unwrap();
        let fit = verify_tail(&model, &probes, &grid, 200_000, 7).unwrap();
        let c = verify_second_moment(&model, &probes, 20_000, 7).unwrap();
        println!(
            "{:<32} {:?}: C2 = {:.3}, R^2 = {:.4}, decay ratio = {:.3}, second moment c = {c:.3}",
            model.id(),
            fit.verdict,
            fit.c2_hat,
            fit.r_squared,
            fit.decay_ratio
        );
    }
}
