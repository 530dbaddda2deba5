//! Block martingale partial sums, stopping times, and truncated increments.

use salab::engine::{martingale_path, SaSystem};
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::Problem;
use salab::schedule::StepSchedule;

fn main() {
    let d = martingale_path(&[1.0; 3], &[0.3, 0.5, 0.4], 1, 1.0, 10.0);
    println!("worked example: zeta = {:?}, tau = {}", d.zeta, d.tau_index);

    let system = SaSystem::new(
        Problem::linear_well(2),
        StepSchedule::poly_log(1.0, 0.0, 2).unwrap(),
        NoiseModel::new(NoiseFamily::Laplace, 1.0, true).unwrap(),
    );
    let tr = system.run_sa(10, &[0.5, -0.5], 20_000, 9).unwrap();
    let diag = tr.block_diagnostics(0.5, 3.0).unwrap();
    let blocks = tr.blocks().unwrap();
    for i in 0..diag.rho.len() {
        let (lo, hi) = blocks.block(i).unwrap();
        println!(
            "block {i} [{lo}, {hi}): rho = {:.4}, sup |zeta| = {:.4}, tau = {}",
            diag.rho[i], diag.zeta_sup[i], diag.tau_index[i]
        );
    }
    let m = tr.martingale_diagnostics(0, 0.5, 3.0).unwrap();
    let clipped = m
        .truncated
        .iter()
        .flatten()
        .filter(|v| v.abs() == 3.0)
        .count();
    println!("block 0: {} increments, {clipped} coordinates clipped at v = 3", m.truncated.len());
}
