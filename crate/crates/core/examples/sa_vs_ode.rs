//! One noisy trajectory against the limiting ODE, block by block.

use salab::engine::{ode_flow, SaSystem};
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::Problem;
use salab::schedule::StepSchedule;

fn main() {
    let system = SaSystem::new(
        Problem::spiral(),
        StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
        NoiseModel::new(NoiseFamily::Gaussian, 0.5, true).unwrap(),
    );
    let x0 = [1.2, -0.4];
    for n0 in [100, 10_000] {
        let tr = system.run_sa(n0, &x0, n0 + 20_000, 42).unwrap();
        let rho = tr.block_deviations(1.0, None).unwrap();
        let t0 = tr.times()[0];
        let t = t0 + 3.0;
        let xbar = tr.interpolate(t).unwrap();
        let flow = ode_flow(&system.problem, &x0, 3.0, 1e-3).unwrap();
        println!("n0 = {n0}: {} blocks, rho = {:.4?}", rho.len(), &rho[..rho.len().min(6)]);
        println!("  x_bar(t0 + 3) = {xbar:.4?}, flow from x0 = {flow:.4?}");
    }
}
