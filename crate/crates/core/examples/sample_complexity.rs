//! Descent margin, ODE time budget, and trapped fractions on the double well.

use salab::analysis::{
    compute_delta, compute_gamma, estimate_sample_complexity, max_admissible_delta, max_v_on_b,
    InitialLaw, SampleComplexityOptions,
};
use salab::engine::SaSystem;
use salab::noise::{NoiseFamily, NoiseModel};
use salab::problem::{Problem, Region};
use salab::replica::McOptions;
use salab::schedule::StepSchedule;

fn main() {
    let problem = Problem::double_well();
    let eps = 0.04;
    for t in [0.5, 1.0, 2.0] {
        let delta = compute_delta(&problem, eps, t, 401, 1e-3).unwrap();
        let gamma = compute_gamma(max_v_on_b(&problem), eps, delta, t).unwrap();
        println!(
            "T = {t}: Delta = {delta:.4}, gamma = {gamma:.2}, largest admissible delta = {:.4}",
            max_admissible_delta(&problem, eps, delta)
        );
    }

    let law = InitialLaw::Uniform(Region::new(vec![0.3], vec![1.7]).unwrap());
    for scale in [0.0, 1.0] {
        let system = SaSystem::new(
            problem.clone(),
            StepSchedule::poly_log(0.75, 0.0, 2).unwrap(),
            NoiseModel::new(NoiseFamily::Laplace, scale, true).unwrap(),
        );
        for n0 in [100, 10_000] {
            let options = SampleComplexityOptions::new(n0, eps, 0.01, 70.0);
            let r = estimate_sample_complexity(&system, &law, &options, &McOptions::new(200, 4))
                .unwrap();
            println!("laplace scale {scale}, n0 = {n0}: trapped fraction {:.3}", r.trapped_fraction);
        }
    }
}
