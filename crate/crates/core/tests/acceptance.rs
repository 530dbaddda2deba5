//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use salab::analysis::{
    azuma_bound, compare_rho, estimate_lockin, estimate_sample_complexity, estimate_tightness,
    fit_failure_curve, moment_bound_check, superadditivity_check, BoundFamily, LockinCurve,
    LockinOptions, MomentOptions, RhoOptions, SampleComplexityOptions, TightnessOptions,
};
use salab::config::{ExperimentConfig, NoiseSpec};
use salab::engine::{martingale_path, ode_flow, truncate_increment, SaSystem};
use salab::noise::{verify_tail, NoiseFamily, NoiseModel, TailVerdict};
use salab::problem::{Drift, Domain, Problem};
use salab::replica::McOptions;
use salab::run::{run_command, Command};
use salab::schedule::StepSchedule;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mc_of(c: &ExperimentConfig, replicas: usize) -> McOptions {
    McOptions::new(replicas, c.master_seed).with_jobs(c.parallelism)
}

fn ode_order() -> Outcome {
    let p = Problem::linear_well(1);
    let exact = (-1.0f64).exp();
    let err = |dt: f64| (ode_flow(&p, &[1.0], 1.0, dt).unwrap()[0] - exact).abs();
    let at_1e3 = err(1e-3);
    let ratios: Vec<f64> = [0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|dt| err(*dt) / err(dt / 2.0))
        .collect();
    ensure(
        at_1e3 <= 1e-8 && ratios.iter().all(|r| (8.0..=32.0).contains(r)),
        format!("error at dt=1e-3: {at_1e3:.2e}; halving ratios {ratios:.2?}"),
    )
}

fn recursion_exactness() -> Outcome {
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    let euler = SaSystem::new(
        Problem::linear_well(1),
        StepSchedule::constant_test_only(0.1).unwrap(),
        NoiseModel::zero(),
    )
    .run_sa(0, &[1.0], 1, 0)
    .map_err(|e| e.to_string())?;
    let e1 = rel(euler.state(1)[0], 0.9);

    let flat = Problem::polynomial(
        "flat",
        Drift::Poly1 { coeffs: vec![0.0] },
        vec![0.0],
        vec![vec![0.0]],
        Domain::Box {
            lo: vec![-2.0],
            hi: vec![2.0],
        },
    )
    .unwrap();
    let constant = SaSystem::new(flat, StepSchedule::harmonic(), NoiseModel::zero())
        .run_sa(0, &[0.7], 50, 0)
        .map_err(|e| e.to_string())?;
    let e2 = (0..constant.len())
        .map(|k| rel(constant.state(k)[0], 0.7))
        .fold(0.0, f64::max);

    let product = SaSystem::new(
        Problem::linear_well(1),
        StepSchedule::poly_log(1.0, 0.0, 2).unwrap(),
        NoiseModel::zero(),
    )
    .run_sa(0, &[1.0], 2, 0)
    .map_err(|e| e.to_string())?;
    let e3 = rel(product.state(2)[0], 1.0 / 3.0);
    let replay = [&euler, &constant, &product]
        .iter()
        .all(|t| t.verify_recursion().is_ok());
    ensure(
        e1 <= 1e-12 && e2 <= 1e-12 && e3 <= 1e-12 && replay,
        format!("relative errors {e1:.1e}, {e2:.1e}, {e3:.1e}; recursion replay ok: {replay}"),
    )
}

fn tightness_options(c: &ExperimentConfig) -> TightnessOptions {
    let p = c.tightness.clone().unwrap();
    TightnessOptions {
        block_length: p.block_length,
        per_block: p.per_block,
        ..TightnessOptions::new(p.n0, p.horizon, p.radius_grid)
    }
}

fn moment_bound() -> Outcome {
    let c = config("moment_tightness.toml");
    let p = c.tightness.clone().unwrap();
    let system = c.system().unwrap();
    let law = c.initial_law(&system.problem).unwrap();
    let options = MomentOptions {
        audit_seed: c.master_seed,
        ..MomentOptions::new(p.n0, p.horizon)
    };
    let r = moment_bound_check(&system, &law, &options, &mc_of(&c, p.replicas))
        .map_err(|e| e.to_string())?;
    ensure(
        r.passed() && r.replicas == 1000 && p.horizon == 10_000,
        format!(
            "{} checkpoints, {} violations, c_hat = {:.3}, diverged {}",
            r.indices.len(),
            r.violations.len(),
            r.c_hat,
            r.diverged
        ),
    )
}

fn tightness_witness() -> Outcome {
    let c = config("moment_tightness.toml");
    let p = c.tightness.clone().unwrap();
    let system = c.system().unwrap();
    let law = c.initial_law(&system.problem).unwrap();
    let options = tightness_options(&c);
    let mc = mc_of(&c, p.replicas);
    let r = estimate_tightness(&system, &law, &options, &mc).map_err(|e| e.to_string())?;
    let k = r
        .witness(0.01)
        .ok_or_else(|| format!("no radius with escape <= 0.01: {:?}", r.escape_fraction))?;
    let i = r.radii.iter().position(|x| *x == k).unwrap();
    let control_spec: &NoiseSpec = p.control.as_ref().ok_or("config lacks a control")?;
    assert_eq!(control_spec.family, salab::config::FamilySpec::Pareto);
    let control = SaSystem::new(
        system.problem.clone(),
        system.schedule.clone(),
        control_spec.build().unwrap(),
    );
    let cr = estimate_tightness(&control, &law, &options, &mc).map_err(|e| e.to_string())?;
    ensure(
        cr.escape_fraction[i] > r.escape_fraction[i],
        format!(
            "K = {k}: escape {} vs pareto control {}",
            r.escape_fraction[i], cr.escape_fraction[i]
        ),
    )
}

fn lockin_curve() -> Result<LockinCurve, String> {
    let c = config("lockin.toml");
    let p = c.lockin.clone().unwrap();
    let system = c.system().unwrap();
    let law = c.initial_law(&system.problem).unwrap();
    let options = LockinOptions {
        horizon_time: p.horizon_time,
        conv_tol: p.conv_tol,
        conv_window: p.conv_window,
        block_length: p.block_length,
        per_block: p.per_block,
    };
    estimate_lockin(&system, &p.n0_values, &law, &options, &mc_of(&c, p.replicas))
        .map_err(|e| e.to_string())
}

fn lockin_monotone(curve: &LockinCurve) -> Outcome {
    let q = &curve.failure_rate;
    let violations = curve.monotonicity_violations();
    let strict = q[0] < 0.05 || q[q.len() - 1] < q[0];
    ensure(
        curve.n0_values == [10, 100, 1000, 10_000]
            && curve.replicas >= 2000
            && violations.is_empty()
            && strict,
        format!("q_hat {q:?} at n0 {:?}; CI violations {violations:?}", curve.n0_values),
    )
}

fn bound_shape(curve: &LockinCurve) -> Outcome {
    let b: [f64; 5] = [0.5, 0.1, 0.01, 1e-3, 1e-4];
    let synthetic = LockinCurve {
        n0_values: (0..b.len() as u64).collect(),
        replicas: 1000,
        success_counts: vec![0; b.len()],
        diverged_counts: vec![0; b.len()],
        failure_rate: b.iter().map(|v| 0.5 * (-2.0 * v.powf(-0.25)).exp()).collect(),
        confidence_intervals: vec![(0.0, 1.0); b.len()],
        b_values: b.to_vec(),
    };
    let s = fit_failure_curve(&synthetic).map_err(|e| e.to_string())?;
    let synthetic_ok = (s.slope + 2.0).abs() < 1e-9
        && (s.intercept - 0.5f64.ln()).abs() < 1e-9
        && s.r_squared >= 1.0 - 1e-9;
    let e = fit_failure_curve(curve).map_err(|e| e.to_string())?;
    ensure(
        synthetic_ok && e.points_used >= 3 && e.slope < 0.0,
        format!(
            "synthetic slope {:.12} intercept {:.12} R^2 {:.12}; empirical slope {:.3} over {} points",
            s.slope, s.intercept, s.r_squared, e.slope, e.points_used
        ),
    )
}

fn rho_decay() -> Outcome {
    let c = config("rho.toml");
    let law = c.initial_law(&c.problem().unwrap()).unwrap();
    let options = RhoOptions::new(100, 10_000, 5);
    let noisy = c.system().unwrap();
    let quiet = SaSystem::new(noisy.problem.clone(), noisy.schedule.clone(), NoiseModel::zero());
    let z = compare_rho(&quiet, &law, &options, &mc_of(&c, 200)).map_err(|e| e.to_string())?;
    let n = compare_rho(&noisy, &law, &options, &mc_of(&c, 200)).map_err(|e| e.to_string())?;
    ensure(
        z.median_large() < z.median_small() && n.decays(),
        format!(
            "zero noise medians {:.2e} -> {:.2e}; laplace wins {}/{} (Wilson lower {:.3})",
            z.median_small(),
            z.median_large(),
            n.wins,
            n.small.len() - n.ties,
            n.win_interval.0
        ),
    )
}

fn step_ratio() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for name in [
        "schedule_a0p6_b0.toml",
        "schedule_a0p75_b0.toml",
        "schedule_a1p0_b0.toml",
        "schedule_a1p0_bm1.toml",
    ] {
        let c = config(name);
        let p = c.schedule_check.clone().unwrap();
        let s = c.schedule().unwrap();
        let part = s
            .partition_blocks(p.n0, p.block_length, p.horizon)
            .map_err(|e| e.to_string())?;
        let max = s.block_ratios(&part).into_iter().fold(0.0, f64::max);
        let bound = (p.block_length + s.a_max()).exp() + 0.1;
        ok &= p.n0 >= 1000 && p.block_length == 1.0 && part.block_count() > 0 && max <= bound;
        detail.push(format!("{}: {max:.3} <= {bound:.3}", s.id()));
    }
    ensure(ok, detail.join("; "))
}

fn tail_verifier() -> Outcome {
    let v_grid = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let probes = [vec![0.0]];
    let laplace = NoiseModel::new(NoiseFamily::Laplace, 1.0, true).unwrap();
    let uniform = NoiseModel::new(NoiseFamily::BoundedUniform, 1.0, true).unwrap();
    let pareto = NoiseModel::new(NoiseFamily::Pareto { shape: 2.5 }, 1.0, true).unwrap();
    let mut worst_c2: f64 = 0.0;
    let mut worst_r2: f64 = 1.0;
    for seed in 0..10 {
        let fit = |m: &NoiseModel| verify_tail(m, &probes, &v_grid, 200_000, seed).unwrap();
        let l = fit(&laplace);
        worst_c2 = worst_c2.max((l.c2_hat - 1.0).abs());
        worst_r2 = worst_r2.min(l.r_squared);
        let (u, p) = (fit(&uniform), fit(&pareto));
        if l.verdict != TailVerdict::Pass
            || u.verdict != TailVerdict::TooLightPass
            || p.verdict != TailVerdict::Fail
        {
            return Err(format!(
                "seed {seed}: laplace {:?}, uniform {:?}, pareto {:?}",
                l.verdict, u.verdict, p.verdict
            ));
        }
    }
    ensure(
        worst_c2 <= 0.2 && worst_r2 >= 0.95,
        format!("10 seeds stable; laplace max |C2 - 1| = {worst_c2:.3}, min R^2 = {worst_r2:.4}"),
    )
}

fn proof_devices() -> Outcome {
    let azuma = azuma_bound(2.0, &[1.0]).map_err(|e| e.to_string())?;
    let azuma_ok = azuma == 2.0 * (-2.0f64).exp();

    let g = BoundFamily::ExpBound {
        c1: 1.0,
        c: 1.0,
        delta: 1.0,
    };
    let region = 0.99 * 0.2f64.powi(4);
    let mut grid_ok = true;
    for i in 0..=40 {
        for j in 0..=40 {
            let (a, b) = (region * i as f64 / 81.0, region * j as f64 / 81.0);
            grid_ok &= superadditivity_check(&g, a, b, region).map_err(|e| e.to_string())?;
        }
    }
    let squares = superadditivity_check(&BoundFamily::Square, 1.0, 1.0, 3.0).unwrap();

    let d = martingale_path(&[1.0; 3], &[0.3, 0.5, 0.4], 1, 1.0, 10.0);
    let zeta: Vec<f64> = d.zeta.iter().map(|v| v[0]).collect();
    let zeta_ok = zeta
        .iter()
        .zip([0.0, 0.3, 0.8, 1.2])
        .all(|(g, w)| (g - w).abs() <= 1e-15)
        && d.tau_index == 3;
    let clip_ok = truncate_increment(3.5, 2.0) == 2.0
        && truncate_increment(-3.5, 2.0) == -2.0
        && truncate_increment(1.0, 2.0) == 1.0;
    let quiet = SaSystem::new(
        Problem::linear_well(1),
        StepSchedule::poly_log(1.0, 0.0, 2).unwrap(),
        NoiseModel::zero(),
    )
    .run_sa(0, &[1.0], 40, 0)
    .map_err(|e| e.to_string())?;
    let blocks = quiet.partition(1.0).map_err(|e| e.to_string())?;
    let m = quiet
        .martingale_diagnostics(0, 0.1, 1.0)
        .map_err(|e| e.to_string())?;
    let zero_ok = m.zeta.iter().flatten().all(|z| *z == 0.0) && Some(m.tau_index) == blocks.block(0).map(|b| b.1);
    ensure(
        azuma_ok && grid_ok && squares && zeta_ok && clip_ok && zero_ok,
        format!(
            "azuma {azuma} exact: {azuma_ok}; 41x41 superadditivity grid: {grid_ok}; zeta {zeta:?}, tau {}; clipping {clip_ok}; zero noise {zero_ok}",
            d.tau_index
        ),
    )
}

fn sample_complexity() -> Outcome {
    let run = |name: &str| -> Result<Vec<f64>, String> {
        let c = config(name);
        let p = c.sample_complexity.clone().unwrap();
        let system = c.system().unwrap();
        let law = c.initial_law(&system.problem).unwrap();
        p.n0_values
            .iter()
            .map(|&n0| {
                let options = SampleComplexityOptions {
                    block_length: p.block_length,
                    grid_resolution: p.grid_resolution,
                    dt: p.dt,
                    per_block: p.per_block,
                    ..SampleComplexityOptions::new(n0, p.epsilon, p.delta_nbhd, p.horizon_time)
                };
                estimate_sample_complexity(&system, &law, &options, &mc_of(&c, p.replicas))
                    .map(|r| r.trapped_fraction)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let quiet = run("sample_complexity_zero_noise.toml")?;
    let noisy = run("sample_complexity.toml")?;
    ensure(
        quiet.iter().all(|f| *f == 1.0) && noisy[1] >= noisy[0] && noisy[1] >= 0.95,
        format!("zero noise trapped {quiet:?}; laplace trapped at n0 = 1e2, 1e4: {noisy:?}"),
    )
}

fn determinism() -> Outcome {
    let mut c = config("determinism.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for jobs in [1, 8] {
        c.parallelism = jobs;
        let out = dir.path().join(format!("jobs{jobs}"));
        run_command(Command::Lockin, &c, &out).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(out.join("lockin.csv")).map_err(|e| e.to_string())?);
    }
    ensure(
        outputs[0] == outputs[1],
        format!("lockin.csv at 1 and 8 jobs: {} bytes each, identical: {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn report(id: usize, name: &str, start: Instant, outcome: &Outcome) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (label, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{label} [{id:>2}] {name} ({secs:.1} s): {detail}");
    outcome.is_ok()
}

fn main() -> ExitCode {
    let mut all = true;
    let checks: [Check; 4] = [
        ("ODE integrator order", ode_order),
        ("recursion and zero-noise exactness", recursion_exactness),
        ("moment bound envelope", moment_bound),
        ("tightness witness with pareto control", tightness_witness),
    ];
    for (i, (name, f)) in checks.iter().enumerate() {
        let t = Instant::now();
        all &= report(i + 1, name, t, &f());
    }

    let t = Instant::now();
    let curve = lockin_curve();
    let five = curve.as_ref().map_err(Clone::clone).and_then(lockin_monotone);
    all &= report(5, "lock-in monotonicity", t, &five);
    let t = Instant::now();
    let six = curve.as_ref().map_err(Clone::clone).and_then(bound_shape);
    all &= report(6, "bound-shape fit", t, &six);

    let rest: [Check; 6] = [
        ("block deviation decay", rho_decay),
        ("step-ratio bound", step_ratio),
        ("tail verifier", tail_verifier),
        ("proof devices", proof_devices),
        ("sample complexity", sample_complexity),
        ("determinism across thread counts", determinism),
    ];
    for (i, (name, f)) in rest.iter().enumerate() {
        let t = Instant::now();
        all &= report(i + 7, name, t, &f());
    }
    if all {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance FAILED");
        ExitCode::FAILURE
    }
}
