//! Command dispatch: runs one analysis pipeline from a config and writes
//! `<command>.csv`, `report.txt`, `config.toml`, and `manifest.txt`.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    estimate_lockin, estimate_sample_complexity, estimate_tightness, fit_failure_curve,
    moment_bound_check, probe_grid, AnalysisError, LockinCurve, LockinOptions, MomentOptions,
    SampleComplexityOptions, TightnessOptions,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::engine::{EngineError, RecordOptions, SaSystem};
use crate::noise::{verify_second_moment, verify_tail};
use crate::problem::{audit_assumptions, Region};
use crate::replica::{replica_rng, McOptions, SEED_RULE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_DIVERGENCE: i32 = 5;
pub const EXIT_VERDICT: i32 = 6;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SALAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Audit,
    Tightness,
    Lockin,
    Fit,
    SampleComplexity,
    ScheduleCheck,
    NoiseCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::Audit,
        Command::Tightness,
        Command::Lockin,
        Command::Fit,
        Command::SampleComplexity,
        Command::ScheduleCheck,
        Command::NoiseCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Audit => "audit",
            Command::Tightness => "tightness",
            Command::Lockin => "lockin",
            Command::Fit => "fit",
            Command::SampleComplexity => "sample-complexity",
            Command::ScheduleCheck => "schedule-check",
            Command::NoiseCheck => "noise-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Analysis(AnalysisError),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad input file {path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl From<AnalysisError> for RunError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::TooManyDiverged { .. } | AnalysisError::Engine(EngineError::FlowDiverged) => {
                RunError::Divergence(e.to_string())
            }
            other => RunError::Analysis(other),
        }
    }
}

impl From<EngineError> for RunError {
    fn from(e: EngineError) -> Self {
        AnalysisError::from(e).into()
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Analysis(_) | RunError::Input { .. } => EXIT_CONFIG,
            RunError::Divergence(_) => EXIT_DIVERGENCE,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The run finished but a trajectory diverged.
    Diverged,
    /// Nothing to judge (diagnostic output only).
    Info,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Pass | Verdict::Info => EXIT_OK,
            Verdict::Fail => EXIT_VERDICT,
            Verdict::Diverged => EXIT_DIVERGENCE,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Diverged => "DIVERGED",
            Verdict::Info => "INFO",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub version: &'static str,
    /// SHA-256 of the `config.toml` bytes written next to the manifest.
    pub config_sha256: String,
    pub master_seed: u64,
    pub jobs: usize,
    pub files: Vec<String>,
    pub duration_secs: f64,
    pub seed_rule: &'static str,
}

impl RunManifest {
    pub fn render(&self) -> String {
        format!(
            "command = {}\nversion = {}\nconfig_sha256 = {}\nmaster_seed = {}\njobs = {}\nfiles = {}\nduration_secs = {:.3}\nseed_rule = {}\n",
            self.command,
            self.version,
            self.config_sha256,
            self.master_seed,
            self.jobs,
            self.files.join(", "),
            self.duration_secs,
            self.seed_rule
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub verdict: Verdict,
    pub report: String,
}

/// Files and report lines produced by one command.
struct Output {
    files: Vec<(String, String)>,
    report: String,
    verdict: Verdict,
}

impl Output {
    fn new() -> Self {
        Output {
            files: Vec::new(),
            report: String::new(),
            verdict: Verdict::Info,
        }
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.report.push_str(text.as_ref());
        self.report.push('\n');
    }

    fn check(&mut self, name: &str, ok: bool) -> bool {
        self.line(format!("{}: {name}", Verdict::from_bool(ok).label()));
        ok
    }
}

/// Resolves the output directory: explicit flag, then the config, then
/// [`OUT_DIR_ENV`], then `salab-out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("salab-out"))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Io { path, source })
}

/// Runs `command` and writes its outputs under `out_dir`.
pub fn run_command(
    command: Command,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let serialized = config.to_toml_string();
    let config_sha256 = hex::encode(Sha256::digest(serialized.as_bytes()));

    let output = match command {
        Command::Simulate => simulate(config)?,
        Command::Audit => audit(config)?,
        Command::Tightness => tightness(config)?,
        Command::Lockin => lockin(config)?,
        Command::Fit => fit(config)?,
        Command::SampleComplexity => sample_complexity(config)?,
        Command::ScheduleCheck => schedule_check(config)?,
        Command::NoiseCheck => noise_check(config)?,
    };

    let mut files = Vec::new();
    for (name, contents) in &output.files {
        write_file(out_dir, name, contents)?;
        files.push(name.clone());
    }
    let report = format!(
        "salab {} {}\n{}verdict: {}\n",
        env!("CARGO_PKG_VERSION"),
        command,
        output.report,
        output.verdict.label()
    );
    write_file(out_dir, "report.txt", &report)?;
    write_file(out_dir, "config.toml", &serialized)?;
    files.push("report.txt".into());
    files.push("config.toml".into());

    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256,
        master_seed: config.master_seed,
        jobs: config.parallelism,
        files,
        duration_secs: start.elapsed().as_secs_f64(),
        seed_rule: SEED_RULE,
    };
    write_file(out_dir, "manifest.txt", &manifest.render())?;
    Ok(RunOutcome {
        manifest,
        verdict: output.verdict,
        report,
    })
}

fn mc(config: &ExperimentConfig, replicas: usize) -> McOptions {
    McOptions::new(replicas, config.master_seed).with_jobs(config.parallelism)
}

fn simulate(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.simulate.clone().unwrap_or_default();
    let system = config.system()?;
    let law = config.initial_law(&system.problem)?;
    let mut rng = replica_rng(config.master_seed, 0);
    let x0 = law.sample(&system.problem, &mut rng);
    let seed: u64 = rng.random();
    let traj = system.run_sa_with(
        p.n0,
        &x0,
        p.horizon,
        seed,
        RecordOptions {
            every: p.record_every,
            block_length: p.block_length,
        },
    )?;
    let mut out = Output::new();
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    out.files.push((
        "simulate.csv".into(),
        String::from_utf8(csv).expect("csv is ascii"),
    ));
    out.line(format!("problem: {}", traj.problem_id()));
    out.line(format!("schedule: {}", traj.schedule_id()));
    out.line(format!("noise: {}", traj.noise_id()));
    out.line(format!("x_init: {x0:?}"));
    out.line(format!("recorded states: {}", traj.len()));
    out.line(format!("final state: {:?}", traj.state(traj.len() - 1)));

    if let Some(n) = traj.diverged_at() {
        out.line(format!("diverged at n = {n}"));
        out.verdict = Verdict::Diverged;
        return Ok(out);
    }
    if p.record_every != 1 {
        out.line("block diagnostics skipped: trajectory is decimated");
        return Ok(out);
    }
    let rho = traj.block_deviations(p.block_length, p.dt)?;
    let diag = traj.block_diagnostics(p.delta, p.v)?;
    let blocks = traj.blocks().cloned();
    let mut table = String::from("block,n_start,n_end,t_start,rho,zeta_sup,tau_index\n");
    if let Some(b) = &blocks {
        for i in 0..b.block_count() {
            let (lo, hi) = b.block(i).expect("in range");
            writeln!(
                table,
                "{i},{lo},{hi},{},{},{},{}",
                b.times[i], rho[i], diag.zeta_sup[i], diag.tau_index[i]
            )
            .expect("string write");
        }
    }
    out.line(format!(
        "complete blocks: {}",
        blocks.as_ref().map_or(0, |b| b.block_count())
    ));
    out.line(format!(
        "max rho: {}",
        rho.iter().cloned().fold(0.0, f64::max)
    ));
    out.files.push(("simulate_blocks.csv".into(), table));
    Ok(out)
}

fn audit_region(config: &ExperimentConfig, system: &SaSystem) -> Result<Region, RunError> {
    match config.audit.as_ref().and_then(|a| a.region.as_ref()) {
        Some(r) => Ok(Region::new(r.lo.clone(), r.hi.clone()).map_err(ConfigError::from)?),
        None => Ok(system.problem.domain().bounding_region()),
    }
}

fn audit(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.audit.clone().unwrap_or_default();
    let system = config.system()?;
    let region = audit_region(config, &system)?;
    let a = audit_assumptions(&system.problem, p.samples, &region, config.master_seed)
        .map_err(AnalysisError::from)?;
    let noise_c = verify_second_moment(
        &system.noise,
        &probe_grid(&region, p.probes_per_axis),
        p.noise_samples,
        config.master_seed,
    )
    .map_err(AnalysisError::from)?;
    let mut out = Output::new();
    let mut csv = String::from("quantity,value\n");
    for (k, v) in [
        ("lipschitz_estimate", a.lipschitz_estimate),
        ("hessian_bound_estimate", a.hessian_bound_estimate),
        ("quadratic_growth_c", a.quadratic_growth_c),
        ("descent_violations", a.descent_violations as f64),
        ("samples_used", a.samples_used as f64),
        ("noise_second_moment_c", noise_c),
    ] {
        writeln!(csv, "{k},{v}").expect("string write");
    }
    out.files.push(("audit.csv".into(), csv));
    out.line(format!("region: lo={:?} hi={:?}", region.lo, region.hi));
    let f = a.pass_flags;
    let ok = [
        out.check("lipschitz estimate finite", f.lipschitz),
        out.check("hessian bound finite", f.hessian),
        out.check("quadratic growth constant finite", f.quadratic_growth),
        out.check("no descent violations", f.descent),
        out.check("noise second-moment constant finite", noise_c.is_finite()),
    ];
    out.verdict = Verdict::from_bool(ok.iter().all(|b| *b));
    Ok(out)
}

fn tightness(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.tightness.clone().unwrap_or_default();
    let system = config.system()?;
    let law = config.initial_law(&system.problem)?;
    let mc = mc(config, p.replicas);
    let options = TightnessOptions {
        n0: p.n0,
        horizon: p.horizon,
        radius_grid: p.radius_grid.clone(),
        block_length: p.block_length,
        per_block: p.per_block,
    };
    let result = estimate_tightness(&system, &law, &options, &mc)?;
    let control = match &p.control {
        Some(spec) => {
            let sys = SaSystem::new(system.problem.clone(), system.schedule.clone(), spec.build()?);
            Some(estimate_tightness(&sys, &law, &options, &mc)?)
        }
        None => None,
    };

    let mut out = Output::new();
    let mut csv = String::from("radius,escape_fraction,escape_count,worst_index");
    if control.is_some() {
        csv.push_str(",control_escape_fraction,control_escape_count");
    }
    csv.push('\n');
    for i in 0..result.radii.len() {
        write!(
            csv,
            "{},{},{},{}",
            result.radii[i], result.escape_fraction[i], result.escape_counts[i], result.worst_index[i]
        )
        .expect("string write");
        if let Some(c) = &control {
            write!(csv, ",{},{}", c.escape_fraction[i], c.escape_counts[i]).expect("string write");
        }
        csv.push('\n');
    }
    out.files.push(("tightness.csv".into(), csv));
    out.line(format!(
        "replicas: {}, checkpoints: {}, diverged: {}",
        result.replicas, result.checkpoints, result.diverged
    ));
    let witness = result.witness(p.level);
    let mut ok = out.check(
        &format!("tightness witness with escape <= {} (K = {:?})", p.level, witness),
        witness.is_some(),
    );
    if let (Some(c), Some(k)) = (&control, witness) {
        let i = result.radii.iter().position(|r| *r == k).expect("witness in grid");
        out.line(format!(
            "control escape at K = {k}: {} vs {} (control diverged: {})",
            c.escape_fraction[i], result.escape_fraction[i], c.diverged
        ));
        ok &= out.check(
            "negative control escapes strictly more at the witness radius",
            c.escape_fraction[i] > result.escape_fraction[i],
        );
    }

    if p.moment_check {
        let a = config.audit.clone().unwrap_or_default();
        let options = MomentOptions {
            audit_region: Some(audit_region(config, &system)?),
            audit_samples: a.samples,
            probes_per_axis: a.probes_per_axis,
            noise_samples: a.noise_samples,
            audit_seed: config.master_seed,
            block_length: p.block_length,
            per_block: p.per_block,
            ..MomentOptions::new(p.n0, p.horizon)
        };
        let m = moment_bound_check(&system, &law, &options, &mc)?;
        let mut csv = String::from("n,curve,std_err,envelope\n");
        for k in 0..m.indices.len() {
            writeln!(csv, "{},{},{},{}", m.indices[k], m.curve[k], m.std_err[k], m.envelope[k])
                .expect("string write");
        }
        out.files.push(("moment.csv".into(), csv));
        out.line(format!(
            "moment constant c_hat = {} (growth {} x noise {} x hessian {})",
            m.c_hat, m.audit.quadratic_growth_c, m.noise_c, m.audit.hessian_bound_estimate
        ));
        out.line(format!("moment check diverged replicas: {}", m.diverged));
        ok &= out.check(
            &format!("1 + E[V(x_n)] <= envelope (1 + 3 se) at all {} checkpoints", m.indices.len()),
            m.passed(),
        );
    }
    out.verdict = Verdict::from_bool(ok);
    Ok(out)
}

fn lockin_curve(config: &ExperimentConfig) -> Result<LockinCurve, RunError> {
    let p = config.lockin.clone().unwrap_or_default();
    let system = config.system()?;
    let law = config.initial_law(&system.problem)?;
    let options = LockinOptions {
        horizon_time: p.horizon_time,
        conv_tol: p.conv_tol,
        conv_window: p.conv_window,
        block_length: p.block_length,
        per_block: p.per_block,
    };
    Ok(estimate_lockin(
        &system,
        &p.n0_values,
        &law,
        &options,
        &mc(config, p.replicas),
    )?)
}

fn lockin_csv(curve: &LockinCurve) -> String {
    let mut csv = String::from("n0,b,q_hat,ci_lo,ci_hi,successes,diverged,replicas\n");
    for i in 0..curve.n0_values.len() {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            curve.n0_values[i],
            curve.b_values[i],
            curve.failure_rate[i],
            curve.confidence_intervals[i].0,
            curve.confidence_intervals[i].1,
            curve.success_counts[i],
            curve.diverged_counts[i],
            curve.replicas
        )
        .expect("string write");
    }
    csv
}

/// Fits the bound shape and records it; returns whether the shape is consistent
/// (`None` when the curve is censored).
fn report_fit(out: &mut Output, curve: &LockinCurve, file: &str) -> Result<Option<bool>, RunError> {
    match fit_failure_curve(curve) {
        Ok(fit) => {
            out.files.push((
                file.into(),
                format!(
                    "slope,intercept,r_squared,points_used,censored_points,shape_consistent\n{},{},{},{},{},{}\n",
                    fit.slope, fit.intercept, fit.r_squared, fit.points_used, fit.censored_points, fit.shape_consistent
                ),
            ));
            out.line(format!(
                "fit log q = {} + {} b^(-1/4), R^2 = {}, censored points: {}",
                fit.intercept, fit.slope, fit.r_squared, fit.censored_points
            ));
            Ok(Some(fit.shape_consistent))
        }
        Err(AnalysisError::Censored {
            uncensored,
            censored,
        }) => {
            out.line(format!(
                "fit censored: {uncensored} points with failures, {censored} with none (need 3)"
            ));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn lockin(config: &ExperimentConfig) -> Result<Output, RunError> {
    let curve = lockin_curve(config)?;
    let mut out = Output::new();
    out.files.push(("lockin.csv".into(), lockin_csv(&curve)));
    for i in 0..curve.n0_values.len() {
        out.line(format!(
            "n0 = {}: q_hat = {} [{}, {}], b = {}",
            curve.n0_values[i],
            curve.failure_rate[i],
            curve.confidence_intervals[i].0,
            curve.confidence_intervals[i].1,
            curve.b_values[i]
        ));
    }
    let violations = curve.monotonicity_violations();
    let mut ok = out.check(
        &format!("q_hat nonincreasing in n0 up to 95% CI overlap ({} violations)", violations.len()),
        violations.is_empty(),
    );
    let first = curve.failure_rate[0];
    let last = *curve.failure_rate.last().expect("nonempty");
    if first >= 0.05 && curve.n0_values.len() > 1 {
        ok &= out.check("q_hat at the largest n0 below q_hat at the smallest", last < first);
    }
    report_fit(&mut out, &curve, "lockin_fit.csv")?;
    out.verdict = Verdict::from_bool(ok);
    Ok(out)
}

/// Reads a `lockin.csv` written by the lockin command.
pub fn read_lockin_csv(path: &Path) -> Result<LockinCurve, RunError> {
    let input_err = |message: String| RunError::Input {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| input_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| input_err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| input_err(format!("missing column {name}")))
    };
    let (c_n0, c_b, c_s, c_d, c_r) = (
        col("n0")?,
        col("b")?,
        col("successes")?,
        col("diverged")?,
        col("replicas")?,
    );
    let (mut n0, mut b, mut s, mut d, mut replicas) = (vec![], vec![], vec![], vec![], 0usize);
    for row in reader.records() {
        let row = row.map_err(|e| input_err(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let parse_err = |i: usize| input_err(format!("cannot parse `{}`", field(i)));
        n0.push(field(c_n0).parse().map_err(|_| parse_err(c_n0))?);
        b.push(field(c_b).parse().map_err(|_| parse_err(c_b))?);
        s.push(field(c_s).parse().map_err(|_| parse_err(c_s))?);
        d.push(field(c_d).parse().map_err(|_| parse_err(c_d))?);
        replicas = field(c_r).parse().map_err(|_| parse_err(c_r))?;
    }
    if n0.is_empty() || replicas == 0 {
        return Err(input_err("no rows".into()));
    }
    Ok(LockinCurve::from_counts(n0, replicas, s, d, b))
}

fn fit(config: &ExperimentConfig) -> Result<Output, RunError> {
    let source = config.fit.as_ref().and_then(|f| f.lockin_csv.clone());
    let mut out = Output::new();
    let curve = match &source {
        Some(path) => {
            out.line(format!("curve read from {}", path.display()));
            read_lockin_csv(path)?
        }
        None => {
            out.line("curve estimated from the [lockin] table");
            lockin_curve(config)?
        }
    };
    out.files.push(("fit_input.csv".into(), lockin_csv(&curve)));
    let consistent = report_fit(&mut out, &curve, "fit.csv")?;
    out.verdict = match consistent {
        Some(ok) => Verdict::from_bool(out.check("negative slope in log q vs b^(-1/4)", ok)),
        None => Verdict::Info,
    };
    Ok(out)
}

fn sample_complexity(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.sample_complexity.clone().unwrap_or_default();
    let system = config.system()?;
    let law = config.initial_law(&system.problem)?;
    let mc = mc(config, p.replicas);
    let mut out = Output::new();
    let mut csv = String::from(
        "n0,epsilon,delta_nbhd,Delta,gamma,max_v,horizon_time,trapped_fraction,trapped,diverged,replicas\n",
    );
    let mut fractions = Vec::new();
    for &n0 in &p.n0_values {
        let options = SampleComplexityOptions {
            n0,
            epsilon: p.epsilon,
            delta_nbhd: p.delta_nbhd,
            block_length: p.block_length,
            horizon_time: p.horizon_time,
            grid_resolution: p.grid_resolution,
            dt: p.dt,
            per_block: p.per_block,
        };
        let r = estimate_sample_complexity(&system, &law, &options, &mc)?;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n0,
            r.epsilon,
            r.delta_nbhd,
            r.delta_v,
            r.gamma,
            r.max_v,
            r.horizon_time,
            r.trapped_fraction,
            r.trapped,
            r.diverged,
            r.replicas
        )
        .expect("string write");
        out.line(format!(
            "n0 = {n0}: Delta = {}, gamma = {}, trapped fraction = {}",
            r.delta_v, r.gamma, r.trapped_fraction
        ));
        fractions.push(r.trapped_fraction);
    }
    out.files.push(("sample-complexity.csv".into(), csv));
    let mut ok = true;
    if let (Some(first), Some(last)) = (fractions.first(), fractions.last()) {
        if fractions.len() > 1 {
            ok &= out.check("trapped fraction at the largest n0 >= at the smallest", last >= first);
        }
        if let Some(min) = p.min_trapped {
            ok &= out.check(&format!("trapped fraction at the largest n0 >= {min}"), *last >= min);
        }
    }
    out.verdict = Verdict::from_bool(ok);
    Ok(out)
}

fn schedule_check(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.schedule_check.clone().unwrap_or_default();
    let schedule = config.schedule()?;
    let partition = schedule
        .partition_blocks(p.n0, p.block_length, p.horizon)
        .map_err(ConfigError::from)?;
    let ratios = schedule.block_ratios(&partition);
    let bound = (p.block_length + schedule.a_max()).exp();
    let a2 = schedule.check_a2(p.a2_horizon);
    let mut out = Output::new();
    let mut csv = String::from("block,n_start,n_end,t_start,width,ratio\n");
    let widths = partition.widths();
    for (i, r) in ratios.iter().enumerate() {
        let (lo, hi) = partition.block(i).expect("in range");
        writeln!(csv, "{i},{lo},{hi},{},{},{r}", partition.times[i], widths[i]).expect("string write");
    }
    out.files.push(("schedule-check.csv".into(), csv));
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    out.line(format!("schedule: {}", schedule.id()));
    out.line(format!("blocks: {} from n0 = {}", partition.block_count(), p.n0));
    out.line(format!("max block ratio: {max_ratio}; e^(T + a_max) = {bound}"));
    out.line(format!(
        "A2 proxy at horizon {}: positive = {}, nonincreasing from n = {}, sum ratio = {}, square ratio = {}",
        a2.horizon, a2.positive, a2.nonincreasing_from, a2.linear_sum_ratio, a2.square_sum_ratio
    ));
    if !schedule.is_test_only() {
        out.line(format!(
            "b(n0) = {}",
            schedule.tail_sum_squares_auto(p.n0).map_err(ConfigError::from)?
        ));
    }
    let ok = [
        out.check("sum of steps diverges", a2.sum_diverges),
        out.check("sum of squared steps converges", a2.squares_converge),
        out.check(
            &format!("max block ratio <= e^(T + a_max) + {}", p.tolerance),
            max_ratio <= bound + p.tolerance,
        ),
    ];
    out.verdict = Verdict::from_bool(ok.iter().all(|b| *b));
    Ok(out)
}

fn noise_check(config: &ExperimentConfig) -> Result<Output, RunError> {
    let p = config.noise_check.clone().unwrap_or_default();
    let system = config.system()?;
    let probes = if p.probes.is_empty() {
        vec![vec![0.0; system.problem.dim()]]
    } else {
        p.probes.clone()
    };
    let tail = verify_tail(&system.noise, &probes, &p.v_grid, p.samples, config.master_seed)
        .map_err(AnalysisError::from)?;
    let c_hat = verify_second_moment(&system.noise, &probes, p.second_moment_samples, config.master_seed)
        .map_err(AnalysisError::from)?;
    let mut out = Output::new();
    let mut csv = String::from("v,exceedance_count,exceedance_prob\n");
    for i in 0..tail.v_grid.len() {
        writeln!(
            csv,
            "{},{},{}",
            tail.v_grid[i], tail.exceedance_counts[i], tail.exceedance_probs[i]
        )
        .expect("string write");
    }
    out.files.push(("noise-check.csv".into(), csv));
    out.line(format!("noise: {}", system.noise.id()));
    out.line(format!(
        "tail fit: C1 = {}, C2 = {}, R^2 = {}, decay ratio = {}, verdict = {:?}",
        tail.c1_hat, tail.c2_hat, tail.r_squared, tail.decay_ratio, tail.verdict
    ));
    out.line(format!("second-moment constant: {c_hat}"));
    let ok = out.check("exponential tail bound", tail.verdict.passed());
    out.verdict = Verdict::from_bool(ok);
    Ok(out)
}
