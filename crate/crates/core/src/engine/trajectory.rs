use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::martingale::{martingale_path, MartingaleDiagnostics};
use super::ode::{advance, Rk4Scratch};
use super::{EngineError, RecordOptions, SaSystem, Stepper};
use crate::problem::{distance, norm};
use crate::schedule::BlockPartition;

/// One seeded realization of the recursion.
///
/// Stores `x_n` at the recorded indices together with `t(n)`. The noise
/// draws are not stored; they are regenerated from the seed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    system: SaSystem,
    n0: u64,
    seed: u64,
    dim: usize,
    every: u64,
    indices: Vec<u64>,
    times: Vec<f64>,
    states: Vec<f64>,
    blocks: Option<BlockPartition>,
    diverged_at: Option<u64>,
}

/// Per-block deviation and martingale summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostics {
    /// `sup_t ||xbar(t) - x^{t(n_i)}(t)||` per block; `+inf` if the flow diverged.
    pub rho: Vec<f64>,
    /// `max_j ||zeta_{n_i+j}||` per block.
    pub zeta_sup: Vec<f64>,
    /// Stopping index per block, capped at the block end.
    pub tau_index: Vec<u64>,
}

pub(super) struct Builder {
    traj: Trajectory,
    block_length: f64,
    target: f64,
    boundaries: Vec<u64>,
    boundary_times: Vec<f64>,
}

impl Builder {
    pub(super) fn new(
        system: &SaSystem,
        n0: u64,
        seed: u64,
        options: RecordOptions,
        t0: f64,
        x0: &[f64],
    ) -> Self {
        Builder {
            traj: Trajectory {
                system: system.clone(),
                n0,
                seed,
                dim: x0.len(),
                every: options.every,
                indices: vec![n0],
                times: vec![t0],
                states: x0.to_vec(),
                blocks: None,
                diverged_at: None,
            },
            block_length: options.block_length,
            target: t0 + options.block_length,
            boundaries: vec![n0],
            boundary_times: vec![t0],
        }
    }

    pub(super) fn observe(&mut self, n: u64, t: f64, x: &[f64], last: bool) {
        let boundary = t >= self.target;
        if boundary {
            self.boundaries.push(n);
            self.boundary_times.push(t);
            self.target = t + self.block_length;
        }
        if boundary || last || (n - self.traj.n0).is_multiple_of(self.traj.every) {
            self.push(n, t, x);
        }
    }

    fn push(&mut self, n: u64, t: f64, x: &[f64]) {
        self.traj.indices.push(n);
        self.traj.times.push(t);
        self.traj.states.extend_from_slice(x);
    }

    pub(super) fn finish_diverged(mut self, stepper: &Stepper<'_>) -> Trajectory {
        if *self.traj.indices.last().expect("initial state") != stepper.n() {
            self.push(stepper.n(), stepper.time(), stepper.state());
        }
        self.traj.diverged_at = Some(stepper.n() + 1);
        self.finish()
    }

    pub(super) fn finish(mut self) -> Trajectory {
        if self.boundaries.len() >= 2 {
            self.traj.blocks = Some(BlockPartition {
                n0: self.traj.n0,
                block_length: self.block_length,
                boundaries: self.boundaries,
                times: self.boundary_times,
            });
        }
        self.traj
    }
}

impl Trajectory {
    pub fn system(&self) -> &SaSystem {
        &self.system
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }

    /// The `k`-th recorded state.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// `x_n`, if recorded.
    pub fn state_at(&self, n: u64) -> Option<&[f64]> {
        self.indices.binary_search(&n).ok().map(|k| self.state(k))
    }

    pub fn last_index(&self) -> u64 {
        *self.indices.last().expect("initial state always recorded")
    }

    /// Index of the first non-finite iterate, if the run diverged.
    pub fn diverged_at(&self) -> Option<u64> {
        self.diverged_at
    }

    /// Blocks of the recording block length that fit inside the run.
    pub fn blocks(&self) -> Option<&BlockPartition> {
        self.blocks.as_ref()
    }

    pub fn problem_id(&self) -> &str {
        self.system.problem.name()
    }

    pub fn schedule_id(&self) -> String {
        self.system.schedule.id()
    }

    pub fn noise_id(&self) -> String {
        self.system.noise.id()
    }

    /// Block partition for block length `t_block`, reusing the stored one when it matches.
    pub fn partition(&self, block_length: f64) -> Result<BlockPartition, EngineError> {
        if let Some(b) = &self.blocks {
            if b.block_length == block_length {
                return Ok(b.clone());
            }
        }
        Ok(self
            .system
            .schedule
            .partition_blocks(self.n0, block_length, self.last_index())?)
    }

    fn record_position(&self, n: u64) -> Result<usize, EngineError> {
        self.indices
            .binary_search(&n)
            .map_err(|_| EngineError::NotRecorded(n))
    }

    /// True when every iterate in `[lo, hi]` is recorded.
    fn fully_recorded(&self, lo: u64, hi: u64) -> Result<(usize, usize), EngineError> {
        let a = self.record_position(lo)?;
        let b = self.record_position(hi)?;
        if (b - a) as u64 != hi - lo {
            let missing = (lo..=hi)
                .find(|n| self.indices.binary_search(n).is_err())
                .unwrap_or(lo);
            return Err(EngineError::NotRecorded(missing));
        }
        Ok((a, b))
    }

    /// The piecewise-linear interpolation `xbar(t)` through `(t(n), x_n)`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, EngineError> {
        let lo = self.times[0];
        let hi = *self.times.last().expect("nonempty");
        if !(t >= lo && t <= hi) {
            return Err(EngineError::OutOfRange { t, lo, hi });
        }
        let k = self.times.partition_point(|s| *s <= t) - 1;
        if self.times[k] == t {
            return Ok(self.state(k).to_vec());
        }
        if self.indices[k + 1] != self.indices[k] + 1 {
            return Err(EngineError::NotRecorded(self.indices[k] + 1));
        }
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Ok(self
            .state(k)
            .iter()
            .zip(self.state(k + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    /// Regenerates `M_{n+1}` for every `n` in `[n0, last)` by replaying the
    /// recursion from the seed. Flattened, `dim` entries per step.
    pub fn noise_draws(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut stepper = Stepper::with_clock(&self.system, self.n0, self.times[0], self.state(0));
        let steps = (self.last_index() - self.n0) as usize;
        let mut out = Vec::with_capacity(steps * self.dim);
        for _ in 0..steps {
            stepper.step(&mut rng);
            out.extend_from_slice(stepper.last_noise());
        }
        out
    }

    /// Checks `x_{n+1} == x_n + a(n) (h(x_n) + M_{n+1})` bit-for-bit at every
    /// consecutive pair of recorded states, with `M` regenerated from the
    /// seed. Returns the first failing `n`.
    pub fn verify_recursion(&self) -> Result<(), u64> {
        let noise = self.noise_draws();
        let d = self.dim;
        let mut h = vec![0.0; d];
        for k in 0..self.len() - 1 {
            let n = self.indices[k];
            if self.indices[k + 1] != n + 1 {
                continue;
            }
            let x = self.state(k);
            let next = self.state(k + 1);
            let a = self.system.schedule.step(n);
            self.system.problem.drift_into(x, &mut h);
            let m = &noise[(n - self.n0) as usize * d..(n - self.n0 + 1) as usize * d];
            for i in 0..d {
                if x[i] + a * (h[i] + m[i]) != next[i] {
                    return Err(n);
                }
            }
            if self.times[k] + a != self.times[k + 1] {
                return Err(n);
            }
        }
        Ok(())
    }

    /// `rho_i` for every complete block of length `block_length`. The sup is
    /// taken over a grid holding every iterate knot plus points spaced `dt`
    /// apart; `dt` defaults to `min(1e-3, a(n_i)/10)` per block.
    pub fn block_deviations(
        &self,
        block_length: f64,
        dt: Option<f64>,
    ) -> Result<Vec<f64>, EngineError> {
        let partition = self.partition(block_length)?;
        (0..partition.block_count())
            .map(|i| {
                let (lo, hi) = partition.block(i).expect("in range");
                let step = dt.unwrap_or_else(|| (self.system.schedule.step(lo) / 10.0).min(1e-3));
                self.block_rho(lo, hi, step)
            })
            .collect()
    }

    fn block_rho(&self, lo: u64, hi: u64, dt: f64) -> Result<f64, EngineError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EngineError::BadParameter("dt must be positive"));
        }
        let (a, b) = self.fully_recorded(lo, hi)?;
        let problem = &self.system.problem;
        let d = self.dim;
        let mut scratch = Rk4Scratch::new(d);
        let mut y = self.state(a).to_vec();
        let t_start = self.times[a];
        let t_end = self.times[b];
        let mut now = t_start;
        let mut rho: f64 = 0.0;
        let mut xbar = vec![0.0; d];
        let mut knot = a;
        let mut fill = 1u64;
        loop {
            let next_knot = if knot < b { Some(self.times[knot + 1]) } else { None };
            let next_fill = t_start + fill as f64 * dt;
            let next = match next_knot {
                Some(tk) if tk <= next_fill => tk,
                _ if next_fill < t_end => next_fill,
                Some(tk) => tk,
                None => break,
            };
            if advance(problem, &mut y, next - now, dt, &mut scratch).is_err() {
                return Ok(f64::INFINITY);
            }
            now = next;
            if next_knot == Some(next) {
                knot += 1;
                xbar.copy_from_slice(self.state(knot));
            } else {
                fill += 1;
                let w = (next - self.times[knot]) / (self.times[knot + 1] - self.times[knot]);
                for i in 0..d {
                    let (p, q) = (self.state(knot)[i], self.state(knot + 1)[i]);
                    xbar[i] = p + w * (q - p);
                }
            }
            rho = rho.max(distance(&xbar, &y));
            if next_knot == Some(next) && knot == b {
                break;
            }
        }
        Ok(rho)
    }

    /// `zeta`, the stopping index, and the clipped increments for block `block_index`.
    pub fn martingale_diagnostics(
        &self,
        block_index: usize,
        delta: f64,
        v: f64,
    ) -> Result<MartingaleDiagnostics, EngineError> {
        if !(delta > 0.0 && v > 0.0) {
            return Err(EngineError::BadParameter("delta and v must be positive"));
        }
        self.martingale_with(&self.noise_draws(), block_index, delta, v)
    }

    fn martingale_with(
        &self,
        noise: &[f64],
        block_index: usize,
        delta: f64,
        v: f64,
    ) -> Result<MartingaleDiagnostics, EngineError> {
        let (lo, hi) = self
            .blocks
            .as_ref()
            .and_then(|p| p.block(block_index))
            .ok_or(EngineError::NoSuchBlock(block_index))?;
        let d = self.dim;
        let steps: Vec<f64> = (lo..hi).map(|n| self.system.schedule.step(n)).collect();
        let start = (lo - self.n0) as usize * d;
        let end = (hi - self.n0) as usize * d;
        let mut diag = martingale_path(&steps, &noise[start..end], d, delta, v);
        diag.tau_index += lo;
        Ok(diag)
    }

    /// `rho`, `sup ||zeta||`, and `tau` for every complete stored block.
    pub fn block_diagnostics(&self, delta: f64, v: f64) -> Result<BlockDiagnostics, EngineError> {
        let Some(partition) = &self.blocks else {
            return Ok(BlockDiagnostics {
                rho: vec![],
                zeta_sup: vec![],
                tau_index: vec![],
            });
        };
        let rho = self.block_deviations(partition.block_length, None)?;
        if !(delta > 0.0 && v > 0.0) {
            return Err(EngineError::BadParameter("delta and v must be positive"));
        }
        let noise = self.noise_draws();
        let mut zeta_sup = Vec::with_capacity(rho.len());
        let mut tau_index = Vec::with_capacity(rho.len());
        for i in 0..partition.block_count() {
            let m = self.martingale_with(&noise, i, delta, v)?;
            zeta_sup.push(m.zeta.iter().map(|z| norm(z)).fold(0.0, f64::max));
            tau_index.push(m.tau_index);
        }
        Ok(BlockDiagnostics {
            rho,
            zeta_sup,
            tau_index,
        })
    }

    /// CSV dump with columns `n,t,x0..x{d-1},block`. Iterates past the last
    /// complete block get the index of the open block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "n,t")?;
        for i in 0..self.dim {
            write!(out, ",x{i}")?;
        }
        writeln!(out, ",block")?;
        let bounds: &[u64] = self.blocks.as_ref().map_or(&[], |b| &b.boundaries);
        for k in 0..self.len() {
            let n = self.indices[k];
            let block = bounds.partition_point(|b| *b <= n).saturating_sub(1);
            write!(out, "{},{}", n, self.times[k])?;
            for v in self.state(k) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{block}")?;
        }
        Ok(())
    }
}
