use rand::Rng;

use super::{bad, check_replicas, AnalysisError, InitialLaw};
use crate::engine::SaSystem;
use crate::replica::{run_replicas, McOptions};
use crate::stats::{median, wilson_interval, Z95};

/// Options for comparing block deviations at two starting indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoOptions {
    pub n0_small: u64,
    pub n0_large: u64,
    /// Number of complete blocks examined after each `n0`.
    pub blocks: usize,
    pub block_length: f64,
    /// Fill step for the deviation grid; `None` uses the trajectory default.
    pub dt: Option<f64>,
}

impl RhoOptions {
    pub fn new(n0_small: u64, n0_large: u64, blocks: usize) -> Self {
        RhoOptions {
            n0_small,
            n0_large,
            blocks,
            block_length: 1.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoComparison {
    /// `max_i rho_i` per replica started at `n0_small`.
    pub small: Vec<f64>,
    /// Same replicas (initial point and noise seed) started at `n0_large`.
    pub large: Vec<f64>,
    /// Replicas with a strictly smaller maximum at `n0_large`.
    pub wins: usize,
    /// Pairs with equal maxima, dropped from the sign test.
    pub ties: usize,
    /// 95% Wilson interval for the win probability among untied pairs.
    pub win_interval: (f64, f64),
}

impl RhoComparison {
    pub fn median_small(&self) -> f64 {
        median(&self.small)
    }

    pub fn median_large(&self) -> f64 {
        median(&self.large)
    }

    /// The larger start index gives smaller deviations with 95% confidence.
    pub fn decays(&self) -> bool {
        self.win_interval.0 > 0.5
    }
}

/// Boundary `n_blocks` of the block chain started at `n0`.
fn block_end(system: &SaSystem, n0: u64, blocks: usize, block_length: f64) -> u64 {
    let mut n = n0;
    for _ in 0..blocks {
        let mut t = 0.0;
        while t < block_length {
            t += system.schedule.step(n);
            n += 1;
        }
    }
    n
}

/// `max_i rho_i` over the first `blocks` complete blocks after `n0`.
pub fn max_block_deviation(
    system: &SaSystem,
    n0: u64,
    x0: &[f64],
    seed: u64,
    blocks: usize,
    block_length: f64,
    dt: Option<f64>,
) -> Result<f64, AnalysisError> {
    if blocks == 0 {
        return Err(bad("need at least one block"));
    }
    let horizon = block_end(system, n0, blocks, block_length);
    let tr = system.run_sa(n0, x0, horizon, seed)?;
    if tr.diverged_at().is_some() {
        return Ok(f64::INFINITY);
    }
    let rho = tr.block_deviations(block_length, dt)?;
    Ok(rho.iter().take(blocks).cloned().fold(0.0, f64::max))
}

/// Paired comparison of `max_i rho_i` at two start indices: replica `k` uses
/// the same initial point and noise seed for both.
pub fn compare_rho(
    system: &SaSystem,
    law: &InitialLaw,
    options: &RhoOptions,
    mc: &McOptions,
) -> Result<RhoComparison, AnalysisError> {
    check_replicas(mc.replicas, 1)?;
    if options.n0_large <= options.n0_small {
        return Err(bad("n0_large must exceed n0_small"));
    }
    law.validate(&system.problem, false)?;
    let pairs = run_replicas(mc, |_, rng| {
        let x0 = law.sample(&system.problem, rng);
        let seed: u64 = rng.random();
        let at = |n0| {
            max_block_deviation(
                system,
                n0,
                &x0,
                seed,
                options.blocks,
                options.block_length,
                options.dt,
            )
        };
        Ok((at(options.n0_small)?, at(options.n0_large)?))
    });
    let pairs = pairs
        .into_iter()
        .collect::<Result<Vec<(f64, f64)>, AnalysisError>>()?;
    let wins = pairs.iter().filter(|(s, l)| l < s).count();
    let ties = pairs.iter().filter(|(s, l)| l == s).count();
    let untied = pairs.len() - ties;
    let win_interval = if untied == 0 {
        (0.0, 1.0)
    } else {
        wilson_interval(wins as u64, untied as u64, Z95)
    };
    let (small, large) = pairs.into_iter().unzip();
    Ok(RhoComparison {
        small,
        large,
        wins,
        ties,
        win_interval,
    })
}
