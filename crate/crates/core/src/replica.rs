//! Seeded replica execution.
//!
//! Replica `i` of a run with master seed `s` owns a ChaCha8 stream seeded
//! with [`derive_replica_seed`]`(s, i)`. Results come back in replica order,
//! so any fold over them is independent of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Textual form of the seed rule, written into run manifests.
pub const SEED_RULE: &str =
    "replica_seed = splitmix64_finalize(master_seed + 0x9E3779B97F4A7C15 * (replica_index + 1)); rng = ChaCha8Rng::seed_from_u64(replica_seed)";

/// The splitmix64 output finalizer, a bijection on `u64`.
#[inline]
pub fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Injective in `replica_index` for a fixed master seed: multiplication by an
/// odd constant, a shift by the seed, and the finalizer are all bijections.
pub fn derive_replica_seed(master_seed: u64, replica_index: u64) -> u64 {
    splitmix64_finalize(master_seed.wrapping_add(GOLDEN.wrapping_mul(replica_index.wrapping_add(1))))
}

pub fn replica_rng(master_seed: u64, replica_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_replica_seed(master_seed, replica_index))
}

/// Replica count, master seed, and worker threads for a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub replicas: usize,
    pub master_seed: u64,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
}

impl McOptions {
    pub fn new(replicas: usize, master_seed: u64) -> Self {
        McOptions {
            replicas,
            master_seed,
            jobs: 0,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }
}

/// Runs `task(index, rng)` for every replica and returns the results in index order.
pub fn run_replicas<T, F>(options: &McOptions, task: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let work = || {
        (0..options.replicas)
            .into_par_iter()
            .map(|i| {
                let mut rng = replica_rng(options.master_seed, i as u64);
                task(i, &mut rng)
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}
