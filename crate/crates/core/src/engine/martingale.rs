//! Martingale partial sums inside one block.

/// Partial sums `zeta_j = sum_{m<j} a_m M_m`, the stopping offset, and the
/// clipped increments for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDiagnostics {
    /// `zeta_0 = 0` through `zeta_len`; `len + 1` vectors.
    pub zeta: Vec<Vec<f64>>,
    /// First `j` with `||zeta_j||_inf > delta / sqrt(d)`, or the block length
    /// if none. [`crate::engine::Trajectory::martingale_diagnostics`] shifts it
    /// to an absolute iterate index.
    pub tau_index: u64,
    /// `M_m` with every coordinate clipped to `[-v, v]`.
    pub truncated: Vec<Vec<f64>>,
}

pub fn truncate_increment(value: f64, v: f64) -> f64 {
    value.clamp(-v, v)
}

/// `steps[m]` is `a(n_i + m)`; `increments` holds `M_{n_i+m+1}` flattened, `dim` per step.
pub fn martingale_path(
    steps: &[f64],
    increments: &[f64],
    dim: usize,
    delta: f64,
    v: f64,
) -> MartingaleDiagnostics {
    assert_eq!(steps.len() * dim, increments.len(), "one increment per step");
    let threshold = delta / (dim as f64).sqrt();
    let mut zeta = Vec::with_capacity(steps.len() + 1);
    let mut truncated = Vec::with_capacity(steps.len());
    let mut current = vec![0.0; dim];
    let mut tau = None;
    zeta.push(current.clone());
    for (j, (a, m)) in steps.iter().zip(increments.chunks_exact(dim)).enumerate() {
        for i in 0..dim {
            current[i] += a * m[i];
        }
        if tau.is_none() && current.iter().any(|z| z.abs() > threshold) {
            tau = Some(j as u64 + 1);
        }
        zeta.push(current.clone());
        truncated.push(m.iter().map(|x| truncate_increment(*x, v)).collect());
    }
    MartingaleDiagnostics {
        zeta,
        tau_index: tau.unwrap_or(steps.len() as u64),
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let d = martingale_path(&[1.0; 3], &[0.3, 0.5, 0.4], 1, 1.0, 10.0);
        let z: Vec<f64> = d.zeta.iter().map(|v| v[0]).collect();
        for (got, want) in z.iter().zip([0.0, 0.3, 0.8, 1.2]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(d.tau_index, 3);
    }

    #[test]
    fn clipping() {
        assert_eq!(truncate_increment(3.5, 2.0), 2.0);
        assert_eq!(truncate_increment(-3.5, 2.0), -2.0);
        assert_eq!(truncate_increment(1.0, 2.0), 1.0);
        let d = martingale_path(&[0.1, 0.1], &[3.5, -1.0, 0.2, -3.5], 2, 1.0, 2.0);
        assert_eq!(d.truncated, vec![vec![2.0, -1.0], vec![0.2, -2.0]]);
    }

    #[test]
    fn zero_noise_never_stops() {
        let d = martingale_path(&[0.5; 7], &[0.0; 14], 2, 1e-9, 1.0);
        assert_eq!(d.tau_index, 7);
        assert!(d.zeta.iter().all(|z| z.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn threshold_scales_with_dimension() {
        // 0.6 > 1/sqrt(4) but < 1/sqrt(1)
        let one = martingale_path(&[1.0], &[0.6], 1, 1.0, 1.0);
        let four = martingale_path(&[1.0], &[0.6, 0.0, 0.0, 0.0], 4, 1.0, 1.0);
        assert_eq!(one.tau_index, 1);
        assert_eq!(four.tau_index, 1);
        assert_eq!(martingale_path(&[1.0, 1.0], &[0.6, 0.0], 1, 1.0, 1.0).tau_index, 2);
        assert_eq!(
            martingale_path(&[1.0, 1.0], &[0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 4, 1.0, 1.0)
                .tau_index,
            2
        );
    }

    proptest! {
        #[test]
        fn telescoping(
            steps in prop::collection::vec(0.0f64..1.0, 1..40),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let inc: Vec<f64> = (0..steps.len() * 2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d = martingale_path(&steps, &inc, 2, 0.5, 1.0);
            for j in 0..=steps.len() {
                for i in 0..2 {
                    let brute: f64 = (0..j).map(|m| steps[m] * inc[2 * m + i]).sum();
                    prop_assert!((d.zeta[j][i] - brute).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn tau_monotone_in_delta(
            steps in prop::collection::vec(0.01f64..1.0, 1..40),
            seed in any::<u64>(),
            d1 in 0.01f64..2.0,
            d2 in 0.01f64..2.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let inc: Vec<f64> = (0..steps.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let a = martingale_path(&steps, &inc, 1, lo, 1.0).tau_index;
            let b = martingale_path(&steps, &inc, 1, hi, 1.0).tau_index;
            prop_assert!(a <= b);
        }
    }
}
