//! Randomly shifted Kronecker (R_d) point sets for domain quadrature.

use rand::Rng;

use crate::rng::{domain, stream};

/// Fixed seed of the Cranley–Patterson shift.
pub const SCRAMBLE_SEED: u64 = 0x5EED_0F_D0_3A1;

/// Generator of the R_d sequence: α_j = φ_d^{-j} with φ_d^{d+1} = φ_d + 1.
fn alphas(d: usize) -> Vec<f64> {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (d as f64 + 1.0));
    }
    (1..=d).map(|j| g.powi(-(j as i32)).fract()).collect()
}

/// `n` points in [0,1)^d, shifted by the replicate `shift_index` of the
/// fixed scramble stream.
pub fn unit_points(d: usize, n: usize, shift_index: u64) -> Vec<Vec<f64>> {
    let alpha = alphas(d);
    let mut rng = stream(SCRAMBLE_SEED, domain::QMC_SHIFT, shift_index);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (0..n)
        .map(|i| {
            (0..d)
                .map(|j| (shift[j] + (i as f64 + 1.0) * alpha[j]).fract())
                .collect()
        })
        .collect()
}
