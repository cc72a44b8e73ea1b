//! Halton low-discrepancy sequences with per-dimension prime bases.

use super::MpcError;

/// Prime bases for up to 25 dimensions.
pub const PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97,
];

/// Radical inverse of `n` (1-based) in the given base; always in (0, 1).
pub fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let mut f = 1.0 / base as f64;
    let mut r = 0.0;
    while n > 0 {
        r += f * (n % base) as f64;
        n /= base;
        f /= base as f64;
    }
    r
}

/// `count` Halton points in (0,1)^dims, starting `skip` indices in.
pub fn halton_sequence(count: usize, dims: usize, skip: u64) -> Result<Vec<Vec<f64>>, MpcError> {
    if dims > PRIMES.len() {
        return Err(MpcError::TooManyDims {
            dims,
            max: PRIMES.len(),
        });
    }
    Ok((0..count)
        .map(|i| {
            let n = skip + i as u64 + 1;
            (0..dims).map(|d| radical_inverse(n, PRIMES[d])).collect()
        })
        .collect())
}

/// Empirical-CDF discrepancy proxy for 2-D points: the max over a probe
/// grid of |fraction inside [0,u]x[0,v] - u*v|.
pub fn discrepancy_proxy_2d(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mut worst = 0.0f64;
    let grid = 16;
    for gi in 1..=grid {
        for gj in 1..=grid {
            let u = gi as f64 / grid as f64;
            let v = gj as f64 / grid as f64;
            let inside = points.iter().filter(|p| p[0] <= u && p[1] <= v).count() as f64;
            worst = worst.max((inside / n - u * v).abs());
        }
    }
    worst
}
