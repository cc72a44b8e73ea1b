//! Clamped degree-5 B-spline over the MPC horizon. With six control points
//! and a clamped uniform knot vector the curve is a single quintic Bezier
//! span, so evaluation uses the Bernstein basis directly.

/// Evaluate the clamped quintic through 6 knots at `count` equally spaced
/// parameters covering [0, 1].
pub fn quintic_interpolate(knots: &[f64; 6], count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|h| {
            let s = h as f64 / (count - 1) as f64;
            bezier5(knots, s)
        })
        .collect()
}

fn bezier5(p: &[f64; 6], s: f64) -> f64 {
    let t = 1.0 - s;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    p[0] * t5
        + p[1] * 5.0 * t4 * s
        + p[2] * 10.0 * t3 * s2
        + p[3] * 10.0 * t2 * s3
        + p[4] * 5.0 * t * s4
        + p[5] * s5
}

/// Piecewise-linear interpolation through the same 6 knots (the smoothness
/// comparison baseline).
pub fn linear_interpolate(knots: &[f64; 6], count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|h| {
            let s = h as f64 / (count - 1) as f64 * 5.0;
            let k = (s.floor() as usize).min(4);
            let f = s - k as f64;
            knots[k] * (1.0 - f) + knots[k + 1] * f
        })
        .collect()
}

/// Max |third finite difference| of a sequence (the jerk proxy used by the
/// smoothness comparisons).
pub fn max_third_difference(seq: &[f64]) -> f64 {
    if seq.len() < 4 {
        return 0.0;
    }
    seq.windows(4)
        .map(|w| (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn endpoints_are_interpolated() {
        let knots = [0.3, -1.2, 0.8, 2.0, -0.5, 1.1];
        let seq = quintic_interpolate(&knots, 30);
        assert!((seq[0] - knots[0]).abs() < 1e-9);
        assert!((seq[29] - knots[5]).abs() < 1e-9);
    }

    #[test]
    fn constant_knots_give_constant_sequence() {
        let seq = quintic_interpolate(&[0.7; 6], 30);
        for v in &seq {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_jerk_below_linear_jerk() {
        for seed in 0..100 {
            let mut rng = crate::rng::RngStream::new(seed, 1).rng();
            let mut knots = [0.0; 6];
            for k in &mut knots {
                *k = rng.random_range(-1.0..1.0);
            }
            let spline = quintic_interpolate(&knots, 30);
            let linear = linear_interpolate(&knots, 30);
            let js = max_third_difference(&spline);
            let jl = max_third_difference(&linear);
            assert!(
                js <= jl + 1e-12,
                "seed {seed}: spline jerk {js} > linear jerk {jl}"
            );
        }
    }
}
