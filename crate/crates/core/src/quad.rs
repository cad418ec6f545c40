//! Composite Simpson quadrature on uniformly sampled data.

use crate::real::Real;

/// Integrate uniformly spaced samples by the composite Simpson 1/3 rule.
///
/// An odd interval count is handled with the standard three-point end
/// correction, so any `values.len() >= 3` works. For fewer samples this
/// falls back to the trapezoid rule.
pub fn simpson_uniform<R: Real>(values: &[R], dx: R) -> R {
    let n = values.len();
    if n < 2 {
        return R::zero();
    }
    if n == 2 {
        return dx * (values[0] + values[1]) / R::of(2.0);
    }
    let intervals = n - 1;
    let pairs = intervals / 2;
    let four = R::of(4.0);
    let mut sum = R::zero();
    for i in 0..pairs {
        sum += values[2 * i] + four * values[2 * i + 1] + values[2 * i + 2];
    }
    if intervals % 2 != 0 {
        // last interval: quadratic through the final three samples
        sum += R::of(1.25) * values[n - 1] + R::of(2.0) * values[n - 2]
            - R::of(0.25) * values[n - 3];
    }
    dx / R::of(3.0) * sum
}

/// Integrate `f` over `[a, b]` by sampling `n_points >= 3` uniformly.
pub fn simpson_fn<R: Real>(a: R, b: R, n_points: usize, mut f: impl FnMut(R) -> R) -> R {
    assert!(n_points >= 3, "simpson_fn needs at least 3 samples");
    let dx = (b - a) / R::of_usize(n_points - 1);
    let values: Vec<R> = (0..n_points)
        .map(|i| f(a + dx * R::of_usize(i)))
        .collect();
    simpson_uniform(&values, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matches_polynomial_integrals() {
        // Simpson is exact for cubics.
        let n = 101;
        let dx = 2.0 / (n as f64 - 1.0);
        let cubic: Vec<f64> = (0..n)
            .map(|i| {
                let x = -1.0 + dx * i as f64;
                x * x * x + 2.0 * x * x - x + 1.0
            })
            .collect();
        assert_abs_diff_eq!(simpson_uniform(&cubic, dx), 4.0 / 3.0 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn handles_odd_interval_count() {
        // 4 samples = 3 intervals, sin over [0, pi/2]
        let val = simpson_fn(0.0f64, std::f64::consts::FRAC_PI_2, 10, |x| x.sin());
        assert_abs_diff_eq!(val, 1.0, epsilon = 1e-4);
        let fine = simpson_fn(0.0f64, std::f64::consts::FRAC_PI_2, 1001, |x| x.sin());
        assert_abs_diff_eq!(fine, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_norm_f32() {
        let sigma = 0.5f32;
        let val = simpson_fn(-6.0f32, 6.0, 2001, |x| {
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        });
        let expect = (2.0 * std::f32::consts::PI).sqrt() * sigma;
        assert_abs_diff_eq!(val, expect, epsilon = 1e-4);
    }
}
