//! Small numerical helpers shared across modules.

use std::f64::consts::{PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Density of N(0, sd²) at `x`.
#[inline]
pub fn normal_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd) * (x / sd)).exp() / (sd * (2.0 * PI).sqrt())
}

#[inline]
pub fn normal_log_pdf(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd) * (x / sd) - sd.ln() - LN_SQRT_2PI
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `log Σ exp(v_i)`; `-inf` for an empty or all-`-inf` slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalized softmax weights of log-weights, written into `out`.
pub fn softmax_into(log_weights: &[f64], out: &mut Vec<f64>) {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(log_weights.iter().map(|v| (v - max).exp()));
    let total: f64 = out.iter().sum();
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        // Lower tail keeps relative accuracy.
        let t = std_normal_cdf(-10.0);
        assert!((t / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lse_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = integrate(&|x| normal_pdf(x, 1.0), -10.0, 10.0, 1e-13);
        assert!((v - 1.0).abs() < 1e-11);
    }
}
