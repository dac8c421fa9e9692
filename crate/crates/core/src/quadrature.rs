//! Tanh-sinh (double exponential) quadrature on a finite interval.
//!
//! Used for ball/box intersection volumes, where the integrand is analytic
//! inside each piece but has algebraic endpoint singularities.

use std::f64::consts::FRAC_PI_2;

const T_MAX: f64 = 3.5;
const MAX_LEVEL: usize = 8;

/// Integrates `f` over `[a, b]`, halving the step until two successive
/// estimates agree to `rel_tol` relative to `scale` (or to the estimate).
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, scale: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    // Abscissa offsets are measured from the nearer endpoint so points close
    // to the ends keep full relative precision.
    let eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        // 1 - tanh(|u|) computed without cancellation
        let e = (-2.0 * u.abs()).exp();
        let one_minus = 2.0 * e / (1.0 + e);
        let x = if u >= 0.0 {
            b - half * one_minus
        } else {
            a + half * one_minus
        };
        if x <= a || x >= b {
            return 0.0;
        }
        w * f(x)
    };

    let mut step = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * step <= T_MAX {
        let t = k as f64 * step;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = half * step * sum;
    let reference = scale.abs().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_LEVEL {
        step *= 0.5;
        let mut k = 1;
        while (k as f64) * step <= T_MAX {
            let t = k as f64 * step;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = half * step * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * reference.max(estimate.abs()) {
            break;
        }
    }
    estimate
}
