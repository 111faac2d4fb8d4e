//! Scalar numerical helpers shared across the kernel and coefficient
//! evaluators: cancellation-safe exponential-trigonometric integrals and
//! Euler-Maclaurin tail sums for slowly decaying series.

use num_complex::Complex64;

/// exp(z) - 1 without cancellation for small |z|.
pub fn expm1_c(z: Complex64) -> Complex64 {
    if z.norm_sqr() < 0.25 {
        // Taylor series: z + z^2/2! + ... converges fast for |z| < 0.5.
        let mut term = z;
        let mut sum = z;
        for k in 2..40 {
            term *= z / k as f64;
            sum += term;
            if term.norm_sqr() < 1e-64 * sum.norm_sqr() {
                break;
            }
        }
        sum
    } else {
        z.exp() - Complex64::new(1.0, 0.0)
    }
}

/// Integral of e^{-mu s} e^{i w0 s} over s in [0, t].
///
/// The real part is the cosine integral, the imaginary part the sine
/// integral. Both are exact to roundoff for every regime of mu*t and
/// w0*t, including the strongly cancelling small-t limit.
pub fn int_exp_trig(mu: f64, w0: f64, t: f64) -> Complex64 {
    let z = Complex64::new(mu, -w0);
    if z.norm_sqr() == 0.0 {
        return Complex64::new(t, 0.0);
    }
    -expm1_c(-z * t) / z
}

/// Value of -e^{-z t}/z with z = mu - i w0: the difference between the
/// finite-time integral above and its t -> infinity limit 1/z.
pub fn transient_exp_trig(mu: f64, w0: f64, t: f64) -> Complex64 {
    let z = Complex64::new(mu, -w0);
    -(-z * t).exp() / z
}

/// Sum over n > N of 1/(n^2 - y^2), with a = N + 1/2 and a > y.
///
/// Midpoint Euler-Maclaurin: integral from a to infinity plus the first
/// derivative correction, accurate to ~(1/a^2)^2 relative.
pub fn tail_inv_n2(a: f64, y: f64) -> f64 {
    debug_assert!(a > y.abs());
    let integral = if y.abs() > 1e-30 {
        ((2.0 * y) / (a - y)).ln_1p() / (2.0 * y)
    } else {
        1.0 / a
    };
    let d = a * a - y * y;
    let fprime = -2.0 * a / (d * d);
    integral + fprime / 24.0
}

/// Sum over n > N of 1/(n (n^2 - y^2)), with a = N + 1/2 and a > y.
pub fn tail_inv_n3(a: f64, y: f64) -> f64 {
    debug_assert!(a > y.abs());
    let d = a * a - y * y;
    let y2 = y * y;
    let integral = if y2 > 1e-60 {
        (y2 / d).ln_1p() / (2.0 * y2)
    } else {
        1.0 / (2.0 * a * a)
    };
    // f(x) = 1/(x(x^2-y^2)); f'(x) = -(3x^2-y^2)/(x(x^2-y^2))^2
    let denom = a * d;
    let fprime = -(3.0 * a * a - y2) / (denom * denom);
    integral + fprime / 24.0
}

/// Sum over n > N of [1/(n+y) - n/(n^2 + w^2)], with a = N + 1/2.
///
/// Both pieces diverge logarithmically; their difference decays as 1/n^2
/// and its antiderivative ln((x+y)/sqrt(x^2+w^2)) vanishes at infinity.
pub fn tail_log_pair(a: f64, y: f64, w: f64) -> f64 {
    let integral = 0.5 * (a * a + w * w).ln() - (a + y).ln();
    let s1 = a + y;
    let s2 = a * a + w * w;
    let fprime = -1.0 / (s1 * s1) - (w * w - a * a) / (s2 * s2);
    integral + fprime / 24.0
}
