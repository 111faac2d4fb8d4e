//! Adaptive Gauss-Kronrod quadrature and an oscillatory semi-infinite
//! integrator (panels between trig zeros, Euler-accelerated tail).
//!
//! These routines back the `quadrature` evaluation paths and the oracle
//! tests; they are deliberately independent of the closed-form kernel and
//! coefficient expressions they are used to check.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod nodes (abscissae >= 0 on [-1, 1]) and weights,
// with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_27,
    0.000_000_000_000_000_0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_69,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 15(7) evaluation on [a, b]: (value, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    // Standard QUADPACK-style sharpening of the raw difference.
    let scale = (200.0 * err / (value.abs() + 1e-300)).min(1.0);
    (value, err * scale.sqrt().max(1e-6))
}

#[derive(PartialEq)]
struct Interval {
    err: f64,
    value: f64,
    a: f64,
    b: f64,
}

impl Eq for Interval {}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Adaptive integration of `f` over the finite interval [a, b].
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate satisfies `|err| <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("non-finite interval".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let fref: &dyn Fn(f64) -> f64 = &f;
    let (v0, e0) = gk15(fref, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval {
        err: e0,
        value: v0,
        a,
        b,
    });
    let mut total_value = v0;
    let mut total_err = e0;
    let mut n = 1usize;
    while total_err > abs_tol.max(rel_tol * total_value.abs()) {
        if n >= max_intervals {
            return Err(Error::Quadrature(format!(
                "tolerance not reached after {n} intervals (err {total_err:.3e}, value {total_value:.6e})"
            )));
        }
        let worst = heap.pop().expect("heap never empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // Interval width underflowed; accept what we have.
            heap.push(worst);
            break;
        }
        let (vl, el) = gk15(fref, worst.a, mid);
        let (vr, er) = gk15(fref, mid, worst.b);
        total_value += vl + vr - worst.value;
        total_err += el + er - worst.err;
        heap.push(Interval {
            err: el,
            value: vl,
            a: worst.a,
            b: mid,
        });
        heap.push(Interval {
            err: er,
            value: vr,
            a: mid,
            b: worst.b,
        });
        n += 1;
    }
    // Re-sum for a sharper value once the partition is fixed.
    Ok(heap.iter().map(|iv| iv.value).sum())
}

/// Trigonometric factor of an oscillatory integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// Integral over [0, infinity) of `envelope(w) * trig(w s)`.
///
/// The head `[0, max(first zero, head_min)]` is integrated adaptively;
/// after that, panels between consecutive zeros of the trig factor form
/// an alternating series whose partial sums are Euler-accelerated. This
/// converges even for envelopes decaying as slowly as 1/w, where a plain
/// cutoff would lose several digits.
pub fn oscillatory_semi_infinite<F: Fn(f64) -> f64>(
    envelope: F,
    trig: Trig,
    s: f64,
    head_min: f64,
    rel_tol: f64,
    abs_scale: f64,
) -> Result<f64> {
    if s <= 0.0 {
        return Err(Error::Quadrature(
            "oscillatory integrator requires s > 0".into(),
        ));
    }
    let g = |w: f64| {
        envelope(w)
            * match trig {
                Trig::Sin => (w * s).sin(),
                Trig::Cos => (w * s).cos(),
            }
    };
    let zero = |k: usize| match trig {
        Trig::Sin => k as f64 * std::f64::consts::PI / s,
        Trig::Cos => (k as f64 - 0.5) * std::f64::consts::PI / s,
    };

    // First zero index at or past head_min.
    let mut k0 = 1usize;
    while zero(k0) < head_min {
        k0 += 1;
    }
    let panel_tol = rel_tol / 10.0;
    let abs_tol = abs_scale * rel_tol / 10.0;
    let head = integrate(&g, 0.0, zero(k0), panel_tol, abs_tol, 20_000)?;

    const MAX_PANELS: usize = 60;
    let mut partial = Vec::with_capacity(MAX_PANELS);
    let mut acc = head;
    let mut small_streak = 0usize;
    for k in k0..k0 + MAX_PANELS {
        let u = integrate(&g, zero(k), zero(k + 1), panel_tol, abs_tol, 4_000)?;
        acc += u;
        partial.push(acc);
        if u.abs() < abs_scale * rel_tol * 1e-2 {
            small_streak += 1;
            if small_streak >= 3 {
                break;
            }
        } else {
            small_streak = 0;
        }
    }

    if partial.len() < 4 {
        return Ok(*partial.last().unwrap_or(&head));
    }
    // Euler transformation: repeated averaging of partial sums.
    let mut row = partial;
    let mut best = *row.last().unwrap();
    let mut best_err = f64::INFINITY;
    while row.len() > 1 {
        for j in 0..row.len() - 1 {
            row[j] = 0.5 * (row[j] + row[j + 1]);
        }
        row.pop();
        let spread = if row.len() > 1 {
            (row[row.len() - 1] - row[row.len() - 2]).abs()
        } else {
            best_err
        };
        if spread < best_err {
            best_err = spread;
            best = *row.last().unwrap();
        }
    }
    if best_err > (rel_tol * best.abs()).max(abs_scale * rel_tol) * 100.0 {
        return Err(Error::Quadrature(format!(
            "oscillatory tail not converged: spread {best_err:.3e} for value {best:.6e}"
        )));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x, 0.0, 1.0, 1e-12, 0.0, 100).unwrap();
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn log_endpoint_singularity() {
        let v = integrate(|x| x.ln(), 0.0, 1.0, 1e-10, 1e-12, 20_000).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-9);
    }

    #[test]
    fn oscillatory_lorentzian_sine() {
        // int_0^inf w/(1+w^2) sin(w s) dw = (pi/2) e^{-s}
        for &s in &[0.3, 1.0, 4.0] {
            let v =
                oscillatory_semi_infinite(|w| w / (1.0 + w * w), Trig::Sin, s, 30.0, 1e-10, 1.0)
                    .unwrap();
            assert_relative_eq!(
                v,
                0.5 * PI * (-s).exp(),
                max_relative = 1e-8,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn oscillatory_lorentzian_cosine() {
        // int_0^inf cos(w s)/(1+w^2) dw = (pi/2) e^{-s}
        for &s in &[0.2, 1.0, 3.0] {
            let v =
                oscillatory_semi_infinite(|w| 1.0 / (1.0 + w * w), Trig::Cos, s, 30.0, 1e-10, 1.0)
                    .unwrap();
            assert_relative_eq!(
                v,
                0.5 * PI * (-s).exp(),
                max_relative = 1e-8,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn oscillatory_slow_envelope() {
        // int_0^inf sin(w s)/w dw = pi/2 for any s > 0; the 1/w envelope is
        // the hardest decay this integrator must handle.
        let v = oscillatory_semi_infinite(
            |w| if w == 0.0 { 0.0 } else { 1.0 / w },
            Trig::Sin,
            1.0,
            10.0,
            1e-9,
            1.0,
        )
        .unwrap();
        assert_relative_eq!(v, 0.5 * PI, max_relative = 1e-7);
    }
}
