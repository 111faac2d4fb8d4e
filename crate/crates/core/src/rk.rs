//! Dormand-Prince 5(4) embedded Runge-Kutta stepper with the standard
//! fourth-order continuous extension, adaptive PI-free step control, and
//! a fixed-step driver for convergence-order measurements.

use crate::error::{Error, Result};
use nalgebra::SVector;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Error coefficients: b5 - b4 (embedded fourth order).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output auxiliary coefficients (Hairer's dopri5 CONTD5).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step's continuous extension on [t0, t0 + h].
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [SVector<f64, N>; 5],
}

impl<const N: usize> DenseSegment<N> {
    /// Fourth-order interpolant; `t` must lie within the segment.
    pub fn eval(&self, t: f64) -> SVector<f64, N> {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        self.rcont[0]
            + (self.rcont[1]
                + (self.rcont[2] + (self.rcont[3] + self.rcont[4] * th1) * theta) * th1)
                * theta
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Adaptive integration options.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

fn stage_sum<const N: usize>(k: &[SVector<f64, N>], a: &[f64]) -> SVector<f64, N> {
    let mut acc = k[0] * a[0];
    for (ki, ai) in k.iter().zip(a.iter()).skip(1) {
        if *ai != 0.0 {
            acc += ki * *ai;
        }
    }
    acc
}

fn error_norm<const N: usize>(
    err: &SVector<f64, N>,
    y0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    rtol: f64,
    atol: f64,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

/// Hairer-style first step heuristic.
fn initial_step<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    direction_span: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let sc = |v: &SVector<f64, N>, y: &SVector<f64, N>| -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let s = atol + rtol * y[i].abs();
            let r = v[i] / s;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    };
    let d0 = sc(y0, y0);
    let d1 = sc(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(direction_span);
    let y1 = y0 + f0 * h0;
    let f1 = f(t0 + h0, &y1)?;
    let d2 = sc(&(f1 - f0), y0) / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(direction_span))
}

/// Adaptive forward integration of dy/dt = f(t, y) from t0 to t_end.
///
/// `on_step` receives each accepted step's dense segment and may stop the
/// run early by returning false. Returns the final (t, y) and counters.
pub fn integrate_adaptive<const N: usize, F, G>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: SVector<f64, N>,
    opts: &StepOptions,
    mut on_step: G,
) -> Result<(f64, SVector<f64, N>, StepStats)>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    G: FnMut(&DenseSegment<N>) -> bool,
{
    if !(t_end > t0) {
        return Err(Error::Domain(format!(
            "integration span must be forward: [{t0}, {t_end}]"
        )));
    }
    let span = t_end - t0;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    let mut h = match opts.initial_step {
        Some(h) => h.min(span).min(opts.max_step),
        None => initial_step(&f, t, &y, &k1, span, opts.rtol, opts.atol)?.min(opts.max_step),
    };
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
    };
    let mut k = [SVector::<f64, N>::zeros(); 7];

    loop {
        if t >= t_end {
            return Ok((t, y, stats));
        }
        if stats.accepted + stats.rejected > opts.max_steps {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step budget {} exhausted", opts.max_steps),
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step size underflow (h = {h:.3e})"),
            });
        }
        let h_cur = h.min(t_end - t);

        k[0] = k1;
        k[1] = f(t + C[1] * h_cur, &(y + stage_sum(&k[..1], &A2) * h_cur))?;
        k[2] = f(t + C[2] * h_cur, &(y + stage_sum(&k[..2], &A3) * h_cur))?;
        k[3] = f(t + C[3] * h_cur, &(y + stage_sum(&k[..3], &A4) * h_cur))?;
        k[4] = f(t + C[4] * h_cur, &(y + stage_sum(&k[..4], &A5) * h_cur))?;
        k[5] = f(t + C[5] * h_cur, &(y + stage_sum(&k[..5], &A6) * h_cur))?;
        let y_new = y + stage_sum(&k[..6], &A7) * h_cur;
        k[6] = f(t + h_cur, &y_new)?;

        let err_vec = stage_sum(&k, &E) * h_cur;
        let err = error_norm(&err_vec, &y, &y_new, opts.rtol, opts.atol);

        if err <= 1.0 {
            // Dense output coefficients for this step.
            let ydiff = y_new - y;
            let bspl = k[0] * h_cur - ydiff;
            let seg = DenseSegment {
                t0: t,
                h: h_cur,
                rcont: [
                    y,
                    ydiff,
                    bspl,
                    -(k[6] * h_cur) + ydiff - bspl,
                    stage_sum(&k, &D) * h_cur,
                ],
            };
            t += h_cur;
            y = y_new;
            k1 = k[6];
            stats.accepted += 1;
            if !on_step(&seg) {
                return Ok((t, y, stats));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h_cur * factor).min(opts.max_step);
        } else {
            stats.rejected += 1;
            h = h_cur * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
}

/// Fixed-step driver over the same method, for order measurements.
pub fn integrate_fixed<const N: usize, F>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let n_steps = ((t_end - t0) / h).round().max(1.0) as usize;
    let h = (t_end - t0) / n_steps as f64;
    let mut t = t0;
    let mut y = y0;
    let mut k = [SVector::<f64, N>::zeros(); 7];
    for _ in 0..n_steps {
        k[0] = f(t, &y)?;
        k[1] = f(t + C[1] * h, &(y + stage_sum(&k[..1], &A2) * h))?;
        k[2] = f(t + C[2] * h, &(y + stage_sum(&k[..2], &A3) * h))?;
        k[3] = f(t + C[3] * h, &(y + stage_sum(&k[..3], &A4) * h))?;
        k[4] = f(t + C[4] * h, &(y + stage_sum(&k[..4], &A5) * h))?;
        k[5] = f(t + C[5] * h, &(y + stage_sum(&k[..5], &A6) * h))?;
        y += stage_sum(&k[..6], &A7) * h;
        t += h;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    fn sho(t: f64, y: &Vector2<f64>) -> Result<Vector2<f64>> {
        let _ = t;
        Ok(Vector2::new(y[1], -y[0]))
    }

    #[test]
    fn oscillator_one_period() {
        let y0 = Vector2::new(1.0, 0.0);
        let t_end = 2.0 * std::f64::consts::PI;
        let opts = StepOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let (t, y, stats) = integrate_adaptive(sho, 0.0, t_end, y0, &opts, |_| true).unwrap();
        assert_relative_eq!(t, t_end);
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-9);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let y0 = Vector2::new(0.0, 1.0);
        let opts = StepOptions::default();
        let mut worst: f64 = 0.0;
        integrate_adaptive(sho, 0.0, 3.0, y0, &opts, |seg| {
            for j in 0..5 {
                let t = seg.t0 + seg.h * j as f64 / 4.0;
                let v = seg.eval(t);
                worst = worst
                    .max((v[0] - t.sin()).abs())
                    .max((v[1] - t.cos()).abs());
            }
            true
        })
        .unwrap();
        assert!(worst < 1e-9, "dense output error {worst}");
    }

    #[test]
    fn fixed_step_order_at_least_four() {
        // Global error on the oscillator should scale like h^p, p >= 4
        // (the method is fifth order).
        let y0 = Vector2::new(1.0, 0.0);
        let t_end = 1.0f64;
        let exact = Vector2::new(t_end.cos(), -t_end.sin());
        // Two decades of h, kept above the roundoff floor; the order is
        // the least-squares slope of log(err) against log(h).
        let hs = [0.8, 0.4, 0.2, 0.1, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let y = integrate_fixed(sho, 0.0, t_end, y0, h).unwrap();
                (y - exact).norm()
            })
            .collect();
        let order = regression_slope(&hs, &errs);
        assert!(order >= 4.0, "observed order {order} in {errs:?}");
    }

    fn regression_slope(hs: &[f64], errs: &[f64]) -> f64 {
        let n = hs.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (&h, &e) in hs.iter().zip(errs) {
            let (x, y) = (h.ln(), e.ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn early_stop_via_callback() {
        let y0 = Vector2::new(1.0, 0.0);
        let opts = StepOptions::default();
        let (t, _, _) =
            integrate_adaptive(sho, 0.0, 100.0, y0, &opts, |seg| seg.t_end() < 1.0).unwrap();
        assert!(t < 2.0);
    }
}
