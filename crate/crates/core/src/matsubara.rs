//! Matsubara-series evaluation of the dissipation kernel D1(s) and of the
//! two thermal master-equation coefficients it generates.
//!
//! Writing nu_n = 2 pi n k_B T / hbar, y = Omega/nu_1 and q = e^{-nu_1 s},
//! the kernel is
//!
//!   D1(s) = F [ nu_1/(pi Omega) e^{-Omega s}
//!               + (2/pi) sum_n (n q^n - y e^{-Omega s}) / (n^2 - y^2) ],
//!   F = m gamma Omega^2.
//!
//! The term with n closest to y is always paired with the matching
//! e^{-Omega s} piece so that the removable pole at Omega = nu_n never
//! amplifies roundoff; the remaining 1/n^2 pieces are summed with
//! Euler-Maclaurin tail closures. The same decomposition, integrated
//! against e^{i omega0 t}, yields D_px(t) and D_pp(t) in one complex pass,
//! split as (Markovian limit) + (decaying transient).

use crate::bath::{BathSpec, KernelEvalConfig};
use crate::error::{Error, Result};
use crate::numerics::{tail_inv_n2, tail_inv_n3, tail_log_pair, transient_exp_trig};
use num_complex::Complex64;
use std::f64::consts::PI;

// Past this many log-decades of q^n the geometric factor is below 1e-18.
const GEO_DECAY_SPAN: f64 = 41.5;
// Threshold on |n0 - y| below which divided differences switch to the
// analytic derivative at the midpoint.
const NEAR_POLE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub(crate) struct MatsubaraKernel {
    mass: f64,
    omega0: f64,
    gamma: f64,
    cutoff: f64,
    nu1: f64,
    /// Omega / nu_1.
    y: f64,
    /// Kernel scale m gamma Omega^2.
    f_scale: f64,
    /// Index of the Matsubara frequency closest to Omega (0 = none below 1/2).
    n0: usize,
    /// Sum over n != n0 of 1/(n^2 - y^2).
    s_alg_excl: f64,
    /// Small-time kernel model D1(s) ~ p_model - q_model ln(s).
    p_model: f64,
    q_model: f64,
    /// Matsubara terms needed before q^n falls below ~1e-18.
    cfg_max_terms: usize,
    series_rel_tol: f64,
    pub(crate) lambda_m: f64,
    pub(crate) omega_p2_m: f64,
    pub(crate) dpp_m: f64,
    pub(crate) dpx_m: f64,
}

impl MatsubaraKernel {
    pub(crate) fn new(bath: &BathSpec, cfg: &KernelEvalConfig) -> Result<Self> {
        bath.validate()?;
        cfg.validate()?;
        let nu1 = bath.nu1();
        let y = bath.cutoff / nu1;
        let w = bath.omega0 / nu1;
        let f_scale = bath.mass * bath.gamma * bath.cutoff * bath.cutoff;
        let n0 = if y >= 0.5 { y.round() as usize } else { 0 };

        // The lattice sums need ~4 max(y, w) direct terms before the
        // Euler-Maclaurin tails apply; temperatures low enough to push
        // that past the term budget are reported, not attempted.
        let needed = 4.0 * y.max(w).max(1.0);
        if needed + 2000.0 > cfg.max_series_terms as f64 {
            return Err(Error::SeriesTruncation {
                terms: cfg.max_series_terms,
                remainder: f64::INFINITY,
                tolerance: cfg.series_rel_tol,
            });
        }
        let n_direct = needed.ceil() as usize + 2000;
        let mut s_alg_excl = 0.0;
        let mut t3_excl0 = 0.0;
        let mut dpx_sum = 0.0;
        let y2 = y * y;
        let w2 = w * w;
        for n in 1..=n_direct {
            let nf = n as f64;
            dpx_sum += 1.0 / (nf + y) - nf / (nf * nf + w2);
            if n == n0 {
                continue;
            }
            let d = nf * nf - y2;
            s_alg_excl += 1.0 / d;
            t3_excl0 += 1.0 / (nf * d);
        }
        let a = n_direct as f64 + 0.5;
        s_alg_excl += tail_inv_n2(a, y);
        t3_excl0 += tail_inv_n3(a, y);
        dpx_sum += tail_log_pair(a, y, w);

        let om2 = bath.omega0 * bath.omega0;
        let c2 = bath.cutoff * bath.cutoff;
        let lambda_m = bath.gamma * c2 / (c2 + om2);
        let omega_p2_m = om2 + 2.0 * bath.gamma * bath.cutoff * om2 / (c2 + om2);
        // D_pp^M has the exact resonance form (pi/2) J(omega0) coth(...):
        // the Matsubara sum telescopes to it identically.
        let x0 = bath.hbar * bath.omega0 / (2.0 * bath.thermal_energy());
        let coth = 1.0 / x0.tanh();
        let dpp_m = bath.mass * bath.gamma * bath.omega0 * coth * c2 / (c2 + om2);
        let dpx_m =
            bath.gamma * c2 / (2.0 * (c2 + om2)) * (nu1 / (PI * bath.cutoff) + 2.0 / PI * dpx_sum);

        // Small-time model constants: D1(s) = p_model - q_model ln s + O(s^2 ln s).
        let (pair0, inv_n0) = if n0 > 0 {
            (1.0 / (n0 as f64 + y), 1.0 / n0 as f64)
        } else {
            (0.0, 0.0)
        };
        let p_model = f_scale
            * (nu1 / (PI * bath.cutoff)
                + 2.0 / PI * (pair0 - inv_n0 - nu1.ln() + y2 * t3_excl0 - y * s_alg_excl));
        let q_model = f_scale * 2.0 / PI;

        Ok(MatsubaraKernel {
            mass: bath.mass,
            omega0: bath.omega0,
            gamma: bath.gamma,
            cutoff: bath.cutoff,
            nu1,
            y,
            f_scale,
            n0,
            s_alg_excl,
            p_model,
            q_model,
            cfg_max_terms: cfg.max_series_terms,
            series_rel_tol: cfg.series_rel_tol,
            lambda_m,
            omega_p2_m,
            dpp_m,
            dpx_m,
        })
    }

    /// Dissipation kernel D1(s) for s > 0 by the Matsubara series.
    pub(crate) fn d1(&self, s: f64) -> Result<f64> {
        if self.gamma == 0.0 {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Err(Error::SeriesTruncation {
                terms: 0,
                remainder: f64::INFINITY,
                tolerance: self.series_rel_tol,
            });
        }
        let arg = self.nu1 * s;
        let one_minus_q = -(-arg).exp_m1();
        let log_term = -one_minus_q.ln();
        let q = (-arg).exp();
        let qy = (-self.cutoff * s).exp();
        let y = self.y;
        let y2 = y * y;

        let mut sum_part =
            log_term + y2 * self.t3(s, q, log_term.abs())? - y * qy * self.s_alg_excl;
        if self.n0 > 0 {
            let n0f = self.n0 as f64;
            let qn0 = (-arg * n0f).exp();
            sum_part -= qn0 / n0f;
            // Paired pole term (n0 q^{n0} - y q^y)/(n0^2 - y^2).
            let dd = if (n0f - y).abs() < NEAR_POLE {
                let beta = 0.5 * (n0f + y);
                (-arg * beta).exp() * (1.0 - arg * beta)
            } else {
                (qn0 * n0f - qy * y) / (n0f - y)
            };
            sum_part += dd / (n0f + y);
        }
        Ok(self.f_scale * (self.nu1 / (PI * self.cutoff) * qy + 2.0 / PI * sum_part))
    }

    /// Absolutely convergent series sum over n != n0 of q^n/(n(n^2-y^2)).
    fn t3(&self, _s: f64, q: f64, scale: f64) -> Result<f64> {
        let y = self.y;
        let y2 = y * y;
        let tol_abs = self.series_rel_tol * (1.0 + scale) / y2.max(1.0);
        let n_min = (4.0 * y.max(1.0)) as usize + 8;
        let mut acc = 0.0;
        let mut qn = 1.0;
        let mut n = 0usize;
        let mut bound = f64::INFINITY;
        loop {
            n += 1;
            qn *= q;
            if n > self.cfg_max_terms {
                return Err(Error::SeriesTruncation {
                    terms: n - 1,
                    remainder: bound * y2.max(1.0),
                    tolerance: self.series_rel_tol,
                });
            }
            if n != self.n0 {
                let nf = n as f64;
                acc += qn / (nf * (nf * nf - y2));
            }
            if qn < 1e-305 {
                break;
            }
            if n >= n_min && n % 64 == 0 {
                bound = qn * tail_inv_n3(n as f64 + 0.5, y);
                if bound < tol_abs {
                    break;
                }
            }
        }
        Ok(acc)
    }

    /// (D_px(t), D_pp(t)) for t >= 0.
    pub(crate) fn coefficients_at(&self, t: f64) -> Result<(f64, f64)> {
        if self.gamma == 0.0 || t == 0.0 {
            return Ok((0.0, 0.0));
        }
        let arg = self.nu1 * t;
        if arg * self.cfg_max_terms as f64 <= GEO_DECAY_SPAN {
            // Geometric decay too slow for the series budget: use the
            // short-time kernel model, exact up to O((nu1 t)^2 ln t).
            let ln_t = t.ln();
            let d_pp = self.p_model * t + self.q_model * t * (1.0 - ln_t);
            let d_px = t * t / (4.0 * self.mass) * (self.p_model + self.q_model * (0.5 - ln_t));
            return Ok((d_px, d_pp));
        }

        let w0 = self.omega0;
        let y = self.y;
        let y2 = y * y;
        let phi_om = transient_exp_trig(self.cutoff, w0, t);
        let exp_i = Complex64::from_polar(1.0, w0 * t);
        let q = (-arg).exp();

        let w_scale =
            (self.dpp_m.abs() + 2.0 * self.mass * w0 * self.dpx_m.abs()) / self.f_scale + 1e-30;
        let tol_abs = self.series_rel_tol * w_scale;

        let mut sum = Complex64::new(0.0, 0.0);
        let mut qn = 1.0;
        let mut n = 0usize;
        let n_min = (4.0 * y.max(1.0)) as usize + 8;
        let mut bound = f64::INFINITY;
        loop {
            n += 1;
            qn *= q;
            if n > self.cfg_max_terms {
                return Err(Error::SeriesTruncation {
                    terms: n - 1,
                    remainder: bound,
                    tolerance: self.series_rel_tol,
                });
            }
            if n != self.n0 {
                let nf = n as f64;
                let zn = Complex64::new(self.nu1 * nf, -w0);
                let phi = -qn * exp_i / zn;
                sum += nf / (nf * nf - y2) * phi;
            }
            if qn < 1e-305 {
                break;
            }
            if n >= n_min && n % 64 == 0 {
                bound = qn / self.nu1 * tail_inv_n2(n as f64 + 0.5, y);
                if bound < tol_abs {
                    break;
                }
            }
        }

        let mut pair = Complex64::new(0.0, 0.0);
        if self.n0 > 0 {
            let n0f = self.n0 as f64;
            pair = if (n0f - y).abs() < NEAR_POLE {
                // h(beta) = beta phi(nu1 beta); divided difference ->
                // h'(midpoint) with h' = e^{-zt}(-z + beta nu1 (tz+1))/z^2.
                let beta = 0.5 * (n0f + y);
                let z = Complex64::new(self.nu1 * beta, -w0);
                let h_prime = (-z * t).exp() * (-z + beta * self.nu1 * (t * z + 1.0)) / (z * z);
                h_prime / (n0f + y)
            } else {
                let zn = Complex64::new(self.nu1 * n0f, -w0);
                let phi_n0 = -(-arg * n0f).exp() * exp_i / zn;
                (n0f * phi_n0 - y * phi_om) / ((n0f - y) * (n0f + y))
            };
        }

        let w_total = self.nu1 / (PI * self.cutoff) * phi_om
            + 2.0 / PI * (pair + sum - y * self.s_alg_excl * phi_om);
        let d_pp = self.dpp_m + self.f_scale * w_total.re;
        let d_px = self.dpx_m + self.f_scale * w_total.im / (2.0 * self.mass * w0);
        Ok((d_px, d_pp))
    }
}
