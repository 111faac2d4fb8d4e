//! The four time-dependent master-equation coefficients
//! omega_p^2(t), lambda(t), D_px(t), D_pp(t), their Markovian limits, and
//! independent time-quadrature oracles for each.
//!
//! Conventions: D_px carries the 1/(2 m omega0) normalization of its
//! defining integral, and D_pp is the bare integral of D1(s) cos(omega0 s);
//! the drive vector of the phase-space ODE is then (0, 2 D_px, D_pp/hbar).

use crate::bath::{dissipation_kernel, noise_kernel, BathSpec, KernelEvalConfig, KernelMethod};
use crate::error::{Error, Result};
use crate::matsubara::MatsubaraKernel;
use crate::numerics::int_exp_trig;
use crate::quad;
use serde::{Deserialize, Serialize};

/// Time argument for coefficient evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimePoint {
    At(f64),
    Asymptotic,
}

/// The four coefficients at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub omega_p_sq: f64,
    pub lambda: f64,
    pub d_px: f64,
    pub d_pp: f64,
    pub evaluated_at: TimePoint,
    /// Set when k_B T < hbar omega0, where the Matsubara series converge
    /// slowly and evaluations cost more terms.
    pub low_temperature: bool,
}

/// Cached evaluator for repeated coefficient queries on one bath.
///
/// Construction performs the one-time Matsubara lattice sums; per-call
/// work is a geometrically decaying transient series. All methods are
/// pure and the evaluator is freely shareable across threads.
#[derive(Debug, Clone)]
pub struct CoefficientEvaluator {
    bath: BathSpec,
    kernel: MatsubaraKernel,
}

impl CoefficientEvaluator {
    pub fn new(bath: &BathSpec, cfg: &KernelEvalConfig) -> Result<Self> {
        Ok(CoefficientEvaluator {
            bath: *bath,
            kernel: MatsubaraKernel::new(bath, cfg)?,
        })
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Domain(format!("coefficients need t >= 0, got {t}")));
        }
        Ok(())
    }

    /// omega_p^2(t) = omega_b^2 - 2 gamma Omega^2 int_0^t e^{-Omega s} cos(omega0 s) ds.
    pub fn omega_p_squared(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let b = &self.bath;
        let ic = int_exp_trig(b.cutoff, b.omega0, t).re;
        Ok(b.omega_b_sq() - 2.0 * b.gamma * b.cutoff * b.cutoff * ic)
    }

    /// lambda(t) = (gamma Omega^2 / omega0) int_0^t e^{-Omega s} sin(omega0 s) ds.
    ///
    /// Strictly positive for t > 0 when gamma > 0; evaluated through a
    /// cancellation-free route so the sign survives roundoff, and checked
    /// at runtime.
    pub fn lambda(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let b = &self.bath;
        let is = int_exp_trig(b.cutoff, b.omega0, t).im;
        // + 0.0 normalizes the signed zero at t = 0.
        let lambda = b.gamma * b.cutoff * b.cutoff / b.omega0 * is + 0.0;
        assert!(
            lambda >= 0.0,
            "damping coefficient lost positivity: lambda({t}) = {lambda}"
        );
        Ok(lambda)
    }

    pub fn d_px(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.kernel.coefficients_at(t)?.0)
    }

    pub fn d_pp(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.kernel.coefficients_at(t)?.1)
    }

    /// All four coefficients at time t.
    pub fn set_at(&self, t: f64) -> Result<CoefficientSet> {
        self.check_t(t)?;
        let (d_px, d_pp) = self.kernel.coefficients_at(t)?;
        Ok(CoefficientSet {
            omega_p_sq: self.omega_p_squared(t)?,
            lambda: self.lambda(t)?,
            d_px,
            d_pp,
            evaluated_at: TimePoint::At(t),
            low_temperature: self.is_low_temperature(),
        })
    }

    /// The t -> infinity (Markovian) coefficient values, from analytic
    /// limits rather than large-t sampling.
    pub fn markovian(&self) -> CoefficientSet {
        CoefficientSet {
            omega_p_sq: self.kernel.omega_p2_m,
            lambda: self.kernel.lambda_m,
            d_px: self.kernel.dpx_m,
            d_pp: self.kernel.dpp_m,
            evaluated_at: TimePoint::Asymptotic,
            low_temperature: self.is_low_temperature(),
        }
    }

    fn is_low_temperature(&self) -> bool {
        self.bath.thermal_energy() < self.bath.hbar * self.bath.omega0
    }
}

/// Free-function form of [`CoefficientEvaluator::omega_p_squared`].
pub fn omega_p_squared(bath: &BathSpec, t: f64) -> Result<f64> {
    bath.validate()?;
    let b = bath;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("coefficients need t >= 0, got {t}")));
    }
    let ic = int_exp_trig(b.cutoff, b.omega0, t).re;
    Ok(b.omega_b_sq() - 2.0 * b.gamma * b.cutoff * b.cutoff * ic)
}

/// Free-function form of [`CoefficientEvaluator::lambda`].
pub fn lambda_coeff(bath: &BathSpec, t: f64) -> Result<f64> {
    bath.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Domain(format!("coefficients need t >= 0, got {t}")));
    }
    let is = int_exp_trig(bath.cutoff, bath.omega0, t).im;
    let lambda = bath.gamma * bath.cutoff * bath.cutoff / bath.omega0 * is + 0.0;
    assert!(lambda >= 0.0, "lambda({t}) = {lambda} < 0");
    Ok(lambda)
}

pub fn d_px(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    CoefficientEvaluator::new(bath, cfg)?.d_px(t)
}

pub fn d_pp(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    CoefficientEvaluator::new(bath, cfg)?.d_pp(t)
}

pub fn markovian_coefficients(bath: &BathSpec, cfg: &KernelEvalConfig) -> Result<CoefficientSet> {
    Ok(CoefficientEvaluator::new(bath, cfg)?.markovian())
}

// ---------------------------------------------------------------------
// Quadrature oracles. These integrate the defining time integrals with
// adaptive Gauss-Kronrod panels and never touch the closed-form
// expressions they are meant to check.

/// Oracle: omega_b^2 - (2/m) int_0^t D(s) cos(omega0 s) ds.
pub fn omega_p_squared_quadrature(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    let f = |s: f64| noise_kernel(bath, s).unwrap_or(0.0) * (bath.omega0 * s).cos();
    let scale = bath.mass * bath.gamma * bath.cutoff;
    let integral = quad::integrate(f, 0.0, t, cfg.quad_rel_tol, scale * 1e-15, 40_000)?;
    Ok(bath.omega_b_sq() - 2.0 / bath.mass * integral)
}

/// Oracle: (1/(m omega0)) int_0^t D(s) sin(omega0 s) ds.
pub fn lambda_quadrature(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    let f = |s: f64| noise_kernel(bath, s).unwrap_or(0.0) * (bath.omega0 * s).sin();
    let scale = bath.mass * bath.gamma * bath.cutoff;
    let integral = quad::integrate(f, 0.0, t, cfg.quad_rel_tol, scale * 1e-15, 40_000)?;
    Ok(integral / (bath.mass * bath.omega0))
}

fn d1_for_oracle(bath: &BathSpec, cfg: &KernelEvalConfig) -> impl Fn(f64) -> f64 {
    // The inner kernel only needs ~1e-11; anything tighter makes the
    // low-temperature lattice sums needlessly long inside quadrature.
    let mut inner = *cfg;
    inner.series_rel_tol = inner.series_rel_tol.max(1e-11);
    let kernel = MatsubaraKernel::new(bath, &inner).expect("validated by caller");
    move |s: f64| kernel.d1(s).unwrap_or(f64::NAN)
}

/// Oracle: (1/(2 m omega0)) int_0^t D1(s) sin(omega0 s) ds.
pub fn d_px_quadrature(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    cfg.validate()?;
    let d1 = d1_for_oracle(bath, cfg);
    let f = |s: f64| d1(s) * (bath.omega0 * s).sin();
    let scale = bath.mass * bath.gamma * bath.cutoff * bath.cutoff * t.max(1.0 / bath.cutoff);
    let integral = quad::integrate(f, 0.0, t, cfg.quad_rel_tol, scale * 1e-13, 60_000)?;
    Ok(integral / (2.0 * bath.mass * bath.omega0))
}

/// Oracle: int_0^t D1(s) cos(omega0 s) ds.
pub fn d_pp_quadrature(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    cfg.validate()?;
    let d1 = d1_for_oracle(bath, cfg);
    let f = |s: f64| d1(s) * (bath.omega0 * s).cos();
    let scale = bath.mass * bath.gamma * bath.cutoff * bath.cutoff * t.max(1.0 / bath.cutoff);
    quad::integrate(f, 0.0, t, cfg.quad_rel_tol, scale * 1e-13, 60_000)
}

/// Fully independent double-quadrature oracle for D_pp: the inner kernel
/// is itself evaluated by frequency quadrature. Expensive; used for one
/// deep consistency check.
pub fn d_pp_double_quadrature(bath: &BathSpec, t: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    cfg.validate()?;
    let mut inner = *cfg;
    inner.quad_rel_tol = (cfg.quad_rel_tol * 0.1).max(1e-12);
    let f = |s: f64| {
        dissipation_kernel(bath, s, &inner, KernelMethod::Quadrature).unwrap_or(f64::NAN)
            * (bath.omega0 * s).cos()
    };
    let scale = bath.mass * bath.gamma * bath.cutoff * bath.cutoff * t.max(1.0 / bath.cutoff);
    // The log singularity at s = 0 sits under an integrable envelope; cap
    // the refinement rather than chasing it to machine precision.
    quad::integrate(f, 1e-9 * t, t, 1e-8, scale * 1e-10, 20_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bath() -> BathSpec {
        BathSpec::reduced(0.1, 10.0, 1.0).unwrap()
    }

    #[test]
    fn omega_p_sq_limits() {
        let b = bath();
        let ev = CoefficientEvaluator::new(&b, &KernelEvalConfig::default()).unwrap();
        assert_relative_eq!(ev.omega_p_squared(0.0).unwrap(), b.omega_b_sq());
        let om2 = b.omega0 * b.omega0;
        let c2 = b.cutoff * b.cutoff;
        let expect_inf = om2 + 2.0 * b.gamma * b.cutoff * om2 / (c2 + om2);
        assert_relative_eq!(
            ev.omega_p_squared(300.0).unwrap(),
            expect_inf,
            max_relative = 1e-12
        );
        assert_relative_eq!(ev.markovian().omega_p_sq, expect_inf, max_relative = 1e-14);

        let free = BathSpec::reduced(0.0, 10.0, 1.0).unwrap();
        let ev0 = CoefficientEvaluator::new(&free, &KernelEvalConfig::default()).unwrap();
        for t in [0.0, 0.5, 3.0, 100.0] {
            assert_relative_eq!(ev0.omega_p_squared(t).unwrap(), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn lambda_limits_and_positivity() {
        let b = bath();
        let ev = CoefficientEvaluator::new(&b, &KernelEvalConfig::default()).unwrap();
        assert_eq!(ev.lambda(0.0).unwrap(), 0.0);
        let c2 = b.cutoff * b.cutoff;
        let expect_inf = b.gamma * c2 / (c2 + 1.0);
        assert_relative_eq!(ev.lambda(300.0).unwrap(), expect_inf, max_relative = 1e-12);
        // Positive over fourteen decades of t, including the strongly
        // cancelling small-t regime.
        for k in -140..=20 {
            let t = 10f64.powf(k as f64 / 10.0);
            assert!(ev.lambda(t).unwrap() > 0.0, "lambda({t}) not positive");
        }
        // Large-cutoff limit: lambda(inf) -> gamma.
        let wide = BathSpec::reduced(0.1, 1000.0, 1.0).unwrap();
        let evw = CoefficientEvaluator::new(&wide, &KernelEvalConfig::default()).unwrap();
        assert_relative_eq!(
            evw.markovian().lambda / wide.gamma,
            1.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn coefficients_zero_at_zero() {
        let ev = CoefficientEvaluator::new(&bath(), &KernelEvalConfig::default()).unwrap();
        assert_eq!(ev.d_px(0.0).unwrap(), 0.0);
        assert_eq!(ev.d_pp(0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_match_quadrature_oracles() {
        let cfg = KernelEvalConfig::default();
        for temp in [0.1, 1.0, 100.0] {
            let b = BathSpec::reduced(0.1, 10.0, temp).unwrap();
            let ev = CoefficientEvaluator::new(&b, &cfg).unwrap();
            for t in [0.1, 1.0, 10.0] {
                let w_c = ev.omega_p_squared(t).unwrap();
                let w_q = omega_p_squared_quadrature(&b, t, &cfg).unwrap();
                assert_relative_eq!(w_c, w_q, max_relative = 1e-8);

                let l_c = ev.lambda(t).unwrap();
                let l_q = lambda_quadrature(&b, t, &cfg).unwrap();
                assert_relative_eq!(l_c, l_q, max_relative = 1e-8);

                let px_c = ev.d_px(t).unwrap();
                let px_q = d_px_quadrature(&b, t, &cfg).unwrap();
                assert_relative_eq!(px_c, px_q, max_relative = 1e-8, epsilon = 1e-12);

                let pp_c = ev.d_pp(t).unwrap();
                let pp_q = d_pp_quadrature(&b, t, &cfg).unwrap();
                assert_relative_eq!(pp_c, pp_q, max_relative = 1e-8, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn double_quadrature_spot_check() {
        let b = bath();
        let cfg = KernelEvalConfig::default();
        let t = 1.0;
        let deep = d_pp_double_quadrature(&b, t, &cfg).unwrap();
        let ev = CoefficientEvaluator::new(&b, &cfg).unwrap();
        assert_relative_eq!(ev.d_pp(t).unwrap(), deep, max_relative = 1e-6);
    }

    #[test]
    fn markovian_agrees_with_large_t() {
        let cfg = KernelEvalConfig::default();
        let b = bath();
        let ev = CoefficientEvaluator::new(&b, &cfg).unwrap();
        let m = ev.markovian();
        let t_large = 50.0 / b.gamma.min(b.cutoff).min(b.omega0);
        let at = ev.set_at(t_large).unwrap();
        assert_relative_eq!(at.omega_p_sq, m.omega_p_sq, max_relative = 1e-6);
        assert_relative_eq!(at.lambda, m.lambda, max_relative = 1e-6);
        assert_relative_eq!(at.d_px, m.d_px, max_relative = 1e-6);
        assert_relative_eq!(at.d_pp, m.d_pp, max_relative = 1e-6);
    }

    #[test]
    fn markovian_gamma_zero_all_dissipative_vanish() {
        let b = BathSpec::reduced(0.0, 10.0, 1.0).unwrap();
        let m = markovian_coefficients(&b, &KernelEvalConfig::default()).unwrap();
        assert_eq!(m.lambda, 0.0);
        assert_eq!(m.d_px, 0.0);
        assert_eq!(m.d_pp, 0.0);
        assert_relative_eq!(m.omega_p_sq, 1.0);
    }

    #[test]
    fn low_temperature_coth_limit() {
        // Omega >> omega0 at k_B T = hbar omega0:
        // D_pp^M -> m gamma omega0 coth(hbar omega0/(2 k_B T)).
        let b = BathSpec::reduced(0.1, 100.0, 1.0).unwrap();
        let m = markovian_coefficients(&b, &KernelEvalConfig::default()).unwrap();
        let expect = b.mass * b.gamma * b.omega0 / (0.5f64).tanh();
        assert_relative_eq!(m.d_pp / expect, 1.0, max_relative = 1e-2);
        assert!(m.low_temperature == false);
    }

    #[test]
    fn convergence_envelope_beyond_ten_cutoff_times() {
        // |coefficient(t) - Markovian value| decays inside an exponential
        // envelope set by the slower of Omega and the Matsubara rate.
        for temp in [0.5, 5.0] {
            let b = BathSpec::reduced(0.2, 10.0, temp).unwrap();
            let ev = CoefficientEvaluator::new(&b, &KernelEvalConfig::default()).unwrap();
            let m = ev.markovian();
            let rate = b.cutoff.min(b.nu1());
            let t0 = 10.0 / b.cutoff;
            let d0 = (ev.d_pp(t0).unwrap() - m.d_pp).abs()
                + (ev.d_px(t0).unwrap() - m.d_px).abs()
                + (ev.lambda(t0).unwrap() - m.lambda).abs()
                + (ev.omega_p_squared(t0).unwrap() - m.omega_p_sq).abs();
            for k in 1..=4 {
                let t = t0 + k as f64 * 0.5;
                let d = (ev.d_pp(t).unwrap() - m.d_pp).abs()
                    + (ev.d_px(t).unwrap() - m.d_px).abs()
                    + (ev.lambda(t).unwrap() - m.lambda).abs()
                    + (ev.omega_p_squared(t).unwrap() - m.omega_p_sq).abs();
                let envelope = 3.0 * d0 * (-rate * (t - t0)).exp() + 1e-13;
                assert!(
                    d <= envelope,
                    "temp {temp}, t {t}: {d} vs envelope {envelope}"
                );
            }
        }
    }

    #[test]
    fn extreme_low_temperature_reports_truncation() {
        // The Matsubara lattice would need ~10^12 direct terms here; the
        // evaluator must refuse with a truncation error, not hang.
        let b = BathSpec::reduced(0.1, 10.0, 1e-12).unwrap();
        match CoefficientEvaluator::new(&b, &KernelEvalConfig::default()) {
            Err(Error::SeriesTruncation { .. }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn continuity_in_time() {
        let b = BathSpec::reduced(0.2, 10.0, 0.5).unwrap();
        let ev = CoefficientEvaluator::new(&b, &KernelEvalConfig::default()).unwrap();
        let f = b.mass * b.gamma * b.cutoff * b.cutoff;
        // Exact slope bounds: |d omega_p^2/dt| <= 2F/m, |d lambda/dt| <=
        // F/(m omega0), |d D_pp/dt| = |D1(t)| bounded on t >= 0.05.
        let d1_sup = ev.kernel.d1(0.05).unwrap().abs() * 1.5;
        let dt = 1e-3 / b.cutoff;
        let mut prev = ev.set_at(0.05).unwrap();
        for k in 1..200 {
            let t = 0.05 + k as f64 * dt;
            let cur = ev.set_at(t).unwrap();
            assert!((cur.omega_p_sq - prev.omega_p_sq).abs() <= 2.0 * f / b.mass * dt * 1.01);
            assert!((cur.lambda - prev.lambda).abs() <= f / (b.mass * b.omega0) * dt * 1.01);
            assert!((cur.d_pp - prev.d_pp).abs() <= d1_sup * dt);
            assert!((cur.d_px - prev.d_px).abs() <= d1_sup * dt);
            prev = cur;
        }
    }
}
