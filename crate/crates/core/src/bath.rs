//! Bath parameters, Ohmic Lorentz-Drude spectral density, and the two
//! bath correlation kernels, each evaluated both in closed form and by
//! independent quadrature.

use crate::error::{Error, Result};
use crate::matsubara::MatsubaraKernel;
use crate::quad::{self, Trig};
use serde::{Deserialize, Serialize};

/// Physical parameters of the oscillator-bath system.
///
/// All formulas carry `hbar`, `mass` and `k_b` explicitly, so any
/// consistent unit system works. The [`BathSpec::reduced`] constructor
/// builds the internal system hbar = m = omega0 = k_B = 1 in which the
/// dimensionless controls are gamma/omega0, cutoff/omega0 and
/// k_B T / (hbar omega0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Oscillator mass m.
    pub mass: f64,
    /// Bare oscillator frequency omega0.
    pub omega0: f64,
    /// Frequency-independent damping constant gamma.
    pub gamma: f64,
    /// Lorentz-Drude cutoff frequency Omega.
    pub cutoff: f64,
    /// Bath temperature T.
    pub temperature: f64,
    /// Reduced Planck constant.
    pub hbar: f64,
    /// Boltzmann constant.
    pub k_b: f64,
}

impl BathSpec {
    /// Bath in reduced units (hbar = m = omega0 = k_B = 1), parametrized
    /// by the dimensionless ratios gamma/omega0, Omega/omega0 and
    /// k_B T/(hbar omega0).
    pub fn reduced(gamma: f64, cutoff: f64, temperature: f64) -> Result<Self> {
        let spec = BathSpec {
            mass: 1.0,
            omega0: 1.0,
            gamma,
            cutoff,
            temperature,
            hbar: 1.0,
            k_b: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, f64, bool); 7] = [
            ("mass", self.mass, self.mass > 0.0),
            ("omega0", self.omega0, self.omega0 > 0.0),
            ("cutoff", self.cutoff, self.cutoff > 0.0),
            ("gamma", self.gamma, self.gamma >= 0.0),
            ("temperature", self.temperature, self.temperature > 0.0),
            ("hbar", self.hbar, self.hbar > 0.0),
            ("k_b", self.k_b, self.k_b > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidBath {
                    name,
                    value,
                    reason: "must be positive and finite (gamma may be zero)",
                });
            }
        }
        Ok(())
    }

    /// Shifted frequency squared omega_b^2 = omega0^2 + 2 gamma Omega,
    /// the t = 0 value of omega_p^2(t).
    pub fn omega_b_sq(&self) -> f64 {
        self.omega0 * self.omega0 + 2.0 * self.gamma * self.cutoff
    }

    /// Thermal energy k_B T.
    pub fn thermal_energy(&self) -> f64 {
        self.k_b * self.temperature
    }

    /// First Matsubara frequency nu_1 = 2 pi k_B T / hbar.
    pub fn nu1(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.thermal_energy() / self.hbar
    }
}

/// Numerical controls for kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEvalConfig {
    /// Relative tolerance for quadrature evaluations.
    pub quad_rel_tol: f64,
    /// Frequency sweep extent in units of the cutoff Omega.
    pub cutoff_multiplier: f64,
    /// Relative tolerance for Matsubara series truncation.
    pub series_rel_tol: f64,
    /// Hard cap on Matsubara terms before reporting a truncation error.
    pub max_series_terms: usize,
}

impl Default for KernelEvalConfig {
    fn default() -> Self {
        KernelEvalConfig {
            quad_rel_tol: 1e-10,
            cutoff_multiplier: 50.0,
            series_rel_tol: 1e-12,
            max_series_terms: 2_000_000,
        }
    }
}

impl KernelEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1.0) {
            return Err(Error::Config("quad_rel_tol must lie in (0, 1)".into()));
        }
        if !(self.series_rel_tol > 0.0 && self.series_rel_tol < 1.0) {
            return Err(Error::Config("series_rel_tol must lie in (0, 1)".into()));
        }
        if self.cutoff_multiplier < 1.0 {
            return Err(Error::Config("cutoff_multiplier must be >= 1".into()));
        }
        if self.max_series_terms == 0 {
            return Err(Error::Config("max_series_terms must be >= 1".into()));
        }
        Ok(())
    }
}

/// Evaluation route for the dissipation kernel D1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMethod {
    ClosedForm,
    Quadrature,
}

/// Ohmic spectral density with Lorentz-Drude cutoff:
/// J(w) = (2 m gamma / pi) w Omega^2 / (Omega^2 + w^2).
pub fn spectral_density(bath: &BathSpec, omega: f64) -> Result<f64> {
    bath.validate()?;
    if omega < 0.0 || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "spectral density needs omega >= 0, got {omega}"
        )));
    }
    let c2 = bath.cutoff * bath.cutoff;
    Ok(2.0 * bath.mass * bath.gamma / std::f64::consts::PI * omega * c2 / (c2 + omega * omega))
}

/// Noise kernel D(s) = integral of J(w) sin(w s) dw = m gamma Omega^2 e^{-Omega s}.
///
/// The value at s = 0 is the (right-)continuous limit of the sine
/// transform, which as an integral vanishes at exactly s = 0.
pub fn noise_kernel(bath: &BathSpec, s: f64) -> Result<f64> {
    bath.validate()?;
    if s < 0.0 || !s.is_finite() {
        return Err(Error::Domain(format!("noise kernel needs s >= 0, got {s}")));
    }
    Ok(bath.mass * bath.gamma * bath.cutoff * bath.cutoff * (-bath.cutoff * s).exp())
}

/// Noise kernel by direct frequency quadrature of J(w) sin(w s).
pub fn noise_kernel_quadrature(bath: &BathSpec, s: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    bath.validate()?;
    cfg.validate()?;
    if s < 0.0 || !s.is_finite() {
        return Err(Error::Domain(format!("noise kernel needs s >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let scale = bath.mass * bath.gamma * bath.cutoff * bath.cutoff;
    quad::oscillatory_semi_infinite(
        |w| spectral_density(bath, w).unwrap_or(0.0),
        Trig::Sin,
        s,
        cfg.cutoff_multiplier * bath.cutoff,
        cfg.quad_rel_tol,
        scale.max(1e-300),
    )
}

/// Integrand of the D1 definition: J(w) coth(hbar w / 2 k_B T), with the
/// removable w -> 0 singularity replaced by its finite limit.
pub(crate) fn d1_envelope(bath: &BathSpec, w: f64) -> f64 {
    let c2 = bath.cutoff * bath.cutoff;
    let lorentz = 2.0 * bath.mass * bath.gamma / std::f64::consts::PI * c2 / (c2 + w * w);
    let x = bath.hbar * w / (2.0 * bath.thermal_energy());
    // w * coth(x) = (2 k_B T / hbar) * (x coth x); x coth x -> 1 as x -> 0.
    let xcoth = if x < 1e-8 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    };
    lorentz * (2.0 * bath.thermal_energy() / bath.hbar) * xcoth
}

/// Dissipation kernel D1(s) = integral of J(w) coth(hbar w/2 k_B T) cos(w s) dw.
///
/// `ClosedForm` evaluates the Matsubara exponential series; `Quadrature`
/// integrates the defining frequency integral directly. D1 has a
/// logarithmic singularity at s = 0: the closed form reports a truncation
/// error there, while the quadrature returns the integral regularized at
/// the configured frequency cutoff.
pub fn dissipation_kernel(
    bath: &BathSpec,
    s: f64,
    cfg: &KernelEvalConfig,
    method: KernelMethod,
) -> Result<f64> {
    bath.validate()?;
    cfg.validate()?;
    if s < 0.0 || !s.is_finite() {
        return Err(Error::Domain(format!(
            "dissipation kernel needs s >= 0, got {s}"
        )));
    }
    match method {
        KernelMethod::ClosedForm => MatsubaraKernel::new(bath, cfg)?.d1(s),
        KernelMethod::Quadrature => {
            let scale = (bath.mass
                * bath.gamma
                * bath.cutoff
                * bath.cutoff
                * (1.0 + bath.nu1() / bath.cutoff))
                .max(1e-300);
            if s == 0.0 {
                return quad::integrate(
                    |w| d1_envelope(bath, w),
                    0.0,
                    cfg.cutoff_multiplier * bath.cutoff,
                    cfg.quad_rel_tol,
                    scale * cfg.quad_rel_tol,
                    40_000,
                );
            }
            quad::oscillatory_semi_infinite(
                |w| d1_envelope(bath, w),
                Trig::Cos,
                s,
                cfg.cutoff_multiplier * bath.cutoff,
                cfg.quad_rel_tol,
                scale,
            )
        }
    }
}
