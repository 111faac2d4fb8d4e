//! Gaussian density-operator algebra: the position-representation
//! parameters (A, B, C, D, E, N), the phase-space parameters c1..c6, the
//! exact conversion between them, the eigenvalue ladder, purity, and the
//! positivity verdict A >= C >= 0.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// C below this (in internal units) counts as loss of normalizability;
/// 1/(16 c1) would otherwise overflow.
pub const EPS_C: f64 = 1e-30;

/// Default relative slack on A >= C so pure states (A = C exactly) are
/// not flagged by roundoff.
pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-9;

/// Exponent coefficients of the position-representation Gaussian
/// rho(x, y) = exp{-A(x-y)^2 - iB(x^2-y^2) - C(x+y)^2 - iD(x-y) - E(x+y) - N}.
///
/// All six are real for a self-adjoint kernel. Normalizable iff C > 0;
/// a positive operator iff A >= C >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianXY {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub n: f64,
}

/// Exponent coefficients of the phase-space Gaussian
/// rho(k, Delta) = exp{-c1 k^2 - c2 k Delta - c3 Delta^2 - i c4 k - i c5 Delta - c6}.
///
/// This is the ODE state; trace(rho) = e^{-c6}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKD {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

/// Geometric eigenvalue ladder lambda_n = lambda0 * ratio^n of a
/// trace-one Gaussian kernel; depends only on A and C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDescriptor {
    pub lambda0: f64,
    pub ratio: f64,
}

impl SpectrumDescriptor {
    pub fn eigenvalue(&self, n: u32) -> f64 {
        self.lambda0 * self.ratio.powi(n as i32)
    }
}

/// Positivity classification of a Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Physical,
    Violated,
    NonNormalizable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Physical => "physical",
            Verdict::Violated => "violated",
            Verdict::NonNormalizable => "non_normalizable",
        })
    }
}

/// Forward map of the rho(k, Delta) transform applied to the XY Gaussian.
///
/// The quadratic block is the inverse of the published (A, B, C) relation;
/// the first-moment and normalization entries come from completing the
/// square in the defining x-integral, which converges only for C > 0.
pub fn xy_to_kd(g: &GaussianXY) -> Result<GaussianKD> {
    if !(g.c > EPS_C) {
        return Err(Error::NonNormalizable(format!(
            "xy_to_kd needs C > 0, got C = {}",
            g.c
        )));
    }
    let c1 = 1.0 / (16.0 * g.c);
    let c2 = -g.b / (4.0 * g.c);
    let c3 = g.a + g.b * g.b / (4.0 * g.c);
    let c4 = g.e / (4.0 * g.c);
    let c5 = g.d - g.b * g.e / (2.0 * g.c);
    let c6 = g.n - g.e * g.e / (4.0 * g.c) - 0.5 * (std::f64::consts::PI / (4.0 * g.c)).ln();
    Ok(GaussianKD {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    })
}

/// Inverse map: A = c3 - c2^2/(4 c1), B = -c2/(4 c1), C = 1/(16 c1),
/// with the first-moment block inverted accordingly.
///
/// c1 <= 0 means the k-Gaussian is no longer normalizable; that is a
/// physical diagnostic (runaway state), reported as an error here.
pub fn kd_to_xy(c: &GaussianKD) -> Result<GaussianXY> {
    if !(c.c1 > 0.0) || !c.c1.is_finite() {
        return Err(Error::NonNormalizable(format!(
            "kd_to_xy needs c1 > 0, got c1 = {}",
            c.c1
        )));
    }
    let a = c.c3 - c.c2 * c.c2 / (4.0 * c.c1);
    let b = -c.c2 / (4.0 * c.c1);
    let cc = 1.0 / (16.0 * c.c1);
    let e = c.c4 / (4.0 * c.c1);
    let d = c.c5 - c.c2 * c.c4 / (2.0 * c.c1);
    let n = c.c6 + c.c4 * c.c4 / (4.0 * c.c1) + 0.5 * (4.0 * std::f64::consts::PI * c.c1).ln();
    Ok(GaussianXY {
        a,
        b,
        c: cc,
        d,
        e,
        n,
    })
}

/// Eigenvalue ladder parameters lambda0 = 2 sqrt(C)/(sqrt(A)+sqrt(C)),
/// ratio = (sqrt(A)-sqrt(C))/(sqrt(A)+sqrt(C)).
pub fn spectrum(a: f64, c: f64) -> Result<SpectrumDescriptor> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::SpectrumUndefined { a, c });
    }
    let (ra, rc) = (a.sqrt(), c.sqrt());
    Ok(SpectrumDescriptor {
        lambda0: 2.0 * rc / (ra + rc),
        ratio: (ra - rc) / (ra + rc),
    })
}

/// Purity Tr rho^2 = sqrt(C/A) of a trace-one Gaussian; values above one
/// certify positivity violation.
pub fn purity(a: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::SpectrumUndefined { a, c });
    }
    Ok((c / a).sqrt())
}

/// Positivity verdict from the (A, C) pair with relative tolerance `tol`
/// on A >= C.
pub fn verdict_from_ac(a: f64, c: f64, tol: f64) -> Verdict {
    if !(c > EPS_C) || !c.is_finite() || !a.is_finite() {
        Verdict::NonNormalizable
    } else if a >= c * (1.0 - tol) {
        Verdict::Physical
    } else {
        Verdict::Violated
    }
}

/// Positivity verdict of a position-representation Gaussian.
pub fn is_physical(g: &GaussianXY, tol: f64) -> Verdict {
    verdict_from_ac(g.a, g.c, tol)
}

/// Reset the trace to one (c6 = 0); the spectrum and moments are
/// untouched since they never involve c6.
pub fn normalize(c: &GaussianKD) -> Result<GaussianKD> {
    if !(c.c1 > 0.0) {
        return Err(Error::NonNormalizable(format!(
            "normalize needs c1 > 0, got c1 = {}",
            c.c1
        )));
    }
    Ok(GaussianKD { c6: 0.0, ..*c })
}

impl GaussianKD {
    /// Trace of the kernel, e^{-c6}.
    pub fn trace(&self) -> f64 {
        (-self.c6).exp()
    }

    /// First moment <x> = -c4 (from the k-characteristic function).
    pub fn mean_x(&self) -> f64 {
        -self.c4
    }

    /// First moment <p> = -hbar c5.
    pub fn mean_p(&self, hbar: f64) -> f64 {
        -hbar * self.c5
    }

    /// Position variance 2 c1.
    pub fn var_x(&self) -> f64 {
        2.0 * self.c1
    }
}

/// Reproducible initial-state menu for trajectories and scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    /// Oscillator ground state, A = C = m omega0/(4 hbar).
    Ground,
    /// Thermal state at the given temperature:
    /// A = (m omega0/4 hbar) coth(hbar omega0/2 k_B T), C = A / coth^2.
    Thermal { temperature: f64 },
    /// Pure squeezed state, A = C = s m omega0/(4 hbar). s > 1 narrows
    /// position, s < 1 widens it; purity is one for every s > 0.
    Squeezed { factor: f64 },
}

/// An initial state: a family member plus optional phase-space displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(flatten)]
    pub kind: StateKind,
    #[serde(default)]
    pub mean_x: f64,
    #[serde(default)]
    pub mean_p: f64,
}

impl InitialState {
    pub fn ground() -> Self {
        InitialState {
            kind: StateKind::Ground,
            mean_x: 0.0,
            mean_p: 0.0,
        }
    }

    pub fn squeezed(factor: f64) -> Self {
        InitialState {
            kind: StateKind::Squeezed { factor },
            mean_x: 0.0,
            mean_p: 0.0,
        }
    }

    pub fn thermal(temperature: f64) -> Self {
        InitialState {
            kind: StateKind::Thermal { temperature },
            mean_x: 0.0,
            mean_p: 0.0,
        }
    }

    pub fn displaced(mut self, mean_x: f64, mean_p: f64) -> Self {
        self.mean_x = mean_x;
        self.mean_p = mean_p;
        self
    }

    /// Build the trace-one phase-space Gaussian for the oscillator with
    /// the given mass, frequency and constants.
    pub fn to_kd(&self, mass: f64, omega0: f64, hbar: f64, k_b: f64) -> Result<GaussianKD> {
        let base = mass * omega0 / (4.0 * hbar);
        let (a, c) = match self.kind {
            StateKind::Ground => (base, base),
            StateKind::Squeezed { factor } => {
                if !(factor > 0.0) {
                    return Err(Error::Config(format!(
                        "squeeze factor must be positive, got {factor}"
                    )));
                }
                (base * factor, base * factor)
            }
            StateKind::Thermal { temperature } => {
                if !(temperature > 0.0) {
                    return Err(Error::Config(format!(
                        "thermal temperature must be positive, got {temperature}"
                    )));
                }
                let u = 1.0 / (hbar * omega0 / (2.0 * k_b * temperature)).tanh();
                (base * u, base / u)
            }
        };
        Ok(GaussianKD {
            c1: 1.0 / (16.0 * c),
            c2: 0.0,
            c3: a,
            c4: -self.mean_x,
            c5: -self.mean_p / hbar,
            c6: 0.0,
        })
    }
}

/// On-disk state record: either parametrization plus unit metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "lowercase")]
pub enum StateRecord {
    Xy {
        #[serde(flatten)]
        state: GaussianXY,
        units: UnitSystem,
    },
    Kd {
        #[serde(flatten)]
        state: GaussianKD,
        units: UnitSystem,
    },
}

/// The unit system a state record is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    pub omega0: f64,
    pub k_b: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            hbar: 1.0,
            mass: 1.0,
            omega0: 1.0,
            k_b: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ground_state_maps_to_known_kd() {
        // m = omega0 = hbar = 1: A = C = 1/4, normalized.
        let base = 0.25;
        let g = GaussianXY {
            a: base,
            b: 0.0,
            c: base,
            d: 0.0,
            e: 0.0,
            n: -0.5 * (1.0 / std::f64::consts::PI).ln(),
        };
        let kd = xy_to_kd(&g).unwrap();
        assert_relative_eq!(kd.c1, 0.25, max_relative = 1e-14);
        assert_relative_eq!(kd.c2, 0.0);
        assert_relative_eq!(kd.c3, 0.25, max_relative = 1e-14);
        assert_relative_eq!(kd.c4, 0.0);
        assert_relative_eq!(kd.c5, 0.0);
        assert_relative_eq!(kd.c6, 0.0, epsilon = 1e-14);
        // Same state via the menu.
        let menu = InitialState::ground().to_kd(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(menu.c1, kd.c1, max_relative = 1e-14);
        assert_relative_eq!(menu.c3, kd.c3, max_relative = 1e-14);
    }

    #[test]
    fn published_quadratic_block_values() {
        let c = GaussianKD {
            c1: 1.0 / 16.0,
            c2: 0.0,
            c3: 1.0,
            c4: 0.0,
            c5: 0.0,
            c6: 0.0,
        };
        let g = kd_to_xy(&c).unwrap();
        assert_relative_eq!(g.a, 1.0);
        assert_relative_eq!(g.b, 0.0);
        assert_relative_eq!(g.c, 1.0);
    }

    #[test]
    fn spectrum_and_purity_identities() {
        let s = spectrum(1.0, 1.0).unwrap();
        assert_relative_eq!(s.lambda0, 1.0);
        assert_relative_eq!(s.ratio, 0.0);

        let s = spectrum(4.0, 1.0).unwrap();
        assert_relative_eq!(s.lambda0, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s.ratio, 1.0 / 3.0, max_relative = 1e-15);
        let sum: f64 = (0..200).map(|n| s.eigenvalue(n)).sum();
        assert_relative_eq!(sum, 1.0, max_relative = 1e-14);
        let sum_sq: f64 = (0..200).map(|n| s.eigenvalue(n).powi(2)).sum();
        assert_relative_eq!(sum_sq, 0.5, max_relative = 1e-14);
        assert_relative_eq!(purity(4.0, 1.0).unwrap(), 0.5, max_relative = 1e-15);

        assert_relative_eq!(purity(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(purity(0.25, 1.0).unwrap(), 2.0);
        assert!(purity(0.25, 1.0).unwrap() > 1.0);
        assert_eq!(verdict_from_ac(0.25, 1.0, 1e-9), Verdict::Violated);

        assert!(spectrum(-1.0, 1.0).is_err());
        assert!(spectrum(1.0, 0.0).is_err());
        // 0 < A < C: negative ratio means alternating-sign eigenvalues.
        let s = spectrum(1.0, 2.0).unwrap();
        assert!(s.ratio < 0.0);
        assert!(s.eigenvalue(1) < 0.0);
    }

    #[test]
    fn geometric_tail_bound() {
        let s = spectrum(7.3, 0.9).unwrap();
        let n = 64u32;
        let partial: f64 = (0..=n).map(|k| s.eigenvalue(k)).sum();
        let bound = s.ratio.powi(n as i32 + 1) / (1.0 - s.ratio);
        assert!((partial - 1.0).abs() <= bound + 1e-15);
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(
            verdict_from_ac(2.0, 1.0, DEFAULT_POSITIVITY_TOL),
            Verdict::Physical
        );
        assert_eq!(
            verdict_from_ac(1.0, 2.0, DEFAULT_POSITIVITY_TOL),
            Verdict::Violated
        );
        assert_eq!(
            verdict_from_ac(1.0, -0.1, DEFAULT_POSITIVITY_TOL),
            Verdict::NonNormalizable
        );
        // Roundoff-level A slightly below C still counts as physical.
        assert_eq!(
            verdict_from_ac(1.0 - 1e-12, 1.0, DEFAULT_POSITIVITY_TOL),
            Verdict::Physical
        );
    }

    #[test]
    fn verdict_matches_eigenvalue_signs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let a: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let c: f64 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let v = verdict_from_ac(a, c, 0.0);
            let s = spectrum(a, c).unwrap();
            let all_in_unit = (0..64).all(|n| {
                let l = s.eigenvalue(n);
                (-1e-15..=1.0 + 1e-12).contains(&l)
            });
            match v {
                Verdict::Physical => assert!(all_in_unit, "A={a} C={c}"),
                Verdict::Violated => assert!(!all_in_unit, "A={a} C={c}"),
                Verdict::NonNormalizable => unreachable!(),
            }
        }
    }

    #[test]
    fn normalize_behaviour() {
        let c = GaussianKD {
            c1: 0.25,
            c2: 0.1,
            c3: 0.3,
            c4: 0.0,
            c5: 0.0,
            c6: 0.3,
        };
        let n1 = normalize(&c).unwrap();
        assert_eq!(n1.c6, 0.0);
        assert_eq!(normalize(&n1).unwrap(), n1);
        assert_relative_eq!(n1.trace(), 1.0);
        assert!(normalize(&GaussianKD { c1: -0.1, ..c }).is_err());
    }

    #[test]
    fn normalized_state_has_unit_trace_by_grid_quadrature() {
        // trace = int rho(x, x) dx with rho from the XY form.
        let c = GaussianKD {
            c1: 0.4,
            c2: -0.2,
            c3: 0.9,
            c4: 0.5,
            c5: -0.3,
            c6: 0.7,
        };
        let g = kd_to_xy(&normalize(&c).unwrap()).unwrap();
        // rho(x,x) = exp(-4C x^2 - 2E x - N)
        let m = 40_001;
        let center = -g.e / (4.0 * g.c);
        let l = 12.0 / (4.0 * g.c).sqrt();
        let h = 2.0 * l / (m - 1) as f64;
        let mut tr = 0.0;
        for i in 0..m {
            let x = center - l + i as f64 * h;
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            tr += w * (-4.0 * g.c * x * x - 2.0 * g.e * x - g.n).exp();
        }
        tr *= h;
        assert_relative_eq!(tr, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn fourier_oracle_for_the_full_map() {
        // Discretized transform of the XY Gaussian reproduces the mapped
        // KD Gaussian pointwise.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..4 {
            let c_val: f64 = rng.gen_range(0.2..1.5);
            let g = GaussianXY {
                a: c_val + rng.gen_range(0.0..1.0),
                b: rng.gen_range(-0.5..0.5),
                c: c_val,
                d: rng.gen_range(-0.5..0.5),
                e: rng.gen_range(-0.5..0.5),
                n: rng.gen_range(-0.2..0.8),
            };
            let kd = xy_to_kd(&g).unwrap();
            let rho_xy = |x: f64, y: f64| -> Complex64 {
                let re = -g.a * (x - y) * (x - y) - g.c * (x + y) * (x + y) - g.e * (x + y) - g.n;
                let im = -g.b * (x * x - y * y) - g.d * (x - y);
                Complex64::new(re, im).exp()
            };
            for (k, delta) in [(0.0, 0.0), (0.7, 0.0), (0.0, 0.9), (-1.1, 0.6)] {
                let center = -g.e / (4.0 * g.c);
                let l = 14.0 / (4.0 * g.c).sqrt();
                let m = 30_001;
                let h = 2.0 * l / (m - 1) as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    let x = center - l + i as f64 * h;
                    let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
                    acc += w
                        * Complex64::new(0.0, k * x).exp()
                        * rho_xy(x + delta / 2.0, x - delta / 2.0);
                }
                acc *= Complex64::new(h, 0.0);
                let expect = Complex64::new(
                    -kd.c1 * k * k - kd.c2 * k * delta - kd.c3 * delta * delta - kd.c6,
                    -kd.c4 * k - kd.c5 * delta,
                )
                .exp();
                assert!(
                    (acc - expect).norm() <= 1e-6 * expect.norm().max(1.0),
                    "mismatch at k={k}, delta={delta}: {acc} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn thermal_state_purity() {
        let t = 2.0;
        let kd = InitialState::thermal(t).to_kd(1.0, 1.0, 1.0, 1.0).unwrap();
        let g = kd_to_xy(&kd).unwrap();
        let expect = (1.0 / (2.0 * t)).tanh();
        assert_relative_eq!(purity(g.a, g.c).unwrap(), expect, max_relative = 1e-12);
        assert_eq!(is_physical(&g, DEFAULT_POSITIVITY_TOL), Verdict::Physical);
    }

    #[test]
    fn displaced_state_moments() {
        let kd = InitialState::squeezed(10.0)
            .displaced(1.5, -0.7)
            .to_kd(1.0, 1.0, 1.0, 1.0)
            .unwrap();
        assert_relative_eq!(kd.mean_x(), 1.5);
        assert_relative_eq!(kd.mean_p(1.0), -0.7);
        let g = kd_to_xy(&kd).unwrap();
        assert_relative_eq!(purity(g.a, g.c).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn state_record_round_trip_json() {
        let rec = StateRecord::Kd {
            state: GaussianKD {
                c1: 0.25,
                c2: 0.0,
                c3: 0.25,
                c4: 0.0,
                c5: 0.0,
                c6: 0.0,
            },
            units: UnitSystem::default(),
        };
        let s = serde_json::to_string(&rec).unwrap();
        assert!(s.contains("\"representation\":\"kd\""));
        let back: StateRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rec);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            a_excess in 0.0f64..10.0,
            b in -3.0f64..3.0,
            c in 1e-3f64..10.0,
            d in -3.0f64..3.0,
            e in -3.0f64..3.0,
            n in -2.0f64..2.0,
        ) {
            let g = GaussianXY { a: c + a_excess, b, c, d, e, n };
            let back = kd_to_xy(&xy_to_kd(&g).unwrap()).unwrap();
            prop_assert!((back.a - g.a).abs() <= 1e-12 * g.a.abs().max(1.0));
            prop_assert!((back.b - g.b).abs() <= 1e-12 * g.b.abs().max(1.0));
            prop_assert!((back.c - g.c).abs() <= 1e-12 * g.c.abs().max(1.0));
            prop_assert!((back.d - g.d).abs() <= 1e-12 * g.d.abs().max(1.0));
            prop_assert!((back.e - g.e).abs() <= 1e-12 * g.e.abs().max(1.0));
            prop_assert!((back.n - g.n).abs() <= 1e-12 * g.n.abs().max(1.0));
        }

        #[test]
        fn purity_equals_ladder_square_sum(a in 1e-2f64..10.0, c in 1e-2f64..10.0) {
            prop_assume!(a >= c);
            let s = spectrum(a, c).unwrap();
            let sum_sq: f64 = (0..400).map(|n| s.eigenvalue(n).powi(2)).sum();
            let p = purity(a, c).unwrap();
            prop_assert!((sum_sq - p).abs() <= 1e-10 * p + 1e-12);
        }
    }
}
