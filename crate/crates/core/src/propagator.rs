//! Propagation of the Gaussian coefficient vector: the nonautonomous
//! linear system for (c1, c2, c3) with its decoupled first-moment block,
//! the constant-coefficient Markovian solution, the stationary state, and
//! positivity-event detection along trajectories.

use crate::coefficients::{CoefficientEvaluator, CoefficientSet, TimePoint};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianKD, GaussianXY, Verdict, EPS_C};
use crate::linalg::expm;
use crate::rk::{self, StepOptions};
use nalgebra::{Matrix2, Matrix3, SVector, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// c1 above this means C = 1/(16 c1) has fallen below EPS_C: the
/// quadratic coefficients are running away (normalizability loss).
pub const C1_RUNAWAY: f64 = 1.0 / (16.0 * EPS_C);

/// Source of master-equation coefficients for the propagator; either the
/// full time-dependent evaluator or a frozen (Markovian) set.
pub trait CoefficientSource: Sync {
    fn at(&self, t: f64) -> Result<CoefficientSet>;
    fn mass(&self) -> f64;
    fn hbar(&self) -> f64;
    fn omega0(&self) -> f64;
}

impl CoefficientSource for CoefficientEvaluator {
    fn at(&self, t: f64) -> Result<CoefficientSet> {
        self.set_at(t)
    }
    fn mass(&self) -> f64 {
        self.bath().mass
    }
    fn hbar(&self) -> f64 {
        self.bath().hbar
    }
    fn omega0(&self) -> f64 {
        self.bath().omega0
    }
}

/// Time-independent coefficients (e.g. the Markovian limit of a bath).
#[derive(Debug, Clone, Copy)]
pub struct FrozenCoefficients {
    pub set: CoefficientSet,
    pub mass: f64,
    pub hbar: f64,
    pub omega0: f64,
}

impl FrozenCoefficients {
    /// Freeze a bath's asymptotic coefficient values.
    pub fn markovian(ev: &CoefficientEvaluator) -> Self {
        FrozenCoefficients {
            set: ev.markovian(),
            mass: ev.bath().mass,
            hbar: ev.bath().hbar,
            omega0: ev.bath().omega0,
        }
    }
}

impl CoefficientSource for FrozenCoefficients {
    fn at(&self, _t: f64) -> Result<CoefficientSet> {
        Ok(self.set)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
    fn hbar(&self) -> f64 {
        self.hbar
    }
    fn omega0(&self) -> f64 {
        self.omega0
    }
}

/// Generator of the linear system: dc/dt = M c + v for (c1, c2, c3) and
/// the decoupled 2x2 block driving (c4, c5).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub m: Matrix3<f64>,
    pub v: Vector3<f64>,
    pub moment_block: Matrix2<f64>,
    pub coefficients: CoefficientSet,
}

impl GeneratorMatrix {
    pub fn from_coefficients(set: &CoefficientSet, mass: f64, hbar: f64) -> Self {
        let h_m = hbar / mass;
        let q = mass * set.omega_p_sq / hbar;
        let l = set.lambda;
        GeneratorMatrix {
            m: Matrix3::new(
                0.0,
                h_m,
                0.0,
                -2.0 * q,
                -2.0 * l,
                2.0 * h_m,
                0.0,
                -q,
                -4.0 * l,
            ),
            v: Vector3::new(0.0, 2.0 * set.d_px, set.d_pp / hbar),
            moment_block: Matrix2::new(0.0, h_m, -q, -2.0 * l),
            coefficients: *set,
        }
    }

    /// The characteristic polynomial factors as
    /// (theta + 2 lambda)(theta^2 + 4 lambda theta + 4 omega_p^2):
    /// eigenvalues -2 lambda and -2(lambda -+ sqrt(lambda^2 - omega_p^2)).
    pub fn closed_form_eigenvalues(&self) -> [Complex64; 3] {
        let l = self.coefficients.lambda;
        let disc = l * l - self.coefficients.omega_p_sq;
        let root = Complex64::new(disc.max(0.0).sqrt(), (-disc).max(0.0).sqrt());
        let lc = Complex64::new(l, 0.0);
        [
            Complex64::new(-2.0 * l, 0.0),
            -2.0 * (lc - root),
            -2.0 * (lc + root),
        ]
    }

    /// Eigenvalues from a numerical solver, sorted like the closed form.
    pub fn numerical_eigenvalues(&self) -> [Complex64; 3] {
        let eig = self.m.complex_eigenvalues();
        let mut vals = [eig[0], eig[1], eig[2]];
        // Match to the closed form by nearest assignment.
        let closed = self.closed_form_eigenvalues();
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut used = [false; 3];
        for (i, c) in closed.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (j, v) in vals.iter().enumerate() {
                if !used[j] && (v - c).norm() < best_d {
                    best_d = (v - c).norm();
                    best = j;
                }
            }
            used[best] = true;
            out[i] = vals[best];
        }
        vals = out;
        vals
    }
}

/// Generator at a finite time, entries filled from the coefficient set.
pub fn generator_at(source: &dyn CoefficientSource, t: f64) -> Result<GeneratorMatrix> {
    let set = source.at(t)?;
    Ok(GeneratorMatrix::from_coefficients(
        &set,
        source.mass(),
        source.hbar(),
    ))
}

/// Generator with the asymptotic (Markovian) coefficient values.
pub fn generator_markovian(ev: &CoefficientEvaluator) -> GeneratorMatrix {
    GeneratorMatrix::from_coefficients(&ev.markovian(), ev.bath().mass, ev.bath().hbar)
}

/// Numerical controls for `evolve`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Forced first step; None selects one automatically.
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    /// Spacing of dense-output samples; None gives t_end / 1000.
    pub sample_dt: Option<f64>,
    /// Bisection tolerance for event times, in units of 1/omega0.
    pub event_tol: f64,
    /// Relative slack on A >= C for the positivity verdict.
    pub positivity_tol: f64,
    pub max_steps: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: None,
            max_step: None,
            sample_dt: None,
            event_tol: 1e-9,
            positivity_tol: gaussian::DEFAULT_POSITIVITY_TOL,
            max_steps: 50_000_000,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(dt) = self.sample_dt {
            if !(dt > 0.0) {
                return Err(Error::Config("sample_dt must be positive".into()));
            }
        }
        if !(self.event_tol > 0.0) {
            return Err(Error::Config("event_tol must be positive".into()));
        }
        Ok(())
    }
}

/// One trajectory sample with its positivity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: GaussianKD,
    /// Quadratic XY coefficients recomputed from the state.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// sqrt(C/A) when both are positive, NaN otherwise.
    pub purity: f64,
    pub verdict: Verdict,
}

/// Result of a propagation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Bisected onset of the first A < C crossing, if any.
    pub first_violation: Option<f64>,
    /// Bisected onset of normalizability loss (c1 <= 0 or C <= EPS_C).
    pub first_normalizability_loss: Option<f64>,
    /// True when integration stopped early because the Gaussian left the
    /// normalizable family.
    pub truncated: bool,
    pub final_t: f64,
    pub final_state: GaussianKD,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Bath evaluated below k_B T = hbar omega0 (slow Matsubara decay).
    pub low_temperature: bool,
}

impl Trajectory {
    pub fn final_verdict(&self) -> Verdict {
        if self.truncated {
            Verdict::NonNormalizable
        } else {
            self.samples
                .last()
                .map(|s| s.verdict)
                .unwrap_or(Verdict::Physical)
        }
    }

    pub fn ever_violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

fn make_sample(t: f64, y: &SVector<f64, 5>, c6: f64, tol: f64) -> Sample {
    let state = GaussianKD {
        c1: y[0],
        c2: y[1],
        c3: y[2],
        c4: y[3],
        c5: y[4],
        c6,
    };
    let (a, b, c) = quadratic_xy(y);
    let purity = if a > 0.0 && c > 0.0 {
        (c / a).sqrt()
    } else {
        f64::NAN
    };
    Sample {
        t,
        state,
        a,
        b,
        c,
        purity,
        verdict: gaussian::verdict_from_ac(a, c, tol),
    }
}

fn quadratic_xy(y: &SVector<f64, 5>) -> (f64, f64, f64) {
    if y[0] <= 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let a = y[2] - y[1] * y[1] / (4.0 * y[0]);
    let b = -y[1] / (4.0 * y[0]);
    let c = 1.0 / (16.0 * y[0]);
    (a, b, c)
}

/// Positivity indicator g = A - (1 - tol) C; negative means violated.
fn violation_indicator(y: &SVector<f64, 5>, tol: f64) -> f64 {
    let (a, _, c) = quadratic_xy(y);
    if !a.is_finite() {
        return -1.0;
    }
    a - (1.0 - tol) * c
}

fn normalizability_indicator(y: &SVector<f64, 5>) -> f64 {
    // Positive while the state stays normalizable.
    if y[0] <= 0.0 || y[0] >= C1_RUNAWAY {
        -1.0
    } else {
        y[0].min(C1_RUNAWAY - y[0])
    }
}

/// Bisect an indicator's first sign change on [t_lo, t_hi] given an
/// evaluator for the state at arbitrary times inside the bracket.
fn bisect_event<F>(mut t_lo: f64, mut t_hi: f64, t_tol: f64, indicator: F) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..200 {
        if t_hi - t_lo <= t_tol {
            break;
        }
        let mid = 0.5 * (t_lo + t_hi);
        if indicator(mid) > 0.0 {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    0.5 * (t_lo + t_hi)
}

/// Integrate the full linear system from a normalizable initial state.
///
/// Samples are emitted on a uniform grid plus the exact endpoint; the
/// verdict events are bracketed on accepted steps and bisected on the
/// dense output. A state leaving the normalizable family truncates the
/// trajectory with the loss recorded, not an error.
pub fn evolve(
    c0: &GaussianKD,
    source: &dyn CoefficientSource,
    t_end: f64,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(c0.c1 > 0.0) {
        return Err(Error::NonNormalizable(format!(
            "evolve needs c1 > 0, got c1 = {}",
            c0.c1
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::Domain(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    let c6 = c0.c6;
    let tol = cfg.positivity_tol;
    let low_temperature = source.at(0.0)?.low_temperature;
    let y0 = SVector::<f64, 5>::from([c0.c1, c0.c2, c0.c3, c0.c4, c0.c5]);
    let rhs = |t: f64, y: &SVector<f64, 5>| -> Result<SVector<f64, 5>> {
        let set = source.at(t)?;
        let h_m = source.hbar() / source.mass();
        let q = source.mass() * set.omega_p_sq / source.hbar();
        let l = set.lambda;
        Ok(SVector::<f64, 5>::from([
            h_m * y[1],
            2.0 * set.d_px + 2.0 * h_m * y[2] - 2.0 * q * y[0] - 2.0 * l * y[1],
            set.d_pp / source.hbar() - q * y[1] - 4.0 * l * y[2],
            h_m * y[4],
            -q * y[3] - 2.0 * l * y[4],
        ]))
    };

    let opts = StepOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        initial_step: cfg.initial_step,
        max_step: cfg.max_step.unwrap_or(f64::INFINITY),
        max_steps: cfg.max_steps,
    };
    let sample_dt = cfg.sample_dt.unwrap_or(t_end / 1000.0);
    let t_tol = cfg.event_tol / source.omega0();

    let mut samples = Vec::with_capacity((t_end / sample_dt) as usize + 2);
    samples.push(make_sample(0.0, &y0, c6, tol));

    let mut next_sample = 1usize;
    let mut first_violation: Option<f64> = None;
    let mut first_loss: Option<f64> = None;
    let mut truncated = false;
    let mut prev_g = violation_indicator(&y0, tol);

    let (final_t, final_y, stats) = rk::integrate_adaptive(&rhs, 0.0, t_end, y0, &opts, |seg| {
        let t1 = seg.t_end();
        let y1 = seg.eval(t1);

        // Emit grid samples that fall inside this step.
        while next_sample as f64 * sample_dt <= t1 + 1e-15 {
            let ts = next_sample as f64 * sample_dt;
            if ts > t_end {
                break;
            }
            let ys = if (ts - t1).abs() < 1e-15 {
                y1
            } else {
                seg.eval(ts)
            };
            samples.push(make_sample(ts, &ys, c6, tol));
            next_sample += 1;
        }

        // Positivity onset: bracket on this step, bisect on its dense output.
        let g1 = violation_indicator(&y1, tol);
        if first_violation.is_none() && prev_g > 0.0 && g1 <= 0.0 {
            let t_star = bisect_event(seg.t0, t1, t_tol, |t| {
                violation_indicator(&seg.eval(t), tol)
            });
            first_violation = Some(t_star);
        }
        prev_g = g1;

        // Normalizability loss truncates the run.
        if normalizability_indicator(&y1) <= 0.0 {
            let t_star = bisect_event(seg.t0, t1, t_tol, |t| {
                normalizability_indicator(&seg.eval(t))
            });
            first_loss = Some(t_star);
            truncated = true;
            return false;
        }
        true
    })?;

    if !truncated && (final_t - t_end).abs() <= 1e-12 * t_end.max(1.0) {
        let last_t = samples.last().map(|s| s.t).unwrap_or(-1.0);
        if last_t < t_end {
            samples.push(make_sample(t_end, &final_y, c6, tol));
        }
    }

    Ok(Trajectory {
        samples,
        first_violation,
        first_normalizability_loss: first_loss,
        truncated,
        final_t,
        final_state: GaussianKD {
            c1: final_y[0],
            c2: final_y[1],
            c3: final_y[2],
            c4: final_y[3],
            c5: final_y[4],
            c6,
        },
        steps_accepted: stats.accepted,
        steps_rejected: stats.rejected,
        low_temperature,
    })
}

/// Closed-form constant-coefficient propagator for the Markovian limit:
/// c(t) = c_stat + e^{M t}(c(0) - c_stat), moments through the 2x2 block.
pub fn evolve_markovian(c0: &GaussianKD, ev: &CoefficientEvaluator, t: f64) -> Result<GaussianKD> {
    if t < 0.0 {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let gen = generator_markovian(ev);
    markovian_state_at(c0, &gen, t)
}

fn markovian_state_at(c0: &GaussianKD, gen: &GeneratorMatrix, t: f64) -> Result<GaussianKD> {
    let c_quad = Vector3::new(c0.c1, c0.c2, c0.c3);
    let quad = if gen.v.norm() == 0.0 && gen.coefficients.lambda == 0.0 {
        expm(&(gen.m * t)) * c_quad
    } else {
        let c_stat = gen
            .m
            .lu()
            .solve(&(-gen.v))
            .ok_or_else(|| Error::NoStationaryState("singular Markovian generator".into()))?;
        c_stat + expm(&(gen.m * t)) * (c_quad - c_stat)
    };
    let moments = expm(&(gen.moment_block * t)) * Vector2::new(c0.c4, c0.c5);
    Ok(GaussianKD {
        c1: quad[0],
        c2: quad[1],
        c3: quad[2],
        c4: moments[0],
        c5: moments[1],
        c6: c0.c6,
    })
}

/// Markovian branch as a sampled trajectory with the same diagnostics and
/// event bisection as `evolve`, built on the closed-form solution.
pub fn markovian_trajectory(
    c0: &GaussianKD,
    ev: &CoefficientEvaluator,
    t_end: f64,
    cfg: &EvolutionConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(c0.c1 > 0.0) {
        return Err(Error::NonNormalizable(format!(
            "markovian_trajectory needs c1 > 0, got c1 = {}",
            c0.c1
        )));
    }
    let gen = generator_markovian(ev);
    let low_temperature = ev.markovian().low_temperature;
    let tol = cfg.positivity_tol;
    let sample_dt = cfg.sample_dt.unwrap_or(t_end / 1000.0);
    let t_tol = cfg.event_tol / ev.bath().omega0;
    let state_at = |t: f64| -> Result<SVector<f64, 5>> {
        let s = markovian_state_at(c0, &gen, t)?;
        Ok(SVector::<f64, 5>::from([s.c1, s.c2, s.c3, s.c4, s.c5]))
    };

    let n_samples = (t_end / sample_dt).floor() as usize;
    let mut samples = Vec::with_capacity(n_samples + 2);
    let mut first_violation = None;
    let mut first_loss = None;
    let mut truncated = false;
    let mut prev_t = 0.0;
    let y_start = state_at(0.0)?;
    let mut prev_g = violation_indicator(&y_start, tol);
    samples.push(make_sample(0.0, &y_start, c0.c6, tol));

    let mut grid: Vec<f64> = (1..=n_samples).map(|k| k as f64 * sample_dt).collect();
    if grid.last().copied().unwrap_or(0.0) < t_end {
        grid.push(t_end);
    }
    let mut final_t = 0.0;
    let mut final_y = y_start;
    for ts in grid {
        let y = state_at(ts)?;
        let g = violation_indicator(&y, tol);
        if first_violation.is_none() && prev_g > 0.0 && g <= 0.0 {
            let t_star = bisect_event(prev_t, ts, t_tol, |t| {
                state_at(t)
                    .map(|y| violation_indicator(&y, tol))
                    .unwrap_or(-1.0)
            });
            first_violation = Some(t_star);
        }
        if normalizability_indicator(&y) <= 0.0 {
            let t_star = bisect_event(prev_t, ts, t_tol, |t| {
                state_at(t)
                    .map(|y| normalizability_indicator(&y))
                    .unwrap_or(-1.0)
            });
            first_loss = Some(t_star);
            truncated = true;
            break;
        }
        samples.push(make_sample(ts, &y, c0.c6, tol));
        final_t = ts;
        final_y = y;
        prev_t = ts;
        prev_g = g;
    }

    Ok(Trajectory {
        samples,
        first_violation,
        first_normalizability_loss: first_loss,
        truncated,
        final_t,
        final_state: GaussianKD {
            c1: final_y[0],
            c2: final_y[1],
            c3: final_y[2],
            c4: final_y[3],
            c5: final_y[4],
            c6: c0.c6,
        },
        steps_accepted: 0,
        steps_rejected: 0,
        low_temperature,
    })
}

/// Stationary state of the Markovian dynamics and its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryState {
    pub state: GaussianKD,
    pub xy: GaussianXY,
    /// sqrt(C/A) when defined.
    pub purity: Option<f64>,
    pub verdict: Verdict,
    /// ||M c + v|| / ||v||.
    pub residual: f64,
}

/// Solve M^(M) c = -v^(M); gamma = 0 has no stationary state.
pub fn stationary_state(ev: &CoefficientEvaluator) -> Result<StationaryState> {
    let gen = generator_markovian(ev);
    if gen.coefficients.lambda <= 0.0 {
        return Err(Error::NoStationaryState(
            "lambda^(M) = 0 (gamma = 0): generator is singular".into(),
        ));
    }
    let c = gen
        .m
        .lu()
        .solve(&(-gen.v))
        .ok_or_else(|| Error::NoStationaryState("generator not invertible".into()))?;
    let residual = (gen.m * c + gen.v).norm() / gen.v.norm().max(1e-300);
    let state = GaussianKD {
        c1: c[0],
        c2: c[1],
        c3: c[2],
        c4: 0.0,
        c5: 0.0,
        c6: 0.0,
    };
    let (xy, purity, verdict) = match gaussian::kd_to_xy(&state) {
        Ok(xy) => {
            let p = gaussian::purity(xy.a, xy.c).ok();
            let v = gaussian::is_physical(&xy, gaussian::DEFAULT_POSITIVITY_TOL);
            (xy, p, v)
        }
        Err(_) => (
            GaussianXY {
                a: f64::NAN,
                b: f64::NAN,
                c: f64::NAN,
                d: f64::NAN,
                e: f64::NAN,
                n: f64::NAN,
            },
            None,
            Verdict::NonNormalizable,
        ),
    };
    Ok(StationaryState {
        state,
        xy,
        purity,
        verdict,
        residual,
    })
}

/// Fixed-step propagation with the same Runge-Kutta method, for
/// convergence-order measurements against closed-form solutions.
pub fn evolve_fixed_step(
    c0: &GaussianKD,
    source: &dyn CoefficientSource,
    t_end: f64,
    h: f64,
) -> Result<GaussianKD> {
    let y0 = SVector::<f64, 5>::from([c0.c1, c0.c2, c0.c3, c0.c4, c0.c5]);
    let rhs = |t: f64, y: &SVector<f64, 5>| -> Result<SVector<f64, 5>> {
        let set = source.at(t)?;
        let h_m = source.hbar() / source.mass();
        let q = source.mass() * set.omega_p_sq / source.hbar();
        let l = set.lambda;
        Ok(SVector::<f64, 5>::from([
            h_m * y[1],
            2.0 * set.d_px + 2.0 * h_m * y[2] - 2.0 * q * y[0] - 2.0 * l * y[1],
            set.d_pp / source.hbar() - q * y[1] - 4.0 * l * y[2],
            h_m * y[4],
            -q * y[3] - 2.0 * l * y[4],
        ]))
    };
    let y = rk::integrate_fixed(rhs, 0.0, t_end, y0, h)?;
    Ok(GaussianKD {
        c1: y[0],
        c2: y[1],
        c3: y[2],
        c4: y[3],
        c5: y[4],
        c6: c0.c6,
    })
}

/// Coefficient set frozen at a specific time of a bath's evolution
/// (useful for oracle comparisons against the matrix exponential).
pub fn frozen_at(ev: &CoefficientEvaluator, t: f64) -> Result<FrozenCoefficients> {
    Ok(FrozenCoefficients {
        set: CoefficientSet {
            evaluated_at: TimePoint::At(t),
            ..ev.set_at(t)?
        },
        mass: ev.bath().mass,
        hbar: ev.bath().hbar,
        omega0: ev.bath().omega0,
    })
}
