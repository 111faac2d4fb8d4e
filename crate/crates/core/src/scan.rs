//! Parameter-space scans: stationary positivity maps over
//! (gamma, Omega, k_B T), dynamic comparison of the non-Markovian
//! evolution against its Markovian counterpart, anomaly classification,
//! and the witness search for points separating the two dynamics.

use crate::bath::{BathSpec, KernelEvalConfig};
use crate::coefficients::CoefficientEvaluator;
use crate::error::{Error, Result};
use crate::gaussian::{InitialState, Verdict};
use crate::propagator::{self, EvolutionConfig, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One axis of a scan grid, in reduced units (ratios to omega0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: AxisScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    Linear,
    #[default]
    Log,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, points: usize, scale: AxisScale) -> Self {
        AxisSpec {
            min,
            max,
            points,
            scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min) {
            return Err(Error::Config(format!(
                "axis needs 0 < min <= max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.points == 0 {
            return Err(Error::Config("axis needs at least one point".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let n = self.points as f64 - 1.0;
        (0..self.points)
            .map(|i| match self.scale {
                AxisScale::Linear => self.min + (self.max - self.min) * i as f64 / n,
                AxisScale::Log => self.min * (self.max / self.min).powf(i as f64 / n),
            })
            .collect()
    }
}

/// Per-point evaluation depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    #[default]
    StationaryOnly,
    Dynamic,
}

/// Full scan request over the three bath ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub gamma: AxisSpec,
    pub cutoff: AxisSpec,
    pub temperature: AxisSpec,
    #[serde(default)]
    pub mode: ScanMode,
    #[serde(default = "default_initial_state")]
    pub initial_state: InitialState,
}

fn default_initial_state() -> InitialState {
    InitialState::squeezed(10.0)
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        self.gamma.validate()?;
        self.cutoff.validate()?;
        self.temperature.validate()?;
        Ok(())
    }

    /// Points in deterministic row-major order (gamma, cutoff, temperature).
    pub fn points(&self) -> Vec<ScanPoint> {
        let mut out =
            Vec::with_capacity(self.gamma.points * self.cutoff.points * self.temperature.points);
        for g in self.gamma.values() {
            for c in self.cutoff.values() {
                for t in self.temperature.values() {
                    out.push(ScanPoint {
                        gamma: g,
                        cutoff: c,
                        temperature: t,
                    });
                }
            }
        }
        out
    }
}

/// One bath parameter point in reduced units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub gamma: f64,
    pub cutoff: f64,
    pub temperature: f64,
}

impl ScanPoint {
    pub fn bath(&self) -> Result<BathSpec> {
        BathSpec::reduced(self.gamma, self.cutoff, self.temperature)
    }
}

/// Anomaly classification of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyClass {
    None,
    PositivityViolation,
    NormalizabilityLoss,
}

impl std::fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnomalyClass::None => "none",
            AnomalyClass::PositivityViolation => "positivity_violation",
            AnomalyClass::NormalizabilityLoss => "normalizability_loss",
        })
    }
}

/// Classify a trajectory's worst anomaly; loss of normalizability (the
/// quadratic-coefficient runaway behind a diverging kernel) dominates a
/// plain positivity violation.
pub fn classify_anomaly(traj: &Trajectory) -> AnomalyClass {
    if traj.first_normalizability_loss.is_some() || traj.truncated {
        AnomalyClass::NormalizabilityLoss
    } else if traj.first_violation.is_some() {
        AnomalyClass::PositivityViolation
    } else {
        AnomalyClass::None
    }
}

/// Stationary-state diagnostics at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryInfo {
    pub verdict: Verdict,
    pub purity: Option<f64>,
    /// Positivity margin A/C of the fixed point (>= 1 means physical).
    pub a_over_c: Option<f64>,
    pub residual: f64,
}

/// Outcome of one dynamical branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub first_violation: Option<f64>,
    pub first_normalizability_loss: Option<f64>,
    pub anomaly: AnomalyClass,
    pub final_verdict: Verdict,
}

impl BranchOutcome {
    fn from_trajectory(traj: &Trajectory) -> Self {
        BranchOutcome {
            first_violation: traj.first_violation,
            first_normalizability_loss: traj.first_normalizability_loss,
            anomaly: classify_anomaly(traj),
            final_verdict: traj.final_verdict(),
        }
    }
}

/// Dynamic comparison of the two evolutions from a shared initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicInfo {
    pub non_markovian: BranchOutcome,
    pub markovian: BranchOutcome,
    pub horizon: f64,
}

/// Everything recorded for a grid point. Failures land in `error`
/// without aborting the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    #[serde(flatten)]
    pub point: ScanPoint,
    pub stationary: Option<StationaryInfo>,
    pub dynamic: Option<DynamicInfo>,
    pub error: Option<String>,
}

/// Numerical settings shared by scan evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub kernel: KernelEvalConfig,
    pub evolution: EvolutionConfig,
    /// Horizon override; None uses max(20/lambda^M, 50/omega0).
    pub horizon: Option<f64>,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            kernel: KernelEvalConfig::default(),
            evolution: EvolutionConfig::default(),
            horizon: None,
        }
    }
}

fn default_horizon(ev: &CoefficientEvaluator) -> f64 {
    let lambda_m = ev.markovian().lambda;
    let omega0 = ev.bath().omega0;
    if lambda_m > 0.0 {
        (20.0 / lambda_m).max(50.0 / omega0)
    } else {
        50.0 / omega0
    }
}

fn stationary_info(ev: &CoefficientEvaluator) -> Result<StationaryInfo> {
    let st = propagator::stationary_state(ev)?;
    let a_over_c = if st.xy.a.is_finite() && st.xy.c > 0.0 {
        Some(st.xy.a / st.xy.c)
    } else {
        None
    };
    Ok(StationaryInfo {
        verdict: st.verdict,
        purity: st.purity,
        a_over_c,
        residual: st.residual,
    })
}

/// Stationary verdict map over the grid. Point order (and therefore
/// output order) is deterministic and independent of parallel execution.
pub fn scan_stationary(grid: &ScanGrid, settings: &ScanSettings) -> Result<Vec<PointReport>> {
    grid.validate()?;
    let points = grid.points();
    Ok(points
        .par_iter()
        .map(|p| match evaluate_stationary(p, settings) {
            Ok(info) => PointReport {
                point: *p,
                stationary: Some(info),
                dynamic: None,
                error: None,
            },
            Err(e) => PointReport {
                point: *p,
                stationary: None,
                dynamic: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

fn evaluate_stationary(p: &ScanPoint, settings: &ScanSettings) -> Result<StationaryInfo> {
    let ev = CoefficientEvaluator::new(&p.bath()?, &settings.kernel)?;
    stationary_info(&ev)
}

/// Run both dynamics from `initial` at one parameter point.
pub fn compare_dynamics(
    point: &ScanPoint,
    initial: &InitialState,
    settings: &ScanSettings,
) -> PointReport {
    match compare_dynamics_inner(point, initial, settings) {
        Ok((stat, dynamic)) => PointReport {
            point: *point,
            stationary: stat,
            dynamic: Some(dynamic),
            error: None,
        },
        Err(e) => PointReport {
            point: *point,
            stationary: None,
            dynamic: None,
            error: Some(e.to_string()),
        },
    }
}

fn compare_dynamics_inner(
    point: &ScanPoint,
    initial: &InitialState,
    settings: &ScanSettings,
) -> Result<(Option<StationaryInfo>, DynamicInfo)> {
    let bath = point.bath()?;
    let ev = CoefficientEvaluator::new(&bath, &settings.kernel)?;
    let horizon = settings.horizon.unwrap_or_else(|| default_horizon(&ev));
    let c0 = initial.to_kd(bath.mass, bath.omega0, bath.hbar, bath.k_b)?;

    let stat = if bath.gamma > 0.0 {
        Some(stationary_info(&ev)?)
    } else {
        None
    };

    let nm = propagator::evolve(&c0, &ev, horizon, &settings.evolution)?;
    let m = if bath.gamma > 0.0 {
        propagator::markovian_trajectory(&c0, &ev, horizon, &settings.evolution)?
    } else {
        // gamma = 0: the Markovian branch equals the non-Markovian one
        // (both are the unitary flow); reuse the integrated trajectory.
        propagator::evolve(
            &c0,
            &propagator::FrozenCoefficients::markovian(&ev),
            horizon,
            &settings.evolution,
        )?
    };

    Ok((
        stat,
        DynamicInfo {
            non_markovian: BranchOutcome::from_trajectory(&nm),
            markovian: BranchOutcome::from_trajectory(&m),
            horizon,
        },
    ))
}

/// Dynamic scan over the grid from its configured initial state.
pub fn scan_dynamic(grid: &ScanGrid, settings: &ScanSettings) -> Result<Vec<PointReport>> {
    grid.validate()?;
    let points = grid.points();
    Ok(points
        .par_iter()
        .map(|p| compare_dynamics(p, &grid.initial_state, settings))
        .collect())
}

/// What a persisted witness point demonstrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// The Markovian branch violates positivity while the non-Markovian
    /// branch stays physical over the same horizon, with a physical
    /// stationary state.
    MarkovianViolatesOnly,
    /// The stationary state itself is violated and the non-Markovian
    /// branch follows it into violation.
    StationaryViolatedNonMarkovianFollows,
}

/// A reproducible witness: the parameter point, initial state, horizon,
/// the full numerical configuration and the measured onset times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub point: ScanPoint,
    pub initial_state: InitialState,
    pub horizon: f64,
    pub stationary_verdict: Verdict,
    pub markovian_first_violation: Option<f64>,
    pub non_markovian_first_violation: Option<f64>,
    pub non_markovian_anomaly: AnomalyClass,
    pub kernel: KernelEvalConfig,
    pub evolution: EvolutionConfig,
}

/// Outcome of the witness search over a box of parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub markovian_only: Vec<Witness>,
    pub stationary_linked: Vec<Witness>,
    /// Non-Markovian anomalies observed at points whose stationary state
    /// is physical (the paper-level claim is that there are none).
    pub nm_anomalies_at_physical_stationary: usize,
    pub points_scanned: usize,
    pub reports: Vec<PointReport>,
}

/// Default witness search box.
pub fn default_witness_grid() -> ScanGrid {
    ScanGrid {
        gamma: AxisSpec::new(0.05, 0.5, 4, AxisScale::Log),
        cutoff: AxisSpec::new(5.0, 50.0, 3, AxisScale::Log),
        temperature: AxisSpec::new(0.1, 10.0, 4, AxisScale::Log),
        mode: ScanMode::Dynamic,
        initial_state: default_initial_state(),
    }
}

/// Search the grid for both witness kinds.
pub fn find_witnesses(grid: &ScanGrid, settings: &ScanSettings) -> Result<WitnessReport> {
    grid.validate()?;
    let reports = scan_dynamic(grid, settings)?;
    let mut markovian_only = Vec::new();
    let mut stationary_linked = Vec::new();
    let mut nm_at_physical = 0usize;

    for r in &reports {
        let (Some(stat), Some(dy)) = (r.stationary.as_ref(), r.dynamic.as_ref()) else {
            continue;
        };
        let witness = |kind: WitnessKind| Witness {
            kind,
            point: r.point,
            initial_state: grid.initial_state,
            horizon: dy.horizon,
            stationary_verdict: stat.verdict,
            markovian_first_violation: dy.markovian.first_violation,
            non_markovian_first_violation: dy.non_markovian.first_violation,
            non_markovian_anomaly: dy.non_markovian.anomaly,
            kernel: settings.kernel,
            evolution: settings.evolution,
        };
        if stat.verdict == Verdict::Physical {
            if dy.non_markovian.anomaly != AnomalyClass::None {
                nm_at_physical += 1;
            }
            if dy.markovian.anomaly == AnomalyClass::PositivityViolation
                && dy.non_markovian.anomaly == AnomalyClass::None
            {
                markovian_only.push(witness(WitnessKind::MarkovianViolatesOnly));
            }
        } else if stat.verdict == Verdict::Violated
            && dy.non_markovian.anomaly == AnomalyClass::PositivityViolation
        {
            stationary_linked.push(witness(WitnessKind::StationaryViolatedNonMarkovianFollows));
        }
    }

    Ok(WitnessReport {
        markovian_only,
        stationary_linked,
        nm_anomalies_at_physical_stationary: nm_at_physical,
        points_scanned: reports.len(),
        reports,
    })
}

/// Re-run a persisted witness point and return the two measured onset
/// times (Markovian, non-Markovian) under its stored configuration.
pub fn rerun_witness(w: &Witness) -> Result<(Option<f64>, Option<f64>)> {
    let settings = ScanSettings {
        kernel: w.kernel,
        evolution: w.evolution,
        horizon: Some(w.horizon),
    };
    let report = compare_dynamics(&w.point, &w.initial_state, &settings);
    if let Some(e) = report.error {
        return Err(Error::Config(format!("witness re-run failed: {e}")));
    }
    let dy = report.dynamic.expect("no error implies dynamics present");
    Ok((
        dy.markovian.first_violation,
        dy.non_markovian.first_violation,
    ))
}
