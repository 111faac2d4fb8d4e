//! Versioned, deterministic text outputs: coefficient tables, trajectory
//! CSV, scan maps, and run summaries. Floats are written with Rust's
//! shortest round-trip formatting, so identical runs produce identical
//! bytes regardless of parallelism.

use crate::bath::BathSpec;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianKD, Verdict};
use crate::propagator::{StationaryState, Trajectory};
use crate::scan::{classify_anomaly, AnomalyClass, PointReport};
use serde::{Deserialize, Serialize};
use std::io::Write;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Coefficient table: `t, omega_p2, lambda, d_px, d_pp` under a JSON
/// header carrying the bath parameters and the asymptotic values.
pub fn write_coeffs_csv<W: Write>(
    mut w: W,
    bath: &BathSpec,
    markovian: &CoefficientSet,
    rows: &[(f64, CoefficientSet)],
) -> Result<()> {
    let meta = serde_json::json!({
        "bath": bath,
        "markovian": markovian,
    });
    writeln!(w, "# hpz-coeffs-csv v1 {meta}").map_err(io_err)?;
    writeln!(w, "t,omega_p2,lambda,d_px,d_pp").map_err(io_err)?;
    for (t, set) in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            t, set.omega_p_sq, set.lambda, set.d_px, set.d_pp
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Trajectory samples: `t, c1..c6, a, b, c, purity, verdict`.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    writeln!(w, "# hpz-trajectory-csv v1").map_err(io_err)?;
    writeln!(w, "t,c1,c2,c3,c4,c5,c6,a,b,c,purity,verdict").map_err(io_err)?;
    for s in &traj.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            s.state.c1,
            s.state.c2,
            s.state.c3,
            s.state.c4,
            s.state.c5,
            s.state.c6,
            s.a,
            s.b,
            s.c,
            s.purity,
            s.verdict
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Scan map, one row per grid point; dynamic columns stay empty for
/// stationary-only scans.
pub fn write_scan_csv<W: Write>(mut w: W, reports: &[PointReport]) -> Result<()> {
    writeln!(w, "# hpz-scan-csv v1").map_err(io_err)?;
    writeln!(
        w,
        "gamma,cutoff,temperature,stationary_verdict,stationary_purity,stationary_a_over_c,residual,nm_first_violation,nm_anomaly,m_first_violation,m_anomaly,horizon,error"
    )
    .map_err(io_err)?;
    for r in reports {
        let (sv, sp, ac, res) = match &r.stationary {
            Some(s) => (
                s.verdict.to_string(),
                opt(s.purity),
                opt(s.a_over_c),
                s.residual.to_string(),
            ),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        let (nmv, nma, mv, ma, hz) = match &r.dynamic {
            Some(d) => (
                opt(d.non_markovian.first_violation),
                d.non_markovian.anomaly.to_string(),
                opt(d.markovian.first_violation),
                d.markovian.anomaly.to_string(),
                d.horizon.to_string(),
            ),
            None => (
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.gamma,
            r.point.cutoff,
            r.point.temperature,
            sv,
            sp,
            ac,
            res,
            nmv,
            nma,
            mv,
            ma,
            hz,
            r.error.clone().unwrap_or_default()
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Two-column plot file (e.g. A/C against t).
pub fn write_ac_ratio_csv<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    writeln!(w, "# hpz-acratio-csv v1").map_err(io_err)?;
    writeln!(w, "t,a_over_c").map_err(io_err)?;
    for s in &traj.samples {
        let ratio = if s.c > 0.0 { s.a / s.c } else { f64::NAN };
        writeln!(w, "{},{}", s.t, ratio).map_err(io_err)?;
    }
    Ok(())
}

/// JSON run summary for a single trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub final_t: f64,
    pub final_state: GaussianKD,
    pub final_verdict: Verdict,
    pub anomaly: AnomalyClass,
    pub first_violation: Option<f64>,
    pub first_normalizability_loss: Option<f64>,
    pub truncated: bool,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub low_temperature: bool,
    pub stationary: Option<StationarySummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarySummary {
    pub verdict: Verdict,
    pub purity: Option<f64>,
    pub residual: f64,
    /// Euclidean distance of the final (c1, c2, c3) from the fixed point.
    pub distance: f64,
}

impl TrajectorySummary {
    pub fn new(traj: &Trajectory, stationary: Option<&StationaryState>) -> Self {
        let stationary = stationary.map(|st| {
            let f = traj.final_state;
            let d = ((f.c1 - st.state.c1).powi(2)
                + (f.c2 - st.state.c2).powi(2)
                + (f.c3 - st.state.c3).powi(2))
            .sqrt();
            StationarySummary {
                verdict: st.verdict,
                purity: st.purity,
                residual: st.residual,
                distance: d,
            }
        });
        TrajectorySummary {
            final_t: traj.final_t,
            final_state: traj.final_state,
            final_verdict: traj.final_verdict(),
            anomaly: classify_anomaly(traj),
            first_violation: traj.first_violation,
            first_normalizability_loss: traj.first_normalizability_loss,
            truncated: traj.truncated,
            steps_accepted: traj.steps_accepted,
            steps_rejected: traj.steps_rejected,
            low_temperature: traj.low_temperature,
            stationary,
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Config(format!("write failed: {e}"))
}
