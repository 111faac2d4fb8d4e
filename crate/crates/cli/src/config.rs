//! TOML run configuration shared by all subcommands.

use hpz_core::bath::KernelEvalConfig;
use hpz_core::gaussian::InitialState;
use hpz_core::propagator::EvolutionConfig;
use hpz_core::scan::{AxisSpec, ScanGrid, ScanMode, ScanSettings};
use hpz_core::{BathSpec, Error};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub bath: Option<BathSection>,
    pub kernel: Option<KernelEvalConfig>,
    pub initial_state: Option<InitialState>,
    pub evolution: Option<EvolutionSection>,
    pub coeffs: Option<CoeffsSection>,
    pub grid: Option<GridSection>,
}

/// Bath parameters; the three ratios are in reduced units unless the
/// absolute constants are overridden.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub gamma: f64,
    pub cutoff: f64,
    pub temperature: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub omega0: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub k_b: f64,
}

fn one() -> f64 {
    1.0
}

impl BathSection {
    pub fn to_bath(&self) -> Result<BathSpec, Error> {
        let spec = BathSpec {
            mass: self.mass,
            omega0: self.omega0,
            gamma: self.gamma,
            cutoff: self.cutoff,
            temperature: self.temperature,
            hbar: self.hbar,
            k_b: self.k_b,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub t_end: f64,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub sample_dt: Option<f64>,
    #[serde(default)]
    pub event_tol: Option<f64>,
    #[serde(default)]
    pub positivity_tol: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
}

impl EvolutionSection {
    pub fn to_config(&self) -> EvolutionConfig {
        let mut cfg = EvolutionConfig::default();
        if let Some(v) = self.rtol {
            cfg.rtol = v;
        }
        if let Some(v) = self.atol {
            cfg.atol = v;
        }
        cfg.sample_dt = self.sample_dt;
        if let Some(v) = self.event_tol {
            cfg.event_tol = v;
        }
        if let Some(v) = self.positivity_tol {
            cfg.positivity_tol = v;
        }
        cfg.max_step = self.max_step;
        cfg
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsSection {
    pub t_max: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub gamma: AxisSpec,
    pub cutoff: AxisSpec,
    pub temperature: AxisSpec,
    #[serde(default)]
    pub mode: ScanMode,
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl GridSection {
    pub fn to_grid(&self, initial_state: InitialState) -> ScanGrid {
        ScanGrid {
            gamma: self.gamma,
            cutoff: self.cutoff,
            temperature: self.temperature,
            mode: self.mode,
            initial_state,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn bath(&self) -> Result<BathSpec, Error> {
        self.bath
            .as_ref()
            .ok_or_else(|| Error::Config("missing [bath] section".into()))?
            .to_bath()
    }

    pub fn kernel(&self) -> KernelEvalConfig {
        self.kernel.unwrap_or_default()
    }

    pub fn initial_state(&self) -> InitialState {
        self.initial_state.unwrap_or_else(InitialState::ground)
    }

    pub fn evolution(&self) -> Result<(f64, EvolutionConfig), Error> {
        let section = self
            .evolution
            .as_ref()
            .ok_or_else(|| Error::Config("missing [evolution] section".into()))?;
        if !(section.t_end > 0.0) {
            return Err(Error::Config("evolution.t_end must be positive".into()));
        }
        Ok((section.t_end, section.to_config()))
    }

    pub fn scan_settings(&self) -> ScanSettings {
        ScanSettings {
            kernel: self.kernel(),
            evolution: self
                .evolution
                .as_ref()
                .map(|e| e.to_config())
                .unwrap_or_default(),
            horizon: self.grid.as_ref().and_then(|g| g.horizon),
        }
    }
}
