//! Weak-coupling quantum Brownian motion for a damped harmonic
//! oscillator on Gaussian states.
//!
//! The crate evaluates the four time-dependent coefficients of the
//! second-order master equation for an Ohmic Lorentz-Drude bath,
//! propagates Gaussian density operators through the equivalent linear
//! ODE system in the (k, Delta) phase-space representation, monitors the
//! exact positivity criterion A >= C >= 0 along trajectories, and scans
//! parameter space for positivity anomalies of the non-Markovian
//! evolution against its Markovian (frozen-coefficient) counterpart.

pub mod bath;
pub mod coefficients;
pub mod error;
pub mod gaussian;
pub(crate) mod linalg;
pub(crate) mod matsubara;
pub mod numerics;
pub mod output;
pub mod propagator;
pub mod quad;
pub(crate) mod rk;
pub mod scan;

pub use bath::{BathSpec, KernelEvalConfig, KernelMethod};
pub use coefficients::{CoefficientEvaluator, CoefficientSet, TimePoint};
pub use error::{Error, Result};
pub use gaussian::{GaussianKD, GaussianXY, InitialState, SpectrumDescriptor, StateKind, Verdict};
pub use propagator::{
    EvolutionConfig, FrozenCoefficients, GeneratorMatrix, StationaryState, Trajectory,
};
pub use scan::{
    AnomalyClass, AxisScale, AxisSpec, PointReport, ScanGrid, ScanMode, ScanPoint, ScanSettings,
    Witness, WitnessReport,
};
