//! Monte Carlo evaluation of multi-arm trial designs that estimate a whole
//! duration-response curve.
//!
//! Trials are simulated from fixed truth curves ([`scenario`]) under a
//! [`design::TrialDesign`], fitted with fractional polynomials, linear
//! splines or adaptive hinge regression ([`fit`]) on top of a shared
//! logistic IRLS engine ([`glm`]), and scored by the scaled area between the
//! true and fitted curves ([`metrics::sabc`]). [`harness`] runs experiment
//! cells and sweeps; [`report`] writes CSV and SVG output.

pub mod curve;
pub mod design;
pub mod error;
pub mod fit;
pub mod glm;
pub mod harness;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod simulate;

pub use curve::{Curve, FnCurve};
pub use design::TrialDesign;
pub use error::{Error, Result};
pub use fit::{FittedCurve, Method};
pub use glm::{DesignMatrix, GlmFit};
pub use harness::{
    run_cell, run_sweep, CellResult, ExperimentCell, Preset, RunOptions, SummaryRow, SweepResult,
};
pub use metrics::{sabc, summarize, SabcSummary};
pub use scenario::ScenarioCurve;
pub use simulate::{derive_stream, simulate_trial, RngStream, TrialData};
