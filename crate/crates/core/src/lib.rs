//! Event-by-event simulation of the S³ (quaternionic 3-sphere) local model
//! of the singlet correlation.
//!
//! * [`ga`]: vectors, bivectors, unit quaternions, composite rotations and
//!   geodesic distances on S³ and ℝP³.
//! * [`singlet`]: measurement functions, the limit-of-product joint value and
//!   the correlation estimator.
//! * [`pearle`]: the state-space bridge to Pearle's SO(3) ball, with its S³
//!   pre-selected ensemble, rejection contrast and flat baseline.
//! * [`inequality`]: bounds of CHSH-type expressions by enumeration, Boole
//!   checks of datasets, and `S` from any correlation evaluator.
//! * [`curve`]: angle grids and correlation curves with a CSV form.

pub mod curve;
pub mod ga;
pub mod inequality;
pub mod pearle;
pub mod rng;
pub mod sign;
pub mod singlet;
pub mod stats;

pub use curve::{AngleGrid, CorrelationCurve, CurveError, CurvePoint};
pub use ga::{Bivector, GaError, Quaternion, UnitVector3, Vec3};
pub use inequality::{InequalityError, SettingsQuad};
pub use pearle::{BridgeConfig, BridgeMode, MeasurementContext, PearleError};
pub use sign::Sign;
pub use singlet::{HiddenVariable, SingletError, WindingRule};
pub use stats::CorrelationEstimate;

use thiserror::Error;

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Singlet(#[from] SingletError),
    #[error(transparent)]
    Pearle(#[from] PearleError),
    #[error(transparent)]
    Inequality(#[from] InequalityError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}
