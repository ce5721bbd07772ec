//! Operational range estimation for battery-powered mobile robots.
//!
//! The crate predicts how far a robot can travel on one battery discharge.
//! It is organised bottom-up:
//!
//! * [`model`] holds the physical parameter types, the battery decay law and
//!   the ancillary power model.
//! * [`simplified`] is the closed-form range model for a constant grade.
//! * [`generalized`] handles position- and time-dependent force profiles,
//!   with offline, implicit and online (telemetry-driven) estimators.
//! * [`calibration`] fits model parameters from bench and field logs.
//! * [`simulator`] is a fixed-step forward integrator that produces
//!   ground-truth ranges and synthetic telemetry.
//! * [`telemetry`] defines the telemetry CSV format, log replay and error
//!   reports.
//! * [`config`] loads the JSON documents the CLI consumes.

pub mod bisection;
pub mod calibration;
pub mod config;
pub mod error;
pub mod generalized;
pub mod model;
pub mod profile;
pub mod simplified;
pub mod simulator;
pub mod telemetry;

pub use error::{Error, Result};
pub use generalized::{
    estimate_range_offline, solve_range_implicit, traversal_energy, ForceProfile,
    OfflineApproximation, OnlineConfig, OnlineEstimatorState, Pace,
};
pub use model::{
    ancillary_power, effective_energy, maneuvering_efficiency, AncillaryPowerModel, BatteryModel,
    LossFractions, RobotParams,
};
pub use profile::PiecewiseLinear;
pub use simplified::{max_range, total_energy_for_distance, traction_force, SimplifiedMission};
pub use simulator::{DutyPattern, Scenario, SimResult};
pub use telemetry::{ErrorReport, TelemetrySample, Trial};

use serde::{Deserialize, Serialize};

/// Outcome of a range prediction.
///
/// A model with no net energy drain per metre has no finite range. That case
/// is reported as a variant rather than as an infinite float so that
/// downstream arithmetic stays total.
///
/// In JSON a finite range is `{"d_max_m": ...}`; the other outcomes carry a
/// `kind` tag, e.g. `{"kind": "unbounded"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RangeRepr", into = "RangeRepr")]
pub enum RangeEstimate {
    /// Finite range in metres.
    Bounded { d_max_m: f64 },
    /// Energy is never exhausted.
    Unbounded,
    /// The supplied force profile ends before the battery is drained.
    UnboundedWithinProfile { domain_limit_m: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RangeRepr {
    Bounded { d_max_m: f64 },
    Other(NoFiniteRange),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum NoFiniteRange {
    Unbounded,
    UnboundedWithinProfile { domain_limit_m: f64 },
}

impl From<RangeEstimate> for RangeRepr {
    fn from(r: RangeEstimate) -> Self {
        match r {
            RangeEstimate::Bounded { d_max_m } => RangeRepr::Bounded { d_max_m },
            RangeEstimate::Unbounded => RangeRepr::Other(NoFiniteRange::Unbounded),
            RangeEstimate::UnboundedWithinProfile { domain_limit_m } => {
                RangeRepr::Other(NoFiniteRange::UnboundedWithinProfile { domain_limit_m })
            }
        }
    }
}

impl From<RangeRepr> for RangeEstimate {
    fn from(r: RangeRepr) -> Self {
        match r {
            RangeRepr::Bounded { d_max_m } => RangeEstimate::Bounded { d_max_m },
            RangeRepr::Other(NoFiniteRange::Unbounded) => RangeEstimate::Unbounded,
            RangeRepr::Other(NoFiniteRange::UnboundedWithinProfile { domain_limit_m }) => {
                RangeEstimate::UnboundedWithinProfile { domain_limit_m }
            }
        }
    }
}

impl RangeEstimate {
    pub fn bounded(d: f64) -> Self {
        RangeEstimate::Bounded { d_max_m: d }
    }

    /// The finite range, if there is one.
    pub fn distance(&self) -> Option<f64> {
        match *self {
            RangeEstimate::Bounded { d_max_m } => Some(d_max_m),
            _ => None,
        }
    }
}
