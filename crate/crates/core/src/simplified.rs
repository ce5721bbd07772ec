//! Closed-form range model for a robot cruising on a constant grade.
//!
//! Energy per metre is the sum of the ancillary draw spread over the average
//! ground speed `v * D` and the traction force divided by the drivetrain
//! efficiency. The maximum range is the usable battery energy divided by that
//! per-metre cost, evaluated at the supervisor's operating velocity `v_opt`.

use serde::{Deserialize, Serialize};

use crate::error::{check_at_least, check_positive, Error, Result};
use crate::model::{AncillaryPowerModel, BatteryModel, RobotParams};
use crate::RangeEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplifiedMission {
    /// Surface elevation angle in radians, strictly inside (-pi/2, pi/2).
    #[serde(default)]
    pub grade_theta_rad: f64,
    pub velocity_mps: f64,
    pub v_opt_mps: f64,
    /// Fraction of mission time spent moving, in (0, 1].
    pub duty_cycle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
}

impl SimplifiedMission {
    /// A mission whose commanded velocity is the operating velocity.
    pub fn at_speed(grade_theta_rad: f64, velocity_mps: f64, duty_cycle: f64) -> Self {
        SimplifiedMission {
            grade_theta_rad,
            velocity_mps,
            v_opt_mps: velocity_mps,
            duty_cycle,
            distance_m: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grade_theta_rad.is_nan() || self.grade_theta_rad.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::invalid(
                "grade_theta_rad",
                format!("must lie in (-pi/2, pi/2), got {}", self.grade_theta_rad),
            ));
        }
        check_positive("velocity_mps", self.velocity_mps)?;
        check_positive("v_opt_mps", self.v_opt_mps)?;
        check_positive("duty_cycle", self.duty_cycle)?;
        if self.duty_cycle > 1.0 {
            return Err(Error::invalid(
                "duty_cycle",
                format!("must be <= 1, got {}", self.duty_cycle),
            ));
        }
        if let Some(d) = self.distance_m {
            check_at_least("distance_m", d, 0.0)?;
        }
        Ok(())
    }
}

/// Velocity-independent part of the traction force: rolling resistance on the
/// normal force plus the weight component along the slope.
///
/// The generalized estimator uses this same expression as its constant force
/// so the two models reduce to each other bit-for-bit.
pub fn grade_and_rolling_force(r: &RobotParams, theta: f64) -> f64 {
    let (m, g) = (r.mass_kg, r.gravity_mps2);
    r.c_rr * m * g * theta.cos() + m * g * theta.sin()
}

/// Traction force at an arbitrary velocity.
pub fn traction_at(r: &RobotParams, theta: f64, velocity: f64) -> f64 {
    grade_and_rolling_force(r, theta) + r.drag_coeff * velocity * velocity
}

/// `C_rr * m * g * cos(theta) + c * v^2 + m * g * sin(theta)` at the
/// commanded velocity.
pub fn traction_force(r: &RobotParams, m: &SimplifiedMission) -> f64 {
    traction_at(r, m.grade_theta_rad, m.velocity_mps)
}

/// Mechanical work against the resistive forces over `d` metres.
///
/// Negative on steep enough downhill grades; there is no clamping here.
pub fn maneuvering_energy(r: &RobotParams, m: &SimplifiedMission, d: f64) -> Result<f64> {
    check_at_least("distance_m", d, 0.0)?;
    Ok(traction_force(r, m) * d)
}

/// Electrical energy split into its ancillary and traversal parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub ancillary_j: f64,
    pub traversal_j: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.ancillary_j + self.traversal_j
    }
}

/// Energy needed to cover `d` metres at the commanded velocity.
///
/// The battery model is not consumed here; it is accepted so the signature
/// mirrors [`max_range`] and is validated for consistency.
pub fn total_energy_for_distance(
    r: &RobotParams,
    b: &BatteryModel,
    a: &AncillaryPowerModel,
    m: &SimplifiedMission,
    d: f64,
) -> Result<EnergyBudget> {
    r.validate()?;
    b.validate()?;
    m.validate()?;
    let p_anc = a.power()?;
    let me = maneuvering_energy(r, m, d)?;
    Ok(EnergyBudget {
        ancillary_j: p_anc * d / (m.velocity_mps * m.duty_cycle),
        traversal_j: me / r.maneuvering_efficiency(),
    })
}

/// Energy cost per metre at velocity `v` and duty cycle `duty`.
pub(crate) fn per_metre_cost(
    p_anc: f64,
    v: f64,
    duty: f64,
    force: f64,
    omega_man: f64,
) -> f64 {
    p_anc / (v * duty) + force / omega_man
}

/// Maximum range at the operating velocity `v_opt`.
///
/// Drag is evaluated at `v_opt`. Returns [`RangeEstimate::Unbounded`] when the
/// per-metre cost is not positive (no resistance, no ancillary draw, or a
/// downhill grade steep enough to cancel both).
pub fn max_range(
    r: &RobotParams,
    b: &BatteryModel,
    a: &AncillaryPowerModel,
    m: &SimplifiedMission,
) -> Result<RangeEstimate> {
    r.validate()?;
    m.validate()?;
    let energy = b.effective_energy()?;
    let p_anc = a.power()?;
    let traction = traction_at(r, m.grade_theta_rad, m.v_opt_mps);
    let denom = per_metre_cost(
        p_anc,
        m.v_opt_mps,
        m.duty_cycle,
        traction,
        r.maneuvering_efficiency(),
    );
    if denom <= 0.0 {
        return Ok(RangeEstimate::Unbounded);
    }
    Ok(RangeEstimate::bounded(energy / denom))
}
