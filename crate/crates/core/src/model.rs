//! Physical parameters shared by every estimator.
//!
//! Efficiencies compose multiplicatively: a loss fraction `eta` contributes a
//! factor `1 - eta`. Battery storage loss is realised only through the decay
//! law in [`effective_energy`], and ancillary heat loss is assumed to be part
//! of the configured ancillary power, so neither is applied as a separate
//! divisor anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{check_at_least, check_positive, Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.81;

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

/// Physical constants of one robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    pub mass_kg: f64,
    /// Rolling-resistance coefficient.
    pub c_rr: f64,
    /// Lumped aerodynamic drag coefficient in kg/m (drag force is `c * v^2`).
    pub drag_coeff: f64,
    pub losses: LossFractions,
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
}

impl RobotParams {
    pub fn new(mass_kg: f64, c_rr: f64, drag_coeff: f64, losses: LossFractions) -> Result<Self> {
        let r = RobotParams {
            mass_kg,
            c_rr,
            drag_coeff,
            losses,
            gravity_mps2: STANDARD_GRAVITY,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mass_kg", self.mass_kg)?;
        check_positive("gravity_mps2", self.gravity_mps2)?;
        check_at_least("c_rr", self.c_rr, 0.0)?;
        check_at_least("drag_coeff", self.drag_coeff, 0.0)?;
        self.losses.validate()
    }

    /// Weight `m * g` in newtons.
    pub fn weight_n(&self) -> f64 {
        self.mass_kg * self.gravity_mps2
    }

    pub fn maneuvering_efficiency(&self) -> f64 {
        maneuvering_efficiency(&self.losses)
    }
}

/// The four loss groups, each a fraction in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFractions {
    #[serde(default)]
    pub eta1_battery: f64,
    #[serde(default)]
    pub eta2_drive_motor: f64,
    #[serde(default)]
    pub eta3_mechanical: f64,
    #[serde(default)]
    pub eta4_ancillary: f64,
}

impl LossFractions {
    pub const LOSSLESS: LossFractions = LossFractions {
        eta1_battery: 0.0,
        eta2_drive_motor: 0.0,
        eta3_mechanical: 0.0,
        eta4_ancillary: 0.0,
    };

    /// Losses with only the drivetrain terms set.
    pub fn drivetrain(eta2_drive_motor: f64, eta3_mechanical: f64) -> Self {
        LossFractions {
            eta2_drive_motor,
            eta3_mechanical,
            ..Self::LOSSLESS
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [
            ("eta1_battery", self.eta1_battery),
            ("eta2_drive_motor", self.eta2_drive_motor),
            ("eta3_mechanical", self.eta3_mechanical),
            ("eta4_ancillary", self.eta4_ancillary),
        ] {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::invalid(name, format!("must lie in [0, 1), got {eta}")));
            }
        }
        Ok(())
    }

    /// Overall efficiency, the product of `1 - eta_i` over all four groups.
    pub fn system_efficiency(&self) -> f64 {
        (1.0 - self.eta1_battery)
            * (1.0 - self.eta2_drive_motor)
            * (1.0 - self.eta3_mechanical)
            * (1.0 - self.eta4_ancillary)
    }
}

/// Drivetrain efficiency `(1 - eta2) * (1 - eta3)`.
pub fn maneuvering_efficiency(l: &LossFractions) -> f64 {
    (1.0 - l.eta2_drive_motor) * (1.0 - l.eta3_mechanical)
}

/// Battery pack described as rated energy decaying exponentially with
/// recharge cycles and calendar age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryModel {
    pub rated_energy_j: f64,
    /// Per-cycle decay coefficient (1/cycle).
    #[serde(default)]
    pub k1: f64,
    /// Ageing decay coefficient (1/day).
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub cycles: f64,
    #[serde(default)]
    pub age_days: f64,
}

impl BatteryModel {
    /// A fresh pack with no decay.
    pub fn fresh(rated_energy_j: f64) -> Self {
        BatteryModel {
            rated_energy_j,
            k1: 0.0,
            k2: 0.0,
            cycles: 0.0,
            age_days: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_at_least("rated_energy_j", self.rated_energy_j, 0.0)?;
        check_at_least("k1", self.k1, 0.0)?;
        check_at_least("k2", self.k2, 0.0)?;
        check_at_least("cycles", self.cycles, 0.0)?;
        check_at_least("age_days", self.age_days, 0.0)
    }

    pub fn effective_energy(&self) -> Result<f64> {
        effective_energy(self)
    }
}

/// Usable energy `E_O * exp(-(k1 * C + k2 * t))` in joules.
///
/// Cycle count and age act independently; there is no interaction term.
pub fn effective_energy(b: &BatteryModel) -> Result<f64> {
    b.validate()?;
    Ok(b.rated_energy_j * (-(b.k1 * b.cycles + b.k2 * b.age_days)).exp())
}

/// Non-locomotion power draw: sensing plus computation and communication.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaryPowerModel {
    pub s0_w: f64,
    #[serde(default)]
    pub s1_w_per_hz: f64,
    #[serde(default)]
    pub f_s_hz: f64,
    #[serde(default)]
    pub p_comp_w: f64,
    #[serde(default)]
    pub p_comm_w: f64,
}

impl AncillaryPowerModel {
    /// A fixed draw with no frequency dependence.
    pub fn constant(power_w: f64) -> Self {
        AncillaryPowerModel {
            s0_w: power_w,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_at_least("s0_w", self.s0_w, 0.0)?;
        check_at_least("s1_w_per_hz", self.s1_w_per_hz, 0.0)?;
        check_at_least("f_s_hz", self.f_s_hz, 0.0)?;
        check_at_least("p_comp_w", self.p_comp_w, 0.0)?;
        check_at_least("p_comm_w", self.p_comm_w, 0.0)
    }

    pub fn sensing_power(&self) -> f64 {
        self.s0_w + self.s1_w_per_hz * self.f_s_hz
    }

    pub fn power(&self) -> Result<f64> {
        ancillary_power(self)
    }
}

/// Total ancillary power `(s0 + s1 * f_s) + P_comp + P_comm` in watts.
pub fn ancillary_power(a: &AncillaryPowerModel) -> Result<f64> {
    a.validate()?;
    Ok(a.sensing_power() + a.p_comp_w + a.p_comm_w)
}
