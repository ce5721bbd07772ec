//! Fixtures shared by the criterion benchmarks.

use oprange_core::{
    AncillaryPowerModel, BatteryModel, ForceProfile, LossFractions, PiecewiseLinear, RobotParams,
    Scenario,
};

pub fn robot() -> RobotParams {
    RobotParams::new(12.0, 0.08, 0.2, LossFractions::drivetrain(0.1, 0.15)).expect("valid robot")
}

/// Undulating terrain sampled every metre plus a gusty time profile.
pub fn rough_profile(len_m: usize) -> ForceProfile {
    let position = PiecewiseLinear::new(
        (0..=len_m).map(|i| (i as f64, 5.0 + 3.0 * (i as f64 * 0.07).sin())),
    )
    .expect("valid grid");
    let time = PiecewiseLinear::new(
        (0..=len_m * 2).map(|i| (i as f64, 1.5 + (i as f64 * 0.31).cos())),
    )
    .expect("valid grid");
    ForceProfile {
        f_const_n: 2.0,
        drag_coeff: 0.2,
        position: Some(position),
        time: Some(time),
    }
}

pub fn scenario(rated_energy_j: f64) -> Scenario {
    let mut s = Scenario::constant(
        robot(),
        BatteryModel::fresh(rated_energy_j),
        AncillaryPowerModel::constant(4.0),
        1.0,
    );
    s.friction_profile = Some(
        PiecewiseLinear::new((0..=500).map(|i| (i as f64, 0.05 + 0.03 * (i as f64 * 0.05).sin())))
            .expect("valid grid"),
    );
    s
}
