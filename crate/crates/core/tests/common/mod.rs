#![allow(dead_code)]

use oprange_core::generalized::{
    estimate_range_offline, OfflineApproximation, OnlineEstimatorState,
};
use oprange_core::simulator::{add_noise, run, DutyPattern, Scenario};
use oprange_core::{
    AncillaryPowerModel, BatteryModel, LossFractions, PiecewiseLinear, RobotParams, SimResult,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// 10 kg, C_rr 0.1, lossless, no ancillary draw: 9.81 N at 1 m/s.
pub fn flat_scenario(energy_j: f64) -> Scenario {
    let robot = RobotParams::new(10.0, 0.1, 0.0, LossFractions::LOSSLESS).unwrap();
    Scenario::constant(
        robot,
        BatteryModel::fresh(energy_j),
        AncillaryPowerModel::constant(0.0),
        1.0,
    )
}

/// Friction rising so that rolling resistance is 0.1 N per metre travelled,
/// grid out to `len_m`.
pub fn ramp_scenario(energy_j: f64, len_m: f64) -> Scenario {
    let mut s = flat_scenario(energy_j);
    s.robot.c_rr = 0.0;
    let weight = s.robot.weight_n();
    s.friction_profile =
        Some(PiecewiseLinear::new([(0.0, 0.0), (len_m, 0.1 * len_m / weight)]).unwrap());
    s
}

/// A richer constant scenario: drag, drivetrain losses, ancillary draw,
/// a fixed grade and duty cycling.
pub fn busy_constant_scenario() -> Scenario {
    let robot = RobotParams::new(14.0, 0.07, 0.3, LossFractions::drivetrain(0.12, 0.08)).unwrap();
    let mut s = Scenario::constant(
        robot,
        BatteryModel {
            rated_energy_j: 6000.0,
            k1: 0.001,
            k2: 0.0005,
            cycles: 40.0,
            age_days: 120.0,
        },
        AncillaryPowerModel {
            s0_w: 2.0,
            s1_w_per_hz: 0.05,
            f_s_hz: 20.0,
            p_comp_w: 1.0,
            p_comm_w: 0.5,
        },
        0.8,
    );
    s.grade_profile = Some(PiecewiseLinear::constant(0.03).unwrap());
    s.duty_pattern = DutyPattern {
        move_s: 2.0,
        pause_s: 1.0,
    };
    s
}

/// Feeds telemetry through a fresh online estimator, returning the estimate
/// recorded after each sample together with the sample's position.
pub fn online_trace(result: &SimResult, battery: &BatteryModel) -> Vec<(f64, Option<f64>)> {
    let mut st = OnlineEstimatorState::default();
    result
        .telemetry
        .iter()
        .map(|s| (s.x_m, st.update(s, battery).unwrap()))
        .collect()
}

/// First estimate recorded at or beyond `fraction` of the true range.
pub fn estimate_at(trace: &[(f64, Option<f64>)], truth: f64, fraction: f64) -> f64 {
    trace
        .iter()
        .find(|(x, e)| *x >= fraction * truth && e.is_some())
        .and_then(|(_, e)| *e)
        .expect("trace reaches checkpoint")
}

pub struct DisturbedTrial {
    pub scenario: Scenario,
    pub result: SimResult,
    pub offline_m: f64,
}

/// A mission with a random wind-like disturbance. The supervisor forecasts
/// the mean disturbance; the realised level differs by up to +-60 % and
/// fluctuates around it every 10 s.
pub fn disturbed_trial(seed: u64, noise: f64) -> DisturbedTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robot = RobotParams::new(
        rng.random_range(5.0..20.0),
        rng.random_range(0.03..0.15),
        rng.random_range(0.0..0.5),
        LossFractions::drivetrain(rng.random_range(0.05..0.3), rng.random_range(0.05..0.2)),
    )
    .unwrap();
    let anc = AncillaryPowerModel::constant(rng.random_range(1.0..6.0));
    let v = rng.random_range(0.5..1.5);
    let mut s = Scenario::constant(
        robot.clone(),
        BatteryModel::fresh(rng.random_range(3000.0..8000.0)),
        anc.clone(),
        v,
    );
    s.duty_pattern = DutyPattern {
        move_s: rng.random_range(1.0..4.0),
        pause_s: rng.random_range(0.0..1.5),
    };
    let forecast = rng.random_range(1.0..4.0);
    let level = forecast * rng.random_range(0.4..1.6);
    let pace = s.pace();
    let terrain = s.force_profile().unwrap();
    let offline_m = estimate_range_offline(
        &robot,
        &s.battery,
        &anc,
        &terrain,
        &OfflineApproximation {
            mean_specific_force_n: forecast,
        },
        pace,
    )
    .unwrap()
    .distance()
    .unwrap();
    let horizon_s = 3.0 * offline_m / pace.ground_speed();
    let knots = (0..=(horizon_s / 10.0) as usize + 1)
        .map(|k| (k as f64 * 10.0, level * rng.random_range(0.5..1.5)));
    s.disturbance_profile = Some(PiecewiseLinear::new(knots).unwrap());
    let result = add_noise(&run(&s).unwrap(), noise, seed).unwrap();
    DisturbedTrial {
        scenario: s,
        result,
        offline_m,
    }
}

/// Constant-condition mission with randomised parameters and no disturbance.
pub fn constant_trial(seed: u64, noise: f64) -> (Scenario, SimResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robot = RobotParams::new(
        rng.random_range(5.0..20.0),
        rng.random_range(0.03..0.15),
        rng.random_range(0.0..0.5),
        LossFractions::drivetrain(rng.random_range(0.05..0.3), rng.random_range(0.05..0.2)),
    )
    .unwrap();
    let mut s = Scenario::constant(
        robot,
        BatteryModel::fresh(rng.random_range(3000.0..8000.0)),
        AncillaryPowerModel::constant(rng.random_range(1.0..6.0)),
        rng.random_range(0.5..1.5),
    );
    s.duty_pattern = DutyPattern {
        move_s: rng.random_range(1.0..4.0),
        pause_s: rng.random_range(0.0..1.5),
    };
    let result = add_noise(&run(&s).unwrap(), noise, seed).unwrap();
    (s, result)
}
