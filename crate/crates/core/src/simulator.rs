//! Forward longitudinal-dynamics simulation of a discharge cycle.
//!
//! The robot alternates between moving at cruise velocity and pausing. While
//! moving it draws `P_anc + F(x, t) * v / omega_man`; while paused it draws
//! `P_anc`. Integration is explicit and fixed-step, with steps shortened to
//! land exactly on move/pause switches and telemetry sample times. The run
//! stops inside the step where cumulative energy reaches the usable battery
//! energy, interpolating the final position linearly within that step.
//!
//! Traction power is never negative: there is no regenerative braking, so a
//! descent steep enough to push the robot costs only ancillary power.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_at_least, check_positive, Error, Result};
use crate::generalized::{ForceProfile, Pace};
use crate::model::{AncillaryPowerModel, BatteryModel, RobotParams};
use crate::profile::PiecewiseLinear;
use crate::telemetry::TelemetrySample;

pub const DEFAULT_DT_S: f64 = 0.01;
pub const DEFAULT_SAMPLE_PERIOD_S: f64 = 0.1;
/// Upper bound on integration steps before a run is declared non-terminating.
pub const MAX_STEPS: u64 = 50_000_000;

/// Remaining time below which a phase or sample boundary counts as reached.
const EVENT_EPS: f64 = 1e-12;

fn default_dt() -> f64 {
    DEFAULT_DT_S
}

fn default_sample_period() -> f64 {
    DEFAULT_SAMPLE_PERIOD_S
}

/// Deterministic move/pause alternation. Duty cycle is `move / (move + pause)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DutyPattern {
    pub move_s: f64,
    #[serde(default)]
    pub pause_s: f64,
}

impl Default for DutyPattern {
    fn default() -> Self {
        DutyPattern::CONTINUOUS
    }
}

impl DutyPattern {
    pub const CONTINUOUS: DutyPattern = DutyPattern {
        move_s: 1.0,
        pause_s: 0.0,
    };

    pub fn duty_cycle(&self) -> f64 {
        self.move_s / (self.move_s + self.pause_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub robot: RobotParams,
    pub battery: BatteryModel,
    pub ancillary: AncillaryPowerModel,
    /// Grade angle (rad) over position (m). Level ground when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade_profile: Option<PiecewiseLinear>,
    /// Rolling-resistance coefficient over position (m). The robot's `c_rr`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction_profile: Option<PiecewiseLinear>,
    /// Disturbance force (N) over mission time (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_profile: Option<PiecewiseLinear>,
    pub velocity_mps: f64,
    #[serde(default)]
    pub duty_pattern: DutyPattern,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_sample_period")]
    pub sample_period_s: f64,
    /// Relative telemetry power noise, applied by [`add_noise`].
    #[serde(default)]
    pub power_noise_rel: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Level, uniform, undisturbed, continuously moving scenario.
    pub fn constant(
        robot: RobotParams,
        battery: BatteryModel,
        ancillary: AncillaryPowerModel,
        velocity_mps: f64,
    ) -> Self {
        Scenario {
            robot,
            battery,
            ancillary,
            grade_profile: None,
            friction_profile: None,
            disturbance_profile: None,
            velocity_mps,
            duty_pattern: DutyPattern::CONTINUOUS,
            dt_s: DEFAULT_DT_S,
            sample_period_s: DEFAULT_SAMPLE_PERIOD_S,
            power_noise_rel: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.battery.validate()?;
        self.ancillary.validate()?;
        check_positive("velocity_mps", self.velocity_mps)?;
        check_positive("duty_pattern.move_s", self.duty_pattern.move_s)?;
        check_at_least("duty_pattern.pause_s", self.duty_pattern.pause_s, 0.0)?;
        check_positive("dt_s", self.dt_s)?;
        check_positive("sample_period_s", self.sample_period_s)?;
        check_noise(self.power_noise_rel)?;
        if let Some(g) = &self.grade_profile {
            if g.values().iter().any(|t| t.abs() >= std::f64::consts::FRAC_PI_2) {
                return Err(Error::invalid("grade_profile", "angles must lie in (-pi/2, pi/2)"));
            }
        }
        if let Some(f) = &self.friction_profile {
            if f.values().iter().any(|&c| c < 0.0) {
                return Err(Error::invalid("friction_profile", "coefficients must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn pace(&self) -> Pace {
        Pace {
            velocity_mps: self.velocity_mps,
            duty_cycle: self.duty_pattern.duty_cycle(),
        }
    }

    fn c_rr_at(&self, x: f64) -> f64 {
        self.friction_profile
            .as_ref()
            .map_or(self.robot.c_rr, |p| p.eval(x))
    }

    fn grade_at(&self, x: f64) -> f64 {
        self.grade_profile.as_ref().map_or(0.0, |p| p.eval(x))
    }

    /// Position-dependent rolling and grade force.
    fn terrain_force(&self, x: f64) -> f64 {
        let w = self.robot.weight_n();
        let theta = self.grade_at(x);
        self.c_rr_at(x) * w * theta.cos() + w * theta.sin()
    }

    fn drag_force(&self) -> f64 {
        self.robot.drag_coeff * self.velocity_mps * self.velocity_mps
    }

    fn disturbance_at(&self, t: f64) -> f64 {
        self.disturbance_profile.as_ref().map_or(0.0, |p| p.eval(t))
    }

    fn terrain_knots(&self) -> Vec<f64> {
        let mut knots: Vec<f64> = self
            .grade_profile
            .iter()
            .chain(&self.friction_profile)
            .flat_map(|p| p.knots().iter().copied())
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        knots
    }

    /// The estimator-side view of this scenario's forces.
    ///
    /// Terrain becomes the position component, sampled at the union of the
    /// grade and friction knots (exact when only one of them varies), and the
    /// disturbance becomes the time component.
    pub fn force_profile(&self) -> Result<ForceProfile> {
        let knots = self.terrain_knots();
        let (f_const_n, position) = if knots.is_empty() {
            (self.terrain_force(0.0), None)
        } else {
            let p = PiecewiseLinear::new(knots.iter().map(|&x| (x, self.terrain_force(x))))?;
            (0.0, Some(p))
        };
        Ok(ForceProfile {
            f_const_n,
            drag_coeff: self.robot.drag_coeff,
            position,
            time: self.disturbance_profile.clone(),
        })
    }

    /// Coarse upper bound on the resistive force anywhere on the mission.
    fn max_force_bound(&self) -> f64 {
        let terrain = std::iter::once(0.0)
            .chain(self.terrain_knots())
            .map(|x| self.terrain_force(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let dist = self
            .disturbance_profile
            .as_ref()
            .map_or(0.0, |p| p.max_value());
        terrain + self.drag_force() + dist
    }
}

fn check_noise(rel: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&rel) {
        return Err(Error::invalid(
            "power_noise_rel",
            format!("must lie in [0, 0.5], got {rel}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub ancillary_j: f64,
    pub traversal_j: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.ancillary_j + self.traversal_j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub true_range_m: f64,
    pub duration_s: f64,
    pub energy_breakdown: EnergyBreakdown,
    pub telemetry: Vec<TelemetrySample>,
}

struct Recorder {
    samples: Vec<TelemetrySample>,
    last_t: f64,
    last_energy: f64,
}

impl Recorder {
    fn record(&mut self, t: f64, x: f64, energy: f64, moving: bool, v: f64) {
        let dt = t - self.last_t;
        if dt <= 0.0 {
            return;
        }
        self.samples.push(TelemetrySample {
            t_s: t,
            x_m: x,
            v_mps: if moving { v } else { 0.0 },
            power_w: (energy - self.last_energy) / dt,
            moving,
        });
        self.last_t = t;
        self.last_energy = energy;
    }
}

/// Integrates one discharge cycle from full battery to exhaustion.
pub fn run(s: &Scenario) -> Result<SimResult> {
    s.validate()?;
    let target = s.battery.effective_energy()?;
    let p_anc = s.ancillary.power()?;
    let omega = s.robot.maneuvering_efficiency();
    let v = s.velocity_mps;
    let traction_power = |x: f64, t: f64| {
        let f = s.terrain_force(x) + s.drag_force() + s.disturbance_at(t);
        (f * v / omega).max(0.0)
    };

    let initial_power = p_anc + traction_power(0.0, 0.0);
    let mut rec = Recorder {
        samples: vec![TelemetrySample {
            t_s: 0.0,
            x_m: 0.0,
            v_mps: v,
            power_w: initial_power,
            moving: true,
        }],
        last_t: 0.0,
        last_energy: 0.0,
    };
    if target == 0.0 {
        return Ok(SimResult {
            true_range_m: 0.0,
            duration_s: 0.0,
            energy_breakdown: EnergyBreakdown::default(),
            telemetry: rec.samples,
        });
    }
    if p_anc <= 0.0 && s.max_force_bound() <= 0.0 {
        return Err(Error::NonTerminating(
            "no ancillary draw and no positive resistive force anywhere".into(),
        ));
    }

    let (mut t, mut x) = (0.0_f64, 0.0_f64);
    let mut budget = EnergyBreakdown::default();
    let mut moving = true;
    let mut phase_left = s.duty_pattern.move_s;
    let mut sample_left = s.sample_period_s;
    let continuous = s.duty_pattern.pause_s == 0.0;

    for _ in 0..MAX_STEPS {
        let mut h = s.dt_s.min(sample_left);
        if !continuous {
            h = h.min(phase_left);
        }
        let trac = if moving { traction_power(x, t) } else { 0.0 };
        let power = p_anc + trac;
        let used = budget.total();
        if used + power * h >= target {
            let frac = (target - used) / (power * h);
            let h_end = h * frac;
            budget.ancillary_j += p_anc * h_end;
            budget.traversal_j += trac * h_end;
            t += h_end;
            if moving {
                x += v * h_end;
            }
            rec.record(t, x, target, moving, v);
            return Ok(SimResult {
                true_range_m: x,
                duration_s: t,
                energy_breakdown: budget,
                telemetry: rec.samples,
            });
        }
        budget.ancillary_j += p_anc * h;
        budget.traversal_j += trac * h;
        t += h;
        if moving {
            x += v * h;
        }

        sample_left -= h;
        if sample_left <= EVENT_EPS {
            rec.record(t, x, budget.total(), moving, v);
            sample_left = s.sample_period_s;
        }
        if !continuous {
            phase_left -= h;
            if phase_left <= EVENT_EPS {
                moving = !moving;
                phase_left = if moving {
                    s.duty_pattern.move_s
                } else {
                    s.duty_pattern.pause_s
                };
            }
        }
    }
    Err(Error::NonTerminating(format!(
        "battery not exhausted after {MAX_STEPS} steps (t = {t} s, x = {x} m)"
    )))
}

/// Multiplies every telemetry power reading by `1 + e`, with `e` drawn
/// uniformly from `[-power_noise_rel, power_noise_rel]`. Deterministic for a
/// given seed; timestamps and distances are untouched.
pub fn add_noise(result: &SimResult, power_noise_rel: f64, seed: u64) -> Result<SimResult> {
    check_noise(power_noise_rel)?;
    let mut out = result.clone();
    if power_noise_rel == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut out.telemetry {
        let eps: f64 = rng.random_range(-power_noise_rel..=power_noise_rel);
        s.power_w *= 1.0 + eps;
    }
    Ok(out)
}

/// [`run`] followed by [`add_noise`] with the scenario's own noise settings.
pub fn simulate(s: &Scenario) -> Result<SimResult> {
    let clean = run(s)?;
    add_noise(&clean, s.power_noise_rel, s.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LossFractions;
    use approx::assert_relative_eq;

    fn flat(energy: f64) -> Scenario {
        let robot = RobotParams::new(10.0, 0.1, 0.0, LossFractions::LOSSLESS).unwrap();
        Scenario::constant(robot, BatteryModel::fresh(energy), AncillaryPowerModel::constant(0.0), 1.0)
    }

    #[test]
    fn constant_flat_matches_closed_form() {
        let r = run(&flat(981.0)).unwrap();
        assert_relative_eq!(r.true_range_m, 100.0, max_relative = 0.005);
        assert_relative_eq!(r.energy_breakdown.total(), 981.0, max_relative = 1e-6);
    }

    #[test]
    fn zero_energy_zero_range() {
        let r = run(&flat(0.0)).unwrap();
        assert_eq!(r.true_range_m, 0.0);
    }

    #[test]
    fn ramp_friction_matches_analytic() {
        let mut s = flat(500.0);
        s.robot.c_rr = 0.0;
        // C_rr(x) * 98.1 N = 0.1 N/m * x
        s.friction_profile = Some(PiecewiseLinear::new([(0.0, 0.0), (100.0, 10.0 / 98.1)]).unwrap());
        let r = run(&s).unwrap();
        assert_relative_eq!(r.true_range_m, 100.0, max_relative = 0.005);
    }

    #[test]
    fn non_terminating_detected() {
        let mut s = flat(100.0);
        s.robot.c_rr = 0.0;
        assert!(matches!(run(&s), Err(Error::NonTerminating(_))));
    }

    #[test]
    fn telemetry_energy_conserved() {
        let mut s = flat(2000.0);
        s.ancillary = AncillaryPowerModel::constant(3.0);
        s.duty_pattern = DutyPattern { move_s: 2.0, pause_s: 0.75 };
        let r = run(&s).unwrap();
        let sum: f64 = r
            .telemetry
            .windows(2)
            .map(|w| w[1].power_w * (w[1].t_s - w[0].t_s))
            .sum();
        assert_relative_eq!(sum, 2000.0, max_relative = 1e-6);
        assert!(r.telemetry.windows(2).all(|w| w[1].x_m >= w[0].x_m && w[1].t_s > w[0].t_s));
        assert!(r.telemetry.iter().any(|s| !s.moving));
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let r = run(&flat(200.0)).unwrap();
        assert_eq!(add_noise(&r, 0.0, 7).unwrap(), r);
        let a = add_noise(&r, 0.05, 7).unwrap();
        let b = add_noise(&r, 0.05, 7).unwrap();
        assert_eq!(a, b);
        for (clean, noisy) in r.telemetry.iter().zip(&a.telemetry) {
            assert!((noisy.power_w / clean.power_w - 1.0).abs() <= 0.05 + 1e-12);
            assert_eq!(clean.t_s, noisy.t_s);
            assert_eq!(clean.x_m, noisy.x_m);
        }
        assert!(add_noise(&r, 0.6, 7).is_err());
    }

    #[test]
    fn scenario_json_defaults() {
        let json = r#"{
            "robot": {"mass_kg": 10, "c_rr": 0.1, "drag_coeff": 0, "losses": {}},
            "battery": {"rated_energy_j": 981},
            "ancillary": {"s0_w": 0},
            "velocity_mps": 1
        }"#;
        let s: Scenario = serde_json::from_str(json).unwrap();
        assert_eq!(s.dt_s, DEFAULT_DT_S);
        assert_eq!(s.duty_pattern, DutyPattern::CONTINUOUS);
        assert!(serde_json::from_str::<Scenario>(&json.replace("\"velocity_mps\"", "\"speed\"")).is_err());
    }
}
