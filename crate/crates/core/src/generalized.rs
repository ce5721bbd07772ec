//! Range estimation under position- and time-dependent resistive forces.
//!
//! The resistive force on the robot is split into four parts: a constant
//! term, a velocity law `c * v^2`, a sampled function of position and a
//! sampled function of time. Time is mapped to position through the average
//! ground speed, `t = x / (v * D)`, so every term can be integrated along the
//! path.
//!
//! Three estimators are provided:
//!
//! * [`estimate_range_offline`] replaces the position/time integral with a
//!   supervisor-supplied mean force and solves the resulting linear balance.
//! * [`solve_range_implicit`] integrates the sampled profile and finds the
//!   distance at which cumulative energy equals the usable battery energy.
//! * [`OnlineEstimatorState`] extrapolates from measured energy per metre,
//!   taken over a trailing window of telemetry.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bisection::bisect_increasing;
use crate::error::{check_at_least, check_positive, Error, Result};
use crate::model::{AncillaryPowerModel, BatteryModel, RobotParams};
use crate::profile::{integrate, PiecewiseLinear};
use crate::simplified::{grade_and_rolling_force, per_metre_cost};
use crate::telemetry::TelemetrySample;
use crate::RangeEstimate;

/// Cruise velocity and duty cycle; their product is the average ground speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pace {
    pub velocity_mps: f64,
    pub duty_cycle: f64,
}

impl Pace {
    pub fn new(velocity_mps: f64, duty_cycle: f64) -> Result<Self> {
        let p = Pace {
            velocity_mps,
            duty_cycle,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("velocity_mps", self.velocity_mps)?;
        check_positive("duty_cycle", self.duty_cycle)?;
        if self.duty_cycle > 1.0 {
            return Err(Error::invalid(
                "duty_cycle",
                format!("must be <= 1, got {}", self.duty_cycle),
            ));
        }
        Ok(())
    }

    pub fn ground_speed(&self) -> f64 {
        self.velocity_mps * self.duty_cycle
    }
}

/// The four resistive force components acting along the path.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceProfile {
    /// Constant resistive force (N).
    #[serde(default)]
    pub f_const_n: f64,
    /// Coefficient of the velocity law `c * v^2` (kg/m).
    #[serde(default)]
    pub drag_coeff: f64,
    /// Force as a function of position (N over m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<PiecewiseLinear>,
    /// Force as a function of elapsed mission time (N over s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<PiecewiseLinear>,
}

impl ForceProfile {
    pub fn constant(f_const_n: f64, drag_coeff: f64) -> Self {
        ForceProfile {
            f_const_n,
            drag_coeff,
            position: None,
            time: None,
        }
    }

    /// The profile equivalent to a constant-grade simplified mission.
    pub fn from_grade(r: &RobotParams, theta: f64) -> Self {
        Self::constant(grade_and_rolling_force(r, theta), r.drag_coeff)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.f_const_n.is_finite() {
            return Err(Error::invalid("f_const_n", "must be finite"));
        }
        check_at_least("drag_coeff", self.drag_coeff, 0.0)
    }

    pub fn velocity_force(&self, v: f64) -> f64 {
        self.drag_coeff * v * v
    }

    /// Position-independent force at cruise velocity.
    pub fn steady_force(&self, v: f64) -> f64 {
        self.f_const_n + self.velocity_force(v)
    }

    /// Sum of the position and time terms at position `x`.
    fn varying_force(&self, x: f64, ground_speed: f64) -> f64 {
        let fx = self.position.as_ref().map_or(0.0, |p| p.eval(x));
        let ft = self.time.as_ref().map_or(0.0, |p| p.eval(x / ground_speed));
        fx + ft
    }

    fn breakpoints(&self, ground_speed: f64) -> Vec<f64> {
        let mut bp = Vec::new();
        if let Some(p) = &self.position {
            bp.extend_from_slice(p.knots());
        }
        if let Some(p) = &self.time {
            bp.extend(p.knots().iter().map(|t| t * ground_speed));
        }
        bp
    }

    /// Integral of the position and time terms over `[0, d]`.
    pub fn varying_work(&self, d: f64, pace: Pace) -> f64 {
        if self.position.is_none() && self.time.is_none() {
            return 0.0;
        }
        let gs = pace.ground_speed();
        integrate(|x| self.varying_force(x, gs), &self.breakpoints(gs), 0.0, d)
    }

    /// Furthest distance covered by every sampled component, or `None` when the
    /// profile has no sampled components.
    pub fn domain_limit(&self, pace: Pace) -> Option<f64> {
        let pos = self.position.as_ref().map(|p| p.end());
        let time = self.time.as_ref().map(|p| p.end() * pace.ground_speed());
        match (pos, time) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn clamp_warnings(&self, d: f64, pace: Pace) -> Vec<ClampWarning> {
        let mut out = Vec::new();
        let gs = pace.ground_speed();
        if let Some(p) = &self.position {
            if p.start() > 0.0 || p.end() < d {
                out.push(ClampWarning {
                    component: ProfileComponent::Position,
                    domain: (p.start(), p.end()),
                    requested: (0.0, d),
                });
            }
        }
        if let Some(p) = &self.time {
            if p.start() > 0.0 || p.end() < d / gs {
                out.push(ClampWarning {
                    component: ProfileComponent::Time,
                    domain: (p.start(), p.end()),
                    requested: (0.0, d / gs),
                });
            }
        }
        for w in &out {
            log::warn!(
                "{:?} profile evaluated over [{}, {}] outside its grid [{}, {}]; endpoint values held",
                w.component,
                w.requested.0,
                w.requested.1,
                w.domain.0,
                w.domain.1
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileComponent {
    Position,
    Time,
}

/// Records that a sampled profile was extrapolated by endpoint clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampWarning {
    pub component: ProfileComponent,
    pub domain: (f64, f64),
    pub requested: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversalEnergy {
    pub energy_j: f64,
    pub warnings: Vec<ClampWarning>,
}

/// Electrical energy the drivetrain draws to cover `path_length` metres.
pub fn traversal_energy(
    p: &ForceProfile,
    path_length: f64,
    pace: Pace,
    omega_man: f64,
) -> Result<TraversalEnergy> {
    p.validate()?;
    pace.validate()?;
    check_at_least("path_length", path_length, 0.0)?;
    check_efficiency(omega_man)?;
    let work = p.steady_force(pace.velocity_mps) * path_length + p.varying_work(path_length, pace);
    Ok(TraversalEnergy {
        energy_j: work / omega_man,
        warnings: p.clamp_warnings(path_length, pace),
    })
}

fn check_efficiency(omega_man: f64) -> Result<()> {
    if !(omega_man > 0.0 && omega_man <= 1.0) {
        return Err(Error::invalid(
            "omega_man",
            format!("must lie in (0, 1], got {omega_man}"),
        ));
    }
    Ok(())
}

/// Supervisor's one-shot estimate of the mean position/time force along the
/// planned path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineApproximation {
    pub mean_specific_force_n: f64,
}

impl OfflineApproximation {
    /// Mean of the profile's position/time terms over `[0, path_length]`,
    /// as a supervisor with perfect foresight would supply it.
    pub fn from_profile(p: &ForceProfile, path_length: f64, pace: Pace) -> Result<Self> {
        check_positive("path_length", path_length)?;
        pace.validate()?;
        Ok(OfflineApproximation {
            mean_specific_force_n: p.varying_work(path_length, pace) / path_length,
        })
    }
}

/// One-shot range estimate with the integral term replaced by a mean force.
pub fn estimate_range_offline(
    r: &RobotParams,
    b: &BatteryModel,
    a: &AncillaryPowerModel,
    p: &ForceProfile,
    approx: &OfflineApproximation,
    pace: Pace,
) -> Result<RangeEstimate> {
    r.validate()?;
    p.validate()?;
    pace.validate()?;
    if !approx.mean_specific_force_n.is_finite() {
        return Err(Error::invalid("mean_specific_force_n", "must be finite"));
    }
    let energy = b.effective_energy()?;
    let p_anc = a.power()?;
    let omega = r.maneuvering_efficiency();
    let denom = per_metre_cost(
        p_anc,
        pace.velocity_mps,
        pace.duty_cycle,
        p.steady_force(pace.velocity_mps),
        omega,
    ) + approx.mean_specific_force_n / omega;
    if denom <= 0.0 {
        return Ok(RangeEstimate::Unbounded);
    }
    Ok(RangeEstimate::bounded(energy / denom))
}

/// Cumulative electrical energy (ancillary plus traversal) to reach `d`.
pub fn cumulative_energy(
    p: &ForceProfile,
    p_anc: f64,
    omega_man: f64,
    pace: Pace,
    d: f64,
) -> f64 {
    let per_metre = per_metre_cost(
        p_anc,
        pace.velocity_mps,
        pace.duty_cycle,
        p.steady_force(pace.velocity_mps),
        omega_man,
    );
    per_metre * d + p.varying_work(d, pace) / omega_man
}

/// Relative energy-balance tolerance the implicit solution satisfies.
pub const IMPLICIT_ENERGY_RTOL: f64 = 1e-6;

/// Distance at which cumulative energy equals the usable battery energy.
///
/// The distance appears on both sides of the balance (it bounds the force
/// integral), so the root is found by bisection on the cumulative energy,
/// which is strictly increasing whenever the net force is resistive.
///
/// With sampled components the search is limited to the shortest grid. If the
/// battery outlasts it, the result is
/// [`RangeEstimate::UnboundedWithinProfile`].
pub fn solve_range_implicit(
    r: &RobotParams,
    b: &BatteryModel,
    a: &AncillaryPowerModel,
    p: &ForceProfile,
    pace: Pace,
) -> Result<RangeEstimate> {
    r.validate()?;
    p.validate()?;
    pace.validate()?;
    let target = b.effective_energy()?;
    let p_anc = a.power()?;
    let omega = r.maneuvering_efficiency();
    if target == 0.0 {
        return Ok(RangeEstimate::bounded(0.0));
    }
    let energy_at = |d: f64| cumulative_energy(p, p_anc, omega, pace, d);

    let hi = match p.domain_limit(pace) {
        Some(limit) => {
            // A root sitting exactly on the grid end must not be lost to rounding.
            if limit <= 0.0 || energy_at(limit) < target * (1.0 - IMPLICIT_ENERGY_RTOL) {
                return Ok(RangeEstimate::UnboundedWithinProfile {
                    domain_limit_m: limit.max(0.0),
                });
            }
            limit
        }
        None => {
            // Constant profile: grow the bracket until it holds the root.
            let mut hi = 1.0_f64;
            while energy_at(hi) < target {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Ok(RangeEstimate::Unbounded);
                }
            }
            hi
        }
    };

    let d = bisect_increasing(energy_at, 0.0, hi, target);
    let residual = (energy_at(d) - target).abs();
    if residual > IMPLICIT_ENERGY_RTOL * target {
        log::warn!(
            "implicit range solution leaves residual {residual} J; cumulative energy is not monotone"
        );
    }
    let _ = p.clamp_warnings(d, pace);
    Ok(RangeEstimate::bounded(d))
}

/// Window settings for the online estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    /// Window length as a fraction of distance travelled so far.
    pub window_fraction: f64,
    /// Lower bound on the window length (m).
    pub min_window_m: f64,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            window_fraction: 0.2,
            min_window_m: 5.0,
        }
    }
}

impl OnlineConfig {
    /// A fixed window length in metres.
    pub fn fixed(window_m: f64) -> Self {
        OnlineConfig {
            window_fraction: 0.0,
            min_window_m: window_m,
        }
    }

    pub fn window_m(&self, travelled: f64) -> f64 {
        (self.window_fraction * travelled).max(self.min_window_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Increment {
    distance_m: f64,
    energy_j: f64,
}

/// Running state of the telemetry-driven range estimator.
///
/// Each accepted sample contributes the energy drawn since the previous
/// sample, `power_w * dt`, and the distance covered. Intervals with motion
/// enter a trailing window of [`OnlineConfig::window_m`] metres; intervals
/// without motion (pauses) are pooled over the whole mission so far. The
/// remaining range is the unused battery energy divided by the sum of the two
/// per-metre rates. Pooling idle energy keeps a window that covers a fraction
/// of a move/pause period from over- or under-counting pauses.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineEstimatorState {
    config: OnlineConfig,
    distance_so_far_m: f64,
    energy_used_j: f64,
    window: VecDeque<Increment>,
    idle_energy_j: f64,
    last: Option<(f64, f64)>,
    current_estimate_m: Option<f64>,
}

impl Default for OnlineEstimatorState {
    fn default() -> Self {
        Self::new(OnlineConfig::default())
    }
}

impl OnlineEstimatorState {
    pub fn new(config: OnlineConfig) -> Self {
        OnlineEstimatorState {
            config,
            distance_so_far_m: 0.0,
            energy_used_j: 0.0,
            window: VecDeque::new(),
            idle_energy_j: 0.0,
            last: None,
            current_estimate_m: None,
        }
    }

    pub fn config(&self) -> OnlineConfig {
        self.config
    }

    pub fn distance_so_far_m(&self) -> f64 {
        self.distance_so_far_m
    }

    pub fn energy_used_j(&self) -> f64 {
        self.energy_used_j
    }

    /// Latest total-range prediction; `None` until the robot has moved.
    pub fn current_estimate_m(&self) -> Option<f64> {
        self.current_estimate_m
    }

    /// Energy per metre: motion energy over the trailing window plus idle
    /// energy spread over the whole distance so far.
    pub fn specific_consumption(&self) -> Option<f64> {
        let (d, e) = self
            .window
            .iter()
            .fold((0.0, 0.0), |(d, e), i| (d + i.distance_m, e + i.energy_j));
        if d <= 0.0 {
            return None;
        }
        let s = e / d + self.idle_energy_j / self.distance_so_far_m;
        (s > 0.0).then_some(s)
    }

    /// Folds one telemetry sample into the state.
    ///
    /// A rejected sample leaves the state untouched so the caller can skip it
    /// and continue with the stream.
    pub fn update(&mut self, sample: &TelemetrySample, b: &BatteryModel) -> Result<Option<f64>> {
        sample.validate()?;
        let energy = b.effective_energy()?;
        match self.last {
            None => {
                self.distance_so_far_m = sample.x_m;
            }
            Some((t_prev, x_prev)) => {
                if sample.t_s < t_prev || sample.x_m < x_prev {
                    return Err(Error::InvalidSample(format!(
                        "out of order: (t={}, x={}) after (t={t_prev}, x={x_prev})",
                        sample.t_s, sample.x_m
                    )));
                }
                let inc = Increment {
                    distance_m: sample.x_m - x_prev,
                    energy_j: sample.power_w * (sample.t_s - t_prev),
                };
                self.distance_so_far_m = sample.x_m;
                self.energy_used_j += inc.energy_j;
                if inc.distance_m > 0.0 {
                    self.window.push_back(inc);
                    self.trim_window();
                } else {
                    self.idle_energy_j += inc.energy_j;
                }
            }
        }
        self.last = Some((sample.t_s, sample.x_m));
        self.current_estimate_m = self.specific_consumption().map(|s| {
            self.distance_so_far_m + (energy - self.energy_used_j).max(0.0) / s
        });
        Ok(self.current_estimate_m)
    }

    fn trim_window(&mut self) {
        let target = self.config.window_m(self.distance_so_far_m);
        let mut covered: f64 = self.window.iter().map(|i| i.distance_m).sum();
        while let Some(front) = self.window.front() {
            if covered - front.distance_m >= target {
                covered -= front.distance_m;
                self.window.pop_front();
            } else {
                break;
            }
        }
    }
}

/// Functional form of [`OnlineEstimatorState::update`].
pub fn online_update(
    mut state: OnlineEstimatorState,
    sample: &TelemetrySample,
    b: &BatteryModel,
) -> Result<OnlineEstimatorState> {
    state.update(sample, b)?;
    Ok(state)
}
