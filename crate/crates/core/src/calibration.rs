//! Parameter identification from bench and field logs.
//!
//! * Ancillary power is a straight line in sensor frequency.
//! * Battery decay is linear in cycles and age after taking `ln(E_O / E)`.
//! * Drivetrain efficiency comes from paired wheels-up and loaded runs.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{check_at_least, check_positive, Error, Result};

/// Ratio of smallest to largest singular value below which a design matrix
/// is treated as rank deficient.
const RANK_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub f_s_hz: f64,
    pub power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayObservation {
    pub cycles: f64,
    pub age_days: f64,
    pub measured_energy_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelsUpRun {
    pub commanded_v_mps: f64,
    pub mean_power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadedRun {
    pub commanded_v_mps: f64,
    pub mean_power_w: f64,
    pub mean_traction_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AncillaryFit {
    pub s0_w: f64,
    pub s1_w_per_hz: f64,
    /// Root-mean-square residual (W).
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub k1: f64,
    pub k2: f64,
    /// Root-mean-square residual of `ln(E_O / E)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFit {
    pub omega_man: f64,
    /// Root-mean-square spread of the per-velocity estimates around the mean.
    pub residual: f64,
    /// `(velocity, efficiency)` for every paired run.
    pub per_velocity: Vec<(f64, f64)>,
    /// `(velocity, wheels-up power minus ancillary power)`: the internal loss
    /// the drivetrain burns with no load.
    pub internal_loss_w: Vec<(f64, f64)>,
}

/// Solves `design * coeffs = rhs` in the least-squares sense, failing on a
/// rank-deficient design.
fn least_squares(design: DMatrix<f64>, rhs: DVector<f64>, what: &str) -> Result<(DVector<f64>, f64)> {
    let n = rhs.len() as f64;
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if max_sv.is_nan() || max_sv <= 0.0 || min_sv <= RANK_RTOL * max_sv {
        return Err(Error::Underdetermined(format!(
            "{what}: design matrix is rank deficient"
        )));
    }
    let coeffs = svd
        .solve(&rhs, RANK_RTOL * max_sv)
        .map_err(|e| Error::Underdetermined(format!("{what}: {e}")))?;
    let resid = &design * &coeffs - rhs;
    Ok((coeffs, (resid.norm_squared() / n).sqrt()))
}

/// Ordinary least-squares line `power = s0 + s1 * f_s`.
pub fn fit_ancillary(samples: &[PowerSample]) -> Result<AncillaryFit> {
    for s in samples {
        check_at_least("f_s_hz", s.f_s_hz, 0.0)?;
        check_at_least("power_w", s.power_w, 0.0)?;
    }
    let distinct = samples
        .iter()
        .any(|s| samples.first().is_some_and(|f| f.f_s_hz != s.f_s_hz));
    if samples.len() < 2 || !distinct {
        return Err(Error::Underdetermined(
            "ancillary fit needs at least two distinct sensor frequencies".into(),
        ));
    }
    let design = DMatrix::from_fn(samples.len(), 2, |i, j| if j == 0 { 1.0 } else { samples[i].f_s_hz });
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.power_w));
    let (c, residual) = least_squares(design, rhs, "ancillary fit")?;
    Ok(AncillaryFit {
        s0_w: c[0],
        s1_w_per_hz: c[1],
        residual,
    })
}

/// Fits `ln(E_O / E) = k1 * C + k2 * t` through the origin.
pub fn fit_battery_decay(observations: &[DecayObservation], rated_energy_j: f64) -> Result<DecayFit> {
    check_positive("rated_energy_j", rated_energy_j)?;
    for o in observations {
        check_at_least("cycles", o.cycles, 0.0)?;
        check_at_least("age_days", o.age_days, 0.0)?;
        if !(o.measured_energy_j > 0.0 && o.measured_energy_j <= rated_energy_j) {
            return Err(Error::invalid(
                "measured_energy_j",
                format!(
                    "must lie in (0, {rated_energy_j}], got {}",
                    o.measured_energy_j
                ),
            ));
        }
    }
    if observations.len() < 3 {
        return Err(Error::Underdetermined(
            "battery decay fit needs at least three observations".into(),
        ));
    }
    let design = DMatrix::from_fn(observations.len(), 2, |i, j| {
        if j == 0 {
            observations[i].cycles
        } else {
            observations[i].age_days
        }
    });
    let rhs = DVector::from_iterator(
        observations.len(),
        observations
            .iter()
            .map(|o| (rated_energy_j / o.measured_energy_j).ln()),
    );
    let (c, residual) = least_squares(design, rhs, "battery decay fit")?;
    Ok(DecayFit {
        k1: c[0],
        k2: c[1],
        residual,
    })
}

fn same_velocity(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Drivetrain efficiency from wheels-up and loaded runs.
///
/// At each commanded velocity the efficiency is the mechanical output
/// `traction * v` over the electrical input to the drivetrain, taken as the
/// loaded power minus `ancillary_w`. The per-velocity values are averaged.
/// Wheels-up runs give the no-load internal loss and check consistency: a
/// loaded run must draw more than its wheels-up counterpart.
pub fn fit_maneuvering_efficiency(
    wheels_up: &[WheelsUpRun],
    loaded: &[LoadedRun],
    ancillary_w: f64,
) -> Result<EfficiencyFit> {
    check_at_least("ancillary_w", ancillary_w, 0.0)?;
    if loaded.is_empty() {
        return Err(Error::Underdetermined("no loaded runs".into()));
    }
    let mut per_velocity = Vec::with_capacity(loaded.len());
    let mut internal_loss_w = Vec::with_capacity(loaded.len());
    for run in loaded {
        check_positive("commanded_v_mps", run.commanded_v_mps)?;
        check_positive("mean_power_w", run.mean_power_w)?;
        check_at_least("mean_traction_n", run.mean_traction_n, 0.0)?;
        let idle = wheels_up
            .iter()
            .find(|w| same_velocity(w.commanded_v_mps, run.commanded_v_mps))
            .ok_or_else(|| {
                Error::InconsistentData(format!(
                    "no wheels-up run at {} m/s",
                    run.commanded_v_mps
                ))
            })?;
        check_at_least("mean_power_w", idle.mean_power_w, 0.0)?;
        if run.mean_power_w <= idle.mean_power_w {
            return Err(Error::InconsistentData(format!(
                "loaded power {} W does not exceed wheels-up power {} W at {} m/s",
                run.mean_power_w, idle.mean_power_w, run.commanded_v_mps
            )));
        }
        let drive_input = run.mean_power_w - ancillary_w;
        if drive_input <= 0.0 {
            return Err(Error::InconsistentData(format!(
                "loaded power {} W does not exceed ancillary power {ancillary_w} W",
                run.mean_power_w
            )));
        }
        per_velocity.push((
            run.commanded_v_mps,
            run.mean_traction_n * run.commanded_v_mps / drive_input,
        ));
        internal_loss_w.push((run.commanded_v_mps, idle.mean_power_w - ancillary_w));
    }
    let n = per_velocity.len() as f64;
    let omega_man = per_velocity.iter().map(|(_, o)| o).sum::<f64>() / n;
    let residual = (per_velocity
        .iter()
        .map(|(_, o)| (o - omega_man).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(omega_man > 0.0 && omega_man <= 1.0) {
        return Err(Error::InconsistentData(format!(
            "fitted efficiency {omega_man} outside (0, 1]"
        )));
    }
    Ok(EfficiencyFit {
        omega_man,
        residual,
        per_velocity,
        internal_loss_w,
    })
}

impl AncillaryFit {
    /// The fitted terms as a fragment of a robot configuration document.
    pub fn config_fragment(&self) -> serde_json::Value {
        json!({ "ancillary": { "s0_w": self.s0_w, "s1_w_per_hz": self.s1_w_per_hz } })
    }
}

impl DecayFit {
    pub fn config_fragment(&self) -> serde_json::Value {
        json!({ "battery": { "k1": self.k1, "k2": self.k2 } })
    }
}

impl EfficiencyFit {
    /// The bench test cannot separate motor from mechanical losses, so the
    /// whole drivetrain loss is assigned to the drive motor term.
    pub fn config_fragment(&self) -> serde_json::Value {
        json!({
            "losses": { "eta2_drive_motor": 1.0 - self.omega_man, "eta3_mechanical": 0.0 }
        })
    }
}

/// Reads a headed CSV calibration log into rows of `T`.
pub fn read_log<T, R>(r: R) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    R: Read,
{
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line(s0: f64, s1: f64, fs: &[f64]) -> Vec<PowerSample> {
        fs.iter()
            .map(|&f| PowerSample { f_s_hz: f, power_w: s0 + s1 * f })
            .collect()
    }

    #[test]
    fn ancillary_exact_line() {
        let fit = fit_ancillary(&line(2.0, 0.05, &[0.0, 10.0, 20.0, 40.0, 60.0])).unwrap();
        assert!((fit.s0_w - 2.0).abs() < 1e-9);
        assert!((fit.s1_w_per_hz - 0.05).abs() < 1e-9);
        assert!(fit.residual < 1e-12);

        let two = [PowerSample { f_s_hz: 0.0, power_w: 2.0 }, PowerSample { f_s_hz: 40.0, power_w: 4.0 }];
        let fit = fit_ancillary(&two).unwrap();
        assert!((fit.s0_w - 2.0).abs() < 1e-9);
        assert!((fit.s1_w_per_hz - 0.05).abs() < 1e-9);
    }

    #[test]
    fn ancillary_single_frequency_underdetermined() {
        let same = line(2.0, 0.05, &[10.0, 10.0, 10.0]);
        assert!(matches!(fit_ancillary(&same), Err(Error::Underdetermined(_))));
        assert!(matches!(fit_ancillary(&same[..1]), Err(Error::Underdetermined(_))));
    }

    fn decay(k1: f64, k2: f64, pts: &[(f64, f64)]) -> Vec<DecayObservation> {
        pts.iter()
            .map(|&(c, t)| DecayObservation {
                cycles: c,
                age_days: t,
                measured_energy_j: 1e5 * (-(k1 * c + k2 * t)).exp(),
            })
            .collect()
    }

    #[test]
    fn decay_exact_recovery() {
        let obs = decay(0.002, 0.001, &[(10.0, 30.0), (50.0, 100.0), (200.0, 90.0), (0.0, 365.0)]);
        let fit = fit_battery_decay(&obs, 1e5).unwrap();
        assert!((fit.k1 - 0.002).abs() < 1e-9);
        assert!((fit.k2 - 0.001).abs() < 1e-9);

        let single = decay(0.003, 0.0, &[(10.0, 5.0), (40.0, 60.0), (90.0, 20.0)]);
        let fit = fit_battery_decay(&single, 1e5).unwrap();
        assert!((fit.k1 - 0.003).abs() < 1e-9);
        assert!(fit.k2.abs() < 1e-9);
    }

    #[test]
    fn decay_rank_deficiency_and_bad_energy() {
        let no_cycles = decay(0.0, 0.001, &[(0.0, 10.0), (0.0, 50.0), (0.0, 100.0)]);
        assert!(matches!(fit_battery_decay(&no_cycles, 1e5), Err(Error::Underdetermined(_))));
        let collinear = decay(0.001, 0.001, &[(1.0, 2.0), (2.0, 4.0), (5.0, 10.0)]);
        assert!(matches!(fit_battery_decay(&collinear, 1e5), Err(Error::Underdetermined(_))));
        let mut over = decay(0.002, 0.001, &[(10.0, 30.0), (50.0, 100.0), (200.0, 90.0)]);
        over[0].measured_energy_j = 1.5e5;
        assert!(fit_battery_decay(&over, 1e5).is_err());
        over[0].measured_energy_j = 0.0;
        assert!(fit_battery_decay(&over, 1e5).is_err());
    }

    /// Forward model: loaded power = ancillary + traction * v / omega.
    fn efficiency_logs(omega: f64, anc: f64, idle_loss: f64) -> (Vec<WheelsUpRun>, Vec<LoadedRun>) {
        let vs = [0.5, 1.0, 1.5];
        let wheels = vs.iter().map(|&v| WheelsUpRun { commanded_v_mps: v, mean_power_w: anc + idle_loss * v }).collect();
        let loaded = vs
            .iter()
            .map(|&v| LoadedRun { commanded_v_mps: v, mean_power_w: anc + 9.81 * v / omega, mean_traction_n: 9.81 })
            .collect();
        (wheels, loaded)
    }

    #[test]
    fn efficiency_round_trip() {
        let (w, l) = efficiency_logs(0.72, 0.0, 0.0);
        // at 1 m/s the loaded run draws 13.625 W above wheels-up
        assert_relative_eq!(l[1].mean_power_w - w[1].mean_power_w, 13.625, max_relative = 1e-12);
        let fit = fit_maneuvering_efficiency(&w, &l, 0.0).unwrap();
        assert!((fit.omega_man - 0.72).abs() <= 0.01 * 0.72);

        let (w, l) = efficiency_logs(0.6, 4.0, 1.5);
        let fit = fit_maneuvering_efficiency(&w, &l, 4.0).unwrap();
        assert!((fit.omega_man - 0.6).abs() <= 0.01 * 0.6);
        assert_relative_eq!(fit.internal_loss_w[1].1, 1.5, max_relative = 1e-12);

        let (w, l) = efficiency_logs(1.0, 2.0, 0.0);
        let fit = fit_maneuvering_efficiency(&w, &l, 2.0).unwrap();
        assert_relative_eq!(fit.omega_man, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn efficiency_inconsistent_data() {
        let (w, mut l) = efficiency_logs(0.72, 1.0, 0.0);
        l[0].mean_power_w = w[0].mean_power_w - 0.1;
        assert!(matches!(fit_maneuvering_efficiency(&w, &l, 1.0), Err(Error::InconsistentData(_))));
        let (w, l) = efficiency_logs(0.72, 1.0, 0.0);
        assert!(matches!(fit_maneuvering_efficiency(&w[..1], &l, 1.0), Err(Error::InconsistentData(_))));
    }

    #[test]
    fn reads_csv_logs() {
        let text = "f_s_hz,power_w\n0,2\n40,4\n";
        let rows: Vec<PowerSample> = read_log(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1], PowerSample { f_s_hz: 40.0, power_w: 4.0 });
    }

    proptest! {
        #[test]
        fn ancillary_order_and_duplicates_invariant(
            s0 in 0.0f64..10.0, s1 in 0.0f64..0.5,
            pts in prop::collection::vec((0.0f64..100.0, -0.5f64..0.5), 3..12),
            dup in 0usize..3,
        ) {
            prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1.0));
            let noisy: Vec<PowerSample> = pts
                .iter()
                .map(|&(f, e)| PowerSample { f_s_hz: f, power_w: (s0 + s1 * f + e).max(0.0) })
                .collect();
            let base = fit_ancillary(&noisy).unwrap();
            let mut reversed = noisy.clone();
            reversed.reverse();
            let rev = fit_ancillary(&reversed).unwrap();
            prop_assert!((base.s0_w - rev.s0_w).abs() < 1e-9);
            prop_assert!((base.s1_w_per_hz - rev.s1_w_per_hz).abs() < 1e-9);

            let mut exact: Vec<PowerSample> = pts
                .iter()
                .map(|&(f, _)| PowerSample { f_s_hz: f, power_w: s0 + s1 * f })
                .collect();
            exact.push(exact[dup]);
            exact.push(exact[dup]);
            let fit = fit_ancillary(&exact).unwrap();
            prop_assert!((fit.s0_w - s0).abs() < 1e-9);
            prop_assert!((fit.s1_w_per_hz - s1).abs() < 1e-9);
        }
    }
}
