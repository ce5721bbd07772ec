//! JSON configuration documents and their published schemas.
//!
//! All quantities are SI: kilograms, metres, seconds, joules, watts, newtons
//! and radians. Battery age is in days, so `k2` is per day. Unknown keys are
//! rejected everywhere.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generalized::{ForceProfile, OfflineApproximation};
use crate::profile::PiecewiseLinear;

/// Schema for robot, battery, ancillary and mission documents.
pub const ROBOT_SCHEMA: &str = include_str!("../schemas/robot.schema.json");
pub const PROFILE_SCHEMA: &str = include_str!("../schemas/profile.schema.json");
pub const SCENARIO_SCHEMA: &str = include_str!("../schemas/scenario.schema.json");

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Reads and parses a JSON document. I/O and parse failures stay distinct.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}

/// Force profile document: the four force components plus an optional
/// supervisor estimate for the offline estimator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    #[serde(default)]
    pub f_const_n: f64,
    /// Velocity-law coefficient; the robot's drag coefficient when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<PiecewiseLinear>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<PiecewiseLinear>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offline: Option<OfflineApproximation>,
}

impl ProfileDocument {
    pub fn force_profile(&self, robot_drag_coeff: f64) -> ForceProfile {
        ForceProfile {
            f_const_n: self.f_const_n,
            drag_coeff: self.drag_coeff.unwrap_or(robot_drag_coeff),
            position: self.position.clone(),
            time: self.time.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AncillaryPowerModel, BatteryModel, RobotParams};
    use crate::simplified::SimplifiedMission;
    use crate::simulator::Scenario;
    use serde_json::Value;
    use std::collections::BTreeSet;

    fn schema_keys(schema: &Value, def: Option<&str>) -> BTreeSet<String> {
        let node = match def {
            Some(d) => &schema["$defs"][d],
            None => schema,
        };
        assert_eq!(node["additionalProperties"], Value::Bool(false));
        node["properties"].as_object().unwrap().keys().cloned().collect()
    }

    fn struct_keys<T: Serialize>(value: &T) -> BTreeSet<String> {
        serde_json::to_value(value).unwrap().as_object().unwrap().keys().cloned().collect()
    }

    #[test]
    fn schemas_list_every_field() {
        let robot: Value = serde_json::from_str(ROBOT_SCHEMA).unwrap();
        let r: RobotParams = from_json_str(
            r#"{"mass_kg": 1, "c_rr": 0, "drag_coeff": 0, "losses": {}}"#,
        )
        .unwrap();
        assert_eq!(schema_keys(&robot, Some("robot")), struct_keys(&r));
        assert_eq!(schema_keys(&robot, Some("losses")), struct_keys(&r.losses));
        assert_eq!(schema_keys(&robot, Some("battery")), struct_keys(&BatteryModel::fresh(1.0)));
        assert_eq!(schema_keys(&robot, Some("ancillary")), struct_keys(&AncillaryPowerModel::default()));
        let mut m = SimplifiedMission::at_speed(0.0, 1.0, 1.0);
        m.distance_m = Some(1.0);
        assert_eq!(schema_keys(&robot, Some("mission")), struct_keys(&m));

        let profile: Value = serde_json::from_str(PROFILE_SCHEMA).unwrap();
        let doc = ProfileDocument {
            drag_coeff: Some(0.0),
            position: Some(PiecewiseLinear::constant(0.0).unwrap()),
            time: Some(PiecewiseLinear::constant(0.0).unwrap()),
            offline: Some(Default::default()),
            ..Default::default()
        };
        assert_eq!(schema_keys(&profile, None), struct_keys(&doc));

        let scenario: Value = serde_json::from_str(SCENARIO_SCHEMA).unwrap();
        let mut s = Scenario::constant(r, BatteryModel::fresh(1.0), AncillaryPowerModel::default(), 1.0);
        s.grade_profile = Some(PiecewiseLinear::constant(0.0).unwrap());
        s.friction_profile = s.grade_profile.clone();
        s.disturbance_profile = s.grade_profile.clone();
        assert_eq!(schema_keys(&scenario, None), struct_keys(&s));
    }

    #[test]
    fn profile_document_falls_back_to_robot_drag() {
        let doc: ProfileDocument = from_json_str(r#"{"f_const_n": 2, "position": [[0, 1], [10, 2]]}"#).unwrap();
        assert_eq!(doc.force_profile(0.4).drag_coeff, 0.4);
        assert!(from_json_str::<ProfileDocument>(r#"{"f_konst": 2}"#).is_err());
    }
}
