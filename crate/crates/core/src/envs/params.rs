//! Tunable environment parameters and their defaults.
//!
//! Every field can be overridden from the run configuration's
//! `env.overrides` object; unknown keys are rejected.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interception task: a ballistic ball and a tilted paddle that translates
/// vertically behind a two-pole velocity lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolleyParams {
    pub dt: f64,
    pub gravity: f64,
    /// Hard cap on episode length in steps.
    pub max_steps: usize,
    pub paddle_x: f64,
    pub paddle_y0: f64,
    /// Angle of the paddle normal above the +x axis, radians.
    pub paddle_tilt: f64,
    pub paddle_half_length: f64,
    pub ball_radius: f64,
    /// Time constant of each of the two lag poles, seconds.
    pub lag_tau: f64,
    /// Commanded paddle speed at |action| = 1, m/s.
    pub max_paddle_speed: f64,
    pub restitution: f64,
    pub target_x: f64,
    pub success_radius: f64,
    pub launch_x: f64,
    pub launch_y_min: f64,
    pub launch_y_max: f64,
    /// Arrival height at the paddle plane, sampled uniformly.
    pub arrival_y_min: f64,
    pub arrival_y_max: f64,
    /// Flight time to the paddle plane, sampled uniformly, seconds.
    pub arrival_time_min: f64,
    pub arrival_time_max: f64,
}

impl Default for VolleyParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            gravity: 9.81,
            max_steps: 60,
            paddle_x: 0.0,
            paddle_y0: 0.25,
            paddle_tilt: 0.3,
            paddle_half_length: 0.05,
            ball_radius: 0.01,
            lag_tau: 0.03,
            max_paddle_speed: 2.0,
            restitution: 0.8,
            target_x: 0.8,
            success_radius: 0.04,
            launch_x: 1.0,
            launch_y_min: 0.25,
            launch_y_max: 0.35,
            arrival_y_min: 0.1,
            arrival_y_max: 0.4,
            arrival_time_min: 0.33,
            arrival_time_max: 0.42,
        }
    }
}

/// Planar pushing and sliding: a disk gripper under a speed-capped
/// proportional position controller and one object on a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManipParams {
    pub dt: f64,
    pub horizon: usize,
    pub gripper_radius: f64,
    /// Distance from the gripper to the commanded target at |action| = 1.
    pub action_reach: f64,
    pub controller_gain: f64,
    /// Maximum gripper displacement per step.
    pub speed_cap: f64,
    pub gripper_x0: f64,
    pub gripper_y0: f64,
    pub workspace_x_min: f64,
    pub workspace_x_max: f64,
    pub workspace_y_min: f64,
    pub workspace_y_max: f64,
    /// Half side of the pushed box, or radius of the slid disk.
    pub object_size: f64,
    pub object_x_min: f64,
    pub object_x_max: f64,
    pub object_y_min: f64,
    pub object_y_max: f64,
    /// Objects are never sampled closer than this to the gripper start.
    pub object_clearance: f64,
    pub goal_x_min: f64,
    pub goal_x_max: f64,
    pub goal_y_min: f64,
    pub goal_y_max: f64,
    pub success_radius: f64,
    /// Sliding only: velocity gain on strikes and the Coulomb decay.
    pub restitution: f64,
    pub friction_decel: f64,
}

impl ManipParams {
    pub fn push() -> Self {
        Self {
            dt: 0.04,
            horizon: 50,
            gripper_radius: 0.04,
            action_reach: 0.02,
            controller_gain: 1.0,
            speed_cap: 0.012,
            gripper_x0: 0.0,
            gripper_y0: 0.0,
            workspace_x_min: -0.25,
            workspace_x_max: 0.25,
            workspace_y_min: -0.25,
            workspace_y_max: 0.25,
            object_size: 0.03,
            object_x_min: -0.1,
            object_x_max: 0.1,
            object_y_min: 0.1,
            object_y_max: 0.18,
            object_clearance: 0.0,
            goal_x_min: -0.15,
            goal_x_max: 0.15,
            goal_y_min: 0.0,
            goal_y_max: 0.22,
            success_radius: 0.05,
            restitution: 0.0,
            friction_decel: 0.0,
        }
    }

    pub fn slide() -> Self {
        Self {
            workspace_x_max: 0.05,
            gripper_radius: 0.015,
            object_size: 0.02,
            object_clearance: 0.05,
            object_x_min: -0.1,
            object_x_max: 0.0,
            object_y_min: -0.08,
            object_y_max: 0.08,
            goal_x_min: 0.15,
            goal_x_max: 0.3,
            goal_y_min: -0.1,
            goal_y_max: 0.1,
            restitution: 0.5,
            friction_decel: 1.0,
            ..Self::push()
        }
    }
}

impl Default for ManipParams {
    fn default() -> Self {
        Self::push()
    }
}

/// Applies `overrides` on top of `defaults` through their JSON form.
pub(crate) fn apply_overrides<P>(defaults: P, overrides: &BTreeMap<String, serde_json::Value>) -> Result<P>
where
    P: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(defaults)?;
    let obj = value.as_object_mut().expect("parameter structs serialize to objects");
    for (k, v) in overrides {
        if !obj.contains_key(k) {
            return Err(Error::Config(format!("unknown environment parameter `{k}`")));
        }
        obj.insert(k.clone(), v.clone());
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("invalid environment override: {e}")))
}
