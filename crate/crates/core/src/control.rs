//! Reactive point-to-point controller.
//!
//! A classic potential-field steering law: the goal attracts, every short
//! lidar return pushes back along its beam with inverse-square weight, and
//! the command steers toward the resulting vector, slowing as the heading
//! error grows or the goal gets near. Purely reactive, so it can stall in
//! head-on dead ends — the planners above it are what route around those.

use crate::geometry::{LidarConfig, Point2};
use crate::num::{wrap_angle, Real};
use crate::sim::{Command, Controller, MotionLimits, Observation};

/// Gains and cutoffs for [`act`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerParams<R> {
    /// Weight of the unit attraction vector toward the goal.
    pub attraction_gain: R,
    /// Weight on each repulsive beam contribution.
    pub repulsion_gain: R,
    /// Beams longer than this contribute no repulsion (meters).
    pub repulsion_range: R,
    /// Proportional gain from heading error to angular command.
    pub heading_gain: R,
    /// Goal distance below which the controller stops outright.
    pub goal_tolerance: R,
    /// Beam fan geometry matching the scans this controller will see.
    pub lidar: LidarConfig<R>,
    /// Command clip envelope.
    pub limits: MotionLimits<R>,
}

impl<R: Real> Default for ControllerParams<R> {
    fn default() -> Self {
        Self {
            attraction_gain: R::of(1.0),
            repulsion_gain: R::of(0.04),
            repulsion_range: R::of(2.0),
            heading_gain: R::of(2.0),
            goal_tolerance: R::of(0.05),
            lidar: LidarConfig::default(),
            limits: MotionLimits::default(),
        }
    }
}

/// Computes the steering command for one observation.
///
/// The desired direction is the sum of a goal attraction vector and one
/// inverse-square repulsion vector per beam shorter than the repulsion
/// cutoff. The angular command is proportional to the (wrapped) angle of that
/// direction in the agent frame; the linear command falls linearly with
/// heading error and is capped by the goal range. Outputs always respect the
/// command clip ranges.
pub fn act<R: Real>(obs: &Observation<R>, params: &ControllerParams<R>) -> Command<R> {
    if obs.goal.range < params.goal_tolerance {
        return Command::new(R::zero(), R::zero());
    }

    let mut dir = Point2::new(obs.goal.bearing.cos(), obs.goal.bearing.sin())
        .scale(params.attraction_gain);

    let n = obs.scan.len();
    if n >= 2 {
        let fov = params.lidar.fov;
        let half = fov / R::of(2.0);
        let step = fov / R::from_usize(n - 1).unwrap();
        let floor = R::of(0.05);
        for (k, &range) in obs.scan.ranges().iter().enumerate() {
            if range >= params.repulsion_range {
                continue;
            }
            let bearing = -half + step * R::from_usize(k).unwrap();
            let r = range.max(floor);
            let weight = params.repulsion_gain / (r * r);
            dir = dir + Point2::new(-bearing.cos(), -bearing.sin()).scale(weight);
        }
    }

    let err = if dir.norm() == R::zero() {
        R::zero()
    } else {
        wrap_angle(dir.y.atan2(dir.x))
    };

    let angular = (params.heading_gain * err)
        .max(-params.limits.max_angular)
        .min(params.limits.max_angular);
    let slow = R::one() - (err.abs() / R::PI()).min(R::one());
    let linear = slow
        .min(obs.goal.range)
        .max(R::zero())
        .min(params.limits.max_linear);
    Command::new(linear, angular)
}

/// [`act`] wrapped as a [`Controller`] for the episode loop.
#[derive(Clone, Debug)]
pub struct PotentialFieldController<R> {
    pub params: ControllerParams<R>,
}

impl<R: Real> Default for PotentialFieldController<R> {
    fn default() -> Self {
        Self {
            params: ControllerParams::default(),
        }
    }
}

impl<R: Real> PotentialFieldController<R> {
    pub fn new(params: ControllerParams<R>) -> Self {
        Self { params }
    }
}

impl<R: Real> Controller<R> for PotentialFieldController<R> {
    fn command(&mut self, obs: &Observation<R>) -> Command<R> {
        act(obs, &self.params)
    }
}
