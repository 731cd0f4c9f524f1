//! Learned single-step motion predictors.
//!
//! Two goal-conditioned models per agent: one predicting the agent's own
//! next pose and scan change from its recent history (`self`), and one per
//! other agent predicting that agent's next pose change together with the
//! observer's scan change (`other`). The other-model deliberately consumes
//! the *observer's* scans — the other agent's sensors are never available.
//!
//! Everything here is deterministic in its seeds: dataset collection,
//! weight initialization, shuffling, and the forward pass.

mod data;
mod mlp;

pub use data::{
    collect_dataset, evaluate_mse, load_dataset, save_dataset, CollectOptions, CollectStats,
    Dataset, DatasetView, EpisodeLog, MaterializedDataset,
};
pub use mlp::{
    gradient_check, train, train_with, Gradients, Mlp, Optimizer, TrainOptions, Workspace,
    HIDDEN_WIDTHS,
};

use crate::geometry::{LidarScan, Point2, Pose};
use crate::num::{wrap_angle, Real};
use crate::Error;
use std::fmt;
use std::str::FromStr;

/// History length: frames of context each prediction conditions on.
pub const HISTORY_LEN: usize = 5;

/// Pose values per frame (x, y, heading).
pub const POSE_DIMS: usize = 3;

/// Positions and ranges are scaled by this inside network inputs so the
/// first tanh layer is not saturated by ~10 m magnitudes. Targets stay in
/// meters/radians.
/// All length-dimension values at the net boundary (input positions and
/// ranges, target positions and ranges) share this scale so no layer has to
/// span meters against a tanh; angles pass through raw. The apply_* codecs
/// return meters.
const LENGTH_SCALE: f64 = 0.1;

/// Flattened input width for one history window.
pub fn input_width(history: usize, n_rays: usize) -> usize {
    history * (POSE_DIMS + n_rays) + 2
}

/// Output width: pose triple plus one value per beam.
pub fn output_width(n_rays: usize) -> usize {
    POSE_DIMS + n_rays
}

/// How a model encodes its pose/scan targets (and therefore its outputs).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictionType {
    /// Pose step in the predicted agent's own frame at t; scan as a delta.
    DeltaPoseLidar,
    /// Next pose in the window anchor frame; scan absolute.
    PoseLidar,
    /// Componentwise pose delta in the window anchor frame; scan absolute.
    DeltaGeneralPoseLidar,
}

impl PredictionType {
    pub const ALL: [PredictionType; 3] = [
        PredictionType::DeltaPoseLidar,
        PredictionType::PoseLidar,
        PredictionType::DeltaGeneralPoseLidar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictionType::DeltaPoseLidar => "delta-pose-lidar",
            PredictionType::PoseLidar => "pose-lidar",
            PredictionType::DeltaGeneralPoseLidar => "delta-general-pose-lidar",
        }
    }
}

impl fmt::Display for PredictionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "delta-pose-lidar" => Ok(PredictionType::DeltaPoseLidar),
            "pose-lidar" => Ok(PredictionType::PoseLidar),
            "delta-general-pose-lidar" => Ok(PredictionType::DeltaGeneralPoseLidar),
            other => Err(Error::InvalidConfig(format!(
                "unknown prediction type '{other}' (expected delta-pose-lidar, \
                 pose-lidar, or delta-general-pose-lidar)"
            ))),
        }
    }
}

/// Which agent a model predicts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Role {
    SelfMotion,
    /// Another agent, tagged with the policy it is assumed to run.
    OtherMotion { policy: String },
}

impl Role {
    pub fn other(policy: &str) -> Self {
        Role::OtherMotion {
            policy: policy.to_string(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Role::SelfMotion => "self".to_string(),
            Role::OtherMotion { policy } => format!("other:{policy}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        if s == "self" {
            Ok(Role::SelfMotion)
        } else if let Some(policy) = s.strip_prefix("other:") {
            Ok(Role::other(policy))
        } else {
            Err(Error::InvalidConfig(format!(
                "unknown model role '{s}' (expected 'self' or 'other:<policy>')"
            )))
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Writes the network input for one history window into `out` (cleared
/// first): h frames oldest-first of [pose relative to `anchor`, scan
/// ranges], then the goal as polar (range, bearing) in the anchor frame.
///
/// `poses` belong to the predicted agent and must share a frame with
/// `anchor`; `scans` are always the observer's.
pub fn flatten_window<R: Real>(
    anchor: &Pose<R>,
    poses: &[Pose<R>],
    scans: &[LidarScan<R>],
    goal: Point2<R>,
    out: &mut Vec<R>,
) {
    assert_eq!(
        poses.len(),
        scans.len(),
        "window needs matching pose and scan frame counts"
    );
    let s = R::of(LENGTH_SCALE);
    out.clear();
    for (pose, scan) in poses.iter().zip(scans) {
        let rel = pose.relative_to(anchor, 0, 0);
        out.push(rel.x * s);
        out.push(rel.y * s);
        out.push(rel.heading);
        for &r in scan.ranges() {
            out.push(r * s);
        }
    }
    let local = anchor.point_to_local(goal);
    out.push(local.norm() * s);
    out.push(local.y.atan2(local.x));
}

/// Encodes the pose part of a training target.
///
/// `anchor` is the window frame (the observer's pose at t); `prev` and
/// `next` are the predicted agent's poses at t and t+1, in the same frame as
/// `anchor`. For a self-prediction window `prev == anchor`.
pub fn encode_pose_target<R: Real>(
    variant: PredictionType,
    anchor: &Pose<R>,
    prev: &Pose<R>,
    next: &Pose<R>,
) -> [R; 3] {
    let s = R::of(LENGTH_SCALE);
    match variant {
        PredictionType::DeltaPoseLidar => {
            let step = next.relative_to(prev, 0, 0);
            [step.x * s, step.y * s, step.heading]
        }
        PredictionType::PoseLidar => {
            let rel = next.relative_to(anchor, 0, 0);
            [rel.x * s, rel.y * s, rel.heading]
        }
        PredictionType::DeltaGeneralPoseLidar => {
            let a = prev.relative_to(anchor, 0, 0);
            let b = next.relative_to(anchor, 0, 0);
            [
                (b.x - a.x) * s,
                (b.y - a.y) * s,
                wrap_angle(b.heading - a.heading),
            ]
        }
    }
}

/// Applies a predicted pose output; inverse of [`encode_pose_target`].
pub fn apply_pose_output<R: Real>(
    variant: PredictionType,
    anchor: &Pose<R>,
    prev: &Pose<R>,
    out: &[R],
) -> Pose<R> {
    let s = R::of(LENGTH_SCALE);
    match variant {
        PredictionType::DeltaPoseLidar => {
            let step = Pose::relative(out[0] / s, out[1] / s, out[2], 0, 0);
            Pose::from_relative(prev, &step)
        }
        PredictionType::PoseLidar => {
            let rel = Pose::relative(out[0] / s, out[1] / s, out[2], 0, 0);
            Pose::from_relative(anchor, &rel)
        }
        PredictionType::DeltaGeneralPoseLidar => {
            let a = prev.relative_to(anchor, 0, 0);
            let rel = Pose::relative(
                a.x + out[0] / s,
                a.y + out[1] / s,
                a.heading + out[2],
                0,
                0,
            );
            Pose::from_relative(anchor, &rel)
        }
    }
}

/// Appends the scan part of a training target to `out`.
pub fn encode_scan_target<R: Real>(
    variant: PredictionType,
    current: &LidarScan<R>,
    next: &LidarScan<R>,
    out: &mut Vec<R>,
) {
    let s = R::of(LENGTH_SCALE);
    match variant {
        PredictionType::DeltaPoseLidar => {
            for (&c, &n) in current.ranges().iter().zip(next.ranges()) {
                out.push((n - c) * s);
            }
        }
        PredictionType::PoseLidar | PredictionType::DeltaGeneralPoseLidar => {
            for &n in next.ranges() {
                out.push(n * s);
            }
        }
    }
}

/// Reconstructs a scan from a predicted output; inverse of
/// [`encode_scan_target`] up to the `[0, max_range]` clip.
pub fn apply_scan_output<R: Real>(
    variant: PredictionType,
    current: &LidarScan<R>,
    out: &[R],
    max_range: R,
) -> LidarScan<R> {
    let s = R::of(LENGTH_SCALE);
    let ranges: Vec<R> = match variant {
        PredictionType::DeltaPoseLidar => current
            .ranges()
            .iter()
            .zip(out)
            .map(|(&c, &d)| c + d / s)
            .collect(),
        PredictionType::PoseLidar | PredictionType::DeltaGeneralPoseLidar => {
            out.iter().map(|&r| r / s).collect()
        }
    };
    LidarScan::new(ranges, max_range)
}

/// A frozen single-step predictor, as the planner consumes it. `&mut self`
/// lets implementations reuse internal scratch buffers; predictions must
/// still be pure functions of the input.
pub trait PredictorModel<R: Real> {
    fn variant(&self) -> PredictionType;

    fn input_width(&self) -> usize;

    fn output_width(&self) -> usize;

    /// Writes the (pose, scan) output vector for one flattened window.
    fn predict_into(&mut self, input: &[R], out: &mut Vec<R>);
}

/// Random access to training examples, however they are stored.
pub trait Samples<R: Real> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn input_width(&self) -> usize;

    fn target_width(&self) -> usize;

    /// Writes example `idx` into the buffers (cleared first).
    fn fill(&self, idx: usize, input: &mut Vec<R>, target: &mut Vec<R>);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_N_RAYS;
    use proptest::prelude::*;

    #[test]
    fn standard_input_width_counts_poses_scans_and_goal() {
        assert_eq!(input_width(HISTORY_LEN, DEFAULT_N_RAYS), 1127);
        assert_eq!(output_width(DEFAULT_N_RAYS), 225);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in PredictionType::ALL {
            assert_eq!(v.name().parse::<PredictionType>().unwrap(), v);
        }
        assert!("pose".parse::<PredictionType>().is_err());
        assert_eq!(Role::parse("self").unwrap(), Role::SelfMotion);
        assert_eq!(Role::parse("other:p2p").unwrap(), Role::other("p2p"));
        assert!(Role::parse("both").is_err());
    }

    #[test]
    fn flatten_layout_matches_worked_example() {
        let anchor: Pose<f64> = Pose::world(1.0, 2.0, std::f64::consts::FRAC_PI_2);
        let poses = vec![Pose::world(1.0, 1.0, 0.0), anchor];
        let scans = vec![
            LidarScan::new(vec![4.0, 6.0], 10.0),
            LidarScan::new(vec![2.0, 8.0], 10.0),
        ];
        let goal = Point2::new(1.0, 4.0);
        let mut out = Vec::new();
        flatten_window(&anchor, &poses, &scans, goal, &mut out);
        assert_eq!(out.len(), input_width(2, 2));
        // First frame: (1,1,0) seen from (1,2,pi/2) -> (-1, 0, -pi/2), scaled.
        assert!((out[0] - -0.1).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
        assert!((out[2] - -std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((out[3] - 0.4).abs() < 1e-12);
        assert!((out[4] - 0.6).abs() < 1e-12);
        // Second frame is the anchor itself.
        assert_eq!(&out[5..8], &[0.0, 0.0, 0.0]);
        assert!((out[8] - 0.2).abs() < 1e-12);
        assert!((out[9] - 0.8).abs() < 1e-12);
        // Goal 2 m straight ahead of the anchor: range 0.2 scaled, bearing 0.
        assert!((out[10] - 0.2).abs() < 1e-12);
        assert!(out[11].abs() < 1e-12);
    }

    fn arb_pose() -> impl Strategy<Value = Pose<f64>> {
        (-8.0..8.0f64, -8.0..8.0f64, -3.1..3.1f64).prop_map(|(x, y, h)| Pose::world(x, y, h))
    }

    proptest! {
        /// apply(encode(next)) must recover next exactly, for every variant —
        /// the planner rollout and the dataset builder share these codecs, so
        /// any frame mismatch here corrupts the whole pipeline.
        #[test]
        fn pose_codec_round_trips(
            anchor in arb_pose(),
            prev in arb_pose(),
            next in arb_pose(),
        ) {
            for variant in PredictionType::ALL {
                let code = encode_pose_target(variant, &anchor, &prev, &next);
                let back = apply_pose_output(variant, &anchor, &prev, &code);
                prop_assert!((back.x - next.x).abs() < 1e-9, "{variant}: x");
                prop_assert!((back.y - next.y).abs() < 1e-9, "{variant}: y");
                prop_assert!(
                    crate::num::wrap_angle(back.heading - next.heading).abs() < 1e-9,
                    "{variant}: heading"
                );
            }
        }

        #[test]
        fn scan_codec_round_trips(
            current in prop::collection::vec(0.0..10.0f64, 8),
            next in prop::collection::vec(0.0..10.0f64, 8),
        ) {
            let cur = LidarScan::new(current, 10.0);
            let nxt = LidarScan::new(next, 10.0);
            for variant in PredictionType::ALL {
                let mut code = Vec::new();
                encode_scan_target(variant, &cur, &nxt, &mut code);
                let back = apply_scan_output(variant, &cur, &code, 10.0);
                for (&b, &n) in back.ranges().iter().zip(nxt.ranges()) {
                    prop_assert!((b - n).abs() < 1e-12);
                }
            }
        }

        /// Deltas of in-range scans never exceed the physical bound.
        #[test]
        fn scan_delta_targets_are_bounded(
            current in prop::collection::vec(0.0..10.0f64, 8),
            next in prop::collection::vec(0.0..10.0f64, 8),
        ) {
            let cur = LidarScan::new(current, 10.0);
            let nxt = LidarScan::new(next, 10.0);
            let mut code = Vec::new();
            encode_scan_target(PredictionType::DeltaPoseLidar, &cur, &nxt, &mut code);
            for d in code {
                prop_assert!(d.abs() <= 10.0 * LENGTH_SCALE + 1e-12);
            }
        }
    }
}
