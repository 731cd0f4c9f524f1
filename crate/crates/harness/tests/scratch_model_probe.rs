use rendezvous_core::geometry::{LidarScan, Point2, Pose};
use rendezvous_core::predict::{
    apply_pose_output, flatten_window, PredictionType, PredictorModel,
};
use rendezvous_harness::run::ModelPair;
use std::path::Path;

fn probe(
    net: &mut dyn PredictorModel<f32>,
    poses: &[Pose<f32>],
    scans: &[LidarScan<f32>],
    goal: Point2<f32>,
    label: &str,
) {
    let anchor = poses[poses.len() - 1];
    let mut input = Vec::new();
    flatten_window(&anchor, poses, scans, goal, &mut input);
    let mut out = Vec::new();
    net.predict_into(&input, &mut out);
    let next = apply_pose_output(PredictionType::DeltaPoseLidar, &anchor, &anchor, &out[..3]);
    let step = next.relative_to(&anchor, 0, 0);
    println!(
        "{label}: step ({:+.3}, {:+.3}) m, dtheta {:+.3}",
        step.x, step.y, step.heading
    );
}

#[test]
fn model_response_probe() {
    let dir = Path::new("/tmp/acc/models/delta-pose-lidar");
    let pair = ModelPair::load(
        &dir.join("self_delta-pose-lidar.mlp"),
        &dir.join("other_delta-pose-lidar.mlp"),
    )
    .unwrap();
    let mut net = pair.self_net.clone();

    let open = || LidarScan::new(vec![10.0f32; 222], 10.0);
    let still: Vec<Pose<f32>> = (0..5).map(|_| Pose::world(0.0, 0.0, 0.0)).collect();
    let moving: Vec<Pose<f32>> = (0..5)
        .map(|i| Pose::world(-0.8 + 0.2 * i as f32, 0.0, 0.0))
        .collect();
    let opens: Vec<LidarScan<f32>> = (0..5).map(|_| open()).collect();

    probe(&mut net, &still, &opens, Point2::new(5.0, 0.0), "self still, open, goal 5m east ");
    probe(&mut net, &moving, &opens, Point2::new(5.0, 0.0), "self moving east, goal 5m east ");
    probe(&mut net, &moving, &opens, Point2::new(0.0, 0.0), "self moving east, goal reached ");
    probe(&mut net, &still, &opens, Point2::new(0.0, 0.0), "self still, goal reached       ");
    probe(&mut net, &moving, &opens, Point2::new(0.0, 5.0), "self moving east, goal north   ");

    // Frontal rays short, as if pressed against a wall face.
    let blocked_scan = || {
        let mut r = vec![10.0f32; 222];
        for (i, v) in r.iter_mut().enumerate() {
            let ang = (i as f32 / 221.0 - 0.5) * (220.0f32.to_radians());
            if ang.abs() < 0.9 {
                *v = 0.45 / ang.cos().max(0.2);
            }
        }
        LidarScan::new(r, 10.0)
    };
    let blocked: Vec<LidarScan<f32>> = (0..5).map(|_| blocked_scan()).collect();
    probe(&mut net, &still, &blocked, Point2::new(5.0, 0.0), "self still, wall ahead, goal east");

    let mut other = pair.other_net.clone();
    probe(&mut other, &still, &opens, Point2::new(5.0, 0.0), "other still, open, goal 5m east");
    probe(&mut other, &moving, &opens, Point2::new(5.0, 0.0), "other moving east, goal 5m east");
}
