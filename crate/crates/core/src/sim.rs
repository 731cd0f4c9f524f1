//! Unicycle agents, observations, and the episode loop.
//!
//! Agents share a world but never each other's internals: every decision is
//! made from an [`Observation`] assembled for one agent, and all agents step
//! simultaneously from the same pre-step snapshot, so the order in which
//! their planners and controllers run cannot matter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{
    collides, scan, LidarConfig, LidarScan, Point2, Pose, World,
};
use crate::num::{wrap_angle, Real};
use crate::Error;

/// Velocity targets handed to an agent. Linear is in m/s, angular in rad/s;
/// both are clipped to the motion limits before integration.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Command<R> {
    pub linear: R,
    pub angular: R,
}

impl<R: Real> Command<R> {
    pub fn new(linear: R, angular: R) -> Self {
        Self { linear, angular }
    }
}

/// Velocity and acceleration envelope of the unicycle base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionLimits<R> {
    /// Linear velocity range `[0, max_linear]` in m/s.
    pub max_linear: R,
    /// Angular velocity range `[-max_angular, max_angular]` in rad/s.
    pub max_angular: R,
    /// Linear acceleration bound in m/s^2.
    pub linear_accel: R,
    /// Angular acceleration bound in rad/s^2.
    pub angular_accel: R,
}

impl<R: Real> Default for MotionLimits<R> {
    fn default() -> Self {
        Self {
            max_linear: R::of(1.0),
            max_angular: R::of(3.0),
            linear_accel: R::of(0.4),
            angular_accel: R::of(1.48),
        }
    }
}

/// Full kinematic state of one agent in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentState<R> {
    pub pose: Pose<R>,
    pub linear_vel: R,
    pub angular_vel: R,
}

impl<R: Real> AgentState<R> {
    pub fn at_rest(pose: Pose<R>) -> Self {
        Self {
            pose,
            linear_vel: R::zero(),
            angular_vel: R::zero(),
        }
    }
}

/// Advances one agent by one step of `dt` seconds.
///
/// The command is clipped to the velocity envelope, velocities slew toward it
/// under the acceleration bounds, the heading integrates first, and the
/// position then advances along the new heading. If the new position would
/// collide (at `radius`), the position reverts and both velocities zero while
/// the heading update is kept.
pub fn step_agent<R: Real>(
    state: &AgentState<R>,
    cmd: Command<R>,
    world: &World<R>,
    dt: R,
    limits: &MotionLimits<R>,
    radius: R,
) -> AgentState<R> {
    let target_lin = cmd.linear.max(R::zero()).min(limits.max_linear);
    let target_ang = cmd.angular.max(-limits.max_angular).min(limits.max_angular);

    let dv = limits.linear_accel * dt;
    let dw = limits.angular_accel * dt;
    let linear_vel = state.linear_vel
        + (target_lin - state.linear_vel).max(-dv).min(dv);
    let angular_vel = state.angular_vel
        + (target_ang - state.angular_vel).max(-dw).min(dw);

    let heading = wrap_angle(state.pose.heading + angular_vel * dt);
    let advance = Point2::new(heading.cos(), heading.sin()).scale(linear_vel * dt);
    let position = state.pose.position() + advance;

    if collides(world, position, radius) {
        return AgentState {
            pose: Pose {
                heading,
                ..state.pose
            },
            linear_vel: R::zero(),
            angular_vel: R::zero(),
        };
    }
    AgentState {
        pose: Pose {
            x: position.x,
            y: position.y,
            heading,
            frame: state.pose.frame,
        },
        linear_vel,
        angular_vel,
    }
}

/// Goal expressed in the observer's frame as range (m) and bearing (rad).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarPoint<R> {
    pub range: R,
    pub bearing: R,
}

/// Everything one agent is allowed to see at one step: its own identity pose,
/// the other agents' poses relative to it, its own scan, and its current goal
/// in polar form. Nothing about other agents' scans, goals, or plans.
#[derive(Clone, Debug)]
pub struct Observation<R> {
    pub observer: usize,
    pub step: usize,
    /// Always the identity pose, tagged with the observer's relative frame.
    pub own_pose: Pose<R>,
    /// Other agents' poses in the observer's frame, in agent-index order.
    pub other_poses: Vec<Pose<R>>,
    pub scan: LidarScan<R>,
    pub goal: PolarPoint<R>,
}

/// Observation noise knobs; both default to zero (noiseless sensors).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig<R> {
    /// Additive Gaussian noise on each beam range, in meters.
    pub scan_std: R,
    /// Additive Gaussian noise on observed relative pose coordinates.
    pub pose_std: R,
}

impl<R: Real> Default for NoiseConfig<R> {
    fn default() -> Self {
        Self {
            scan_std: R::zero(),
            pose_std: R::zero(),
        }
    }
}

/// Builds the observation of `observer` from the current world and states.
///
/// Relative poses translate to the observer's position, then rotate into its
/// heading frame. The goal is converted into polar (range, bearing) the same
/// way.
pub fn observe<R: Real>(
    world: &World<R>,
    states: &[AgentState<R>],
    goals: &[Point2<R>],
    observer: usize,
    step: usize,
    lidar: &LidarConfig<R>,
) -> Result<Observation<R>, Error> {
    let own_scan = scan(world, &states[observer].pose, lidar)?;
    Ok(assemble_observation(
        states, goals, observer, step, own_scan,
    ))
}

/// Like [`observe`] but with additive Gaussian sensor noise drawn from `rng`.
pub fn observe_noisy<R: Real>(
    world: &World<R>,
    states: &[AgentState<R>],
    goals: &[Point2<R>],
    observer: usize,
    step: usize,
    lidar: &LidarConfig<R>,
    noise: &NoiseConfig<R>,
    rng: &mut ChaCha8Rng,
) -> Result<Observation<R>, Error> {
    let mut obs = observe(world, states, goals, observer, step, lidar)?;
    if noise.scan_std > R::zero() {
        let dist = Normal::new(0.0, noise.scan_std.as_f64()).expect("std must be finite");
        let noisy: Vec<R> = obs
            .scan
            .ranges()
            .iter()
            .map(|&r| r + R::of(dist.sample(rng)))
            .collect();
        obs.scan = LidarScan::new(noisy, obs.scan.max_range());
    }
    if noise.pose_std > R::zero() {
        let dist = Normal::new(0.0, noise.pose_std.as_f64()).expect("std must be finite");
        for pose in &mut obs.other_poses {
            pose.x += R::of(dist.sample(rng));
            pose.y += R::of(dist.sample(rng));
            pose.heading = wrap_angle(pose.heading + R::of(dist.sample(rng)));
        }
    }
    Ok(obs)
}

fn assemble_observation<R: Real>(
    states: &[AgentState<R>],
    goals: &[Point2<R>],
    observer: usize,
    step: usize,
    own_scan: LidarScan<R>,
) -> Observation<R> {
    let anchor = &states[observer].pose;
    let other_poses = states
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != observer)
        .map(|(_, s)| s.pose.relative_to(anchor, observer, step))
        .collect();
    let local_goal = anchor.point_to_local(goals[observer]);
    Observation {
        observer,
        step,
        own_pose: Pose::relative(R::zero(), R::zero(), R::zero(), observer, step),
        other_poses,
        scan: own_scan,
        goal: PolarPoint {
            range: local_goal.norm(),
            bearing: local_goal.y.atan2(local_goal.x),
        },
    }
}

/// Episode-level configuration.
#[derive(Clone, Debug)]
pub struct EpisodeConfig<R> {
    pub dt: R,
    pub max_steps: usize,
    pub limits: MotionLimits<R>,
    pub agent_radius: R,
    /// Nominal pairwise spawn separation in meters.
    pub separation: R,
    /// Rendezvous threshold: distance from the centroid counted as met.
    pub rendezvous_d: R,
    pub lidar: LidarConfig<R>,
    pub noise: NoiseConfig<R>,
    /// Number of consecutive steps the rendezvous condition must hold before
    /// the episode ends early. 1 ends at first contact.
    pub stationary_steps: usize,
    /// When false the episode always runs to `max_steps` (used for data
    /// collection, where agents chase a shared goal rather than each other).
    pub stop_on_rendezvous: bool,
}

impl<R: Real> Default for EpisodeConfig<R> {
    fn default() -> Self {
        Self {
            dt: R::of(0.2),
            max_steps: 100,
            limits: MotionLimits::default(),
            agent_radius: R::of(0.3),
            separation: R::of(5.0),
            rendezvous_d: R::of(1.0),
            lidar: LidarConfig::default(),
            noise: NoiseConfig::default(),
            stationary_steps: 1,
            stop_on_rendezvous: true,
        }
    }
}

/// Places `n` agents in collision-free poses with pairwise separation close
/// to `config.separation` and uniformly random headings. Deterministic in
/// `seed`.
///
/// Two agents sit at the exact separation; three form an equilateral
/// triangle; larger groups stand on a regular polygon with side length equal
/// to the separation (only adjacent pairs sit at the nominal distance then).
pub fn spawn<R: Real>(
    world: &World<R>,
    n: usize,
    config: &EpisodeConfig<R>,
    seed: u64,
) -> Result<Vec<AgentState<R>>, Error> {
    if n < 2 {
        return Err(Error::InvalidConfig(
            "an episode needs at least two agents".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = world.bounds();
    let sep = config.separation.as_f64();
    // Circumradius of a regular n-gon with side `sep`.
    let circum = if n == 2 {
        sep / 2.0
    } else {
        sep / (2.0 * (std::f64::consts::PI / n as f64).sin())
    };
    for _ in 0..10_000 {
        let cx = rng.random_range(b.min.x.as_f64()..=b.max.x.as_f64());
        let cy = rng.random_range(b.min.y.as_f64()..=b.max.y.as_f64());
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let positions: Vec<Point2<R>> = (0..n)
            .map(|k| {
                let ang = phase + std::f64::consts::TAU * k as f64 / n as f64;
                Point2::new(
                    R::of(cx + circum * ang.cos()),
                    R::of(cy + circum * ang.sin()),
                )
            })
            .collect();
        if positions
            .iter()
            .all(|p| !collides(world, *p, config.agent_radius))
        {
            return Ok(positions
                .into_iter()
                .map(|p| {
                    let heading =
                        R::of(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
                    AgentState::at_rest(Pose::world(p.x, p.y, heading))
                })
                .collect());
        }
    }
    Err(Error::SpawnFailed(format!(
        "no collision-free placement for {n} agents at {sep} m separation in '{}'",
        world.name()
    )))
}

/// True when every position lies strictly within `d` of the group centroid.
pub fn all_within_centroid<R: Real>(positions: &[Point2<R>], d: R) -> bool {
    let n = R::from_usize(positions.len()).unwrap();
    let mut cx = R::zero();
    let mut cy = R::zero();
    for p in positions {
        cx += p.x;
        cy += p.y;
    }
    let centroid = Point2::new(cx / n, cy / n);
    positions.iter().all(|p| p.dist(centroid) < d)
}

/// Per-decision diagnostics a planner may report.
#[derive(Clone, Copy, Debug)]
pub struct PlanDebug<R> {
    pub iterations: usize,
    pub final_std: [R; 2],
    pub best_reward: R,
}

/// A planner's answer for the current step.
#[derive(Clone, Copy, Debug)]
pub struct PlanOutcome<R> {
    /// World-frame goal the controller should steer toward.
    pub goal: Point2<R>,
    pub debug: Option<PlanDebug<R>>,
}

impl<R> PlanOutcome<R> {
    pub fn goal_only(goal: Point2<R>) -> Self {
        Self { goal, debug: None }
    }
}

/// Decides where an agent should go. Implementations see only the agent's own
/// observation plus its own world pose (its localization), never another
/// agent's internals. Called every step; implementations decide their own
/// replanning cadence from `obs.step`.
pub trait GoalPlanner<R: Real> {
    fn decide(&mut self, obs: &Observation<R>, own_pose: &Pose<R>) -> PlanOutcome<R>;
}

/// Turns an observation into a velocity command.
pub trait Controller<R: Real> {
    fn command(&mut self, obs: &Observation<R>) -> Command<R>;
}

/// One recorded step of an episode.
#[derive(Clone, Debug)]
pub struct TraceStep<R> {
    pub step: usize,
    /// World-frame (x, y, heading) per agent.
    pub poses: Vec<[R; 3]>,
    /// World-frame goal per agent.
    pub goals: Vec<Point2<R>>,
    pub pairwise_min: R,
    pub centroid_dist: Vec<R>,
}

/// Planner diagnostics attached to the step they were produced at.
#[derive(Clone, Debug)]
pub struct PlanRecord<R> {
    pub step: usize,
    pub agent: usize,
    pub debug: PlanDebug<R>,
}

/// Full record of one episode.
#[derive(Clone, Debug)]
pub struct EpisodeTrace<R> {
    pub steps: Vec<TraceStep<R>>,
    pub plan_records: Vec<PlanRecord<R>>,
    pub n_agents: usize,
    /// True when the rendezvous condition ended the episode early.
    pub rendezvous: bool,
}

impl<R: Real> EpisodeTrace<R> {
    /// Mean pairwise inter-agent distance at a recorded step.
    pub fn mean_pairwise(&self, idx: usize) -> R {
        let poses = &self.steps[idx].poses;
        let mut sum = R::zero();
        let mut count = 0usize;
        for j in 0..poses.len() {
            for k in (j + 1)..poses.len() {
                let pj = Point2::new(poses[j][0], poses[j][1]);
                let pk = Point2::new(poses[k][0], poses[k][1]);
                sum += pj.dist(pk);
                count += 1;
            }
        }
        sum / R::from_usize(count).unwrap()
    }

    pub fn final_mean_pairwise(&self) -> R {
        self.mean_pairwise(self.steps.len() - 1)
    }

    /// First step at which the terminating rendezvous streak began, if the
    /// episode rendezvoused.
    pub fn rendezvous_step(&self, stationary_steps: usize) -> Option<usize> {
        if self.rendezvous {
            Some(self.steps.len() - stationary_steps.max(1))
        } else {
            None
        }
    }

    /// Serializes the trace in the canonical CSV layout, one row per
    /// (step, agent), reals with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.steps.len() * self.n_agents * 64);
        out.push_str("step,agent,x,y,heading,goal_x,goal_y,pairwise_min_dist,centroid_dist\n");
        for row in &self.steps {
            for agent in 0..self.n_agents {
                let [x, y, heading] = row.poses[agent];
                let goal = row.goals[agent];
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    row.step,
                    agent,
                    x,
                    y,
                    heading,
                    goal.x,
                    goal.y,
                    row.pairwise_min,
                    row.centroid_dist[agent],
                ));
            }
        }
        out
    }
}

/// Runs one episode with the given per-agent planners and controllers.
///
/// Per step: every agent's planner sees that agent's observation and may move
/// its goal; the step is recorded; the rendezvous condition is checked; then
/// every controller emits a command from the same pre-step snapshot and all
/// agents advance simultaneously.
pub fn run_episode<R: Real>(
    config: &EpisodeConfig<R>,
    world: &World<R>,
    initial: &[AgentState<R>],
    planners: &mut [Box<dyn GoalPlanner<R>>],
    controllers: &mut [Box<dyn Controller<R>>],
    noise_seed: u64,
) -> Result<EpisodeTrace<R>, Error> {
    let order: Vec<usize> = (0..initial.len()).collect();
    run_episode_ordered(config, world, initial, planners, controllers, noise_seed, &order)
}

/// [`run_episode`] with an explicit agent evaluation order.
///
/// Because decisions are functions of the pre-step snapshot only, any
/// permutation must produce the identical trace; tests exercise exactly that.
pub fn run_episode_ordered<R: Real>(
    config: &EpisodeConfig<R>,
    world: &World<R>,
    initial: &[AgentState<R>],
    planners: &mut [Box<dyn GoalPlanner<R>>],
    controllers: &mut [Box<dyn Controller<R>>],
    noise_seed: u64,
    order: &[usize],
) -> Result<EpisodeTrace<R>, Error> {
    let n = initial.len();
    if planners.len() != n || controllers.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{n} agents need {n} planners and controllers"
        )));
    }
    {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(Error::InvalidConfig(
                "evaluation order must be a permutation of the agents".into(),
            ));
        }
    }

    let mut states = initial.to_vec();
    let mut goals: Vec<Point2<R>> = states.iter().map(|s| s.pose.position()).collect();
    // One independent noise stream per agent so evaluation order can't leak
    // into the sensors.
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| ChaCha8Rng::seed_from_u64(noise_seed.wrapping_add(i as u64)))
        .collect();

    let mut trace = EpisodeTrace {
        steps: Vec::with_capacity(config.max_steps),
        plan_records: Vec::new(),
        n_agents: n,
        rendezvous: false,
    };
    let mut streak = 0usize;

    for step in 0..config.max_steps {
        // Planning pass: observations from the shared snapshot, one agent at
        // a time in the requested order.
        let mut observations: Vec<Option<Observation<R>>> = (0..n).map(|_| None).collect();
        for &i in order {
            let obs = observe_noisy(
                world,
                &states,
                &goals,
                i,
                step,
                &config.lidar,
                &config.noise,
                &mut noise_rngs[i],
            )?;
            let outcome = planners[i].decide(&obs, &states[i].pose);
            goals[i] = world.bounds().clamp_point(outcome.goal);
            if let Some(debug) = outcome.debug {
                trace.plan_records.push(PlanRecord {
                    step,
                    agent: i,
                    debug,
                });
            }
            observations[i] = Some(obs);
        }

        let positions: Vec<Point2<R>> = states.iter().map(|s| s.pose.position()).collect();
        let centroid = {
            let n_r = R::from_usize(n).unwrap();
            let mut c = Point2::zero();
            for p in &positions {
                c = c + *p;
            }
            Point2::new(c.x / n_r, c.y / n_r)
        };
        let mut pairwise_min = R::infinity();
        for j in 0..n {
            for k in (j + 1)..n {
                pairwise_min = pairwise_min.min(positions[j].dist(positions[k]));
            }
        }
        trace.steps.push(TraceStep {
            step,
            poses: states
                .iter()
                .map(|s| [s.pose.x, s.pose.y, s.pose.heading])
                .collect(),
            goals: goals.clone(),
            pairwise_min,
            centroid_dist: positions.iter().map(|p| p.dist(centroid)).collect(),
        });

        if config.stop_on_rendezvous {
            if all_within_centroid(&positions, config.rendezvous_d) {
                streak += 1;
                if streak >= config.stationary_steps.max(1) {
                    trace.rendezvous = true;
                    break;
                }
            } else {
                streak = 0;
            }
        }

        // Control pass: commands from the same snapshot, then a simultaneous
        // step.
        let mut commands: Vec<Command<R>> = vec![Command::default(); n];
        for &i in order {
            let mut obs = observations[i].take().expect("observation built above");
            let local_goal = states[i].pose.point_to_local(goals[i]);
            obs.goal = PolarPoint {
                range: local_goal.norm(),
                bearing: local_goal.y.atan2(local_goal.x),
            };
            commands[i] = controllers[i].command(&obs);
        }
        let snapshot = states.clone();
        for i in 0..n {
            states[i] = step_agent(
                &snapshot[i],
                commands[i],
                world,
                config.dt,
                &config.limits,
                config.agent_radius,
            );
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_environment, Aabb, EnvKind, Frame, Obstacle};
    use proptest::prelude::*;

    type P = Point2<f64>;

    fn empty_world() -> World<f64> {
        make_environment(EnvKind::Simple, 0)
    }

    struct HoldPosition;
    impl GoalPlanner<f64> for HoldPosition {
        fn decide(&mut self, _obs: &Observation<f64>, own: &Pose<f64>) -> PlanOutcome<f64> {
            PlanOutcome::goal_only(own.position())
        }
    }

    struct FixedGoal(P);
    impl GoalPlanner<f64> for FixedGoal {
        fn decide(&mut self, _obs: &Observation<f64>, _own: &Pose<f64>) -> PlanOutcome<f64> {
            PlanOutcome::goal_only(self.0)
        }
    }

    struct Idle;
    impl Controller<f64> for Idle {
        fn command(&mut self, _obs: &Observation<f64>) -> Command<f64> {
            Command::default()
        }
    }

    /// Drives straight at the goal bearing with a crude proportional turn;
    /// enough to move agents in tests without the real controller.
    struct ChaseGoal;
    impl Controller<f64> for ChaseGoal {
        fn command(&mut self, obs: &Observation<f64>) -> Command<f64> {
            Command::new(obs.goal.range.min(1.0), 2.0 * obs.goal.bearing)
        }
    }

    #[test]
    fn acceleration_limited_start_from_rest() {
        let world = empty_world();
        let limits = MotionLimits::default();
        let rest = AgentState::at_rest(Pose::world(0.0, 0.0, 0.0));

        let forward = step_agent(&rest, Command::new(1.0, 0.0), &world, 0.2, &limits, 0.3);
        assert!((forward.linear_vel - 0.08).abs() < 1e-12);
        assert!((forward.pose.x - 0.016).abs() < 1e-12);
        assert_eq!(forward.pose.y, 0.0);
        assert_eq!(forward.pose.heading, 0.0);

        let turn = step_agent(&rest, Command::new(0.0, 3.0), &world, 0.2, &limits, 0.3);
        assert!((turn.angular_vel - 0.296).abs() < 1e-12);
        assert!((turn.pose.heading - 0.0592).abs() < 1e-12);
        assert_eq!(turn.pose.x, 0.0);
        assert_eq!(turn.pose.y, 0.0);
    }

    #[test]
    fn commands_are_clipped_before_integration() {
        let world = empty_world();
        let limits = MotionLimits::default();
        let rest = AgentState::at_rest(Pose::world(0.0, 0.0, 0.0));
        // Absurd targets behave exactly like maximal legal targets.
        let wild = step_agent(&rest, Command::new(50.0, -99.0), &world, 0.2, &limits, 0.3);
        let sane = step_agent(&rest, Command::new(1.0, -3.0), &world, 0.2, &limits, 0.3);
        assert_eq!(wild, sane);
        // Negative linear targets clip to zero (no reverse gear).
        let reverse = step_agent(&rest, Command::new(-1.0, 0.0), &world, 0.2, &limits, 0.3);
        assert_eq!(reverse.linear_vel, 0.0);
        assert_eq!(reverse.pose, rest.pose);
    }

    #[test]
    fn collision_reverts_position_zeroes_velocity_keeps_heading() {
        let world = World::new(
            Aabb::new(P::new(-10.0, -10.0), P::new(10.0, 10.0)),
            vec![Obstacle::Rect(Aabb::new(P::new(1.0, -1.0), P::new(2.0, 1.0)))],
            "block",
        )
        .unwrap();
        let limits = MotionLimits::default();
        let mut state = AgentState {
            pose: Pose::world(0.65, 0.0, 0.0),
            linear_vel: 1.0,
            angular_vel: 0.5,
        };
        state = step_agent(&state, Command::new(1.0, 0.5), &world, 0.2, &limits, 0.3);
        // 0.65 + 0.2 m would end within 0.3 of the rect at x = 1.
        assert_eq!(state.pose.x, 0.65);
        assert_eq!(state.pose.y, 0.0);
        assert_eq!(state.linear_vel, 0.0);
        assert_eq!(state.angular_vel, 0.0);
        assert!(state.pose.heading > 0.0, "heading update survives the hit");
    }

    #[test]
    fn observe_expresses_others_in_the_observer_frame() {
        let world = empty_world();
        let states = vec![
            AgentState::at_rest(Pose::world(0.0, 0.0, std::f64::consts::FRAC_PI_2)),
            AgentState::at_rest(Pose::world(1.0, 1.0, 0.0)),
        ];
        let goals = vec![P::new(0.0, 2.0), P::new(0.0, 0.0)];
        let obs = observe(&world, &states, &goals, 0, 7, &LidarConfig::default()).unwrap();

        assert_eq!(obs.own_pose.x, 0.0);
        assert_eq!(obs.own_pose.y, 0.0);
        assert_eq!(obs.own_pose.heading, 0.0);
        assert_eq!(
            obs.own_pose.frame,
            Frame::Relative {
                observer: 0,
                step: 7
            }
        );

        let other = obs.other_poses[0];
        assert!((other.x - 1.0).abs() < 1e-12);
        assert!((other.y - (-1.0)).abs() < 1e-12);
        assert!((other.heading - (-std::f64::consts::FRAC_PI_2)).abs() < 1e-12);

        // Goal 2 m along +y world = 2 m dead ahead for a pi/2-facing agent.
        assert!((obs.goal.range - 2.0).abs() < 1e-12);
        assert!(obs.goal.bearing.abs() < 1e-12);
        assert_eq!(obs.scan.len(), 222);
    }

    #[test]
    fn spawn_respects_separation_and_worlds() {
        let cfg = EpisodeConfig::default();
        for seed in 0..10u64 {
            for kind in [EnvKind::Simple, EnvKind::Wall, EnvKind::TrainingRandom] {
                let world: World<f64> = make_environment(kind, seed);
                let agents = spawn(&world, 2, &cfg, seed).unwrap();
                let d = agents[0].pose.position().dist(agents[1].pose.position());
                assert!((d - 5.0).abs() <= 0.1, "{kind:?} seed {seed}: separation {d}");
                for a in &agents {
                    assert!(!collides(&world, a.pose.position(), cfg.agent_radius));
                    assert_eq!(a.linear_vel, 0.0);
                }
            }
        }
        // Three agents: all pairs at the nominal separation.
        let world = empty_world();
        let three = spawn(&world, 3, &cfg, 5).unwrap();
        for j in 0..3 {
            for k in (j + 1)..3 {
                let d = three[j].pose.position().dist(three[k].pose.position());
                assert!((d - 5.0).abs() <= 0.1, "pair {j}{k}: {d}");
            }
        }
        // Determinism and seed sensitivity.
        let a = spawn(&world, 2, &cfg, 11).unwrap();
        let b = spawn(&world, 2, &cfg, 11).unwrap();
        let c = spawn(&world, 2, &cfg, 12).unwrap();
        assert_eq!(a[0].pose, b[0].pose);
        assert_ne!(a[0].pose, c[0].pose);
    }

    #[test]
    fn spawn_fails_cleanly_when_the_world_is_too_small() {
        let tiny = World::new(
            Aabb::new(P::new(-0.5, -0.5), P::new(0.5, 0.5)),
            vec![],
            "tiny",
        )
        .unwrap();
        let cfg = EpisodeConfig::default();
        match spawn(&tiny, 2, &cfg, 0) {
            Err(Error::SpawnFailed(_)) => {}
            other => panic!("expected SpawnFailed, got {other:?}"),
        }
    }

    #[test]
    fn stationary_agents_hold_distance_for_the_whole_episode() {
        let world = empty_world();
        let cfg = EpisodeConfig::default();
        let initial = vec![
            AgentState::at_rest(Pose::world(-1.5, 0.0, 0.0)),
            AgentState::at_rest(Pose::world(1.5, 0.0, std::f64::consts::PI)),
        ];
        let mut planners: Vec<Box<dyn GoalPlanner<f64>>> =
            vec![Box::new(HoldPosition), Box::new(HoldPosition)];
        let mut controllers: Vec<Box<dyn Controller<f64>>> = vec![Box::new(Idle), Box::new(Idle)];
        let trace =
            run_episode(&cfg, &world, &initial, &mut planners, &mut controllers, 0).unwrap();
        assert_eq!(trace.steps.len(), cfg.max_steps);
        assert!(!trace.rendezvous);
        for row in &trace.steps {
            assert!((row.pairwise_min - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn episode_terminates_immediately_when_spawned_together() {
        let world = empty_world();
        let cfg = EpisodeConfig::default();
        let initial = vec![
            AgentState::at_rest(Pose::world(-0.25, 0.0, 0.0)),
            AgentState::at_rest(Pose::world(0.25, 0.0, 0.0)),
        ];
        let mut planners: Vec<Box<dyn GoalPlanner<f64>>> =
            vec![Box::new(HoldPosition), Box::new(HoldPosition)];
        let mut controllers: Vec<Box<dyn Controller<f64>>> = vec![Box::new(Idle), Box::new(Idle)];
        let trace =
            run_episode(&cfg, &world, &initial, &mut planners, &mut controllers, 0).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!(trace.rendezvous);
        assert_eq!(trace.rendezvous_step(cfg.stationary_steps), Some(0));
    }

    #[test]
    fn agents_chasing_a_shared_goal_converge() {
        let world = empty_world();
        let cfg = EpisodeConfig {
            stop_on_rendezvous: false,
            ..EpisodeConfig::default()
        };
        let initial = vec![
            AgentState::at_rest(Pose::world(-2.5, 0.0, 0.0)),
            AgentState::at_rest(Pose::world(2.5, 0.0, 0.0)),
        ];
        let goal = P::new(0.0, 3.0);
        let mut planners: Vec<Box<dyn GoalPlanner<f64>>> =
            vec![Box::new(FixedGoal(goal)), Box::new(FixedGoal(goal))];
        let mut controllers: Vec<Box<dyn Controller<f64>>> =
            vec![Box::new(ChaseGoal), Box::new(ChaseGoal)];
        let trace =
            run_episode(&cfg, &world, &initial, &mut planners, &mut controllers, 0).unwrap();
        assert_eq!(trace.steps.len(), cfg.max_steps);
        assert!(
            trace.final_mean_pairwise() < trace.mean_pairwise(0) / 2.0,
            "chasing one goal should at least halve the distance: {} -> {}",
            trace.mean_pairwise(0),
            trace.final_mean_pairwise()
        );
    }

    #[test]
    fn trace_csv_layout_and_determinism() {
        let world = empty_world();
        let cfg = EpisodeConfig::default();
        let initial = spawn(&world, 2, &cfg, 3).unwrap();
        let run = |order: &[usize]| {
            let mut planners: Vec<Box<dyn GoalPlanner<f64>>> =
                vec![Box::new(FixedGoal(P::new(1.0, 1.0))), Box::new(HoldPosition)];
            let mut controllers: Vec<Box<dyn Controller<f64>>> =
                vec![Box::new(ChaseGoal), Box::new(ChaseGoal)];
            run_episode_ordered(
                &cfg,
                &world,
                &initial,
                &mut planners,
                &mut controllers,
                9,
                order,
            )
            .unwrap()
            .to_csv()
        };
        let forward = run(&[0, 1]);
        let again = run(&[0, 1]);
        let reversed = run(&[1, 0]);
        assert_eq!(forward, again, "same run must be bit-identical");
        assert_eq!(forward, reversed, "agent evaluation order must not matter");

        let mut lines = forward.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,agent,x,y,heading,goal_x,goal_y,pairwise_min_dist,centroid_dist"
        );
        let first = lines.next().unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "0");
        for value in &fields[2..] {
            let dot = value.find('.').expect("reals use fixed six decimals");
            assert_eq!(value.len() - dot - 1, 6, "field {value}");
        }
    }

    #[test]
    fn goals_are_clamped_into_the_world() {
        let world = empty_world();
        let cfg = EpisodeConfig::default();
        let initial = vec![
            AgentState::at_rest(Pose::world(0.0, 0.0, 0.0)),
            AgentState::at_rest(Pose::world(5.0, 0.0, 0.0)),
        ];
        let mut planners: Vec<Box<dyn GoalPlanner<f64>>> = vec![
            Box::new(FixedGoal(P::new(500.0, -500.0))),
            Box::new(HoldPosition),
        ];
        let mut controllers: Vec<Box<dyn Controller<f64>>> = vec![Box::new(Idle), Box::new(Idle)];
        let trace =
            run_episode(&cfg, &world, &initial, &mut planners, &mut controllers, 0).unwrap();
        let g = trace.steps[0].goals[0];
        assert_eq!(g, P::new(10.0, -10.0));
    }

    proptest! {
        /// After any single step, velocities respect the envelope and the
        /// displacement is bounded by the top speed.
        #[test]
        fn step_keeps_state_inside_the_envelope(
            x in -5.0..5.0f64,
            y in -5.0..5.0f64,
            heading in -3.0..3.0f64,
            v0 in 0.0..1.0f64,
            w0 in -3.0..3.0f64,
            cmd_v in -2.0..2.0f64,
            cmd_w in -5.0..5.0f64,
        ) {
            let world = empty_world();
            let limits = MotionLimits::default();
            let state = AgentState {
                pose: Pose::world(x, y, heading),
                linear_vel: v0,
                angular_vel: w0,
            };
            let next = step_agent(&state, Command::new(cmd_v, cmd_w), &world, 0.2, &limits, 0.3);
            prop_assert!(next.linear_vel >= 0.0 && next.linear_vel <= 1.0);
            prop_assert!(next.angular_vel.abs() <= 3.0);
            prop_assert!((next.linear_vel - v0).abs() <= 0.4 * 0.2 + 1e-12);
            prop_assert!((next.angular_vel - w0).abs() <= 1.48 * 0.2 + 1e-12);
            let moved = next.pose.position().dist(state.pose.position());
            prop_assert!(moved <= 1.0 * 0.2 + 1e-12);
            prop_assert!(next.pose.heading > -std::f64::consts::PI
                && next.pose.heading <= std::f64::consts::PI);
        }
    }
}
