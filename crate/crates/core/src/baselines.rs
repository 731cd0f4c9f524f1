//! Comparison planners: centralized goal heuristics, sampling-based path
//! planning, and path-planning-scored goal optimization.
//!
//! The heuristics pick goals directly from the current observation. The RRT
//! planners additionally hold the static world map — they are map-based by
//! construction, which is exactly the capability gap the learned planner is
//! compared against. All of them speak the same [`GoalPlanner`] interface.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    collides, segment_rect_distance, segment_segment_distance, Obstacle, Point2, Pose, World,
    ARENA_HALF_EXTENT,
};
use crate::num::Real;
use crate::plan::{
    cem_optimize, initial_distribution, mix_seed, rendezvous_reward, PlannerConfig,
};
use crate::sim::{GoalPlanner, Observation, PlanDebug, PlanOutcome};

/// How far from the active waypoint counts as "reached" (meters).
pub const WAYPOINT_REACH: f64 = 0.3;

/// Which fixed rule a centralized heuristic uses to pick the shared goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CentralizedKind {
    /// Midpoint (centroid) of all agent positions.
    Midpoint,
    /// The other agent's position; centroid of the others for larger groups.
    OtherAgent,
    /// One point drawn uniformly in the arena from the episode seed and held
    /// for the whole episode. Every agent passes the same seed, so they share
    /// the point without communicating.
    RandomPoint,
}

/// The goal a centralized heuristic assigns given one agent's observation.
///
/// Positions are reconstructed in the world frame from the agent's own pose,
/// so (absent observation noise) every agent computes the same point.
pub fn centralized_goal<R: Real>(
    kind: CentralizedKind,
    own: &Pose<R>,
    obs: &Observation<R>,
    episode_seed: u64,
) -> Point2<R> {
    match kind {
        CentralizedKind::Midpoint => {
            let mut sum = own.position();
            for rel in &obs.other_poses {
                sum = sum + Pose::from_relative(own, rel).position();
            }
            sum.scale(R::one() / R::from_usize(1 + obs.other_poses.len()).unwrap())
        }
        CentralizedKind::OtherAgent => {
            let mut sum = Point2::zero();
            for rel in &obs.other_poses {
                sum = sum + Pose::from_relative(own, rel).position();
            }
            sum.scale(R::one() / R::from_usize(obs.other_poses.len().max(1)).unwrap())
        }
        CentralizedKind::RandomPoint => {
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
            let x = rng.random_range(-ARENA_HALF_EXTENT..=ARENA_HALF_EXTENT);
            let y = rng.random_range(-ARENA_HALF_EXTENT..=ARENA_HALF_EXTENT);
            Point2::new(R::of(x), R::of(y))
        }
    }
}

/// [`GoalPlanner`] that recomputes its heuristic goal every step.
pub struct CentralizedPlanner {
    kind: CentralizedKind,
    episode_seed: u64,
}

impl CentralizedPlanner {
    pub fn new(kind: CentralizedKind, episode_seed: u64) -> Self {
        Self { kind, episode_seed }
    }
}

impl<R: Real> GoalPlanner<R> for CentralizedPlanner {
    fn decide(&mut self, obs: &Observation<R>, own_pose: &Pose<R>) -> PlanOutcome<R> {
        PlanOutcome::goal_only(centralized_goal(self.kind, own_pose, obs, self.episode_seed))
    }
}

/// Growth parameters for one tree build.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RrtParams<R> {
    /// Maximum edge length per extension, in meters.
    pub step_size: R,
    /// Probability of steering straight at the goal instead of a random
    /// sample.
    pub goal_bias: f64,
    /// Tree size budget; exhausting it is a planning failure.
    pub max_nodes: usize,
    /// Clearance radius every node and edge must keep from obstacles.
    pub agent_radius: R,
}

impl<R: Real> Default for RrtParams<R> {
    fn default() -> Self {
        Self {
            step_size: R::of(0.5),
            goal_bias: 0.1,
            max_nodes: 5000,
            agent_radius: R::of(0.3),
        }
    }
}

/// A grown tree: `parents[k]` indexes the node `nodes[k]` extended from
/// (the root is its own parent).
#[derive(Clone, Debug)]
pub struct RrtTree<R> {
    pub nodes: Vec<Point2<R>>,
    pub parents: Vec<usize>,
}

impl<R: Real> RrtTree<R> {
    fn path_to(&self, mut idx: usize) -> Vec<Point2<R>> {
        let mut path = vec![self.nodes[idx]];
        while self.parents[idx] != idx {
            idx = self.parents[idx];
            path.push(self.nodes[idx]);
        }
        path.reverse();
        path
    }
}

fn edge_clear<R: Real>(world: &World<R>, a: Point2<R>, b: Point2<R>, radius: R) -> bool {
    if collides(world, b, radius) {
        return false;
    }
    world.obstacles().iter().all(|obs| match obs {
        Obstacle::Rect(r) => segment_rect_distance(a, b, r) >= radius,
        Obstacle::Segment { a: p, b: q } => segment_segment_distance(a, b, *p, *q) >= radius,
    })
}

/// Grows a rapidly-exploring random tree from `start` and returns the
/// waypoint list to `goal`, or `None` once the node budget is exhausted.
///
/// Standard growth: sample a steering target (uniform in bounds, biased
/// toward the goal), extend the nearest node by at most `step_size`, keep the
/// new node only if the edge stays `agent_radius` clear of everything.
/// Success when a node lands within `step_size` of the goal; the goal itself
/// is appended when the closing edge is also clear. Deterministic in `seed`.
pub fn rrt_plan<R: Real>(
    world: &World<R>,
    start: Point2<R>,
    goal: Point2<R>,
    params: &RrtParams<R>,
    seed: u64,
) -> Option<Vec<Point2<R>>> {
    if collides(world, start, params.agent_radius) {
        return None;
    }
    let mut tree = RrtTree {
        nodes: vec![start],
        parents: vec![0],
    };
    let finish = |tree: &RrtTree<R>, idx: usize| {
        let mut path = tree.path_to(idx);
        let last = *path.last().unwrap();
        if last.dist(goal) > R::zero() && edge_clear(world, last, goal, params.agent_radius) {
            path.push(goal);
        }
        path
    };
    if start.dist(goal) <= params.step_size {
        return Some(finish(&tree, 0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = world.bounds();
    // Blocked extensions don't add nodes, so bound raw attempts too.
    for _ in 0..20 * params.max_nodes {
        if tree.nodes.len() >= params.max_nodes {
            break;
        }
        let target = if rng.random_bool(params.goal_bias) {
            goal
        } else {
            Point2::new(
                R::of(rng.random_range(b.min.x.as_f64()..=b.max.x.as_f64())),
                R::of(rng.random_range(b.min.y.as_f64()..=b.max.y.as_f64())),
            )
        };
        let mut nearest = 0;
        let mut nearest_dist = R::infinity();
        for (k, node) in tree.nodes.iter().enumerate() {
            let d = node.dist(target);
            if d < nearest_dist {
                nearest_dist = d;
                nearest = k;
            }
        }
        if nearest_dist == R::zero() {
            continue;
        }
        let from = tree.nodes[nearest];
        let new = if nearest_dist <= params.step_size {
            target
        } else {
            from + (target - from).scale(params.step_size / nearest_dist)
        };
        if !edge_clear(world, from, new, params.agent_radius) {
            continue;
        }
        tree.nodes.push(new);
        tree.parents.push(nearest);
        if new.dist(goal) <= params.step_size {
            return Some(finish(&tree, tree.nodes.len() - 1));
        }
    }
    None
}

/// Moves the waypoint cursor past every waypoint already within `reach`.
/// Stays on the final waypoint once there is nothing left to advance to.
pub fn advance_cursor<R: Real>(
    path: &[Point2<R>],
    mut cursor: usize,
    position: Point2<R>,
    reach: R,
) -> usize {
    while cursor + 1 < path.len() && position.dist(path[cursor]) <= reach {
        cursor += 1;
    }
    cursor
}

/// [`GoalPlanner`] that plans a waypoint path to a heuristic target and walks
/// it, feeding one waypoint at a time to the low-level controller.
///
/// The path is recomputed on a fixed step schedule; a failed recomputation
/// keeps the previous path, and an agent with no path at all holds position.
pub struct RrtPlanner<R: Real> {
    world: World<R>,
    target: CentralizedKind,
    params: RrtParams<R>,
    replan_every: usize,
    seed: u64,
    path: Option<Vec<Point2<R>>>,
    cursor: usize,
}

impl<R: Real> RrtPlanner<R> {
    pub fn new(
        world: World<R>,
        target: CentralizedKind,
        params: RrtParams<R>,
        replan_every: usize,
        seed: u64,
    ) -> Self {
        Self {
            world,
            target,
            params,
            replan_every: replan_every.max(1),
            seed,
            path: None,
            cursor: 0,
        }
    }

    pub fn current_path(&self) -> Option<&[Point2<R>]> {
        self.path.as_deref()
    }
}

impl<R: Real> GoalPlanner<R> for RrtPlanner<R> {
    fn decide(&mut self, obs: &Observation<R>, own_pose: &Pose<R>) -> PlanOutcome<R> {
        let position = own_pose.position();
        if obs.step % self.replan_every == 0 {
            let target = centralized_goal(self.target, own_pose, obs, self.seed);
            if let Some(path) = rrt_plan(
                &self.world,
                position,
                target,
                &self.params,
                mix_seed(self.seed, obs.observer, obs.step),
            ) {
                self.path = Some(path);
                self.cursor = 0;
            }
        }
        match &self.path {
            Some(path) => {
                self.cursor = advance_cursor(path, self.cursor, position, R::of(WAYPOINT_REACH));
                PlanOutcome::goal_only(path[self.cursor])
            }
            None => PlanOutcome::goal_only(position),
        }
    }
}

fn path_point_at<R: Real>(path: &[Point2<R>], mut s: R) -> Point2<R> {
    for pair in path.windows(2) {
        let len = pair[0].dist(pair[1]);
        if s <= len {
            if len == R::zero() {
                return pair[0];
            }
            return pair[0] + (pair[1] - pair[0]).scale(s / len);
        }
        s -= len;
    }
    *path.last().unwrap()
}

/// Scores one candidate goal for [`rrt_cem_plan`]: plans a waypoint path
/// from every agent position to the goal, advances each agent `horizon`
/// straight-line steps of `speed_step` meters along its path, and applies
/// the rendezvous reward to the end positions. Any agent failing to find a
/// path freezes the whole group in place for this candidate.
pub fn rrt_goal_score<R: Real>(
    world: &World<R>,
    positions: &[Point2<R>],
    goal: Point2<R>,
    config: &PlannerConfig<R>,
    params: &RrtParams<R>,
    speed_step: R,
    seed: u64,
) -> R {
    let mut finals = Vec::with_capacity(positions.len());
    for (k, &p) in positions.iter().enumerate() {
        match rrt_plan(world, p, goal, params, mix_seed(seed, k, 0)) {
            Some(path) => {
                let travel = speed_step * R::from_usize(config.horizon).unwrap();
                finals.push(path_point_at(&path, travel));
            }
            None => {
                finals.clear();
                finals.extend_from_slice(positions);
                break;
            }
        }
    }
    rendezvous_reward(&finals, config.rendezvous_d).expect("scoring needs >= 2 agents")
}

/// Chooses a goal with the same cross-entropy loop as the learned planner,
/// but scores candidates by [`rrt_goal_score`] instead of predictor
/// rollouts. Candidates are clipped to the world bounds before planning.
pub fn rrt_cem_plan<R: Real>(
    world: &World<R>,
    own: &Pose<R>,
    obs: &Observation<R>,
    config: &PlannerConfig<R>,
    params: &RrtParams<R>,
    speed_step: R,
    seed: u64,
) -> PlanOutcome<R> {
    let mut positions = vec![own.position()];
    for rel in &obs.other_poses {
        positions.push(Pose::from_relative(own, rel).position());
    }
    let init = initial_distribution(own, obs);
    let bounds = world.bounds();
    let mut candidate = 0usize;
    let mut scorer = |g: Point2<R>| {
        candidate += 1;
        rrt_goal_score(
            world,
            &positions,
            bounds.clamp_point(g),
            config,
            params,
            speed_step,
            mix_seed(seed, candidate, 1),
        )
    };
    let res = cem_optimize(&init, config, seed, &mut scorer);
    PlanOutcome {
        goal: res.dist.mean,
        debug: Some(PlanDebug {
            iterations: res.iterations,
            final_std: res.dist.std,
            best_reward: res.best_reward,
        }),
    }
}

/// [`GoalPlanner`] wrapper around [`rrt_cem_plan`] with the same replanning
/// cadence as the learned planner.
pub struct RrtCemPlanner<R: Real> {
    world: World<R>,
    config: PlannerConfig<R>,
    params: RrtParams<R>,
    speed_step: R,
    seed: u64,
    current: Option<Point2<R>>,
}

impl<R: Real> RrtCemPlanner<R> {
    pub fn new(
        world: World<R>,
        config: PlannerConfig<R>,
        params: RrtParams<R>,
        speed_step: R,
        seed: u64,
    ) -> Result<Self, crate::Error> {
        config.validate()?;
        Ok(Self {
            world,
            config,
            params,
            speed_step,
            seed,
            current: None,
        })
    }
}

impl<R: Real> GoalPlanner<R> for RrtCemPlanner<R> {
    fn decide(&mut self, obs: &Observation<R>, own_pose: &Pose<R>) -> PlanOutcome<R> {
        let due = obs.step % self.config.replan_every == 0 || self.current.is_none();
        if due {
            let outcome = rrt_cem_plan(
                &self.world,
                own_pose,
                obs,
                &self.config,
                &self.params,
                self.speed_step,
                mix_seed(self.seed, obs.observer, obs.step),
            );
            self.current = Some(outcome.goal);
            return outcome;
        }
        PlanOutcome::goal_only(self.current.expect("goal set on first step"))
    }
}
