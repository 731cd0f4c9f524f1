//! Rendezvous goal selection.
//!
//! Each agent plans for the whole group: it samples candidate meeting
//! points, imagines every agent converging on the same candidate by rolling
//! its learned predictors forward, and scores the imagined end state. The
//! sampling distribution is refit to the best candidates (cross-entropy
//! method) until it collapses. Agents never exchange plans — coordination
//! has to emerge from each one predicting the others.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{Frame, LidarScan, Point2, Pose};
use crate::num::Real;
use crate::predict::{
    apply_pose_output, apply_scan_output, flatten_window, input_width, output_width,
    PredictionType, PredictorModel, POSE_DIMS,
};
use crate::sim::{GoalPlanner, Observation, PlanDebug, PlanOutcome};
use crate::Error;

/// Reward for a set of final agent positions: zero once every agent is
/// strictly within `d` of the group centroid, otherwise the negated sum of
/// all ordered pairwise distances.
pub fn rendezvous_reward<R: Real>(positions: &[Point2<R>], d: R) -> Result<R, Error> {
    if positions.len() < 2 {
        return Err(Error::InvalidConfig(
            "rendezvous reward needs at least two agents".into(),
        ));
    }
    if crate::sim::all_within_centroid(positions, d) {
        return Ok(R::zero());
    }
    let mut total = R::zero();
    for (k, a) in positions.iter().enumerate() {
        for (j, b) in positions.iter().enumerate() {
            if k != j {
                total -= a.dist(*b);
            }
        }
    }
    Ok(total)
}

/// Axis-aligned Gaussian over candidate goals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoalDistribution<R> {
    pub mean: Point2<R>,
    pub std: [R; 2],
}

/// Knobs for goal optimization and its rollouts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig<R> {
    /// Rollout length in prediction steps.
    pub horizon: usize,
    /// Steps a chosen goal is held before planning again.
    pub replan_every: usize,
    /// Candidates sampled per refinement iteration.
    pub n_samples: usize,
    /// Candidates kept for the refit.
    pub n_elites: usize,
    /// Iteration cap for one optimization.
    pub max_iters: usize,
    /// Both std components at or below this end the optimization.
    pub epsilon: R,
    /// Rendezvous distance used by the reward.
    pub rendezvous_d: R,
}

impl<R: Real> Default for PlannerConfig<R> {
    fn default() -> Self {
        Self {
            horizon: 5,
            replan_every: 10,
            n_samples: 15,
            n_elites: 5,
            max_iters: 15,
            epsilon: R::of(1e-3),
            rendezvous_d: R::one(),
        }
    }
}

impl<R: Real> PlannerConfig<R> {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_elites == 0 || self.n_elites > self.n_samples {
            return Err(Error::InvalidConfig(format!(
                "elite count must be in 1..={}, got {}",
                self.n_samples, self.n_elites
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("rollout horizon must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("need at least one iteration".into()));
        }
        if self.replan_every == 0 {
            return Err(Error::InvalidConfig(
                "replan period must be >= 1 step".into(),
            ));
        }
        if !(self.epsilon > R::zero()) {
            return Err(Error::InvalidConfig(
                "convergence epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one cross-entropy optimization.
#[derive(Clone, Copy, Debug)]
pub struct CemOutcome<R> {
    /// Final sampling distribution; its mean is the chosen goal.
    pub dist: GoalDistribution<R>,
    /// Highest-scoring candidate seen across all iterations.
    pub best: Point2<R>,
    pub best_reward: R,
    pub iterations: usize,
}

/// Samples `n_samples` candidates from the current distribution, refits mean
/// and (unbiased, `epsilon/2`-floored) std to the `n_elites` best, and
/// repeats while any std component exceeds `epsilon`, up to the iteration
/// cap — an already-converged init returns untouched after zero iterations.
/// Ties keep the earlier-drawn candidate. Deterministic in `seed`.
pub fn cem_optimize<R: Real>(
    init: &GoalDistribution<R>,
    config: &PlannerConfig<R>,
    seed: u64,
    score: &mut dyn FnMut(Point2<R>) -> R,
) -> CemOutcome<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = *init;
    let mut best = init.mean;
    let mut best_reward = R::neg_infinity();
    let mut iterations = 0;
    let floor = config.epsilon / R::of(2.0);

    let mut samples: Vec<Point2<R>> = Vec::with_capacity(config.n_samples);
    let mut rewards: Vec<R> = Vec::with_capacity(config.n_samples);
    let mut order: Vec<usize> = Vec::with_capacity(config.n_samples);

    while iterations < config.max_iters
        && (dist.std[0] > config.epsilon || dist.std[1] > config.epsilon)
    {
        iterations += 1;
        samples.clear();
        rewards.clear();
        for _ in 0..config.n_samples {
            let zx: f64 = StandardNormal.sample(&mut rng);
            let zy: f64 = StandardNormal.sample(&mut rng);
            let g = Point2::new(
                dist.mean.x + dist.std[0] * R::of(zx),
                dist.mean.y + dist.std[1] * R::of(zy),
            );
            samples.push(g);
            rewards.push(score(g));
        }

        order.clear();
        order.extend(0..config.n_samples);
        order.sort_by(|&a, &b| {
            rewards[b]
                .partial_cmp(&rewards[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let elites = &order[..config.n_elites];

        if rewards[elites[0]] > best_reward {
            best_reward = rewards[elites[0]];
            best = samples[elites[0]];
        }

        let m = R::from_usize(config.n_elites).unwrap();
        let mut mean = Point2::zero();
        for &e in elites {
            mean = mean + samples[e];
        }
        mean = mean.scale(R::one() / m);
        let mut var = [R::zero(); 2];
        if config.n_elites > 1 {
            for &e in elites {
                let dx = samples[e].x - mean.x;
                let dy = samples[e].y - mean.y;
                var[0] += dx * dx;
                var[1] += dy * dy;
            }
            let denom = m - R::one();
            var[0] /= denom;
            var[1] /= denom;
        }
        dist = GoalDistribution {
            mean,
            std: [var[0].sqrt().max(floor), var[1].sqrt().max(floor)],
        };
    }

    if iterations == 0 {
        best_reward = score(best);
    }
    CemOutcome {
        dist,
        best,
        best_reward,
        iterations,
    }
}

/// The learned predictors one agent plans with: one model for its own
/// motion, one reused for every other agent. Both must agree on encoding
/// and window shape.
pub struct ModelSet<R: Real> {
    self_model: Box<dyn PredictorModel<R>>,
    other_model: Box<dyn PredictorModel<R>>,
    variant: PredictionType,
    history: usize,
    n_rays: usize,
}

impl<R: Real> ModelSet<R> {
    pub fn new(
        self_model: Box<dyn PredictorModel<R>>,
        other_model: Box<dyn PredictorModel<R>>,
    ) -> Result<Self, Error> {
        if self_model.variant() != other_model.variant() {
            return Err(Error::InvalidConfig(format!(
                "prediction variants differ: self={} other={}",
                self_model.variant(),
                other_model.variant()
            )));
        }
        let (iw, ow) = (self_model.input_width(), self_model.output_width());
        if other_model.input_width() != iw || other_model.output_width() != ow {
            return Err(Error::ShapeMismatch(format!(
                "model shapes differ: self {}x{}, other {}x{}",
                iw,
                ow,
                other_model.input_width(),
                other_model.output_width()
            )));
        }
        if ow <= POSE_DIMS {
            return Err(Error::ShapeMismatch(format!(
                "output width {ow} leaves no scan dimensions"
            )));
        }
        let n_rays = ow - POSE_DIMS;
        let per_frame = POSE_DIMS + n_rays;
        if iw < 2 || (iw - 2) % per_frame != 0 || (iw - 2) / per_frame == 0 {
            return Err(Error::ShapeMismatch(format!(
                "input width {iw} does not fit whole {per_frame}-wide frames plus a goal"
            )));
        }
        let history = (iw - 2) / per_frame;
        debug_assert_eq!(input_width(history, n_rays), iw);
        debug_assert_eq!(output_width(n_rays), ow);
        Ok(Self {
            variant: self_model.variant(),
            self_model,
            other_model,
            history,
            n_rays,
        })
    }

    pub fn variant(&self) -> PredictionType {
        self.variant
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn n_rays(&self) -> usize {
        self.n_rays
    }
}

/// Rolling planning context: the agent's last `history` steps of
/// (own world pose, observation), oldest first. Until the buffer fills, the
/// earliest frame is repeated when windows are built.
#[derive(Clone, Debug)]
pub struct PlanContext<R> {
    history: usize,
    frames: VecDeque<(Pose<R>, Observation<R>)>,
}

impl<R: Real> PlanContext<R> {
    pub fn new(history: usize) -> Self {
        assert!(history >= 1, "history must be at least one frame");
        Self {
            history,
            frames: VecDeque::with_capacity(history),
        }
    }

    pub fn push(&mut self, own_pose: Pose<R>, obs: Observation<R>) {
        assert_eq!(
            own_pose.frame,
            Frame::World,
            "planning context anchors on localization, a world-frame pose"
        );
        if let Some((_, last)) = self.frames.back() {
            assert_eq!(
                last.other_poses.len(),
                obs.other_poses.len(),
                "agent count changed mid-episode"
            );
        }
        if self.frames.len() == self.history {
            self.frames.pop_front();
        }
        self.frames.push_back((own_pose, obs));
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn latest(&self) -> Option<&(Pose<R>, Observation<R>)> {
        self.frames.back()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Frame `k` of the left-padded window, `k` in `0..history`.
    fn padded(&self, k: usize) -> &(Pose<R>, Observation<R>) {
        &self.frames[(k + self.frames.len()).saturating_sub(self.history)]
    }
}

/// Initial window state shared by every candidate rollout of one plan:
/// the observer's own pose/scan history and each other agent's pose
/// history lifted into the world frame.
struct RolloutBase<R> {
    self_poses: Vec<Pose<R>>,
    self_scans: Vec<LidarScan<R>>,
    others: Vec<Vec<Pose<R>>>,
}

impl<R: Real> RolloutBase<R> {
    fn from_context(ctx: &PlanContext<R>) -> Self {
        let h = ctx.history();
        let n_others = ctx.latest().expect("context must not be empty").1.other_poses.len();
        let mut base = Self {
            self_poses: Vec::with_capacity(h),
            self_scans: Vec::with_capacity(h),
            others: vec![Vec::with_capacity(h); n_others],
        };
        for k in 0..h {
            let (own, obs) = ctx.padded(k);
            base.self_poses.push(*own);
            base.self_scans.push(obs.scan.clone());
            for (j, rel) in obs.other_poses.iter().enumerate() {
                base.others[j].push(Pose::from_relative(own, rel));
            }
        }
        base
    }
}

fn roll_in<T>(window: &mut Vec<T>, next: T) {
    window.remove(0);
    window.push(next);
}

/// Scores one candidate goal by imagining every agent pursuing it.
///
/// All predictions run in the observer's head: its own model steps its pose
/// and scan forward; the other-model steps each other agent using that
/// agent's pose history but the *observer's* (predicted) scans, re-anchored
/// at the observer's predicted pose each step. The reward only looks at the
/// final imagined positions.
fn rollout<R: Real>(
    base: &RolloutBase<R>,
    models: &mut ModelSet<R>,
    goal: Point2<R>,
    config: &PlannerConfig<R>,
    input: &mut Vec<R>,
    out: &mut Vec<R>,
) -> R {
    let mut s_poses = base.self_poses.clone();
    let mut s_scans = base.self_scans.clone();
    let mut o_poses = base.others.clone();
    let mut o_scans = vec![s_scans.clone(); o_poses.len()];
    let variant = models.variant;

    for _ in 0..config.horizon {
        let anchor = *s_poses.last().unwrap();
        let max_range = s_scans.last().unwrap().max_range();

        flatten_window(&anchor, &s_poses, &s_scans, goal, input);
        models.self_model.predict_into(input, out);
        let next_self = apply_pose_output(variant, &anchor, &anchor, &out[..POSE_DIMS]);
        let next_self_scan =
            apply_scan_output(variant, s_scans.last().unwrap(), &out[POSE_DIMS..], max_range);

        let mut next_others = Vec::with_capacity(o_poses.len());
        let mut next_other_scans = Vec::with_capacity(o_poses.len());
        for (poses, scans) in o_poses.iter().zip(&o_scans) {
            flatten_window(&anchor, poses, scans, goal, input);
            models.other_model.predict_into(input, out);
            let prev = poses.last().unwrap();
            next_others.push(apply_pose_output(variant, &anchor, prev, &out[..POSE_DIMS]));
            next_other_scans.push(apply_scan_output(
                variant,
                scans.last().unwrap(),
                &out[POSE_DIMS..],
                max_range,
            ));
        }

        roll_in(&mut s_poses, next_self);
        roll_in(&mut s_scans, next_self_scan);
        for (j, (pose, scan)) in next_others.into_iter().zip(next_other_scans).enumerate() {
            roll_in(&mut o_poses[j], pose);
            roll_in(&mut o_scans[j], scan);
        }
    }

    let mut finals = Vec::with_capacity(1 + o_poses.len());
    finals.push(s_poses.last().unwrap().position());
    for poses in &o_poses {
        finals.push(poses.last().unwrap().position());
    }
    rendezvous_reward(&finals, config.rendezvous_d).expect("rollout always has >= 2 agents")
}

/// The candidate distribution a plan starts from: mean at the centroid of
/// the observed agent positions, per-axis std of half the largest pairwise
/// distance, floored at 0.5 m so nearby agents still explore.
pub fn initial_distribution<R: Real>(
    own: &Pose<R>,
    obs: &Observation<R>,
) -> GoalDistribution<R> {
    let mut positions = vec![own.position()];
    for rel in &obs.other_poses {
        positions.push(Pose::from_relative(own, rel).position());
    }
    let n = R::from_usize(positions.len()).unwrap();
    let mut centroid = Point2::zero();
    for p in &positions {
        centroid = centroid + *p;
    }
    centroid = centroid.scale(R::one() / n);
    let mut spread = R::zero();
    for (k, a) in positions.iter().enumerate() {
        for b in &positions[k + 1..] {
            spread = spread.max(a.dist(*b));
        }
    }
    let std0 = (spread / R::of(2.0)).max(R::of(0.5));
    GoalDistribution {
        mean: centroid,
        std: [std0, std0],
    }
}

/// Chooses a world-frame rendezvous goal from the agent's own context.
///
/// Starts from [`initial_distribution`], then refines it with
/// [`cem_optimize`] over predicted rollouts.
pub fn plan<R: Real>(
    ctx: &PlanContext<R>,
    models: &mut ModelSet<R>,
    config: &PlannerConfig<R>,
    seed: u64,
) -> Result<PlanOutcome<R>, Error> {
    config.validate()?;
    let (own, obs) = ctx
        .latest()
        .ok_or_else(|| Error::InvalidConfig("cannot plan from an empty context".into()))?;
    if ctx.history() != models.history() {
        return Err(Error::ShapeMismatch(format!(
            "context keeps {} frames but the models expect {}",
            ctx.history(),
            models.history()
        )));
    }
    if obs.scan.len() != models.n_rays() {
        return Err(Error::ShapeMismatch(format!(
            "scan has {} beams but the models expect {}",
            obs.scan.len(),
            models.n_rays()
        )));
    }

    let init = initial_distribution(own, obs);
    let base = RolloutBase::from_context(ctx);
    let mut input = Vec::with_capacity(models.self_model.input_width());
    let mut out = Vec::with_capacity(models.self_model.output_width());
    let mut scorer =
        |g: Point2<R>| rollout(&base, models, g, config, &mut input, &mut out);
    let res = cem_optimize(&init, config, seed, &mut scorer);

    Ok(PlanOutcome {
        goal: res.dist.mean,
        debug: Some(PlanDebug {
            iterations: res.iterations,
            final_std: res.dist.std,
            best_reward: res.best_reward,
        }),
    })
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed for one planning event.
pub(crate) fn mix_seed(seed: u64, agent: usize, step: usize) -> u64 {
    splitmix64(seed ^ splitmix64((agent as u64) << 32 | step as u64))
}

/// [`GoalPlanner`] that replans with [`plan`] every `replan_every` steps and
/// holds the chosen goal in between. Diagnostics are attached only on steps
/// where an optimization actually ran.
pub struct HppPlanner<R: Real> {
    models: ModelSet<R>,
    config: PlannerConfig<R>,
    ctx: PlanContext<R>,
    seed: u64,
    current: Option<Point2<R>>,
}

impl<R: Real> HppPlanner<R> {
    pub fn new(models: ModelSet<R>, config: PlannerConfig<R>, seed: u64) -> Result<Self, Error> {
        config.validate()?;
        let ctx = PlanContext::new(models.history());
        Ok(Self {
            models,
            config,
            ctx,
            seed,
            current: None,
        })
    }

    pub fn config(&self) -> &PlannerConfig<R> {
        &self.config
    }
}

impl<R: Real> GoalPlanner<R> for HppPlanner<R> {
    fn decide(&mut self, obs: &Observation<R>, own_pose: &Pose<R>) -> PlanOutcome<R> {
        self.ctx.push(*own_pose, obs.clone());
        let due = obs.step % self.config.replan_every == 0 || self.current.is_none();
        if due {
            let outcome = plan(
                &self.ctx,
                &mut self.models,
                &self.config,
                mix_seed(self.seed, obs.observer, obs.step),
            )
            .expect("planner was validated at construction");
            self.current = Some(outcome.goal);
            return outcome;
        }
        PlanOutcome::goal_only(self.current.expect("goal set on first step"))
    }
}
