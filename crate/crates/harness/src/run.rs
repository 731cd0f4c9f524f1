//! Episode orchestration for evaluations: world/spawn setup, planner
//! construction, and the per-seed episode loop.

use std::path::Path;

use rendezvous_core::baselines::{
    CentralizedKind, CentralizedPlanner, RrtCemPlanner, RrtParams, RrtPlanner,
};
use rendezvous_core::control::PotentialFieldController;
use rendezvous_core::geometry::EnvKind;
use rendezvous_core::plan::{HppPlanner, ModelSet};
use rendezvous_core::predict::{Mlp, Role};
use rendezvous_core::sim::{
    run_episode, run_episode_ordered, spawn, AgentState, Controller, EpisodeConfig, EpisodeTrace,
    GoalPlanner,
};
use rendezvous_core::{Error, World32};

use crate::config::{EvalConfig, PlannerKind};

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent stream per (base seed, episode seed) pair.
pub(crate) fn episode_seed(base: u64, seed: u64) -> u64 {
    splitmix64(base ^ splitmix64(seed))
}

/// The learned predictor pair an evaluation shares across episodes; each
/// agent gets its own clone so no planner state is shared.
#[derive(Clone)]
pub struct ModelPair {
    pub self_net: Mlp<f32>,
    pub other_net: Mlp<f32>,
}

impl ModelPair {
    pub fn load(self_path: &Path, other_path: &Path) -> Result<Self, Error> {
        let self_net = Mlp::load(self_path)?;
        let other_net = Mlp::load(other_path)?;
        if self_net.role() != &Role::SelfMotion {
            return Err(Error::InvalidConfig(format!(
                "{} holds a '{}' model, expected 'self'",
                self_path.display(),
                self_net.role()
            )));
        }
        if !matches!(other_net.role(), Role::OtherMotion { .. }) {
            return Err(Error::InvalidConfig(format!(
                "{} holds a '{}' model, expected 'other:<policy>'",
                other_path.display(),
                other_net.role()
            )));
        }
        Ok(Self {
            self_net,
            other_net,
        })
    }

    fn model_set(&self) -> Result<ModelSet<f32>, Error> {
        ModelSet::new(
            Box::new(self.self_net.clone()),
            Box::new(self.other_net.clone()),
        )
    }
}

pub fn episode_config(cfg: &EvalConfig) -> EpisodeConfig<f32> {
    let mut ep = EpisodeConfig::<f32>::default();
    ep.max_steps = cfg.max_steps;
    ep.separation = cfg.separation;
    ep.rendezvous_d = cfg.planner_config.rendezvous_d;
    ep.noise.scan_std = cfg.scan_noise;
    ep.noise.pose_std = cfg.pose_noise;
    ep.stationary_steps = cfg.stationary_steps;
    ep.stop_on_rendezvous = true;
    ep
}

/// Places two agents for one evaluation episode. In the wall world the
/// placement must straddle the wall (opposite x signs, |y| <= 2 m) so every
/// planner faces the symmetry-breaking setting; elsewhere the first
/// collision-free placement wins.
pub fn spawn_for_eval(
    world: &World32,
    env: EnvKind,
    ep: &EpisodeConfig<f32>,
    seed: u64,
) -> Result<Vec<AgentState<f32>>, Error> {
    for attempt in 0..10_000u64 {
        let states = match spawn(world, 2, ep, splitmix64(seed ^ splitmix64(attempt))) {
            Ok(s) => s,
            Err(Error::SpawnFailed(_)) => continue,
            Err(e) => return Err(e),
        };
        if env != EnvKind::Wall {
            return Ok(states);
        }
        let a = states[0].pose.position();
        let b = states[1].pose.position();
        if a.x * b.x < 0.0 && a.y.abs() <= 2.0 && b.y.abs() <= 2.0 {
            return Ok(states);
        }
    }
    Err(Error::SpawnFailed(format!(
        "no straddling spawn found in '{}' for seed {seed}",
        world.name()
    )))
}

fn build_planner(
    cfg: &EvalConfig,
    world: &World32,
    models: Option<&ModelPair>,
    ep_seed: u64,
    agent: usize,
) -> Result<Box<dyn GoalPlanner<f32>>, Error> {
    // Per-agent seed offset keeps the two planners' streams distinct while
    // staying a pure function of the episode seed.
    let planner_seed = splitmix64(ep_seed ^ (agent as u64 + 1));
    let ep = episode_config(cfg);
    let speed_step = ep.limits.max_linear * ep.dt;
    let rrt = |max_nodes: usize| RrtParams {
        max_nodes,
        agent_radius: ep.agent_radius,
        ..RrtParams::default()
    };
    Ok(match cfg.planner {
        PlannerKind::Hpp => {
            let pair = models.ok_or_else(|| {
                Error::InvalidConfig("hpp evaluation without loaded models".into())
            })?;
            Box::new(HppPlanner::new(
                pair.model_set()?,
                cfg.planner_config,
                planner_seed,
            )?)
        }
        PlannerKind::CentralizedMp => {
            Box::new(CentralizedPlanner::new(CentralizedKind::Midpoint, ep_seed))
        }
        PlannerKind::CentralizedOa => {
            Box::new(CentralizedPlanner::new(CentralizedKind::OtherAgent, ep_seed))
        }
        PlannerKind::CentralizedRp => {
            // Both agents share the raw episode seed: that is the whole
            // mechanism by which they agree on the random point.
            Box::new(CentralizedPlanner::new(CentralizedKind::RandomPoint, ep_seed))
        }
        PlannerKind::RrtMp => Box::new(RrtPlanner::new(
            world.clone(),
            CentralizedKind::Midpoint,
            rrt(cfg.rrt_max_nodes),
            cfg.rrt_replan_every,
            planner_seed,
        )),
        PlannerKind::RrtOa => Box::new(RrtPlanner::new(
            world.clone(),
            CentralizedKind::OtherAgent,
            rrt(cfg.rrt_max_nodes),
            cfg.rrt_replan_every,
            planner_seed,
        )),
        PlannerKind::RrtCem => Box::new(RrtCemPlanner::new(
            world.clone(),
            cfg.planner_config,
            rrt(cfg.rrt_max_nodes),
            speed_step,
            planner_seed,
        )?),
    })
}

/// Runs one fully seeded episode and returns its trace.
pub fn run_one(
    cfg: &EvalConfig,
    models: Option<&ModelPair>,
    seed: u64,
) -> Result<EpisodeTrace<f32>, Error> {
    run_one_ordered(cfg, models, seed, None)
}

/// [`run_one`] with an explicit agent evaluation order. Planners only see
/// their own observation and state, so any order must yield the same trace;
/// the decentralization audit runs both directions and compares.
pub fn run_one_ordered(
    cfg: &EvalConfig,
    models: Option<&ModelPair>,
    seed: u64,
    order: Option<&[usize]>,
) -> Result<EpisodeTrace<f32>, Error> {
    let ep_seed = episode_seed(cfg.base_seed, seed);
    let world: World32 =
        rendezvous_core::geometry::make_environment(cfg.environment, ep_seed);
    let ep = episode_config(cfg);
    let initial = spawn_for_eval(&world, cfg.environment, &ep, ep_seed)?;
    let mut planners: Vec<Box<dyn GoalPlanner<f32>>> = Vec::with_capacity(2);
    for agent in 0..initial.len() {
        planners.push(build_planner(cfg, &world, models, ep_seed, agent)?);
    }
    let mut controllers: Vec<Box<dyn Controller<f32>>> = initial
        .iter()
        .map(|_| Box::new(PotentialFieldController::<f32>::default()) as Box<dyn Controller<f32>>)
        .collect();
    let noise_seed = splitmix64(ep_seed ^ 0x6e6f_6973_65);
    match order {
        None => run_episode(&ep, &world, &initial, &mut planners, &mut controllers, noise_seed),
        Some(order) => run_episode_ordered(
            &ep,
            &world,
            &initial,
            &mut planners,
            &mut controllers,
            noise_seed,
            order,
        ),
    }
}

/// Runs every seed in the config. Models are loaded once up front so an
/// hpp config with bad paths fails before any episode runs.
pub fn run_eval(cfg: &EvalConfig) -> Result<Vec<(u64, EpisodeTrace<f32>)>, Error> {
    let models = match (&cfg.self_model, &cfg.other_model) {
        (Some(s), Some(o)) => Some(ModelPair::load(s, o)?),
        _ => None,
    };
    if cfg.planner.uses_models() && models.is_none() {
        return Err(Error::InvalidConfig(
            "hpp needs both 'self_model' and 'other_model' paths".into(),
        ));
    }
    let mut traces = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        traces.push((seed, run_one(cfg, models.as_ref(), seed)?));
    }
    Ok(traces)
}
