//! Trajectory collection and episode-backed training datasets.
//!
//! Raw episodes (poses, scans, shared goal) are stored once behind `Arc`s;
//! the self- and other-prediction datasets are just window indices into
//! them, materialized per prediction variant on demand. Flattening
//! thousands of trajectories eagerly would cost gigabytes.

use super::{
    encode_pose_target, encode_scan_target, flatten_window, input_width, output_width,
    PredictionType, Samples,
};
use super::mlp::{Mlp, Workspace};
use crate::geometry::{LidarScan, Point2, Pose, World};
use crate::num::Real;
use crate::sim::{observe, spawn, step_agent, Command, EpisodeConfig, Observation};
use crate::Error;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

/// One recorded trajectory: every agent's pose and scan at every step, plus
/// the goal they all drove toward.
#[derive(Clone, Debug)]
pub struct EpisodeLog<R> {
    /// World-frame poses, indexed `[agent][step]`.
    pub poses: Vec<Vec<Pose<R>>>,
    /// Each agent's own scans, indexed `[agent][step]`.
    pub scans: Vec<Vec<LidarScan<R>>>,
    /// The shared goal of the episode.
    pub goal: Point2<R>,
}

#[derive(Clone, Copy, Debug)]
struct WindowRef {
    episode: u32,
    observer: u16,
    target: u16,
    t: u32,
}

/// A set of history windows over shared episode logs. `observer == target`
/// windows train self-prediction; mixed pairs train other-prediction (the
/// inputs then combine the target's poses with the *observer's* scans).
#[derive(Clone)]
pub struct Dataset<R> {
    episodes: Vec<Arc<EpisodeLog<R>>>,
    entries: Vec<WindowRef>,
    history: usize,
    n_rays: usize,
}

impl<R: Real> Dataset<R> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn n_rays(&self) -> usize {
        self.n_rays
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn input_width(&self) -> usize {
        input_width(self.history, self.n_rays)
    }

    pub fn target_width(&self) -> usize {
        output_width(self.n_rays)
    }

    /// Binds a prediction variant, yielding random-access training samples.
    pub fn with_variant(&self, variant: PredictionType) -> DatasetView<'_, R> {
        DatasetView { data: self, variant }
    }

    /// Keeps every `k`-th window (same episodes) — cheap subsampling.
    pub fn stride(&self, k: usize) -> Dataset<R> {
        assert!(k > 0, "stride must be positive");
        Dataset {
            episodes: self.episodes.clone(),
            entries: self.entries.iter().copied().step_by(k).collect(),
            history: self.history,
            n_rays: self.n_rays,
        }
    }

    /// Splits off the last `fraction` of episodes (at least one) as a
    /// held-out set. Windows never straddle the split.
    pub fn split_by_episode(&self, fraction: f64) -> (Dataset<R>, Dataset<R>) {
        assert!(
            self.episodes.len() >= 2,
            "need at least two episodes to hold one out"
        );
        let holdout = ((self.episodes.len() as f64 * fraction).round() as usize)
            .clamp(1, self.episodes.len() - 1);
        let cutoff = (self.episodes.len() - holdout) as u32;
        let (train, held): (Vec<_>, Vec<_>) =
            self.entries.iter().partition(|e| e.episode < cutoff);
        let make = |entries| Dataset {
            episodes: self.episodes.clone(),
            entries,
            history: self.history,
            n_rays: self.n_rays,
        };
        (make(train), make(held))
    }

    fn fill_example(
        &self,
        e: &WindowRef,
        variant: PredictionType,
        input: &mut Vec<R>,
        target: &mut Vec<R>,
    ) {
        let ep = &self.episodes[e.episode as usize];
        let (obs, tgt, t) = (e.observer as usize, e.target as usize, e.t as usize);
        let anchor = ep.poses[obs][t];
        let lo = t + 1 - self.history;
        flatten_window(
            &anchor,
            &ep.poses[tgt][lo..=t],
            &ep.scans[obs][lo..=t],
            ep.goal,
            input,
        );
        let pose = encode_pose_target(variant, &anchor, &ep.poses[tgt][t], &ep.poses[tgt][t + 1]);
        target.clear();
        target.extend_from_slice(&pose);
        encode_scan_target(variant, &ep.scans[obs][t], &ep.scans[obs][t + 1], target);
    }
}

/// A [`Dataset`] bound to one prediction variant.
#[derive(Clone, Copy)]
pub struct DatasetView<'a, R> {
    data: &'a Dataset<R>,
    variant: PredictionType,
}

impl<R: Real> Samples<R> for DatasetView<'_, R> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn input_width(&self) -> usize {
        self.data.input_width()
    }

    fn target_width(&self) -> usize {
        self.data.target_width()
    }

    fn fill(&self, idx: usize, input: &mut Vec<R>, target: &mut Vec<R>) {
        self.data
            .fill_example(&self.data.entries[idx], self.variant, input, target);
    }
}

#[derive(Clone, Debug)]
pub struct CollectOptions<R> {
    pub n_agents: usize,
    /// Frames recorded per trajectory (the last one only serves as a
    /// target).
    pub steps: usize,
    pub history: usize,
    pub episode: EpisodeConfig<R>,
}

impl<R: Real> Default for CollectOptions<R> {
    fn default() -> Self {
        Self {
            n_agents: 2,
            steps: 100,
            history: super::HISTORY_LEN,
            episode: EpisodeConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CollectStats {
    pub requested: usize,
    pub collected: usize,
    pub skipped_spawns: usize,
}

/// Runs `n_trajectories` scripted episodes and windows them into a
/// self-prediction and an other-prediction dataset (sharing the logs).
///
/// Per trajectory: a fresh world from `make_world`, one goal sampled
/// uniformly in its bounds (deliberately not collision-checked), agents
/// spawned at the configured separation, then driven by `controller` toward
/// the shared goal for the full step budget. Trajectories whose spawn fails
/// are skipped and counted. Deterministic in `seed`.
pub fn collect_dataset<R: Real>(
    make_world: &mut dyn FnMut(usize) -> World<R>,
    controller: &mut dyn FnMut(&Observation<R>) -> Command<R>,
    n_trajectories: usize,
    seed: u64,
    opts: &CollectOptions<R>,
) -> Result<(Dataset<R>, Dataset<R>, CollectStats), Error> {
    if n_trajectories == 0 {
        return Err(Error::InvalidConfig(
            "collection needs at least one trajectory".into(),
        ));
    }
    if opts.steps < opts.history + 1 {
        return Err(Error::InvalidConfig(format!(
            "trajectories of {} steps cannot fill a history of {} plus a target",
            opts.steps, opts.history
        )));
    }
    let n = opts.n_agents;
    if n < 2 {
        return Err(Error::InvalidConfig(
            "collection needs at least two agents".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = CollectStats {
        requested: n_trajectories,
        ..CollectStats::default()
    };
    let mut episodes: Vec<Arc<EpisodeLog<R>>> = Vec::new();

    for traj in 0..n_trajectories {
        let world = make_world(traj);
        let b = world.bounds();
        let gx = rng.random_range(b.min.x.as_f64()..b.max.x.as_f64());
        let gy = rng.random_range(b.min.y.as_f64()..b.max.y.as_f64());
        let goal = Point2::new(R::of(gx), R::of(gy));
        let spawn_seed: u64 = rng.random();

        let mut states = match spawn(&world, n, &opts.episode, spawn_seed) {
            Ok(s) => s,
            Err(Error::SpawnFailed(_)) => {
                stats.skipped_spawns += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let goals = vec![goal; n];
        let mut poses: Vec<Vec<Pose<R>>> = vec![Vec::with_capacity(opts.steps); n];
        let mut scans: Vec<Vec<LidarScan<R>>> = vec![Vec::with_capacity(opts.steps); n];
        let mut cmds: Vec<Command<R>> = Vec::with_capacity(n);

        for t in 0..opts.steps {
            cmds.clear();
            for a in 0..n {
                let obs = observe(&world, &states, &goals, a, t, &opts.episode.lidar)?;
                cmds.push(controller(&obs));
                poses[a].push(states[a].pose);
                scans[a].push(obs.scan);
            }
            for a in 0..n {
                states[a] = step_agent(
                    &states[a],
                    cmds[a],
                    &world,
                    opts.episode.dt,
                    &opts.episode.limits,
                    opts.episode.agent_radius,
                );
            }
        }
        episodes.push(Arc::new(EpisodeLog { poses, scans, goal }));
        stats.collected += 1;
    }

    if episodes.is_empty() {
        return Err(Error::SpawnFailed(format!(
            "all {n_trajectories} trajectories failed to spawn"
        )));
    }

    let h = opts.history;
    let mut self_entries = Vec::new();
    let mut other_entries = Vec::new();
    for (e, _) in episodes.iter().enumerate() {
        for observer in 0..n {
            for t in (h - 1)..(opts.steps - 1) {
                self_entries.push(WindowRef {
                    episode: e as u32,
                    observer: observer as u16,
                    target: observer as u16,
                    t: t as u32,
                });
                for target in 0..n {
                    if target != observer {
                        other_entries.push(WindowRef {
                            episode: e as u32,
                            observer: observer as u16,
                            target: target as u16,
                            t: t as u32,
                        });
                    }
                }
            }
        }
    }

    let n_rays = opts.episode.lidar.n_rays;
    let d_self = Dataset {
        episodes: episodes.clone(),
        entries: self_entries,
        history: h,
        n_rays,
    };
    let d_other = Dataset {
        episodes,
        entries: other_entries,
        history: h,
        n_rays,
    };
    Ok((d_self, d_other, stats))
}

/// Mean per-example MSE of `net` over `data`.
pub fn evaluate_mse<R: Real>(net: &Mlp<R>, data: &impl Samples<R>) -> R {
    assert!(!data.is_empty(), "cannot evaluate on an empty dataset");
    let mut ws = Workspace::new();
    let mut input = Vec::new();
    let mut target = Vec::new();
    let mut total = 0.0f64;
    for i in 0..data.len() {
        data.fill(i, &mut input, &mut target);
        total += net.loss(&input, &target, &mut ws).as_f64();
    }
    R::of(total / data.len() as f64)
}

/// Writes the dataset materialized under `variant`: one text header line,
/// then per example the input and target values as little-endian f64.
pub fn save_dataset<R: Real>(
    data: &Dataset<R>,
    variant: PredictionType,
    path: &Path,
) -> Result<(), Error> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(
        f,
        "rendezvous-dataset v1 h={} n_rays={} variant={} examples={}",
        data.history,
        data.n_rays,
        variant,
        data.len()
    )?;
    let mut input = Vec::new();
    let mut target = Vec::new();
    for e in &data.entries {
        data.fill_example(e, variant, &mut input, &mut target);
        for v in input.iter().chain(&target) {
            f.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Eagerly loaded training examples, as written by [`save_dataset`].
pub struct MaterializedDataset<R> {
    inputs: Vec<R>,
    targets: Vec<R>,
    n: usize,
    input_w: usize,
    target_w: usize,
    pub history: usize,
    pub n_rays: usize,
    pub variant: PredictionType,
}

impl<R: Real> Samples<R> for MaterializedDataset<R> {
    fn len(&self) -> usize {
        self.n
    }

    fn input_width(&self) -> usize {
        self.input_w
    }

    fn target_width(&self) -> usize {
        self.target_w
    }

    fn fill(&self, idx: usize, input: &mut Vec<R>, target: &mut Vec<R>) {
        input.clear();
        input.extend_from_slice(&self.inputs[idx * self.input_w..(idx + 1) * self.input_w]);
        target.clear();
        target.extend_from_slice(&self.targets[idx * self.target_w..(idx + 1) * self.target_w]);
    }
}

/// Reads a file written by [`save_dataset`].
pub fn load_dataset<R: Real>(path: &Path) -> Result<MaterializedDataset<R>, Error> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header line".into(),
        })?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Parse {
        line: 1,
        message: "header is not UTF-8".into(),
    })?;
    let parse_err = |message: String| Error::Parse { line: 1, message };

    let mut fields = header.split_whitespace();
    if fields.next() != Some("rendezvous-dataset") || fields.next() != Some("v1") {
        return Err(parse_err("not a v1 rendezvous-dataset file".into()));
    }
    let mut history = None;
    let mut n_rays = None;
    let mut variant = None;
    let mut examples = None;
    for tok in fields {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| parse_err("expected key=value header fields".into()))?;
        match key {
            "h" => history = value.parse::<usize>().ok(),
            "n_rays" => n_rays = value.parse::<usize>().ok(),
            "variant" => variant = Some(value.parse::<PredictionType>()?),
            "examples" => examples = value.parse::<usize>().ok(),
            _ => return Err(parse_err(format!("unknown header field '{key}'"))),
        }
    }
    let history = history.ok_or_else(|| parse_err("missing or bad h".into()))?;
    let n_rays = n_rays.ok_or_else(|| parse_err("missing or bad n_rays".into()))?;
    let variant = variant.ok_or_else(|| parse_err("missing variant".into()))?;
    let n = examples.ok_or_else(|| parse_err("missing or bad examples".into()))?;

    let input_w = input_width(history, n_rays);
    let target_w = output_width(n_rays);
    let row = input_w + target_w;
    let body = &bytes[nl + 1..];
    if body.len() != n * row * 8 {
        return Err(Error::ShapeMismatch(format!(
            "dataset payload holds {} bytes, header shape needs {}",
            body.len(),
            n * row * 8
        )));
    }

    let mut inputs = Vec::with_capacity(n * input_w);
    let mut targets = Vec::with_capacity(n * target_w);
    for r in 0..n {
        let base = r * row * 8;
        for i in 0..row {
            let at = base + i * 8;
            let raw: [u8; 8] = body[at..at + 8].try_into().unwrap();
            let v = R::of(f64::from_le_bytes(raw));
            if i < input_w {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    Ok(MaterializedDataset {
        inputs,
        targets,
        n,
        input_w,
        target_w,
        history,
        n_rays,
        variant,
    })
}
