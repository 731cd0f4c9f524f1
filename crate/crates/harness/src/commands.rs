//! Subcommand implementations. Each takes a parsed config plus an output
//! directory and writes the artifacts the CLI documents.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rendezvous_core::control::{act, ControllerParams};
use rendezvous_core::geometry::make_environment;
use rendezvous_core::predict::{
    collect_dataset, evaluate_mse, load_dataset, save_dataset, train_with, CollectOptions,
    MaterializedDataset, Mlp, Role, Samples, TrainOptions,
};
use rendezvous_core::Error;

use crate::config::{AblateConfig, AblateKind, CollectConfig, EvalConfig, TrainConfig};
use crate::metrics::{self, EpisodeOutcome};
use crate::plot::{parse_summary, render_svg, Curve};
use crate::run::{run_eval, splitmix64};

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_collect(cfg: &CollectConfig, out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out)?;
    let mut opts = CollectOptions::<f32>::default();
    opts.steps = cfg.steps;
    opts.episode.separation = cfg.separation;

    let env = cfg.environment;
    let base = cfg.seed;
    let mut make_world = move |idx: usize| make_environment(env, splitmix64(base ^ splitmix64(idx as u64)));
    let params = ControllerParams::<f32>::default();
    let mut controller = move |obs: &_| act(obs, &params);

    let (mut self_ds, mut other_ds, stats) =
        collect_dataset(&mut make_world, &mut controller, cfg.trajectories, cfg.seed, &opts)?;
    if cfg.stride > 1 {
        self_ds = self_ds.stride(cfg.stride);
        other_ds = other_ds.stride(cfg.stride);
    }

    let mut manifest = String::new();
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    let _ = writeln!(manifest, "environment = {}", cfg.environment.name());
    let _ = writeln!(manifest, "trajectories_requested = {}", stats.requested);
    let _ = writeln!(manifest, "trajectories_collected = {}", stats.collected);
    let _ = writeln!(manifest, "skipped_spawns = {}", stats.skipped_spawns);
    let _ = writeln!(manifest, "steps = {}", cfg.steps);
    let _ = writeln!(manifest, "separation = {:.6}", cfg.separation);
    let _ = writeln!(manifest, "history = {}", self_ds.history());
    let _ = writeln!(manifest, "n_rays = {}", self_ds.n_rays());
    let _ = writeln!(manifest, "stride = {}", cfg.stride);
    let _ = writeln!(manifest, "self_examples = {}", self_ds.len());
    let _ = writeln!(manifest, "other_examples = {}", other_ds.len());
    let variant_names: Vec<&str> = cfg.variants.iter().map(|v| v.name()).collect();
    let _ = writeln!(manifest, "variants = {}", variant_names.join(","));

    for &variant in &cfg.variants {
        let self_path = out.join(format!("self_{}.ds", variant.name()));
        let other_path = out.join(format!("other_{}.ds", variant.name()));
        save_dataset(&self_ds, variant, &self_path)?;
        save_dataset(&other_ds, variant, &other_path)?;
        println!("wrote {}", self_path.display());
        println!("wrote {}", other_path.display());
    }
    write_text(&out.join("manifest.txt"), &manifest)?;
    println!(
        "collected {} trajectories ({} self / {} other examples)",
        stats.collected,
        self_ds.len(),
        other_ds.len()
    );
    Ok(())
}

/// Held-out losses of one trained model, as recorded in `loss.csv`.
#[derive(Clone, Debug)]
pub struct ModelReport {
    pub variant: String,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub weights: PathBuf,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub self_model: ModelReport,
    pub other_model: ModelReport,
}

struct SampleRange<'a, R> {
    inner: &'a MaterializedDataset<R>,
    start: usize,
    len: usize,
}

impl<R: rendezvous_core::num::Real> Samples<R> for SampleRange<'_, R> {
    fn len(&self) -> usize {
        self.len
    }

    fn input_width(&self) -> usize {
        self.inner.input_width()
    }

    fn target_width(&self) -> usize {
        self.inner.target_width()
    }

    fn fill(&self, idx: usize, input: &mut Vec<R>, target: &mut Vec<R>) {
        self.inner.fill(self.start + idx, input, target);
    }
}

fn train_one(
    name: &str,
    role: Role,
    ds: &MaterializedDataset<f32>,
    cfg: &TrainConfig,
    out: &Path,
    loss_csv: &mut String,
) -> Result<ModelReport, Error> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "dataset for the {name} model holds {n} examples; need at least 2"
        )));
    }
    // Rows are stored in (episode, step) order, so a tail holdout keeps
    // whole episodes out of training apart from at most one boundary one.
    let holdout_n = ((n as f64 * cfg.holdout_fraction).round() as usize).clamp(1, n - 1);
    let train_slice = SampleRange {
        inner: ds,
        start: 0,
        len: n - holdout_n,
    };
    let holdout = SampleRange {
        inner: ds,
        start: n - holdout_n,
        len: holdout_n,
    };

    let mut net = Mlp::<f32>::standard(
        ds.n_rays,
        ds.history,
        ds.variant,
        role,
        splitmix64(cfg.seed ^ name.len() as u64),
    );
    let opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed: splitmix64(cfg.seed.wrapping_add(name.len() as u64)),
        ..TrainOptions::default()
    };

    let variant = ds.variant.name().to_string();
    let initial_mse = evaluate_mse(&net, &holdout) as f64;
    let _ = writeln!(loss_csv, "0,{name},{variant},{initial_mse:.6}");
    let mut final_mse = initial_mse;
    train_with(&mut net, &train_slice, &opts, |epoch, net| {
        final_mse = evaluate_mse(net, &holdout) as f64;
        let _ = writeln!(loss_csv, "{epoch},{name},{variant},{final_mse:.6}");
    })?;

    let weights = out.join(format!("{name}_{variant}.mlp"));
    net.save(&weights)?;
    println!(
        "trained {name} model ({variant}): held-out mse {initial_mse:.6} -> {final_mse:.6}, wrote {}",
        weights.display()
    );
    Ok(ModelReport {
        variant,
        initial_mse,
        final_mse,
        weights,
    })
}

pub fn cmd_train(cfg: &TrainConfig, out: &Path) -> Result<TrainReport, Error> {
    fs::create_dir_all(out)?;
    let self_ds = load_dataset::<f32>(&cfg.dataset_self)?;
    let other_ds = load_dataset::<f32>(&cfg.dataset_other)?;

    let mut loss_csv = String::from("epoch,model,variant,mse\n");
    let self_model = train_one("self", Role::SelfMotion, &self_ds, cfg, out, &mut loss_csv)?;
    let other_model = train_one(
        "other",
        Role::other("potential-field"),
        &other_ds,
        cfg,
        out,
        &mut loss_csv,
    )?;
    write_text(&out.join("loss.csv"), &loss_csv)?;
    Ok(TrainReport {
        self_model,
        other_model,
    })
}

pub fn cmd_evaluate(cfg: &EvalConfig, out: &Path) -> Result<Vec<EpisodeOutcome>, Error> {
    fs::create_dir_all(out)?;
    let traces = run_eval(cfg)?;

    let mut outcomes = Vec::with_capacity(traces.len());
    for (seed, trace) in &traces {
        write_text(&out.join(format!("trace_seed{seed}.csv")), &trace.to_csv())?;
        outcomes.push(metrics::outcome(*seed, trace, cfg.stationary_steps));
    }
    let rows = metrics::summary_rows(&traces, cfg.max_steps);
    write_text(&out.join("summary.csv"), &metrics::summary_csv(&rows))?;
    write_text(&out.join("outcomes.csv"), &metrics::outcomes_csv(&outcomes))?;
    write_text(&out.join("plans.csv"), &metrics::plans_csv(&traces))?;

    let successes = outcomes.iter().filter(|o| o.success).count();
    let mean_final =
        outcomes.iter().map(|o| o.final_dist).sum::<f64>() / outcomes.len() as f64;
    println!(
        "evaluated {} on {}: {}/{} seeds rendezvoused, mean final distance {:.3} m",
        cfg.planner.name(),
        cfg.environment.name(),
        successes,
        outcomes.len(),
        mean_final
    );
    Ok(outcomes)
}

fn ablate_settings(cfg: &AblateConfig) -> Vec<(String, EvalConfig)> {
    let mut settings = Vec::new();
    match cfg.kind {
        AblateKind::PlanningFrequency => {
            for n in [5usize, 10, 15] {
                let mut eval = cfg.base.clone();
                eval.planner_config.replan_every = n;
                settings.push((format!("replan_{n}"), eval));
            }
        }
        AblateKind::PlanningHorizon => {
            for &t in &cfg.horizons {
                let mut eval = cfg.base.clone();
                eval.planner_config.horizon = t;
                settings.push((format!("horizon_{t}"), eval));
            }
        }
        AblateKind::PredictionType => {
            for (variant, self_path, other_path) in &cfg.variant_models {
                let mut eval = cfg.base.clone();
                eval.self_model = Some(self_path.clone());
                eval.other_model = Some(other_path.clone());
                settings.push((variant.name().to_string(), eval));
            }
        }
        AblateKind::CemParams => {
            for n in [5usize, 10, 15] {
                let mut eval = cfg.base.clone();
                eval.planner_config.max_iters = n;
                settings.push((format!("iters_{n}"), eval));
            }
            for n in [5usize, 10, 15] {
                let mut eval = cfg.base.clone();
                eval.planner_config.n_elites = n;
                settings.push((format!("elites_{n}"), eval));
            }
        }
    }
    settings
}

pub fn cmd_ablate(cfg: &AblateConfig, out: &Path) -> Result<(), Error> {
    fs::create_dir_all(out)?;
    let mut sweep = Vec::new();
    for (label, eval) in ablate_settings(cfg) {
        eval.planner_config
            .validate()
            .map_err(|e| Error::InvalidConfig(format!("setting '{label}': {e}")))?;
        let outcomes = cmd_evaluate(&eval, &out.join(&label))?;
        sweep.push(metrics::sweep_row(&label, &outcomes, eval.max_steps));
    }
    write_text(&out.join("sweep.csv"), &metrics::sweep_csv(&sweep))?;
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

fn curve_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string());
    if stem == "summary" {
        if let Some(parent) = path.parent().and_then(|p| p.file_name()) {
            return parent.to_string_lossy().to_string();
        }
    }
    stem
}

pub fn cmd_plot(summaries: &[PathBuf], out: &Path) -> Result<(), Error> {
    if summaries.is_empty() {
        return Err(Error::InvalidConfig("no summary files given".into()));
    }
    let mut curves = Vec::with_capacity(summaries.len());
    for path in summaries {
        let text = fs::read_to_string(path)?;
        let rows = parse_summary(&text).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        curves.push(Curve {
            label: curve_label(path),
            rows,
        });
    }
    let svg = render_svg(&curves)?;
    let target = if out.extension().is_some_and(|e| e == "svg") {
        out.to_path_buf()
    } else {
        fs::create_dir_all(out)?;
        out.join("distance.svg")
    };
    if let Some(parent) = target.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_text(&target, &svg)?;
    println!("wrote {}", target.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;
    use tempfile::tempdir;

    fn collect_cfg(text: &str) -> CollectConfig {
        CollectConfig::from_raw(&RawConfig::parse(text).unwrap(), None).unwrap()
    }

    #[test]
    fn collect_writes_datasets_and_manifest() {
        let dir = tempdir().unwrap();
        let cfg = collect_cfg(
            "environment = simple\ntrajectories = 2\nsteps = 12\nseed = 3\n",
        );
        cmd_collect(&cfg, dir.path()).unwrap();
        let ds = dir.path().join("self_delta-pose-lidar.ds");
        assert!(ds.exists());
        assert!(dir.path().join("other_delta-pose-lidar.ds").exists());
        let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert!(manifest.contains("trajectories_collected = 2"));
        assert!(manifest.contains("environment = simple"));
        // 2 trajectories x 2 agents x (12 - 5) windows each.
        assert!(manifest.contains("self_examples = 28"), "{manifest}");
    }

    #[test]
    fn collect_is_deterministic() {
        let cfg = collect_cfg(
            "environment = training_random\ntrajectories = 2\nsteps = 10\nseed = 9\n",
        );
        let a = tempdir().unwrap();
        let b = tempdir().unwrap();
        cmd_collect(&cfg, a.path()).unwrap();
        cmd_collect(&cfg, b.path()).unwrap();
        for name in ["self_delta-pose-lidar.ds", "other_delta-pose-lidar.ds"] {
            let x = fs::read(a.path().join(name)).unwrap();
            let y = fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name} differs between identical runs");
        }
    }

    #[test]
    fn train_writes_weights_and_loss_curve() {
        let dir = tempdir().unwrap();
        let cfg = collect_cfg(
            "environment = simple\ntrajectories = 2\nsteps = 20\nseed = 5\n",
        );
        cmd_collect(&cfg, dir.path()).unwrap();

        let train_text = format!(
            "dataset_self = {}\ndataset_other = {}\nepochs = 2\nbatch_size = 16\nseed = 1\n",
            dir.path().join("self_delta-pose-lidar.ds").display(),
            dir.path().join("other_delta-pose-lidar.ds").display(),
        );
        let tcfg =
            crate::config::TrainConfig::from_raw(&RawConfig::parse(&train_text).unwrap(), None)
                .unwrap();
        let report = cmd_train(&tcfg, dir.path()).unwrap();
        assert!(report.self_model.weights.exists());
        assert!(report.other_model.weights.exists());

        let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
        let lines: Vec<&str> = loss.lines().collect();
        assert_eq!(lines[0], "epoch,model,variant,mse");
        // Header + (epochs 0..=2) x 2 models.
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("0,self,delta-pose-lidar,"));
        assert!(lines[4].starts_with("0,other,delta-pose-lidar,"));
    }

    #[test]
    fn evaluate_writes_all_artifacts() {
        let dir = tempdir().unwrap();
        let cfg = crate::config::EvalConfig::from_raw(
            &RawConfig::parse(
                "environment = simple\nplanner = centralized_mp\nseeds = 0,1,2\nmax_steps = 25\n",
            )
            .unwrap(),
            None,
        )
        .unwrap();
        let outcomes = cmd_evaluate(&cfg, dir.path()).unwrap();
        assert_eq!(outcomes.len(), 3);
        for seed in 0..3 {
            assert!(dir.path().join(format!("trace_seed{seed}.csv")).exists());
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 26);
        assert!(dir.path().join("outcomes.csv").exists());
        assert!(dir.path().join("plans.csv").exists());
    }

    #[test]
    fn evaluate_summary_matches_traces_recomputed_independently() {
        let dir = tempdir().unwrap();
        let cfg = crate::config::EvalConfig::from_raw(
            &RawConfig::parse(
                "environment = simple\nplanner = centralized_oa\nseeds = 0,1\nmax_steps = 15\n",
            )
            .unwrap(),
            None,
        )
        .unwrap();
        cmd_evaluate(&cfg, dir.path()).unwrap();

        // Recompute per-step means from the raw trace files alone.
        let mut per_seed: Vec<Vec<f64>> = Vec::new();
        for seed in [0u64, 1] {
            let text =
                fs::read_to_string(dir.path().join(format!("trace_seed{seed}.csv"))).unwrap();
            let mut rows: Vec<(usize, f64, f64)> = Vec::new();
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                rows.push((
                    f[0].parse().unwrap(),
                    f[2].parse().unwrap(),
                    f[3].parse().unwrap(),
                ));
            }
            let max_step = rows.iter().map(|r| r.0).max().unwrap();
            let mut dists = Vec::new();
            for step in 0..=max_step {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.0 == step)
                    .map(|r| (r.1, r.2))
                    .collect();
                assert_eq!(pts.len(), 2);
                let d = ((pts[0].0 - pts[1].0).powi(2) + (pts[0].1 - pts[1].1).powi(2)).sqrt();
                dists.push(d);
            }
            per_seed.push(dists);
        }
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        for (i, line) in summary.lines().skip(1).enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            let mean: f64 = f[1].parse().unwrap();
            let expect: f64 = per_seed
                .iter()
                .map(|d| *d.get(i).unwrap_or(d.last().unwrap()))
                .sum::<f64>()
                / per_seed.len() as f64;
            assert!(
                (mean - expect).abs() < 2e-6,
                "step {i}: summary {mean} vs recomputed {expect}"
            );
        }
    }

    #[test]
    fn plot_reads_summaries_and_writes_svg() {
        let dir = tempdir().unwrap();
        let eval_dir = dir.path().join("mp");
        let cfg = crate::config::EvalConfig::from_raw(
            &RawConfig::parse(
                "environment = simple\nplanner = centralized_mp\nseeds = 0\nmax_steps = 10\n",
            )
            .unwrap(),
            None,
        )
        .unwrap();
        cmd_evaluate(&cfg, &eval_dir).unwrap();

        let out = dir.path().join("fig.svg");
        cmd_plot(&[eval_dir.join("summary.csv")], &out).unwrap();
        let svg = fs::read_to_string(&out).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(">mp<"), "label should come from the directory");
    }

    #[test]
    fn plot_rejects_malformed_summaries() {
        let dir = tempdir().unwrap();
        let bad = dir.path().join("summary.csv");
        fs::write(&bad, "step,mean_dist,std_dist\n0,oops,0.0\n").unwrap();
        let err = cmd_plot(&[bad], &dir.path().join("fig.svg")).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("summary.csv"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }
}
