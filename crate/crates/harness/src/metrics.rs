//! Aggregation of episode traces into the CSV artifacts an evaluation
//! writes: per-step distance summaries, per-seed outcomes, planner
//! diagnostics, and sweep tables.

use rendezvous_core::sim::EpisodeTrace;

/// Per-seed result of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub seed: u64,
    pub success: bool,
    pub time_to_rendezvous: Option<usize>,
    pub final_dist: f64,
}

pub fn outcome(seed: u64, trace: &EpisodeTrace<f32>, stationary_steps: usize) -> EpisodeOutcome {
    EpisodeOutcome {
        seed,
        success: trace.rendezvous,
        time_to_rendezvous: trace.rendezvous_step(stationary_steps),
        final_dist: trace.final_mean_pairwise() as f64,
    }
}

pub fn outcomes_csv(outcomes: &[EpisodeOutcome]) -> String {
    let mut out = String::from("seed,success,time_to_rendezvous,final_dist\n");
    for o in outcomes {
        let time = match o.time_to_rendezvous {
            Some(t) => t.to_string(),
            None => "timeout".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            o.seed, o.success, time, o.final_dist
        ));
    }
    out
}

/// One row of the per-step distance summary across seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryRow {
    pub step: usize,
    pub mean_dist: f64,
    pub std_dist: f64,
}

/// Mean and population standard deviation of the mean pairwise distance at
/// every step, across seeds. Episodes that ended early hold their final
/// distance for the remaining steps so every curve spans `max_steps` rows.
pub fn summary_rows(traces: &[(u64, EpisodeTrace<f32>)], max_steps: usize) -> Vec<SummaryRow> {
    let n = traces.len();
    let mut rows = Vec::with_capacity(max_steps);
    for step in 0..max_steps {
        let mut values = Vec::with_capacity(n);
        for (_, trace) in traces {
            let idx = step.min(trace.steps.len() - 1);
            values.push(trace.mean_pairwise(idx) as f64);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        rows.push(SummaryRow {
            step,
            mean_dist: mean,
            std_dist: var.sqrt(),
        });
    }
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("step,mean_dist,std_dist\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6}\n",
            r.step, r.mean_dist, r.std_dist
        ));
    }
    out
}

/// Planner diagnostics across all seeds, one row per recorded plan.
pub fn plans_csv(traces: &[(u64, EpisodeTrace<f32>)]) -> String {
    let mut out = String::from("seed,step,agent,iterations,std_x,std_y,best_reward\n");
    for (seed, trace) in traces {
        for rec in &trace.plan_records {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6}\n",
                seed,
                rec.step,
                rec.agent,
                rec.debug.iterations,
                rec.debug.final_std[0],
                rec.debug.final_std[1],
                rec.debug.best_reward
            ));
        }
    }
    out
}

/// Aggregate line for one setting of a sweep.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub setting: String,
    pub success_rate: f64,
    pub mean_final_dist: f64,
    /// Mean steps to rendezvous, with failures counted at the episode cap.
    pub mean_time: f64,
}

pub fn sweep_row(setting: &str, outcomes: &[EpisodeOutcome], max_steps: usize) -> SweepRow {
    let n = outcomes.len() as f64;
    let successes = outcomes.iter().filter(|o| o.success).count() as f64;
    let mean_final = outcomes.iter().map(|o| o.final_dist).sum::<f64>() / n;
    let mean_time = outcomes
        .iter()
        .map(|o| o.time_to_rendezvous.unwrap_or(max_steps) as f64)
        .sum::<f64>()
        / n;
    SweepRow {
        setting: setting.to_string(),
        success_rate: successes / n,
        mean_final_dist: mean_final,
        mean_time,
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("setting,success_rate,mean_final_dist,mean_time\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.setting, r.success_rate, r.mean_final_dist, r.mean_time
        ));
    }
    out
}
