use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gd::GdConfig;
use super::sa::{run_seed, sa_plus_gd, simulated_annealing, SaConfig};
use super::{Problem, RunTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// One macro-run per seed.
    pub seeds: Vec<u64>,
    /// `seed` is replaced per run.
    pub sa: SaConfig,
    pub gd: GdConfig,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
}

impl ExperimentConfig {
    /// `runs` seeds derived from one master seed.
    pub fn derived_seeds(master: u64, runs: usize) -> Vec<u64> {
        (0..runs as u64).map(|r| run_seed(master, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub arm: String,
    pub run: usize,
    pub seed: u64,
    pub falsified: bool,
    pub min_robustness: f64,
    pub sims: usize,
    pub reached_threshold: bool,
    pub gd_dispatches: usize,
}

/// One column of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub falsified: usize,
    /// Runs with an SA sample at or below the threshold.
    pub reached_threshold: usize,
    /// Percentage of those runs that were falsified; `None` if there were none.
    pub conditional_rate: Option<f64>,
    pub avg_min_rob_all: f64,
    /// Over non-falsified runs; `None` when every run falsified.
    pub avg_min_rob_not_falsified: Option<f64>,
    pub min_min_rob_not_falsified: Option<f64>,
    pub max_min_rob_not_falsified: Option<f64>,
}

impl ArmSummary {
    pub fn from_rows(arm: &str, rows: &[&RunRow]) -> Self {
        let falsified = rows.iter().filter(|r| r.falsified).count();
        let reached: Vec<_> = rows.iter().filter(|r| r.reached_threshold).collect();
        let reached_falsified = reached.iter().filter(|r| r.falsified).count();
        let rest: Vec<f64> = rows.iter().filter(|r| !r.falsified).map(|r| r.min_robustness).collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let all: Vec<f64> = rows.iter().map(|r| r.min_robustness).collect();
        Self {
            arm: arm.to_string(),
            runs: rows.len(),
            falsified,
            reached_threshold: reached.len(),
            conditional_rate: (!reached.is_empty()).then(|| 100.0 * reached_falsified as f64 / reached.len() as f64),
            avg_min_rob_all: mean(&all).unwrap_or(f64::NAN),
            avg_min_rob_not_falsified: mean(&rest),
            min_min_rob_not_falsified: rest.iter().copied().reduce(f64::min),
            max_min_rob_not_falsified: rest.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub arms: Vec<ArmSummary>,
    pub rows: Vec<RunRow>,
    pub traces: Vec<RunTrace>,
}

impl ExperimentSummary {
    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

fn row(arm: &str, run: usize, seed: u64, t: &RunTrace) -> RunRow {
    RunRow {
        arm: arm.to_string(),
        run,
        seed,
        falsified: t.falsified,
        min_robustness: t.best_r,
        sims: t.sims,
        reached_threshold: t.reached_threshold,
        gd_dispatches: t.gd_dispatches,
    }
}

/// Runs SA and SA+GD on the same per-run seeds.
pub fn run_experiment(problem: &Problem, cfg: &ExperimentConfig) -> ExperimentSummary {
    let work = || {
        cfg.seeds
            .par_iter()
            .enumerate()
            .map(|(run, &seed)| {
                let sa_cfg = SaConfig { seed, ..cfg.sa.clone() };
                let sa = simulated_annealing(problem, &sa_cfg);
                let both = sa_plus_gd(problem, &sa_cfg, &cfg.gd);
                (run, seed, sa, both)
            })
            .collect::<Vec<_>>()
    };
    let results = if cfg.jobs > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        }
    } else {
        work()
    };

    let mut rows = Vec::with_capacity(2 * cfg.seeds.len());
    let mut traces = Vec::with_capacity(2 * cfg.seeds.len());
    for (run, seed, sa, both) in results {
        rows.push(row("sa", run, seed, &sa));
        rows.push(row("sa+gd", run, seed, &both));
        traces.push(sa);
        traces.push(both);
    }
    let arms = ["sa", "sa+gd"]
        .iter()
        .map(|arm| ArmSummary::from_rows(arm, &rows.iter().filter(|r| r.arm == *arm).collect::<Vec<_>>()))
        .collect();
    ExperimentSummary { arms, rows, traces }
}
