//! CSV and JSON artifacts, written atomically.

use std::fs;
use std::path::Path;

use hyfal_core::{AugmentedTrajectory, ExperimentSummary, HybridTrajectory, RunTrace};

use crate::error::CliError;

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn cell(v: f64) -> String {
    v.to_string()
}

fn state_headers(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn trajectory_csv(traj: &HybridTrajectory) -> Result<Vec<u8>, CliError> {
    let n = traj.samples.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "loc".to_string()];
    header.extend(state_headers("x", n));
    w.write_record(&header)?;
    for s in &traj.samples {
        let mut row = vec![cell(s.t), s.loc.to_string()];
        row.extend(s.x.iter().map(|&v| cell(v)));
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn transitions_csv(traj: &HybridTrajectory, n: usize) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tau".to_string(), "src".to_string(), "dst".to_string()];
    header.extend(state_headers("x_minus_", n));
    header.extend(state_headers("x_plus_", n));
    w.write_record(&header)?;
    for tr in &traj.transitions {
        let mut row = vec![cell(tr.tau), tr.source.to_string(), tr.target.to_string()];
        row.extend(tr.x_minus.iter().chain(tr.x_plus.iter()).map(|&v| cell(v)));
        w.write_record(&row)?;
    }
    finish(w)
}

/// One row per sample: `p_x0` then `p_θ`, each column-major.
pub fn sensitivity_csv(aug: &AugmentedTrajectory) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let Some(first) = aug.sens.first() else {
        w.write_record(["t"])?;
        return finish(w);
    };
    let (n, np) = (first.p_x0.nrows(), first.p_theta.ncols());
    let mut header = vec!["t".to_string()];
    for c in 1..=n {
        for r in 1..=n {
            header.push(format!("p_x0_{r}_{c}"));
        }
    }
    for c in 1..=np {
        for r in 1..=n {
            header.push(format!("p_theta_{r}_{c}"));
        }
    }
    w.write_record(&header)?;
    for (s, p) in aug.base.samples.iter().zip(&aug.sens) {
        let mut row = vec![cell(s.t)];
        row.extend(p.p_x0.iter().chain(p.p_theta.iter()).map(|&v| cell(v)));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Robustness against simulation count, for plotting.
pub fn trace_series_csv(trace: &RunTrace) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sim", "phase", "iteration", "attempt", "r", "accepted", "best_so_far"])?;
    let mut best = f64::INFINITY;
    for r in &trace.records {
        if r.accepted || r.phase == hyfal_core::Phase::Sa {
            if let Some(v) = r.r {
                best = best.min(v);
            }
        }
        let phase = match r.phase {
            hyfal_core::Phase::Sa => "sa",
            hyfal_core::Phase::Gd => "gd",
        };
        w.write_record([
            r.sim.to_string(),
            phase.to_string(),
            r.iteration.to_string(),
            r.attempt.to_string(),
            r.r.map_or(String::new(), cell),
            r.accepted.to_string(),
            cell(best),
        ])?;
    }
    finish(w)
}

pub const TABLE_ROWS: [&str; 6] = [
    "num. of total falsification",
    "% of falsification if SA finds r<=r_T",
    "Avg. min-Rob. (all the cases)",
    "Avg. min-Rob. (not falsified cases)",
    "Min. min-Rob. (not falsified cases)",
    "Max. min-Rob. (not falsified cases)",
];

fn opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), cell)
}

/// Comparison table: one row per statistic, one column per arm.
pub fn summary_csv(s: &ExperimentSummary) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["statistic".to_string()];
    header.extend(s.arms.iter().map(|a| a.arm.to_uppercase()));
    w.write_record(&header)?;
    for (i, label) in TABLE_ROWS.iter().enumerate() {
        let mut row = vec![label.to_string()];
        for a in &s.arms {
            row.push(match i {
                0 => format!("{}/{}", a.falsified, a.runs),
                1 => opt(a.conditional_rate),
                2 => cell(a.avg_min_rob_all),
                3 => opt(a.avg_min_rob_not_falsified),
                4 => opt(a.min_min_rob_not_falsified),
                _ => opt(a.max_min_rob_not_falsified),
            });
        }
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn runs_csv(s: &ExperimentSummary) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["arm", "run", "seed", "falsified", "min_robustness", "sims", "reached_threshold", "gd_dispatches"])?;
    for r in &s.rows {
        w.write_record([
            r.arm.clone(),
            r.run.to_string(),
            r.seed.to_string(),
            r.falsified.to_string(),
            cell(r.min_robustness),
            r.sims.to_string(),
            r.reached_threshold.to_string(),
            r.gd_dispatches.to_string(),
        ])?;
    }
    finish(w)
}

/// Best robustness so far against simulation count, every run of every arm.
pub fn best_so_far_csv(s: &ExperimentSummary) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["arm", "run", "sim", "best_so_far"])?;
    for (row, trace) in s.rows.iter().zip(&s.traces) {
        let mut best = f64::INFINITY;
        for r in &trace.records {
            if r.accepted || r.phase == hyfal_core::Phase::Sa {
                if let Some(v) = r.r {
                    best = best.min(v);
                }
            }
            w.write_record([row.arm.clone(), row.run.to_string(), r.sim.to_string(), cell(best)])?;
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        write_atomic(&p, b"a,b\n").unwrap();
        write_atomic(&p, b"c,d\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"c,d\n");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
