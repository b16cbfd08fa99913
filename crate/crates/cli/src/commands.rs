use std::path::{Path, PathBuf};
use std::time::Instant;

use hyfal_core::benchmarks::{by_name, BenchmarkDef, BenchmarkOptions};
use hyfal_core::{
    eval_robustness, gradient_descent, parse_formula, run_experiment, sa_plus_gd, simulate_with_sensitivity, simulated_annealing, ExperimentConfig, Formula, Problem, RunTrace, SaConfig,
    SearchPoint, SimOptions,
};

use crate::config::{float_list, Driver, RunConfig};
use crate::error::CliError;
use crate::output::{
    best_so_far_csv, runs_csv, sensitivity_csv, summary_csv, trace_series_csv, trajectory_csv, transitions_csv,
    write_atomic, TABLE_ROWS,
};
use crate::{RunArgs, SimulateArgs, VariantArgs};

pub const OUT_DIR_ENV: &str = "HYFAL_OUT_DIR";

fn out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hyfal-out"))
}

fn model(name: &str, opts: &BenchmarkOptions) -> Result<BenchmarkDef, CliError> {
    by_name(name, opts).map_err(|e| CliError::Validation(e.to_string()))
}

fn resolve_formula(bench: &BenchmarkDef, arg: &str, horizon: f64) -> Result<Formula, CliError> {
    let f = match arg.trim() {
        "objective" => bench.objective.clone(),
        "requirement" => bench.requirement.clone(),
        text => {
            let src = match text.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path)
                    .map_err(|e| CliError::Validation(format!("formula file {path}: {e}")))?,
                None => text.to_string(),
            };
            parse_formula(&src, &|v| bench.automaton.state_index(v))
                .map_err(|e| CliError::Validation(format!("formula: {e}")))?
        }
    };
    f.check(horizon, bench.automaton.state_dim).map_err(|e| CliError::Validation(format!("formula: {e}")))?;
    Ok(f)
}

fn start_point(
    bench: &BenchmarkDef,
    x0: Option<Vec<f64>>,
    theta: Option<Vec<f64>>,
    angle: Option<f64>,
    unchecked: bool,
) -> Result<SearchPoint, CliError> {
    let mut p = bench.start.clone();
    if let Some(x) = x0 {
        // a short list fills the leading components
        let n = bench.automaton.state_dim;
        if x.len() > n {
            return Err(CliError::Validation(format!("x0 has {} values, the model has {n} states", x.len())));
        }
        let mut full = vec![0.0; n];
        full[..x.len()].copy_from_slice(&x);
        p.x0 = full;
    }
    if let Some(t) = theta {
        p.theta = t;
    }
    if let Some(a) = angle {
        if bench.name != "billiard" {
            return Err(CliError::Validation("--angle only applies to the billiard model".into()));
        }
        p.theta = vec![a];
    }
    if p.theta.len() != bench.space.param_count() {
        return Err(CliError::Validation(format!(
            "theta has {} values, the model takes {}",
            p.theta.len(),
            bench.space.param_count()
        )));
    }
    if !unchecked && !bench.space.contains(&p) {
        return Err(CliError::Validation(
            "start point lies outside the search box (pass --unchecked to allow it)".into(),
        ));
    }
    Ok(p)
}

fn variants(v: &VariantArgs) -> BenchmarkOptions {
    BenchmarkOptions {
        corrected_dynamics: v.corrected_dynamics,
        printed_glycemic_routing: v.printed_routing,
        located_vehicle_sets: v.located_sets,
        ..Default::default()
    }
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let bench = model(&a.model, &variants(&a.variants))?;
    let horizon = a.horizon.unwrap_or(bench.horizon);
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(CliError::Validation(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    let x0 = a.x0.as_deref().map(|s| float_list("x0", s)).transpose()?;
    let theta = a.theta.as_deref().map(|s| float_list("theta", s)).transpose()?;
    let p = start_point(&bench, x0, theta, a.angle, a.unchecked)?;
    let formula = a.formula.as_deref().map(|f| resolve_formula(&bench, f, horizon)).transpose()?;
    if a.steps == 0 {
        return Err(CliError::Validation("--steps must be positive".into()));
    }
    let input = bench.space.input_for(&p).map_err(|e| CliError::Validation(e.to_string()))?;
    let opts = SimOptions::rk4(a.steps);
    let run = |e: hyfal_core::SimError| CliError::Runtime(format!("simulation failed: {e}"));
    let (traj, aug) = if a.sensitivity {
        let aug = simulate_with_sensitivity(&bench.automaton, &p.x0_vector(), &input, horizon, &opts).map_err(run)?;
        (aug.base.clone(), Some(aug))
    } else {
        (hyfal_core::simulate(&bench.automaton, &p.x0_vector(), &input, horizon, &opts).map_err(run)?, None)
    };

    let dir = out_dir(a.out.as_deref());
    write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&traj)?)?;
    write_atomic(&dir.join("transitions.csv"), &transitions_csv(&traj, bench.automaton.state_dim)?)?;
    if let Some(aug) = &aug {
        write_atomic(&dir.join("sensitivity.csv"), &sensitivity_csv(aug)?)?;
    }
    println!("samples {} transitions {} -> {}", traj.len(), traj.transitions.len(), dir.display());
    if let Some(f) = formula {
        let rr = eval_robustness(&f, &traj).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("robustness {} t* {}", rr.r, rr.t_star);
    }
    Ok(())
}

fn load_config(a: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.merge_text(&text)?;
    }
    let flags: [(&str, &Option<String>); 15] = [
        ("model", &a.model),
        ("formula", &a.formula),
        ("driver", &a.driver),
        ("seeds", &a.seeds),
        ("runs", &a.runs),
        ("master_seed", &a.master_seed),
        ("jobs", &a.jobs),
        ("h", &a.h),
        ("k1", &a.k1),
        ("k2", &a.k2),
        ("p", &a.p),
        ("budget", &a.budget),
        ("r_threshold", &a.r_threshold),
        ("start_x0", &a.x0),
        ("start_theta", &a.theta),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    if let Some(angle) = a.angle {
        cfg.set("start_theta", &angle.to_string())?;
    }
    if let Some(out) = &a.out {
        cfg.out_dir = Some(out.clone());
    }
    if a.satisfy {
        cfg.gd.stop_on_falsification = false;
    }
    if a.unchecked {
        cfg.unchecked = true;
    }
    let v = &a.variants;
    cfg.options.corrected_dynamics |= v.corrected_dynamics;
    cfg.options.printed_glycemic_routing |= v.printed_routing;
    cfg.options.located_vehicle_sets |= v.located_sets;
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    Ok(cfg)
}

struct Setup {
    problem: Problem,
    /// Only descent from a given point needs one.
    start: Option<SearchPoint>,
    dir: PathBuf,
}

fn setup(cfg: &RunConfig, needs_start: bool) -> Result<Setup, CliError> {
    let name = cfg.model.as_deref().ok_or_else(|| CliError::Usage("no model given (--model)".into()))?;
    cfg.validate()?;
    let bench = model(name, &cfg.options)?;
    let formula = resolve_formula(&bench, &cfg.formula, bench.horizon)?;
    let start = needs_start
        .then(|| start_point(&bench, cfg.start_x0.clone(), cfg.start_theta.clone(), None, cfg.unchecked))
        .transpose()?;
    Ok(Setup {
        problem: bench.problem_with(formula, SimOptions::rk4(cfg.rk4_steps)),
        start,
        dir: out_dir(cfg.out_dir.as_deref()),
    })
}

fn summary_line(t: &RunTrace, secs: f64) -> String {
    let status = if t.falsified { "falsified" } else { "not" };
    format!("{status},{},{},{secs:.3}", t.best_r, t.sims)
}

pub fn falsify(a: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&a)?;
    if a.dump_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let s = setup(&cfg, cfg.driver == Driver::Gd)?;
    let seeds = cfg.effective_seeds();
    let runs: Vec<Option<u64>> = match cfg.driver {
        Driver::Gd => vec![None],
        _ => seeds.into_iter().map(Some).collect(),
    };
    let mut summary = String::from("seed,driver,status,best_r,sims_used,wallclock_s\n");
    for seed in runs {
        let clock = Instant::now();
        let sa = SaConfig { seed: seed.unwrap_or(0), ..cfg.sa.clone() };
        let trace = match cfg.driver {
            Driver::Gd => gradient_descent(&s.problem, s.start.as_ref().expect("gd has a start"), &cfg.gd),
            Driver::Sa => simulated_annealing(&s.problem, &sa),
            Driver::SaGd => sa_plus_gd(&s.problem, &sa, &cfg.gd),
        };
        let secs = clock.elapsed().as_secs_f64();
        let tag = seed.map_or("gd".to_string(), |k| format!("seed{k}"));
        write_atomic(&s.dir.join(format!("trace_{tag}.json")), trace.to_json().as_bytes())?;
        write_atomic(&s.dir.join(format!("robustness_{tag}.csv")), &trace_series_csv(&trace)?)?;
        let line = summary_line(&trace, secs);
        println!("{line}");
        summary.push_str(&format!("{},{},{line}\n", seed.map_or("-".into(), |k| k.to_string()), cfg.driver.name()));
    }
    write_atomic(&s.dir.join("summary.csv"), summary.as_bytes())?;
    Ok(())
}

pub fn experiment(a: RunArgs) -> Result<(), CliError> {
    let cfg = load_config(&a)?;
    if a.dump_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let s = setup(&cfg, false)?;
    let ecfg = ExperimentConfig { seeds: cfg.effective_seeds(), sa: cfg.sa.clone(), gd: cfg.gd.clone(), jobs: cfg.jobs };
    let clock = Instant::now();
    let summary = run_experiment(&s.problem, &ecfg);
    for (row, trace) in summary.rows.iter().zip(&summary.traces) {
        let arm = row.arm.replace('+', "");
        write_atomic(&s.dir.join("traces").join(format!("{arm}_run{}.json", row.run)), trace.to_json().as_bytes())?;
    }
    write_atomic(&s.dir.join("summary.csv"), &summary_csv(&summary)?)?;
    write_atomic(&s.dir.join("runs.csv"), &runs_csv(&summary)?)?;
    write_atomic(&s.dir.join("plot_best_so_far.csv"), &best_so_far_csv(&summary)?)?;
    let table = String::from_utf8(summary_csv(&summary)?).expect("csv is utf-8");
    print!("{table}");
    println!("{} runs per arm in {:.1}s; rows: {}", ecfg.seeds.len(), clock.elapsed().as_secs_f64(), TABLE_ROWS.len());
    Ok(())
}
