//! One function per subcommand. Each computes everything in memory and
//! returns the artifacts; nothing touches the disk until the run succeeded.

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::output::{self, Artifacts};
use crate::Command;
use innokde::density::pipeline::{run_pipeline, PipelineConfig, ResidualMode};
use innokde::experiments::{clt_study, convergence_study, stationary_fixed_point, CltConfig, StudyConfig};
use innokde::model::simulate_stream;
use innokde::rng::{streams, GENERATOR};
use innokde::tuning::{clt_admissible, truncated_schedule, RateSchedule, TailInfo};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

/// Result of a subcommand before it is committed to disk.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub seeds: Value,
    pub derived: Value,
    pub summary: String,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate => simulate(cfg),
        Command::Fit => fit(cfg),
        Command::Rates => rates(cfg),
        Command::Convergence => convergence(cfg),
        Command::Clt => clt(cfg),
        Command::Stationary => stationary(cfg),
    }
}

fn core(key: &str) -> impl Fn(innokde::Error) -> CliError + '_ {
    move |source| CliError::Core {
        key: key.to_string(),
        source,
    }
}

fn schedule_json(cfg: &RunConfig) -> Value {
    json!({
        "schedule": cfg.schedule,
        "beta": cfg.estimators.beta,
        "alpha": cfg.estimators.alpha,
    })
}

fn single_stream(cfg: &RunConfig) -> Value {
    json!({ "io.seed": cfg.seed, "streams": { "simulation": streams::SIMULATION } })
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model();
    let n = cfg.experiment.n;
    let traj = simulate_stream(&m.drift, &m.noise, n, &m.x0, cfg.seed, streams::SIMULATION, true, m.burn_in)
        .map_err(core("model.drift"))?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    let mut artifacts = Artifacts::default();
    artifacts.add("trajectory.csv", csv);
    Ok(Outcome {
        artifacts,
        seeds: single_stream(cfg),
        derived: Value::Null,
        summary: format!("simulated {n} steps of a {}-dimensional {} chain", cfg.d, m.drift.name()),
    })
}

fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    let m = cfg.model();
    let e = &cfg.estimators;
    let mut pc = PipelineConfig::new(cfg.experiment.n, cfg.seed, cfg.d, e.kernel_f, e.beta, e.alpha);
    pc.density_kernel = e.kernel_p;
    pc.x0 = m.x0.clone();
    pc.burn_in = m.burn_in;
    pc.grid = e.grid.clone();
    pc.checkpoints = cfg.experiment.checkpoints.clone();
    let schedule = Arc::new(cfg.schedule.clone());
    match e.mode {
        Mode::Oracle => pc.residuals = ResidualMode::Oracle,
        Mode::Truncated => pc.truncation = Some(schedule.clone()),
        Mode::Plain => {}
    }
    pc.ball = Some(schedule);
    pc.record_timing = cfg.record_timing;
    pc
}

fn fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model();
    let out = run_pipeline(&m.drift, &m.noise, &pipeline_config(cfg)).map_err(core("estimators"))?;
    let mut artifacts = Artifacts::default();
    let mut csv = Vec::new();
    out.report.write_csv(&mut csv).expect("writing to memory");
    artifacts.add("checkpoints.csv", csv);
    let mut csv = Vec::new();
    out.density
        .write_csv(&mut csv, cfg.seed, Some(&m.noise))
        .map_err(core("estimators.grid"))?;
    artifacts.add("density.csv", csv);
    artifacts.add_json("fit.json", &out.report);
    let last = out.report.rows.last();
    let mut summary = format!("fitted n = {} ({} residuals)", cfg.experiment.n, cfg.estimators.mode.name());
    if let Some(v) = last.and_then(|r| r.sup_err_p) {
        let _ = write!(summary, "; sup |p_n - p| = {v:.6}");
    }
    if let Some(v) = last.and_then(|r| r.avg_pred_err) {
        let _ = write!(summary, "; average prediction error = {v:.6}");
    }
    Ok(Outcome {
        artifacts,
        seeds: single_stream(cfg),
        derived: schedule_json(cfg),
        summary,
    })
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out.push('\n');
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

fn rates(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = &cfg.schedule;
    let mut schedules: Vec<RateSchedule> = vec![s.clone()];
    if let (TailInfo::Polynomial { delta, m }, false) = (s.tail, s.truncated) {
        // the truncated variant shares beta; its interval always contains it
        schedules.push(truncated_schedule(delta, m, cfg.d, Some(s.beta)).map_err(core("schedule.tail"))?);
    }
    let header = RateSchedule::TABLE_HEADER;
    let rows: Vec<Vec<String>> = schedules.iter().map(RateSchedule::table_row).collect();
    let mut csv = Vec::new();
    writeln!(csv, "# generator={GENERATOR}; seed={}", cfg.seed).unwrap();
    writeln!(csv, "{}", header.join(",")).unwrap();
    for row in &rows {
        writeln!(csv, "{}", row.join(",")).unwrap();
    }
    let (lo, hi) = s.beta_interval;
    let mut summary = format!(
        "feasible: beta = {} in ({lo}, {hi}), tail {}\n",
        s.beta,
        s.label()
    );
    summary.push_str(&aligned(&header, &rows));
    let mut artifacts = Artifacts::default();
    artifacts.add("rates.csv", csv);
    Ok(Outcome {
        artifacts,
        seeds: json!({ "io.seed": cfg.seed, "streams": {} }),
        derived: json!({ "schedules": schedules }),
        summary,
    })
}

fn study_config(cfg: &RunConfig) -> StudyConfig {
    let e = &cfg.estimators;
    let mut study = StudyConfig::new(e.kernel_f, e.beta, e.alpha, cfg.seed);
    study.kernel_p = e.kernel_p;
    study.oracle = e.mode == Mode::Oracle;
    study.truncated = e.mode == Mode::Truncated;
    study.window = e.grid.clone();
    study
}

fn convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model();
    let n_grid = &cfg.experiment.n_grid;
    let r = convergence_study(&m.drift, &m.noise, &cfg.schedule, &study_config(cfg), n_grid)
        .map_err(core("experiment.n_grid"))?;
    let mut csv = Vec::new();
    writeln!(csv, "# generator={GENERATOR}; seed={}", cfg.seed).unwrap();
    writeln!(csv, "n,v_n,sup_err_f,sup_err_p,avg_pred_err").unwrap();
    let cell = |v: &[f64], k: usize| v.get(k).map(|x| x.to_string()).unwrap_or_default();
    for (k, n) in r.n_values.iter().enumerate() {
        writeln!(
            csv,
            "{n},{},{},{},{}",
            cell(&r.v_n, k),
            cell(&r.sup_err_f, k),
            cell(&r.sup_err_p, k),
            cell(&r.avg_pred_err, k)
        )
        .unwrap();
    }
    let summary = format!(
        "slopes: sup_err_p {:.4}, avg_pred_err {:.4} (bound -beta tau = {:.4}), sup_err_f {:.4}",
        r.fitted_slope_p, r.fitted_slope_pred, r.predicted_slope_pred, r.fitted_slope_f
    );
    let mut artifacts = Artifacts::default();
    artifacts.add("convergence.csv", csv);
    artifacts.add_json("convergence.json", &r);
    Ok(Outcome {
        artifacts,
        seeds: single_stream(cfg),
        derived: schedule_json(cfg),
        summary,
    })
}

fn clt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model();
    let adm = clt_admissible(&cfg.schedule, cfg.estimators.alpha, cfg.d);
    if !adm.admissible {
        return Err(CliError::Validation {
            key: "estimators.alpha".into(),
            message: format!(
                "= {} is inadmissible for the CLT: {}",
                cfg.estimators.alpha,
                adm.reasons.join("; ")
            ),
        });
    }
    let replicates = cfg.experiment.replicates;
    if replicates < 200 {
        return Err(CliError::Validation {
            key: "experiment.M".into(),
            message: format!("= {replicates} violates M >= 200"),
        });
    }
    let study = CltConfig {
        study: study_config(cfg),
        n: cfg.experiment.n,
        replicates,
        y_points: cfg.experiment.y_points.clone(),
    };
    let r = clt_study(&m.drift, &m.noise, &cfg.schedule, &study).map_err(core("experiment.y_points"))?;
    let q = r.y_points.len();
    let mut csv = Vec::new();
    writeln!(csv, "# generator={GENERATOR}; seed={}", cfg.seed).unwrap();
    let mut header = vec!["replicate".to_string(), "stream".to_string()];
    header.extend((1..=q).map(|k| format!("p_hat_{k}")));
    header.extend((1..=q).map(|k| format!("z_{k}")));
    writeln!(csv, "{}", header.join(",")).unwrap();
    for (k, (p, z)) in r.p_hat.iter().zip(&r.z_values).enumerate() {
        let cells: Vec<String> = p.iter().chain(z).map(f64::to_string).collect();
        writeln!(csv, "{k},{},{}", r.replicate_streams[k], cells.join(",")).unwrap();
    }
    let mut table = Vec::new();
    writeln!(table, "# generator={GENERATOR}; seed={}", cfg.seed).unwrap();
    let coords: Vec<String> = (1..=cfg.d).map(|j| format!("y_{j}")).collect();
    writeln!(table, "{},p_true,theoretical_variance,ks_distance,variance_ratio", coords.join(",")).unwrap();
    let mut summary = format!("CLT with n = {}, M = {replicates}, alpha = {}", r.n, r.alpha);
    for k in 0..q {
        let y: Vec<String> = r.y_points[k].iter().map(f64::to_string).collect();
        writeln!(
            table,
            "{},{},{},{},{}",
            y.join(","),
            r.p_true[k],
            r.theoretical_variance[k],
            r.ks_distance[k],
            r.variance_ratio[k]
        )
        .unwrap();
        let _ = write!(
            summary,
            "\ny = [{}]: KS {:.4}, variance ratio {:.4}",
            y.join(", "),
            r.ks_distance[k],
            r.variance_ratio[k]
        );
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("clt.csv", csv);
    artifacts.add("clt_summary.csv", table);
    artifacts.add_json("clt.json", &r);
    Ok(Outcome {
        artifacts,
        seeds: json!({
            "io.seed": cfg.seed,
            "streams": { "replicate_first": streams::REPLICATE_BASE, "replicate_last": streams::REPLICATE_BASE + replicates as u64 - 1 },
        }),
        derived: json!({ "schedule": cfg.schedule, "admissibility": adm }),
        summary,
    })
}

fn stationary(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.model();
    if cfg.d != 1 {
        return Err(CliError::Validation {
            key: "model.d".into(),
            message: format!("= {} violates d = 1 for the fixed-point solver", cfg.d),
        });
    }
    let grid = cfg.estimators.grid.as_ref().expect("window resolved with the model");
    let (tol, max_iter) = (cfg.experiment.tol, cfg.experiment.max_iter);
    let h = stationary_fixed_point(&m.drift, &m.noise, grid, tol, max_iter).map_err(core("estimators.grid"))?;
    if !h.converged {
        return Err(CliError::Numerical(format!(
            "fixed point not reached after {} iterations (last change {:e} > experiment.tol = {tol:e})",
            h.iterations, h.final_delta
        )));
    }
    let mut csv = Vec::new();
    writeln!(csv, "# generator={GENERATOR}; seed={}", cfg.seed).unwrap();
    writeln!(csv, "x,h").unwrap();
    for (x, v) in h.nodes().zip(&h.values) {
        writeln!(csv, "{x},{v}").unwrap();
    }
    let summary = format!(
        "invariant density on {} nodes after {} iterations (last change {:e})",
        h.values.len(),
        h.iterations,
        h.final_delta
    );
    let mut artifacts = Artifacts::default();
    artifacts.add("stationary.csv", csv);
    artifacts.add_json(
        "stationary.json",
        &json!({
            "iterations": h.iterations,
            "final_delta": h.final_delta,
            "converged": h.converged,
            "mass": h.integrate(|_| 1.0),
        }),
    );
    Ok(Outcome {
        artifacts,
        seeds: json!({ "io.seed": cfg.seed, "streams": {} }),
        derived: Value::Null,
        summary,
    })
}

/// Runs a subcommand and writes its artifacts plus the manifest.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<(String, Vec<String>), CliError> {
    let outcome = run(command, cfg)?;
    let digests = outcome.artifacts.digests();
    let manifest = output::manifest(command.name(), cfg, outcome.seeds, outcome.derived, digests);
    let written = outcome.artifacts.commit(&cfg.out_dir, manifest)?;
    Ok((outcome.summary, written))
}
