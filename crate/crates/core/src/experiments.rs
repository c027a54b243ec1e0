//! Verification harnesses: the invariant density of the chain, the law of
//! large numbers, convergence-rate studies and the Monte Carlo CLT study.

pub mod stats;

use crate::density::pipeline::{run_pipeline, PipelineConfig, ResidualMode};
use crate::density::GridSpec;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{DriftSpec, NoiseSpec, Trajectory};
use crate::rng::streams;
use crate::tuning::{check_a6, clt_admissible, m_n_at, proxy_grid, vanishing, RateSchedule};
use crate::validation::ValidationReport;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Discretized invariant density `h = int p(. - f(t)) h(t) dt` on a 1-d grid.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryDensity {
    pub lo: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_delta: f64,
    pub converged: bool,
}

impl StationaryDensity {
    pub fn node(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.node(k))
    }

    /// Trapezoid quadrature of `g h` over the grid.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        trapezoid(&self.values, self.step, |k| g(self.node(k)))
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let t = (x - self.lo) / self.step;
        if t < 0.0 || t > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let k = (t.floor() as usize).min(self.values.len() - 2);
        let w = t - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }
}

fn trapezoid(values: &[f64], step: f64, g: impl Fn(usize) -> f64) -> f64 {
    let last = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            w * v * g(k)
        })
        .sum::<f64>()
        * step
}

/// Transition matrix `T[j][k] = w_k p(x_j - f(x_k))` of the trapezoid rule.
struct Operator {
    matrix: Vec<f64>,
    len: usize,
    step: f64,
}

impl Operator {
    fn new(drift: &DriftSpec, noise: &NoiseSpec, lo: f64, step: f64, len: usize) -> Self {
        let fx: Vec<f64> = (0..len)
            .map(|k| drift.eval(&[lo + k as f64 * step]).expect("d = 1")[0])
            .collect();
        let mut matrix = vec![0.0; len * len];
        matrix.par_chunks_mut(len).enumerate().for_each(|(j, row)| {
            let xj = lo + j as f64 * step;
            for (k, t) in row.iter_mut().enumerate() {
                let w = if k == 0 || k + 1 == len { 0.5 } else { 1.0 };
                *t = w * step * noise.density(&[xj - fx[k]]);
            }
        });
        Self { matrix, len, step }
    }

    /// One sweep followed by renormalization to unit trapezoid mass.
    fn apply(&self, h: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .matrix
            .par_chunks(self.len)
            .map(|row| row.iter().zip(h).map(|(a, b)| a * b).sum())
            .collect();
        let mass = trapezoid(&out, self.step, |_| 1.0);
        out.iter_mut().for_each(|v| *v /= mass);
        out
    }
}

/// Fixed-point iteration for the invariant density of a 1-d chain. The grid
/// must be one-dimensional; iteration stops once the sup-norm change falls
/// below `tol`.
pub fn stationary_fixed_point(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    grid: &GridSpec,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryDensity> {
    if drift.dimension() != 1 || noise.dimension() != 1 || grid.dimension() != 1 {
        return Err(Error::Precondition("the fixed-point solver is one-dimensional".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::out_of_range("tol", tol, "> 0"));
    }
    if max_iter == 0 {
        return Err(Error::out_of_range("max_iter", 0.0, ">= 1"));
    }
    let (lo, step, len) = (grid.lo()[0], grid.step()[0], grid.len());
    let op = Operator::new(drift, noise, lo, step, len);
    let mut h: Vec<f64> = (0..len).map(|k| noise.density(&[lo + k as f64 * step])).collect();
    let mass = trapezoid(&h, step, |_| 1.0);
    h.iter_mut().for_each(|v| *v /= mass);
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = op.apply(&h);
        delta = next.iter().zip(&h).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        h = next;
        iterations += 1;
        if delta < tol {
            break;
        }
    }
    Ok(StationaryDensity {
        lo,
        step,
        values: h,
        iterations,
        final_delta: delta,
        converged: delta < tol,
    })
}

/// One more sweep of the discretized operator, for fixed-point audits.
pub fn stationary_sweep(drift: &DriftSpec, noise: &NoiseSpec, h: &StationaryDensity) -> Vec<f64> {
    Operator::new(drift, noise, h.lo, h.step, h.values.len()).apply(&h.values)
}

#[derive(Debug, Clone, Serialize)]
pub struct LlnReport {
    pub time_average: f64,
    pub space_average: f64,
    pub gap: f64,
    /// Block-jackknife standard error of the time average.
    pub std_error: f64,
}

impl LlnReport {
    pub fn within(&self, error_bars: f64) -> bool {
        self.gap.abs() <= error_bars * self.std_error
    }
}

/// Compares `(1/n) sum g(X_i)` with `int g h`. `growth_order` is the
/// declared `k` in `|g(x)| <= C (|x|^k + 1)`; it may not exceed the noise
/// moment order `m`.
pub fn lln_check(
    traj: &Trajectory,
    g: impl Fn(&[f64]) -> f64,
    growth_order: f64,
    moment_order: f64,
    h: &StationaryDensity,
) -> Result<LlnReport> {
    if growth_order > moment_order {
        return Err(Error::Precondition(format!(
            "growth order {growth_order} exceeds the noise moment order {moment_order}"
        )));
    }
    if traj.dimension() != 1 {
        return Err(Error::Precondition("lln_check compares against a 1-d invariant density".into()));
    }
    let values: Vec<f64> = (1..=traj.len()).map(|i| g(traj.state(i))).collect();
    let time_average = stats::mean(&values);
    let space_average = h.integrate(|x| g(&[x]));
    Ok(LlnReport {
        time_average,
        space_average,
        gap: time_average - space_average,
        std_error: stats::block_jackknife_se(&values, 100),
    })
}

/// Estimator settings shared by the studies.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub kernel_f: KernelSpec,
    pub kernel_p: KernelSpec,
    pub beta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Oracle residuals (true drift) instead of the fitted regression.
    pub oracle: bool,
    /// Use truncated residuals with the schedule as threshold.
    pub truncated: bool,
    /// Density evaluation window.
    pub window: Option<GridSpec>,
    /// Drop the smallest `n` from slope fits.
    pub drop_first: bool,
    /// Refuse schedules that fail the [`check_a6`] audit on [`proxy_grid`].
    pub require_a6: bool,
}

impl StudyConfig {
    pub fn new(kernel: KernelSpec, beta: f64, alpha: f64, seed: u64) -> Self {
        Self {
            kernel_f: kernel,
            kernel_p: kernel,
            beta,
            alpha,
            seed,
            oracle: false,
            truncated: false,
            window: None,
            drop_first: true,
            require_a6: true,
        }
    }

    fn pipeline(&self, n: usize, d: usize, checkpoints: Vec<usize>) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(n, self.seed, d, self.kernel_f, self.beta, self.alpha);
        cfg.density_kernel = self.kernel_p;
        cfg.checkpoints = checkpoints;
        if self.oracle {
            cfg.residuals = ResidualMode::Oracle;
        }
        cfg.grid = self.window.clone();
        cfg
    }
}

/// Default density window `[-6 s, 6 s]^d` with `s` the largest coordinate
/// standard deviation of the noise.
pub fn default_window(noise: &NoiseSpec, step: f64) -> Result<GridSpec> {
    let half = 6.0 * noise.scale();
    let half = (half / step).ceil() * step;
    GridSpec::cube(-half, half, step, noise.dimension())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<usize>,
    pub v_n: Vec<f64>,
    pub sup_err_f: Vec<f64>,
    pub sup_err_p: Vec<f64>,
    pub avg_pred_err: Vec<f64>,
    pub fitted_slope_f: f64,
    pub fitted_slope_p: f64,
    pub fitted_slope_pred: f64,
    /// `-beta tau` of the schedule.
    pub predicted_slope_pred: f64,
    pub dropped_first: bool,
}

fn check_geometric(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 4 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument(
            "n_grid must hold at least 4 strictly increasing positive values".into(),
        ));
    }
    let ratios: Vec<f64> = n_grid.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let r0 = ratios[0];
    if ratios.iter().any(|r| (r / r0 - 1.0).abs() > 0.05) {
        return Err(Error::InvalidArgument("n_grid must be geometric".into()));
    }
    Ok(())
}

fn fit(ns: &[usize], values: &[f64], drop_first: bool) -> f64 {
    let skip = usize::from(drop_first && ns.len() > 2);
    let pairs: Vec<(f64, f64)> = ns[skip..]
        .iter()
        .zip(&values[skip..])
        .filter(|(_, v)| **v > 0.0)
        .map(|(&n, &v)| (n as f64, v))
        .collect();
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    stats::loglog_slope(&x, &y)
}

/// One pipeline run with checkpoints at `n_grid`, recording the regression
/// error on the dilated balls, the density error on the window, and the
/// average prediction error, with fitted log-log slopes.
pub fn convergence_study(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    schedule: &RateSchedule,
    cfg: &StudyConfig,
    n_grid: &[usize],
) -> Result<ConvergenceReport> {
    check_geometric(n_grid)?;
    let d = drift.dimension();
    if cfg.require_a6 {
        let audit = check_a6(schedule, noise, cfg.beta, &proxy_grid())?;
        if !audit.passed() {
            return Err(Error::Precondition(audit.to_string()));
        }
    }
    let window = match &cfg.window {
        Some(w) => w.clone(),
        None => default_window(noise, if d == 1 { 0.01 } else { 0.1 })?,
    };
    let mut pc = cfg.pipeline(*n_grid.last().unwrap(), d, n_grid.to_vec());
    pc.grid = Some(window);
    let schedule = Arc::new(schedule.clone());
    if cfg.truncated {
        pc.truncation = Some(schedule.clone());
    }
    pc.ball = Some(schedule.clone());
    pc.regression_sup_error = !cfg.oracle && d <= 2;
    let report = run_pipeline(drift, noise, &pc)?.report;
    let sup_err_f = report.column(|r| r.sup_err_f);
    let sup_err_p = report.column(|r| r.sup_err_p);
    let avg_pred_err = report.column(|r| r.avg_pred_err);
    Ok(ConvergenceReport {
        n_values: n_grid.to_vec(),
        v_n: report.column(|r| r.v_n),
        fitted_slope_f: if sup_err_f.is_empty() { f64::NAN } else { fit(n_grid, &sup_err_f, cfg.drop_first) },
        fitted_slope_p: fit(n_grid, &sup_err_p, cfg.drop_first),
        fitted_slope_pred: fit(n_grid, &avg_pred_err, cfg.drop_first),
        predicted_slope_pred: -schedule.beta * schedule.tau_predicted,
        dropped_first: cfg.drop_first,
        sup_err_f,
        sup_err_p,
        avg_pred_err,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub y_points: Vec<Vec<f64>>,
    pub n: usize,
    pub replicates: usize,
    pub alpha: f64,
    /// `z_values[r][q] = sqrt(n^{1 - alpha d}) (p_n(y_q) - p(y_q))` of replicate `r`.
    pub z_values: Vec<Vec<f64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub p_true: Vec<f64>,
    /// `||K||_2^2 p(y) / (1 + alpha d)`.
    pub theoretical_variance: Vec<f64>,
    pub ks_distance: Vec<f64>,
    pub variance_ratio: Vec<f64>,
    pub correlation: Vec<Vec<f64>>,
    pub replicate_streams: Vec<u64>,
}

/// `Z_n(y)` for a density estimate.
pub fn z_statistic(p_hat: f64, p: f64, n: usize, alpha: f64, d: usize) -> f64 {
    (n as f64).powf(1.0 - alpha * d as f64).sqrt() * (p_hat - p)
}

#[derive(Debug, Clone)]
pub struct CltConfig {
    pub study: StudyConfig,
    pub n: usize,
    pub replicates: usize,
    pub y_points: Vec<Vec<f64>>,
}

/// `M` independent pipelines on streams `REPLICATE_BASE + r` of the base
/// seed, compared with the limiting normal law at each `y`.
pub fn clt_study(drift: &DriftSpec, noise: &NoiseSpec, schedule: &RateSchedule, cfg: &CltConfig) -> Result<CltReport> {
    let d = drift.dimension();
    let alpha = cfg.study.alpha;
    let adm = clt_admissible(schedule, alpha, d);
    if !adm.admissible {
        return Err(Error::Inadmissible(adm.reasons.join("; ")));
    }
    if cfg.replicates < 200 {
        return Err(Error::out_of_range("replicates", cfg.replicates as f64, ">= 200"));
    }
    if cfg.y_points.is_empty() || cfg.y_points.iter().any(|y| y.len() != d) {
        return Err(Error::InvalidArgument("y_points must be non-empty points of dimension d".into()));
    }
    let reach = 2.0 * cfg.study.kernel_p.support_radius() * (cfg.n as f64).powf(-alpha);
    for (a, ya) in cfg.y_points.iter().enumerate() {
        for yb in &cfg.y_points[a + 1..] {
            let dist = ya.iter().zip(yb).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            if !(dist > reach) {
                return Err(Error::Precondition(format!(
                    "y points {ya:?} and {yb:?} are closer than twice the kernel support at n ({reach})"
                )));
            }
        }
    }
    let streams_used: Vec<u64> = (0..cfg.replicates as u64).map(|r| streams::REPLICATE_BASE + r).collect();
    let p_true: Vec<f64> = cfg.y_points.iter().map(|y| noise.density(y)).collect();
    let p_hat: Vec<Vec<f64>> = streams_used
        .par_iter()
        .map(|&stream| -> Result<Vec<f64>> {
            let mut pc = cfg.study.pipeline(cfg.n, d, vec![cfg.n]);
            pc.grid = None;
            pc.diagnostic = false;
            pc.stream = stream;
            if cfg.study.truncated {
                pc.truncation = Some(Arc::new(schedule.clone()));
            }
            let out = run_pipeline(drift, noise, &pc)?;
            cfg.y_points.iter().map(|y| out.density.density_direct(y)).collect()
        })
        .collect::<Result<_>>()?;
    let z_values: Vec<Vec<f64>> = p_hat
        .iter()
        .map(|row| row.iter().zip(&p_true).map(|(ph, p)| z_statistic(*ph, *p, cfg.n, alpha, d)).collect())
        .collect();
    let q = cfg.y_points.len();
    let k2 = cfg.study.kernel_p.l2_norm_sq();
    let theoretical_variance: Vec<f64> = p_true.iter().map(|p| k2 * p / (1.0 + alpha * d as f64)).collect();
    let column = |j: usize| -> Vec<f64> { z_values.iter().map(|r| r[j]).collect() };
    let ks_distance = (0..q).map(|j| stats::ks_normal(&column(j), theoretical_variance[j].sqrt())).collect();
    let variance_ratio = (0..q).map(|j| stats::variance(&column(j)) / theoretical_variance[j]).collect();
    let correlation = (0..q)
        .map(|a| (0..q).map(|b| stats::correlation(&column(a), &column(b))).collect())
        .collect();
    Ok(CltReport {
        y_points: cfg.y_points.clone(),
        n: cfg.n,
        replicates: cfg.replicates,
        alpha,
        z_values,
        p_hat,
        p_true,
        theoretical_variance,
        ks_distance,
        variance_ratio,
        correlation,
        replicate_streams: streams_used,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionErrorReport {
    pub n_values: Vec<usize>,
    pub v_n: Vec<f64>,
    /// `(1/n) sum ||f_i(X_i) - f(X_i)|| 1{||X_i|| <= v_i}`
    pub inside: Vec<f64>,
    /// `(1/n) sum ||f_i(X_i) - f(X_i)|| 1{||X_i|| > v_i}`
    pub outside: Vec<f64>,
    pub total: Vec<f64>,
    /// Outside term identically zero or vanishing on the checkpoint grid.
    pub outside_vanishing: bool,
    pub m_n: Vec<f64>,
}

/// Diagnostic run splitting the average prediction error by whether the
/// predictor lies inside the dilated ball.
pub fn prediction_error_study(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    schedule: &RateSchedule,
    kernel: KernelSpec,
    beta: f64,
    n_grid: &[usize],
    seed: u64,
) -> Result<PredictionErrorReport> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument("n_grid must be strictly increasing and positive".into()));
    }
    let m_n: Vec<f64> = n_grid.iter().map(|&n| m_n_at(schedule, noise, n)).collect::<Result<_>>()?;
    if m_n.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Precondition("m_n must be nonincreasing along the schedule".into()));
    }
    let d = drift.dimension();
    let alpha = 0.5 / d as f64;
    let mut pc = PipelineConfig::new(*n_grid.last().unwrap(), seed, d, kernel, beta, alpha);
    pc.checkpoints = n_grid.to_vec();
    pc.ball = Some(Arc::new(schedule.clone()));
    let report = run_pipeline(drift, noise, &pc)?.report;
    let outside = report.column(|r| r.pred_err_outside);
    Ok(PredictionErrorReport {
        n_values: n_grid.to_vec(),
        v_n: report.column(|r| r.v_n),
        inside: report.column(|r| r.pred_err_inside),
        outside_vanishing: outside.iter().all(|&v| v == 0.0) || vanishing(&outside),
        outside,
        total: report.column(|r| r.avg_pred_err),
        m_n,
    })
}

/// Flags a prediction-error study whose outside-ball term does not vanish.
pub fn outside_term_audit(report: &PredictionErrorReport) -> ValidationReport {
    let mut v = ValidationReport::new("outside-ball prediction error");
    let last = report.outside.last().copied().unwrap_or(0.0);
    v.push(
        "outside_term_vanishing",
        report.outside_vanishing,
        last,
        format!("outside term across checkpoints: {:?}", report.outside),
    );
    v
}
