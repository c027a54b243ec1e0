//! The streaming simulate, fit, residual, density loop.
//!
//! At step `i` the residual `e_i = X_i - f_{i-1}(X_{i-1})` is formed from the
//! prediction made at the previous step, pushed into the density estimator,
//! and only then is the pair `(X_{i-1}, X_i)` handed to the regression. The
//! same evaluation `f_i(X_i)` serves as the next prediction and as the
//! diagnostic prediction-error term.

use super::{DensityEstimator, DensityMode, GridSpec, Threshold};
use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;
use crate::model::{DriftSpec, NoiseDraws, NoiseSpec, Simulator};
use crate::numeric::{dist2, norm2};
use crate::regression::RegressionEstimator;
use crate::rng;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone)]
pub enum ResidualMode {
    /// Residuals from the recursive regression estimate.
    Estimated {
        kernel: KernelSpec,
        beta: f64,
        /// Evaluate the regression by exhaustive scan instead of the index.
        brute_force: bool,
    },
    /// `e_i = X_i - f(X_{i-1})` with the true drift; no regression is fitted.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    pub x0: Vec<f64>,
    pub burn_in: usize,
    pub residuals: ResidualMode,
    pub density_kernel: KernelSpec,
    pub alpha: f64,
    pub grid: Option<GridSpec>,
    /// Truncation schedule; `None` for the plain estimator.
    pub truncation: Option<Arc<dyn Threshold>>,
    pub checkpoints: Vec<usize>,
    pub diagnostic: bool,
    /// Ball radii `v_n` splitting the prediction error into inside and
    /// outside terms and bounding the regression sup-error grid.
    pub ball: Option<Arc<dyn Threshold>>,
    /// Evaluate `sup_{||x|| <= v_n} ||f_n - f||` at checkpoints (needs `ball`).
    pub regression_sup_error: bool,
    pub record_timing: bool,
}

impl PipelineConfig {
    /// Plain estimator with estimated residuals, diagnostics on, no grid.
    pub fn new(n: usize, seed: u64, dimension: usize, kernel: KernelSpec, beta: f64, alpha: f64) -> Self {
        Self {
            n,
            seed,
            stream: rng::streams::SIMULATION,
            x0: vec![0.0; dimension],
            burn_in: 0,
            residuals: ResidualMode::Estimated {
                kernel,
                beta,
                brute_force: false,
            },
            density_kernel: kernel,
            alpha,
            grid: None,
            truncation: None,
            checkpoints: vec![n],
            diagnostic: true,
            ball: None,
            regression_sup_error: false,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckpointRow {
    pub n: usize,
    /// `max |p_n - p|` over the grid.
    pub sup_err_p: Option<f64>,
    /// `(1/n) sum_{i<=n} ||f_i(X_i) - f(X_i)||`.
    pub avg_pred_err: Option<f64>,
    /// Part of `avg_pred_err` with `||X_i|| <= v_i`.
    pub pred_err_inside: Option<f64>,
    /// Part of `avg_pred_err` with `||X_i|| > v_i`.
    pub pred_err_outside: Option<f64>,
    /// `(1/n) sum_{i<=n} ||e_i - eps_i||`.
    pub residual_gap: Option<f64>,
    pub v_n: Option<f64>,
    /// `sup_{||x||_inf <= v_n} ||f_n(x) - f(x)||`.
    pub sup_err_f: Option<f64>,
    pub runtime_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub n: usize,
    pub seed: u64,
    pub rows: Vec<CheckpointRow>,
    pub runtime_per_step: Option<f64>,
    pub window_lo: Option<Vec<f64>>,
    pub window_hi: Option<Vec<f64>>,
}

impl PipelineReport {
    /// Checkpoint CSV `n,sup_err_p,avg_pred_err,residual_gap,runtime_s`;
    /// absent values are empty cells.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# generator={}; seed={}", rng::GENERATOR, self.seed)?;
        writeln!(w, "n,sup_err_p,avg_pred_err,residual_gap,runtime_s")?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.n,
                cell(r.sup_err_p),
                cell(r.avg_pred_err),
                cell(r.residual_gap),
                cell(r.runtime_s)
            )?;
        }
        Ok(())
    }

    pub fn column(&self, pick: impl Fn(&CheckpointRow) -> Option<f64>) -> Vec<f64> {
        self.rows.iter().filter_map(pick).collect()
    }
}

/// Estimator state handed to a checkpoint observer.
pub struct CheckpointView<'a> {
    pub row: &'a CheckpointRow,
    pub regression: Option<&'a RegressionEstimator>,
    pub density: &'a DensityEstimator,
    pub state: &'a [f64],
}

pub struct PipelineOutput {
    pub regression: Option<RegressionEstimator>,
    pub density: DensityEstimator,
    pub report: PipelineReport,
}

pub fn run_pipeline(drift: &DriftSpec, noise: &NoiseSpec, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline_observed(drift, noise, cfg, |_| Ok(()))
}

pub fn run_pipeline_observed(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    cfg: &PipelineConfig,
    mut observer: impl FnMut(&CheckpointView) -> Result<()>,
) -> Result<PipelineOutput> {
    let d = drift.dimension();
    check_dim(d, noise.dimension())?;
    check_dim(d, cfg.x0.len())?;
    if cfg.n == 0 {
        return Err(Error::out_of_range("n", 0.0, ">= 1"));
    }
    if cfg.checkpoints.windows(2).any(|w| w[0] >= w[1])
        || cfg.checkpoints.first().is_some_and(|&c| c == 0)
        || cfg.checkpoints.last().is_some_and(|&c| c > cfg.n)
    {
        return Err(Error::InvalidArgument(format!(
            "checkpoints must be strictly increasing within [1, {}]",
            cfg.n
        )));
    }
    if cfg.regression_sup_error && cfg.ball.is_none() {
        return Err(Error::InvalidArgument("regression sup error needs a ball schedule".into()));
    }

    let mode = match &cfg.truncation {
        Some(v) => DensityMode::Truncated(v.clone()),
        None => DensityMode::Plain,
    };
    let mut density = DensityEstimator::new(cfg.density_kernel, cfg.alpha, d, cfg.grid.clone(), mode)?;
    let (mut regression, brute) = match &cfg.residuals {
        ResidualMode::Estimated {
            kernel,
            beta,
            brute_force,
        } => (Some(RegressionEstimator::new(*kernel, *beta, d)?), *brute_force),
        ResidualMode::Oracle => (None, false),
    };

    let source = NoiseDraws::new(noise, rng::stream(cfg.seed, cfg.stream));
    let mut sim = Simulator::new(drift, &cfg.x0, source)?;
    for _ in 0..cfg.burn_in {
        sim.advance()?;
    }

    let mut prev = sim.state().to_vec();
    // prediction of X_1: f_0 = 0, or the true drift for oracle residuals
    let mut pending = vec![0.0; d];
    if regression.is_none() {
        drift.eval_into(&prev, &mut pending);
    }
    let mut eps_hat = vec![0.0; d];
    let mut fhat = vec![0.0; d];
    let mut ftrue = vec![0.0; d];
    let mut gap = 0.0;
    let mut pred_in = 0.0;
    let mut pred_out = 0.0;
    let mut rows = Vec::with_capacity(cfg.checkpoints.len());
    let mut next_cp = cfg.checkpoints.iter().peekable();
    let start = Instant::now();

    for i in 1..=cfg.n {
        sim.advance().map_err(|e| match e {
            Error::NumericalOverflow { step } => Error::NumericalOverflow {
                step: step - cfg.burn_in,
            },
            other => other,
        })?;
        let x = sim.state();
        for j in 0..d {
            eps_hat[j] = x[j] - pending[j];
        }
        density.push_residual(i, &eps_hat)?;
        if cfg.diagnostic {
            gap += dist2(&eps_hat, sim.noise());
        }

        match regression.as_mut() {
            Some(reg) => {
                if i >= 2 {
                    reg.update(i - 1, &prev, x)?;
                }
                if brute {
                    reg.evaluate_brute_force_into(x, &mut fhat);
                } else {
                    reg.evaluate_into(x, &mut fhat);
                }
                if cfg.diagnostic {
                    drift.eval_into(x, &mut ftrue);
                    let err = dist2(&fhat, &ftrue);
                    let inside = cfg.ball.as_ref().is_none_or(|v| norm2(x) <= v.at(i));
                    if inside {
                        pred_in += err;
                    } else {
                        pred_out += err;
                    }
                }
                pending.copy_from_slice(&fhat);
                if let Some(v) = density.threshold(i) {
                    if norm2(x) > v {
                        pending.fill(0.0);
                    }
                }
            }
            None => drift.eval_into(x, &mut pending),
        }
        prev.copy_from_slice(x);

        if next_cp.peek() == Some(&&i) {
            next_cp.next();
            let nf = i as f64;
            let mut row = CheckpointRow {
                n: i,
                runtime_s: cfg.record_timing.then(|| start.elapsed().as_secs_f64()),
                ..Default::default()
            };
            if cfg.diagnostic {
                row.residual_gap = Some(gap / nf);
                if regression.is_some() {
                    row.avg_pred_err = Some((pred_in + pred_out) / nf);
                    if cfg.ball.is_some() {
                        row.pred_err_inside = Some(pred_in / nf);
                        row.pred_err_outside = Some(pred_out / nf);
                    }
                } else {
                    row.avg_pred_err = Some(0.0);
                }
                if density.grid().is_some() {
                    row.sup_err_p = Some(density.sup_error_on_grid(noise)?);
                }
            }
            if let Some(v) = &cfg.ball {
                let v_n = v.at(i);
                row.v_n = Some(v_n);
                if cfg.regression_sup_error {
                    if let Some(reg) = &regression {
                        // pairs 1..i-1 are stored, i.e. this is f_i
                        row.sup_err_f = Some(reg.sup_error_on_ball(drift, v_n, None, None)?.sup_error);
                    }
                }
            }
            observer(&CheckpointView {
                row: &row,
                regression: regression.as_ref(),
                density: &density,
                state: sim.state(),
            })?;
            rows.push(row);
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    Ok(PipelineOutput {
        report: PipelineReport {
            n: cfg.n,
            seed: cfg.seed,
            rows,
            runtime_per_step: cfg.record_timing.then(|| elapsed / cfg.n as f64),
            window_lo: density.grid().map(|g| g.lo().to_vec()),
            window_hi: density.grid().map(|g| g.hi()),
        },
        regression,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::ConstantThreshold;

    fn epa() -> KernelSpec {
        KernelSpec::epanechnikov(1).unwrap()
    }

    #[test]
    fn first_residual_is_first_state() {
        let drift = DriftSpec::tanh_affine(1.0, 0.0, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let cfg = PipelineConfig::new(1, 3, 1, epa(), 0.2, 0.35);
        let out = run_pipeline(&drift, &noise, &cfg).unwrap();
        assert_eq!(out.density.count(), 1);
        let traj = crate::model::simulate(&drift, &noise, 1, &[0.0], 3, false).unwrap();
        assert_eq!(out.density.residual(1), traj.state(1));
        assert_eq!(out.regression.unwrap().count(), 0);
    }

    #[test]
    fn residuals_follow_the_lagged_estimator() {
        let drift = DriftSpec::tanh_affine(1.0, 0.2, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let n = 400;
        let cfg = PipelineConfig::new(n, 5, 1, epa(), 0.2, 0.35);
        let out = run_pipeline(&drift, &noise, &cfg).unwrap();
        let traj = crate::model::simulate(&drift, &noise, n, &[0.0], 5, false).unwrap();
        // replay with an independent estimator built one pair at a time
        let mut reg = RegressionEstimator::new(epa(), 0.2, 1).unwrap();
        for i in 1..=n {
            let pred = if i == 1 { vec![0.0] } else { reg.evaluate(traj.state(i - 1)).unwrap() };
            assert_eq!(out.density.residual(i)[0], traj.state(i)[0] - pred[0], "step {i}");
            if i >= 2 {
                reg.update(i - 1, traj.state(i - 1), traj.state(i)).unwrap();
            }
        }
    }

    #[test]
    fn infinite_truncation_is_bit_identical_to_plain() {
        let drift = DriftSpec::tanh_affine(1.0, 0.0, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let plain = PipelineConfig::new(3000, 8, 1, epa(), 0.2, 0.35);
        let mut trunc = plain.clone();
        trunc.truncation = Some(Arc::new(ConstantThreshold(f64::INFINITY)));
        let a = run_pipeline(&drift, &noise, &plain).unwrap();
        let b = run_pipeline(&drift, &noise, &trunc).unwrap();
        assert_eq!(a.density.residuals(), b.density.residuals());
        trunc.truncation = Some(Arc::new(ConstantThreshold(1e9)));
        let c = run_pipeline(&drift, &noise, &trunc).unwrap();
        assert_eq!(a.density.residuals(), c.density.residuals());
    }

    #[test]
    fn zero_threshold_truncation_gives_raw_states() {
        let drift = DriftSpec::tanh_affine(1.0, 0.0, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let mut cfg = PipelineConfig::new(200, 8, 1, epa(), 0.2, 0.35);
        cfg.truncation = Some(Arc::new(ConstantThreshold(0.0)));
        let out = run_pipeline(&drift, &noise, &cfg).unwrap();
        let traj = crate::model::simulate(&drift, &noise, 200, &[0.0], 8, false).unwrap();
        for i in 1..=200 {
            assert_eq!(out.density.residual(i), traj.state(i));
        }
    }

    #[test]
    fn oracle_residuals_are_the_noise() {
        let drift = DriftSpec::linear_scalar(0.5, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let mut cfg = PipelineConfig::new(500, 2, 1, epa(), 0.2, 0.35);
        cfg.residuals = ResidualMode::Oracle;
        let out = run_pipeline(&drift, &noise, &cfg).unwrap();
        assert!(out.regression.is_none());
        assert!(out.report.rows[0].residual_gap.unwrap() < 1e-15);
    }

    #[test]
    fn brute_force_mode_reproduces_indexed_run() {
        let drift = DriftSpec::tanh_affine(1.0, 0.0, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let cfg = PipelineConfig::new(2000, 4, 1, epa(), 0.2, 0.35);
        let mut brute = cfg.clone();
        brute.residuals = ResidualMode::Estimated {
            kernel: epa(),
            beta: 0.2,
            brute_force: true,
        };
        let a = run_pipeline(&drift, &noise, &cfg).unwrap();
        let b = run_pipeline(&drift, &noise, &brute).unwrap();
        for (x, y) in a.density.residuals().iter().zip(b.density.residuals()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn checkpoint_validation_and_csv() {
        let drift = DriftSpec::zero(1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let mut cfg = PipelineConfig::new(100, 1, 1, epa(), 0.2, 0.35);
        cfg.checkpoints = vec![50, 20];
        assert!(run_pipeline(&drift, &noise, &cfg).is_err());
        cfg.checkpoints = vec![20, 200];
        assert!(run_pipeline(&drift, &noise, &cfg).is_err());
        cfg.checkpoints = vec![20, 50, 100];
        cfg.grid = Some(GridSpec::cube(-6.0, 6.0, 0.05, 1).unwrap());
        let out = run_pipeline(&drift, &noise, &cfg).unwrap();
        let mut buf = Vec::new();
        out.report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "n,sup_err_p,avg_pred_err,residual_gap,runtime_s");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("100,"));
        assert!(lines[4].ends_with(','));
    }
}
