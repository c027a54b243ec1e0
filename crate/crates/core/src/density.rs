//! Recursive kernel density estimation of the innovation density from
//! residuals, `p_n(y) = (1/n) sum_i i^{ad} K(i^a (e_i - y))`.
//!
//! An optional fixed evaluation grid is updated in place on every push, so
//! checkpoint evaluation never rescans the residuals.

pub mod pipeline;

use crate::error::{check_dim, Error, Result};
use crate::index::SupportIndex;
use crate::kernels::KernelSpec;
use crate::model::NoiseSpec;
use crate::numeric::CompensatedSum;
use crate::rng;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

/// An evaluable positive sequence `v_1, v_2, ...`.
pub trait Threshold: Send + Sync + fmt::Debug {
    fn at(&self, n: usize) -> f64;
}

/// Constant sequence, e.g. `+inf` to disable truncation.
#[derive(Debug, Clone, Copy)]
pub struct ConstantThreshold(pub f64);

impl Threshold for ConstantThreshold {
    fn at(&self, _n: usize) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum DensityMode {
    Plain,
    /// Residuals drop the drift prediction whenever `||X_{i-1}|| > v_{i-1}`.
    Truncated(Arc<dyn Threshold>),
}

/// Axis-aligned evaluation grid: nodes `lo_j + k step_j` for
/// `k = 0..=round((hi_j - lo_j) / step_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    lo: Vec<f64>,
    step: Vec<f64>,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, step: Vec<f64>) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || step.len() != d {
            return Err(Error::InvalidArgument("grid needs lo, hi and step for every axis".into()));
        }
        let mut counts = Vec::with_capacity(d);
        for j in 0..d {
            if !(lo[j].is_finite() && hi[j].is_finite() && hi[j] > lo[j]) {
                return Err(Error::InvalidArgument(format!("grid axis {j}: need finite lo < hi")));
            }
            if !(step[j] > 0.0) {
                return Err(Error::InvalidArgument(format!("grid axis {j}: step must be positive")));
            }
            let k = ((hi[j] - lo[j]) / step[j]).round();
            if ((hi[j] - lo[j]) / step[j] - k).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {j}: (hi - lo) / step must be an integer"
                )));
            }
            counts.push(k as usize + 1);
        }
        let total: u128 = counts.iter().map(|&c| c as u128).product();
        if total > 50_000_000 {
            return Err(Error::ResourceLimit {
                nodes: total,
                limit: 50_000_000,
            });
        }
        Ok(Self { lo, step, counts })
    }

    /// Same window `[lo, hi]` and step on every axis.
    pub fn cube(lo: f64, hi: f64, step: f64, dimension: usize) -> Result<Self> {
        Self::new(vec![lo; dimension], vec![hi; dimension], vec![step; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lo.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        (0..self.dimension()).map(|j| self.coord(j, self.counts[j] - 1)).collect()
    }

    pub fn step(&self) -> &[f64] {
        &self.step
    }

    #[inline]
    fn coord(&self, axis: usize, k: usize) -> f64 {
        self.lo[axis] + k as f64 * self.step[axis]
    }

    /// Coordinates of node `flat` (first axis varies fastest).
    pub fn node_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.coord(j, rem % self.counts[j]);
            rem /= self.counts[j];
        }
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        self.node_into(flat, &mut out);
        out
    }

    /// Flat index of `y` when it is a grid node up to rounding.
    pub fn locate(&self, y: &[f64]) -> Option<usize> {
        let mut flat = 0;
        let mut stride = 1;
        for j in 0..self.dimension() {
            let t = (y[j] - self.lo[j]) / self.step[j];
            let k = t.round();
            if (t - k).abs() > 1e-9 || k < 0.0 || k as usize >= self.counts[j] {
                return None;
            }
            flat += k as usize * stride;
            stride *= self.counts[j];
        }
        Some(flat)
    }

    /// Product-rule trapezoid quadrature of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let d = self.dimension();
        let mut total = CompensatedSum::new();
        for (flat, v) in values.iter().enumerate() {
            let mut w = 1.0;
            let mut rem = flat;
            for j in 0..d {
                let k = rem % self.counts[j];
                rem /= self.counts[j];
                if k == 0 || k + 1 == self.counts[j] {
                    w *= 0.5;
                }
                w *= self.step[j];
            }
            total.add(w * v);
        }
        total.value()
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    grid: GridSpec,
    sums: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DensityEstimator {
    kernel: KernelSpec,
    alpha: f64,
    dimension: usize,
    mode: DensityMode,
    residuals: Vec<f64>,
    weights: Vec<f64>,
    scales: Vec<f64>,
    accumulator: Option<Accumulator>,
    index: SupportIndex,
}

impl DensityEstimator {
    pub fn new(
        kernel: KernelSpec,
        alpha: f64,
        dimension: usize,
        grid: Option<GridSpec>,
        mode: DensityMode,
    ) -> Result<Self> {
        check_dim(dimension, kernel.dimension())?;
        let limit = 1.0 / dimension as f64;
        if !(alpha > 0.0 && alpha < limit) {
            return Err(Error::out_of_range("alpha", alpha, format!("in (0, {limit})")));
        }
        let accumulator = match grid {
            Some(grid) => {
                check_dim(dimension, grid.dimension())?;
                let sums = vec![0.0; grid.len()];
                Some(Accumulator { grid, sums })
            }
            None => None,
        };
        Ok(Self {
            kernel,
            alpha,
            dimension,
            mode,
            residuals: Vec::new(),
            weights: Vec::new(),
            scales: Vec::new(),
            accumulator,
            index: SupportIndex::new(dimension, kernel.support_radius()),
        })
    }

    pub fn plain(kernel: KernelSpec, alpha: f64, grid: Option<GridSpec>) -> Result<Self> {
        Self::new(kernel, alpha, kernel.dimension(), grid, DensityMode::Plain)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mode(&self) -> &DensityMode {
        &self.mode
    }

    /// `v_n` of the truncation schedule, `None` in plain mode.
    pub fn threshold(&self, n: usize) -> Option<f64> {
        match &self.mode {
            DensityMode::Plain => None,
            DensityMode::Truncated(v) => Some(v.at(n)),
        }
    }

    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.accumulator.as_ref().map(|a| &a.grid)
    }

    /// Residual `e_i`, 1-based.
    pub fn residual(&self, i: usize) -> &[f64] {
        &self.residuals[(i - 1) * self.dimension..i * self.dimension]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// Adds `e_i`; `i` must be `count + 1`.
    pub fn push_residual(&mut self, i: usize, eps_hat: &[f64]) -> Result<()> {
        let expected = self.count() + 1;
        if i != expected {
            return Err(Error::OutOfOrder { expected, got: i });
        }
        check_dim(self.dimension, eps_hat.len())?;
        if eps_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow { step: i });
        }
        if i > u32::MAX as usize {
            return Err(Error::ResourceLimit {
                nodes: i as u128,
                limit: u32::MAX as u128,
            });
        }
        let fi = i as f64;
        let scale = fi.powf(self.alpha);
        let weight = fi.powf(self.alpha * self.dimension as f64);
        let radius = self.kernel.support_radius() / scale;
        self.residuals.extend_from_slice(eps_hat);
        self.weights.push(weight);
        self.scales.push(scale);
        self.index.insert((i - 1) as u32, eps_hat, radius);
        if let Some(acc) = self.accumulator.as_mut() {
            add_bump(acc, &self.kernel, eps_hat, scale, weight, radius);
        }
        Ok(())
    }

    /// `p_n(y)`: read from the accumulator at grid nodes, otherwise summed
    /// over the residuals covering `y`.
    pub fn density_at(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dimension, y.len())?;
        if self.count() == 0 {
            return Err(Error::EmptyState);
        }
        if let Some(acc) = &self.accumulator {
            if let Some(flat) = acc.grid.locate(y) {
                return Ok(acc.sums[flat] / self.count() as f64);
            }
        }
        self.density_direct(y)
    }

    /// `p_n(y)` from the stored residuals, bypassing the accumulator.
    pub fn density_direct(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dimension, y.len())?;
        if self.count() == 0 {
            return Err(Error::EmptyState);
        }
        let d = self.dimension;
        let mut s = CompensatedSum::new();
        self.index.for_each_candidate(y, |id| {
            let k = id as usize;
            let kv = self.kernel.value_scaled(&self.residuals[k * d..(k + 1) * d], y, self.scales[k]);
            if kv > 0.0 {
                s.add(self.weights[k] * kv);
            }
        });
        Ok(s.value() / self.count() as f64)
    }

    /// Accumulated sums `n p_n(y)` at every grid node.
    pub fn grid_sums(&self) -> Option<&[f64]> {
        self.accumulator.as_ref().map(|a| a.sums.as_slice())
    }

    /// `p_n` at every grid node.
    pub fn grid_values(&self) -> Option<Vec<f64>> {
        let n = self.count().max(1) as f64;
        self.grid_sums().map(|s| s.iter().map(|v| v / n).collect())
    }

    /// `max |p_n - p|` over the grid nodes.
    pub fn sup_error_on_grid(&self, noise: &NoiseSpec) -> Result<f64> {
        check_dim(self.dimension, noise.dimension())?;
        let acc = self
            .accumulator
            .as_ref()
            .ok_or_else(|| Error::Precondition("no evaluation grid configured".into()))?;
        if self.count() == 0 {
            return Err(Error::EmptyState);
        }
        let n = self.count() as f64;
        let mut y = vec![0.0; self.dimension];
        let mut sup: f64 = 0.0;
        for (flat, s) in acc.sums.iter().enumerate() {
            acc.grid.node_into(flat, &mut y);
            sup = sup.max((s / n - noise.density(&y)).abs());
        }
        Ok(sup)
    }

    /// Density snapshot `y_1..y_d,p_hat[,p_true]` over the grid.
    pub fn write_csv<W: Write>(&self, mut w: W, seed: u64, truth: Option<&NoiseSpec>) -> Result<()> {
        let acc = self
            .accumulator
            .as_ref()
            .ok_or_else(|| Error::Precondition("no evaluation grid configured".into()))?;
        let d = self.dimension;
        writeln!(w, "# generator={}; seed={seed}", rng::GENERATOR)?;
        let mut header: Vec<String> = (1..=d).map(|j| format!("y_{j}")).collect();
        header.push("p_hat".into());
        if truth.is_some() {
            header.push("p_true".into());
        }
        writeln!(w, "{}", header.join(","))?;
        let n = self.count().max(1) as f64;
        let mut y = vec![0.0; d];
        for (flat, s) in acc.sums.iter().enumerate() {
            acc.grid.node_into(flat, &mut y);
            for v in &y {
                write!(w, "{v},")?;
            }
            write!(w, "{}", s / n)?;
            if let Some(p) = truth {
                write!(w, ",{}", p.density(&y))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Adds `weight K(scale (e - y))` to every node `y` within the bump's support.
fn add_bump(acc: &mut Accumulator, kernel: &KernelSpec, e: &[f64], scale: f64, weight: f64, radius: f64) {
    let grid = &acc.grid;
    let d = grid.dimension();
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    for j in 0..d {
        let a = ((e[j] - radius - grid.lo[j]) / grid.step[j]).ceil();
        let b = ((e[j] + radius - grid.lo[j]) / grid.step[j]).floor();
        let last = (grid.counts[j] - 1) as f64;
        if b < 0.0 || a > last {
            return;
        }
        lo[j] = a.max(0.0) as usize;
        hi[j] = b.min(last) as usize;
    }
    let mut cur = lo.clone();
    let mut y = vec![0.0; d];
    loop {
        let mut flat = 0;
        let mut stride = 1;
        for j in 0..d {
            y[j] = grid.coord(j, cur[j]);
            flat += cur[j] * stride;
            stride *= grid.counts[j];
        }
        let k = kernel.value_scaled(e, &y, scale);
        if k > 0.0 {
            acc.sums[flat] += weight * k;
        }
        let mut j = 0;
        while j < d {
            if cur[j] < hi[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = lo[j];
            j += 1;
        }
        if j == d {
            break;
        }
    }
}
