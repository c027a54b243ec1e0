//! Rate schedules for the dilated balls `v_n`, the density floor `m_n`, and
//! the resulting admissible exponents.
//!
//! Three tail regimes are covered: polynomial decay `C ||x||^-delta` with
//! `v_n = A n^eta`, exponential decay `C exp(-delta ||x||)` with
//! `v_n = eta log n`, and Gaussian noise with `v_n = (eta log n)^{1/2}`.

use crate::density::Threshold;
use crate::error::{Error, Result};
use crate::model::{DriftSpec, MomentOrder, NoiseDraws, NoiseSpec, Simulator, TailClass};
use crate::numeric::norm2;
use crate::rng;
use crate::validation::ValidationReport;
use rand::Rng;
use serde::Serialize;

/// Tail regime and the moment information the schedule is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "tail")]
pub enum TailInfo {
    /// Density decays like `||x||^-delta`, finite moment of order `m`.
    Polynomial { delta: f64, m: f64 },
    /// Density decays like `exp(-delta ||x||)`, finite exponential moment of
    /// order `m < delta`; `a < m` is the working exponent.
    Exponential { delta: f64, m: f64, a: f64 },
    /// Gaussian noise; `c` in `(0, 1)` trades constants against rate.
    Gaussian { lambda_min: f64, c: f64, r_f: f64 },
}

impl TailInfo {
    /// Reads the tail regime off a noise family. `r_f` is the drift growth
    /// constant, `c` the Gaussian trade-off (default 0.9) and `a_fraction`
    /// the exponential working exponent as a fraction of `m` (default 0.9).
    pub fn from_noise(noise: &NoiseSpec, r_f: f64, c: Option<f64>, a_fraction: Option<f64>) -> Result<Self> {
        Ok(match (noise.tail_class(), noise.moment_order()) {
            (TailClass::Polynomial { delta }, MomentOrder::Polynomial(m)) => TailInfo::Polynomial { delta, m },
            (TailClass::Exponential { delta }, MomentOrder::Exponential(m)) => TailInfo::Exponential {
                delta,
                m,
                a: a_fraction.unwrap_or(0.9) * m,
            },
            (TailClass::Gaussian, _) => TailInfo::Gaussian {
                lambda_min: noise.lambda_min(),
                c: c.unwrap_or(0.9),
                r_f,
            },
            (tail, moment) => {
                return Err(Error::UnsupportedNoise(format!(
                    "tail {tail:?} with moment {moment:?} has no schedule"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VForm {
    /// `v_n = A n^eta`
    Power,
    /// `v_n = eta log n`
    Log,
    /// `v_n = (eta log n)^{1/2}`
    SqrtLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSchedule {
    pub tail: TailInfo,
    pub dimension: usize,
    pub beta: f64,
    pub eta: f64,
    /// Amplitude `A` of the power form.
    pub amplitude: f64,
    pub v_form: VForm,
    /// Rate exponent: the average prediction error is `O(n^{-beta tau})`.
    pub tau_predicted: f64,
    /// Radius offset `R` in `m_n = inf { p(z) : ||z|| <= v_n + R }`.
    pub r: f64,
    /// Exponent `nu` with `v_n = O(n^nu)`.
    pub nu: f64,
    /// Open interval of `alpha` values compatible with the CLT.
    pub alpha_range_clt: (f64, f64),
    /// Open interval of admissible `beta`.
    pub beta_interval: (f64, f64),
    /// Residual truncation schedule rather than the plain estimator's.
    pub truncated: bool,
    /// Free exponents of the convergence bounds, recorded for reference.
    pub lambda_range: (f64, f64),
    pub s_range: (f64, f64),
}

fn beta_cap(d: usize) -> f64 {
    1.0 / (2.0 * (d as f64 + 1.0))
}

/// `(1 + alpha d)/2 < gamma < 1`, the free exponent of the density bound.
pub fn gamma_range(alpha: f64, d: usize) -> (f64, f64) {
    ((1.0 + alpha * d as f64) / 2.0, 1.0)
}

/// Lower end `max((1 - 2 beta tau)/d, 1/(d+2))` of the CLT bandwidth range.
pub fn clt_alpha_lower(beta: f64, tau: f64, d: usize) -> f64 {
    let df = d as f64;
    ((1.0 - 2.0 * beta * tau) / df).max(1.0 / (df + 2.0))
}

/// Open `beta` interval for a tail regime: `(delta/m^2, 1/(2(d+1)))` in the
/// polynomial case, `(0, 1/(2(d+1)))` otherwise.
pub fn beta_interval(tail: &TailInfo, d: usize) -> (f64, f64) {
    match *tail {
        TailInfo::Polynomial { delta, m } => (delta / (m * m), beta_cap(d)),
        _ => (0.0, beta_cap(d)),
    }
}

fn pick_beta(interval: (f64, f64), beta: Option<f64>) -> Result<f64> {
    let (lo, hi) = interval;
    match beta {
        None => Ok(0.5 * (lo + hi)),
        Some(b) if b > lo && b < hi => Ok(b),
        Some(b) => Err(Error::out_of_range("beta", b, format!("in ({lo}, {hi})"))),
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidArgument("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

/// Rate exponent `min(...)/beta` of the average prediction error bound for
/// an arbitrary `eta`.
fn rate_tau(tail: &TailInfo, beta: f64, eta: f64, truncated: bool) -> f64 {
    let e = match *tail {
        TailInfo::Polynomial { delta, m } if truncated => (beta - delta * eta).min((m - 1.0) * eta),
        TailInfo::Polynomial { delta, m } => (beta - delta * eta).min(m * eta - 1.0 / m),
        TailInfo::Exponential { delta, a, .. } => (beta - delta * eta).min(a * eta),
        TailInfo::Gaussian { lambda_min, c, r_f } => {
            (beta - eta / (2.0 * c * lambda_min)).min(2.0 * (1.0 - r_f) * lambda_min * eta)
        }
    };
    e / beta
}

fn assemble(tail: TailInfo, d: usize, beta: f64, eta: f64, v_form: VForm, tau: f64, truncated: bool) -> RateSchedule {
    let df = d as f64;
    let interval = if truncated { (0.0, beta_cap(d)) } else { beta_interval(&tail, d) };
    RateSchedule {
        tail,
        dimension: d,
        beta,
        eta,
        amplitude: 1.0,
        v_form,
        tau_predicted: tau,
        r: 1.0,
        nu: if v_form == VForm::Power { eta } else { beta },
        alpha_range_clt: (clt_alpha_lower(beta, tau, d), 1.0 / df),
        beta_interval: interval,
        truncated,
        lambda_range: (0.5 + beta * df, 1.0),
        s_range: ((1.0 + beta * df) / 2.0, 1.0),
    }
}

/// Optimal schedule of the plain estimator for the given tail regime.
/// `beta` defaults to the midpoint of its admissible interval.
pub fn recommend_schedule(tail: &TailInfo, d: usize, beta: Option<f64>) -> Result<RateSchedule> {
    check_dimension(d)?;
    match *tail {
        TailInfo::Polynomial { delta, m } => {
            if !(delta > 3.0) {
                return Err(Error::Infeasible(format!("polynomial tail needs delta > 3 (delta = {delta})")));
            }
            if !(m > 2.0) {
                return Err(Error::Infeasible(format!("moment order must exceed 2 (m = {m})")));
            }
            let (lo, hi) = beta_interval(tail, d);
            if !(lo < hi) {
                return Err(Error::Infeasible(format!(
                    "delta/m^2 = {lo} must be below 1/(2(d+1)) = {hi}"
                )));
            }
            let beta = pick_beta((lo, hi), beta)?;
            let eta = (beta + 1.0 / m) / (m + delta);
            let tau = (m - delta / (m * beta)) / (m + delta);
            Ok(assemble(*tail, d, beta, eta, VForm::Power, tau, false))
        }
        TailInfo::Exponential { delta, m, a } => {
            if !(delta > 0.0 && m > 0.0 && m < delta) {
                return Err(Error::Infeasible(format!(
                    "exponential moment order must satisfy 0 < m < delta (m = {m}, delta = {delta})"
                )));
            }
            if !(a > 0.0 && a < m) {
                return Err(Error::Infeasible(format!("working exponent must satisfy 0 < a < m (a = {a}, m = {m})")));
            }
            if !(2.0 * m > delta) {
                return Err(Error::Infeasible(format!(
                    "eta = beta/(2m) < beta/delta requires 2m > delta (m = {m}, delta = {delta})"
                )));
            }
            let beta = pick_beta(beta_interval(tail, d), beta)?;
            let eta = beta / (2.0 * m);
            let tau = (a / (2.0 * m)).min(1.0 - delta / (2.0 * m));
            Ok(assemble(*tail, d, beta, eta, VForm::Log, tau, false))
        }
        TailInfo::Gaussian { lambda_min, c, r_f } => {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::out_of_range("c", c, "in (0, 1)"));
            }
            if !((0.0..1.0).contains(&r_f)) {
                return Err(Error::out_of_range("r_f", r_f, "in [0, 1)"));
            }
            if !(lambda_min > 0.0) {
                return Err(Error::out_of_range("lambda_min", lambda_min, "> 0"));
            }
            let beta = pick_beta(beta_interval(tail, d), beta)?;
            let k = c * (1.0 - r_f);
            let eta = 2.0 * beta * c * lambda_min / (1.0 + k);
            let tau = k / (1.0 + k);
            Ok(assemble(*tail, d, beta, eta, VForm::SqrtLog, tau, false))
        }
    }
}

/// Schedule of the truncated-residual estimator under a polynomial tail.
pub fn truncated_schedule(delta: f64, m: f64, d: usize, beta: Option<f64>) -> Result<RateSchedule> {
    check_dimension(d)?;
    if !(delta > 3.0) {
        return Err(Error::Infeasible(format!("polynomial tail needs delta > 3 (delta = {delta})")));
    }
    if !(m > 2.0) {
        return Err(Error::Infeasible(format!("moment order must exceed 2 (m = {m})")));
    }
    let beta = pick_beta((0.0, beta_cap(d)), beta)?;
    let eta = beta / (m + delta - 1.0);
    let tau = (m - 1.0) / (m + delta - 1.0);
    Ok(assemble(TailInfo::Polynomial { delta, m }, d, beta, eta, VForm::Power, tau, true))
}

impl RateSchedule {
    /// Schedule with an arbitrary `eta`, e.g. a deliberately inadmissible one.
    /// `tau_predicted` is the rate exponent of the bound at that `eta`.
    pub fn custom(tail: TailInfo, d: usize, beta: f64, eta: f64, v_form: VForm, truncated: bool) -> Result<Self> {
        check_dimension(d)?;
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::out_of_range("eta", eta, ">= 0"));
        }
        if !(beta > 0.0 && beta < 1.0 / d as f64) {
            return Err(Error::out_of_range("beta", beta, format!("in (0, {})", 1.0 / d as f64)));
        }
        let tau = rate_tau(&tail, beta, eta, truncated);
        Ok(assemble(tail, d, beta, eta, v_form, tau, truncated))
    }

    pub fn with_amplitude(mut self, a: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::out_of_range("A", a, "> 0"));
        }
        self.amplitude = a;
        Ok(self)
    }

    pub fn with_r(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::out_of_range("R", r, "> 0"));
        }
        self.r = r;
        Ok(self)
    }

    pub fn v_at(&self, n: usize) -> f64 {
        v_at(self, n)
    }

    /// Dominant closed-form growth of `m_n^{-1}` along the schedule:
    /// `v_n^delta` (polynomial), `exp(delta v_n)` (exponential) and
    /// `exp(v_n^2 / (2 c lambda_min))` (Gaussian). Constants, including the
    /// offset `R`, are dropped.
    pub fn m_inv_rate(&self, n: usize) -> f64 {
        let v = self.v_at(n);
        match self.tail {
            TailInfo::Polynomial { delta, .. } => v.powf(delta),
            TailInfo::Exponential { delta, .. } => (delta * v).exp(),
            TailInfo::Gaussian { lambda_min, c, .. } => (v * v / (2.0 * c * lambda_min)).exp(),
        }
    }

    pub fn label(&self) -> String {
        let t = match self.tail {
            TailInfo::Polynomial { .. } if self.truncated => "polynomial-truncated",
            TailInfo::Polynomial { .. } => "polynomial",
            TailInfo::Exponential { .. } => "exponential",
            TailInfo::Gaussian { .. } => "gaussian",
        };
        t.to_string()
    }

    pub const TABLE_HEADER: [&'static str; 9] =
        ["tail", "d", "beta", "beta_lo", "beta_hi", "eta", "tau", "alpha_lo", "alpha_hi"];

    pub fn table_row(&self) -> Vec<String> {
        vec![
            self.label(),
            self.dimension.to_string(),
            format!("{:.6}", self.beta),
            format!("{:.6}", self.beta_interval.0),
            format!("{:.6}", self.beta_interval.1),
            format!("{:.6}", self.eta),
            format!("{:.6}", self.tau_predicted),
            format!("{:.6}", self.alpha_range_clt.0),
            format!("{:.6}", self.alpha_range_clt.1),
        ]
    }

    /// Default bandwidth exponent: one tenth of the way into the CLT range.
    pub fn default_alpha(&self) -> f64 {
        let (lo, hi) = self.alpha_range_clt;
        lo + 0.1 * (hi - lo)
    }
}

impl Threshold for RateSchedule {
    fn at(&self, n: usize) -> f64 {
        self.v_at(n)
    }
}

pub fn v_at(s: &RateSchedule, n: usize) -> f64 {
    let ln = (n.max(1) as f64).ln();
    match s.v_form {
        VForm::Power => s.amplitude * (n.max(1) as f64).powf(s.eta),
        VForm::Log => s.eta * ln,
        VForm::SqrtLog => (s.eta * ln).sqrt(),
    }
}

/// A density whose infimum over a centered ball is attained on the boundary
/// along a known direction.
pub trait RadialDensity {
    fn dimension(&self) -> usize;
    fn density(&self, y: &[f64]) -> f64;
    /// Unit vector `u` with `inf_{||z|| <= rho} p(z) = p(rho u)`.
    fn extreme_direction(&self) -> Vec<f64>;
}

impl RadialDensity for NoiseSpec {
    fn dimension(&self) -> usize {
        NoiseSpec::dimension(self)
    }
    fn density(&self, y: &[f64]) -> f64 {
        NoiseSpec::density(self, y)
    }
    fn extreme_direction(&self) -> Vec<f64> {
        NoiseSpec::extreme_direction(self).to_vec()
    }
}

/// Numerical audit that `p` is nonincreasing along rays and that the
/// declared extreme direction minimizes `p` on spheres.
pub fn audit_radial<P: RadialDensity + ?Sized>(p: &P, max_radius: f64, seed: u64) -> ValidationReport {
    let d = p.dimension();
    let mut rng = rng::stream(seed, rng::streams::AUDIT);
    let u0 = p.extreme_direction();
    let radii: Vec<f64> = (1..=24).map(|k| max_radius * k as f64 / 24.0).collect();
    let mut worst_increase: f64 = 0.0;
    let mut worst_undercut: f64 = 0.0;
    let mut dir = vec![0.0; d];
    let mut z = vec![0.0; d];
    for _ in 0..96 {
        for v in dir.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let nrm = norm2(&dir);
        if nrm == 0.0 {
            continue;
        }
        dir.iter_mut().for_each(|v| *v /= nrm);
        let mut last = f64::INFINITY;
        for &rho in &radii {
            z.iter_mut().zip(&dir).for_each(|(z, u)| *z = rho * u);
            let val = p.density(&z);
            worst_increase = worst_increase.max((val - last) / last.max(f64::MIN_POSITIVE));
            last = val;
            let floor: Vec<f64> = u0.iter().map(|u| rho * u).collect();
            let pf = p.density(&floor);
            worst_undercut = worst_undercut.max((pf - val) / pf.max(f64::MIN_POSITIVE));
        }
    }
    let mut report = ValidationReport::new("radial monotonicity of the noise density");
    report.push(
        "nonincreasing_along_rays",
        worst_increase <= 1e-12,
        worst_increase,
        "largest relative increase along a ray",
    );
    report.push(
        "extreme_direction_minimizes",
        worst_undercut <= 1e-12,
        worst_undercut,
        "largest relative amount by which a sphere point undercuts the declared minimizer",
    );
    report
}

/// `m_n = inf { p(z) : ||z|| <= v_n + R }`.
pub fn m_n_at<P: RadialDensity + ?Sized>(s: &RateSchedule, p: &P, n: usize) -> Result<f64> {
    let rho = s.v_at(n) + s.r;
    let audit = audit_radial(p, rho.max(1.0), 0);
    if !audit.passed() {
        return Err(Error::UnsupportedNoise(audit.to_string()));
    }
    let z: Vec<f64> = p.extreme_direction().iter().map(|u| rho * u).collect();
    Ok(p.density(&z))
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<usize> {
    (0..points)
        .map(|k| (lo * (hi / lo).powf(k as f64 / (points - 1) as f64)).round() as usize)
        .collect()
}

/// The 6-point grid `10^3 .. 10^7` used by the finite-sample proxies.
pub fn proxy_grid() -> Vec<usize> {
    geometric_grid(1e3, 1e7, 6)
}

/// A finite sequence counts as vanishing when it is strictly decreasing and
/// ends below half its first value.
pub fn vanishing(seq: &[f64]) -> bool {
    strictly_decreasing(seq) && seq.last().unwrap() < &(0.5 * seq[0])
}

pub fn strictly_decreasing(seq: &[f64]) -> bool {
    seq.len() >= 2 && seq.windows(2).all(|w| w[1] < w[0])
}

/// Audit of `v_n` increasing, `v_n = O(n^nu)` and `m_n^{-1} = o(n^beta)`.
pub fn check_a6<P: RadialDensity + ?Sized>(
    s: &RateSchedule,
    noise: &P,
    beta: f64,
    n_grid: &[usize],
) -> Result<ValidationReport> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidArgument("n_grid must be an increasing list of positive integers".into()));
    }
    let v: Vec<f64> = n_grid.iter().map(|&n| s.v_at(n)).collect();
    let growth: Vec<f64> = n_grid.iter().zip(&v).map(|(&n, v)| v / (n as f64).powf(s.nu)).collect();
    let ratio: Vec<f64> = n_grid
        .iter()
        .map(|&n| s.m_inv_rate(n) / (n as f64).powf(beta))
        .collect();
    let exact: Result<Vec<f64>> = n_grid.iter().map(|&n| m_n_at(s, noise, n)).collect();
    let mut report = ValidationReport::new(format!("dilated-ball schedule ({})", s.label()));
    report.push(
        "v_increasing",
        v.windows(2).all(|w| w[1] > w[0]),
        v[v.len() - 1] - v[0],
        if v.windows(2).all(|w| w[1] > w[0]) { "v_n strictly increasing" } else { "v_n not increasing" },
    );
    report.push(
        "v_polynomial_growth",
        growth.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)) && s.nu > 0.0,
        s.nu,
        format!("v_n / n^nu on the grid: {growth:?}"),
    );
    report.push(
        "m_inv_over_n_beta_vanishing",
        vanishing(&ratio),
        ratio[ratio.len() - 1] / ratio[0],
        format!("closed-form m_n^-1 / n^beta on the grid: {ratio:?}"),
    );
    match exact {
        Ok(m) => report.push(
            "m_n_nonincreasing",
            m.windows(2).all(|w| w[1] <= w[0]),
            m[m.len() - 1],
            format!("exact m_n on the grid: {m:?}"),
        ),
        Err(e) => report.push("m_n_nonincreasing", false, f64::NAN, e.to_string()),
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// `n^{(1 - alpha d - 2 beta)/2} m_n^{-1}` on the proxy grid.
    pub proxy: Vec<f64>,
    pub reasons: Vec<String>,
}

/// Whether `alpha` lies in the CLT range of the schedule and the bias
/// condition `n^{(1 - alpha d - 2 beta)/2} m_n^{-1} -> 0` holds on the proxy
/// grid (strictly decreasing sequence).
pub fn clt_admissible(s: &RateSchedule, alpha: f64, d: usize) -> Admissibility {
    let df = d as f64;
    let (lo, hi) = s.alpha_range_clt;
    let lower = lo.max(1.0 / (df + 2.0));
    let upper = hi.min(1.0 / df);
    let mut reasons = Vec::new();
    if d != s.dimension {
        reasons.push(format!("schedule is for d = {}, asked for d = {d}", s.dimension));
    }
    if !(alpha > lower) {
        reasons.push(format!("alpha = {alpha} is not above the lower end {lower}"));
    }
    if !(alpha < upper) {
        reasons.push(format!("alpha = {alpha} is not below 1/d = {upper}"));
    }
    let exponent = (1.0 - alpha * df - 2.0 * s.beta) / 2.0;
    let proxy: Vec<f64> = proxy_grid()
        .into_iter()
        .map(|n| (n as f64).powf(exponent) * s.m_inv_rate(n))
        .collect();
    if !strictly_decreasing(&proxy) {
        reasons.push(format!("bias proxy not decreasing on 1e3..1e7: {proxy:?}"));
    }
    Admissibility {
        admissible: reasons.is_empty(),
        alpha,
        lower,
        upper,
        proxy,
        reasons,
    }
}

/// `1 + (1/n) sum ||f(X_i)||` over a pilot trajectory, an estimate of a
/// radius `R` exceeding `int ||f|| dmu`.
pub fn estimate_r(drift: &DriftSpec, noise: &NoiseSpec, n_pilot: usize, seed: u64) -> Result<f64> {
    if n_pilot == 0 {
        return Err(Error::out_of_range("n_pilot", 0.0, ">= 1"));
    }
    let d = drift.dimension();
    let source = NoiseDraws::new(noise, rng::stream(seed, rng::streams::PILOT));
    let x0 = vec![0.0; d];
    let mut sim = Simulator::new(drift, &x0, source)?;
    let mut f = vec![0.0; d];
    let burn = (n_pilot / 10).min(10_000);
    for _ in 0..burn {
        sim.advance()?;
    }
    let mut total = 0.0;
    for _ in 0..n_pilot {
        sim.advance()?;
        drift.eval_into(sim.state(), &mut f);
        total += norm2(&f);
    }
    Ok(1.0 + total / n_pilot as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};

    fn gauss_tail(c: f64, r_f: f64) -> TailInfo {
        TailInfo::Gaussian { lambda_min: 1.0, c, r_f }
    }

    #[test]
    fn v_forms() {
        let mut s = recommend_schedule(&TailInfo::Polynomial { delta: 9.0, m: 8.0 }, 1, None).unwrap();
        s.eta = 0.1;
        assert!((s.v_at(1024) - 1024f64.powf(0.1)).abs() < 1e-12);
        assert!((s.v_at(1024) - 2.0).abs() < 2e-3);
        s.v_form = VForm::Log;
        s.eta = 0.5;
        let n = (E * E).round() as usize;
        assert!((s.v_at(n) - 0.5 * (n as f64).ln()).abs() < 1e-12);
        s.v_form = VForm::SqrtLog;
        s.eta = 1.0;
        let n4 = E.powi(4).round() as usize;
        assert!((s.v_at(n4) - (n4 as f64).ln().sqrt()).abs() < 1e-12);
        assert!((s.v_at(n4) - 2.0).abs() < 5e-3);
    }

    #[test]
    fn polynomial_example() {
        let s = recommend_schedule(&TailInfo::Polynomial { delta: 9.0, m: 8.0 }, 1, None).unwrap();
        assert!((s.beta_interval.0 - 9.0 / 64.0).abs() < 1e-15);
        assert!((s.beta_interval.1 - 0.25).abs() < 1e-15);
        let beta = 0.5 * (9.0 / 64.0 + 0.25);
        assert!((s.beta - beta).abs() < 1e-15);
        assert!((s.beta - 0.1953).abs() < 1e-4);
        assert!((s.eta - (beta + 0.125) / 17.0).abs() < 1e-15);
        assert!((s.tau_predicted - (8.0 - 9.0 / (8.0 * beta)) / 17.0).abs() < 1e-15);
        let err = recommend_schedule(&TailInfo::Polynomial { delta: 9.0, m: 2.5 }, 1, None).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(err.to_string().contains("1.44"));
    }

    #[test]
    fn gaussian_example() {
        let s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, None).unwrap();
        assert!((s.tau_predicted - 0.9 / 1.9).abs() < 1e-15);
        assert_eq!(s.v_form, VForm::SqrtLog);
        let s = recommend_schedule(&gauss_tail(0.999, 0.0), 1, None).unwrap();
        assert!(0.5 - s.tau_predicted < 1e-3);
    }

    #[test]
    fn truncated_example() {
        let t = truncated_schedule(4.0, 3.0, 1, Some(0.2)).unwrap();
        assert!((t.eta - 0.2 / 6.0).abs() < 1e-15);
        assert!((t.tau_predicted - 1.0 / 3.0).abs() < 1e-15);
        let plain_tau = (3.0 - 4.0 / (3.0 * 0.2)) / 7.0;
        assert!(t.tau_predicted > plain_tau);
        let taus: Vec<f64> = (3..40)
            .map(|m| truncated_schedule(4.0, m as f64, 1, Some(0.2)).unwrap().tau_predicted)
            .collect();
        assert!(taus.windows(2).all(|w| w[1] > w[0]));
        assert!(*taus.last().unwrap() < 1.0);
        assert!(truncated_schedule(3.0, 3.0, 1, None).is_err());
    }

    #[test]
    fn exponential_schedule() {
        let s = recommend_schedule(&TailInfo::Exponential { delta: 1.0, m: 0.9, a: 0.81 }, 1, Some(0.2)).unwrap();
        assert_eq!(s.v_form, VForm::Log);
        assert!((s.eta - 0.2 / 1.8).abs() < 1e-15);
        assert!(s.tau_predicted < 0.5);
        assert!(s.eta < s.beta / 1.0);
    }

    #[test]
    fn m_n_closed_forms() {
        let mut s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, None).unwrap();
        s.v_form = VForm::Power;
        s.eta = 0.0;
        s.amplitude = 1.0;
        s.r = 1.0;
        let g = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let phi2 = (-2.0f64).exp() / (2.0 * PI).sqrt();
        assert!((m_n_at(&s, &g, 10).unwrap() - phi2).abs() < 1e-15);
        assert!((phi2 - 0.05399).abs() < 1e-5);
        s.r = 2.0;
        let l = NoiseSpec::laplace(1.0, 1).unwrap();
        assert!((m_n_at(&s, &l, 10).unwrap() - 0.5 * (-3.0f64).exp()).abs() < 1e-15);
        // Gaussian floor dominates exp(-(v+R)^2/(2c)) up to a constant
        let g2 = NoiseSpec::gaussian_isotropic(1.0, 2).unwrap();
        for rho in [0.5, 1.0, 2.0, 4.0, 8.0] {
            s.amplitude = rho;
            s.r = 1e-12;
            let m = m_n_at(&s, &g2, 5).unwrap();
            assert!(m >= (-(rho * rho) / (2.0 * 0.9)).exp() / (2.0 * PI));
        }
    }

    #[test]
    fn product_extreme_direction_matches_dense_sphere() {
        let cov = vec![1.0, 0.4, 0.4, 0.7];
        for noise in [
            NoiseSpec::laplace(1.3, 2).unwrap(),
            NoiseSpec::student_t(4.0, 2).unwrap(),
            NoiseSpec::gaussian(cov, 2).unwrap(),
        ] {
            let rho = 2.5;
            let u = noise.extreme_direction().to_vec();
            let at = noise.density(&[rho * u[0], rho * u[1]]);
            let dense = (0..20000)
                .map(|k| 2.0 * PI * k as f64 / 20000.0)
                .map(|t| noise.density(&[rho * t.cos(), rho * t.sin()]))
                .fold(f64::INFINITY, f64::min);
            assert!((at - dense).abs() <= 1e-6 * dense, "{}", noise.name());
            assert!(audit_radial(&noise, 6.0, 1).passed());
        }
    }

    struct Bimodal;
    impl RadialDensity for Bimodal {
        fn dimension(&self) -> usize {
            1
        }
        fn density(&self, y: &[f64]) -> f64 {
            (-(y[0].abs() - 2.0).powi(2)).exp()
        }
        fn extreme_direction(&self) -> Vec<f64> {
            vec![1.0]
        }
    }

    #[test]
    fn non_radial_density_is_rejected() {
        let s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, None).unwrap();
        assert!(matches!(m_n_at(&s, &Bimodal, 100), Err(Error::UnsupportedNoise(_))));
    }

    #[test]
    fn m_n_nonincreasing_in_n() {
        let g = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, Some(0.2)).unwrap();
        let m: Vec<f64> = [10, 100, 1000, 10_000, 100_000].iter().map(|&n| m_n_at(&s, &g, n).unwrap()).collect();
        assert!(m.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn a6_audit_cases() {
        let g = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, Some(0.2)).unwrap();
        let grid = proxy_grid();
        let rep = check_a6(&s, &g, 0.2, &grid).unwrap();
        assert!(rep.passed(), "{rep}");

        let t = NoiseSpec::student_t(8.0, 1).unwrap();
        let tail = TailInfo::Polynomial { delta: 9.0, m: 5.0 };
        let bad = RateSchedule::custom(tail, 1, 0.2, 2.0 * 0.2 / 9.0, VForm::Power, false).unwrap();
        let rep = check_a6(&bad, &t, 0.2, &grid).unwrap();
        assert!(!rep.check("m_inv_over_n_beta_vanishing").unwrap().passed);

        let flat = RateSchedule::custom(tail, 1, 0.2, 0.0, VForm::Power, false).unwrap();
        let rep = check_a6(&flat, &t, 0.2, &grid).unwrap();
        assert!(!rep.check("v_increasing").unwrap().passed);
    }

    #[test]
    fn clt_admissibility_cases() {
        let s = recommend_schedule(&gauss_tail(0.9, 0.0), 1, Some(0.24)).unwrap();
        assert!((s.alpha_range_clt.0 - (1.0 - 2.0 * 0.24 * 0.9 / 1.9)).abs() < 1e-15);
        assert!((s.alpha_range_clt.0 - 0.7726).abs() < 1e-4);
        let a = clt_admissible(&s, 0.8, 1);
        assert!(a.admissible, "{:?}", a.reasons);
        assert!(!clt_admissible(&s, 1.0, 1).admissible);
        let s0 = recommend_schedule(&gauss_tail(0.9, 0.0), 1, Some(0.01)).unwrap();
        let low = clt_admissible(&s0, 1.0 / 3.0, 1);
        assert!(!low.admissible);
        let s2 = recommend_schedule(&gauss_tail(0.9, 0.0), 1, Some(0.2)).unwrap();
        assert!(!clt_admissible(&s2, 0.8, 1).admissible);
        assert!(clt_admissible(&s2, s2.default_alpha(), 1).admissible);
    }

    #[test]
    fn r_estimate_for_bounded_drift() {
        let drift = DriftSpec::tanh_affine(1.0, 0.0, 1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let r = estimate_r(&drift, &noise, 50_000, 1).unwrap();
        assert!(r > 1.0 && r < 2.0);
        let zero = DriftSpec::zero(1).unwrap();
        assert_eq!(estimate_r(&zero, &noise, 100, 1).unwrap(), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn prop_polynomial_eta_interval(d in 1usize..4, m in 3.0f64..20.0, frac in 0.05f64..0.95, bfrac in 0.01f64..0.99) {
            // delta in (3, m^2 / (2(d+1))) keeps the beta interval nonempty
            let dmax = m * m / (2.0 * (d as f64 + 1.0));
            prop_assume!(dmax > 3.0 + 1e-6);
            let delta = 3.0 + frac * (dmax - 3.0);
            let tail = TailInfo::Polynomial { delta, m };
            let (lo, hi) = beta_interval(&tail, d);
            let beta = lo + bfrac * (hi - lo);
            let s = recommend_schedule(&tail, d, Some(beta)).unwrap();
            prop_assert!(s.eta > 1.0 / (m * m));
            prop_assert!(s.eta < 1.0 / (m * m) + 1.0 / (m * (d as f64 + 2.0)));
            let t = truncated_schedule(delta, m, d, Some(beta)).unwrap();
            prop_assert!(t.tau_predicted > s.tau_predicted);
            prop_assert!((RateSchedule::custom(tail, d, beta, s.eta, VForm::Power, false).unwrap().tau_predicted - s.tau_predicted).abs() < 1e-12);
        }
    }
}
