//! Functional autoregressive models `X_n = f(X_{n-1}) + eps_n`.
//!
//! Drift families come with declared growth constants (`r_f`, `C_f`) and a
//! gradient bound; noise families are zero-mean with closed-form densities.
//! Simulation is streamed through [`Simulator`] so that the estimation
//! pipeline never needs to hold a whole trajectory in memory.

use crate::error::{check_dim, Error, Result};
use crate::numeric::{cholesky, norm2, spd_inverse, spectral_norm, symmetric_eigen};
use crate::rng::{self, StreamRng};
use crate::validation::ValidationReport;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DriftFamily {
    Zero,
    /// `f(x) = theta x`, `theta` row-major `d x d`.
    LinearStable { theta: Vec<f64> },
    /// `f(x)_j = scale_j tanh(x_j) + shift_j`.
    TanhAffine { scale: Vec<f64>, shift: Vec<f64> },
    /// `f(x)_j = amplitude sin(x_j)`.
    BoundedSine { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSpec {
    family: DriftFamily,
    dimension: usize,
    r_f: f64,
    c_f: f64,
    gradient_bound: f64,
}

impl DriftSpec {
    pub fn zero(dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        Ok(Self {
            family: DriftFamily::Zero,
            dimension,
            r_f: 0.0,
            c_f: 0.0,
            gradient_bound: 0.0,
        })
    }

    /// Linear drift with a full matrix; its spectral norm must be below one.
    pub fn linear(theta: Vec<f64>, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        check_dim(dimension * dimension, theta.len())?;
        let norm = spectral_norm(&theta, dimension);
        if !(norm < 1.0) {
            return Err(Error::out_of_range("spectral_norm(theta)", norm, "< 1"));
        }
        Ok(Self {
            family: DriftFamily::LinearStable { theta },
            dimension,
            r_f: norm,
            c_f: 0.0,
            gradient_bound: norm,
        })
    }

    /// `theta * I`.
    pub fn linear_scalar(theta: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        let mut m = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            m[i * dimension + i] = theta;
        }
        Self::linear(m, dimension)
    }

    pub fn tanh_affine(scale: f64, shift: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        Self::tanh_affine_vec(vec![scale; dimension], vec![shift; dimension])
    }

    pub fn tanh_affine_vec(scale: Vec<f64>, shift: Vec<f64>) -> Result<Self> {
        let dimension = scale.len();
        positive_dim(dimension)?;
        check_dim(dimension, shift.len())?;
        let c_f = norm2(&scale) + norm2(&shift);
        let gradient_bound = scale.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        Ok(Self {
            family: DriftFamily::TanhAffine { scale, shift },
            dimension,
            r_f: 0.0,
            c_f,
            gradient_bound,
        })
    }

    pub fn bounded_sine(amplitude: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        Ok(Self {
            family: DriftFamily::BoundedSine { amplitude },
            dimension,
            r_f: 0.0,
            c_f: amplitude.abs() * (dimension as f64).sqrt(),
            gradient_bound: amplitude.abs(),
        })
    }

    /// Drift with caller-declared constants, bypassing all consistency checks.
    /// Used to build audit fixtures.
    pub fn with_declared_constants(
        family: DriftFamily,
        dimension: usize,
        r_f: f64,
        c_f: f64,
        gradient_bound: f64,
    ) -> Self {
        Self {
            family,
            dimension,
            r_f,
            c_f,
            gradient_bound,
        }
    }

    pub fn family(&self) -> &DriftFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_f(&self) -> f64 {
        self.r_f
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, DriftFamily::Zero)
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            DriftFamily::Zero => "zero",
            DriftFamily::LinearStable { .. } => "linear",
            DriftFamily::TanhAffine { .. } => "tanh",
            DriftFamily::BoundedSine { .. } => "sine",
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, x.len())?;
        let mut out = vec![0.0; self.dimension];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dimension;
        match &self.family {
            DriftFamily::Zero => out.fill(0.0),
            DriftFamily::LinearStable { theta } => {
                for i in 0..d {
                    out[i] = (0..d).map(|j| theta[i * d + j] * x[j]).sum();
                }
            }
            DriftFamily::TanhAffine { scale, shift } => {
                for j in 0..d {
                    out[j] = scale[j] * x[j].tanh() + shift[j];
                }
            }
            DriftFamily::BoundedSine { amplitude } => {
                for j in 0..d {
                    out[j] = amplitude * x[j].sin();
                }
            }
        }
    }
}

fn positive_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidArgument("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum NoiseFamily {
    Gaussian { covariance: Vec<f64> },
    /// Independent coordinates with density `rate/2 exp(-rate |y|)`.
    LaplaceProduct { rate: f64 },
    /// Independent standard Student-t coordinates.
    StudentTProduct { dof: f64 },
}

/// Decay of the noise density at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum TailClass {
    /// `C ||x||^-delta`
    Polynomial { delta: f64 },
    /// `C exp(-delta ||x||)`
    Exponential { delta: f64 },
    Gaussian,
}

/// Declared moment information of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum MomentOrder {
    /// Finite `E ||eps||^m`.
    Polynomial(f64),
    /// Finite `E exp(m ||eps||)`.
    Exponential(f64),
    /// All polynomial moments; `E exp(a ||eps||^2)` finite for `a` below the recorded value.
    Gaussian(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSpec {
    family: NoiseFamily,
    dimension: usize,
    tail: TailClass,
    moment: MomentOrder,
    covariance: Vec<f64>,
    #[serde(skip)]
    chol: Vec<f64>,
    #[serde(skip)]
    precision: Vec<f64>,
    #[serde(skip)]
    log_norm: f64,
    lambda_min: f64,
    #[serde(skip)]
    extreme_direction: Vec<f64>,
}

impl NoiseSpec {
    pub fn gaussian(covariance: Vec<f64>, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        check_dim(dimension * dimension, covariance.len())?;
        let d = dimension;
        for i in 0..d {
            for j in 0..d {
                if (covariance[i * d + j] - covariance[j * d + i]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("covariance must be symmetric".into()));
                }
            }
        }
        let chol = cholesky(&covariance, d)
            .ok_or_else(|| Error::InvalidArgument("covariance must be positive definite".into()))?;
        let precision = spd_inverse(&chol, d);
        let log_det: f64 = (0..d).map(|i| 2.0 * chol[i * d + i].ln()).sum();
        let (values, vectors) = symmetric_eigen(&covariance, d);
        let lambda_min = values[0];
        let lambda_max = values[d - 1];
        let extreme_direction = (0..d).map(|row| vectors[row * d]).collect();
        Ok(Self {
            family: NoiseFamily::Gaussian {
                covariance: covariance.clone(),
            },
            dimension,
            tail: TailClass::Gaussian,
            moment: MomentOrder::Gaussian(1.0 / (2.0 * lambda_max)),
            covariance,
            chol,
            precision,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
            lambda_min,
            extreme_direction,
        })
    }

    /// `sigma^2 I`.
    pub fn gaussian_isotropic(sigma: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        if !(sigma > 0.0) {
            return Err(Error::out_of_range("sigma", sigma, "> 0"));
        }
        let mut cov = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            cov[i * dimension + i] = sigma * sigma;
        }
        Self::gaussian(cov, dimension)
    }

    /// Product Laplace noise. The declared exponential-moment order defaults
    /// to `0.9 * rate`; any order strictly below the rate is valid.
    pub fn laplace(rate: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        if !(rate > 0.0) {
            return Err(Error::out_of_range("laplace_rate", rate, "> 0"));
        }
        let var = 2.0 / (rate * rate);
        Ok(Self::product(
            NoiseFamily::LaplaceProduct { rate },
            dimension,
            TailClass::Exponential { delta: rate },
            MomentOrder::Exponential(0.9 * rate),
            var,
            dimension as f64 * (0.5 * rate).ln(),
        ))
    }

    /// Product Student-t noise with `dof > 2`. Its density decays like
    /// `||x||^-(dof + 1)`; the declared moment order defaults to the midpoint
    /// of `(2, dof)`.
    pub fn student_t(dof: f64, dimension: usize) -> Result<Self> {
        positive_dim(dimension)?;
        if !(dof > 2.0) {
            return Err(Error::out_of_range("dof", dof, "> 2 (finite moment of order m > 2)"));
        }
        let log_c = ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0) - 0.5 * (dof * PI).ln();
        Ok(Self::product(
            NoiseFamily::StudentTProduct { dof },
            dimension,
            TailClass::Polynomial { delta: dof + 1.0 },
            MomentOrder::Polynomial(0.5 * (2.0 + dof)),
            dof / (dof - 2.0),
            dimension as f64 * log_c,
        ))
    }

    fn product(
        family: NoiseFamily,
        dimension: usize,
        tail: TailClass,
        moment: MomentOrder,
        var: f64,
        log_norm: f64,
    ) -> Self {
        let mut covariance = vec![0.0; dimension * dimension];
        for i in 0..dimension {
            covariance[i * dimension + i] = var;
        }
        let diag = 1.0 / (dimension as f64).sqrt();
        Self {
            family,
            dimension,
            tail,
            moment,
            covariance,
            chol: Vec::new(),
            precision: Vec::new(),
            log_norm,
            lambda_min: var,
            extreme_direction: vec![diag; dimension],
        }
    }

    /// Overrides the declared moment order, checking it against the family.
    pub fn with_moment_order(mut self, order: f64) -> Result<Self> {
        match (&self.family, self.moment) {
            (NoiseFamily::StudentTProduct { dof }, _) => {
                if !(order > 2.0 && order < *dof) {
                    return Err(Error::out_of_range("moment_order", order, format!("in (2, {dof})")));
                }
                self.moment = MomentOrder::Polynomial(order);
            }
            (NoiseFamily::LaplaceProduct { rate }, _) => {
                if !(order > 0.0 && order < *rate) {
                    return Err(Error::out_of_range("moment_order", order, format!("in (0, {rate})")));
                }
                self.moment = MomentOrder::Exponential(order);
            }
            (NoiseFamily::Gaussian { .. }, MomentOrder::Gaussian(limit)) => {
                if !(order > 0.0 && order < limit) {
                    return Err(Error::out_of_range("moment_order", order, format!("in (0, {limit})")));
                }
                self.moment = MomentOrder::Gaussian(order);
            }
            _ => unreachable!("moment kind always matches the family"),
        }
        Ok(self)
    }

    pub fn family(&self) -> &NoiseFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn tail_class(&self) -> TailClass {
        self.tail
    }

    pub fn moment_order(&self) -> MomentOrder {
        self.moment
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    /// Smallest eigenvalue of the covariance matrix.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Coordinate standard deviation used to size evaluation windows.
    pub fn scale(&self) -> f64 {
        let d = self.dimension;
        (0..d)
            .map(|i| self.covariance[i * d + i])
            .fold(0.0f64, f64::max)
            .sqrt()
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::LaplaceProduct { .. } => "laplace",
            NoiseFamily::StudentTProduct { .. } => "student_t",
        }
    }

    pub fn noise_density(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dimension, y.len())?;
        Ok(self.density(y))
    }

    #[inline]
    pub fn density(&self, y: &[f64]) -> f64 {
        self.log_density(y).exp()
    }

    pub fn log_density(&self, y: &[f64]) -> f64 {
        let d = self.dimension;
        match &self.family {
            NoiseFamily::Gaussian { .. } => {
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += y[i] * self.precision[i * d + j] * y[j];
                    }
                }
                self.log_norm - 0.5 * q
            }
            NoiseFamily::LaplaceProduct { rate } => {
                self.log_norm - rate * y.iter().map(|v| v.abs()).sum::<f64>()
            }
            NoiseFamily::StudentTProduct { dof } => {
                self.log_norm
                    - 0.5 * (dof + 1.0) * y.iter().map(|v| (v * v / dof).ln_1p()).sum::<f64>()
            }
        }
    }

    /// Unit direction along which the density decays fastest; the minimum of
    /// the density over a centered sphere is attained at `radius * direction`.
    pub fn extreme_direction(&self) -> &[f64] {
        &self.extreme_direction
    }

    /// Draws one noise vector.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dimension;
        match &self.family {
            NoiseFamily::Gaussian { .. } => {
                let mut stack = [0.0f64; 8];
                let mut heap = Vec::new();
                let z: &mut [f64] = if d <= stack.len() {
                    &mut stack[..d]
                } else {
                    heap.resize(d, 0.0);
                    &mut heap
                };
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                // lower-triangular L, so out[i] reads z[..=i] only
                for i in 0..d {
                    out[i] = (0..=i).map(|k| self.chol[i * d + k] * z[k]).sum();
                }
            }
            NoiseFamily::LaplaceProduct { rate } => {
                for v in out.iter_mut() {
                    let u: f64 = rng.random::<f64>() - 0.5;
                    *v = -u.signum() * (1.0 - 2.0 * u.abs()).ln() / rate;
                }
            }
            NoiseFamily::StudentTProduct { dof } => {
                let t = StudentT::new(*dof).expect("dof validated at construction");
                for v in out.iter_mut() {
                    *v = t.sample(rng);
                }
            }
        }
    }
}

/// Source of the innovations fed to a [`Simulator`].
pub trait NoiseSource {
    fn fill(&mut self, out: &mut [f64]);
}

pub struct NoiseDraws<'a> {
    noise: &'a NoiseSpec,
    rng: StreamRng,
}

impl<'a> NoiseDraws<'a> {
    pub fn new(noise: &'a NoiseSpec, rng: StreamRng) -> Self {
        Self { noise, rng }
    }
}

impl NoiseSource for NoiseDraws<'_> {
    fn fill(&mut self, out: &mut [f64]) {
        self.noise.sample_into(&mut self.rng, out);
    }
}

/// All-zero innovations: turns the model into its deterministic skeleton.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill(&mut self, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Step-by-step simulator holding only the current and previous state.
pub struct Simulator<'a, S> {
    drift: &'a DriftSpec,
    source: S,
    previous: Vec<f64>,
    state: Vec<f64>,
    noise: Vec<f64>,
    step: usize,
}

impl<'a, S: NoiseSource> Simulator<'a, S> {
    pub fn new(drift: &'a DriftSpec, x0: &[f64], source: S) -> Result<Self> {
        check_dim(drift.dimension(), x0.len())?;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial state must be finite".into()));
        }
        let d = drift.dimension();
        Ok(Self {
            drift,
            source,
            previous: x0.to_vec(),
            state: x0.to_vec(),
            noise: vec![0.0; d],
            step: 0,
        })
    }

    /// Advances to `X_{step+1}`.
    pub fn advance(&mut self) -> Result<()> {
        std::mem::swap(&mut self.previous, &mut self.state);
        self.source.fill(&mut self.noise);
        self.drift.eval_into(&self.previous, &mut self.state);
        for (x, e) in self.state.iter_mut().zip(&self.noise) {
            *x += e;
        }
        self.step += 1;
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow { step: self.step });
        }
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn previous(&self) -> &[f64] {
        &self.previous
    }

    /// Innovation of the last step.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    dimension: usize,
    states: Vec<f64>,
    noises: Option<Vec<f64>>,
    seed: u64,
    stream: u64,
    drift: DriftSpec,
    noise: Option<NoiseSpec>,
}

impl Trajectory {
    /// Number of steps `n`; the trajectory holds `n + 1` states.
    pub fn len(&self) -> usize {
        self.states.len() / self.dimension - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    pub fn noise_spec(&self) -> Option<&NoiseSpec> {
        self.noise.as_ref()
    }

    /// `X_i`, `0 <= i <= n`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dimension)
    }

    /// Stored `eps_i`, `1 <= i <= n`, when the trajectory kept its noise.
    pub fn noise(&self, i: usize) -> Option<&[f64]> {
        let d = self.dimension;
        self.noises.as_ref().map(|v| &v[(i - 1) * d..i * d])
    }

    pub fn has_noise(&self) -> bool {
        self.noises.is_some()
    }

    /// `X_i - f(X_{i-1})`.
    pub fn reconstructed_noise(&self, i: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.dimension];
        self.drift.eval_into(self.state(i - 1), &mut f);
        self.state(i).iter().zip(&f).map(|(x, f)| x - f).collect()
    }

    /// CSV with a `# generator=...` provenance line followed by
    /// `step,x_1..x_d[,eps_1..eps_d]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.dimension;
        writeln!(w, "# generator={}; seed={}; stream={}", rng::GENERATOR, self.seed, self.stream)?;
        let mut header = String::from("step");
        for j in 1..=d {
            header.push_str(&format!(",x_{j}"));
        }
        if self.noises.is_some() {
            for j in 1..=d {
                header.push_str(&format!(",eps_{j}"));
            }
        }
        writeln!(w, "{header}")?;
        for i in 0..=self.len() {
            write!(w, "{i}")?;
            for v in self.state(i) {
                write!(w, ",{v}")?;
            }
            if let Some(noises) = &self.noises {
                if i == 0 {
                    for _ in 0..d {
                        write!(w, ",")?;
                    }
                } else {
                    for v in &noises[(i - 1) * d..i * d] {
                        write!(w, ",{v}")?;
                    }
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn simulate(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    n: usize,
    x0: &[f64],
    seed: u64,
    keep_noise: bool,
) -> Result<Trajectory> {
    simulate_stream(drift, noise, n, x0, seed, rng::streams::SIMULATION, keep_noise, 0)
}

/// Full-control variant: explicit stream id and an optional burn-in whose
/// last state becomes `X_0`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_stream(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    n: usize,
    x0: &[f64],
    seed: u64,
    stream: u64,
    keep_noise: bool,
    burn_in: usize,
) -> Result<Trajectory> {
    check_dim(drift.dimension(), noise.dimension())?;
    let source = NoiseDraws::new(noise, rng::stream(seed, stream));
    let mut traj = simulate_with_source(drift, n, x0, source, keep_noise, burn_in)?;
    traj.seed = seed;
    traj.stream = stream;
    traj.noise = Some(noise.clone());
    Ok(traj)
}

pub fn simulate_with_source<S: NoiseSource>(
    drift: &DriftSpec,
    n: usize,
    x0: &[f64],
    source: S,
    keep_noise: bool,
    burn_in: usize,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::out_of_range("n", 0.0, ">= 1"));
    }
    let d = drift.dimension();
    let mut sim = Simulator::new(drift, x0, source)?;
    for _ in 0..burn_in {
        sim.advance()?;
    }
    let mut states = Vec::with_capacity((n + 1) * d);
    states.extend_from_slice(sim.state());
    let mut noises = keep_noise.then(|| Vec::with_capacity(n * d));
    for _ in 0..n {
        sim.advance().map_err(|e| match e {
            Error::NumericalOverflow { step } => Error::NumericalOverflow { step: step - burn_in },
            other => other,
        })?;
        states.extend_from_slice(sim.state());
        if let Some(v) = noises.as_mut() {
            v.extend_from_slice(sim.noise());
        }
    }
    Ok(Trajectory {
        dimension: d,
        states,
        noises,
        seed: 0,
        stream: 0,
        drift: drift.clone(),
        noise: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// `(1/n) sum ||X_i||^m`
    pub sum_norm_m_over_n: f64,
    /// `sup_{i<=n} ||X_i|| / n^{1/m}`
    pub sup_norm_scaled: f64,
    /// `sup_{i<=n} ||eps_i||`
    pub sup_noise: f64,
    /// `(1/n) sum exp(a ||X_i||)` or `exp(a ||X_i||^2)`.
    pub exp_moment_sum_over_n: Option<f64>,
    pub exponent_a: f64,
    /// Set when the exponential average overflowed and was saturated to infinity.
    pub exp_moment_overflow: bool,
}

/// Empirical stability diagnostics over `X_1..X_n`.
pub fn stability_diagnostics(
    traj: &Trajectory,
    m: f64,
    exponent_a: Option<f64>,
    squared_exponent: bool,
) -> Result<StabilityReport> {
    if traj.is_empty() {
        return Err(Error::EmptyState);
    }
    if !(m > 0.0) {
        return Err(Error::out_of_range("m", m, "> 0"));
    }
    let n = traj.len();
    let mut sum_m = 0.0;
    let mut sup_x: f64 = 0.0;
    let mut sup_eps: f64 = 0.0;
    let mut exps = Vec::with_capacity(if exponent_a.is_some() { n } else { 0 });
    for i in 1..=n {
        let r = norm2(traj.state(i));
        sum_m += r.powf(m);
        sup_x = sup_x.max(r);
        let e = match traj.noise(i) {
            Some(e) => norm2(e),
            None => norm2(&traj.reconstructed_noise(i)),
        };
        sup_eps = sup_eps.max(e);
        if let Some(a) = exponent_a {
            exps.push(if squared_exponent { a * r * r } else { a * r });
        }
    }
    let (exp_avg, overflow) = match exponent_a {
        None => (None, false),
        Some(_) => {
            // log-sum-exp keeps the average finite whenever it is representable
            let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = exps.iter().map(|w| (w - max).exp()).sum();
            let log_avg = max + s.ln() - (n as f64).ln();
            let v = log_avg.exp();
            (Some(v), !v.is_finite())
        }
    };
    Ok(StabilityReport {
        sum_norm_m_over_n: sum_m / n as f64,
        sup_norm_scaled: sup_x / (n as f64).powf(1.0 / m),
        sup_noise: sup_eps,
        exp_moment_sum_over_n: exp_avg,
        exponent_a: exponent_a.unwrap_or(0.0),
        exp_moment_overflow: overflow,
    })
}

/// `(1/n) sum_{i=0}^{n-1} 1{||f(X_i)|| < R}`.
pub fn crossing_frequency(traj: &Trajectory, drift: &DriftSpec, radius: f64) -> Result<f64> {
    Ok(crossing_counts(traj, drift, radius)?.0)
}

/// Pathwise lower bound `1 - (1/(nR)) sum_{i=0}^{n-1} ||f(X_i)||` on the
/// crossing frequency.
pub fn crossing_lower_bound(traj: &Trajectory, drift: &DriftSpec, radius: f64) -> Result<f64> {
    Ok(crossing_counts(traj, drift, radius)?.1)
}

fn crossing_counts(traj: &Trajectory, drift: &DriftSpec, radius: f64) -> Result<(f64, f64)> {
    if !(radius > 0.0) {
        return Err(Error::out_of_range("R", radius, "> 0"));
    }
    check_dim(drift.dimension(), traj.dimension())?;
    let n = traj.len();
    let mut f = vec![0.0; traj.dimension()];
    let mut inside = 0usize;
    let mut total = 0.0;
    for i in 0..n {
        drift.eval_into(traj.state(i), &mut f);
        let r = norm2(&f);
        if r < radius {
            inside += 1;
        }
        total += r;
    }
    let n = n as f64;
    Ok((inside as f64 / n, 1.0 - total / (n * radius)))
}

/// Audits `||f(x)|| <= r_f ||x|| + C_f` on uniform samples from a box.
pub fn check_a1(drift: &DriftSpec, sample_count: usize, box_radius: f64, seed: u64) -> Result<ValidationReport> {
    if sample_count < 100 {
        return Err(Error::out_of_range("sample_count", sample_count as f64, ">= 100"));
    }
    if !(box_radius > 0.0) {
        return Err(Error::out_of_range("box_radius", box_radius, "> 0"));
    }
    let d = drift.dimension();
    let mut rng = rng::stream(seed, rng::streams::AUDIT);
    let mut x = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut min_slack = f64::INFINITY;
    let mut violations = 0usize;
    for _ in 0..sample_count {
        for v in x.iter_mut() {
            *v = rng.random_range(-box_radius..=box_radius);
        }
        drift.eval_into(&x, &mut f);
        let slack = drift.r_f() * norm2(&x) + drift.c_f() - norm2(&f);
        if slack < -1e-12 {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
    }
    let mut report = ValidationReport::new(format!("growth bound of {} drift", drift.name()));
    report.push(
        "growth_bound",
        violations == 0,
        min_slack,
        format!("{violations} violations of ||f(x)|| <= r_f||x|| + C_f"),
    );
    report.push("r_f_below_one", drift.r_f() < 1.0, drift.r_f(), "r_f < 1");
    Ok(report)
}
