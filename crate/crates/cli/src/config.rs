//! Line-oriented `section.key = value` configuration.
//!
//! Values come from three layers, later ones winning: the config file,
//! `--set` overrides, then the dedicated flags (`--seed`, `--out`). Every
//! field is checked before any computation starts.

use crate::error::CliError;
use crate::Command;
use innokde::density::GridSpec;
use innokde::experiments::default_window;
use innokde::kernels::{KernelFamily, KernelSpec};
use innokde::model::{DriftSpec, NoiseSpec};
use innokde::tuning::{recommend_schedule, truncated_schedule, RateSchedule, TailInfo};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Every accepted key with its default (empty when derived or required).
pub const KEYS: &[(&str, &str)] = &[
    ("model.drift", ""),
    ("model.theta", "0.5"),
    ("model.scale", "1"),
    ("model.shift", "0"),
    ("model.amplitude", "1"),
    ("model.noise", ""),
    ("model.sigma", "1"),
    ("model.rate", "1"),
    ("model.dof", "5"),
    ("model.moment", ""),
    ("model.d", "1"),
    ("model.x0", "0"),
    ("model.burn_in", "0"),
    ("estimators.kernel_f", "epanechnikov"),
    ("estimators.kernel_p", "epanechnikov"),
    ("estimators.beta", ""),
    ("estimators.alpha", ""),
    ("estimators.mode", "plain"),
    ("estimators.grid", ""),
    ("schedule.tail", "auto"),
    ("schedule.delta", ""),
    ("schedule.m", ""),
    ("schedule.a", ""),
    ("schedule.c", "0.9"),
    ("schedule.lambda_min", ""),
    ("schedule.r_f", ""),
    ("schedule.eta", ""),
    ("schedule.amplitude", ""),
    ("schedule.r", ""),
    ("experiment.n", "10000"),
    ("experiment.n_grid", "4096,8192,16384,32768,65536"),
    ("experiment.M", "200"),
    ("experiment.y_points", ""),
    ("experiment.checkpoints", ""),
    ("experiment.tol", "1e-10"),
    ("experiment.max_iter", "1000"),
    ("io.out_dir", "out"),
    ("io.seed", "0"),
    ("io.record_timing", "false"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    Override,
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
            Origin::Override => f.write_str("--set"),
            Origin::Flag => f.write_str("flag"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Raw key/value layer before typing.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Drops a `#` comment that is not inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (c, quote) {
            ('"' | '\'', None) => quote = Some(c),
            (c, Some(q)) if c == q => quote = None,
            ('#', None) => return &line[..i],
            _ => {}
        }
    }
    line
}

fn split_pair(text: &str) -> Option<(&str, &str)> {
    let (k, v) = text.split_once('=')?;
    let k = k.trim();
    let (section, name) = k.split_once('.')?;
    if section.is_empty() || name.is_empty() || name.contains('.') || k.contains(char::is_whitespace) {
        return None;
    }
    Some((k, unquote(v)))
}

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = strip_comment(line).trim();
            if body.is_empty() {
                continue;
            }
            let parse_err = |message: String| CliError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message,
            };
            let (key, value) =
                split_pair(body).ok_or_else(|| parse_err(format!("expected `section.key = value`, got `{body}`")))?;
            if !known(key) {
                return Err(parse_err(format!("unknown key `{key}`")));
            }
            if let Some(prev) = raw.entries.get(key) {
                return Err(parse_err(format!("`{key}` already set at {}", prev.origin)));
            }
            raw.entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    origin: Origin::File {
                        path: path.to_path_buf(),
                        line: line_no,
                    },
                },
            );
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) = split_pair(pair).ok_or_else(|| CliError::Validation {
            key: "--set".into(),
            message: format!("expected `section.key=value`, got `{pair}`"),
        })?;
        if !known(key) {
            return Err(CliError::Validation {
                key: key.into(),
                message: "unknown key".into(),
            });
        }
        self.insert(key, value, Origin::Override);
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: &str, origin: Origin) {
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
            },
        );
    }

    fn explicit(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key).filter(|e| !e.value.is_empty())
    }
}

/// Typed accessors that fill defaults and remember the effective values.
struct Reader<'a> {
    raw: &'a RawConfig,
    effective: BTreeMap<String, String>,
}

impl<'a> Reader<'a> {
    fn new(raw: &'a RawConfig) -> Self {
        Self {
            raw,
            effective: BTreeMap::new(),
        }
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> CliError {
        let message = message.into();
        let message = match self.raw.entries.get(key) {
            Some(e) => format!("{message} (set at {})", e.origin),
            None => message,
        };
        CliError::Validation {
            key: key.into(),
            message,
        }
    }

    fn text(&mut self, key: &str) -> Option<String> {
        let value = match self.raw.explicit(key) {
            Some(e) => e.value.clone(),
            None => {
                let default = KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or("");
                if default.is_empty() {
                    return None;
                }
                default.to_string()
            }
        };
        self.effective.insert(key.into(), value.clone());
        Some(value)
    }

    fn record(&mut self, key: &str, value: impl fmt::Display) {
        self.effective.insert(key.into(), value.to_string());
    }

    fn required(&mut self, key: &str) -> Result<String, CliError> {
        self.text(key).ok_or_else(|| self.bad(key, "is required"))
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.text(key) {
            None => Ok(None),
            Some(v) => match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.bad(key, format!("expected a finite number, got `{v}`"))),
            },
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?.ok_or_else(|| self.bad(key, "is required"))
    }

    fn usize(&mut self, key: &str) -> Result<usize, CliError> {
        let v = self.required(key)?;
        v.trim()
            .parse::<usize>()
            .map_err(|_| self.bad(key, format!("expected a non-negative integer, got `{v}`")))
    }

    fn u64(&mut self, key: &str) -> Result<u64, CliError> {
        let v = self.required(key)?;
        v.trim()
            .parse::<u64>()
            .map_err(|_| self.bad(key, format!("expected a non-negative integer, got `{v}`")))
    }

    fn bool(&mut self, key: &str) -> Result<bool, CliError> {
        let v = self.required(key)?;
        match v.trim() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(self.bad(key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn list_f64(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.text(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.bad(key, format!("expected comma-separated numbers, got `{v}`"))),
        }
    }

    fn list_usize(&mut self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.text(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<usize>().ok())
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.bad(key, format!("expected comma-separated integers, got `{v}`"))),
        }
    }

    fn core(&self, key: &str, e: innokde::Error) -> CliError {
        CliError::Core {
            key: key.into(),
            source: e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Plain,
    Truncated,
    Oracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Truncated => "truncated",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSection {
    pub drift: DriftSpec,
    pub noise: NoiseSpec,
    pub x0: Vec<f64>,
    pub burn_in: usize,
}

#[derive(Debug, Clone)]
pub struct EstimatorSection {
    pub kernel_f: KernelSpec,
    pub kernel_p: KernelSpec,
    pub beta: f64,
    pub alpha: f64,
    pub mode: Mode,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSection {
    pub n: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub y_points: Vec<Vec<f64>>,
    pub checkpoints: Vec<usize>,
    pub tol: f64,
    pub max_iter: usize,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    /// Absent only for `rates` with an explicit tail.
    pub model: Option<ModelSection>,
    pub estimators: EstimatorSection,
    pub schedule: RateSchedule,
    pub experiment: ExperimentSection,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub record_timing: bool,
    /// Effective inputs, defaults filled, re-runnable as a config file.
    pub effective: BTreeMap<String, String>,
}

fn kernel(r: &mut Reader, key: &str, d: usize) -> Result<KernelSpec, CliError> {
    let name = r.required(key)?;
    let family: KernelFamily = name.parse().map_err(|e| r.core(key, e))?;
    KernelSpec::new(family, d).map_err(|e| r.core(key, e))
}

fn read_model(r: &mut Reader, d: usize, need: bool) -> Result<Option<ModelSection>, CliError> {
    if !need && r.raw.explicit("model.drift").is_none() && r.raw.explicit("model.noise").is_none() {
        return Ok(None);
    }
    let drift_name = r.required("model.drift")?;
    let drift = match drift_name.as_str() {
        "zero" => DriftSpec::zero(d),
        "linear" => {
            let theta = r.list_f64("model.theta")?.unwrap_or_default();
            match theta.len() {
                1 => DriftSpec::linear_scalar(theta[0], d),
                k if k == d * d => DriftSpec::linear(theta, d),
                k => return Err(r.bad("model.theta", format!("expected 1 or d*d = {} values, got {k}", d * d))),
            }
        }
        "tanh" => {
            let scale = r.f64("model.scale")?;
            let shift = r.f64("model.shift")?;
            DriftSpec::tanh_affine(scale, shift, d)
        }
        "sine" => {
            let amplitude = r.f64("model.amplitude")?;
            DriftSpec::bounded_sine(amplitude, d)
        }
        other => {
            return Err(r.bad(
                "model.drift",
                format!("unknown drift `{other}` (expected zero, linear, tanh or sine)"),
            ))
        }
    }
    .map_err(|e| r.core("model.drift", e))?;

    let noise_name = r.required("model.noise")?;
    let noise = match noise_name.as_str() {
        "gaussian" => {
            let sigma = r.f64("model.sigma")?;
            NoiseSpec::gaussian_isotropic(sigma, d).map_err(|e| r.core("model.sigma", e))?
        }
        "laplace" => {
            let rate = r.f64("model.rate")?;
            NoiseSpec::laplace(rate, d).map_err(|e| r.core("model.rate", e))?
        }
        "student_t" => {
            let dof = r.f64("model.dof")?;
            NoiseSpec::student_t(dof, d).map_err(|e| r.core("model.dof", e))?
        }
        other => {
            return Err(r.bad(
                "model.noise",
                format!("unknown noise `{other}` (expected gaussian, laplace or student_t)"),
            ))
        }
    };
    let noise = match r.f64_opt("model.moment")? {
        Some(m) => noise.with_moment_order(m).map_err(|e| r.core("model.moment", e))?,
        None => noise,
    };

    let x0 = r.list_f64("model.x0")?.unwrap_or_default();
    let x0 = match x0.len() {
        1 => vec![x0[0]; d],
        k if k == d => x0,
        k => return Err(r.bad("model.x0", format!("expected 1 or d = {d} values, got {k}"))),
    };
    let burn_in = r.usize("model.burn_in")?;
    Ok(Some(ModelSection {
        drift,
        noise,
        x0,
        burn_in,
    }))
}

fn read_tail(r: &mut Reader, model: Option<&ModelSection>) -> Result<TailInfo, CliError> {
    let tail = r.required("schedule.tail")?;
    let c = r.f64_opt("schedule.c")?;
    let tail = match tail.as_str() {
        "auto" => {
            let Some(m) = model else {
                return Err(r.bad("schedule.tail", "`auto` needs model.drift and model.noise"));
            };
            let info = TailInfo::from_noise(&m.noise, m.drift.r_f(), c, None).map_err(|e| r.core("model.noise", e))?;
            match info {
                TailInfo::Exponential { delta, m, a } => TailInfo::Exponential {
                    delta,
                    m,
                    a: r.f64_opt("schedule.a")?.unwrap_or(a),
                },
                other => other,
            }
        }
        "polynomial" => TailInfo::Polynomial {
            delta: r.f64("schedule.delta")?,
            m: r.f64("schedule.m")?,
        },
        "exponential" => {
            let delta = r.f64("schedule.delta")?;
            let m = r.f64("schedule.m")?;
            let a = r.f64_opt("schedule.a")?.unwrap_or(0.9 * m);
            TailInfo::Exponential { delta, m, a }
        }
        "gaussian" => {
            let lambda_min = match r.f64_opt("schedule.lambda_min")? {
                Some(l) => l,
                None => model.map(|m| m.noise.lambda_min()).unwrap_or(1.0),
            };
            let r_f = match r.f64_opt("schedule.r_f")? {
                Some(v) => v,
                None => model.map(|m| m.drift.r_f()).unwrap_or(0.0),
            };
            TailInfo::Gaussian {
                lambda_min,
                c: c.unwrap_or(0.9),
                r_f,
            }
        }
        other => {
            return Err(r.bad(
                "schedule.tail",
                format!("unknown tail `{other}` (expected auto, polynomial, exponential or gaussian)"),
            ))
        }
    };
    match tail {
        TailInfo::Polynomial { delta, m } => {
            r.record("schedule.delta", delta);
            r.record("schedule.m", m);
        }
        TailInfo::Exponential { delta, m, a } => {
            r.record("schedule.delta", delta);
            r.record("schedule.m", m);
            r.record("schedule.a", a);
        }
        TailInfo::Gaussian { lambda_min, c, r_f } => {
            r.record("schedule.lambda_min", lambda_min);
            r.record("schedule.c", c);
            r.record("schedule.r_f", r_f);
        }
    }
    Ok(tail)
}

/// Maps a schedule-construction error onto the key that caused it.
fn schedule_err(r: &Reader, e: innokde::Error) -> CliError {
    let key = match &e {
        innokde::Error::OutOfRange { name, .. } => match *name {
            "beta" => "estimators.beta",
            "c" => "schedule.c",
            "r_f" => "schedule.r_f",
            "lambda_min" => "schedule.lambda_min",
            "eta" => "schedule.eta",
            "A" => "schedule.amplitude",
            "R" => "schedule.r",
            _ => "schedule.tail",
        },
        _ => "schedule.tail",
    };
    r.core(key, e)
}

fn read_schedule(r: &mut Reader, tail: TailInfo, d: usize, mode: Mode) -> Result<RateSchedule, CliError> {
    let beta = r.f64_opt("estimators.beta")?;
    let mut s = match (mode, tail) {
        (Mode::Truncated, TailInfo::Polynomial { delta, m }) => truncated_schedule(delta, m, d, beta),
        (Mode::Truncated, _) => {
            return Err(r.bad("estimators.mode", "truncated residuals need a polynomial tail"));
        }
        _ => recommend_schedule(&tail, d, beta),
    }
    .map_err(|e| schedule_err(r, e))?;
    if let Some(eta) = r.f64_opt("schedule.eta")? {
        s = RateSchedule::custom(tail, d, s.beta, eta, s.v_form, s.truncated).map_err(|e| schedule_err(r, e))?;
    }
    if let Some(a) = r.f64_opt("schedule.amplitude")? {
        s = s.with_amplitude(a).map_err(|e| schedule_err(r, e))?;
    }
    if let Some(radius) = r.f64_opt("schedule.r")? {
        s = s.with_r(radius).map_err(|e| schedule_err(r, e))?;
    }
    r.record("estimators.beta", s.beta);
    Ok(s)
}

/// Default window of the invariant law: the noise window widened by the
/// drift bound and the contraction factor.
fn stationary_window(m: &ModelSection, step: f64) -> innokde::Result<GridSpec> {
    let half = (m.drift.c_f() + 8.0 * m.noise.scale()) / (1.0 - m.drift.r_f());
    let half = (half / step).ceil() * step;
    GridSpec::cube(-half, half, step, m.noise.dimension())
}

fn read_grid(r: &mut Reader, model: Option<&ModelSection>, d: usize, command: Command) -> Result<Option<GridSpec>, CliError> {
    let key = "estimators.grid";
    let step = if d == 1 { 0.01 } else { 0.1 };
    let grid = match r.list_f64(key)? {
        Some(v) if v.len() == 3 => GridSpec::cube(v[0], v[1], v[2], d).map_err(|e| r.core(key, e))?,
        Some(v) => return Err(r.bad(key, format!("expected `lo,hi,step`, got {} values", v.len()))),
        None => match model {
            Some(m) if command == Command::Stationary => stationary_window(m, step).map_err(|e| r.core(key, e))?,
            Some(m) => default_window(&m.noise, step).map_err(|e| r.core(key, e))?,
            None => return Ok(None),
        },
    };
    r.record(key, format!("{},{},{}", grid.lo()[0], grid.hi()[0], grid.step()[0]));
    Ok(Some(grid))
}

fn read_points(r: &mut Reader, d: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let key = "experiment.y_points";
    let Some(text) = r.text(key) else {
        r.record(key, vec!["0"; d].join(","));
        return Ok(vec![vec![0.0; d]]);
    };
    let mut points = Vec::new();
    for chunk in text.split(';') {
        let p: Option<Vec<f64>> = chunk
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        match p {
            Some(p) if p.len() == d => points.push(p),
            _ => {
                return Err(r.bad(
                    key,
                    format!("expected `;`-separated points of {d} comma-separated coordinates, got `{chunk}`"),
                ))
            }
        }
    }
    Ok(points)
}

/// Builds a validated [`RunConfig`] for a subcommand. Only `rates` may run
/// without a model section.
pub fn resolve(raw: &RawConfig, command: Command) -> Result<RunConfig, CliError> {
    let need_model = command != Command::Rates;
    let mut r = Reader::new(raw);
    let d = r.usize("model.d")?;
    if d == 0 {
        return Err(r.bad("model.d", "violates d >= 1"));
    }
    let model = read_model(&mut r, d, need_model)?;

    let mode = match r.required("estimators.mode")?.as_str() {
        "plain" => Mode::Plain,
        "truncated" => Mode::Truncated,
        "oracle" => Mode::Oracle,
        other => {
            return Err(r.bad(
                "estimators.mode",
                format!("unknown mode `{other}` (expected plain, truncated or oracle)"),
            ))
        }
    };
    let kernel_f = kernel(&mut r, "estimators.kernel_f", d)?;
    let kernel_p = kernel(&mut r, "estimators.kernel_p", d)?;

    let tail = read_tail(&mut r, model.as_ref())?;
    let schedule = read_schedule(&mut r, tail, d, mode)?;

    let alpha = match r.f64_opt("estimators.alpha")? {
        Some(a) => a,
        None => schedule.default_alpha(),
    };
    let inv_d = 1.0 / d as f64;
    if !(alpha > 0.0) {
        return Err(r.bad("estimators.alpha", format!("= {alpha} violates alpha > 0")));
    }
    if !(alpha < inv_d) {
        return Err(r.bad("estimators.alpha", format!("= {alpha} violates alpha < 1/d (1/d = {inv_d})")));
    }
    r.record("estimators.alpha", alpha);
    let grid = read_grid(&mut r, model.as_ref(), d, command)?;

    let n = r.usize("experiment.n")?;
    if n == 0 {
        return Err(r.bad("experiment.n", "violates n >= 1"));
    }
    let n_grid = r.list_usize("experiment.n_grid")?.unwrap_or_default();
    if n_grid.first() == Some(&0) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(r.bad("experiment.n_grid", "must be strictly increasing and positive"));
    }
    let replicates = r.usize("experiment.M")?;
    let y_points = read_points(&mut r, d)?;
    let checkpoints = match r.list_usize("experiment.checkpoints")? {
        Some(c) => c,
        None => vec![n],
    };
    if checkpoints.first() == Some(&0) || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(r.bad("experiment.checkpoints", "must be strictly increasing and positive"));
    }
    if checkpoints.last().is_some_and(|&c| c > n) {
        return Err(r.bad("experiment.checkpoints", format!("violates checkpoint <= experiment.n = {n}")));
    }
    r.record(
        "experiment.checkpoints",
        checkpoints.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    let tol = r.f64("experiment.tol")?;
    if !(tol > 0.0) {
        return Err(r.bad("experiment.tol", format!("= {tol} violates tol > 0")));
    }
    let max_iter = r.usize("experiment.max_iter")?;
    if max_iter == 0 {
        return Err(r.bad("experiment.max_iter", "violates max_iter >= 1"));
    }

    let out_dir = PathBuf::from(r.required("io.out_dir")?);
    let seed = r.u64("io.seed")?;
    let record_timing = r.bool("io.record_timing")?;

    let mut effective = r.effective;
    // outputs go there; it is not an input
    effective.remove("io.out_dir");
    Ok(RunConfig {
        d,
        model,
        estimators: EstimatorSection {
            kernel_f,
            kernel_p,
            beta: schedule.beta,
            alpha,
            mode,
            grid,
        },
        schedule,
        experiment: ExperimentSection {
            n,
            n_grid,
            replicates,
            y_points,
            checkpoints,
            tol,
            max_iter,
        },
        out_dir,
        seed,
        record_timing,
        effective,
    })
}

impl RunConfig {
    pub fn model(&self) -> &ModelSection {
        self.model.as_ref().expect("model section resolved for this subcommand")
    }

    /// Effective config in the input format, one key per line, sorted.
    pub fn canonical_text(&self) -> String {
        self.effective.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
