//! Small statistics toolkit for the studies: log-log slopes, moments,
//! correlations and the one-sample Kolmogorov–Smirnov distance.

use statrs::distribution::{ContinuousCDF, Normal};

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_slope(&lx, &ly)
}

pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

pub fn normal_cdf(x: f64, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("positive sd").cdf(x)
}

/// `sup_x |F_M(x) - Phi(x / sd)|` for a centered normal reference.
pub fn ks_normal(sample: &[f64], sd: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let reference = Normal::new(0.0, sd).expect("positive sd");
    s.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = reference.cdf(x);
            (f - k as f64 / m).max((k + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level 1%: `1.63 / sqrt(M)`.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

/// Delete-a-block jackknife standard error of the mean of a (possibly
/// dependent) series.
pub fn block_jackknife_se(x: &[f64], blocks: usize) -> f64 {
    let n = x.len();
    let b = blocks.min(n).max(2);
    let size = n / b;
    let total: f64 = x[..b * size].iter().sum();
    let len = (b * size) as f64;
    let leave_out: Vec<f64> = (0..b)
        .map(|k| {
            let s: f64 = x[k * size..(k + 1) * size].iter().sum();
            (total - s) / (len - size as f64)
        })
        .collect();
    let m = mean(&leave_out);
    let bf = b as f64;
    ((bf - 1.0) / bf * leave_out.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sqrt()
}
