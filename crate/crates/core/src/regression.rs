//! Recursive Nadaraya–Watson estimation of the drift.
//!
//! `f_n(x) = sum_{i<n} i^{bd} K(i^b (X_i - x)) X_{i+1} / sum_{i<n} i^{bd} K(i^b (X_i - x))`,
//! and `0` where the denominator vanishes. Sample `i` only influences points
//! within infinity-norm distance `i^{-b}` of `X_i`, which the
//! [`SupportIndex`] exploits.

use crate::error::{check_dim, Error, Result};
use crate::index::SupportIndex;
use crate::kernels::{product_scaled, EpanechnikovProfile, KernelFamily, KernelSpec, Profile, QuarticProfile, TriweightProfile};
use crate::model::DriftSpec;
use crate::numeric::{dist2, CompensatedSum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest grid accepted by [`RegressionEstimator::sup_error_on_ball`].
pub const MAX_GRID_NODES: u128 = 10_000_000;

const LANES: usize = 4;

pub const SNAPSHOT_FORMAT: &str = "innokde-regression";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RegressionEstimator {
    kernel: KernelSpec,
    beta: f64,
    dimension: usize,
    predictors: Vec<f64>,
    responses: Vec<f64>,
    weights: Vec<f64>,
    scales: Vec<f64>,
    index: SupportIndex,
}

#[derive(Debug, Clone, Serialize)]
pub struct DilatedSupError {
    pub n: usize,
    pub v_n: f64,
    pub grid_points: usize,
    pub sup_error: f64,
    /// `min H_{n-1}(x) / (n m_n)` over the grid (`m_n = 1` when not supplied).
    pub min_denominator_scaled: f64,
}

impl RegressionEstimator {
    pub fn new(kernel: KernelSpec, beta: f64, dimension: usize) -> Result<Self> {
        check_dim(dimension, kernel.dimension())?;
        let limit = 1.0 / dimension as f64;
        if !(beta > 0.0 && beta < limit) {
            return Err(Error::out_of_range("beta", beta, format!("in (0, {limit})")));
        }
        Ok(Self {
            kernel,
            beta,
            dimension,
            predictors: Vec::new(),
            responses: Vec::new(),
            weights: Vec::new(),
            scales: Vec::new(),
            index: SupportIndex::with_payload(dimension, kernel.support_radius(), 2 * dimension + 2),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of stored pairs.
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    /// `i^{bd}` for stored `i` (1-based).
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    /// Infinity-norm support radius `support * i^{-b}` of sample `i`.
    pub fn support_radius(&self, i: usize) -> f64 {
        self.kernel.support_radius() / self.scales[i - 1]
    }

    pub fn predictor(&self, i: usize) -> &[f64] {
        &self.predictors[(i - 1) * self.dimension..i * self.dimension]
    }

    pub fn response(&self, i: usize) -> &[f64] {
        &self.responses[(i - 1) * self.dimension..i * self.dimension]
    }

    /// Stores the pair `(X_i, X_{i+1})`; `i` must be `count + 1`.
    pub fn update(&mut self, i: usize, x_i: &[f64], x_next: &[f64]) -> Result<()> {
        let expected = self.count() + 1;
        if i != expected {
            return Err(Error::OutOfOrder { expected, got: i });
        }
        check_dim(self.dimension, x_i.len())?;
        check_dim(self.dimension, x_next.len())?;
        if i > u32::MAX as usize {
            return Err(Error::ResourceLimit {
                nodes: i as u128,
                limit: u32::MAX as u128,
            });
        }
        let fi = i as f64;
        let scale = fi.powf(self.beta);
        self.weights.push(fi.powf(self.beta * self.dimension as f64));
        self.scales.push(scale);
        self.predictors.extend_from_slice(x_i);
        self.responses.extend_from_slice(x_next);
        // payload layout: predictor, scale, weight, response
        let mut payload = Vec::with_capacity(2 * self.dimension + 2);
        payload.extend_from_slice(x_i);
        payload.push(scale);
        payload.push(*self.weights.last().unwrap());
        payload.extend_from_slice(x_next);
        self.index
            .insert_with((i - 1) as u32, x_i, self.kernel.support_radius() / scale, &payload);
        Ok(())
    }

    #[inline]
    fn term(&self, k: usize, x: &[f64]) -> f64 {
        let d = self.dimension;
        let kv = self.kernel.value_scaled(&self.predictors[k * d..(k + 1) * d], x, self.scales[k]);
        if kv > 0.0 {
            self.weights[k] * kv
        } else {
            0.0
        }
    }

    fn accumulate(&self, x: &[f64], out: &mut [f64], brute: bool) -> f64 {
        match self.kernel.family() {
            KernelFamily::Epanechnikov => self.accumulate_in(EpanechnikovProfile, x, out, brute),
            KernelFamily::Triweight => self.accumulate_in(TriweightProfile, x, out, brute),
            KernelFamily::Quartic => self.accumulate_in(QuarticProfile, x, out, brute),
        }
    }

    fn accumulate_in<P: Profile>(&self, profile: P, x: &[f64], out: &mut [f64], brute: bool) -> f64 {
        match self.dimension {
            1 => self.accumulate_fixed::<P, 1>(profile, x, out, brute),
            2 => self.accumulate_fixed::<P, 2>(profile, x, out, brute),
            3 => self.accumulate_fixed::<P, 3>(profile, x, out, brute),
            _ => self.accumulate_dyn(x, out, brute),
        }
    }

    /// Kernel sums with the dimension known at compile time, so the inner
    /// loops unroll and the accumulators live on the stack.
    fn accumulate_fixed<P: Profile, const D: usize>(&self, profile: P, x: &[f64], out: &mut [f64], brute: bool) -> f64 {
        let x: &[f64; D] = x.try_into().expect("dimension checked");
        let mut den = CompensatedSum::new();
        let mut num = [CompensatedSum::new(); D];
        // Hull of the contributing responses; the quotient is clamped into it
        // so rounding cannot push an average outside its inputs.
        let mut hull = [(f64::INFINITY, f64::NEG_INFINITY); D];
        // Zero weights are added too: they leave a compensated sum exactly
        // unchanged and the hull update is masked, so the loop has no
        // data-dependent branch.
        #[inline(always)]
        fn add<const D: usize>(
            den: &mut CompensatedSum,
            num: &mut [CompensatedSum; D],
            hull: &mut [(f64, f64); D],
            w: f64,
            ys: &[f64],
        ) {
            den.add(w);
            let live = w > 0.0;
            for j in 0..D {
                num[j].add(w * ys[j]);
                // plain compare-selects; f64::min's NaN handling is slower here
                let lo = if live { ys[j] } else { f64::INFINITY };
                let hi = if live { ys[j] } else { f64::NEG_INFINITY };
                let b = &mut hull[j];
                b.0 = if lo < b.0 { lo } else { b.0 };
                b.1 = if hi > b.1 { hi } else { b.1 };
            }
        }
        if brute {
            for k in 0..self.count() {
                let w = self.term(k, x);
                if w > 0.0 {
                    add(&mut den, &mut num, &mut hull, w, &self.responses[k * D..(k + 1) * D]);
                }
            }
        } else {
            // Four interleaved accumulators give the adds independent
            // dependency chains; lanes are merged in a fixed order.
            let stride = 2 * D + 2;
            let mut lanes = [(CompensatedSum::new(), [CompensatedSum::new(); D], [(f64::INFINITY, f64::NEG_INFINITY); D]); LANES];
            self.index.for_each_cell(x, |_, data| {
                let mut chunks = data.chunks_exact(LANES * stride);
                for chunk in &mut chunks {
                    for (l, lane) in lanes.iter_mut().enumerate() {
                        let p = &chunk[l * stride..(l + 1) * stride];
                        let kv = product_scaled(profile, &p[..D], x, p[D]);
                        add(&mut lane.0, &mut lane.1, &mut lane.2, p[D + 1] * kv, &p[D + 2..]);
                    }
                }
                let lane = &mut lanes[0];
                for p in chunks.remainder().chunks_exact(stride) {
                    let kv = product_scaled(profile, &p[..D], x, p[D]);
                    add(&mut lane.0, &mut lane.1, &mut lane.2, p[D + 1] * kv, &p[D + 2..]);
                }
            });
            for (lane_den, lane_num, lane_hull) in &lanes {
                den.merge(lane_den);
                for j in 0..D {
                    num[j].merge(&lane_num[j]);
                    hull[j] = (hull[j].0.min(lane_hull[j].0), hull[j].1.max(lane_hull[j].1));
                }
            }
        }
        finish(den.value(), &num, &hull, out)
    }

    fn accumulate_dyn(&self, x: &[f64], out: &mut [f64], brute: bool) -> f64 {
        let d = self.dimension;
        let mut den = CompensatedSum::new();
        let mut num = vec![CompensatedSum::new(); d];
        let mut hull = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
        let mut add = |w: f64, ys: &[f64]| {
            den.add(w);
            for ((s, b), y) in num.iter_mut().zip(hull.iter_mut()).zip(ys) {
                s.add(w * y);
                *b = (b.0.min(*y), b.1.max(*y));
            }
        };
        if brute {
            for k in 0..self.count() {
                let w = self.term(k, x);
                if w > 0.0 {
                    add(w, &self.responses[k * d..(k + 1) * d]);
                }
            }
        } else {
            self.index.for_each_entry(x, |_, p| {
                let kv = self.kernel.value_scaled(&p[..d], x, p[d]);
                if kv > 0.0 {
                    add(p[d + 1] * kv, &p[d + 2..]);
                }
            });
        }
        finish(den.value(), &num, &hull, out)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, x.len())?;
        let mut out = vec![0.0; self.dimension];
        self.accumulate(x, &mut out, false);
        Ok(out)
    }

    /// Writes `f_n(x)` into `out` and returns the denominator `H(x)`.
    #[inline]
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.accumulate(x, out, false)
    }

    /// Exhaustive pass over every stored sample, no index.
    pub fn evaluate_brute_force(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dimension, x.len())?;
        let mut out = vec![0.0; self.dimension];
        self.accumulate(x, &mut out, true);
        Ok(out)
    }

    pub fn evaluate_brute_force_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.accumulate(x, out, true)
    }

    /// `H(x) = sum_i i^{bd} K(i^b (X_i - x))`.
    pub fn denominator(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        let mut h = CompensatedSum::new();
        self.index.for_each_candidate(x, |id| h.add(self.term(id as usize, x)));
        Ok(h.value())
    }

    /// Indices `i` (1-based, ascending) with `||X_i - x||_inf <= i^{-b}`.
    pub fn candidates(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dimension, x.len())?;
        let d = self.dimension;
        let mut out = Vec::new();
        self.index.for_each_candidate(x, |id| {
            let k = id as usize;
            let p = &self.predictors[k * d..(k + 1) * d];
            let dist = p.iter().zip(x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if dist <= self.kernel.support_radius() / self.scales[k] {
                out.push(k + 1);
            }
        });
        out.sort_unstable();
        Ok(out)
    }

    /// Same set as [`Self::candidates`] by exhaustive scan.
    pub fn candidates_brute_force(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dimension, x.len())?;
        Ok((1..=self.count())
            .filter(|&i| {
                let dist = self
                    .predictor(i)
                    .iter()
                    .zip(x)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                dist <= self.support_radius(i)
            })
            .collect())
    }

    /// Supremum of `||f_n - f||` over a grid of `{||x||_inf <= v}`. The grid
    /// has `ceil(2v / step) + 1` nodes per axis including both endpoints;
    /// `step` defaults to `v / 200`.
    pub fn sup_error_on_ball(
        &self,
        drift: &DriftSpec,
        v: f64,
        grid_step: Option<f64>,
        m_n: Option<f64>,
    ) -> Result<DilatedSupError> {
        check_dim(self.dimension, drift.dimension())?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::out_of_range("v", v, "> 0"));
        }
        let step = grid_step.unwrap_or(v / 200.0);
        if !(step > 0.0) {
            return Err(Error::out_of_range("grid_step", step, "> 0"));
        }
        let d = self.dimension;
        if d > 2 {
            return Err(Error::Precondition(format!(
                "grid enumeration of the ball is limited to d <= 2 (got d = {d})"
            )));
        }
        let per_axis_f = (2.0 * v / step).ceil() + 1.0;
        let nodes = (per_axis_f as u128).saturating_pow(d as u32);
        if !per_axis_f.is_finite() || nodes > MAX_GRID_NODES {
            return Err(Error::ResourceLimit {
                nodes,
                limit: MAX_GRID_NODES,
            });
        }
        let per_axis = per_axis_f as usize;
        let h = 2.0 * v / (per_axis - 1) as f64;
        let coord = |k: usize| if k + 1 == per_axis { v } else { -v + k as f64 * h };
        let n = self.count() + 1;
        let m_n = m_n.unwrap_or(1.0);
        let (sup, min_den) = (0..nodes as usize)
            .into_par_iter()
            .map_init(
                || (vec![0.0; d], vec![0.0; d], vec![0.0; d]),
                |(x, fh, f), flat| {
                    let mut rem = flat;
                    for c in x.iter_mut() {
                        *c = coord(rem % per_axis);
                        rem /= per_axis;
                    }
                    let den = self.evaluate_into(x, fh);
                    drift.eval_into(x, f);
                    (dist2(fh, f), den)
                },
            )
            .reduce(|| (0.0f64, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
        Ok(DilatedSupError {
            n,
            v_n: v,
            grid_points: nodes as usize,
            sup_error: sup,
            min_denominator_scaled: min_den / (n as f64 * m_n),
        })
    }

    pub fn snapshot(&self) -> RegressionSnapshot {
        RegressionSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            kernel: self.kernel.name().to_string(),
            beta: self.beta,
            dimension: self.dimension,
            predictors: self.predictors.clone(),
            responses: self.responses.clone(),
        }
    }

    /// Rebuilds an estimator by replaying the stored pairs; weights and radii
    /// are recomputed, so the result is identical to the original.
    pub fn from_snapshot(s: &RegressionSnapshot) -> Result<Self> {
        if s.format != SNAPSHOT_FORMAT || s.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "expected {SNAPSHOT_FORMAT} v{SNAPSHOT_VERSION}, found {} v{}",
                s.format, s.version
            )));
        }
        let family: KernelFamily = s.kernel.parse().map_err(|_| Error::Snapshot(format!("unknown kernel {}", s.kernel)))?;
        let d = s.dimension;
        if d == 0 || s.predictors.len() != s.responses.len() || s.predictors.len() % d != 0 {
            return Err(Error::Snapshot("sample arrays are inconsistent with the dimension".into()));
        }
        let mut est = Self::new(KernelSpec::new(family, d)?, s.beta, d)?;
        for (k, (x, y)) in s.predictors.chunks_exact(d).zip(s.responses.chunks_exact(d)).enumerate() {
            est.update(k + 1, x, y)?;
        }
        Ok(est)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: RegressionSnapshot = serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        Self::from_snapshot(&s)
    }
}

/// JSON checkpoint: `predictors[k]` and `responses[k]` hold `X_{i}` and
/// `X_{i+1}` of sample `i = k + 1`, flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSnapshot {
    pub format: String,
    pub version: u32,
    pub kernel: String,
    pub beta: f64,
    pub dimension: usize,
    pub predictors: Vec<f64>,
    pub responses: Vec<f64>,
}

fn finish(h: f64, num: &[CompensatedSum], hull: &[(f64, f64)], out: &mut [f64]) -> f64 {
    if h > 0.0 {
        for ((o, s), b) in out.iter_mut().zip(num).zip(hull) {
            *o = (s.value() / h).clamp(b.0, b.1);
        }
    } else {
        out.fill(0.0);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, NoiseSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn epa(d: usize) -> KernelSpec {
        KernelSpec::epanechnikov(d).unwrap()
    }

    #[test]
    fn construction_ranges() {
        let e = RegressionEstimator::new(epa(1), 0.2, 1).unwrap();
        assert_eq!(e.evaluate(&[3.0]).unwrap(), vec![0.0]);
        assert!(RegressionEstimator::new(epa(1), 1.5, 1).is_err());
        assert!(RegressionEstimator::new(epa(2), 0.1, 2).is_ok());
        assert!(RegressionEstimator::new(epa(2), 0.5, 2).is_err());
    }

    #[test]
    fn weights_and_ordering() {
        let mut e = RegressionEstimator::new(epa(1), 0.25, 1).unwrap();
        e.update(1, &[0.0], &[1.0]).unwrap();
        assert_eq!(e.count(), 1);
        assert_eq!(e.weight(1), 1.0);
        assert!(matches!(e.update(5, &[0.0], &[0.0]), Err(Error::OutOfOrder { expected: 2, got: 5 })));
        for i in 2..=16 {
            e.update(i, &[0.0], &[0.0]).unwrap();
        }
        assert!((e.weight(16) - 2.0).abs() < 1e-15);
        for i in 2..=16 {
            assert!(e.support_radius(i) <= e.support_radius(i - 1));
        }
    }

    #[test]
    fn single_sample_and_far_queries() {
        let mut e = RegressionEstimator::new(epa(2), 0.2, 2).unwrap();
        e.update(1, &[0.3, -0.2], &[1.5, 2.5]).unwrap();
        assert_eq!(e.evaluate(&[0.3, -0.2]).unwrap(), vec![1.5, 2.5]);
        assert_eq!(e.denominator(&[0.3, -0.2]).unwrap(), 0.5625);
        assert_eq!(e.evaluate(&[5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(e.denominator(&[5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(
            RegressionEstimator::new(epa(1), 0.2, 1).unwrap().denominator(&[0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn denominator_tracks_stationary_density() {
        let drift = DriftSpec::zero(1).unwrap();
        let noise = NoiseSpec::gaussian_isotropic(1.0, 1).unwrap();
        let n = 100_000;
        let traj = simulate(&drift, &noise, n, &[0.0], 17, false).unwrap();
        let mut e = RegressionEstimator::new(epa(1), 0.2, 1).unwrap();
        for i in 1..n {
            e.update(i, traj.state(i), traj.state(i + 1)).unwrap();
        }
        let h = e.denominator(&[0.0]).unwrap() / n as f64;
        let phi0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((h / phi0 - 1.0).abs() < 0.1, "{h}");
    }

    fn random_estimator(d: usize, n: usize, seed: u64) -> RegressionEstimator {
        let mut rng = crate::rng::stream(seed, 9);
        let mut e = RegressionEstimator::new(epa(d), 0.2, d).unwrap();
        for i in 1..=n {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            e.update(i, &x, &y).unwrap();
        }
        e
    }

    #[test]
    fn indexed_matches_brute_force() {
        for d in 1..=3 {
            let e = random_estimator(d, 5000, d as u64);
            let mut rng = crate::rng::stream(40, d as u64);
            for _ in 0..200 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.5..3.5)).collect();
                let a = e.evaluate(&x).unwrap();
                let b = e.evaluate_brute_force(&x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() <= 1e-12 * v.abs().max(1e-300), "{u} vs {v}");
                }
                assert_eq!(e.candidates(&x).unwrap(), e.candidates_brute_force(&x).unwrap());
            }
        }
    }

    #[test]
    fn sup_error_fallbacks() {
        let e = RegressionEstimator::new(epa(1), 0.2, 1).unwrap();
        let zero = DriftSpec::zero(1).unwrap();
        assert_eq!(e.sup_error_on_ball(&zero, 1.0, None, None).unwrap().sup_error, 0.0);
        let lin = DriftSpec::linear_scalar(0.5, 1).unwrap();
        let r = e.sup_error_on_ball(&lin, 1.0, None, None).unwrap();
        assert_eq!(r.sup_error, 0.5);
        assert_eq!(r.grid_points, 401);
        assert_eq!(r.min_denominator_scaled, 0.0);
        let e2 = RegressionEstimator::new(epa(2), 0.2, 2).unwrap();
        let zero2 = DriftSpec::zero(2).unwrap();
        assert!(matches!(
            e2.sup_error_on_ball(&zero2, 1.0, Some(1e-4), None),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let e = random_estimator(2, 300, 5);
        let back = RegressionEstimator::from_json(&e.to_json()).unwrap();
        assert_eq!(back.snapshot(), e.snapshot());
        for x in [[0.1, 0.2], [-1.0, 2.0]] {
            assert_eq!(back.evaluate(&x).unwrap(), e.evaluate(&x).unwrap());
        }
        let mut s = e.snapshot();
        s.version = 99;
        assert!(matches!(RegressionEstimator::from_snapshot(&s), Err(Error::Snapshot(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_convex_hull_and_fallback(seed in 0u64..1000, qx in -4.0f64..4.0, qy in -4.0f64..4.0) {
            let e = random_estimator(2, 400, seed);
            let x = [qx, qy];
            let f = e.evaluate(&x).unwrap();
            let h = e.denominator(&x).unwrap();
            let support: Vec<usize> = e
                .candidates(&x)
                .unwrap()
                .into_iter()
                .filter(|&i| e.kernel().value_scaled(e.predictor(i), &x, (i as f64).powf(0.2)) > 0.0)
                .collect();
            if h > 0.0 {
                for j in 0..2 {
                    let lo = support.iter().map(|&i| e.response(i)[j]).fold(f64::INFINITY, f64::min);
                    let hi = support.iter().map(|&i| e.response(i)[j]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(f[j] >= lo - 1e-12 && f[j] <= hi + 1e-12);
                }
            } else {
                prop_assert!(support.is_empty());
                prop_assert_eq!(f, vec![0.0, 0.0]);
            }
        }

        #[test]
        fn prop_radii_shrink(beta in 0.01f64..0.99, n in 2usize..200) {
            let mut e = RegressionEstimator::new(epa(1), beta, 1).unwrap();
            for i in 1..=n {
                e.update(i, &[i as f64 * 0.01], &[0.0]).unwrap();
                prop_assert!(e.weight(i) > 0.0);
            }
            for i in 2..=n {
                prop_assert!(e.support_radius(i) <= e.support_radius(i - 1));
            }
        }
    }
}
