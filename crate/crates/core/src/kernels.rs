//! Compact-support product kernels.
//!
//! A [`KernelSpec`] is the product `K(u) = prod_j k(u_j)` of a one
//! dimensional polynomial kernel `k` supported on `[-1, 1]`. All constants
//! that the estimators and the CLT variance need are frozen at construction
//! from closed forms and audited numerically in the tests.

use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::validation::ValidationReport;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `3/4 (1 - t^2)`
    Epanechnikov,
    /// `35/32 (1 - t^2)^3`
    Triweight,
    /// `15/16 (1 - t^2)^2`, also known as biweight.
    Quartic,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Triweight => "triweight",
            KernelFamily::Quartic => "quartic",
        }
    }

    #[inline]
    fn base(self, t: f64) -> f64 {
        if t.abs() > 1.0 {
            return 0.0;
        }
        self.profile(1.0 - t * t)
    }

    #[inline(always)]
    fn profile(self, s: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 0.75 * s,
            KernelFamily::Triweight => (35.0 / 32.0) * s * s * s,
            KernelFamily::Quartic => (15.0 / 16.0) * s * s,
        }
    }

    /// `int k^2` of the one dimensional factor.
    fn base_l2_sq(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 3.0 / 5.0,
            KernelFamily::Triweight => 350.0 / 429.0,
            KernelFamily::Quartic => 5.0 / 7.0,
        }
    }

    fn base_sup(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 0.75,
            KernelFamily::Triweight => 35.0 / 32.0,
            KernelFamily::Quartic => 15.0 / 16.0,
        }
    }

    /// `sup |k'|` of the one dimensional factor.
    fn base_lipschitz(self) -> f64 {
        match self {
            // |k'(t)| = 3/2 |t|
            KernelFamily::Epanechnikov => 1.5,
            // 105/16 t (1-t^2)^2, maximal at t = 1/sqrt(5)
            KernelFamily::Triweight => 105.0 / 16.0 * 16.0 / (25.0 * 5f64.sqrt()),
            // 15/4 t (1-t^2), maximal at t = 1/sqrt(3)
            KernelFamily::Quartic => 5.0 / (2.0 * 3f64.sqrt()),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "triweight" => Ok(KernelFamily::Triweight),
            "quartic" | "biweight" => Ok(KernelFamily::Quartic),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel '{other}' (expected epanechnikov, triweight or quartic)"
            ))),
        }
    }
}

/// One-dimensional factor of a family as a zero-sized type, for loops that
/// dispatch on the family once instead of per term. `at` is branch-free:
/// `1 - t^2` is clamped at zero outside the support.
pub(crate) trait Profile: Copy {
    fn at(self, t: f64) -> f64;
}

macro_rules! profile {
    ($name:ident, $family:ident) => {
        #[derive(Clone, Copy)]
        pub(crate) struct $name;

        impl Profile for $name {
            #[inline(always)]
            fn at(self, t: f64) -> f64 {
                KernelFamily::$family.profile((1.0 - t * t).max(0.0))
            }
        }
    };
}

profile!(EpanechnikovProfile, Epanechnikov);
profile!(TriweightProfile, Triweight);
profile!(QuarticProfile, Quartic);

/// `K(scale * (a - b))` for a fixed dimension without early exit.
#[inline(always)]
pub(crate) fn product_scaled<P: Profile, const D: usize>(profile: P, a: &[f64], b: &[f64; D], scale: f64) -> f64 {
    let mut k = 1.0;
    for j in 0..D {
        k *= profile.at(scale * (a[j] - b[j]));
    }
    k
}

/// Anything that can be audited against the kernel requirements.
pub trait Kernel {
    fn dimension(&self) -> usize;
    fn value(&self, u: &[f64]) -> f64;
    fn lipschitz_const(&self) -> f64;
    fn sup_value(&self) -> f64;
    fn support_radius(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    dimension: usize,
    l2_norm_sq: f64,
    lipschitz_const: f64,
    sup_value: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("kernel dimension must be positive".into()));
        }
        let d = dimension as i32;
        let sup1 = family.base_sup();
        Ok(Self {
            family,
            dimension,
            l2_norm_sq: family.base_l2_sq().powi(d),
            // |K(u) - K(v)| <= L sup^(d-1) ||u - v||_1 <= L sup^(d-1) sqrt(d) ||u - v||_2
            lipschitz_const: family.base_lipschitz() * sup1.powi(d - 1) * (dimension as f64).sqrt(),
            sup_value: sup1.powi(d),
        })
    }

    pub fn epanechnikov(dimension: usize) -> Result<Self> {
        Self::new(KernelFamily::Epanechnikov, dimension)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        self.family.name()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Support half-width per coordinate in the scaled argument.
    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// `int K^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    pub fn sup_value(&self) -> f64 {
        self.sup_value
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dimension, u.len())?;
        Ok(self.value(u))
    }

    /// Kernel value without the dimension check.
    #[inline]
    pub fn value(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dimension);
        let mut k = 1.0;
        for &t in u {
            k *= self.family.base(t);
            if k == 0.0 {
                return 0.0;
            }
        }
        k
    }

    /// `K(scale * (a - b))`, computed without materializing the argument.
    #[inline]
    pub fn value_scaled(&self, a: &[f64], b: &[f64], scale: f64) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let mut k = 1.0;
        for (x, y) in a.iter().zip(b) {
            k *= self.family.base(scale * (x - y));
            if k == 0.0 {
                return 0.0;
            }
        }
        k
    }
}

impl Kernel for KernelSpec {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn value(&self, u: &[f64]) -> f64 {
        KernelSpec::value(self, u)
    }
    fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }
    fn sup_value(&self) -> f64 {
        self.sup_value
    }
}

/// Numeric audit of nonnegativity, normalization, Lipschitz continuity,
/// boundedness and compact support.
pub fn validate_a5<K: Kernel>(kernel: &K, sample_count: usize, seed: u64) -> Result<ValidationReport> {
    if sample_count < 1000 {
        return Err(Error::out_of_range("sample_count", sample_count as f64, ">= 1000"));
    }
    let d = kernel.dimension();
    let support = kernel.support_radius();
    let mut rng = rng::stream(seed, rng::streams::AUDIT);
    let mut report = ValidationReport::new("kernel");

    let mut negativity: f64 = 0.0;
    let mut leaks = 0usize;
    let mut sup_seen: f64 = 0.0;
    let observe = |u: &[f64], k: f64, negativity: &mut f64, leaks: &mut usize, sup_seen: &mut f64| {
        *negativity = negativity.max(-k);
        *sup_seen = sup_seen.max(k);
        if u.iter().any(|t| t.abs() > support) && k != 0.0 {
            *leaks += 1;
        }
    };

    let integral = if d <= 2 {
        // trapezoid rule on [-1, 1]^d, step 1e-3; the nodes include the origin
        let per_axis = 2001usize;
        let node = |k: usize| (k as f64 - 1000.0) / 1000.0 * support;
        let h = support / 1000.0;
        let weight = |k: usize| if k == 0 || k == per_axis - 1 { 0.5 } else { 1.0 };
        let mut total = 0.0;
        let mut u = vec![0.0; d];
        let cells = per_axis.pow(d as u32);
        for flat in 0..cells {
            let mut rem = flat;
            let mut w = 1.0;
            for coord in u.iter_mut() {
                let k = rem % per_axis;
                rem /= per_axis;
                *coord = node(k);
                w *= weight(k);
            }
            let k = kernel.value(&u);
            observe(&u, k, &mut negativity, &mut leaks, &mut sup_seen);
            total += w * k;
        }
        total * h.powi(d as i32)
    } else {
        let vol = (2.0 * support).powi(d as i32);
        let mut u = vec![0.0; d];
        let mut total = 0.0;
        let draws = sample_count.max(200_000);
        for _ in 0..draws {
            for c in u.iter_mut() {
                *c = rng.random_range(-support..=support);
            }
            total += kernel.value(&u);
        }
        vol * total / draws as f64
    };

    let mut lip_ratio: f64 = 0.0;
    let mut u = vec![0.0; d];
    let mut v = vec![0.0; d];
    for _ in 0..sample_count {
        for (a, b) in u.iter_mut().zip(v.iter_mut()) {
            *a = rng.random_range(-1.5 * support..1.5 * support);
            *b = *a + rng.random_range(-0.05..0.05);
        }
        let ku = kernel.value(&u);
        let kv = kernel.value(&v);
        observe(&u, ku, &mut negativity, &mut leaks, &mut sup_seen);
        observe(&v, kv, &mut negativity, &mut leaks, &mut sup_seen);
        let dist = crate::numeric::dist2(&u, &v);
        if dist > 0.0 {
            lip_ratio = lip_ratio.max((ku - kv).abs() / dist);
        }
    }

    report.push("negativity", negativity <= 0.0, negativity, "max of -K(u) over samples");
    report.push(
        "integral",
        (integral - 1.0).abs() <= 1e-6,
        integral,
        "quadrature of K over its support",
    );
    report.push(
        "lipschitz_ratio",
        lip_ratio <= kernel.lipschitz_const() * (1.0 + 1e-9),
        lip_ratio,
        format!("declared constant {}", kernel.lipschitz_const()),
    );
    report.push(
        "bounded",
        sup_seen <= kernel.sup_value() * (1.0 + 1e-12),
        sup_seen,
        format!("declared sup {}", kernel.sup_value()),
    );
    report.push("support_leaks", leaks == 0, leaks as f64, "nonzero values outside the support");
    Ok(report)
}
