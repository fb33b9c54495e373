//! Closed-form regret bounds and the lower-bound alternative environment.
//!
//! The bound formulas assume `rho_j = 1/|S_1|` for every `j` in `S_1`; the
//! simulator supports general preference weights but the numbers here are
//! only meaningful under the uniform assumption. Logarithms are natural.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{ArmDistribution, InstanceSummary, ProblemInstance};
use crate::error::{Error, Result};

/// Symbols shared by the bound formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub k: usize,
    pub d: usize,
    pub s1_size: usize,
    pub s2_size: usize,
    pub l: f64,
    pub h: f64,
    pub horizon: f64,
    /// Exponent of the consistency condition, in `(0, 1)`.
    pub alpha: f64,
    /// Constant of the consistency condition.
    pub c_alpha: f64,
    /// `1 / (4 (K - 1) |S_1|)`; zero when `K = 1`.
    pub rho_lemma: f64,
}

impl BoundInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        d: usize,
        s1_size: usize,
        s2_size: usize,
        l: f64,
        h: f64,
        horizon: f64,
        alpha: f64,
        c_alpha: f64,
    ) -> Result<Self> {
        let invalid = |field: &str, message: String| Error::Validation {
            field: field.into(),
            message,
        };
        if s1_size + s2_size != k || s1_size == 0 {
            return Err(invalid(
                "s1_size",
                format!("|S_1| = {s1_size} and |S_2| = {s2_size} must partition K = {k}"),
            ));
        }
        if k >= 2 && !(l > 0.0 && l <= h) {
            return Err(invalid("l", format!("need 0 < l <= h, got l = {l}, h = {h}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("{alpha} is not in (0, 1)")));
        }
        if !(c_alpha > 0.0) {
            return Err(invalid("c_alpha", format!("{c_alpha} must be positive")));
        }
        if !(horizon >= 1.0) {
            return Err(invalid("horizon", format!("{horizon} must be at least 1")));
        }
        let rho_lemma = if k >= 2 {
            1.0 / (4.0 * (k - 1) as f64 * s1_size as f64)
        } else {
            0.0
        };
        Ok(Self {
            k,
            d,
            s1_size,
            s2_size,
            l,
            h,
            horizon,
            alpha,
            c_alpha,
            rho_lemma,
        })
    }

    pub fn from_summary(
        summary: &InstanceSummary,
        d: usize,
        horizon: f64,
        alpha: f64,
        c_alpha: f64,
    ) -> Result<Self> {
        Self::new(
            summary.k(),
            d,
            summary.s1.len(),
            summary.s2.len(),
            summary.l,
            summary.h,
            horizon,
            alpha,
            c_alpha,
        )
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    fn require_two_arms(&self) -> Result<()> {
        if self.k < 2 {
            Err(Error::TooFewArms)
        } else {
            Ok(())
        }
    }
}

/// `8 h |S_1| |S_2| / l²`, the coefficient of `ln T` in the upper bound.
pub fn theorem1_coefficient(b: &BoundInputs) -> f64 {
    if b.s2_size == 0 {
        return 0.0;
    }
    8.0 * b.h * b.s1_size as f64 * b.s2_size as f64 / (b.l * b.l)
}

/// Leading term of the upper bound at `T`; the additive constant is not
/// included.
pub fn theorem1_leading(b: &BoundInputs) -> f64 {
    theorem1_coefficient(b) * b.horizon.ln()
}

/// `(4 (K-1) |S_1|)² (8/l² + 1)²`.
pub fn lemma2_threshold(b: &BoundInputs) -> Result<f64> {
    b.require_two_arms()?;
    let a = 4.0 * (b.k - 1) as f64 * b.s1_size as f64;
    let c = 8.0 / (b.l * b.l) + 1.0;
    Ok(a * a * c * c)
}

/// Probability bound on `N_j^j(t) < t / (4 |S_1|)`. Refuses `t` below
/// [`lemma2_threshold`].
pub fn lemma2_tail(b: &BoundInputs, t: f64) -> Result<f64> {
    let threshold = lemma2_threshold(b)?;
    if t < threshold {
        return Err(Error::BelowThreshold { t, threshold });
    }
    let s1 = b.s1_size as f64;
    let rho = b.rho_lemma;
    let exp_term = (-t / (2.0 * s1 * s1)).exp();
    let poly_term = 2.0 * b.d as f64 * b.k as f64 * ((1.0 - rho) * t + 1.0) / (rho * t).powi(3);
    Ok(exp_term + poly_term)
}

/// Bound on `E[N_i^j(T)]` for `i != j` both in `S_1`. Independent of `T`.
pub fn lemma33_rhs(b: &BoundInputs) -> Result<f64> {
    b.require_two_arms()?;
    let s1 = b.s1_size as f64;
    let km1 = (b.k - 1) as f64;
    let d = b.d as f64;
    let l4 = b.l.powi(4);
    let inner = 1024.0 * km1 * km1 * s1 * s1 / l4
        + 2.0 * s1 * s1
        + 6.0 * d * b.k as f64 / b.rho_lemma.powi(3)
        + 3.0 * d;
    Ok(inner / s1)
}

/// `8 ln T / l² + 3d`, the bound on `E[Σ_{j∈S_1} N_i^j(T)]` for `i ∈ S_2`.
pub fn lemma34_rhs(b: &BoundInputs) -> f64 {
    8.0 * b.horizon.ln() / (b.l * b.l) + 3.0 * b.d as f64
}

/// Lower bound over consistent policies:
/// `Σ_{i∈S_2} l·[2(1-α) ln T + 2 ln(16 C |S_1|)] / KL_min(i)`, where
/// `kl_min[i]` is `min_{j∈S_1} KL(ν_i ‖ ν_j)`.
pub fn theorem2_lower(b: &BoundInputs, kl_min: &BTreeMap<usize, f64>) -> Result<f64> {
    let numerator = 2.0 * (1.0 - b.alpha) * b.horizon.ln()
        + 2.0 * (16.0 * b.c_alpha * b.s1_size as f64).ln();
    kl_min.iter().try_fold(0.0, |acc, (&arm, &kl)| {
        if !(kl > 0.0 && kl.is_finite()) {
            return Err(Error::NonpositiveKl { arm, value: kl });
        }
        Ok(acc + numerator * b.l / kl)
    })
}

/// Smallest integer `T >= 1` from which `exp(-2T / (9 |S_1|²)) < 8 C T^{α-1} |S_1|`
/// holds for every larger horizon, i.e. where the lower bound starts to apply.
pub fn theorem2_crossover(b: &BoundInputs) -> f64 {
    let s1 = b.s1_size as f64;
    // g(T) = ln(rhs) - ln(lhs) is convex in T; the inequality is g > 0.
    let g = |t: f64| {
        (8.0 * b.c_alpha * s1).ln() + (b.alpha - 1.0) * t.ln() + 2.0 * t / (9.0 * s1 * s1)
    };
    let t_min = (4.5 * s1 * s1 * (1.0 - b.alpha)).max(1.0);
    if g(t_min) > 0.0 {
        return 1.0;
    }
    let mut hi = t_min.max(2.0) * 2.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let root = bisect_root(g, t_min, hi);
    let t = root.floor().max(1.0);
    if g(t) > 0.0 {
        t
    } else {
        t + 1.0
    }
}

/// Sign change of `g` on `[lo, hi]` with `g(lo) <= 0 < g(hi)`.
fn bisect_root(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Replaces arm `i ∈ S_2` by `(1 - eps)·x_j + eps·1` with `x_j ~ ν_j`,
/// `j ∈ S_1`, which makes `i` optimal exactly where `j` was.
pub fn alt_environment(
    instance: &ProblemInstance,
    j: usize,
    i: usize,
    eps: f64,
) -> Result<ProblemInstance> {
    let summary = instance.summarize()?;
    if !summary.in_s1(j) {
        return Err(Error::NotInS1(j));
    }
    if !summary.in_s2(i) {
        return Err(Error::NotInS2(i));
    }
    if !(eps > 0.0 && eps < summary.l) {
        return Err(Error::EpsOutOfRange { eps, l: summary.l });
    }
    let arm = ArmDistribution::alternative(instance.arms()[j].clone(), eps)?;
    instance.with_arm(i, arm)
}

/// KL divergence between two product distributions with finite support,
/// summed over coordinates.
pub fn kl_product(p: &ArmDistribution, q: &ArmDistribution) -> Result<f64> {
    match (p, q) {
        (
            ArmDistribution::ProductCategorical { coordinates: pc },
            ArmDistribution::ProductCategorical { coordinates: qc },
        ) => {
            if pc.len() != qc.len() {
                return Err(Error::DimensionMismatch {
                    expected: pc.len(),
                    got: qc.len(),
                });
            }
            let mut total = 0.0;
            for (k, (a, b)) in pc.iter().zip(qc).enumerate() {
                if a.points != b.points {
                    return Err(Error::SupportMismatch(format!(
                        "coordinate {k} has different support points"
                    )));
                }
                for (pv, qv) in a.probabilities.iter().zip(&b.probabilities) {
                    if *pv <= 0.0 {
                        continue;
                    }
                    if *qv <= 0.0 {
                        return Err(Error::SupportMismatch(format!(
                            "coordinate {k}: q vanishes where p does not"
                        )));
                    }
                    total += pv * (pv / qv).ln();
                }
            }
            Ok(total)
        }
        (
            ArmDistribution::Scaled { inner: a, factor: fa },
            ArmDistribution::Scaled { inner: b, factor: fb },
        ) if fa == fb => kl_product(a, b),
        _ => Err(Error::SupportMismatch(
            "KL is only evaluated between product categorical arms".into(),
        )),
    }
}

/// `min_{j∈S_1} KL(ν_i ‖ ν_j)` for every `i ∈ S_2`.
pub fn min_kl_to_s1(
    instance: &ProblemInstance,
    summary: &InstanceSummary,
) -> Result<BTreeMap<usize, f64>> {
    let arms = instance.arms();
    summary
        .s2
        .iter()
        .map(|&i| {
            let min = summary
                .s1
                .iter()
                .map(|&j| kl_product(&arms[i], &arms[j]))
                .try_fold(f64::INFINITY, |m, kl| kl.map(|v| m.min(v)))?;
            Ok((i, min))
        })
        .collect()
}

/// Every bound evaluated for one instance and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub theorem1_coefficient: f64,
    pub theorem1_leading: f64,
    /// The additive constant of the upper bound has no closed form.
    pub theorem1_constant: Option<f64>,
    pub lemma2_threshold: Option<f64>,
    pub lemma2_tail_at_horizon: Option<f64>,
    pub lemma33_rhs: Option<f64>,
    pub lemma34_rhs: f64,
    /// Present when every `S_2` arm has finite KL to `S_1`.
    pub theorem2_lower: Option<f64>,
    pub theorem2_crossover: f64,
    pub kl_min: Option<BTreeMap<usize, f64>>,
}

impl BoundReport {
    pub fn evaluate(instance: &ProblemInstance, inputs: BoundInputs) -> Result<Self> {
        let summary = instance.summarize()?;
        let two_arms = inputs.k >= 2;
        let threshold = two_arms.then(|| lemma2_threshold(&inputs)).transpose()?;
        let tail = match threshold {
            Some(th) if inputs.horizon >= th => Some(lemma2_tail(&inputs, inputs.horizon)?),
            _ => None,
        };
        let kl_min = min_kl_to_s1(instance, &summary).ok();
        let theorem2 = match &kl_min {
            Some(kl) if kl.values().all(|v| *v > 0.0 && v.is_finite()) => {
                Some(theorem2_lower(&inputs, kl)?)
            }
            _ => None,
        };
        Ok(Self {
            theorem1_coefficient: theorem1_coefficient(&inputs),
            theorem1_leading: theorem1_leading(&inputs),
            theorem1_constant: None,
            lemma2_threshold: threshold,
            lemma2_tail_at_horizon: tail,
            lemma33_rhs: two_arms.then(|| lemma33_rhs(&inputs)).transpose()?,
            lemma34_rhs: lemma34_rhs(&inputs),
            theorem2_lower: theorem2,
            theorem2_crossover: theorem2_crossover(&inputs),
            kl_min,
            inputs,
        })
    }
}
