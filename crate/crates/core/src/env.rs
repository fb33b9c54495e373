//! Problem instances: arm state distributions, the preference model, and the
//! facts derived from them (optimal-arm partition, `rho`, `S_1`/`S_2`, gap
//! constants).
//!
//! Arm indices are 0-based throughout the library. Preference coordinates
//! are 0-based as well; the CLI translates to 1-based labels at its edges.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on inner-product ties when deciding the optimal arm.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Tolerance for "sums to one" checks on weights and probabilities.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Mixing weights of the synthetic instance before permutation.
pub const PI0: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];

/// State dimension of the synthetic instance.
pub const SYNTHETIC_DIM: usize = 5;

const SHIFT_LOW: f64 = 0.2;
const SHIFT_WIDTH: f64 = 0.4;

/// Law of one coordinate of a [`ArmDistribution::ProductCategorical`] arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateLaw {
    pub points: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CoordinateLaw {
    pub fn bernoulli(mean: f64) -> Self {
        Self {
            points: vec![0.0, 1.0],
            probabilities: vec![1.0 - mean, mean],
        }
    }

    fn mean(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * p)
            .sum()
    }

    fn draw(&self, u: f64) -> f64 {
        let mut cum = 0.0;
        let mut last = self.points[0];
        for (v, p) in self.points.iter().zip(&self.probabilities) {
            if *p <= 0.0 {
                continue;
            }
            cum += p;
            last = *v;
            if u < cum {
                return *v;
            }
        }
        last
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() != self.probabilities.len() {
            return Err(Error::InvalidArm(
                "coordinate law needs matching, nonempty points and probabilities".into(),
            ));
        }
        if self.points.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArm("support points must lie in [0, 1]".into()));
        }
        check_simplex(&self.probabilities).map_err(Error::InvalidArm)
    }
}

/// Generative model of one arm's state vector.
///
/// Every variant produces states in `[0, 1]^d` and consumes a fixed number of
/// uniform variates per draw (see [`ArmDistribution::uniforms_needed`]), which
/// lets the simulator address draws by `(arm, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArmDistribution {
    /// `x = 0.2·1 + 0.2·e_base + n·1` with one shared `n ~ U[0.2, 0.6]`.
    ShiftedUniform { base_index: usize, d: usize },
    /// `x = Σ_c w_c · x_c` with an independent fresh draw from each component.
    Mixed {
        weights: Vec<f64>,
        components: Vec<ArmDistribution>,
    },
    /// Independent coordinates, each with finite support.
    ProductCategorical { coordinates: Vec<CoordinateLaw> },
    /// `x = factor · x_inner`.
    Scaled {
        inner: Box<ArmDistribution>,
        factor: f64,
    },
    /// `x = (1 - eps) · x_inner + eps · 1`, the lower-bound alternative law.
    Alternative {
        inner: Box<ArmDistribution>,
        eps: f64,
    },
}

impl ArmDistribution {
    pub fn shifted_uniform(base_index: usize, d: usize) -> Result<Self> {
        let arm = ArmDistribution::ShiftedUniform { base_index, d };
        arm.validate()?;
        Ok(arm)
    }

    pub fn mixed(weights: Vec<f64>, components: Vec<ArmDistribution>) -> Result<Self> {
        let arm = ArmDistribution::Mixed {
            weights,
            components,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn product_categorical(coordinates: Vec<CoordinateLaw>) -> Result<Self> {
        let arm = ArmDistribution::ProductCategorical { coordinates };
        arm.validate()?;
        Ok(arm)
    }

    pub fn scaled(inner: ArmDistribution, factor: f64) -> Result<Self> {
        let arm = ArmDistribution::Scaled {
            inner: Box::new(inner),
            factor,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn alternative(inner: ArmDistribution, eps: f64) -> Result<Self> {
        let arm = ArmDistribution::Alternative {
            inner: Box::new(inner),
            eps,
        };
        arm.validate()?;
        Ok(arm)
    }

    pub fn dim(&self) -> usize {
        match self {
            ArmDistribution::ShiftedUniform { d, .. } => *d,
            ArmDistribution::Mixed { components, .. } => {
                components.first().map_or(0, ArmDistribution::dim)
            }
            ArmDistribution::ProductCategorical { coordinates } => coordinates.len(),
            ArmDistribution::Scaled { inner, .. } | ArmDistribution::Alternative { inner, .. } => {
                inner.dim()
            }
        }
    }

    /// Mean state vector, computed from the construction (not sampled).
    pub fn mean(&self) -> Vec<f64> {
        match self {
            ArmDistribution::ShiftedUniform { base_index, d } => {
                let mut m = vec![SHIFT_LOW + SHIFT_LOW + SHIFT_WIDTH / 2.0; *d];
                m[*base_index] += SHIFT_LOW;
                m
            }
            ArmDistribution::Mixed {
                weights,
                components,
            } => {
                let mut m = vec![0.0; self.dim()];
                for (w, c) in weights.iter().zip(components) {
                    for (acc, v) in m.iter_mut().zip(c.mean()) {
                        *acc += w * v;
                    }
                }
                m
            }
            ArmDistribution::ProductCategorical { coordinates } => {
                coordinates.iter().map(CoordinateLaw::mean).collect()
            }
            ArmDistribution::Scaled { inner, factor } => {
                inner.mean().into_iter().map(|v| factor * v).collect()
            }
            ArmDistribution::Alternative { inner, eps } => inner
                .mean()
                .into_iter()
                .map(|v| (1.0 - eps) * v + eps)
                .collect(),
        }
    }

    /// Number of `U[0, 1)` variates consumed by one draw.
    pub fn uniforms_needed(&self) -> usize {
        match self {
            ArmDistribution::ShiftedUniform { .. } => 1,
            ArmDistribution::Mixed { components, .. } => {
                components.iter().map(ArmDistribution::uniforms_needed).sum()
            }
            ArmDistribution::ProductCategorical { coordinates } => coordinates.len(),
            ArmDistribution::Scaled { inner, .. } | ArmDistribution::Alternative { inner, .. } => {
                inner.uniforms_needed()
            }
        }
    }

    /// Writes one state into `out`, pulling uniforms from `next_uniform`.
    pub fn state_from_uniforms(&self, next_uniform: &mut dyn FnMut() -> f64, out: &mut [f64]) {
        match self {
            ArmDistribution::ShiftedUniform { base_index, .. } => {
                let n = SHIFT_LOW + SHIFT_WIDTH * next_uniform();
                out.fill(SHIFT_LOW + n);
                out[*base_index] += SHIFT_LOW;
            }
            ArmDistribution::Mixed {
                weights,
                components,
            } => {
                out.fill(0.0);
                let mut scratch = vec![0.0; out.len()];
                for (w, c) in weights.iter().zip(components) {
                    c.state_from_uniforms(next_uniform, &mut scratch);
                    for (acc, v) in out.iter_mut().zip(&scratch) {
                        *acc += w * v;
                    }
                }
            }
            ArmDistribution::ProductCategorical { coordinates } => {
                for (slot, law) in out.iter_mut().zip(coordinates) {
                    *slot = law.draw(next_uniform());
                }
            }
            ArmDistribution::Scaled { inner, factor } => {
                inner.state_from_uniforms(next_uniform, out);
                out.iter_mut().for_each(|v| *v *= factor);
            }
            ArmDistribution::Alternative { inner, eps } => {
                inner.state_from_uniforms(next_uniform, out);
                out.iter_mut().for_each(|v| *v = (1.0 - eps) * *v + eps);
            }
        }
        // Mixtures can overshoot 1 by an ulp.
        out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.state_from_uniforms(&mut || rng.random::<f64>(), &mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        let mean = self.mean();
        if mean.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArm(format!(
                "mean {mean:?} must lie strictly inside (0, 1)^d"
            )));
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<()> {
        match self {
            ArmDistribution::ShiftedUniform { base_index, d } => {
                if *d == 0 || base_index >= d {
                    return Err(Error::InvalidArm(format!(
                        "shifted_uniform needs base_index < d, got {base_index} and d = {d}"
                    )));
                }
            }
            ArmDistribution::Mixed {
                weights,
                components,
            } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::InvalidArm(
                        "mixed needs one weight per component and at least one component".into(),
                    ));
                }
                check_simplex(weights).map_err(Error::InvalidArm)?;
                let d = components[0].dim();
                for c in components {
                    c.validate_structure()?;
                    if c.dim() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: c.dim(),
                        });
                    }
                }
            }
            ArmDistribution::ProductCategorical { coordinates } => {
                if coordinates.is_empty() {
                    return Err(Error::InvalidArm("product_categorical needs d >= 1".into()));
                }
                coordinates.iter().try_for_each(CoordinateLaw::validate)?;
            }
            ArmDistribution::Scaled { inner, factor } => {
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::InvalidGamma(*factor));
                }
                inner.validate_structure()?;
            }
            ArmDistribution::Alternative { inner, eps } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(Error::InvalidArm(format!("eps = {eps} must lie in (0, 1)")));
                }
                inner.validate_structure()?;
            }
        }
        Ok(())
    }
}

fn check_simplex(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(format!("weights {p:?} must be nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("weights {p:?} sum to {total}, not 1"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite-support distribution of user preference vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPreferences")]
pub struct PreferenceModel {
    support: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPreferences {
    support: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

impl TryFrom<RawPreferences> for PreferenceModel {
    type Error = Error;

    fn try_from(raw: RawPreferences) -> Result<Self> {
        PreferenceModel::new(raw.support, raw.probabilities)
    }
}

impl PreferenceModel {
    pub fn new(support: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probabilities.len() {
            return Err(Error::InvalidPreferences(
                "support and probabilities must be nonempty and of equal length".into(),
            ));
        }
        let d = support[0].len();
        for lam in &support {
            if lam.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: lam.len(),
                });
            }
            if lam.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidPreferences(format!(
                    "preference {lam:?} must be strictly positive in every coordinate"
                )));
            }
            let norm: f64 = lam.iter().sum();
            if (norm - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(Error::InvalidPreferences(format!(
                    "preference {lam:?} has L1 norm {norm}, not 1"
                )));
            }
        }
        check_simplex(&probabilities).map_err(Error::InvalidPreferences)?;
        Ok(Self {
            support,
            probabilities,
        })
    }

    /// Uniform distribution over `support`.
    pub fn uniform(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len().max(1);
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Index of the support vector matching `lam` exactly, if any.
    pub fn index_of(&self, lam: &[f64]) -> Option<usize> {
        self.support.iter().position(|s| s.as_slice() == lam)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last = 0;
        for (m, p) in self.probabilities.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            cum += p;
            last = m;
            if u < cum {
                return m;
            }
        }
        last
    }

    pub fn sample_preference<R: Rng + ?Sized>(&self, rng: &mut R) -> &[f64] {
        &self.support[self.sample_index(rng)]
    }
}

/// Arms plus preference model. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct ProblemInstance {
    arms: Vec<ArmDistribution>,
    preferences: PreferenceModel,
    #[serde(skip)]
    means: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawInstance {
    arms: Vec<ArmDistribution>,
    preferences: PreferenceModel,
}

impl TryFrom<RawInstance> for ProblemInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        ProblemInstance::new(raw.arms, raw.preferences)
    }
}

impl ProblemInstance {
    pub fn new(arms: Vec<ArmDistribution>, preferences: PreferenceModel) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::InvalidInstance("need at least one arm".into()));
        }
        let d = preferences.dim();
        for arm in &arms {
            arm.validate()?;
            if arm.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: arm.dim(),
                });
            }
        }
        let means = arms.iter().map(ArmDistribution::mean).collect();
        let instance = Self {
            arms,
            preferences,
            means,
        };
        for lam in instance.preferences.support() {
            instance.optimal_arm(lam)?;
        }
        Ok(instance)
    }

    pub fn k(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.preferences.dim()
    }

    pub fn arms(&self) -> &[ArmDistribution] {
        &self.arms
    }

    pub fn preferences(&self) -> &PreferenceModel {
        &self.preferences
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// `table[m][i] = λ^(m)·μ_i` over the preference support.
    pub fn expected_rewards(&self) -> Vec<Vec<f64>> {
        self.preferences
            .support()
            .iter()
            .map(|lam| self.means.iter().map(|mu| dot(lam, mu)).collect())
            .collect()
    }

    /// Unique maximiser of `λ·μ_j`.
    pub fn optimal_arm(&self, lam: &[f64]) -> Result<usize> {
        if lam.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lam.len(),
            });
        }
        let values: Vec<f64> = self.means.iter().map(|mu| dot(lam, mu)).collect();
        let mut best = 0;
        for (i, v) in values.iter().enumerate().skip(1) {
            if *v > values[best] {
                best = i;
            }
        }
        if let Some(other) = (0..values.len())
            .find(|&i| i != best && (values[i] - values[best]).abs() <= TIE_TOLERANCE)
        {
            return Err(Error::AmbiguousOptimum {
                first: best.min(other),
                second: best.max(other),
            });
        }
        Ok(best)
    }

    pub fn summarize(&self) -> Result<InstanceSummary> {
        let k = self.k();
        let rewards = self.expected_rewards();
        let mut optimal_arm_of = Vec::with_capacity(rewards.len());
        let mut rho = vec![0.0; k];
        let mut l = f64::INFINITY;
        let mut h: f64 = 0.0;
        for (m, lam) in self.preferences.support().iter().enumerate() {
            let j = self.optimal_arm(lam)?;
            optimal_arm_of.push(j);
            let p = self.preferences.probabilities()[m];
            rho[j] += p;
            if p <= 0.0 {
                continue;
            }
            for i in (0..k).filter(|&i| i != j) {
                let gap = rewards[m][j] - rewards[m][i];
                l = l.min(gap);
                h = h.max(gap);
            }
        }
        if !l.is_finite() {
            // K = 1: no suboptimal arm exists.
            l = 0.0;
        }
        let s1 = (0..k).filter(|&j| rho[j] > 0.0).collect();
        let s2 = (0..k).filter(|&j| rho[j] <= 0.0).collect();
        Ok(InstanceSummary {
            optimal_arm_of,
            rho,
            s1,
            s2,
            l,
            h,
        })
    }

    /// Copy of the instance with arm `index` replaced.
    pub fn with_arm(&self, index: usize, arm: ArmDistribution) -> Result<Self> {
        let mut arms = self.arms.clone();
        let slot = arms.get_mut(index).ok_or(Error::ArmOutOfRange {
            arm: index,
            k: self.k(),
        })?;
        *slot = arm;
        Self::new(arms, self.preferences.clone())
    }
}

/// Facts derived from an instance by enumeration over the preference support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    /// Optimal arm for each preference support index.
    pub optimal_arm_of: Vec<usize>,
    pub rho: Vec<f64>,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    /// Smallest gap between the optimal arm and any other arm. Zero when K = 1.
    pub l: f64,
    /// Largest such gap. Zero when K = 1.
    pub h: f64,
}

impl InstanceSummary {
    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn in_s1(&self, arm: usize) -> bool {
        self.rho.get(arm).is_some_and(|r| *r > 0.0)
    }

    pub fn in_s2(&self, arm: usize) -> bool {
        self.rho.get(arm).is_some_and(|r| *r <= 0.0)
    }
}

/// Unit basis vector scaled into a preference: `(1/8)·1 + (3/8)·e_k` in five
/// dimensions.
pub fn synthetic_preference(k: usize) -> Vec<f64> {
    let mut lam = vec![0.125; SYNTHETIC_DIM];
    lam[k] += 0.375;
    lam
}

fn synthetic_arms(k_total: usize, mix_seed: u64) -> Result<Vec<ArmDistribution>> {
    if k_total < SYNTHETIC_DIM {
        return Err(Error::InvalidInstance(format!(
            "synthetic instance needs k_total >= {SYNTHETIC_DIM}, got {k_total}"
        )));
    }
    let base: Vec<ArmDistribution> = (0..SYNTHETIC_DIM)
        .map(|i| ArmDistribution::shifted_uniform(i, SYNTHETIC_DIM))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed);
    let mut arms = base.clone();
    for _ in SYNTHETIC_DIM..k_total {
        let mut weights = PI0.to_vec();
        weights.shuffle(&mut rng);
        arms.push(ArmDistribution::mixed(weights, base.clone())?);
    }
    Ok(arms)
}

fn synthetic_preferences(active_preferences: &[usize]) -> Result<PreferenceModel> {
    let mut active = active_preferences.to_vec();
    active.sort_unstable();
    active.dedup();
    if active.is_empty() || active.len() != active_preferences.len() {
        return Err(Error::InvalidPreferences(
            "active preferences must be nonempty and distinct".into(),
        ));
    }
    if let Some(bad) = active.iter().find(|&&k| k >= SYNTHETIC_DIM) {
        return Err(Error::InvalidPreferences(format!(
            "active preference {bad} out of range for d = {SYNTHETIC_DIM}"
        )));
    }
    PreferenceModel::uniform(active.into_iter().map(synthetic_preference).collect())
}

fn scale_all(arms: Vec<ArmDistribution>, gamma: f64) -> Result<Vec<ArmDistribution>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    if gamma == 1.0 {
        return Ok(arms);
    }
    arms.into_iter()
        .map(|a| ArmDistribution::scaled(a, gamma))
        .collect()
}

/// The synthetic instance: five shifted-uniform base arms, `k_total - 5`
/// mixtures with permuted `PI0` weights, optional state scaling by `gamma`,
/// and a uniform preference over `(1/8)·1 + (3/8)·e_k` for `k` in
/// `active_preferences` (0-based).
///
/// Mixture weights are drawn sequentially from `mix_seed`, so the arms of a
/// smaller `k_total` are a prefix of those of a larger one.
pub fn build_synthetic(
    k_total: usize,
    gamma: f64,
    active_preferences: &[usize],
    mix_seed: u64,
) -> Result<ProblemInstance> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let arms = scale_all(synthetic_arms(k_total, mix_seed)?, gamma)?;
    ProblemInstance::new(arms, synthetic_preferences(active_preferences)?)
}

/// Finite-support companion of [`build_synthetic`]: every arm is replaced by
/// independent Bernoulli coordinates with the same mean vector, so the KL
/// divergence between any two arms is finite.
pub fn build_synthetic_bernoulli(
    k_total: usize,
    gamma: f64,
    active_preferences: &[usize],
    mix_seed: u64,
) -> Result<ProblemInstance> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let arms = synthetic_arms(k_total, mix_seed)?
        .into_iter()
        .map(|a| {
            ArmDistribution::product_categorical(
                a.mean().into_iter().map(CoordinateLaw::bernoulli).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::new(scale_all(arms, gamma)?, synthetic_preferences(active_preferences)?)
}
