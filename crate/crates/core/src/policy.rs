//! Arm-selection policies behind one select/update interface.
//!
//! All index policies share the same conventions: slot `s` (1-based) is
//! decided with padding `sqrt(2 ln s / N_i)` where `N_i` counts pulls made
//! before slot `s`; the first `K` slots pull arms `0..K` in order; ties go to
//! the lowest arm index.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{dot, InstanceSummary, ProblemInstance};
use crate::error::{Error, Result};

/// UCB padding for the decision at `slot` given `pulls` earlier pulls.
pub fn padding(slot: u64, pulls: u64) -> f64 {
    (2.0 * (slot as f64).ln() / pulls as f64).sqrt()
}

/// Position of the first maximum.
fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// Chooses the arm for the next slot given the incoming preference.
    fn select(&mut self, lam: &[f64]) -> Result<usize>;

    /// Folds in the state revealed by pulling `arm` under preference `lam`.
    fn update(&mut self, arm: usize, lam: &[f64], observed: &[f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Wucb,
    Oracle,
    Ucb1,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Wucb,
        PolicyKind::Oracle,
        PolicyKind::Ucb1,
        PolicyKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Wucb => "wucb",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::Random => "random",
        }
    }

    /// Fresh policy state for one simulation path. `seed` only feeds
    /// policies that randomise.
    pub fn build(
        self,
        instance: &ProblemInstance,
        summary: &InstanceSummary,
        seed: u64,
    ) -> Box<dyn Policy> {
        match self {
            PolicyKind::Wucb => Box::new(WucbState::new(instance.k(), instance.dim())),
            PolicyKind::Oracle => Box::new(OraclePolicy::new(instance, summary)),
            PolicyKind::Ucb1 => Box::new(Ucb1State::new(instance.k())),
            PolicyKind::Random => Box::new(RandomPolicy::new(instance.k(), seed)),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown policy `{s}` (expected wucb, oracle, ucb1 or random)"))
    }
}

/// Running statistics of W-UCB: pull counts and per-arm state sums.
#[derive(Debug, Clone, PartialEq)]
pub struct WucbState {
    t: u64,
    counts: Vec<u64>,
    sums: Vec<Vec<f64>>,
}

impl WucbState {
    pub fn new(k: usize, d: usize) -> Self {
        Self {
            t: 0,
            counts: vec![0; k],
            sums: vec![vec![0.0; d]; k],
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.sums.first().map_or(0, Vec::len)
    }

    /// Sample mean of arm `i`, or `None` before its first pull.
    pub fn sample_mean(&self, i: usize) -> Option<Vec<f64>> {
        let n = self.counts[i];
        (n > 0).then(|| self.sums[i].iter().map(|s| s / n as f64).collect())
    }

    /// `λ·x̂_i + u_i` for the next slot; infinite for an arm never pulled.
    pub fn index(&self, i: usize, lam: &[f64]) -> f64 {
        if self.counts[i] == 0 {
            return f64::INFINITY;
        }
        let n = self.counts[i] as f64;
        let mean_reward = dot(lam, &self.sums[i]) / n;
        mean_reward + padding(self.t + 1, self.counts[i])
    }

    pub fn select(&self, lam: &[f64]) -> Result<usize> {
        if lam.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lam.len(),
            });
        }
        if (self.t as usize) < self.k() {
            return Ok(self.t as usize);
        }
        Ok(argmax_first((0..self.k()).map(|i| self.index(i, lam))))
    }

    pub fn update(&mut self, arm: usize, observed: &[f64]) -> Result<()> {
        if arm >= self.k() {
            return Err(Error::ArmOutOfRange { arm, k: self.k() });
        }
        if observed.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: observed.len(),
            });
        }
        if let Some((index, &value)) = observed
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRangeObservation { index, value });
        }
        self.counts[arm] += 1;
        for (s, x) in self.sums[arm].iter_mut().zip(observed) {
            *s += x;
        }
        self.t += 1;
        Ok(())
    }
}

impl Policy for WucbState {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Wucb
    }

    fn select(&mut self, lam: &[f64]) -> Result<usize> {
        WucbState::select(self, lam)
    }

    fn update(&mut self, arm: usize, _lam: &[f64], observed: &[f64]) -> Result<()> {
        WucbState::update(self, arm, observed)
    }
}

/// Context-blind UCB1 on the scalar reward `λ·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ucb1State {
    t: u64,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl Ucb1State {
    pub fn new(k: usize) -> Self {
        Self {
            t: 0,
            counts: vec![0; k],
            sums: vec![0.0; k],
        }
    }

    /// State with the given per-arm reward means and counts.
    pub fn from_parts(means: Vec<f64>, counts: Vec<u64>) -> Self {
        Self {
            t: counts.iter().sum(),
            sums: means.iter().zip(&counts).map(|(m, n)| m * *n as f64).collect(),
            counts,
        }
    }

    pub fn mean(&self, i: usize) -> Option<f64> {
        let n = self.counts[i];
        (n > 0).then(|| self.sums[i] / n as f64)
    }

    pub fn select(&self) -> usize {
        let k = self.counts.len();
        if (self.t as usize) < k {
            return self.t as usize;
        }
        argmax_first((0..k).map(|i| match self.counts[i] {
            0 => f64::INFINITY,
            n => self.sums[i] / n as f64 + padding(self.t + 1, n),
        }))
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let k = self.counts.len();
        if arm >= k {
            return Err(Error::ArmOutOfRange { arm, k });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::OutOfRangeObservation {
                index: 0,
                value: reward,
            });
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
        Ok(())
    }
}

impl Policy for Ucb1State {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Ucb1
    }

    fn select(&mut self, _lam: &[f64]) -> Result<usize> {
        Ok(Ucb1State::select(self))
    }

    fn update(&mut self, arm: usize, lam: &[f64], observed: &[f64]) -> Result<()> {
        if lam.len() != observed.len() {
            return Err(Error::DimensionMismatch {
                expected: lam.len(),
                got: observed.len(),
            });
        }
        Ucb1State::update(self, arm, dot(lam, observed))
    }
}

/// Knows the optimal arm for every preference in the support.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    support: Vec<Vec<f64>>,
    optimal_arm_of: Vec<usize>,
}

impl OraclePolicy {
    pub fn new(instance: &ProblemInstance, summary: &InstanceSummary) -> Self {
        Self {
            support: instance.preferences().support().to_vec(),
            optimal_arm_of: summary.optimal_arm_of.clone(),
        }
    }

    pub fn select(&self, lam: &[f64]) -> Result<usize> {
        self.support
            .iter()
            .position(|s| s.as_slice() == lam)
            .map(|m| self.optimal_arm_of[m])
            .ok_or(Error::UnknownPreference)
    }
}

impl Policy for OraclePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Oracle
    }

    fn select(&mut self, lam: &[f64]) -> Result<usize> {
        OraclePolicy::select(self, lam)
    }

    fn update(&mut self, _arm: usize, _lam: &[f64], _observed: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Uniformly random arm.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    k: usize,
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

pub fn random_select<R: Rng + ?Sized>(k: usize, rng: &mut R) -> usize {
    rng.random_range(0..k)
}

impl Policy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn select(&mut self, _lam: &[f64]) -> Result<usize> {
        Ok(random_select(self.k, &mut self.rng))
    }

    fn update(&mut self, _arm: usize, _lam: &[f64], _observed: &[f64]) -> Result<()> {
        Ok(())
    }
}
