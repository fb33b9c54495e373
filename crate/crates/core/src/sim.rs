//! Simulation of single paths and multi-path experiments.
//!
//! Each path owns three random sources derived from its seed:
//!
//! - a sequential preference stream,
//! - a policy stream (only the random baseline reads it),
//! - a state tape: arm `i`'s state at slot `t` is drawn from ChaCha stream
//!   `i` at a word offset fixed by `t`, so `x_{i,t}` is the same whatever the
//!   policy pulls, whatever `gamma` scales it by, and whether or not it is
//!   read. The pulled arm and the optimal arm read different streams, and
//!   the policy only ever sees the pulled one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{dot, ArmDistribution, InstanceSummary, ProblemInstance};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;

pub const DEFAULT_CHECKPOINT_STRIDE: u64 = 100;

const PREFERENCE_TAG: u64 = 0x7072_6566;
const POLICY_TAG: u64 = 0x706f_6c69;
const STATE_TAG: u64 = 0x7374_6174;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the sub-stream `tag` of a path seeded with `seed`.
pub fn substream_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Random-access source of arm states indexed by `(arm, t)`.
pub struct StateTape<'a> {
    arms: &'a [ArmDistribution],
    rngs: Vec<ChaCha8Rng>,
    words_per_draw: Vec<u128>,
}

impl<'a> StateTape<'a> {
    pub fn new(arms: &'a [ArmDistribution], seed: u64) -> Self {
        let base = ChaCha8Rng::seed_from_u64(substream_seed(seed, STATE_TAG));
        let rngs = (0..arms.len())
            .map(|i| {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        // Each f64 consumes one u64, i.e. two 32-bit words.
        let words_per_draw = arms
            .iter()
            .map(|a| 2 * a.uniforms_needed() as u128)
            .collect();
        Self {
            arms,
            rngs,
            words_per_draw,
        }
    }

    pub fn state_into(&mut self, arm: usize, t: u64, out: &mut [f64]) {
        let rng = &mut self.rngs[arm];
        rng.set_word_pos(t as u128 * self.words_per_draw[arm]);
        let mut next = || rng.random::<f64>();
        self.arms[arm].state_from_uniforms(&mut next, out);
    }

    pub fn state(&mut self, arm: usize, t: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.arms[arm].dim()];
        self.state_into(arm, t, &mut out);
        out
    }
}

/// One simulation path: regret curves at checkpoints plus final counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTrace {
    pub policy: PolicyKind,
    pub seed: u64,
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    pub cum_realized_regret: Vec<f64>,
    pub cum_pseudo_regret: Vec<f64>,
    /// `N_i(T)`.
    pub n_i: Vec<u64>,
    /// `N^j(T)`: slots whose preference had optimal arm `j`.
    pub n_super_j: Vec<u64>,
    /// `n_i_j[i][j] = N_i^j(T)`.
    pub n_i_j: Vec<Vec<u64>>,
}

impl PathTrace {
    /// Pulls of arm `i` while some other arm was optimal.
    pub fn mistaken_pulls(&self, i: usize) -> u64 {
        self.n_i_j[i]
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn total_mistaken_pulls(&self) -> u64 {
        (0..self.n_i.len()).map(|i| self.mistaken_pulls(i)).sum()
    }

    pub fn final_pseudo_regret(&self) -> f64 {
        self.cum_pseudo_regret.last().copied().unwrap_or(0.0)
    }

    pub fn final_realized_regret(&self) -> f64 {
        self.cum_realized_regret.last().copied().unwrap_or(0.0)
    }
}

fn check_run_args(instance: &ProblemInstance, horizon: u64, stride: u64) -> Result<()> {
    if horizon < instance.k() as u64 {
        return Err(Error::HorizonTooShort {
            horizon,
            k: instance.k(),
        });
    }
    if stride == 0 {
        return Err(Error::Validation {
            field: "checkpoint_stride".into(),
            message: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Runs `policy` for `horizon` slots.
pub fn run_path(
    instance: &ProblemInstance,
    policy: PolicyKind,
    horizon: u64,
    seed: u64,
    checkpoint_stride: u64,
) -> Result<PathTrace> {
    let summary = instance.summarize()?;
    run_path_with(instance, &summary, policy, horizon, seed, checkpoint_stride)
}

fn run_path_with(
    instance: &ProblemInstance,
    summary: &InstanceSummary,
    policy_kind: PolicyKind,
    horizon: u64,
    seed: u64,
    stride: u64,
) -> Result<PathTrace> {
    check_run_args(instance, horizon, stride)?;
    let k = instance.k();
    let d = instance.dim();
    let prefs = instance.preferences();
    let rewards = instance.expected_rewards();

    let mut pref_rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, PREFERENCE_TAG));
    let mut policy = policy_kind.build(instance, summary, substream_seed(seed, POLICY_TAG));
    let mut tape = StateTape::new(instance.arms(), seed);

    let n_checkpoints = (horizon / stride) as usize + 1;
    let mut checkpoints = Vec::with_capacity(n_checkpoints);
    let mut cum_realized_regret = Vec::with_capacity(n_checkpoints);
    let mut cum_pseudo_regret = Vec::with_capacity(n_checkpoints);
    let mut n_i = vec![0u64; k];
    let mut n_super_j = vec![0u64; k];
    let mut n_i_j = vec![vec![0u64; k]; k];

    let mut pulled = vec![0.0; d];
    let mut best = vec![0.0; d];
    let mut realized = 0.0;
    let mut pseudo = 0.0;

    for t in 1..=horizon {
        let m = prefs.sample_index(&mut pref_rng);
        let lam = &prefs.support()[m];
        let opt = summary.optimal_arm_of[m];

        let arm = policy.select(lam)?;
        if arm >= k {
            return Err(Error::ArmOutOfRange { arm, k });
        }
        tape.state_into(arm, t, &mut pulled);
        policy.update(arm, lam, &pulled)?;

        n_i[arm] += 1;
        n_super_j[opt] += 1;
        n_i_j[arm][opt] += 1;
        if arm != opt {
            pseudo += rewards[m][opt] - rewards[m][arm];
            tape.state_into(opt, t, &mut best);
            realized += dot(lam, &best) - dot(lam, &pulled);
        }

        if t % stride == 0 || t == horizon {
            checkpoints.push(t);
            cum_realized_regret.push(realized);
            cum_pseudo_regret.push(pseudo);
        }
    }

    Ok(PathTrace {
        policy: policy_kind,
        seed,
        horizon,
        checkpoints,
        cum_realized_regret,
        cum_pseudo_regret,
        n_i,
        n_super_j,
        n_i_j,
    })
}

/// Mean and sample standard deviation (divisor `n - 1`, zero for one path)
/// of a per-checkpoint quantity across paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub paths: usize,
}

impl AggregateCurve {
    pub fn from_paths<'a>(checkpoints: &[u64], curves: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let curves: Vec<&[f64]> = curves.into_iter().collect();
        let n = curves.len();
        let len = checkpoints.len();
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for c in &curves {
            for (m, v) in mean.iter_mut().zip(c.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        if n > 1 {
            for c in &curves {
                for ((s, v), m) in std.iter_mut().zip(c.iter()).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            std.iter_mut()
                .for_each(|s| *s = (*s / (n - 1) as f64).sqrt());
        }
        Self {
            checkpoints: checkpoints.to_vec(),
            mean,
            std,
            paths: n,
        }
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    /// Mean at checkpoint `t`, if recorded.
    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.checkpoints
            .binary_search(&t)
            .ok()
            .map(|i| self.mean[i])
    }
}

/// All paths of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: PolicyKind,
    pub pseudo: AggregateCurve,
    pub realized: AggregateCurve,
    pub traces: Vec<PathTrace>,
}

impl PolicyRun {
    pub fn seeds(&self) -> Vec<u64> {
        self.traces.iter().map(|t| t.seed).collect()
    }

    /// Across-path mean of `N_i^j(T)`.
    pub fn mean_n_i_j(&self) -> Vec<Vec<f64>> {
        let k = self.traces[0].n_i.len();
        let n = self.traces.len() as f64;
        let mut out = vec![vec![0.0; k]; k];
        for tr in &self.traces {
            for (row, counts) in out.iter_mut().zip(&tr.n_i_j) {
                for (acc, c) in row.iter_mut().zip(counts) {
                    *acc += *c as f64 / n;
                }
            }
        }
        out
    }

    pub fn mean_n_i(&self) -> Vec<f64> {
        let k = self.traces[0].n_i.len();
        let n = self.traces.len() as f64;
        let mut out = vec![0.0; k];
        for tr in &self.traces {
            for (acc, c) in out.iter_mut().zip(&tr.n_i) {
                *acc += *c as f64 / n;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub horizon: u64,
    pub base_seed: u64,
    pub runs: Vec<PolicyRun>,
}

impl ExperimentResult {
    pub fn run(&self, policy: PolicyKind) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.policy == policy)
    }
}

/// Path `p` of every policy uses seed `base_seed + p`; with `parallel` the
/// paths run on the rayon pool. Results are collected in path order, so the
/// output does not depend on scheduling.
pub fn run_experiment(
    instance: &ProblemInstance,
    policies: &[PolicyKind],
    horizon: u64,
    n_paths: usize,
    base_seed: u64,
    checkpoint_stride: u64,
    parallel: bool,
) -> Result<ExperimentResult> {
    if n_paths == 0 {
        return Err(Error::Validation {
            field: "paths".into(),
            message: "need at least one path".into(),
        });
    }
    check_run_args(instance, horizon, checkpoint_stride)?;
    let summary = instance.summarize()?;
    let mut runs = Vec::with_capacity(policies.len());
    for &policy in policies {
        let one = |p: usize| {
            run_path_with(
                instance,
                &summary,
                policy,
                horizon,
                base_seed.wrapping_add(p as u64),
                checkpoint_stride,
            )
        };
        let traces: Vec<PathTrace> = if parallel {
            (0..n_paths).into_par_iter().map(one).collect::<Result<_>>()?
        } else {
            (0..n_paths).map(one).collect::<Result<_>>()?
        };
        let checkpoints = &traces[0].checkpoints;
        let pseudo = AggregateCurve::from_paths(
            checkpoints,
            traces.iter().map(|t| t.cum_pseudo_regret.as_slice()),
        );
        let realized = AggregateCurve::from_paths(
            checkpoints,
            traces.iter().map(|t| t.cum_realized_regret.as_slice()),
        );
        runs.push(PolicyRun {
            policy,
            pseudo,
            realized,
            traces,
        });
    }
    Ok(ExperimentResult {
        horizon,
        base_seed,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterReport {
    pub checks: Vec<CounterCheck>,
}

impl CounterReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Checks `Σ_i N_i = T`, `Σ_j N^j = T` and `Σ_i N_i^j = N^j` for each `j`.
pub fn verify_counters(trace: &PathTrace, horizon: u64) -> CounterReport {
    let mut checks = vec![
        CounterCheck {
            name: "sum_n_i".into(),
            passed: trace.n_i.iter().sum::<u64>() == horizon,
        },
        CounterCheck {
            name: "sum_n_super_j".into(),
            passed: trace.n_super_j.iter().sum::<u64>() == horizon,
        },
    ];
    for (j, n_j) in trace.n_super_j.iter().enumerate() {
        let column: u64 = trace.n_i_j.iter().map(|row| row[j]).sum();
        checks.push(CounterCheck {
            name: format!("column_sum[{j}]"),
            passed: column == *n_j,
        });
    }
    CounterReport { checks }
}
