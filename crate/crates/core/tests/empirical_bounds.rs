//! Simulated counters and regret compared with the bound evaluators.

use wucb::bounds::{lemma33_rhs, theorem1_leading, BoundInputs, BoundReport};
use wucb::env::{build_synthetic, build_synthetic_bernoulli, ProblemInstance};
use wucb::policy::PolicyKind;
use wucb::sim::{run_experiment, ExperimentResult};

const ALL: [usize; 5] = [0, 1, 2, 3, 4];
const T: u64 = 100_000;

fn simulate(instance: &ProblemInstance, paths: usize, seed: u64) -> ExperimentResult {
    run_experiment(instance, &[PolicyKind::Wucb], T, paths, seed, 100, true).unwrap()
}

fn inputs(instance: &ProblemInstance, horizon: f64) -> BoundInputs {
    let s = instance.summarize().unwrap();
    BoundInputs::from_summary(&s, instance.dim(), horizon, 0.99, 1.0).unwrap()
}

#[test]
fn optimal_arms_dominate_their_own_region() {
    // Every j in S_1 is pulled at least T/(4|S_1|) times under its own
    // preferences, on every path.
    let inst = build_synthetic(10, 1.0, &ALL, 7).unwrap();
    let s = inst.summarize().unwrap();
    let res = simulate(&inst, 20, 7);
    let floor = T as f64 / (4.0 * s.s1.len() as f64);
    for tr in &res.runs[0].traces {
        for &j in &s.s1 {
            assert!(tr.n_i_j[j][j] as f64 >= floor, "seed {} arm {j}: {}", tr.seed, tr.n_i_j[j][j]);
        }
    }
}

#[test]
fn cross_pulls_between_optimal_arms_stay_under_constant() {
    let inst = build_synthetic(10, 1.0, &ALL, 7).unwrap();
    let s = inst.summarize().unwrap();
    let rhs = lemma33_rhs(&inputs(&inst, T as f64)).unwrap();
    let means = simulate(&inst, 20, 11).runs[0].mean_n_i_j();
    for &i in &s.s1 {
        for &j in &s.s1 {
            if i != j {
                assert!(means[i][j] <= rhs, "N_{i}^{j} = {}", means[i][j]);
            }
        }
    }
}

#[test]
fn pseudo_regret_below_h_times_mistaken_pulls() {
    let inst = build_synthetic(15, 0.7, &ALL, 3).unwrap();
    let s = inst.summarize().unwrap();
    let run = &simulate(&inst, 5, 0).runs[0];
    for tr in &run.traces {
        let mistakes = tr.total_mistaken_pulls() as f64;
        assert!(tr.final_pseudo_regret() <= s.h * mistakes + 1e-9);
        assert!(tr.final_pseudo_regret() >= s.l * mistakes - 1e-9);
    }
}

#[test]
fn finite_support_companion_is_sandwiched() {
    let inst = build_synthetic_bernoulli(10, 1.0, &ALL, 5).unwrap();
    let s = inst.summarize().unwrap();
    assert_eq!(s.s2.len(), 5);
    let run = &simulate(&inst, 20, 5).runs[0];
    let curve = &run.pseudo;

    // Fit a + b ln t over the recorded curve to estimate the additive constant.
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .checkpoints
        .iter()
        .zip(&curve.mean)
        .filter(|(t, _)| **t >= 1_000)
        .map(|(&t, &m)| ((t as f64).ln(), m))
        .unzip();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let b = x.iter().zip(&y).map(|(a, c)| (a - mx) * (c - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    let intercept = my - b * mx;

    for horizon in [10_000u64, T] {
        let report = BoundReport::evaluate(&inst, inputs(&inst, horizon as f64)).unwrap();
        let lower = report.theorem2_lower.expect("finite KL");
        let measured = curve.mean_at(horizon).unwrap();
        let upper = theorem1_leading(&report.inputs) + intercept;
        assert!(horizon as f64 >= report.theorem2_crossover);
        assert!(lower <= measured, "T={horizon}: lower {lower} > measured {measured}");
        assert!(measured <= upper, "T={horizon}: measured {measured} > upper {upper}");
    }
}

#[test]
fn every_arm_optimal_gives_flat_regret() {
    let inst = build_synthetic(5, 1.0, &ALL, 0).unwrap();
    let report = BoundReport::evaluate(&inst, inputs(&inst, T as f64)).unwrap();
    assert_eq!(report.theorem1_leading, 0.0);
    assert_eq!(report.theorem2_lower, Some(0.0));
    let curve = &simulate(&inst, 20, 1).runs[0].pseudo;
    let late = curve.mean_at(T).unwrap() - curve.mean_at(T / 2).unwrap();
    assert!(late < 1.0, "late increase {late}");
}
