//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wucb::bounds::{alt_environment, kl_product, lemma34_rhs, theorem1_coefficient, BoundInputs};
use wucb::cli::{run_preset, ConfigRun, Preset, PresetOptions};
use wucb::env::{build_synthetic, ArmDistribution, CoordinateLaw, ProblemInstance};
use wucb::policy::{PolicyKind, WucbState};
use wucb::sim::{run_experiment, verify_counters, ExperimentResult};

const HORIZON: u64 = 100_000;
const PATHS: usize = 20;
const SEED: u64 = 2024;
const ALL: [usize; 5] = [0, 1, 2, 3, 4];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&Fixtures) -> Outcome);

struct Fixtures {
    fig1a: Vec<ConfigRun>,
    fig1b: Vec<ConfigRun>,
    fig1c: Vec<ConfigRun>,
    baselines: Vec<ExperimentResult>,
    dir: tempfile::TempDir,
}

fn options() -> PresetOptions {
    PresetOptions {
        horizon: HORIZON,
        paths: PATHS,
        ..PresetOptions::default()
    }
}

fn fixtures() -> Fixtures {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |p: Preset| {
        run_preset(p, SEED, &dir.path().join("first"), &options())
            .expect("preset run")
            .runs
    };
    let fig1a = run(Preset::Fig1a);
    let fig1b = run(Preset::Fig1b);
    let fig1c = run(Preset::Fig1c);
    let policies = [PolicyKind::Oracle, PolicyKind::Random, PolicyKind::Ucb1];
    let baselines = [(10, 1.0), (10, 0.5), (5, 1.0)]
        .into_iter()
        .map(|(k, g)| {
            let inst = build_synthetic(k, g, &ALL, SEED).expect("instance");
            run_experiment(&inst, &policies, HORIZON, PATHS, SEED, 100, true).expect("baselines")
        })
        .collect();
    Fixtures {
        fig1a,
        fig1b,
        fig1c,
        baselines,
        dir,
    }
}

fn final_mean(run: &ConfigRun) -> f64 {
    run.result.runs[0].pseudo.final_mean()
}

fn finals(runs: &[ConfigRun]) -> Vec<f64> {
    runs.iter().map(final_mean).collect()
}

fn c01_counter_identities(f: &Fixtures) -> Outcome {
    let mut traces = 0;
    let results = f
        .fig1a
        .iter()
        .chain(&f.fig1b)
        .chain(&f.fig1c)
        .map(|r| &r.result)
        .chain(&f.baselines);
    for res in results {
        for run in &res.runs {
            for tr in &run.traces {
                let report = verify_counters(tr, res.horizon);
                if !report.all_passed() {
                    return Err(format!(
                        "{} seed {}: {:?}",
                        run.policy,
                        tr.seed,
                        report.failed()
                    ));
                }
                traces += 1;
            }
        }
    }
    Ok(format!("{traces} paths checked"))
}

fn c02_oracle_zero(f: &Fixtures) -> Outcome {
    let mut checkpoints = 0;
    for res in &f.baselines {
        let run = res.run(PolicyKind::Oracle).ok_or("oracle missing")?;
        for tr in &run.traces {
            if let Some(r) = tr.cum_pseudo_regret.iter().find(|&&r| r != 0.0) {
                return Err(format!("seed {} has pseudo-regret {r}", tr.seed));
            }
            checkpoints += tr.cum_pseudo_regret.len();
        }
        if run.pseudo.mean.iter().any(|&m| m != 0.0) {
            return Err("nonzero mean curve".into());
        }
    }
    Ok(format!("{checkpoints} checkpoints all exactly 0"))
}

/// Index evaluation written from the definition, on a raw pull history.
fn reference_select(k: usize, history: &[(usize, Vec<f64>)], lam: &[f64]) -> usize {
    let t = history.len();
    if t < k {
        return t;
    }
    let s = (t + 1) as f64;
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..k {
        let pulls: Vec<&Vec<f64>> = history.iter().filter(|(a, _)| *a == i).map(|(_, x)| x).collect();
        let value = if pulls.is_empty() {
            f64::INFINITY
        } else {
            let n = pulls.len() as f64;
            let mut reward = 0.0;
            for x in &pulls {
                for (l, v) in lam.iter().zip(x.iter()) {
                    reward += l * v;
                }
            }
            reward / n + (2.0 * s.ln() / n).sqrt()
        };
        if value > best_value {
            best_value = value;
            best = i;
        }
    }
    best
}

fn c03_brute_force(_: &Fixtures) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cases = 1000;
    let mut agree = 0;
    let mut first_mismatch = None;
    for case in 0..cases {
        let k = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let t = rng.random_range(0..=20);
        let mut state = WucbState::new(k, d);
        let mut history = Vec::with_capacity(t);
        for _ in 0..t {
            // Half the cases follow the policy, half pull arbitrary arms.
            let arm = if case % 2 == 0 {
                rng.random_range(0..k)
            } else {
                let lam = random_preference(&mut rng, d);
                state.select(&lam).map_err(|e| e.to_string())?
            };
            // Coarse grids make exact index ties common.
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(0..=4) as f64 / 4.0).collect();
            state.update(arm, &x).map_err(|e| e.to_string())?;
            history.push((arm, x));
        }
        let lam = random_preference(&mut rng, d);
        let got = state.select(&lam).map_err(|e| e.to_string())?;
        let want = reference_select(k, &history, &lam);
        if got == want {
            agree += 1;
        } else if first_mismatch.is_none() {
            first_mismatch = Some(format!("case {case} K={k} d={d} t={t}: got {got}, want {want}"));
        }
    }
    if agree == cases {
        Ok(format!("{agree}/{cases} agree"))
    } else {
        Err(format!("{agree}/{cases} agree; first mismatch {}", first_mismatch.unwrap_or_default()))
    }
}

fn random_preference<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(1..=4) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn increase(run: &ConfigRun, from: u64, to: u64) -> Result<f64, String> {
    let curve = &run.result.runs[0].pseudo;
    let a = curve.mean_at(from).ok_or(format!("no checkpoint {from}"))?;
    let b = curve.mean_at(to).ok_or(format!("no checkpoint {to}"))?;
    Ok(b - a)
}

fn c04_constancy(f: &Fixtures) -> Outcome {
    let k5 = increase(&f.fig1a[0], 50_000, HORIZON)?;
    let k10 = increase(&f.fig1a[1], 50_000, HORIZON)?;
    let detail = format!("K=5 increase {k5:.4}, K=10 increase {k10:.4}, ratio {:.4}", k5 / k10);
    if k10 > 0.0 && k5 <= 0.05 * k10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] })
}

fn fmt(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.2}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn c05_k_monotone(f: &Fixtures) -> Outcome {
    let v = finals(&f.fig1a);
    let detail = format!("K=5,10,15,20: {}", fmt(&v));
    if strictly(&v, true) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Least squares of `y` on `x`: `(slope, intercept, r²)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn c06_log_growth(f: &Fixtures) -> Outcome {
    let run = &f.fig1a[1];
    let curve = &run.result.runs[0].pseudo;
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .checkpoints
        .iter()
        .zip(&curve.mean)
        .filter(|(t, _)| (1_000..=HORIZON).contains(*t))
        .map(|(&t, &m)| ((t as f64).ln(), m))
        .unzip();
    let (slope, _, r2) = linear_fit(&x, &y);
    let b = BoundInputs::from_summary(&run.summary, 5, HORIZON as f64, 0.99, 1.0).map_err(|e| e.to_string())?;
    let envelope = theorem1_coefficient(&b);
    let detail = format!("{} points, R² {r2:.4}, slope {slope:.2} vs envelope {envelope:.1}", x.len());
    if r2 >= 0.95 && slope <= envelope {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c07_lemma34(f: &Fixtures) -> Outcome {
    let run = &f.fig1a[1];
    let s = &run.summary;
    let b = BoundInputs::from_summary(s, 5, HORIZON as f64, 0.99, 1.0).map_err(|e| e.to_string())?;
    let rhs = lemma34_rhs(&b);
    let means = run.result.runs[0].mean_n_i_j();
    let mut worst: f64 = 0.0;
    for &i in &s.s2 {
        let pulls: f64 = s.s1.iter().map(|&j| means[i][j]).sum();
        worst = worst.max(pulls);
        if pulls > rhs {
            return Err(format!("arm {} pulled {pulls:.1} > {rhs:.1}", i + 1));
        }
    }
    Ok(format!("max over S2 {worst:.1} <= {rhs:.1}"))
}

fn c08_gamma(f: &Fixtures) -> Outcome {
    let v = finals(&f.fig1b);
    let detail = format!("gamma=1.0,0.7,0.5: {}", fmt(&v));
    if strictly(&v, true) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c09_diversity(f: &Fixtures) -> Outcome {
    let v = finals(&f.fig1c);
    let sizes: Vec<usize> = f.fig1c.iter().map(|r| r.summary.s1.len()).collect();
    if sizes != [2, 3, 4, 5] {
        return Err(format!("unexpected |S1| values {sizes:?}"));
    }
    let detail = format!("|S1|=2,3,4,5: {}", fmt(&v));
    if strictly(&v, false) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn expected_optima(instance: &ProblemInstance, means: &[Vec<f64>]) -> Vec<usize> {
    instance
        .preferences()
        .support()
        .iter()
        .map(|lam| {
            let rewards: Vec<f64> = means
                .iter()
                .map(|m| lam.iter().zip(m).map(|(a, b)| a * b).sum())
                .collect();
            let mut best = 0;
            for (i, r) in rewards.iter().enumerate() {
                if *r > rewards[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

fn c10_alternative_swap(_: &Fixtures) -> Outcome {
    let inst = build_synthetic(10, 1.0, &ALL, SEED).map_err(|e| e.to_string())?;
    let s = inst.summarize().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for &j in &s.s1 {
        for &i in &s.s2 {
            for eps in [0.1 * s.l, 0.5 * s.l, 0.9 * s.l] {
                let alt = alt_environment(&inst, j, i, eps).map_err(|e| e.to_string())?;
                let alt_summary = alt.summarize().map_err(|e| e.to_string())?;
                // Closed-form means of the altered arm, independent of the library.
                let mut means = inst.means().to_vec();
                means[i] = inst.means()[j].iter().map(|m| (1.0 - eps) * m + eps).collect();
                let independent = expected_optima(&inst, &means);
                for (m, &orig) in s.optimal_arm_of.iter().enumerate() {
                    let want = if orig == j { i } else { orig };
                    let got = alt_summary.optimal_arm_of[m];
                    if got != want || independent[m] != want {
                        return Err(format!(
                            "j={} i={} eps={eps}: preference {} optimum {got} (closed form {}), want {want}",
                            j + 1,
                            i + 1,
                            m + 1,
                            independent[m]
                        ));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (j, i, eps) triples"))
}

fn categorical(coords: &[(&[f64], &[f64])]) -> ArmDistribution {
    ArmDistribution::product_categorical(
        coords
            .iter()
            .map(|(p, q)| CoordinateLaw {
                points: p.to_vec(),
                probabilities: q.to_vec(),
            })
            .collect(),
    )
    .expect("valid arm")
}

fn c11_kl(_: &Fixtures) -> Outcome {
    let pts: &[f64] = &[0.0, 1.0];
    let p = categorical(&[(pts, &[0.5, 0.5])]);
    let q = categorical(&[(pts, &[0.25, 0.75])]);
    let kl = |a: &ArmDistribution, b: &ArmDistribution| kl_product(a, b).map_err(|e| e.to_string());

    let pp = kl(&p, &p)?;
    if pp.abs() > 1e-12 {
        return Err(format!("KL(p, p) = {pp}"));
    }
    let pq = kl(&p, &q)?;
    let closed = 0.5 * (4.0f64 / 3.0).ln();
    if (pq - closed).abs() > 1e-9 {
        return Err(format!("Bernoulli KL {pq} vs {closed}"));
    }
    let p2 = categorical(&[(pts, &[0.5, 0.5]), (pts, &[0.5, 0.5])]);
    let q2 = categorical(&[(pts, &[0.25, 0.75]), (pts, &[0.25, 0.75])]);
    let doubled = kl(&p2, &q2)?;
    if (doubled - 2.0 * pq).abs() > 1e-12 {
        return Err(format!("d=2 KL {doubled} vs 2×{pq}"));
    }
    let three: &[f64] = &[0.0, 0.5, 1.0];
    let a = categorical(&[(pts, &[0.3, 0.7]), (three, &[0.2, 0.5, 0.3])]);
    let b = categorical(&[(pts, &[0.6, 0.4]), (three, &[0.1, 0.1, 0.8])]);
    let sum = kl(
        &categorical(&[(pts, &[0.3, 0.7])]),
        &categorical(&[(pts, &[0.6, 0.4])]),
    )? + kl(
        &categorical(&[(three, &[0.2, 0.5, 0.3])]),
        &categorical(&[(three, &[0.1, 0.1, 0.8])]),
    )?;
    let joint = kl(&a, &b)?;
    if (joint - sum).abs() > 1e-12 {
        return Err(format!("mixed additivity {joint} vs {sum}"));
    }
    Ok(format!("KL(p,q) = {pq:.9}, additivity within 1e-12"))
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).expect("read output");
            (p.file_name().unwrap().to_string_lossy().into_owned(), bytes)
        })
        .collect()
}

fn c12_determinism(f: &Fixtures) -> Outcome {
    let first = read_all(&f.dir.path().join("first"));
    let csvs = first.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    for (label, threads) in [("one_thread", 1), ("four_threads", 4)] {
        let out = f.dir.path().join(label);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| -> Result<(), String> {
            for p in [Preset::Fig1a, Preset::Fig1b, Preset::Fig1c] {
                run_preset(p, SEED, &out, &options()).map_err(|e| e.to_string())?;
            }
            Ok(())
        })?;
        let again = read_all(&out);
        if again.len() != first.len() {
            return Err(format!("{label}: {} files vs {}", again.len(), first.len()));
        }
        for ((name, a), (_, b)) in first.iter().zip(&again) {
            if a != b {
                return Err(format!("{label}: {name} differs"));
            }
        }
    }
    Ok(format!(
        "{csvs} CSVs and {} summaries identical across 3 runs (default, 1 and 4 threads)",
        first.len() - csvs
    ))
}

/// Longer-horizon context for the two criteria whose claims are asymptotic.
/// Printed only; never affects the verdict.
fn diagnostics(f: &Fixtures) -> Result<Vec<String>, String> {
    let long = PresetOptions {
        horizon: 1_000_000,
        paths: PATHS,
        checkpoint_stride: 1_000,
        ..PresetOptions::default()
    };
    let runs = run_preset(Preset::Fig1b, SEED, &f.dir.path().join("long"), &long)
        .map_err(|e| e.to_string())?
        .runs;
    let curve = &runs[0].result.runs[0].pseudo;
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .checkpoints
        .iter()
        .zip(&curve.mean)
        .filter(|(t, _)| **t >= 10_000)
        .map(|(&t, &m)| ((t as f64).ln(), m))
        .unzip();
    let (slope, _, r2) = linear_fit(&x, &y);
    Ok(vec![
        format!("K=10 fit against ln t over [1e4, 1e6]: R² {r2:.4}, slope {slope:.2}"),
        format!("gamma=1.0,0.7,0.5 at T=1e6: {}", fmt(&finals(&runs))),
    ])
}

fn main() -> ExitCode {
    let start = Instant::now();
    let f = fixtures();
    eprintln!("fixtures ready in {:.1}s", start.elapsed().as_secs_f64());

    let criteria: [Criterion; 12] = [
        ("01 counter identities", c01_counter_identities),
        ("02 oracle zero regret", c02_oracle_zero),
        ("03 brute-force index equivalence", c03_brute_force),
        ("04 constant regret when every arm is optimal somewhere", c04_constancy),
        ("05 regret increases with K", c05_k_monotone),
        ("06 logarithmic growth under the upper-bound slope", c06_log_growth),
        ("07 strictly sub-optimal pulls under the lemma bound", c07_lemma34),
        ("08 regret increases as gamma decreases", c08_gamma),
        ("09 regret decreases as |S1| increases", c09_diversity),
        ("10 alternative environment swaps exactly one optimum", c10_alternative_swap),
        ("11 KL divergence oracle", c11_kl),
        ("12 byte-identical presets across runs and thread counts", c12_determinism),
    ];

    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = check(&f);
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    match diagnostics(&f) {
        Ok(lines) => lines.iter().for_each(|l| println!("INFO  {l}")),
        Err(e) => println!("INFO  diagnostics unavailable: {e}"),
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
