//! Acceptance criteria. Each test prints one PASS or FAIL line to stderr
//! (written directly so the harness does not capture it) and then asserts.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_gittins::index::{build_surface, IndexConfig, IndexSurface};
use robust_gittins::nle::{
    beta_quantile, compose_expectation, dr_one_step, reg_inc_beta, CredibleModel, PosteriorState,
    ThetaInterval,
};
use robust_gittins::oracle::{
    check_engine_equivalence, consistency_counterexample_values, counterexample_values,
    run_suite, sup_enumerated, FiniteTree, SuiteConfig,
};
use robust_gittins::policy::PolicySpec;
use robust_gittins::sim::{run_batch, GammaParam, ScenarioConfig, Summary};

fn verdict(number: u32, title: &str, ok: bool, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {number} ({title}): {status}; {detail}");
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn random_interval(rng: &mut ChaCha8Rng) -> ThetaInterval {
    let (a, b): (f64, f64) = (rng.gen(), rng.gen());
    ThetaInterval::new(a.min(b), a.max(b)).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> PosteriorState {
    PosteriorState::new(rng.gen(), rng.gen_range(1..20) as f64).unwrap()
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect()
}

fn leaf_of(path: &[bool]) -> usize {
    path.iter().fold(0, |acc, &o| 2 * acc + o as usize)
}

#[test]
fn criterion_1_coherence_axioms() {
    const CASES: usize = 1000;
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();

    for case in 0..CASES {
        let th = random_interval(&mut rng);
        let e = |f0: f64, f1: f64| dr_one_step(f0, f1, th);
        let [f0, f1, g0, g1] = [0; 4].map(|_| rng.gen_range(-5.0..5.0));
        let (d0, d1) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
        let c = rng.gen_range(-5.0..5.0);
        let lambda = rng.gen_range(0.0..10.0);
        let checks = [
            ("monotone", e(f0, f1) <= e(f0 + d0, f1 + d1) + TOL),
            ("translation", (e(f0 + c, f1 + c) - e(f0, f1) - c).abs() <= TOL),
            ("normalized", e(0.0, 0.0) == 0.0),
            ("subadditive", e(f0 + g0, f1 + g1) <= e(f0, f1) + e(g0, g1) + TOL),
            ("homogeneous", (e(lambda * f0, lambda * f1) - lambda * e(f0, f1)).abs() <= TOL),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("one-step {name} case {case}"));
            }
        }
    }

    for case in 0..CASES {
        let depth = rng.gen_range(1..=4);
        let s = random_state(&mut rng);
        let model = CredibleModel::with_level(rng.gen_range(0.0..0.99)).unwrap();
        let e = |v: &[f64]| compose_expectation(|p| v[leaf_of(p)], s, model, depth).unwrap();
        let n = 1 << depth;
        let f = random_values(&mut rng, n);
        let g = random_values(&mut rng, n);
        let bumped: Vec<f64> = f.iter().map(|x| x + rng.gen_range(0.0..3.0)).collect();
        let c = rng.gen_range(-5.0..5.0);
        let lambda = rng.gen_range(0.0..10.0);
        let shifted: Vec<f64> = f.iter().map(|x| x + c).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
        let scaled: Vec<f64> = f.iter().map(|x| lambda * x).collect();
        let checks = [
            ("monotone", e(&f) <= e(&bumped) + TOL),
            ("translation", (e(&shifted) - e(&f) - c).abs() <= TOL),
            ("normalized", e(&vec![0.0; n]) == 0.0),
            ("subadditive", e(&sum) <= e(&f) + e(&g) + TOL),
            ("homogeneous", (e(&scaled) - lambda * e(&f)).abs() <= TOL),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("composed {name} case {case} depth {depth}"));
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = failures.is_empty() && within(elapsed, 10);
    verdict(
        1,
        "coherence axioms",
        ok,
        &format!(
            "{CASES} one-step and {CASES} composed cases per axiom, {} violations, {:.2?}",
            failures.len(),
            elapsed
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_2_representation() {
    const TREES: usize = 200;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..TREES {
        let depth = rng.gen_range(1..=3);
        let s = random_state(&mut rng);
        let model = CredibleModel::with_level(rng.gen_range(0.0..0.99)).unwrap();
        let values = random_values(&mut rng, 1 << depth);
        let composed = compose_expectation(|p| values[leaf_of(p)], s, model, depth).unwrap();
        let tree = FiniteTree::from_credible_model(s, model, depth, 0.9).unwrap();
        let enumerated = sup_enumerated(&tree, 0, &values).unwrap();
        worst = worst.max((composed - enumerated).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-12 && within(elapsed, 30);
    verdict(
        2,
        "composition equals extreme-point enumeration",
        ok,
        &format!("{TREES} trees, largest gap {worst:e}, {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_engine_matches_oracle() {
    const TREES: usize = 50;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spacing = 1.0 / 200.0;
    let mut failures = Vec::new();
    for i in 0..TREES {
        let k = rng.gen_range(0.01..0.9);
        let beta = rng.gen_range(0.5..0.9999);
        let n0 = rng.gen_range(1..=5) as f64;
        let depth = rng.gen_range(1..=4);
        let cell = rng.gen_range(0..=100);
        let report = check_engine_equivalence(k, beta, n0, depth, cell, spacing);
        if !report.passed() {
            failures.push(format!("tree {i}: {:?}", report.violations));
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && within(elapsed, 120);
    verdict(
        3,
        "index engine matches the brute-force index",
        ok,
        &format!(
            "{TREES} trees of depth 1 to 4, tolerance {spacing}, {} mismatches, {elapsed:.2?}",
            failures.len()
        ),
    );
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion_4_theorem_suite() {
    let start = Instant::now();
    let main = run_suite(&SuiteConfig {
        seed: 4000,
        depth: 3,
        instances: 50,
        ..SuiteConfig::default()
    })
    .unwrap();
    let deep = run_suite(&SuiteConfig {
        seed: 4100,
        depth: 4,
        instances: 10,
        ..SuiteConfig::default()
    })
    .unwrap();
    let (joint, biased_first, fair_first) = consistency_counterexample_values().unwrap();
    let orders_ok = (joint - 0.5).abs() <= 1e-12
        && (biased_first - 0.5).abs() <= 1e-12
        && (fair_first - 1.0).abs() <= 1e-12;
    let sandwich = main.of("sandwich_and_optimality").count();
    let failed: Vec<String> = main
        .failed()
        .chain(deep.failed())
        .map(ToString::to_string)
        .collect();
    let reports = main.reports.len() + deep.reports.len();
    let elapsed = start.elapsed();
    let ok = failed.is_empty() && orders_ok && sandwich >= 50 && within(elapsed, 300);
    verdict(
        4,
        "theorem suite",
        ok,
        &format!(
            "{reports} reports over 60 seeds ({sandwich} two-arm instances), {} failed; \
             iterated orders give {biased_first} and {fair_first}; {elapsed:.2?}",
            failed.len()
        ),
    );
    assert!(ok, "{failed:#?}");
}

#[test]
fn criterion_5_random_benchmark_reversal() {
    let v = counterexample_values((0.4, 0.5), (0.0, 0.6)).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let ok = close(v.first, 0.5)
        && close(v.second, 0.6)
        && close(v.first_excess, 0.25)
        && close(v.second_excess, 0.1)
        && v.first < v.second
        && v.first_excess > v.second_excess;
    verdict(
        5,
        "random benchmark reverses the ranking",
        ok,
        &format!(
            "E(H)={} E(G)={} E(H-(H+G)/2)={} E(G-(H+G)/2)={}",
            v.first, v.second, v.first_excess, v.second_excess
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_beta_quantile() {
    const CASES: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..CASES {
        let a = 50.0 - rng.gen_range(0.0..49.9);
        let b = 50.0 - rng.gen_range(0.0..49.9);
        let q = rng.gen_range(0.01..0.99);
        let x = beta_quantile(a, b, q).unwrap();
        worst = worst.max((reg_inc_beta(a, b, x).unwrap() - q).abs());
    }
    let mut closed: f64 = 0.0;
    for i in 1..100 {
        let q = i as f64 / 100.0;
        closed = closed.max((beta_quantile(1.0, 1.0, q).unwrap() - q).abs());
        closed = closed.max((beta_quantile(2.0, 1.0, q).unwrap() - q.sqrt()).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-8 && closed <= 1e-10 && within(elapsed, 5);
    verdict(
        6,
        "Beta quantile",
        ok,
        &format!("round trip {worst:e} over {CASES} cases, closed forms {closed:e}, {elapsed:.2?}"),
    );
    assert!(ok);
}

fn mean_gap(surface: &IndexSurface, stage: usize, abs: bool) -> f64 {
    let grid = surface.config().p_grid();
    let gaps = grid.iter().zip(surface.stage(stage)).map(|(p, g)| {
        let d = g - p;
        if abs {
            d.abs()
        } else {
            d
        }
    });
    gaps.sum::<f64>() / grid.len() as f64
}

fn overall_mean_gap(surface: &IndexSurface) -> f64 {
    let t = surface.config().horizon();
    (0..t).map(|s| mean_gap(surface, s, false)).sum::<f64>() / t as f64
}

#[test]
fn criterion_7_surface_trends() {
    let start = Instant::now();
    let ks = [0.01, 0.5, 0.8];
    let betas = [0.95, 0.9999];
    let surfaces: Vec<Vec<IndexSurface>> = betas
        .iter()
        .map(|&beta| {
            ks.iter()
                .map(|&k| build_surface(&IndexConfig::with_grids(k, beta, 200, 1.0, 101, 201).unwrap()))
                .collect()
        })
        .collect();
    // Stage of an arm with n observations is n - n0.
    let (early, late) = (5 - 1, 150 - 1);
    let mut notes = Vec::new();

    let mut shrink_ok = true;
    for (bi, row) in surfaces.iter().enumerate() {
        for (ki, s) in row.iter().enumerate() {
            let (a, b) = (mean_gap(s, early, true), mean_gap(s, late, true));
            if !(b < a) {
                shrink_ok = false;
                notes.push(format!("k={} beta={}: {b} !< {a}", ks[ki], betas[bi]));
            }
        }
    }

    let mut k_violations = 0;
    for row in &surfaces {
        for pair in row.windows(2) {
            for (lo, hi) in pair[0].stages().zip(pair[1].stages()) {
                k_violations += lo.iter().zip(hi).filter(|(x, y)| x > y).count();
            }
        }
    }

    let mut beta_ok = true;
    for ki in 0..ks.len() {
        let (patient, impatient) = (overall_mean_gap(&surfaces[1][ki]), overall_mean_gap(&surfaces[0][ki]));
        if !(patient <= impatient + 0.01) {
            beta_ok = false;
            notes.push(format!("k={}: {patient} > {impatient} + 0.01", ks[ki]));
        }
    }

    let elapsed = start.elapsed();
    let ok = shrink_ok && k_violations == 0 && beta_ok && within(elapsed, 120);
    verdict(
        7,
        "surface trends",
        ok,
        &format!(
            "(a) gap shrinks {} (b) {k_violations} k-order violations (c) discount order {}; {elapsed:.2?} {notes:?}",
            if shrink_ok { "yes" } else { "no" },
            if beta_ok { "holds" } else { "fails" }
        ),
    );
    assert!(ok);
}

/// Mean of `a - b` over paired episodes and its standard error.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = Summary::of(&d);
    (s.mean, s.sd / (d.len() as f64).sqrt())
}

#[test]
fn criterion_8_policy_benchmark() {
    const SIMS: usize = 200;
    let start = Instant::now();
    let config = ScenarioConfig {
        arms: 10,
        horizon: 2000,
        gamma_param: GammaParam::Rate,
        seed: 8,
        ..ScenarioConfig::default()
    };
    let policies = [
        config.dr_policy(0.5, 0.9999).unwrap(),
        PolicySpec::Ucb { lambda: 2.0 },
        PolicySpec::Greedy,
        PolicySpec::Thompson { a0: 1.0, b0: 1.0 },
    ];
    let batch = run_batch(&policies, &config, SIMS, false).unwrap();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;

    let (dr_r, ucb_r) = (batch.regrets(0), batch.regrets(1));
    let (gap_a, se_a) = paired(&ucb_r, &dr_r);
    let a_ok = gap_a > 3.0 * se_a;
    let (greedy_n, thompson_n) = (batch.suboptimal(2), batch.suboptimal(3));
    let (gap_b, se_b) = paired(&greedy_n, &thompson_n);
    let b_ok = gap_b > 3.0 * se_b;

    let elapsed = start.elapsed();
    let ok = a_ok && b_ok && within(elapsed, 900);
    verdict(
        8,
        "policy benchmark",
        ok,
        &format!(
            "(a) {} R: DR {:.2}, UCB {:.2}, paired gap {gap_a:.2} (SE {se_a:.2}); \
             (b) {} N_subopt: Greedy {:.1}, Thompson {:.1}, paired gap {gap_b:.1} (SE {se_b:.1}); \
             seed {}, {SIMS} episodes, {elapsed:.2?}",
            if a_ok { "holds" } else { "fails" },
            mean(dr_r.clone()),
            mean(ucb_r.clone()),
            if b_ok { "holds" } else { "fails" },
            mean(greedy_n.clone()),
            mean(thompson_n.clone()),
            config.seed
        ),
    );
    assert!(a_ok, "DR regret is not below UCB regret by three standard errors");
    assert!(b_ok, "Greedy suboptimal plays do not exceed Thompson's by three standard errors");
}

fn cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_robust-gittins"))
        .args(args)
        .env("ROBUST_GITTINS_THREADS", "2")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let file = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let mut same = Vec::new();
    for run in ["a", "b"] {
        cli(&["surface", "--k", "0.2", "--horizon", "30", "-o", &file(&format!("surface_{run}.csv"))]);
        cli(&[
            "simulate", "--m", "5", "--horizon", "200", "--sims", "20", "--seed", "9",
            "-o", &file(&format!("results_{run}.csv")),
            "--trace", &file(&format!("trace_{run}.csv")),
        ]);
    }
    for name in ["surface", "surface_X.diff", "results", "trace"] {
        let read = |run: &str| {
            let path = if name == "surface_X.diff" {
                file(&format!("surface_{run}.diff.csv"))
            } else {
                file(&format!("{name}_{run}.csv"))
            };
            std::fs::read(path).unwrap()
        };
        same.push((name, read("a") == read("b")));
    }
    let ok = same.iter().all(|(_, eq)| *eq);
    verdict(9, "determinism", ok, &format!("identical bytes per file: {same:?}"));
    assert!(ok);
}
