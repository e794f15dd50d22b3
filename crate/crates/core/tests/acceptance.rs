//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! process fails if any check fails.

use std::process::Command;
use std::time::{Duration, Instant};

use evpool::allocation::{
    allocate_fcfs, allocate_proportional, allocate_utilitarian, check_shortfall_minimizing,
    random_order, shortfall, AllocationPolicy, FirstComeFirstServed, Proportional, RuleKind,
    Utilitarian, SATISFACTION_SLACK,
};
use evpool::analysis::{gaussian_gap, mc_rectified_sum_mean, GaussianFleetSpec};
use evpool::experiment::{run_reduction_sweep_on, ExperimentConfig, SweepRow};
use evpool::ingest::{generate_synthetic_fleet, sample_scenarios, DemandModel, SyntheticFleetSpec};
use evpool::planner::{
    conservatism_heuristic, solve_scenario_lp_direct, solve_scenario_problem, PlannerParams,
};
use evpool::reliability::{
    chernoff_sample_size, estimate_aggregate_reliability, estimate_min_reliability,
};
use evpool::{BatteryConfig, ScenarioSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn synthetic(n: usize) -> Vec<DemandModel> {
    generate_synthetic_fleet(&SyntheticFleetSpec {
        n_drivers: n,
        ..Default::default()
    })
    .unwrap()
    .into_iter()
    .map(Into::into)
    .collect()
}

// ---- scenario LP against vertex enumeration --------------------------------

/// `min s + Σp` over `s + Σ_{i∈S} p_i ≥ Σ_{i∈S} d_ij` for every scenario and
/// subset, plus `p ≥ 0`, by trying every choice of `N + 1` tight planes.
fn vertex_oracle(columns: &[Vec<f64>]) -> f64 {
    let n = columns[0].len();
    let dim = n + 1;
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for col in columns {
        for mask in 0u32..1 << n {
            let mut a = vec![0.0; dim];
            a[n] = 1.0;
            let mut b = 0.0;
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    a[i] = 1.0;
                    b += col[i];
                }
            }
            planes.push((a, b));
        }
    }
    for i in 0..n {
        let mut a = vec![0.0; dim];
        a[i] = 1.0;
        planes.push((a, 0.0));
    }
    planes.sort_by(|x, y| {
        x.0.iter()
            .zip(&y.0)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(x.1.total_cmp(&y.1))
    });
    planes.dedup();

    let feasible = |x: &[f64]| {
        planes
            .iter()
            .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() >= b - 1e-9)
    };
    let mut best = f64::INFINITY;
    let mut pick = Vec::with_capacity(dim);
    enumerate(planes.len(), dim, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(&x) {
                best = best.min(x.iter().sum());
            }
        }
    });
    best
}

fn enumerate(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        enumerate(n, k, i + 1, cur, f);
        cur.pop();
    }
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn lp_oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let worked = vec![vec![1.0, 1.0], vec![3.0, 0.0]];
    let worked_set = ScenarioSet::from_columns(worked.clone()).unwrap();
    let worked_lp = solve_scenario_lp_direct(&worked_set).unwrap().objective;
    let worked_ok = (vertex_oracle(&worked) - 3.0).abs() < 1e-9 && (worked_lp - 3.0).abs() < 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=5);
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| f64::from(rng.random_range(0..=9u8)))
                    .collect()
            })
            .collect();
        let set = ScenarioSet::from_columns(cols.clone()).unwrap();
        let oracle = vertex_oracle(&cols);
        let direct = solve_scenario_lp_direct(&set).unwrap().objective;
        let cuts = solve_scenario_problem(&set).unwrap().objective;
        worst = worst
            .max((direct - oracle).abs())
            .max((cuts - oracle).abs());
    }
    let elapsed = started.elapsed();
    check(
        worked_ok && worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("worked instance {worked_lp}, 100 instances max |lp - oracle| = {worst:.2e}, {elapsed:.1?}"),
    )
}

// ---- per-sample shortfall-minimizing implication ----------------------------

fn covered_pool_implication() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    // Largest raw `shortfall - allocation` seen per rule, before the slack.
    let mut deficit = [0.0f64; 3];
    for _ in 0..10_000 {
        let n = rng.random_range(1..=12);
        let personal: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
        let demand: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
        let total: f64 = demand
            .iter()
            .zip(&personal)
            .map(|(d, p)| (d - p).max(0.0))
            .sum();
        let extra = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..10.0)
        };
        let config = BatteryConfig {
            personal,
            shared: total + extra,
        };
        let short = shortfall(&config, &demand).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let fcfs = FirstComeFirstServed {
            order: order.clone(),
        };
        let rules: [&dyn AllocationPolicy; 3] = [&Proportional, &fcfs, &Utilitarian];
        for (k, rule) in rules.into_iter().enumerate() {
            if !check_shortfall_minimizing(rule, &config, &demand).unwrap() {
                violations += 1;
            }
            let r = rule.allocate(&config, &demand).unwrap();
            for (a, s) in r.allocations.iter().zip(&short) {
                deficit[k] = deficit[k].max(s - a);
            }
        }
    }
    check(
        violations == 0,
        format!(
            "10000 triples x 3 rules, {violations} violations; largest raw deficit \
             proportional {:.1e}, fcfs {:.1e}, utilitarian {:.1e} (slack {SATISFACTION_SLACK:.0e})",
            deficit[0], deficit[1], deficit[2]
        ),
    )
}

// ---- planner output and per-driver reliability --------------------------------

struct Planned {
    config: BatteryConfig,
    alpha: f64,
    fresh: ScenarioSet,
}

fn planned_configurations() -> Vec<Planned> {
    let mut out = Vec::new();
    for (k, (n, alpha)) in [(5, 0.8), (5, 0.9), (10, 0.85), (20, 0.9), (20, 0.95)]
        .into_iter()
        .enumerate()
    {
        let models = synthetic(n);
        let params = PlannerParams {
            alpha,
            trials: 3,
            seed: 100 + k as u64,
            ..Default::default()
        };
        let h = conservatism_heuristic(&models, &params).unwrap();
        let m = chernoff_sample_size(n, params.epsilon, params.delta).unwrap();
        let fresh = sample_scenarios(&models, m, 9_000 + k as u64).unwrap();
        out.push(Planned {
            config: h.config,
            alpha,
            fresh,
        });
    }
    out
}

fn empirical_per_driver_guarantee(planned: &[Planned]) -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (k, p) in planned.iter().enumerate() {
        let agg = estimate_aggregate_reliability(&p.config, &p.fresh).unwrap();
        if agg < p.alpha {
            continue;
        }
        for rule in RuleKind::ALL {
            let est = estimate_min_reliability(&p.config, rule, &p.fresh, k as u64).unwrap();
            checked += 1;
            if est.min_over_drivers < agg {
                failures.push(format!("{rule}: {} < {agg}", est.min_over_drivers));
            }
        }
    }
    check(
        checked > 0 && failures.is_empty(),
        format!(
            "{checked} (configuration, rule) pairs with aggregate >= target; failures {failures:?}"
        ),
    )
}

fn allocation_dominance(planned: &[Planned]) -> Outcome {
    let mut samples = 0usize;
    let mut violations = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cases: Vec<(BatteryConfig, &ScenarioSet)> = Vec::new();
    for p in planned {
        cases.push((p.config.clone(), &p.fresh));
        let n = p.config.n_drivers();
        for _ in 0..3 {
            let personal: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
            let shared = rng.random_range(0.0..15.0 * n as f64);
            cases.push((BatteryConfig { personal, shared }, &p.fresh));
        }
    }
    for (k, (config, set)) in cases.iter().enumerate() {
        for j in 0..set.n_scenarios() {
            let d = set.column(j);
            let prop = allocate_proportional(config, d).unwrap();
            let fcfs =
                allocate_fcfs(config, d, &random_order(d.len(), k as u64, j as u64)).unwrap();
            let util = allocate_utilitarian(config, d).unwrap();
            samples += 1;
            let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !x || *y);
            if !subset(&prop.satisfied, &fcfs.satisfied)
                || !subset(&prop.satisfied, &util.satisfied)
                || util.n_satisfied() < fcfs.n_satisfied()
            {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!(
            "{} configurations, {samples} samples, {violations} violations",
            cases.len()
        ),
    )
}

// ---- heuristic targeting ----------------------------------------------------

fn heuristic_targeting() -> Outcome {
    let started = Instant::now();
    let models = synthetic(10);
    let m = chernoff_sample_size(10, 0.02, 0.05).unwrap();
    let mut reliabilities = Vec::new();
    for seed in 0..20u64 {
        let params = PlannerParams {
            alpha: 0.9,
            delta: 0.05,
            epsilon: 0.02,
            trials: 5,
            seed,
            ..Default::default()
        };
        let h = conservatism_heuristic(&models, &params).unwrap();
        let fresh = sample_scenarios(&models, m, 77_000 + seed).unwrap();
        reliabilities.push(estimate_aggregate_reliability(&h.config, &fresh).unwrap());
    }
    let lo = reliabilities.iter().copied().fold(1.0, f64::min);
    let hi = reliabilities.iter().copied().fold(0.0, f64::max);
    let elapsed = started.elapsed();
    check(
        lo >= 0.88 && hi <= 0.97 && elapsed < Duration::from_secs(300),
        format!("fresh aggregate reliability over 20 seeds in [{lo:.4}, {hi:.4}], {elapsed:.1?}"),
    )
}

// ---- sharing-benefit trends -------------------------------------------------

fn sharing_trends() -> Outcome {
    let population = synthetic(100);
    let config = ExperimentConfig {
        alpha_grid: vec![0.75, 0.85, 0.95],
        n_grid: vec![10, 25, 50, 100],
        trials: 10,
        seed: 2024,
        ..Default::default()
    };
    let rows = run_reduction_sweep_on(&population, &config).unwrap();
    let median = |n: usize, a: f64| -> f64 {
        rows.iter()
            .find(|r: &&SweepRow| r.n_drivers == n && r.alpha_target == a)
            .unwrap()
            .reduction_median
    };
    let a = [(25, 0.85), (25, 0.95), (50, 0.85), (50, 0.95)]
        .iter()
        .all(|&(n, al)| median(n, al) > 0.0);
    let b = median(100, 0.85) > median(10, 0.85);
    let c = median(50, 0.95) > median(50, 0.75);
    check(
        a && b && c,
        format!(
            "shared < non-shared at N=25/50, a=.85/.95: {a} (medians {:.3} {:.3} {:.3} {:.3}); \
             N=100 {:.3} > N=10 {:.3}: {b}; a=.95 {:.3} > a=.75 {:.3}: {c}",
            median(25, 0.85),
            median(25, 0.95),
            median(50, 0.85),
            median(50, 0.95),
            median(100, 0.85),
            median(10, 0.85),
            median(50, 0.95),
            median(50, 0.75)
        ),
    )
}

// ---- Chernoff coverage --------------------------------------------------------

fn chernoff_coverage() -> Outcome {
    let exact = chernoff_sample_size(100, 0.01, 0.01).unwrap();
    let (n, eps, delta) = (20, 0.05, 0.05);
    let m = chernoff_sample_size(n, eps, delta).unwrap();
    let truth: Vec<f64> = (0..n)
        .map(|i| 0.5 + 0.49 * i as f64 / (n - 1) as f64)
        .collect();
    // Demand 1 on a failure day against a personal battery of 0.5 and no pool,
    // so per-driver satisfaction frequencies are Bernoulli(truth_i) means.
    let config = BatteryConfig {
        personal: vec![0.5; n],
        shared: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exceed = 0;
    for rep in 0..200u64 {
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                truth
                    .iter()
                    .map(|&p| if rng.random_bool(p) { 0.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        let set = ScenarioSet::from_columns(cols).unwrap();
        let est = estimate_min_reliability(&config, RuleKind::Utilitarian, &set, rep).unwrap();
        let err = est
            .per_driver
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > eps {
            exceed += 1;
        }
    }
    check(
        exact == 396_140 && exceed <= 20,
        format!("closed form (100, .01, .01) = {exact}; m = {m}; error > eps in {exceed}/200 repetitions"),
    )
}

// ---- Gaussian appendix ------------------------------------------------------

fn gaussian_appendix() -> Outcome {
    let spec = |n| GaussianFleetSpec {
        n_drivers: n,
        mu: 10.0,
        sigma: 2.0,
        alpha: 0.9,
    };
    let s50 = spec(50);
    let mc = mc_rectified_sum_mean(&s50, 100_000, 8).unwrap();
    let rel = (mc / s50.expected_aggregate_shortfall() - 1.0).abs();
    let gaps: Vec<f64> = [100, 400, 800]
        .iter()
        .map(|&n| gaussian_gap(&spec(n), 2.0).unwrap())
        .collect();
    let ratio = gaps[2] / gaps[1];
    check(
        rel < 0.01 && gaps.iter().all(|g| *g > 0.0) && (1.8..=2.2).contains(&ratio),
        format!(
            "MC mean off by {:.3}%; gaps {:.2} {:.2} {:.2}; gap(800)/gap(400) = {ratio:.4} (band [1.8, 2.2])",
            100.0 * rel,
            gaps[0],
            gaps[1],
            gaps[2]
        ),
    )
}

// ---- determinism ------------------------------------------------------------

fn sweep_is_deterministic() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.json"),
        r#"{"alpha_grid":[0.8,0.9],"n_grid":[4,8],"trials":3,"epsilon":0.05,
            "source":{"kind":"synthetic","n_drivers":8}}"#,
    )
    .unwrap();
    let run = |out: &str, threads: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_evpool"))
            .args([
                "--config",
                "exp.json",
                "--seed",
                "31",
                "--out",
                out,
                "reduction-sweep",
            ])
            .env("RAYON_NUM_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read(dir.path().join(out).join("reduction_sweep.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    check(
        a == b && !a.is_empty(),
        format!("two runs, {} bytes each, identical: {}", a.len(), a == b),
    )
}

fn main() {
    let planned = planned_configurations();
    let checks: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        (
            "scenario LP vs vertex enumeration",
            Box::new(lp_oracle_equivalence),
        ),
        (
            "covered pool covers every shortfall",
            Box::new(covered_pool_implication),
        ),
        (
            "per-driver reliability >= aggregate",
            Box::new(|| empirical_per_driver_guarantee(&planned)),
        ),
        (
            "heuristic lands near the target",
            Box::new(heuristic_targeting),
        ),
        ("sharing benefit trends", Box::new(sharing_trends)),
        (
            "allocation rule dominance",
            Box::new(|| allocation_dominance(&planned)),
        ),
        ("Chernoff sample size coverage", Box::new(chernoff_coverage)),
        ("Gaussian gap scaling", Box::new(gaussian_appendix)),
        (
            "reduction sweep determinism",
            Box::new(sweep_is_deterministic),
        ),
    ];
    let mut failed = 0;
    for (k, (name, f)) in checks.into_iter().enumerate() {
        let o = f();
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
