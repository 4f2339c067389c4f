//! Acceptance suite: every deliverable checked end to end, one PASS/FAIL
//! line per check. Each check re-derives its expectations independently
//! (scalar bisection, dense linear algebra, Monte Carlo, exhaustive
//! enumeration) instead of trusting the code under test.

// `ensure!` writes `!cond` so a NaN comparison fails the criterion rather
// than slipping past an inverted bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use phca::acquisition::{
    expected_improvement, probability_of_improvement, standard_normal_cdf, standard_normal_pdf,
};
use phca::distflow::{check_limits, max_residual, solve_distflow};
use phca::fixtures::{
    random_injections, random_radial_network, six_node_feeder, six_node_scenarios,
    uneven_fork_feeder, uneven_fork_scenarios,
};
use phca::gp::{fit, GpConfig};
use phca::network::{Line, Network, Node};
use phca::risk::{penalized_objective, violation_probability};
use phca::scenario::{write_scenarios, DayScenario, ScenarioSet};
use phca::solvers::{solve, Method, SolveConfig};

/// Fails the enclosing criterion with a formatted reason.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Result<String, String>>);

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        (
            "power flow on random feeders + two-bus oracle",
            Box::new(power_flow),
        ),
        (
            "violation probability counts days exactly",
            Box::new(risk_estimate),
        ),
        (
            "objective equals capacity when feasible",
            Box::new(objective),
        ),
        (
            "gp posterior against a dense solver",
            Box::new(gp_posterior),
        ),
        (
            "acquisition closed forms against monte carlo",
            Box::new(acquisition),
        ),
        (
            "bayesopt reaches the grid oracle single-threaded",
            Box::new(end_to_end),
        ),
        (
            "bayesopt escapes the pattern-search trap",
            Box::new(multimodal),
        ),
        (
            "solver traces are byte-identical across reruns",
            Box::new(trace_determinism),
        ),
        (
            "risk estimate is worker-count invariant",
            Box::new(worker_invariance),
        ),
    ];

    let total = criteria.len();
    let mut failures = Vec::new();
    for (index, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let reason = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            Err(format!("panicked: {reason}"))
        });
        match outcome {
            Ok(detail) => println!("[{}/{total}] {name}: PASS ({detail})", index + 1),
            Err(reason) => {
                println!("[{}/{total}] {name}: FAIL ({reason})", index + 1);
                failures.push(format!("{name}: {reason}"));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

/// A substation, one load bus, and one line; the smallest network the
/// solver accepts and the one a scalar oracle can check.
fn two_bus(r: f64, x: f64, v0: f64) -> Network {
    Network {
        nodes: vec![
            Node {
                id: 0,
                v_min: 0.81,
                v_max: 1.21,
            },
            Node {
                id: 1,
                v_min: 0.81,
                v_max: 1.21,
            },
        ],
        lines: vec![Line {
            from: 0,
            to: 1,
            r,
            x,
            s_max: 100.0,
        }],
        substation_v0: v0,
        candidates: vec![1],
        psi_max: vec![1.0],
        eta: vec![0.0],
    }
}

/// Solves the two-bus feeder by bisection on the scalar loss equation
/// `l * v0 = (p_load + r*l)^2 + (q_load + x*l)^2`, returning the line
/// current `l`, the receiving-end squared voltage, and the sending-end
/// flows. Independent of the solver under test.
fn two_bus_oracle(
    r: f64,
    x: f64,
    v0: f64,
    p_load: f64,
    q_load: f64,
) -> Result<(f64, f64, f64, f64), String> {
    let g = |l: f64| v0 * l - (p_load + r * l).powi(2) - (q_load + x * l).powi(2);
    let vertex = (v0 - 2.0 * (r * p_load + x * q_load)) / (2.0 * (r * r + x * x));
    if !(vertex > 0.0 && g(vertex) > 0.0) {
        return Err(format!("load ({p_load}, {q_load}) is not deliverable"));
    }
    let (mut lo, mut hi) = (0.0, vertex);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    let p_send = p_load + r * l;
    let q_send = q_load + x * l;
    let v1 = v0 - 2.0 * (r * p_send + x * q_send) + (r * r + x * x) * l;
    Ok((l, v1, p_send, q_send))
}

fn power_flow() -> Result<String, String> {
    let start = Instant::now();

    let mut worst_residual = 0.0f64;
    for seed in 0..50u64 {
        let n_nodes = 5 + ((seed as usize * 17) % 52);
        let network = random_radial_network(n_nodes, seed);
        let (p, q) = random_injections(network.n_loads(), seed ^ 0xA5A5, 1.0);
        let solution = solve_distflow(&network, &p, &q);
        ensure!(
            solution.converged,
            "feeder seed {seed} ({n_nodes} nodes) did not converge"
        );
        let residual = max_residual(&network, &p, &q, &solution);
        ensure!(
            residual <= 1e-8,
            "feeder seed {seed} ({n_nodes} nodes): residual {residual:e} exceeds 1e-8"
        );
        worst_residual = worst_residual.max(residual);
    }

    let (r, x, v0) = (0.04, 0.025, 1.02);
    let network = two_bus(r, x, v0);
    let mut worst_gap = 0.0f64;
    for (p1, q1) in [(-0.3, -0.1), (0.25, 0.05), (0.1, -0.12), (0.0, -0.2)] {
        let solution = solve_distflow(&network, &[p1], &[q1]);
        ensure!(
            solution.converged,
            "two-bus case ({p1}, {q1}) did not converge"
        );
        let (l, v1, p_send, q_send) = two_bus_oracle(r, x, v0, -p1, -q1)?;
        let gap = (solution.l[0] - l)
            .abs()
            .max((solution.v[1] - v1).abs())
            .max((solution.p[0] - p_send).abs())
            .max((solution.q[0] - q_send).abs());
        ensure!(
            gap <= 1e-9,
            "two-bus case ({p1}, {q1}) disagrees with the bisection oracle by {gap:e}"
        );
        worst_gap = worst_gap.max(gap);
    }

    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(10),
        "took {elapsed:.2?}, budget 10s"
    );
    Ok(format!(
        "worst residual {worst_residual:.2e}, oracle gap {worst_gap:.2e}, {elapsed:.2?}"
    ))
}

/// A day whose load is either trivial or far beyond what the feeder can
/// deliver, so its violation status is known by construction.
fn engineered_day(
    day_id: usize,
    violated: bool,
    n_candidates: usize,
    n_loads: usize,
) -> DayScenario {
    let load = if violated { 40.0 } else { 0.01 };
    DayScenario {
        day_id,
        alpha: vec![vec![0.0; n_candidates]; 2],
        d: vec![vec![load; n_loads]; 2],
        e: vec![vec![0.0; n_loads]; 2],
    }
}

fn risk_estimate() -> Result<String, String> {
    let start = Instant::now();

    // 100 engineered violations out of 1000 days must give exactly 0.1.
    let network = two_bus(0.03, 0.012, 1.0);
    let days: Vec<DayScenario> = (0..1000)
        .map(|day_id| engineered_day(day_id, day_id % 10 == 3, 1, 1))
        .collect();
    let set = ScenarioSet {
        days,
        snapshots_per_day: 2,
    };
    let stats = violation_probability(&network, &set, &[0.0]).map_err(|e| e.to_string())?;
    ensure!(
        stats.violated_days.len() == 100,
        "expected 100 violated days, got {}",
        stats.violated_days.len()
    );
    ensure!(
        stats.eps_hat == 0.1,
        "900/1000 clean days must give eps_hat 0.1 exactly, got {}",
        stats.eps_hat
    );

    // Day-level aggregation must match an exhaustive per-snapshot recheck
    // that never early-outs.
    let network = six_node_feeder();
    let scenarios = six_node_scenarios();
    for psi in [vec![0.0, 0.78], vec![0.9, 0.9], vec![1.2, 0.3]] {
        let mut expected = Vec::new();
        for day in &scenarios.days {
            let mut violated = false;
            for t in 0..scenarios.snapshots_per_day {
                let (p, q) = network
                    .injection_vectors(&psi, &day.alpha[t], &day.d[t], &day.e[t])
                    .map_err(|e| e.to_string())?;
                let solution = solve_distflow(&network, &p, &q);
                if !check_limits(&network, &solution).feasible {
                    violated = true;
                }
            }
            if violated {
                expected.push(day.day_id);
            }
        }
        let stats = violation_probability(&network, &scenarios, &psi).map_err(|e| e.to_string())?;
        ensure!(
            stats.violated_days == expected,
            "psi {psi:?}: violated days {:?} differ from the exhaustive recheck {expected:?}",
            stats.violated_days
        );
        let exact = expected.len() as f64 / scenarios.n_days() as f64;
        ensure!(
            stats.eps_hat == exact,
            "psi {psi:?}: eps_hat {} is not the exact ratio {exact}",
            stats.eps_hat
        );
    }

    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(30),
        "took {elapsed:.2?}, budget 30s"
    );
    Ok(format!(
        "1000-day ratio exact, 30-day aggregation matches recheck, {elapsed:.2?}"
    ))
}

/// Chain feeder with five candidate nodes, used for the worked penalty
/// example.
fn five_candidate_chain() -> Network {
    let nodes = (0..6)
        .map(|id| Node {
            id,
            v_min: 0.81,
            v_max: 1.21,
        })
        .collect();
    let lines = (0..5)
        .map(|i| Line {
            from: i,
            to: i + 1,
            r: 0.01,
            x: 0.004,
            s_max: 50.0,
        })
        .collect();
    Network {
        nodes,
        lines,
        substation_v0: 1.0,
        candidates: vec![1, 2, 3, 4, 5],
        psi_max: vec![2.0; 5],
        eta: vec![0.0; 5],
    }
}

fn objective() -> Result<String, String> {
    // Anywhere the violation budget holds, the objective must be the
    // plain capacity sum, bit for bit.
    let network = six_node_feeder();
    let scenarios = six_node_scenarios();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for draw in 0..100 {
        let psi = vec![rng.gen_range(0.0..=0.3), rng.gen_range(0.0..=0.3)];
        let result =
            penalized_objective(&network, &scenarios, &psi, 0.05).map_err(|e| e.to_string())?;
        ensure!(
            result.eps_hat <= 0.05,
            "draw {draw} at {psi:?} unexpectedly violates the budget"
        );
        let total: f64 = psi.iter().sum();
        ensure!(
            result.objective == total && result.raw_capacity == total,
            "draw {draw} at {psi:?}: objective {} / capacity {} differ from the sum {total}",
            result.objective,
            result.raw_capacity
        );
    }

    // Worked example: 3 of 50 days violated against a 5% budget on five
    // unit-capacity candidates.
    let network = five_candidate_chain();
    let days: Vec<DayScenario> = (0..50)
        .map(|day_id| engineered_day(day_id, [7, 23, 41].contains(&day_id), 5, 5))
        .collect();
    let set = ScenarioSet {
        days,
        snapshots_per_day: 2,
    };
    let result = penalized_objective(&network, &set, &[1.0; 5], 0.05).map_err(|e| e.to_string())?;
    ensure!(
        result.eps_hat == 0.06,
        "expected eps_hat 0.06, got {}",
        result.eps_hat
    );
    ensure!(
        result.objective == -1995.0,
        "worked example must give exactly -1995, got {}",
        result.objective
    );
    Ok("100 feasible draws exact, worked penalty example exact".to_string())
}

fn gp_posterior() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=3.0)])
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|p| (1.3 * p[0]).sin() + 0.5 * (0.7 * p[1]).cos() + 0.1 * p[0] * p[1])
        .collect();

    // Noise pinned to zero: the posterior mean must interpolate.
    let mut config = GpConfig::new(vec![0.0, 0.0], vec![2.0, 3.0]);
    config.seed = 5;
    config.noise_bounds = (0.0, 0.0);
    let gp = fit(&x[..8], &y[..8], &config).map_err(|e| e.to_string())?;
    let mut worst_interp = 0.0f64;
    for (xi, &yi) in x[..8].iter().zip(&y[..8]) {
        let (mean, _) = gp.posterior(xi);
        worst_interp = worst_interp.max((mean - yi).abs());
    }
    ensure!(
        worst_interp <= 1e-6,
        "zero-noise fit misses its training targets by {worst_interp:e}"
    );

    // Same posterior from a dense library solver in the model's
    // normalised/standardised space.
    let mut config = GpConfig::new(vec![0.0, 0.0], vec![2.0, 3.0]);
    config.seed = 11;
    config.noise_bounds = (1e-3, 1e-3);
    let gp = fit(&x, &y, &config).map_err(|e| e.to_string())?;
    let xn = gp.inputs_normalized();
    let ys = gp.targets_standardized();
    let n = xn.len();
    // nugget() is the full diagonal addition used by the fit, observation
    // noise plus any jitter.
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = gp.kernel().eval(&xn[i], &xn[j]) + if i == j { gp.nugget() } else { 0.0 };
        }
    }
    let chol = k
        .cholesky()
        .ok_or_else(|| "oracle factorization failed".to_string())?;
    let residuals = DVector::from_iterator(n, ys.iter().map(|&v| v - gp.mean_const()));
    let alpha = chol.solve(&residuals);
    let (y_mean, y_sd) = gp.output_transform();

    let mut worst_gap = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut queries: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.gen_range(0.0..=2.0), rng.gen_range(0.0..=3.0)])
        .collect();
    queries.extend(x.iter().cloned());
    for query in &queries {
        let z = gp.normalize_query(query);
        let k_star = DVector::from_iterator(n, xn.iter().map(|xi| gp.kernel().eval(&z, xi)));
        let mean_std = gp.mean_const() + k_star.dot(&alpha);
        let var_std = (gp.kernel().eval(&z, &z) - k_star.dot(&chol.solve(&k_star))).max(0.0);
        let oracle_mean = y_mean + y_sd * mean_std;
        let oracle_var = y_sd * y_sd * var_std;

        let (mean, var) = gp.posterior(query);
        worst_gap = worst_gap
            .max((mean - oracle_mean).abs())
            .max((var - oracle_var).abs());
        worst_excess = worst_excess.max(var - gp.prior_variance());
    }
    ensure!(
        worst_gap <= 1e-10,
        "posterior disagrees with the dense solver by {worst_gap:e}"
    );
    ensure!(
        worst_excess <= 1e-12,
        "posterior variance exceeds the prior by {worst_excess:e}"
    );
    Ok(format!(
        "interpolation gap {worst_interp:.1e}, dense-solver gap {worst_gap:.1e} over {} queries",
        queries.len()
    ))
}

fn acquisition() -> Result<String, String> {
    let inv_sqrt_2pi = 0.3989422804014327;
    ensure!(
        (standard_normal_pdf(0.0) - inv_sqrt_2pi).abs() <= 1e-6,
        "pdf(0) must be 1/sqrt(2 pi)"
    );
    ensure!(
        (standard_normal_cdf(2.0) - 0.9772498680518208).abs() <= 1e-6,
        "cdf(2) is off: {}",
        standard_normal_cdf(2.0)
    );
    // With the mean at the incumbent and unit variance, the improvement
    // integral collapses to the density at zero.
    ensure!(
        (expected_improvement(1.0, 1.0, 1.0) - inv_sqrt_2pi).abs() <= 1e-6,
        "ei at the incumbent with unit variance is off"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws: Vec<f64> = (0..1_000_000).map(|_| rng.sample(StandardNormal)).collect();
    let n = draws.len() as f64;

    let mut case_rng = ChaCha8Rng::seed_from_u64(123);
    let mut worst_sigmas = 0.0f64;
    for case in 0..100 {
        let sd: f64 = case_rng.gen_range(0.1..=2.0);
        let mean: f64 = case_rng.gen_range(-1.0..=1.0);
        let incumbent = mean - sd * case_rng.gen_range(-2.5..=2.5);
        let var = sd * sd;

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut hits = 0usize;
        for &z in &draws {
            let improvement = (mean + sd * z - incumbent).max(0.0);
            sum += improvement;
            sum_sq += improvement * improvement;
            if mean + sd * z > incumbent {
                hits += 1;
            }
        }
        let mc_ei = sum / n;
        let ei_sd = ((sum_sq / n - mc_ei * mc_ei).max(0.0) / n).sqrt();
        let ei = expected_improvement(mean, var, incumbent);
        ensure!(ei >= 0.0, "case {case}: ei is negative");
        ensure!(
            (ei - mc_ei).abs() <= 3.0 * ei_sd + 1e-12,
            "case {case}: ei {ei} vs monte carlo {mc_ei} (se {ei_sd:e})"
        );
        if ei_sd > 0.0 {
            worst_sigmas = worst_sigmas.max((ei - mc_ei).abs() / ei_sd);
        }

        let mc_pi = hits as f64 / n;
        let pi_sd = (mc_pi * (1.0 - mc_pi) / n).sqrt();
        let pi = probability_of_improvement(mean, var, incumbent);
        ensure!(
            (pi - mc_pi).abs() <= 3.0 * pi_sd + 1e-12,
            "case {case}: pi {pi} vs monte carlo {mc_pi} (se {pi_sd:e})"
        );
    }

    // Nonnegativity across the whole parameter range, degenerate variance
    // included.
    for _ in 0..500 {
        let mean = case_rng.gen_range(-5.0..=5.0);
        let var = if case_rng.gen_bool(0.1) {
            0.0
        } else {
            case_rng.gen_range(0.0..=4.0)
        };
        let incumbent = case_rng.gen_range(-5.0..=5.0);
        ensure!(
            expected_improvement(mean, var, incumbent) >= 0.0,
            "ei({mean}, {var}, {incumbent}) is negative"
        );
    }
    Ok(format!(
        "100 monte carlo cases within 3 standard errors (worst {worst_sigmas:.2})"
    ))
}

fn end_to_end() -> Result<String, String> {
    let network = six_node_feeder();
    let scenarios = six_node_scenarios();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;

    pool.install(|| {
        let start = Instant::now();

        let mut grid_config = SolveConfig::new(Method::GridSearch);
        grid_config.points_per_dim = 51;
        let oracle = solve(&network, &scenarios, &grid_config).map_err(|e| e.to_string())?;

        let mut bo_config = SolveConfig::new(Method::BayesOpt);
        bo_config.budget = 40;
        bo_config.seed = 7;
        let trace = solve(&network, &scenarios, &bo_config).map_err(|e| e.to_string())?;

        let elapsed = start.elapsed();
        ensure!(
            trace.nfuncall <= 40,
            "bayesopt used {} evaluations for a budget of 40",
            trace.nfuncall
        );
        ensure!(
            trace.best_objective >= 0.98 * oracle.best_objective,
            "bayesopt best {} is below 98% of the 51-point grid oracle {}",
            trace.best_objective,
            oracle.best_objective
        );
        ensure!(elapsed < Duration::from_secs(300), "took {elapsed:.2?}, budget 300s");
        Ok(format!(
            "grid oracle {:.4}, bayesopt {:.4} ({:.1}% with 40 of {} evaluations), {elapsed:.2?} on one thread",
            oracle.best_objective,
            trace.best_objective,
            100.0 * trace.best_objective / oracle.best_objective,
            oracle.nfuncall
        ))
    })
}

fn multimodal() -> Result<String, String> {
    let network = uneven_fork_feeder();
    let scenarios = uneven_fork_scenarios();

    let mut grid_config = SolveConfig::new(Method::GridSearch);
    grid_config.points_per_dim = 21;
    let lattice = solve(&network, &scenarios, &grid_config).map_err(|e| e.to_string())?;

    let mut pattern_config = SolveConfig::new(Method::PatternSearch);
    pattern_config.budget = 60;
    pattern_config.seed = 12;
    let pattern = solve(&network, &scenarios, &pattern_config).map_err(|e| e.to_string())?;

    let mut bo_config = SolveConfig::new(Method::BayesOpt);
    bo_config.budget = 60;
    bo_config.seed = 7;
    let bayes = solve(&network, &scenarios, &bo_config).map_err(|e| e.to_string())?;

    // The designated pattern-search start walks into a locally optimal
    // facet well below the lattice optimum; bayesopt with the same budget
    // must land in the global basin instead.
    ensure!(
        pattern.best_objective < 0.6 * lattice.best_objective,
        "pattern search found {} which is not a trapped local optimum of the {} lattice",
        pattern.best_objective,
        lattice.best_objective
    );
    ensure!(
        bayes.best_objective >= 0.9 * lattice.best_objective,
        "bayesopt best {} did not reach the lattice optimum {}",
        bayes.best_objective,
        lattice.best_objective
    );
    ensure!(
        bayes.best_objective >= 1.5 * pattern.best_objective,
        "bayesopt best {} is not decisively above the pattern-search trap {}",
        bayes.best_objective,
        pattern.best_objective
    );
    Ok(format!(
        "lattice {:.4}, pattern trap {:.4}, bayesopt {:.4} with the same budget",
        lattice.best_objective, pattern.best_objective, bayes.best_objective
    ))
}

fn trace_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scen = dir.path().join("scen");
    write_scenarios(&six_node_scenarios(), &scen).map_err(|e| e.to_string())?;
    let network = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/six_node.network.json");

    let solve_to = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_phca"))
            .args([
                "solve",
                "--network",
                network.to_str().unwrap(),
                "--scenarios",
                scen.to_str().unwrap(),
                "--method",
                "bayesopt",
                "--budget",
                "12",
                "--n-initial",
                "5",
                "--seed",
                "21",
                "--out",
                out.to_str().unwrap(),
            ])
            .env_remove("PHCA_THREADS")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            output.status.success(),
            "solve failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        std::fs::read(&out).map_err(|e| e.to_string())
    };

    let first = solve_to("a.json")?;
    let second = solve_to("b.json")?;
    ensure!(!first.is_empty(), "trace file is empty");
    ensure!(
        first == second,
        "same seed and inputs produced different trace bytes"
    );
    Ok(format!("two runs, {} identical bytes", first.len()))
}

fn worker_invariance() -> Result<String, String> {
    let network = six_node_feeder();
    let scenarios = six_node_scenarios();
    let psi = [0.9, 0.7];

    let with_threads = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| e.to_string())?
            .install(|| {
                violation_probability(&network, &scenarios, &psi).map_err(|e| e.to_string())
            })
    };
    let one = with_threads(1)?;
    let four = with_threads(4)?;
    ensure!(
        one == four,
        "1 worker gives {:?}, 4 workers give {:?}",
        one,
        four
    );
    Ok(format!(
        "eps_hat {} and {} violated day(s) identical on 1 and 4 workers",
        one.eps_hat,
        one.violated_days.len()
    ))
}
