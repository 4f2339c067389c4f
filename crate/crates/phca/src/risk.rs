//! Sample-average violation risk and the penalised capacity objective.
//!
//! For a capacity vector `psi` the violation probability is estimated over
//! a scenario set as the fraction of violated days,
//!
//! ```text
//! eps_hat(psi) = |violated days| / n_days,
//! ```
//!
//! where a day is violated as soon as any of its snapshots fails to solve
//! or breaks an operating limit. Capacity planning then maximises the
//! penalised objective
//!
//! ```text
//! c(psi) = sum(psi) - n_candidates * (100 * max(eps_hat - eps_bar, 0) / eps_bar)^2
//! ```
//!
//! which equals the raw capacity whenever the risk budget is met and falls
//! off steeply once it is exceeded. Days are independent, so they are
//! solved in parallel; the per-day outcomes are merged in day order and the
//! result does not depend on the number of worker threads.

use crate::distflow::{check_limits, FeederTree};
use crate::network::Network;
use crate::scenario::ScenarioSet;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("psi has {got} entries for {want} candidates")]
    PsiLength { got: usize, want: usize },
    #[error("psi[{index}] = {value} must be finite and >= 0")]
    PsiValue { index: usize, value: f64 },
    #[error("eps_bar must lie strictly inside (0, 1), got {0}")]
    EpsBar(f64),
    #[error("scenario set is empty")]
    NoDays,
    #[error("day {day_id}: {message}")]
    DayShape { day_id: usize, message: String },
}

/// Violation statistics of one capacity vector over a scenario set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationStats {
    /// Fraction of violated days, an exact ratio of counts.
    pub eps_hat: f64,
    /// Ids of the violated days, ascending.
    pub violated_days: Vec<usize>,
    /// Power flows actually run; within a day, evaluation stops at the
    /// first violating snapshot.
    pub n_snapshots_checked: usize,
}

/// A [`ViolationStats`] extended with the penalised objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskResult {
    pub eps_hat: f64,
    pub violated_days: Vec<usize>,
    pub n_snapshots_checked: usize,
    /// Penalised objective `c(psi)`; equals `raw_capacity` exactly when
    /// `eps_hat <= eps_bar`.
    pub objective: f64,
    /// Total installed capacity `sum(psi)`.
    pub raw_capacity: f64,
}

/// Penalty applied to the excess violation probability
/// `max(eps_hat - eps_bar, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `n_candidates * (100 * excess / eps_bar)^2`: the excess measured in
    /// percent of the budget, squared, and scaled by problem size. The
    /// default, and the only one the command line exposes.
    ScaledQuadratic,
    /// `weight * excess^2`.
    Quadratic { weight: f64 },
    /// `weight * excess`.
    Linear { weight: f64 },
}

impl Penalty {
    fn amount(&self, eps_hat: f64, eps_bar: f64, n_candidates: usize) -> f64 {
        match *self {
            Penalty::ScaledQuadratic => {
                // Work in percent space: 100 * k/N and 100 * eps_bar round
                // exactly for the usual decimal budgets, so a met budget
                // yields a penalty of exactly zero and the documented
                // worked example (0.06 vs 0.05, five candidates -> -1995)
                // is reproduced bit for bit.
                let excess_pct = (100.0 * eps_hat - 100.0 * eps_bar).max(0.0);
                let scaled = excess_pct / eps_bar;
                n_candidates as f64 * scaled * scaled
            }
            Penalty::Quadratic { weight } => {
                let excess = (eps_hat - eps_bar).max(0.0);
                weight * excess * excess
            }
            Penalty::Linear { weight } => weight * (eps_hat - eps_bar).max(0.0),
        }
    }
}

fn check_inputs(network: &Network, scenarios: &ScenarioSet, psi: &[f64]) -> Result<(), RiskError> {
    let want = network.n_candidates();
    if psi.len() != want {
        return Err(RiskError::PsiLength {
            got: psi.len(),
            want,
        });
    }
    for (index, &value) in psi.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(RiskError::PsiValue { index, value });
        }
    }
    if scenarios.days.is_empty() {
        return Err(RiskError::NoDays);
    }
    let n_loads = network.n_loads();
    for day in &scenarios.days {
        let t = scenarios.snapshots_per_day;
        if day.alpha.len() != t || day.d.len() != t || day.e.len() != t {
            return Err(RiskError::DayShape {
                day_id: day.day_id,
                message: format!(
                    "expected {t} snapshot rows, got alpha={}, d={}, e={}",
                    day.alpha.len(),
                    day.d.len(),
                    day.e.len()
                ),
            });
        }
        for t in 0..scenarios.snapshots_per_day {
            if day.alpha[t].len() != want {
                return Err(RiskError::DayShape {
                    day_id: day.day_id,
                    message: format!(
                        "alpha row {t} has {} entries for {want} candidates",
                        day.alpha[t].len()
                    ),
                });
            }
            if day.d[t].len() != n_loads || day.e[t].len() != n_loads {
                return Err(RiskError::DayShape {
                    day_id: day.day_id,
                    message: format!(
                        "load rows must have {n_loads} entries, got d={}, e={}",
                        day.d[t].len(),
                        day.e[t].len()
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Estimates the day-level violation probability of `psi`.
///
/// Each day is scanned snapshot by snapshot; the first snapshot that fails
/// to converge or violates a limit marks the day violated and ends its
/// scan. Days run in parallel on the current rayon pool and are merged in
/// day order, so the estimate is identical for any worker count.
pub fn violation_probability(
    network: &Network,
    scenarios: &ScenarioSet,
    psi: &[f64],
) -> Result<ViolationStats, RiskError> {
    check_inputs(network, scenarios, psi)?;
    let tree = FeederTree::new(network);

    let outcomes: Vec<(bool, usize)> = scenarios
        .days
        .par_iter()
        .map(|day| {
            let mut checked = 0;
            for t in 0..scenarios.snapshots_per_day {
                let (p, q) = network
                    .injection_vectors(psi, &day.alpha[t], &day.d[t], &day.e[t])
                    .expect("dimensions were checked up front");
                checked += 1;
                let solution = tree.solve(network.substation_v0, &p, &q);
                if !check_limits(network, &solution).feasible {
                    return (true, checked);
                }
            }
            (false, checked)
        })
        .collect();

    let violated_days: Vec<usize> = scenarios
        .days
        .iter()
        .zip(&outcomes)
        .filter(|(_, &(violated, _))| violated)
        .map(|(day, _)| day.day_id)
        .collect();
    let n_snapshots_checked = outcomes.iter().map(|&(_, checked)| checked).sum();

    Ok(ViolationStats {
        eps_hat: violated_days.len() as f64 / scenarios.days.len() as f64,
        violated_days,
        n_snapshots_checked,
    })
}

/// Evaluates the penalised capacity objective with the given penalty.
pub fn penalized_objective_with(
    network: &Network,
    scenarios: &ScenarioSet,
    psi: &[f64],
    eps_bar: f64,
    penalty: Penalty,
) -> Result<RiskResult, RiskError> {
    if !(eps_bar > 0.0 && eps_bar < 1.0) {
        return Err(RiskError::EpsBar(eps_bar));
    }
    let stats = violation_probability(network, scenarios, psi)?;
    let raw_capacity: f64 = psi.iter().sum();
    let objective = raw_capacity - penalty.amount(stats.eps_hat, eps_bar, network.n_candidates());
    Ok(RiskResult {
        eps_hat: stats.eps_hat,
        violated_days: stats.violated_days,
        n_snapshots_checked: stats.n_snapshots_checked,
        objective,
        raw_capacity,
    })
}

/// Evaluates the penalised capacity objective with the default
/// [`Penalty::ScaledQuadratic`].
pub fn penalized_objective(
    network: &Network,
    scenarios: &ScenarioSet,
    psi: &[f64],
    eps_bar: f64,
) -> Result<RiskResult, RiskError> {
    penalized_objective_with(network, scenarios, psi, eps_bar, Penalty::ScaledQuadratic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Line, Network, Node};
    use crate::scenario::{DayScenario, ScenarioSet};

    /// Substation plus one load node over a weak line: injections above
    /// roughly 1.3 p.u. overvolt the far end, loads above about 2.5 p.u.
    /// undervolt it.
    fn weak_single_line() -> Network {
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
                r: 0.08,
                x: 0.03,
                s_max: 100.0,
            }],
            substation_v0: 1.0,
            candidates: vec![1],
            psi_max: vec![5.0],
            eta: vec![0.0],
        }
    }

    /// Days with constant full sun and a per-day load; `heavy` days carry
    /// a load that undervolts the feeder regardless of psi being small.
    fn day(day_id: usize, t: usize, load: f64) -> DayScenario {
        DayScenario {
            day_id,
            alpha: vec![vec![1.0]; t],
            d: vec![vec![load]; t],
            e: vec![vec![0.0]; t],
        }
    }

    fn set_with_bad_days(n_days: usize, bad: &[usize], t: usize) -> ScenarioSet {
        let days = (0..n_days)
            .map(|id| {
                let load = if bad.contains(&id) { 5.0 } else { 0.1 };
                day(id, t, load)
            })
            .collect();
        ScenarioSet {
            days,
            snapshots_per_day: t,
        }
    }

    #[test]
    fn counts_violated_days_exactly() {
        let net = weak_single_line();
        let set = set_with_bad_days(10, &[2, 7, 9], 4);
        let stats = violation_probability(&net, &set, &[0.0]).unwrap();
        assert_eq!(stats.violated_days, vec![2, 7, 9]);
        assert_eq!(stats.eps_hat, 0.3);
    }

    #[test]
    fn nine_hundred_of_a_thousand_gives_exactly_point_one() {
        let net = weak_single_line();
        let bad: Vec<usize> = (0..100).map(|i| i * 10).collect();
        let set = set_with_bad_days(1000, &bad, 1);
        let stats = violation_probability(&net, &set, &[0.0]).unwrap();
        assert_eq!(stats.violated_days.len(), 100);
        assert_eq!(stats.eps_hat, 0.1);
    }

    #[test]
    fn day_violates_if_any_snapshot_violates() {
        let net = weak_single_line();
        // Load fine for most of the day, absurd in snapshot 5.
        let mut one_bad_moment = day(0, 8, 0.1);
        one_bad_moment.d[5][0] = 5.0;
        let set = ScenarioSet {
            days: vec![one_bad_moment, day(1, 8, 0.1)],
            snapshots_per_day: 8,
        };
        let stats = violation_probability(&net, &set, &[0.0]).unwrap();
        assert_eq!(stats.violated_days, vec![0]);
        assert_eq!(stats.eps_hat, 0.5);
        // Early exit: day 0 stops after snapshot 5 (6 checks), day 1 runs
        // all 8.
        assert_eq!(stats.n_snapshots_checked, 6 + 8);
    }

    #[test]
    fn non_convergence_counts_as_violation() {
        let net = weak_single_line();
        let set = ScenarioSet {
            days: vec![day(0, 1, 100.0)],
            snapshots_per_day: 1,
        };
        let stats = violation_probability(&net, &set, &[0.0]).unwrap();
        assert_eq!(stats.eps_hat, 1.0);
    }

    #[test]
    fn feasible_psi_scores_its_raw_capacity_exactly() {
        let net = weak_single_line();
        let set = set_with_bad_days(10, &[], 4);
        let result = penalized_objective(&net, &set, &[1.25], 0.05).unwrap();
        assert_eq!(stats_of(&result), (0.0, 0));
        assert_eq!(result.raw_capacity, 1.25);
        assert_eq!(result.objective, 1.25);
    }

    fn stats_of(result: &RiskResult) -> (f64, usize) {
        (result.eps_hat, result.violated_days.len())
    }

    #[test]
    fn objective_equals_raw_capacity_at_the_budget_boundary() {
        let net = weak_single_line();
        // 1 of 20 days violated = 0.05 exactly on budget: no penalty.
        let set = set_with_bad_days(20, &[4], 4);
        let result = penalized_objective(&net, &set, &[1.0], 0.05).unwrap();
        assert_eq!(result.eps_hat, 0.05);
        assert_eq!(result.objective, result.raw_capacity);
    }

    #[test]
    fn worked_penalty_example_is_exact() {
        // eps_hat = 0.06, eps_bar = 0.05, five candidates, sum(psi) = 5:
        // c = 5 - 5 * (100 * 0.01 / 0.05)^2 = 5 - 5 * 400 = -1995.
        let penalty = Penalty::ScaledQuadratic.amount(0.06, 0.05, 5);
        assert_eq!(5.0 - penalty, -1995.0);
    }

    #[test]
    fn infeasible_psi_scores_below_raw_capacity() {
        let net = weak_single_line();
        let set = set_with_bad_days(10, &[1, 2], 4);
        let result = penalized_objective(&net, &set, &[0.5], 0.1).unwrap();
        assert_eq!(result.eps_hat, 0.2);
        assert!(result.objective < result.raw_capacity);
    }

    #[test]
    fn alternative_penalties_apply() {
        let quadratic = Penalty::Quadratic { weight: 50.0 }.amount(0.3, 0.1, 3);
        assert!((quadratic - 50.0 * 0.2 * 0.2).abs() < 1e-12);
        let linear = Penalty::Linear { weight: 10.0 }.amount(0.3, 0.1, 3);
        assert!((linear - 2.0).abs() < 1e-12);
        assert_eq!(Penalty::Linear { weight: 10.0 }.amount(0.05, 0.1, 3), 0.0);
    }

    #[test]
    fn input_validation() {
        let net = weak_single_line();
        let set = set_with_bad_days(3, &[], 2);
        assert!(matches!(
            violation_probability(&net, &set, &[1.0, 2.0]),
            Err(RiskError::PsiLength { got: 2, want: 1 })
        ));
        assert!(matches!(
            violation_probability(&net, &set, &[-0.5]),
            Err(RiskError::PsiValue { .. })
        ));
        assert!(matches!(
            penalized_objective(&net, &set, &[1.0], 0.0),
            Err(RiskError::EpsBar(_))
        ));
        assert!(matches!(
            penalized_objective(&net, &set, &[1.0], 1.0),
            Err(RiskError::EpsBar(_))
        ));
        let empty = ScenarioSet {
            days: Vec::new(),
            snapshots_per_day: 4,
        };
        assert!(matches!(
            violation_probability(&net, &empty, &[1.0]),
            Err(RiskError::NoDays)
        ));

        let mut ragged = set_with_bad_days(3, &[], 2);
        ragged.days[1].alpha[0] = vec![1.0, 1.0];
        let err = violation_probability(&net, &ragged, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("day 1"), "{err}");
    }

    #[test]
    fn worker_count_does_not_change_the_estimate() {
        let net = weak_single_line();
        let set = set_with_bad_days(64, &[3, 31, 32, 60], 6);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| violation_probability(&net, &set, &[1.0]).unwrap());
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| violation_probability(&net, &set, &[1.0]).unwrap());
        assert_eq!(single, quad);
    }
}
