//! Acquisition functions over a fitted surrogate, and their maximiser.
//!
//! Both criteria reward candidate points expected to beat the incumbent
//! (the best penalized objective observed so far); the problem is a
//! maximisation throughout. The inner maximiser is derivative free:
//! seeded uniform restarts refined by coordinate descent with a
//! golden-section line search, returning all refined candidates ranked
//! best first so the caller can fall back to the runner-up when the top
//! candidate duplicates an earlier query.

use crate::golden::golden_section_max;
use crate::gp::GpState;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    /// `(mu - f*) Phi(z) + sigma phi(z)` with `z = (mu - f*) / sigma`.
    ExpectedImprovement,
    /// `Phi(z)`; at zero variance an indicator of strict improvement.
    ProbabilityOfImprovement,
}

#[derive(Debug, Clone)]
pub struct AcquisitionConfig {
    pub kind: AcquisitionKind,
    /// Uniform restarts for the inner maximiser.
    pub n_starts: usize,
    pub seed: u64,
    /// Golden-section bracket tolerance as a fraction of the box width
    /// in each dimension.
    pub refine_tol_frac: f64,
    /// Coordinate-descent sweep limit per restart.
    pub max_sweeps: usize,
    /// Extra restart locations refined ahead of the uniform ones.
    /// Seeding with the incumbent makes the maximiser polish the region
    /// around the best query instead of relying on a uniform start
    /// landing there.
    pub anchor_starts: Vec<Vec<f64>>,
}

impl AcquisitionConfig {
    pub fn new(kind: AcquisitionKind, seed: u64) -> Self {
        Self {
            kind,
            n_starts: 64,
            seed,
            refine_tol_frac: 1e-4,
            max_sweeps: 4,
            anchor_starts: Vec::new(),
        }
    }
}

/// A refined candidate and its acquisition value.
#[derive(Debug, Clone)]
pub struct ScoredPoint {
    pub x: Vec<f64>,
    pub value: f64,
}

pub fn standard_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement of `N(mean, var)` over `incumbent`. Nonnegative;
/// at zero variance it collapses to `max(mean - incumbent, 0)`.
pub fn expected_improvement(mean: f64, var: f64, incumbent: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    let gap = mean - incumbent;
    if sd == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    (gap * standard_normal_cdf(z) + sd * standard_normal_pdf(z)).max(0.0)
}

/// Probability that `N(mean, var)` exceeds `incumbent`. At zero variance
/// it is the indicator of strict improvement.
pub fn probability_of_improvement(mean: f64, var: f64, incumbent: f64) -> f64 {
    let sd = var.max(0.0).sqrt();
    if sd == 0.0 {
        return if mean > incumbent { 1.0 } else { 0.0 };
    }
    standard_normal_cdf((mean - incumbent) / sd)
}

pub fn acquisition_value(kind: AcquisitionKind, mean: f64, var: f64, incumbent: f64) -> f64 {
    match kind {
        AcquisitionKind::ExpectedImprovement => expected_improvement(mean, var, incumbent),
        AcquisitionKind::ProbabilityOfImprovement => {
            probability_of_improvement(mean, var, incumbent)
        }
    }
}

/// Maximises the acquisition over the surrogate's input box. Returns one
/// refined candidate per restart, ranked by value descending with ties
/// broken by restart order, so results are deterministic for a given
/// seed. The top entry is the proposal; the rest are fallbacks.
pub fn maximize(gp: &GpState, incumbent: f64, config: &AcquisitionConfig) -> Vec<ScoredPoint> {
    let (lower, upper) = gp.bounds();
    let dim = lower.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let score = |x: &[f64]| {
        let (mean, var) = gp.posterior(x);
        acquisition_value(config.kind, mean, var, incumbent)
    };

    let starts: Vec<Vec<f64>> = config
        .anchor_starts
        .iter()
        .map(|anchor| {
            anchor
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
                .collect()
        })
        .chain((0..config.n_starts).map(|_| {
            lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| rng.gen_range(lo..=hi))
                .collect()
        }))
        .collect();

    let mut refined: Vec<ScoredPoint> = Vec::with_capacity(starts.len());
    for mut x in starts {
        let mut value = score(&x);

        for _ in 0..config.max_sweeps {
            let mut improved = false;
            for d in 0..dim {
                let tol = (upper[d] - lower[d]) * config.refine_tol_frac;
                let line = |t: f64| {
                    let mut candidate = x.clone();
                    candidate[d] = t;
                    score(&candidate)
                };
                let (t_best, line_value) = golden_section_max(line, lower[d], upper[d], tol);
                if line_value > value {
                    x[d] = t_best;
                    value = line_value;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        refined.push(ScoredPoint { x, value });
    }

    let mut order: Vec<usize> = (0..refined.len()).collect();
    order.sort_by(|&a, &b| {
        refined[b]
            .value
            .total_cmp(&refined[a].value)
            .then(a.cmp(&b))
    });
    order.into_iter().map(|i| refined[i].clone()).collect()
}
