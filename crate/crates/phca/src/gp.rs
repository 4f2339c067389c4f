//! Gaussian-process regression for the optimisation surrogate.
//!
//! The model is a GP with a constant mean and an anisotropic stationary
//! kernel (Matern 5/2 by default, squared-exponential as an alternative)
//! plus observation noise. Inputs are normalised to the unit box using the
//! capacity bounds, targets are standardised to zero mean and unit
//! variance; hyperparameters act in that normalised space and are fitted
//! by maximising the log marginal likelihood with multi-start coordinate
//! ascent in log space. The constant mean is profiled out analytically at
//! every likelihood evaluation, so it never enters the search.
//!
//! The kernel matrix factorisation is cached in the fitted state; a
//! posterior query costs one triangular solve. If the matrix is not
//! numerically positive definite at the observation noise alone, a jitter
//! of 1e-10 is added and escalated tenfold up to 1e-4 before giving up.

use crate::golden::golden_section_max;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Kernel family, selectable per fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `sigma^2 (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)`, twice
    /// differentiable and the default for optimisation surrogates.
    Matern52,
    /// `sigma^2 exp(-r^2 / 2)`, infinitely smooth.
    SquaredExponential,
}

/// A stationary kernel with one lengthscale per input dimension;
/// `r^2 = sum_d ((a_d - b_d) / lengthscale_d)^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub sigma_sq: f64,
    pub lengthscales: Vec<f64>,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.lengthscales.len());
        debug_assert_eq!(b.len(), self.lengthscales.len());
        let r_sq: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((&ai, &bi), &ell)| {
                let scaled = (ai - bi) / ell;
                scaled * scaled
            })
            .sum();
        match self.kind {
            KernelKind::Matern52 => {
                let sqrt5_r = (5.0 * r_sq).sqrt();
                self.sigma_sq * (1.0 + sqrt5_r + 5.0 * r_sq / 3.0) * (-sqrt5_r).exp()
            }
            KernelKind::SquaredExponential => self.sigma_sq * (-0.5 * r_sq).exp(),
        }
    }
}

/// Fit settings. `lower`/`upper` give the input box used for
/// normalisation; the bound pairs confine the hyperparameter search (a
/// pair with `lo == hi` pins that hyperparameter).
#[derive(Debug, Clone)]
pub struct GpConfig {
    pub kernel: KernelKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Multi-start count for the likelihood ascent.
    pub n_starts: usize,
    pub seed: u64,
    pub lengthscale_bounds: (f64, f64),
    pub sigma_sq_bounds: (f64, f64),
    pub noise_bounds: (f64, f64),
    /// Coordinate-ascent sweep limit per start.
    pub max_sweeps: usize,
    /// Optional extra ascent start `[sigma_sq, lengthscales.., noise]`,
    /// typically the previous fit's optimum when refitting a growing
    /// dataset; values are clipped into the bounds.
    pub warm_start: Option<Vec<f64>>,
}

impl GpConfig {
    /// Defaults for a given input box: Matern 5/2, 8 starts,
    /// lengthscales in `[1e-2, 1e2]`, signal variance in `[1e-4, 1e4]`,
    /// noise in `[1e-6, 1]`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            kernel: KernelKind::Matern52,
            lower,
            upper,
            n_starts: 8,
            seed: 0,
            lengthscale_bounds: (1e-2, 1e2),
            sigma_sq_bounds: (1e-4, 1e4),
            noise_bounds: (1e-6, 1.0),
            max_sweeps: 8,
            warm_start: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum GpError {
    #[error("{0}")]
    Input(String),
    #[error("kernel matrix is not positive definite even with jitter {max_jitter:e}")]
    Factorization { max_jitter: f64 },
}

/// A fitted GP: hyperparameters, the training data in normalised and
/// standardised form, and the cached factorisation that makes posterior
/// queries cheap.
#[derive(Debug, Clone)]
pub struct GpState {
    kernel: Kernel,
    noise: f64,
    /// Noise plus any jitter the factorisation needed.
    nugget: f64,
    x_norm: Vec<Vec<f64>>,
    y_std: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    /// Profiled constant mean, in standardised target space.
    mean_const: f64,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    lml: f64,
}

/// Standardised targets with spread below this are treated as constant
/// data: the fit degenerates to a flat mean with floor noise.
const DEGENERATE_SPREAD: f64 = 1e-12;

/// Relative width of the golden-section bracket at which a hyperparameter
/// line search stops.
const LINE_TOL_FRAC: f64 = 1e-3;

/// A coordinate-ascent pass that lifts the log marginal likelihood by less
/// than this ends the ascent.
const SWEEP_IMPROVEMENT_TOL: f64 = 1e-7;

impl GpState {
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Fitted observation noise variance (standardised target space).
    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Noise actually on the factorised matrix diagonal, including jitter.
    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Log marginal likelihood of the fitted hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn n_train(&self) -> usize {
        self.y_std.len()
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Training inputs mapped to the unit box.
    pub fn inputs_normalized(&self) -> &[Vec<f64>] {
        &self.x_norm
    }

    /// The input box used for normalisation.
    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// Training targets in standardised space.
    pub fn targets_standardized(&self) -> &[f64] {
        &self.y_std
    }

    /// Profiled constant mean, in standardised target space.
    pub fn mean_const(&self) -> f64 {
        self.mean_const
    }

    /// `(mean, sd)` of the raw targets; the standardisation transform.
    pub fn output_transform(&self) -> (f64, f64) {
        (self.y_mean, self.y_sd)
    }

    /// Prior variance in original target units; no posterior variance
    /// exceeds this.
    pub fn prior_variance(&self) -> f64 {
        self.y_sd * self.y_sd * self.kernel.sigma_sq
    }

    /// Largest training target in original units.
    pub fn best_target(&self) -> f64 {
        self.y_std
            .iter()
            .fold(f64::NEG_INFINITY, |best, &y| best.max(y))
            * self.y_sd
            + self.y_mean
    }

    /// Maps a query to the normalised box, clamping coordinates that fall
    /// outside it.
    pub fn normalize_query(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.lower.len(),
            "query has {} coordinates, model has {}",
            x.len(),
            self.lower.len()
        );
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&xi, (&lo, &hi))| ((xi - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }

    /// Posterior mean and variance at `x` (original units). Queries
    /// outside the box are clamped onto it.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let z = self.normalize_query(x);
        let k_star: Vec<f64> = self
            .x_norm
            .iter()
            .map(|xi| self.kernel.eval(&z, xi))
            .collect();

        let mean_std = self.mean_const + dot(&k_star, &self.alpha);
        let v = forward_solve(&self.chol, &k_star);
        let var_std = (self.kernel.sigma_sq - dot(&v, &v)).max(0.0);

        (
            self.y_mean + self.y_sd * mean_std,
            self.y_sd * self.y_sd * var_std,
        )
    }
}

/// Fits a GP to `(x, y)`. See the module docs for the model; the returned
/// state answers [`GpState::posterior`] queries against the cached
/// factorisation.
pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpState, GpError> {
    validate_inputs(x, y, config)?;
    let dim = config.lower.len();

    let x_norm: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            row.iter()
                .zip(config.lower.iter().zip(&config.upper))
                .map(|(&xi, (&lo, &hi))| (xi - lo) / (hi - lo))
                .collect()
        })
        .collect();

    let n = y.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let variance = y
        .iter()
        .map(|&yi| (yi - y_mean) * (yi - y_mean))
        .sum::<f64>()
        / n as f64;
    let spread = variance.sqrt();
    let degenerate = spread < DEGENERATE_SPREAD;
    let y_sd = if degenerate { 1.0 } else { spread };
    let y_std: Vec<f64> = y.iter().map(|&yi| (yi - y_mean) / y_sd).collect();

    let bounds = HyperBounds::from_config(config, dim);
    let theta = if degenerate {
        bounds.clip(&bounds.canonical_start())
    } else {
        optimize_hypers(&x_norm, &y_std, config, &bounds)
    };

    assemble_state(x_norm, y_std, theta, config, y_mean, y_sd)
}

fn validate_inputs(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<(), GpError> {
    let dim = config.lower.len();
    if dim == 0 || config.upper.len() != dim {
        return Err(GpError::Input(format!(
            "box bounds must be non-empty and of equal length, got {} and {}",
            dim,
            config.upper.len()
        )));
    }
    for (d, (&lo, &hi)) in config.lower.iter().zip(&config.upper).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GpError::Input(format!(
                "box dimension {d} must satisfy lower < upper, got [{lo}, {hi}]"
            )));
        }
    }
    if x.is_empty() {
        return Err(GpError::Input("training set is empty".to_string()));
    }
    if x.len() != y.len() {
        return Err(GpError::Input(format!(
            "{} inputs for {} targets",
            x.len(),
            y.len()
        )));
    }
    for (i, row) in x.iter().enumerate() {
        if row.len() != dim {
            return Err(GpError::Input(format!(
                "input {i} has {} coordinates, box has {dim}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GpError::Input(format!(
                "input {i} contains a non-finite value"
            )));
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GpError::Input(format!("target {i} is not finite")));
    }

    let pairs = [
        ("lengthscale", config.lengthscale_bounds, true),
        ("sigma_sq", config.sigma_sq_bounds, true),
        ("noise", config.noise_bounds, false),
    ];
    for (name, (lo, hi), strictly_positive) in pairs {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(GpError::Input(format!(
                "{name} bounds must be finite with lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if strictly_positive && lo <= 0.0 {
            return Err(GpError::Input(format!(
                "{name} bounds must be positive, got [{lo}, {hi}]"
            )));
        }
        if !strictly_positive && lo < 0.0 {
            return Err(GpError::Input(format!(
                "{name} bounds must be nonnegative, got [{lo}, {hi}]"
            )));
        }
    }
    if config.noise_bounds.0 == 0.0 && config.noise_bounds.1 > 0.0 {
        return Err(GpError::Input(
            "noise lower bound must be positive unless noise is pinned to zero".to_string(),
        ));
    }
    if config.n_starts == 0 {
        return Err(GpError::Input("n_starts must be at least 1".to_string()));
    }
    Ok(())
}

/// Hyperparameter vector layout: `[sigma_sq, lengthscale_1.., noise]`,
/// searched in log space except for coordinates pinned by equal bounds.
struct HyperBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HyperBounds {
    fn from_config(config: &GpConfig, dim: usize) -> Self {
        let mut lo = vec![config.sigma_sq_bounds.0];
        let mut hi = vec![config.sigma_sq_bounds.1];
        lo.extend(std::iter::repeat_n(config.lengthscale_bounds.0, dim));
        hi.extend(std::iter::repeat_n(config.lengthscale_bounds.1, dim));
        lo.push(config.noise_bounds.0);
        hi.push(config.noise_bounds.1);
        Self { lo, hi }
    }

    fn canonical_start(&self) -> Vec<f64> {
        let dim = self.lo.len() - 2;
        let mut theta = vec![1.0];
        theta.extend(std::iter::repeat_n(0.5, dim));
        theta.push(1e-3);
        theta
    }

    fn clip(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&t, (&lo, &hi))| t.clamp(lo, hi))
            .collect()
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| {
                if lo == hi {
                    lo
                } else {
                    (rng.gen_range(lo.ln()..=hi.ln())).exp()
                }
            })
            .collect()
    }
}

fn kernel_from_theta(kind: KernelKind, theta: &[f64]) -> Kernel {
    Kernel {
        kind,
        sigma_sq: theta[0],
        lengthscales: theta[1..theta.len() - 1].to_vec(),
    }
}

/// Log marginal likelihood with the constant mean profiled out; negative
/// infinity when the kernel matrix cannot be factorised.
fn log_marginal(x_norm: &[Vec<f64>], y_std: &[f64], kind: KernelKind, theta: &[f64]) -> f64 {
    let kernel = kernel_from_theta(kind, theta);
    let noise = theta[theta.len() - 1];
    let Ok((chol, _)) = factor_kernel(x_norm, &kernel, noise) else {
        return f64::NEG_INFINITY;
    };
    let n = y_std.len();

    let u = chol_solve(&chol, y_std);
    let ones = vec![1.0; n];
    let w = chol_solve(&chol, &ones);
    let su: f64 = u.iter().sum();
    let sw: f64 = w.iter().sum();
    let mean_const = if sw.abs() > 0.0 { su / sw } else { 0.0 };

    let quad = dot(y_std, &u) - mean_const * su;
    let log_det: f64 = 2.0
        * chol
            .iter()
            .enumerate()
            .map(|(i, row)| row[i].ln())
            .sum::<f64>();
    -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Multi-start coordinate ascent in log space. Every line search keeps the
/// incumbent unless it strictly improves, so the returned hyperparameters
/// score at least as well as every start.
fn optimize_hypers(
    x_norm: &[Vec<f64>],
    y_std: &[f64],
    config: &GpConfig,
    bounds: &HyperBounds,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Start 1 is canonical, the rest are log-uniform draws; a warm start
    // rides along as an extra so the draw count stays seed-stable.
    let mut starts = vec![bounds.clip(&bounds.canonical_start())];
    if let Some(warm) = &config.warm_start {
        assert_eq!(warm.len(), bounds.lo.len(), "warm start has wrong arity");
        starts.push(bounds.clip(warm));
    }
    for _ in 0..config.n_starts.saturating_sub(1) {
        starts.push(bounds.random_start(&mut rng));
    }

    let mut best_theta = starts[0].clone();
    let mut best_value = f64::NEG_INFINITY;
    for start in starts {
        let (theta, value) = ascend_from(x_norm, y_std, config, bounds, start);
        if value > best_value {
            best_value = value;
            best_theta = theta;
        }
    }
    best_theta
}

fn ascend_from(
    x_norm: &[Vec<f64>],
    y_std: &[f64],
    config: &GpConfig,
    bounds: &HyperBounds,
    start: Vec<f64>,
) -> (Vec<f64>, f64) {
    let mut theta = start;
    let mut value = log_marginal(x_norm, y_std, config.kernel, &theta);

    for _ in 0..config.max_sweeps {
        let before = value;
        for coord in 0..theta.len() {
            let (lo, hi) = (bounds.lo[coord], bounds.hi[coord]);
            if lo == hi {
                continue;
            }
            let log_lo = lo.ln();
            let log_hi = hi.ln();
            let objective = |log_t: f64| {
                let mut candidate = theta.clone();
                candidate[coord] = log_t.exp();
                log_marginal(x_norm, y_std, config.kernel, &candidate)
            };
            let tol = (log_hi - log_lo) * LINE_TOL_FRAC;
            let (log_best, line_value) = golden_section_max(objective, log_lo, log_hi, tol);
            if line_value > value {
                theta[coord] = log_best.exp();
                value = line_value;
            }
        }
        if value - before < SWEEP_IMPROVEMENT_TOL {
            break;
        }
    }
    (theta, value)
}

fn assemble_state(
    x_norm: Vec<Vec<f64>>,
    y_std: Vec<f64>,
    theta: Vec<f64>,
    config: &GpConfig,
    y_mean: f64,
    y_sd: f64,
) -> Result<GpState, GpError> {
    let kernel = kernel_from_theta(config.kernel, &theta);
    let noise = theta[theta.len() - 1];
    let (chol, nugget) = factor_kernel(&x_norm, &kernel, noise)?;

    let n = y_std.len();
    let u = chol_solve(&chol, &y_std);
    let ones = vec![1.0; n];
    let w = chol_solve(&chol, &ones);
    let su: f64 = u.iter().sum();
    let sw: f64 = w.iter().sum();
    let mean_const = if sw.abs() > 0.0 { su / sw } else { 0.0 };
    let alpha: Vec<f64> = u
        .iter()
        .zip(&w)
        .map(|(&ui, &wi)| ui - mean_const * wi)
        .collect();

    let lml = {
        let quad = dot(&y_std, &u) - mean_const * su;
        let log_det: f64 = 2.0
            * chol
                .iter()
                .enumerate()
                .map(|(i, row)| row[i].ln())
                .sum::<f64>();
        -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    };

    Ok(GpState {
        kernel,
        noise,
        nugget,
        x_norm,
        y_std,
        lower: config.lower.clone(),
        upper: config.upper.clone(),
        y_mean,
        y_sd,
        mean_const,
        chol,
        alpha,
        lml,
    })
}

/// Builds `K + nugget I` and factorises it, escalating jitter from 1e-10
/// tenfold up to 1e-4 if the bare noise is not enough.
fn factor_kernel(
    x_norm: &[Vec<f64>],
    kernel: &Kernel,
    noise: f64,
) -> Result<(Vec<Vec<f64>>, f64), GpError> {
    let n = x_norm.len();
    let mut base = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let k = kernel.eval(&x_norm[i], &x_norm[j]);
            base[i][j] = k;
            base[j][i] = k;
        }
    }

    let mut jitter = 0.0;
    loop {
        let mut a = base.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += noise + jitter;
        }
        if cholesky_in_place(&mut a) {
            return Ok((a, noise + jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > 1e-4 {
            return Err(GpError::Factorization { max_jitter: 1e-4 });
        }
    }
}

/// In-place lower Cholesky; returns false on a non-positive pivot.
// Indexed loops mirror the textbook recurrence; iterator form obscures it.
#[allow(clippy::needless_range_loop)]
fn cholesky_in_place(a: &mut [Vec<f64>]) -> bool {
    let n = a.len();
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= a[j][k] * a[j][k];
        }
        if !(diag > 0.0) {
            return false;
        }
        let root = diag.sqrt();
        a[j][j] = root;
        for i in (j + 1)..n {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= a[i][k] * a[j][k];
            }
            a[i][j] = sum / root;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            a[i][j] = 0.0;
        }
    }
    true
}

/// Solves `L z = b` for lower-triangular `L`.
fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * z[k];
        }
        z[i] = sum / l[i][i];
    }
    z
}

/// Solves `(L L^T) x = b`.
fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = forward_solve(l, b);
    for i in (0..n).rev() {
        let mut sum = x[i];
        for k in (i + 1)..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
