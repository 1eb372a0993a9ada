//! Maximum likelihood estimation of `(γ, spline coefficients)` for a fixed
//! basis.
//!
//! The search runs in log space, so every returned rate is strictly positive.
//! Monte-Carlo likelihoods use the fixed seed of their [`LikelihoodConfig`],
//! which keeps the objective deterministic during the search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::RateSeries;
use crate::likelihood::{LikelihoodConfig, LikelihoodEvaluator, ParameterVector};
use crate::simplex::{self, SimplexOptions};
use crate::sir::EpidemicPath;
use crate::spline::{KnotVector, SplineModel};

/// Smallest value used for initial rates.
pub const RATE_FLOOR: f64 = 1e-6;

/// Outcome of a maximum likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: ParameterVector,
    pub loglik: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub bic: f64,
}

impl FitResult {
    pub fn num_params(&self) -> usize {
        self.theta_hat.len()
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub f_rel_tol: f64,
    pub x_tol: f64,
    /// Evaluation budget per parameter for each simplex run.
    pub evals_per_param: usize,
    /// Initial simplex edge in log-parameter space.
    pub initial_step: f64,
    /// Simplex restarts from the incumbent after the first run.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            f_rel_tol: 1e-8,
            x_tol: 1e-6,
            evals_per_param: 2000,
            initial_step: 0.1,
            restarts: 1,
        }
    }
}

/// `-2 ℓ + p ln(M - 1)`.
pub fn bic(loglik: f64, num_params: usize, transitions: usize) -> f64 {
    -2.0 * loglik + num_params as f64 * (transitions as f64).ln()
}

/// Closed-form constant recovery rate `ΣΔY / Σ(Δt·I)`, floored at
/// [`RATE_FLOOR`].
pub fn constant_gamma_estimate(path: &EpidemicPath) -> f64 {
    let (mut removed, mut exposure) = (0.0, 0.0);
    for (w, t) in path.states().windows(2).zip(path.times().windows(2)) {
        removed += (w[0].s + w[0].i) as f64 - (w[1].s + w[1].i) as f64;
        exposure += (t[1] - t[0]) * w[0].i as f64;
    }
    let g = removed / exposure;
    if g.is_finite() {
        g.max(RATE_FLOOR)
    } else {
        RATE_FLOOR
    }
}

/// Nonnegative least squares `min ‖y − Xc‖² + λ‖c − ȳ‖²` by projected
/// coordinate descent. The small ridge pulls coefficients without data
/// support to the series mean.
fn nonnegative_least_squares(rows: &[Vec<f64>], y: &[f64], p: usize) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut h = vec![vec![0.0; p]; p];
    let mut g = vec![0.0; p];
    for (row, &yi) in rows.iter().zip(y) {
        for a in 0..p {
            if row[a] == 0.0 {
                continue;
            }
            g[a] += row[a] * yi;
            for b in 0..p {
                h[a][b] += row[a] * row[b];
            }
        }
    }
    let trace: f64 = (0..p).map(|a| h[a][a]).sum();
    let ridge = 1e-8 * (trace / p as f64 + 1.0);
    for a in 0..p {
        h[a][a] += ridge;
        g[a] += ridge * mean;
    }
    let mut c = vec![mean.max(0.0); p];
    for _ in 0..10_000 {
        let mut change: f64 = 0.0;
        for a in 0..p {
            let off: f64 = (0..p).filter(|&b| b != a).map(|b| h[a][b] * c[b]).sum();
            let next = ((g[a] - off) / h[a][a]).max(0.0);
            change = change.max((next - c[a]).abs());
            c[a] = next;
        }
        let scale = c.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if change <= 1e-14 * scale {
            break;
        }
    }
    c
}

/// Starting point for the search: spline coefficients from a nonnegative
/// least-squares fit to the rate series, `γ` from the closed-form estimate.
pub fn initial_theta(series: &RateSeries, basis: &KnotVector, path: &EpidemicPath) -> Result<ParameterVector> {
    if series.times.is_empty() {
        return Err(crate::error::invalid("rate series is empty"));
    }
    let rows = basis.rows(&series.times)?.dense(basis.num_basis());
    let coefs = nonnegative_least_squares(&rows, &series.values, basis.num_basis())
        .into_iter()
        .map(|c| c.max(RATE_FLOOR))
        .collect();
    ParameterVector::new(constant_gamma_estimate(path), SplineModel::new(basis.clone(), coefs)?)
}

/// Maximum likelihood fit with default [`FitOptions`].
pub fn fit_mle(
    path: &EpidemicPath,
    basis: &KnotVector,
    config: &LikelihoodConfig,
    init: &ParameterVector,
) -> Result<FitResult> {
    fit_mle_with(path, basis, config, init, &FitOptions::default())
}

/// Maximum likelihood fit over log-parameters with a Nelder–Mead search
/// followed by `options.restarts` restarts from the incumbent.
pub fn fit_mle_with(
    path: &EpidemicPath,
    basis: &KnotVector,
    config: &LikelihoodConfig,
    init: &ParameterVector,
    options: &FitOptions,
) -> Result<FitResult> {
    let evaluator = LikelihoodEvaluator::new(path, basis, *config)?;
    fit_with_evaluator(&evaluator, init, options)
}

pub(crate) fn fit_with_evaluator(
    evaluator: &LikelihoodEvaluator,
    init: &ParameterVector,
    options: &FitOptions,
) -> Result<FitResult> {
    let basis = evaluator.knots();
    if init.spline().coefficients().len() != basis.num_basis() {
        return Err(crate::error::invalid("initial parameters do not match the basis"));
    }
    if !init.is_feasible() {
        return Err(crate::error::invalid("initial parameters must be nonnegative"));
    }
    let objective = |x: &[f64]| {
        let coefs: Vec<f64> = x[1..].iter().map(|v| v.exp()).collect();
        evaluator.neg_loglik(x[0].exp(), &coefs)
    };
    let mut x: Vec<f64> = std::iter::once(init.gamma())
        .chain(init.spline().coefficients().iter().copied())
        .map(|v| v.max(RATE_FLOOR).ln())
        .collect();
    let start = objective(&x);
    if !start.is_finite() {
        return Err(Error::Initialization);
    }
    let p = x.len();
    let opts = SimplexOptions {
        f_rel_tol: options.f_rel_tol,
        x_tol: options.x_tol,
        max_evals: options.evals_per_param * p,
        initial_step: options.initial_step,
    };
    let mut evaluations = 1;
    let mut value = start;
    let mut converged = false;
    for _ in 0..=options.restarts {
        let run = simplex::minimize(objective, &x, opts);
        evaluations += run.evals;
        converged = run.converged;
        if run.f <= value {
            value = run.f;
            x = run.x;
        }
    }
    let coefs: Vec<f64> = x[1..].iter().map(|v| v.exp()).collect();
    let theta_hat = ParameterVector::new(x[0].exp(), SplineModel::new(basis.clone(), coefs)?)?;
    let loglik = -value;
    Ok(FitResult {
        bic: bic(loglik, p, evaluator.transitions()),
        theta_hat,
        loglik,
        converged: converged && loglik.is_finite(),
        evaluations,
    })
}
