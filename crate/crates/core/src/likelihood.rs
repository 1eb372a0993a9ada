//! Approximate log-likelihoods of discretely observed SIR paths.
//!
//! Both families factor over the `M - 1` transitions between consecutive
//! observations, conditional on the first observation:
//!
//! * **tau-leap**: each transition is a pair of independent Poisson counts
//!   (infections `ΔW`, removals `ΔY`) with rates frozen at the left endpoint;
//! * **diffusion**: each transition is the Gaussian Euler–Maruyama step of the
//!   diffusion approximation on proportions, with observations on the boundary
//!   of `[0, 1]²` treated as censored.
//!
//! With `k > 1` steps per observation gap the transition density is the
//! expectation of the one-step density over `k - 1` latent sub-steps,
//! estimated by averaging over `B` simulated sub-paths.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::normal::{self, HalfLine};
use crate::rng;
use crate::sir::{self, CountState, EpidemicPath, ProportionState};
use crate::spline::{BasisRows, KnotVector, SplineModel};

/// Likelihood approximation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    TauLeap,
    Diffusion,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::TauLeap => "tau-leap",
            Family::Diffusion => "diffusion",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tau-leap" | "tauleap" | "tau_leap" | "tau" => Ok(Family::TauLeap),
            "diffusion" | "diff" => Ok(Family::Diffusion),
            other => Err(invalid(format!("unknown likelihood family '{other}'"))),
        }
    }
}

/// Likelihood family and Monte-Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikelihoodConfig {
    pub family: Family,
    /// Euler/tau-leap steps per observation gap.
    pub steps: usize,
    /// Simulated sub-paths per transition when `steps > 1`.
    pub mc_paths: usize,
    pub seed: u64,
}

impl LikelihoodConfig {
    pub fn new(family: Family, steps: usize, mc_paths: usize, seed: u64) -> Result<Self> {
        if steps == 0 || mc_paths == 0 {
            return Err(invalid("steps and Monte-Carlo paths must be at least 1"));
        }
        Ok(Self {
            family,
            steps,
            mc_paths,
            seed,
        })
    }

    pub fn one_step(family: Family) -> Self {
        Self {
            family,
            steps: 1,
            mc_paths: 1,
            seed: 0,
        }
    }
}

/// Recovery rate and spline infection rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    gamma: f64,
    spline: SplineModel,
}

impl ParameterVector {
    /// Requires `gamma ≥ 0` and nonnegative spline coefficients.
    pub fn new(gamma: f64, spline: SplineModel) -> Result<Self> {
        let p = Self { gamma, spline };
        if !p.is_feasible() {
            return Err(invalid("recovery rate and spline coefficients must be finite and >= 0"));
        }
        Ok(p)
    }

    /// Skips the sign checks. Infeasible vectors evaluate to `+∞` in
    /// [`neg_loglik`].
    pub fn unconstrained(gamma: f64, spline: SplineModel) -> Self {
        Self { gamma, spline }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn spline(&self) -> &SplineModel {
        &self.spline
    }

    pub fn knots(&self) -> &KnotVector {
        self.spline.knots()
    }

    /// Number of free parameters, `K + d + 2`.
    pub fn len(&self) -> usize {
        self.spline.coefficients().len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_feasible(&self) -> bool {
        self.gamma.is_finite()
            && self.gamma >= 0.0
            && self
                .spline
                .coefficients()
                .iter()
                .all(|c| c.is_finite() && *c >= 0.0)
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        self.spline.value(t)
    }
}

/// Mean and covariance of a one-step Gaussian transition, and the
/// conditional moments of each coordinate given the other's observed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMoments {
    pub mu: [f64; 2],
    pub sigma: [[f64; 2]; 2],
    /// Mean of `s` given the observed `j`.
    pub cond_mean_s: f64,
    /// Mean of `j` given the observed `s`.
    pub cond_mean_j: f64,
    pub cond_var_s: f64,
    pub cond_var_j: f64,
}

impl TransitionMoments {
    pub fn new(mu: [f64; 2], sigma: [[f64; 2]; 2], observed: ProportionState) -> Self {
        let (s11, s12, s22) = (sigma[0][0], sigma[0][1], sigma[1][1]);
        Self {
            mu,
            sigma,
            cond_mean_s: mu[0] + s12 / s22 * (observed.j - mu[1]),
            cond_mean_j: mu[1] + s12 / s11 * (observed.s - mu[0]),
            cond_var_s: s11 - s12 * s12 / s22,
            cond_var_j: s22 - s12 * s12 / s11,
        }
    }

    fn det(&self) -> f64 {
        self.sigma[0][0] * self.sigma[1][1] - self.sigma[0][1] * self.sigma[1][0]
    }
}

/// Drift vector `A` and diffusion matrix `Σ = L Lᵀ` of the SIR diffusion at
/// state `z` and time `t`.
pub fn drift_and_diffusion(
    t: f64,
    z: ProportionState,
    theta: &ParameterVector,
    n: u64,
) -> Result<([f64; 2], [[f64; 2]; 2])> {
    let beta = theta.beta(t)?;
    Ok(drift_and_covariance(z, beta, theta.gamma, n as f64))
}

fn drift_and_covariance(z: ProportionState, beta: f64, gamma: f64, n: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let (drift, l) = sir::drift_and_factor(z, beta, gamma, n);
    let mut sigma = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            sigma[r][c] = l[r][0] * l[c][0] + l[r][1] * l[c][1];
        }
    }
    (drift, sigma)
}

/// One-step Gaussian transition moments from `prev` over `dt`, with the
/// conditional moments taken at the observed `next`.
pub fn transition_moments(
    prev: ProportionState,
    next: ProportionState,
    beta: f64,
    gamma: f64,
    n: u64,
    dt: f64,
) -> TransitionMoments {
    let (a, sig) = drift_and_covariance(prev, beta, gamma, n as f64);
    let mu = [prev.s + a[0] * dt, prev.j + a[1] * dt];
    let sigma = [[sig[0][0] * dt, sig[0][1] * dt], [sig[1][0] * dt, sig[1][1] * dt]];
    TransitionMoments::new(mu, sigma, next)
}

fn censoring(x: f64) -> Option<HalfLine> {
    if x <= 0.0 {
        Some(HalfLine::Below(0.0))
    } else if x >= 1.0 {
        Some(HalfLine::Above(1.0))
    } else {
        None
    }
}

/// Log transition density of the one-step diffusion scheme, with censoring
/// of boundary observations. `None` when the covariance is singular.
pub fn diffusion_transition_loglik(
    prev: ProportionState,
    next: ProportionState,
    beta: f64,
    gamma: f64,
    n: u64,
    dt: f64,
) -> Option<f64> {
    let m = transition_moments(prev, next, beta, gamma, n, dt);
    if !(m.det() > 0.0) || !(m.sigma[0][0] > 0.0) || !(m.sigma[1][1] > 0.0) {
        return None;
    }
    let value = match (censoring(next.s), censoring(next.j)) {
        (None, None) => normal::ln_pdf_bivariate([next.s, next.j], m.mu, m.sigma)?,
        (None, Some(cj)) => {
            normal::ln_pdf(next.s, m.mu[0], m.sigma[0][0]) + cj.ln_prob(m.cond_mean_j, m.cond_var_j)
        }
        (Some(cs), None) => {
            normal::ln_pdf(next.j, m.mu[1], m.sigma[1][1]) + cs.ln_prob(m.cond_mean_s, m.cond_var_s)
        }
        (Some(cs), Some(cj)) => normal::quadrant_prob(cs, cj, m.mu, m.sigma)?.ln(),
    };
    Some(value)
}

fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

#[inline]
fn ln_poisson(count: u64, rate: f64, ln_fact: f64) -> f64 {
    if rate == 0.0 {
        return if count == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    count as f64 * rate.ln() - rate - ln_fact
}

/// Event counts between two observations, or `None` if either is negative.
fn increments(prev: CountState, next: CountState) -> Option<(u64, u64)> {
    let dw = prev.s.checked_sub(next.s)?;
    let dy = (prev.s + prev.i).checked_sub(next.s + next.i)?;
    Some((dw, dy))
}

#[inline]
fn tauleap_rates(prev: CountState, beta: f64, gamma: f64, dt: f64) -> (f64, f64) {
    let pressure = prev.s as f64 * prev.i as f64 / prev.n as f64;
    (dt * beta * pressure, dt * gamma * prev.i as f64)
}

/// Log pmf of one tau-leap transition; `None` if `next` is unreachable
/// from `prev` (a negative increment).
pub fn tauleap_transition_loglik(
    prev: CountState,
    next: CountState,
    beta: f64,
    gamma: f64,
    dt: f64,
) -> Option<f64> {
    let (dw, dy) = increments(prev, next)?;
    let (rw, ry) = tauleap_rates(prev, beta, gamma, dt);
    Some(ln_poisson(dw, rw, ln_factorial(dw)) + ln_poisson(dy, ry, ln_factorial(dy)))
}

/// Per-path quantities that do not depend on the parameters.
#[derive(Debug, Clone)]
struct PathData {
    states: Vec<CountState>,
    props: Vec<ProportionState>,
    dts: Vec<f64>,
    /// `(ΔW, ΔY, ln ΔW!, ln ΔY!)` per transition; tau-leap family only.
    counts: Vec<(u64, u64, f64, f64)>,
    population: u64,
}

impl PathData {
    fn new(path: &EpidemicPath, family: Family) -> Result<Self> {
        if path.len() < 2 {
            return Err(invalid("likelihood needs at least two observations"));
        }
        let states = path.states().to_vec();
        let counts = match family {
            Family::TauLeap => states
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let (dw, dy) = increments(w[0], w[1]).ok_or_else(|| Error::InvalidData {
                        index: i,
                        reason: "negative infection or removal increment".into(),
                    })?;
                    Ok((dw, dy, ln_factorial(dw), ln_factorial(dy)))
                })
                .collect::<Result<Vec<_>>>()?,
            Family::Diffusion => Vec::new(),
        };
        Ok(Self {
            props: states.iter().map(CountState::proportions).collect(),
            dts: path.times().windows(2).map(|w| w[1] - w[0]).collect(),
            states,
            counts,
            population: path.population(),
        })
    }

    fn transitions(&self) -> usize {
        self.dts.len()
    }

    /// Times at which the rate is needed: `t_i + r·Δt_i/k` for `r < k`.
    fn rate_times(path: &EpidemicPath, steps: usize) -> Vec<f64> {
        let times = path.times();
        let mut out = Vec::with_capacity((times.len() - 1) * steps);
        for w in times.windows(2) {
            let dtau = (w[1] - w[0]) / steps as f64;
            for r in 0..steps {
                out.push(w[0] + r as f64 * dtau);
            }
        }
        out
    }

    fn tauleap(&self, betas: &[f64], gamma: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(dw, dy, fw, fy)) in self.counts.iter().enumerate() {
            let (rw, ry) = tauleap_rates(self.states[i], betas[i], gamma, self.dts[i]);
            total += ln_poisson(dw, rw, fw) + ln_poisson(dy, ry, fy);
        }
        total
    }

    fn diffusion(&self, betas: &[f64], gamma: f64) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.transitions() {
            total += diffusion_transition_loglik(
                self.props[i],
                self.props[i + 1],
                betas[i],
                gamma,
                self.population,
                self.dts[i],
            )
            .ok_or_else(|| Error::DegenerateTransition {
                index: i,
                reason: "singular transition covariance".into(),
            })?;
        }
        Ok(total)
    }

    /// Monte-Carlo estimate of one transition's log density with `k` steps.
    fn multistep_transition(&self, i: usize, betas: &[f64], gamma: f64, config: &LikelihoodConfig) -> Result<f64> {
        let k = config.steps;
        let dtau = self.dts[i] / k as f64;
        let n = self.population;
        let mut values = Vec::with_capacity(config.mc_paths);
        for b in 0..config.mc_paths {
            let mut rng = rng::stream(config.seed, &[i as u64, b as u64]);
            let value = match config.family {
                Family::Diffusion => {
                    let mut z = self.props[i];
                    for &beta in &betas[..k - 1] {
                        z = sir::em_step(z, beta, gamma, n as f64, dtau, sir::normal_pair(&mut rng));
                    }
                    diffusion_transition_loglik(z, self.props[i + 1], betas[k - 1], gamma, n, dtau)
                }
                Family::TauLeap => {
                    let mut x = self.states[i];
                    for &beta in &betas[..k - 1] {
                        if x.i > 0 {
                            x = sir::tau_leap_step(x, beta, gamma, dtau, &mut rng).0;
                        }
                    }
                    tauleap_transition_loglik(x, self.states[i + 1], betas[k - 1], gamma, dtau)
                }
            };
            values.push(value);
        }
        log_mean_exp(&values).ok_or(Error::MonteCarloDegenerate { index: i })
    }

    fn multistep(&self, betas: &[f64], gamma: f64, config: &LikelihoodConfig) -> Result<f64> {
        let k = config.steps;
        let parts: Vec<Result<f64>> = (0..self.transitions())
            .into_par_iter()
            .map(|i| self.multistep_transition(i, &betas[i * k..(i + 1) * k], gamma, config))
            .collect();
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total)
    }

    fn loglik(&self, betas: &[f64], gamma: f64, config: &LikelihoodConfig) -> Result<f64> {
        match (config.family, config.steps) {
            (Family::TauLeap, 1) => Ok(self.tauleap(betas, gamma)),
            (Family::Diffusion, 1) => self.diffusion(betas, gamma),
            _ => self.multistep(betas, gamma, config),
        }
    }
}

/// `ln((1/B) Σ exp(vᵢ))` over all entries, treating `None` as a zero
/// density. `None` when every entry is `None`.
fn log_mean_exp(values: &[Option<f64>]) -> Option<f64> {
    let max = values.iter().flatten().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if values.iter().all(Option::is_none) {
        return None;
    }
    if max == f64::NEG_INFINITY {
        return Some(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().flatten().map(|v| (v - max).exp()).sum();
    Some(max + (sum / values.len() as f64).ln())
}

fn rates_at(theta: &ParameterVector, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| theta.beta(t)).collect()
}

/// One-step tau-leap log-likelihood, conditional on the first observation.
pub fn tauleap_loglik_1step(path: &EpidemicPath, theta: &ParameterVector) -> Result<f64> {
    let data = PathData::new(path, Family::TauLeap)?;
    let betas = rates_at(theta, &path.times()[..path.len() - 1])?;
    Ok(data.tauleap(&betas, theta.gamma))
}

/// One-step diffusion log-likelihood with censored boundary observations.
pub fn diffusion_loglik_1step(path: &EpidemicPath, theta: &ParameterVector) -> Result<f64> {
    let data = PathData::new(path, Family::Diffusion)?;
    let betas = rates_at(theta, &path.times()[..path.len() - 1])?;
    data.diffusion(&betas, theta.gamma)
}

/// Multi-step Monte-Carlo log-likelihood. With one step this is exactly the
/// one-step log-likelihood of the configured family.
pub fn multistep_loglik(path: &EpidemicPath, theta: &ParameterVector, config: &LikelihoodConfig) -> Result<f64> {
    if config.steps == 0 || config.mc_paths == 0 {
        return Err(invalid("steps and Monte-Carlo paths must be at least 1"));
    }
    if config.steps == 1 {
        return match config.family {
            Family::TauLeap => tauleap_loglik_1step(path, theta),
            Family::Diffusion => diffusion_loglik_1step(path, theta),
        };
    }
    let data = PathData::new(path, config.family)?;
    let betas = rates_at(theta, &PathData::rate_times(path, config.steps))?;
    data.multistep(&betas, theta.gamma, config)
}

/// Negative log-likelihood for minimization. Infeasible parameters and
/// non-finite log-likelihoods map to `+∞`.
pub fn neg_loglik(path: &EpidemicPath, theta: &ParameterVector, config: &LikelihoodConfig) -> Result<f64> {
    if !theta.is_feasible() {
        return Ok(f64::INFINITY);
    }
    let ll = multistep_loglik(path, theta, config)?;
    Ok(negate(ll))
}

fn negate(ll: f64) -> f64 {
    if ll.is_finite() {
        -ll
    } else {
        f64::INFINITY
    }
}

/// Log-likelihood of a fixed path and basis as a function of `(γ, c)`, with
/// the basis rows at every rate time cached.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    data: PathData,
    rows: BasisRows,
    config: LikelihoodConfig,
    knots: KnotVector,
}

impl LikelihoodEvaluator {
    pub fn new(path: &EpidemicPath, knots: &KnotVector, config: LikelihoodConfig) -> Result<Self> {
        if config.steps == 0 || config.mc_paths == 0 {
            return Err(invalid("steps and Monte-Carlo paths must be at least 1"));
        }
        let data = PathData::new(path, config.family)?;
        let rows = knots.rows(&PathData::rate_times(path, config.steps))?;
        Ok(Self {
            data,
            rows,
            config,
            knots: knots.clone(),
        })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn config(&self) -> &LikelihoodConfig {
        &self.config
    }

    /// Number of transitions `M - 1`.
    pub fn transitions(&self) -> usize {
        self.data.transitions()
    }

    pub fn loglik(&self, gamma: f64, coefficients: &[f64]) -> Result<f64> {
        let betas = self.rows.evaluate(coefficients);
        self.data.loglik(&betas, gamma, &self.config)
    }

    /// Negative log-likelihood; errors and infeasible parameters give `+∞`.
    pub fn neg_loglik(&self, gamma: f64, coefficients: &[f64]) -> f64 {
        let feasible = gamma.is_finite() && gamma >= 0.0 && coefficients.iter().all(|c| c.is_finite() && *c >= 0.0);
        if !feasible {
            return f64::INFINITY;
        }
        self.loglik(gamma, coefficients).map_or(f64::INFINITY, negate)
    }
}
