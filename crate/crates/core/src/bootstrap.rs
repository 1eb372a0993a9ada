//! Parametric bootstrap bands for the infection rate.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{fit_with_evaluator, FitOptions};
use crate::likelihood::{LikelihoodConfig, LikelihoodEvaluator, ParameterVector};
use crate::normal::{std_pdf, std_quantile};
use crate::rng::derive_seed;
use crate::sir::{
    sample_path_at, simulate_exact, simulate_tau_leap, EpidemicPath, InfectionRate, RatePair,
};

/// Simulator used to draw bootstrap data sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BootstrapSimulator {
    /// Tau-leaping with `substeps` equal steps per observation interval.
    TauLeap { substeps: usize },
    /// Event-by-event simulation sampled at the observation times.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub max_attempts_factor: usize,
    pub seed: u64,
    pub simulator: BootstrapSimulator,
    pub fit: FitOptions,
}

impl BootstrapOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            max_attempts_factor: 10,
            seed,
            simulator: BootstrapSimulator::TauLeap { substeps: 1 },
            fit: FitOptions::default(),
        }
    }
}

/// Refitted curves on the observation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble {
    pub times: Vec<f64>,
    pub estimate: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub replicates: Vec<ParameterVector>,
    pub attempts: usize,
    pub discarded: usize,
    pub failed_fits: usize,
    pub requested: usize,
    pub shortfall: bool,
}

impl BootstrapEnsemble {
    /// Ensemble from precomputed curves, for band construction only.
    pub fn from_curves(times: Vec<f64>, estimate: Vec<f64>, curves: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != estimate.len() || curves.iter().any(|c| c.len() != times.len()) {
            return Err(invalid("ensemble curves must match the time grid"));
        }
        if curves.is_empty() {
            return Err(invalid("ensemble needs at least one curve"));
        }
        Ok(Self {
            requested: curves.len(),
            attempts: curves.len(),
            times,
            estimate,
            curves,
            replicates: vec![],
            discarded: 0,
            failed_fits: 0,
            shortfall: false,
        })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    fn column(&self, k: usize) -> Vec<f64> {
        self.curves.iter().map(|c| c[k]).collect()
    }

    /// Wide CSV: `time,estimate,rep_1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,estimate");
        for b in 1..=self.len() {
            let _ = write!(out, ",rep_{b}");
        }
        out.push('\n');
        for k in 0..self.times.len() {
            let _ = write!(out, "{},{}", self.times[k], self.estimate[k]);
            for c in &self.curves {
                let _ = write!(out, ",{}", c[k]);
            }
            out.push('\n');
        }
        out
    }
}

struct Shifted<'a> {
    rate: &'a dyn InfectionRate,
    offset: f64,
}

impl InfectionRate for Shifted<'_> {
    fn value(&self, t: f64) -> f64 {
        self.rate.value(t + self.offset)
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        self.rate.upper_bound(a + self.offset, b + self.offset)
    }
}

fn simulate_replicate(
    theta: &ParameterVector,
    template: &EpidemicPath,
    simulator: BootstrapSimulator,
    seed: u64,
) -> Result<EpidemicPath> {
    let grid = template.times();
    match simulator {
        BootstrapSimulator::TauLeap { substeps } => {
            let rates = RatePair::new(theta.spline(), theta.gamma())?;
            if substeps <= 1 {
                return simulate_tau_leap(&rates, template.initial(), grid, seed);
            }
            let mut fine = Vec::with_capacity((grid.len() - 1) * substeps + 1);
            for w in grid.windows(2) {
                let h = (w[1] - w[0]) / substeps as f64;
                fine.extend((0..substeps).map(|j| w[0] + j as f64 * h));
            }
            fine.push(grid[grid.len() - 1]);
            let path = simulate_tau_leap(&rates, template.initial(), &fine, seed)?;
            let states = path.states().iter().step_by(substeps).copied().collect();
            EpidemicPath::from_raw(grid.to_vec(), states)
        }
        BootstrapSimulator::Exact => {
            let offset = template.start();
            let shifted = Shifted {
                rate: theta.spline(),
                offset,
            };
            let rates = RatePair::new(shifted, theta.gamma())?;
            let local: Vec<f64> = grid.iter().map(|t| t - offset).collect();
            let path = simulate_exact(&rates, template.initial(), local[local.len() - 1], seed)?;
            let sampled = sample_path_at(&path, &local)?;
            EpidemicPath::from_raw(grid.to_vec(), sampled.states().to_vec())
        }
    }
}

enum Outcome {
    Discarded,
    Failed,
    Kept(ParameterVector, Vec<f64>),
}

/// Simulates data sets from `theta_hat` on the template's grid, discards
/// those in which the epidemic dies out, and refits the survivors with the
/// same basis. Replicate `a` uses the seed derived from `(seed, a)`, so the
/// ensemble does not depend on the number of worker threads.
pub fn run_bootstrap(
    theta_hat: &ParameterVector,
    template: &EpidemicPath,
    config: &LikelihoodConfig,
    options: &BootstrapOptions,
) -> Result<BootstrapEnsemble> {
    if options.replicates == 0 || options.max_attempts_factor == 0 {
        return Err(invalid("replicate count and attempt factor must be positive"));
    }
    if template.len() < 2 {
        return Err(invalid("template path needs at least two observations"));
    }
    let basis = theta_hat.knots();
    let times = template.times().to_vec();
    let estimate = basis.rows(&times)?.evaluate(theta_hat.spline().coefficients());
    let limit = options.max_attempts_factor * options.replicates;
    let mut ens = BootstrapEnsemble {
        times,
        estimate,
        curves: vec![],
        replicates: vec![],
        attempts: 0,
        discarded: 0,
        failed_fits: 0,
        requested: options.replicates,
        shortfall: false,
    };
    while ens.len() < options.replicates && ens.attempts < limit {
        let upto = (ens.attempts + options.replicates - ens.len()).min(limit);
        let outcomes: Vec<Outcome> = (ens.attempts..upto)
            .into_par_iter()
            .map(|a| {
                let seed = derive_seed(options.seed, &[a as u64]);
                let path = match simulate_replicate(theta_hat, template, options.simulator, seed) {
                    Ok(p) if p.survives() => p,
                    Ok(_) => return Outcome::Discarded,
                    Err(e) => {
                        log::warn!("bootstrap simulation {a} failed: {e}");
                        return Outcome::Failed;
                    }
                };
                let fit = LikelihoodEvaluator::new(&path, basis, *config)
                    .and_then(|ev| fit_with_evaluator(&ev, theta_hat, &options.fit));
                match fit {
                    Ok(r) if r.loglik.is_finite() => {
                        let curve = match basis.rows(template.times()) {
                            Ok(rows) => rows.evaluate(r.theta_hat.spline().coefficients()),
                            Err(_) => return Outcome::Failed,
                        };
                        Outcome::Kept(r.theta_hat, curve)
                    }
                    Ok(_) => Outcome::Failed,
                    Err(e) => {
                        log::warn!("bootstrap refit {a} failed: {e}");
                        Outcome::Failed
                    }
                }
            })
            .collect();
        ens.attempts = upto;
        for o in outcomes {
            match o {
                Outcome::Discarded => ens.discarded += 1,
                Outcome::Failed => ens.failed_fits += 1,
                Outcome::Kept(theta, curve) => {
                    ens.replicates.push(theta);
                    ens.curves.push(curve);
                }
            }
        }
    }
    if ens.is_empty() {
        return Err(Error::BootstrapShortfall { attempts: ens.attempts });
    }
    if ens.len() < options.replicates {
        log::warn!(
            "bootstrap kept {} of {} requested replicates after {} attempts",
            ens.len(),
            options.replicates,
            ens.attempts
        );
        ens.shortfall = true;
    }
    Ok(ens)
}

/// Pointwise bootstrap bias `mean(β̂*) − β̂`.
pub fn bootstrap_bias(ensemble: &BootstrapEnsemble) -> Vec<f64> {
    (0..ensemble.times.len())
        .map(|k| mean(&ensemble.column(k)) - ensemble.estimate[k])
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Pivotal,
    Normal,
    Percentile,
}

impl IntervalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::Pivotal => "pivotal",
            IntervalMethod::Normal => "normal",
            IntervalMethod::Percentile => "percentile",
        }
    }
}

impl std::fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pivotal" => Ok(IntervalMethod::Pivotal),
            "normal" => Ok(IntervalMethod::Normal),
            "percentile" => Ok(IntervalMethod::Percentile),
            other => Err(invalid(format!("unsupported interval method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    Weighted,
    Sample,
    Minmax,
}

impl Smoothing {
    pub fn as_str(self) -> &'static str {
        match self {
            Smoothing::None => "none",
            Smoothing::Weighted => "weighted",
            Smoothing::Sample => "sample",
            Smoothing::Minmax => "minmax",
        }
    }
}

impl FromStr for Smoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Smoothing::None),
            "weighted" => Ok(Smoothing::Weighted),
            "sample" => Ok(Smoothing::Sample),
            "minmax" | "min-max" => Ok(Smoothing::Minmax),
            other => Err(invalid(format!("unsupported smoothing '{other}'"))),
        }
    }
}

/// Pointwise confidence band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub times: Vec<f64>,
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub method: IntervalMethod,
    pub bias_corrected: bool,
    pub smoothing: Smoothing,
    pub level: f64,
}

#[derive(Serialize)]
struct BandMetadata {
    method: IntervalMethod,
    bias_corrected: bool,
    smoothing: Smoothing,
    level: f64,
    points: usize,
}

impl ConfidenceBand {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn contains(&self, k: usize, value: f64) -> bool {
        self.lower[k] <= value && value <= self.upper[k]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,point,lower,upper\n");
        for k in 0..self.len() {
            let _ = writeln!(out, "{},{},{},{}", self.times[k], self.point[k], self.lower[k], self.upper[k]);
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        let meta = BandMetadata {
            method: self.method,
            bias_corrected: self.bias_corrected,
            smoothing: self.smoothing,
            level: self.level,
            points: self.len(),
        };
        serde_json::to_string_pretty(&meta).expect("metadata serializes")
    }
}

/// Interval from a bootstrap sample. `estimate` and `bias` are the point
/// estimate and bootstrap bias at the timestamp. Returns `(point, lower, upper)`.
fn interval(
    sample: &mut [f64],
    estimate: f64,
    bias: f64,
    method: IntervalMethod,
    alpha: f64,
    corrected: bool,
) -> (f64, f64, f64) {
    match method {
        IntervalMethod::Pivotal => {
            sample.sort_by(f64::total_cmp);
            let (lo, hi) = (quantile(sample, alpha / 2.0), quantile(sample, 1.0 - alpha / 2.0));
            (estimate, 2.0 * estimate - hi, 2.0 * estimate - lo)
        }
        IntervalMethod::Normal => {
            let m = mean(sample);
            let var = sample.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (sample.len() - 1) as f64;
            let half = std_quantile(1.0 - alpha / 2.0) * var.sqrt();
            let center = if corrected { estimate - bias } else { estimate };
            (center, center - half, center + half)
        }
        IntervalMethod::Percentile => {
            sample.sort_by(f64::total_cmp);
            let (lo, hi) = (quantile(sample, alpha / 2.0), quantile(sample, 1.0 - alpha / 2.0));
            if corrected {
                (estimate - bias, lo - 2.0 * bias, hi - 2.0 * bias)
            } else {
                (estimate, lo, hi)
            }
        }
    }
}

fn check_level(ensemble: &BootstrapEnsemble, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level must be in (0, 1), got {level}")));
    }
    if ensemble.len() < 2 {
        return Err(invalid("bands need at least two bootstrap curves"));
    }
    Ok(1.0 - level)
}

/// Pointwise band at confidence `level` (that is, `1 − α`).
pub fn band(ensemble: &BootstrapEnsemble, method: IntervalMethod, level: f64, bias_corrected: bool) -> Result<ConfidenceBand> {
    let alpha = check_level(ensemble, level)?;
    let bias = bootstrap_bias(ensemble);
    let n = ensemble.times.len();
    let (mut point, mut lower, mut upper) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let mut col = ensemble.column(k);
        let (p, l, u) = interval(&mut col, ensemble.estimate[k], bias[k], method, alpha, bias_corrected);
        point.push(p);
        lower.push(l);
        upper.push(u);
    }
    Ok(ConfidenceBand {
        times: ensemble.times.clone(),
        point,
        lower,
        upper,
        method,
        bias_corrected,
        smoothing: Smoothing::None,
        level,
    })
}

/// Kernel-weighted average of the bounds over all timestamps with weights
/// `φ(tᵢ − tⱼ)`.
pub fn smooth_weighted(input: &ConfidenceBand) -> ConfidenceBand {
    let t = &input.times;
    let mut out = input.clone();
    for i in 0..t.len() {
        let (mut w_sum, mut lo, mut hi) = (0.0, 0.0, 0.0);
        for j in 0..t.len() {
            let w = std_pdf(t[i] - t[j]);
            w_sum += w;
            lo += w * input.lower[j];
            hi += w * input.upper[j];
        }
        out.lower[i] = lo / w_sum;
        out.upper[i] = hi / w_sum;
    }
    out.smoothing = Smoothing::Weighted;
    out
}

fn neighbours(i: usize, len: usize) -> std::ops::Range<usize> {
    i.saturating_sub(1)..(i + 2).min(len)
}

/// Band computed at each timestamp from the bootstrap values pooled over the
/// timestamp and its two neighbours.
pub fn smooth_sample(
    ensemble: &BootstrapEnsemble,
    method: IntervalMethod,
    level: f64,
    bias_corrected: bool,
) -> Result<ConfidenceBand> {
    let alpha = check_level(ensemble, level)?;
    let n = ensemble.times.len();
    let mut out = ConfidenceBand {
        times: ensemble.times.clone(),
        point: vec![0.0; n],
        lower: vec![0.0; n],
        upper: vec![0.0; n],
        method,
        bias_corrected,
        smoothing: Smoothing::Sample,
        level,
    };
    for i in 0..n {
        let range = neighbours(i, n);
        let mut pool: Vec<f64> = range.clone().flat_map(|k| ensemble.column(k)).collect();
        let bias = mean(&pool) - mean(&ensemble.estimate[range]);
        let (p, l, u) = interval(&mut pool, ensemble.estimate[i], bias, method, alpha, bias_corrected);
        out.point[i] = p;
        out.lower[i] = l;
        out.upper[i] = u;
    }
    Ok(out)
}

/// Widens each bound to the extreme over the timestamp and its neighbours.
pub fn smooth_minmax(input: &ConfidenceBand) -> ConfidenceBand {
    let n = input.len();
    let mut out = input.clone();
    for i in 0..n {
        let r = neighbours(i, n);
        out.lower[i] = input.lower[r.clone()].iter().copied().fold(f64::INFINITY, f64::min);
        out.upper[i] = input.upper[r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    out.smoothing = Smoothing::Minmax;
    out
}

/// Band with the given smoothing applied.
pub fn smoothed_band(
    ensemble: &BootstrapEnsemble,
    method: IntervalMethod,
    level: f64,
    bias_corrected: bool,
    smoothing: Smoothing,
) -> Result<ConfidenceBand> {
    match smoothing {
        Smoothing::Sample => smooth_sample(ensemble, method, level, bias_corrected),
        Smoothing::None => band(ensemble, method, level, bias_corrected),
        Smoothing::Weighted => Ok(smooth_weighted(&band(ensemble, method, level, bias_corrected)?)),
        Smoothing::Minmax => Ok(smooth_minmax(&band(ensemble, method, level, bias_corrected)?)),
    }
}
