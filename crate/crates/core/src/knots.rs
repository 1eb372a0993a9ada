//! Data-driven knot placement and forward selection of the number of knots.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{fit_with_evaluator, initial_theta, FitOptions, FitResult};
use crate::likelihood::{LikelihoodConfig, LikelihoodEvaluator};
use crate::sir::EpidemicPath;
use crate::spline::KnotVector;

/// Windowed constant-rate estimates of `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Positions whose window had no infection exposure; their value is 0.
    pub undefined: Vec<usize>,
}

impl RateSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t},{v}");
        }
        out
    }
}

/// One level of the finite-difference ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeLevel {
    pub order: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Feature function `f` and its cumulative trapezoid integral `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCurve {
    pub times: Vec<f64>,
    pub f_values: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Minimum separation enforced between placed knots.
    pub spacing: f64,
}

impl FeatureCurve {
    /// Builds a curve from `f` values, integrating by the trapezoid rule.
    pub fn from_feature(times: Vec<f64>, f_values: Vec<f64>, spacing: f64) -> Result<Self> {
        if times.len() < 2 || times.len() != f_values.len() {
            return Err(invalid("feature curve needs at least two matching points"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("feature curve times must be strictly increasing"));
        }
        if f_values.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(invalid("feature values must be finite and nonnegative"));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(0.0);
        for k in 1..times.len() {
            let area = 0.5 * (f_values[k - 1] + f_values[k]) * (times[k] - times[k - 1]);
            cumulative.push(cumulative[k - 1] + area);
        }
        Ok(Self {
            times,
            f_values,
            cumulative,
            spacing,
        })
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn ends(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,f,F\n");
        for k in 0..self.times.len() {
            let _ = writeln!(out, "{},{},{}", self.times[k], self.f_values[k], self.cumulative[k]);
        }
        out
    }
}

/// Per-window closed-form tau-leap estimate of a constant `β`.
///
/// Window `i` spans observations `i..i+w` and its value is recorded at
/// `(t_i + t_{i+w-1}) / 2`.
pub fn moving_average_rates(path: &EpidemicPath, window: usize) -> Result<RateSeries> {
    if window < 2 {
        return Err(invalid("moving-average window must be at least 2"));
    }
    if path.len() < window + 1 {
        return Err(invalid(format!(
            "moving-average window {window} needs at least {} observations, got {}",
            window + 1,
            path.len()
        )));
    }
    let n = path.population() as f64;
    let times = path.times();
    let states = path.states();
    let mut series = RateSeries {
        times: Vec::new(),
        values: Vec::new(),
        undefined: Vec::new(),
    };
    for start in 0..=path.len() - window {
        let (mut infections, mut exposure) = (0.0, 0.0);
        for k in start..start + window - 1 {
            let (a, b) = (states[k], states[k + 1]);
            infections += a.s as f64 - b.s as f64;
            exposure += (times[k + 1] - times[k]) * a.s as f64 * a.i as f64;
        }
        let value = if exposure > 0.0 {
            (n * infections / exposure).max(0.0)
        } else {
            log::warn!("rate window starting at t = {} has no exposure; using 0", times[start]);
            series.undefined.push(series.times.len());
            0.0
        };
        series.times.push(0.5 * (times[start] + times[start + window - 1]));
        series.values.push(value);
    }
    Ok(series)
}

/// Divided differences of orders `1..=order`, each level at the midpoints of
/// the previous level's timestamps.
pub fn finite_difference_ladder(series: &RateSeries, order: usize) -> Result<Vec<DerivativeLevel>> {
    if order == 0 {
        return Err(invalid("derivative order must be at least 1"));
    }
    if series.len() <= order {
        return Err(invalid(format!(
            "series of length {} is too short for derivative order {order}",
            series.len()
        )));
    }
    let mut levels = Vec::with_capacity(order);
    let (mut times, mut values) = (series.times.clone(), series.values.clone());
    for k in 1..=order {
        let next_times: Vec<f64> = times.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let next_values: Vec<f64> = (0..times.len() - 1)
            .map(|i| (values[i + 1] - values[i]) / (times[i + 1] - times[i]))
            .collect();
        times = next_times;
        values = next_values;
        levels.push(DerivativeLevel {
            order: k,
            times: times.clone(),
            values: values.clone(),
        });
    }
    Ok(levels)
}

/// Feature function from the top level of a derivative ladder.
///
/// `ends` are the second and last timestamps of the rate series, where `f` is
/// pinned to zero. The first derivative value is dropped, matching the
/// indexing of the placement rule.
pub fn feature_curve(top: &DerivativeLevel, degree: usize, ends: (f64, f64)) -> Result<FeatureCurve> {
    if top.values.is_empty() {
        return Err(invalid("derivative series is empty"));
    }
    let power = 1.0 / (degree as f64 + 1.0);
    let interior = 1..top.values.len();
    let mut times = vec![ends.0];
    let mut f = vec![0.0];
    for k in interior {
        times.push(top.times[k]);
        f.push(top.values[k].abs().powf(power));
    }
    times.push(ends.1);
    f.push(0.0);
    let spacing = {
        let inner = &times[1..times.len() - 1];
        let gaps = inner.windows(2).map(|w| w[1] - w[0]);
        let min = gaps.fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            min
        } else {
            (ends.1 - ends.0) / (times.len() - 1) as f64
        }
    };
    FeatureCurve::from_feature(times, f, spacing)
}

/// Feature curve for a rate series and spline degree.
pub fn knot_curve(series: &RateSeries, degree: usize) -> Result<FeatureCurve> {
    let ladder = finite_difference_ladder(series, degree + 1)?;
    let top = ladder.last().expect("ladder has at least one level");
    if series.len() < 2 {
        return Err(invalid("rate series too short"));
    }
    feature_curve(top, degree, (series.times[1], series.times[series.len() - 1]))
}

/// Interior knots and whether the uniform fallback was used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotPlacement {
    pub knots: Vec<f64>,
    pub fallback: bool,
}

fn uniform_knots((a, b): (f64, f64), count: usize) -> Vec<f64> {
    (1..=count).map(|j| a + (b - a) * j as f64 / (count + 1) as f64).collect()
}

fn inverse_cumulative(curve: &FeatureCurve, level: f64) -> f64 {
    let k = curve.cumulative.partition_point(|&c| c < level).clamp(1, curve.times.len() - 1);
    let (f0, f1) = (curve.cumulative[k - 1], curve.cumulative[k]);
    let (t0, t1) = (curve.times[k - 1], curve.times[k]);
    if f1 > f0 {
        t0 + (level - f0) / (f1 - f0) * (t1 - t0)
    } else {
        t0
    }
}

/// Places `count` knots so that `F` rises by equal amounts between them.
pub fn place_knots(curve: &FeatureCurve, count: usize) -> Result<KnotPlacement> {
    if curve.times.len() < 2 {
        return Err(invalid("feature curve needs at least two points"));
    }
    let ends = curve.ends();
    if count == 0 {
        return Ok(KnotPlacement {
            knots: vec![],
            fallback: false,
        });
    }
    let fallback = |reason: &str| {
        log::warn!("{reason}; placing {count} uniform knots");
        KnotPlacement {
            knots: uniform_knots(ends, count),
            fallback: true,
        }
    };
    let total = curve.total();
    if !(total > 0.0) {
        return Ok(fallback("feature function is identically zero"));
    }
    let gap = curve.spacing;
    if !(gap > 0.0) || (count + 1) as f64 * gap > ends.1 - ends.0 {
        return Ok(fallback("domain too short for separated knots"));
    }
    let mut knots: Vec<f64> = (1..=count)
        .map(|j| inverse_cumulative(curve, total * j as f64 / (count + 1) as f64))
        .collect();
    let mut prev = ends.0;
    for k in knots.iter_mut() {
        *k = k.max(prev + gap);
        prev = *k;
    }
    let mut next = ends.1;
    for k in knots.iter_mut().rev() {
        *k = k.min(next - gap);
        next = *k;
    }
    Ok(KnotPlacement { knots, fallback: false })
}

/// Patience of forward selection: consecutive non-improving sizes tolerated.
pub const SELECTION_PATIENCE: usize = 3;

/// Index after which forward selection stops, given the BIC values so far
/// (`None` marks a failed fit).
pub fn stop_index(bics: &[Option<f64>]) -> Option<usize> {
    let mut best = f64::INFINITY;
    let mut since = 0;
    for (k, b) in bics.iter().enumerate() {
        match b {
            Some(v) if *v < best => {
                best = *v;
                since = 0;
            }
            _ => since += 1,
        }
        if since == SELECTION_PATIENCE {
            return Some(k);
        }
    }
    None
}

/// Index of the smallest BIC, earliest on ties.
pub fn best_index(bics: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, b) in bics.iter().enumerate() {
        if let Some(v) = *b {
            if best.map_or(true, |(_, bv)| v < bv) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// One candidate size in forward selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicStep {
    pub num_knots: usize,
    pub knots: Vec<f64>,
    pub fallback: bool,
    pub loglik: Option<f64>,
    pub bic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub window: usize,
    pub max_knots: usize,
    pub fit: FitOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            window: 2,
            max_knots: 15,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub fit: FitResult,
    pub num_knots: usize,
    pub trace: Vec<BicStep>,
    pub series: RateSeries,
    pub curve: Option<FeatureCurve>,
}

impl Selection {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("num_knots,bic,loglik,converged,fallback,knots\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.trace {
            let knots: Vec<String> = s.knots.iter().map(|k| k.to_string()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.num_knots,
                opt(s.bic),
                opt(s.loglik),
                s.converged,
                s.fallback,
                knots.join(" ")
            );
        }
        out
    }
}

fn fit_size(
    path: &EpidemicPath,
    degree: usize,
    config: &LikelihoodConfig,
    series: &RateSeries,
    curve: Option<&FeatureCurve>,
    count: usize,
    fit: &FitOptions,
) -> (BicStep, Option<FitResult>) {
    let domain = (path.start(), path.end());
    let placement = match curve {
        Some(c) => place_knots(c, count),
        None if count == 0 => Ok(KnotPlacement {
            knots: vec![],
            fallback: false,
        }),
        None => Ok(KnotPlacement {
            knots: uniform_knots(domain, count),
            fallback: true,
        }),
    };
    let mut step = BicStep {
        num_knots: count,
        knots: vec![],
        fallback: false,
        loglik: None,
        bic: None,
        converged: false,
        error: None,
    };
    let result = placement.and_then(|p| {
        step.knots = p.knots.clone();
        step.fallback = p.fallback;
        let basis = KnotVector::new(domain, p.knots, degree)?;
        let init = initial_theta(series, &basis, path)?;
        let evaluator = LikelihoodEvaluator::new(path, &basis, *config)?;
        fit_with_evaluator(&evaluator, &init, fit)
    });
    match result {
        Ok(r) if r.loglik.is_finite() => {
            step.loglik = Some(r.loglik);
            step.bic = Some(r.bic);
            step.converged = r.converged;
            (step, Some(r))
        }
        Ok(_) => {
            step.error = Some("non-finite log-likelihood".into());
            (step, None)
        }
        Err(e) => {
            log::warn!("fit with {count} knots failed: {e}");
            step.error = Some(e.to_string());
            (step, None)
        }
    }
}

/// Forward selection of the number of interior knots by BIC.
///
/// Sizes are fitted in parallel batches; the stopping rule is applied to the
/// results in order of size, so the outcome does not depend on scheduling.
pub fn forward_bic_select(
    path: &EpidemicPath,
    degree: usize,
    config: &LikelihoodConfig,
    options: &SelectionOptions,
) -> Result<Selection> {
    let series = moving_average_rates(path, options.window)?;
    let curve = match knot_curve(&series, degree) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no feature curve ({e}); larger models use uniform knots");
            None
        }
    };
    let mut trace = Vec::new();
    let mut fits: Vec<Option<FitResult>> = Vec::new();
    let mut next = 0;
    'outer: while next <= options.max_knots {
        let upto = (next + SELECTION_PATIENCE).min(options.max_knots + 1);
        let batch: Vec<_> = (next..upto)
            .into_par_iter()
            .map(|k| fit_size(path, degree, config, &series, curve.as_ref(), k, &options.fit))
            .collect();
        for (step, fit) in batch {
            trace.push(step);
            fits.push(fit);
            let bics: Vec<Option<f64>> = trace.iter().map(|s| s.bic).collect();
            if stop_index(&bics).is_some() {
                break 'outer;
            }
        }
        next = upto;
    }
    let bics: Vec<Option<f64>> = trace.iter().map(|s| s.bic).collect();
    let best = best_index(&bics).ok_or(Error::Selection)?;
    let fit = fits[best].take().ok_or(Error::Selection)?;
    Ok(Selection {
        fit,
        num_knots: best,
        trace,
        series,
        curve,
    })
}
