//! SIR states, observed paths and the three stochastic simulators.
//!
//! * [`simulate_exact`] resolves every event of the Markov jump process, using
//!   thinning against a windowed upper bound of `β(t)`.
//! * [`simulate_tau_leap`] freezes both event rates over each grid step and
//!   draws Poisson event counts.
//! * [`simulate_euler_maruyama`] integrates the diffusion approximation of the
//!   proportions `(s, j)`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// Width of the look-ahead window over which the thinning bound of `β` is taken.
const THINNING_WINDOW: f64 = 1.0;

/// Compartment counts at one instant. The removed count is `n - s - i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountState {
    pub s: u64,
    pub i: u64,
    pub n: u64,
}

impl CountState {
    pub fn new(s: u64, i: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("population must be at least 1"));
        }
        if s.checked_add(i).map_or(true, |tot| tot > n) {
            return Err(invalid(format!("S + I = {} + {} exceeds N = {}", s, i, n)));
        }
        Ok(Self { s, i, n })
    }

    pub fn removed(&self) -> u64 {
        self.n - self.s - self.i
    }

    pub fn proportions(&self) -> ProportionState {
        let n = self.n as f64;
        ProportionState {
            s: self.s as f64 / n,
            j: self.i as f64 / n,
        }
    }
}

/// Susceptible and infected fractions. Diffusion states may leave `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionState {
    pub s: f64,
    pub j: f64,
}

impl ProportionState {
    /// True when the state is a valid SIR proportion pair.
    pub fn within_bounds(&self) -> bool {
        self.s >= 0.0 && self.j >= 0.0 && self.s + self.j <= 1.0
    }
}

/// Observed or simulated states at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicPath {
    times: Vec<f64>,
    states: Vec<CountState>,
    population: u64,
}

impl EpidemicPath {
    /// Builds a path, checking that times increase strictly, the population is
    /// constant, `S` never increases and the removed count never decreases.
    pub fn new(times: Vec<f64>, states: Vec<CountState>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(invalid(format!(
                "path needs matching, non-empty times and states ({} vs {})",
                times.len(),
                states.len()
            )));
        }
        let population = states[0].n;
        for (k, st) in states.iter().enumerate() {
            if !times[k].is_finite() {
                return Err(invalid(format!("time {} is not finite", k)));
            }
            CountState::new(st.s, st.i, st.n)?;
            if st.n != population {
                return Err(invalid(format!("population changes at observation {}", k)));
            }
        }
        for k in 1..times.len() {
            if times[k] <= times[k - 1] {
                return Err(invalid(format!("times not strictly increasing at {}", k)));
            }
            let (a, b) = (states[k - 1], states[k]);
            if b.s > a.s {
                return Err(Error::InvalidData {
                    index: k - 1,
                    reason: format!("susceptible count increases ({} -> {})", a.s, b.s),
                });
            }
            if b.s + b.i > a.s + a.i {
                return Err(Error::InvalidData {
                    index: k - 1,
                    reason: "removed count decreases".into(),
                });
            }
        }
        Ok(Self {
            times,
            states,
            population,
        })
    }

    /// Builds a path without the monotonicity checks. Used for observed data
    /// whose validity is checked by the likelihood instead.
    pub fn from_raw(times: Vec<f64>, states: Vec<CountState>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(invalid("path needs matching, non-empty times and states"));
        }
        let population = states[0].n;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times not strictly increasing"));
        }
        if states.iter().any(|s| s.n != population || s.s + s.i > s.n) {
            return Err(invalid("inconsistent population in path"));
        }
        Ok(Self {
            times,
            states,
            population,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CountState] {
        &self.states
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn initial(&self) -> CountState {
        self.states[0]
    }

    pub fn last(&self) -> CountState {
        *self.states.last().unwrap()
    }

    /// True when every observation has at least one infected individual.
    pub fn survives(&self) -> bool {
        self.states.iter().all(|s| s.i > 0)
    }

    /// Drops every observation after the first one with `I = 0`. Later
    /// observations carry no information about the rates.
    pub fn trim_after_extinction(&self) -> EpidemicPath {
        match self.states.iter().position(|s| s.i == 0) {
            Some(k) if k + 1 < self.len() => EpidemicPath {
                times: self.times[..=k].to_vec(),
                states: self.states[..=k].to_vec(),
                population: self.population,
            },
            _ => self.clone(),
        }
    }

    /// Same path with every time shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> EpidemicPath {
        EpidemicPath {
            times: self.times.iter().map(|t| t + offset).collect(),
            states: self.states.clone(),
            population: self.population,
        }
    }

    /// CSV with header `time,S,I,N`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,S,I,N\n");
        for (t, st) in self.times.iter().zip(&self.states) {
            let _ = writeln!(out, "{},{},{},{}", t, st.s, st.i, st.n);
        }
        out
    }

    /// Parses the format written by [`EpidemicPath::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| invalid("empty CSV"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["time", "S", "I", "N"] {
            return Err(invalid(format!("expected header time,S,I,N, got {header}")));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (row, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(invalid(format!("row {}: expected 4 fields", row + 1)));
            }
            let bad = |what: &str| invalid(format!("row {}: cannot parse {}", row + 1, what));
            times.push(f[0].parse::<f64>().map_err(|_| bad("time"))?);
            let s = f[1].parse().map_err(|_| bad("S"))?;
            let i = f[2].parse().map_err(|_| bad("I"))?;
            let n = f[3].parse().map_err(|_| bad("N"))?;
            states.push(CountState::new(s, i, n)?);
        }
        EpidemicPath::new(times, states)
    }
}

/// A nonnegative infection-rate function of time.
pub trait InfectionRate: Send + Sync {
    fn value(&self, t: f64) -> f64;

    /// An upper bound of the rate on `[a, b]`; used for thinning.
    fn upper_bound(&self, a: f64, b: f64) -> f64;
}

impl<T: InfectionRate + ?Sized> InfectionRate for &T {
    fn value(&self, t: f64) -> f64 {
        (**self).value(t)
    }

    fn upper_bound(&self, a: f64, b: f64) -> f64 {
        (**self).upper_bound(a, b)
    }
}

/// A time-invariant infection rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRate(pub f64);

impl InfectionRate for ConstantRate {
    fn value(&self, _t: f64) -> f64 {
        self.0
    }

    fn upper_bound(&self, _a: f64, _b: f64) -> f64 {
        self.0
    }
}

/// Infection rate function and constant recovery rate.
#[derive(Debug, Clone, Copy)]
pub struct RatePair<B> {
    pub beta: B,
    pub gamma: f64,
}

impl<B: InfectionRate> RatePair<B> {
    pub fn new(beta: B, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(invalid(format!("recovery rate must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { beta, gamma })
    }

    fn checked_beta(&self, t: f64) -> Result<f64> {
        let b = self.beta.value(t);
        if b.is_finite() && b >= 0.0 {
            Ok(b)
        } else {
            Err(Error::InvalidRate { time: t, value: b })
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Exact event-by-event simulation on `[0, t_end]`.
///
/// The returned path holds the initial state at `t = 0`, one record per event
/// and a closing record at `t_end`. No events occur after `I` reaches zero.
pub fn simulate_exact<B: InfectionRate>(
    rates: &RatePair<B>,
    init: CountState,
    t_end: f64,
    seed: u64,
) -> Result<EpidemicPath> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(invalid("t_end must be positive and finite"));
    }
    let init = CountState::new(init.s, init.i, init.n)?;
    let mut rng = rng::stream(seed, &[0]);
    let n = init.n as f64;
    let gamma = rates.gamma;
    let mut times = vec![0.0];
    let mut states = vec![init];
    let (mut s, mut i) = (init.s, init.i);
    let mut t = 0.0;

    while t < t_end && i > 0 {
        let window_end = (t + THINNING_WINDOW).min(t_end);
        let bound = rates.beta.upper_bound(t, window_end);
        if !bound.is_finite() || bound < 0.0 {
            return Err(Error::InvalidRate { time: t, value: bound });
        }
        let pressure = s as f64 * i as f64 / n;
        let lambda_max = bound * pressure + gamma * i as f64;
        if lambda_max <= 0.0 {
            t = window_end;
            continue;
        }
        let u: f64 = rng.random();
        let wait = -(1.0 - u).ln() / lambda_max;
        if t + wait >= window_end {
            // Memoryless: restart from the window end with a fresh bound.
            t = window_end;
            continue;
        }
        t += wait;
        let beta = rates.checked_beta(t)?;
        if beta > bound * (1.0 + 1e-12) {
            return Err(Error::InvalidRate { time: t, value: beta });
        }
        let infection = beta * pressure;
        let recovery = gamma * i as f64;
        let pick = rng.random::<f64>() * lambda_max;
        if pick < infection {
            s -= 1;
            i += 1;
        } else if pick < infection + recovery {
            i -= 1;
        } else {
            continue;
        }
        times.push(t);
        states.push(CountState { s, i, n: init.n });
    }
    if *times.last().unwrap() < t_end {
        times.push(t_end);
        states.push(CountState { s, i, n: init.n });
    }
    Ok(EpidemicPath {
        times,
        states,
        population: init.n,
    })
}

/// Event counts drawn during one tau-leap step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LeapEvents {
    pub infections: u64,
    pub removals: u64,
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => {
            let x: f64 = d.sample(rng);
            x as u64
        }
        Err(_) => 0,
    }
}

/// One tau-leap step with rates frozen at the left endpoint. Excess draws that
/// would make `S` or `I` negative are discarded.
pub(crate) fn tau_leap_step<R: Rng>(
    state: CountState,
    beta: f64,
    gamma: f64,
    dt: f64,
    rng: &mut R,
) -> (CountState, LeapEvents) {
    let n = state.n as f64;
    let inf_mean = dt * beta * state.s as f64 * state.i as f64 / n;
    let rem_mean = dt * gamma * state.i as f64;
    let infections = poisson(inf_mean, rng).min(state.s);
    let removals = poisson(rem_mean, rng).min(state.i + infections);
    let next = CountState {
        s: state.s - infections,
        i: state.i + infections - removals,
        n: state.n,
    };
    (next, LeapEvents { infections, removals })
}

/// Tau-leap simulation on `grid`; `grid[0]` is the time of `init`.
///
/// Step `r` draws from its own stream keyed by `(seed, r)`.
pub fn simulate_tau_leap<B: InfectionRate>(
    rates: &RatePair<B>,
    init: CountState,
    grid: &[f64],
    seed: u64,
) -> Result<EpidemicPath> {
    check_grid(grid)?;
    let init = CountState::new(init.s, init.i, init.n)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(init);
    let mut state = init;
    for (r, w) in grid.windows(2).enumerate() {
        let beta = rates.checked_beta(w[0])?;
        if state.i > 0 {
            let mut rng = rng::stream(seed, &[r as u64]);
            state = tau_leap_step(state, beta, rates.gamma, w[1] - w[0], &mut rng).0;
        }
        states.push(state);
    }
    Ok(EpidemicPath {
        times: grid.to_vec(),
        states,
        population: init.n,
    })
}

/// Drift vector and diffusion factor `L` of the SIR diffusion at `z`.
///
/// Negative products under the square roots are clamped to zero.
pub(crate) fn drift_and_factor(z: ProportionState, beta: f64, gamma: f64, n: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let flow = beta * z.s * z.j;
    let drift = [-flow, flow - gamma * z.j];
    let a = (flow.max(0.0) / n).sqrt();
    let b = ((gamma * z.j).max(0.0) / n).sqrt();
    (drift, [[a, 0.0], [-a, b]])
}

/// One Euler–Maruyama step driven by standard normal draws `xi`.
pub(crate) fn em_step(z: ProportionState, beta: f64, gamma: f64, n: f64, dt: f64, xi: [f64; 2]) -> ProportionState {
    let (drift, l) = drift_and_factor(z, beta, gamma, n);
    let sd = dt.sqrt();
    let db = [xi[0] * sd, xi[1] * sd];
    ProportionState {
        s: z.s + drift[0] * dt + l[0][0] * db[0] + l[0][1] * db[1],
        j: z.j + drift[1] * dt + l[1][0] * db[0] + l[1][1] * db[1],
    }
}

pub(crate) fn normal_pair<R: Rng>(rng: &mut R) -> [f64; 2] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

/// Euler–Maruyama integration of the diffusion approximation on `grid`.
///
/// Step `r` draws its Brownian increment from the stream `(seed, r)`.
pub fn simulate_euler_maruyama<B: InfectionRate>(
    rates: &RatePair<B>,
    init: ProportionState,
    grid: &[f64],
    n: u64,
    seed: u64,
) -> Result<Vec<ProportionState>> {
    check_grid(grid)?;
    if n == 0 {
        return Err(invalid("population must be at least 1"));
    }
    if !init.s.is_finite() || !init.j.is_finite() {
        return Err(invalid("initial proportions must be finite"));
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(grid.len());
    out.push(init);
    let mut z = init;
    for (r, w) in grid.windows(2).enumerate() {
        let beta = rates.checked_beta(w[0])?;
        let mut rng = rng::stream(seed, &[r as u64]);
        z = em_step(z, beta, rates.gamma, nf, w[1] - w[0], normal_pair(&mut rng));
        out.push(z);
    }
    Ok(out)
}

/// Samples a path at the requested times, taking the last recorded state at
/// or before each time.
pub fn sample_path_at(path: &EpidemicPath, times: &[f64]) -> Result<EpidemicPath> {
    check_grid(times)?;
    let (lo, hi) = (path.start(), path.end());
    let mut states = Vec::with_capacity(times.len());
    let mut k = 0;
    for &t in times {
        if t < lo || t > hi {
            return Err(invalid(format!("time {t} outside path horizon [{lo}, {hi}]")));
        }
        while k + 1 < path.len() && path.times[k + 1] <= t {
            k += 1;
        }
        states.push(path.states[k]);
    }
    Ok(EpidemicPath {
        times: times.to_vec(),
        states,
        population: path.population,
    })
}
