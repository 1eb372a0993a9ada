//! Command pipelines. Each command adds its files to an [`Outputs`]
//! collector; nothing touches the output directory until the run succeeds.

use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, bail, Context, Result};
use epispline::bootstrap::{run_bootstrap, smoothed_band, BootstrapOptions, ConfidenceBand, IntervalMethod, Smoothing};
use epispline::knots::{forward_bic_select, knot_curve, moving_average_rates, Selection, SelectionOptions};
use epispline::metrics::{imse, r0_curve, scenario, TruthFunction};
use epispline::rng::derive_seed;
use epispline::sir::{sample_path_at, simulate_exact, simulate_tau_leap, RatePair};
use epispline::{CountState, EpidemicPath, Family, LikelihoodConfig, ParameterVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SimulatorKind};
use crate::ingest::ingest_covid_csv;
use crate::output::Outputs;

const DEFAULT_POPULATION: u64 = 10_000;

/// Reads `data`: either `time,S,I,N` or reported cases (`date,...`).
pub fn load_data(cfg: &RunConfig, out: &mut Outputs) -> Result<EpidemicPath> {
    let path = cfg.data.as_ref().context("no data file given (use --data or the data key)")?;
    out.record_input(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header = text.lines().next().unwrap_or("").trim().to_ascii_lowercase();
    if header.starts_with("date") {
        let n = cfg
            .population
            .context("reported-case data needs a population (use --population)")?;
        Ok(ingest_covid_csv(path, n)?)
    } else {
        Ok(EpidemicPath::from_csv(&text)?)
    }
}

fn truth(cfg: &RunConfig) -> Result<TruthFunction> {
    scenario(cfg.scenario).ok_or_else(|| anyhow!("unknown scenario {} (expected 1 to 5)", cfg.scenario))
}

fn grid(cfg: &RunConfig) -> Vec<f64> {
    (0..=cfg.horizon.floor() as usize).map(|k| k as f64).collect()
}

/// One data set from the configured scenario, observed daily.
pub fn simulate_data(cfg: &RunConfig, truth: &TruthFunction, seed: u64) -> Result<EpidemicPath> {
    let n = cfg.population.unwrap_or(DEFAULT_POPULATION);
    let i0 = ((n as f64 * cfg.initial_infected).round() as u64).clamp(1, n);
    let init = CountState::new(n - i0, i0, n)?;
    let rates = RatePair::new(truth.clone(), cfg.gamma)?;
    let grid = grid(cfg);
    let end = *grid.last().expect("grid has at least two points");
    Ok(match cfg.simulator {
        SimulatorKind::Exact => sample_path_at(&simulate_exact(&rates, init, end, seed)?, &grid)?,
        SimulatorKind::TauLeap => simulate_tau_leap(&rates, init, &grid, seed)?,
    })
}

fn likelihood(cfg: &RunConfig, family: Family) -> Result<LikelihoodConfig> {
    Ok(LikelihoodConfig::new(family, cfg.steps, cfg.mc_paths, cfg.seed)?)
}

fn select(cfg: &RunConfig, path: &EpidemicPath, degree: usize, family: Family) -> Result<Selection> {
    let options = SelectionOptions {
        window: cfg.window,
        max_knots: cfg.max_knots,
        ..SelectionOptions::default()
    };
    Ok(forward_bic_select(path, degree, &likelihood(cfg, family)?, &options)?)
}

fn beta_csv(theta: &ParameterVector, times: &[f64]) -> Result<String> {
    let r0 = r0_curve(theta, times)?;
    let mut out = String::from("time,beta,r0\n");
    for (t, r) in times.iter().zip(r0) {
        writeln!(out, "{},{},{}", t, theta.beta(*t)?, r)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitSummary {
    family: Family,
    steps: usize,
    degree: usize,
    num_knots: usize,
    interior_knots: Vec<f64>,
    gamma: f64,
    loglik: f64,
    bic: f64,
    converged: bool,
    evaluations: usize,
}

fn add_fit(cfg: &RunConfig, path: &EpidemicPath, out: &mut Outputs) -> Result<Selection> {
    let sel = select(cfg, path, cfg.degree, cfg.family)?;
    let theta = &sel.fit.theta_hat;
    out.add("bic_trace.csv", sel.trace_csv());
    out.add_json("model.json", theta.spline())?;
    out.add(
        "beta.csv",
        beta_csv(theta, path.times())?,
    );
    out.add_json(
        "fit.json",
        &FitSummary {
            family: cfg.family,
            steps: cfg.steps,
            degree: cfg.degree,
            num_knots: sel.num_knots,
            interior_knots: theta.knots().interior().to_vec(),
            gamma: theta.gamma(),
            loglik: sel.fit.loglik,
            bic: sel.fit.bic,
            converged: sel.fit.converged,
            evaluations: sel.fit.evaluations,
        },
    )?;
    if !sel.fit.converged {
        log::warn!("optimizer stopped on its evaluation budget; see fit.json");
    }
    Ok(sel)
}

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let truth = truth(cfg)?;
    let path = simulate_data(cfg, &truth, cfg.seed)?;
    out.add("path.csv", path.to_csv());
    let mut t = String::from("time,beta\n");
    for (time, b) in path.times().iter().zip(truth.on_grid(path.times())) {
        writeln!(t, "{time},{b}")?;
    }
    out.add("truth.csv", t);
    Ok(())
}

pub fn rates(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let path = load_data(cfg, out)?;
    let series = moving_average_rates(&path, cfg.window)?;
    out.add("rates.csv", series.to_csv());
    match knot_curve(&series, cfg.degree) {
        Ok(curve) => out.add("feature.csv", curve.to_csv()),
        Err(e) => log::warn!("no feature curve for degree {}: {e}", cfg.degree),
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let path = load_data(cfg, out)?;
    add_fit(cfg, &path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct BootstrapSummary {
    requested: usize,
    kept: usize,
    attempts: usize,
    discarded: usize,
    failed_fits: usize,
    shortfall: bool,
}

pub fn bootstrap(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    if cfg.bootstrap < 2 {
        bail!("bootstrap needs at least two replicates");
    }
    let path = load_data(cfg, out)?;
    let sel = add_fit(cfg, &path, out)?;
    let options = BootstrapOptions {
        simulator: cfg.bootstrap_simulator_or(SimulatorKind::TauLeap),
        ..BootstrapOptions::new(cfg.bootstrap, cfg.seed)
    };
    let ens = run_bootstrap(&sel.fit.theta_hat, &path, &likelihood(cfg, cfg.family)?, &options)?;
    out.add("ensemble.csv", ens.to_csv());
    out.add_json(
        "bootstrap.json",
        &BootstrapSummary {
            requested: ens.requested,
            kept: ens.len(),
            attempts: ens.attempts,
            discarded: ens.discarded,
            failed_fits: ens.failed_fits,
            shortfall: ens.shortfall,
        },
    )?;
    let band = smoothed_band(&ens, cfg.interval, cfg.level(), cfg.bias_corrected, cfg.smoothing)?;
    out.add("band.csv", band.to_csv());
    out.add("band.json", band.metadata_json() + "\n");
    Ok(())
}

/// Band constructions scored by the simulation study.
pub fn band_variants() -> Vec<(IntervalMethod, bool, Smoothing)> {
    let mut v = Vec::new();
    for m in [IntervalMethod::Pivotal, IntervalMethod::Normal, IntervalMethod::Percentile] {
        for corrected in [false, true] {
            for s in [Smoothing::None, Smoothing::Weighted, Smoothing::Sample, Smoothing::Minmax] {
                v.push((m, corrected, s));
            }
        }
    }
    v
}

struct ComboOutcome {
    num_knots: usize,
    imse: f64,
    converged: bool,
    curve: Vec<f64>,
    /// Per band variant, whether each timestamp is covered.
    covered: Option<Vec<Vec<bool>>>,
    bootstrap_error: Option<String>,
}

struct Replicate {
    times: Vec<f64>,
    combos: Vec<Result<ComboOutcome, String>>,
}

fn clean(msg: impl ToString) -> String {
    msg.to_string().replace([',', '\n', '\r'], ";")
}

fn run_combo(
    cfg: &RunConfig,
    truth: &TruthFunction,
    path: &EpidemicPath,
    degree: usize,
    family: Family,
    boot_seed: u64,
) -> Result<ComboOutcome> {
    let sel = select(cfg, path, degree, family)?;
    let theta = &sel.fit.theta_hat;
    let times = path.times();
    let curve = theta.knots().rows(times)?.evaluate(theta.spline().coefficients());
    let mut outcome = ComboOutcome {
        num_knots: sel.num_knots,
        imse: imse(&curve, truth, times)?,
        converged: sel.fit.converged,
        curve,
        covered: None,
        bootstrap_error: None,
    };
    if cfg.bootstrap >= 2 {
        let options = BootstrapOptions {
            simulator: cfg.bootstrap_simulator_or(SimulatorKind::Exact),
            ..BootstrapOptions::new(cfg.bootstrap, boot_seed)
        };
        let scored = run_bootstrap(theta, path, &likelihood(cfg, family)?, &options).and_then(|ens| {
            band_variants()
                .into_iter()
                .map(|(m, c, s)| smoothed_band(&ens, m, cfg.level(), c, s).map(|b| covered(&b, truth)))
                .collect::<epispline::Result<Vec<_>>>()
        });
        match scored {
            Ok(c) => outcome.covered = Some(c),
            Err(e) => outcome.bootstrap_error = Some(clean(e)),
        }
    }
    Ok(outcome)
}

fn covered(band: &ConfidenceBand, truth: &TruthFunction) -> Vec<bool> {
    (0..band.len()).map(|k| band.contains(k, truth.evaluate(band.times[k]))).collect()
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

#[derive(Serialize)]
struct ImseSummary {
    degree: usize,
    family: Family,
    fitted: usize,
    failed_fits: usize,
    failed_bootstraps: usize,
    median_imse: Option<f64>,
}

#[derive(Serialize)]
struct CoverageSummary {
    degree: usize,
    family: Family,
    method: IntervalMethod,
    bias_corrected: bool,
    smoothing: Smoothing,
    /// Mean pointwise coverage after the first tenth of the horizon.
    mean_coverage: Option<f64>,
}

#[derive(Serialize)]
struct StudySummary {
    scenario: u8,
    replicates: usize,
    failed_simulations: usize,
    level: f64,
    fits: Vec<ImseSummary>,
    coverage: Vec<CoverageSummary>,
}

/// Simulate, fit every (degree, family) pair, score IMSE and bootstrap
/// coverage. Stage failures are recorded per replicate; the run continues.
pub fn simstudy(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let truth = truth(cfg)?;
    let grid = grid(cfg);
    let combos: Vec<(usize, Family)> = cfg
        .degrees
        .iter()
        .flat_map(|&d| cfg.families.iter().map(move |&f| (d, f)))
        .collect();

    let results: Vec<Result<Replicate, String>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let path = simulate_data(cfg, &truth, derive_seed(cfg.seed, &[r as u64, 0]))
                .map_err(clean)?
                .trim_after_extinction();
            if path.len() < cfg.window + 2 {
                return Err("epidemic died out before enough observations".into());
            }
            let combos = combos
                .iter()
                .enumerate()
                .map(|(c, &(d, f))| {
                    let seed = derive_seed(cfg.seed, &[r as u64, 1, c as u64]);
                    run_combo(cfg, &truth, &path, d, f, seed).map_err(clean)
                })
                .collect();
            Ok(Replicate {
                times: path.times().to_vec(),
                combos,
            })
        })
        .collect();

    let variants = band_variants();
    let mut imse_csv = String::from("replicate,degree,family,num_knots,imse,converged,status\n");
    let mut est_csv = String::from("replicate,degree,family,time,beta\n");
    let mut hits = vec![vec![vec![0usize; grid.len()]; variants.len()]; combos.len()];
    let mut totals = vec![vec![0usize; grid.len()]; combos.len()];
    let mut imses = vec![Vec::new(); combos.len()];
    let mut failed_fits = vec![0; combos.len()];
    let mut failed_boot = vec![0; combos.len()];
    let mut failed_sims = 0;
    for (r, rep) in results.iter().enumerate() {
        let rep = match rep {
            Ok(rep) => rep,
            Err(e) => {
                failed_sims += 1;
                for (d, f) in &combos {
                    writeln!(imse_csv, "{r},{d},{f},,,,simulation failed: {e}")?;
                }
                continue;
            }
        };
        for (c, (&(d, f), outcome)) in combos.iter().zip(&rep.combos).enumerate() {
            let o = match outcome {
                Ok(o) => o,
                Err(e) => {
                    failed_fits[c] += 1;
                    writeln!(imse_csv, "{r},{d},{f},,,,fit failed: {e}")?;
                    continue;
                }
            };
            imses[c].push(o.imse);
            let status = match &o.bootstrap_error {
                Some(e) => {
                    failed_boot[c] += 1;
                    format!("bootstrap failed: {e}")
                }
                None => "ok".into(),
            };
            writeln!(imse_csv, "{r},{d},{f},{},{},{},{status}", o.num_knots, o.imse, o.converged)?;
            for (t, b) in rep.times.iter().zip(&o.curve) {
                writeln!(est_csv, "{r},{d},{f},{t},{b}")?;
            }
            if let Some(cov) = &o.covered {
                for k in 0..rep.times.len() {
                    totals[c][k] += 1;
                    for (v, flags) in cov.iter().enumerate() {
                        hits[c][v][k] += usize::from(flags[k]);
                    }
                }
            }
        }
    }

    let cutoff = grid[0] + 0.1 * (grid[grid.len() - 1] - grid[0]);
    let mut cov_csv = String::from("degree,family,method,bias_corrected,smoothing,time,covered,total,coverage\n");
    let mut coverage = Vec::new();
    let mut fits = Vec::new();
    for (c, &(d, f)) in combos.iter().enumerate() {
        fits.push(ImseSummary {
            degree: d,
            family: f,
            fitted: imses[c].len(),
            failed_fits: failed_fits[c],
            failed_bootstraps: failed_boot[c],
            median_imse: median(&mut imses[c]),
        });
        if cfg.bootstrap < 2 {
            continue;
        }
        for (v, &(m, corrected, s)) in variants.iter().enumerate() {
            let mut late = Vec::new();
            for (k, t) in grid.iter().enumerate() {
                let (h, n) = (hits[c][v][k], totals[c][k]);
                if n == 0 {
                    continue;
                }
                let rate = h as f64 / n as f64;
                writeln!(cov_csv, "{d},{f},{m},{corrected},{},{t},{h},{n},{rate}", s.as_str())?;
                if *t >= cutoff {
                    late.push(rate);
                }
            }
            coverage.push(CoverageSummary {
                degree: d,
                family: f,
                method: m,
                bias_corrected: corrected,
                smoothing: s,
                mean_coverage: (!late.is_empty()).then(|| late.iter().sum::<f64>() / late.len() as f64),
            });
        }
    }

    let mut truth_csv = String::from("time,beta\n");
    for t in &grid {
        writeln!(truth_csv, "{t},{}", truth.evaluate(*t))?;
    }
    out.add("truth.csv", truth_csv);
    out.add("imse.csv", imse_csv);
    out.add("estimates.csv", est_csv);
    if cfg.bootstrap >= 2 {
        out.add("coverage.csv", cov_csv);
    }
    out.add_json(
        "summary.json",
        &StudySummary {
            scenario: cfg.scenario,
            replicates: cfg.replicates,
            failed_simulations: failed_sims,
            level: cfg.level(),
            fits,
            coverage,
        },
    )?;
    if failed_sims > 0 || failed_fits.iter().any(|&n| n > 0) {
        log::warn!(
            "{failed_sims} simulations and {} fits failed; see imse.csv",
            failed_fits.iter().sum::<usize>()
        );
    }
    Ok(())
}
