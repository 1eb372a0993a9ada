//! Run configuration and the flat `key = value` config file.
//!
//! Values are applied in order defaults, file, flags; every source goes
//! through [`RunConfig::set`], so a key means the same thing everywhere.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use epispline::bootstrap::{BootstrapSimulator, IntervalMethod, Smoothing};
use epispline::Family;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': cannot use '{value}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// How simulated data (and optionally bootstrap data) are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulatorKind {
    Exact,
    TauLeap,
}

impl SimulatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimulatorKind::Exact => "exact",
            SimulatorKind::TauLeap => "tau-leap",
        }
    }
}

impl FromStr for SimulatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" | "gillespie" => Ok(SimulatorKind::Exact),
            "tau-leap" | "tauleap" | "tau_leap" => Ok(SimulatorKind::TauLeap),
            other => Err(format!("expected 'exact' or 'tau-leap', got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Observed data: `time,S,I,N` or `date,cumulative_cases,active_cases`.
    pub data: Option<PathBuf>,
    pub population: Option<u64>,
    pub degree: usize,
    pub window: usize,
    pub family: Family,
    pub steps: usize,
    pub mc_paths: usize,
    pub max_knots: usize,
    pub bootstrap: usize,
    pub alpha: f64,
    pub interval: IntervalMethod,
    pub bias_corrected: bool,
    pub smoothing: Smoothing,
    /// `None` lets each command pick: tau-leap for `bootstrap`, exact for `simstudy`.
    pub bootstrap_simulator: Option<SimulatorKind>,
    pub substeps: usize,
    pub seed: u64,
    pub scenario: u8,
    pub gamma: f64,
    pub initial_infected: f64,
    pub horizon: f64,
    pub simulator: SimulatorKind,
    pub replicates: usize,
    pub degrees: Vec<usize>,
    pub families: Vec<Family>,
    pub output: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            population: None,
            degree: 0,
            window: 2,
            family: Family::TauLeap,
            steps: 1,
            mc_paths: 100,
            max_knots: 15,
            bootstrap: 200,
            alpha: 0.05,
            interval: IntervalMethod::Percentile,
            bias_corrected: true,
            smoothing: Smoothing::Minmax,
            bootstrap_simulator: None,
            substeps: 1,
            seed: 0,
            scenario: 1,
            gamma: 0.1,
            initial_infected: 0.01,
            horizon: 70.0,
            simulator: SimulatorKind::Exact,
            replicates: 20,
            degrees: vec![0, 3],
            families: vec![Family::TauLeap, Family::Diffusion],
            output: PathBuf::from("out"),
            workers: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse(key, v))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one key. Hyphens and underscores in keys are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = key.trim().replace('-', "_");
        let v = value.trim();
        match k.as_str() {
            "data" => self.data = (!v.is_empty()).then(|| PathBuf::from(v)),
            "population" => self.population = if v.is_empty() { None } else { Some(parse(&k, v)?) },
            "degree" => self.degree = parse(&k, v)?,
            "window" => self.window = parse(&k, v)?,
            "family" => self.family = parse(&k, v)?,
            "steps" => self.steps = parse(&k, v)?,
            "mc_paths" => self.mc_paths = parse(&k, v)?,
            "max_knots" => self.max_knots = parse(&k, v)?,
            "bootstrap" => self.bootstrap = parse(&k, v)?,
            "alpha" => self.alpha = parse(&k, v)?,
            "interval" => self.interval = parse(&k, v)?,
            "bias_corrected" => self.bias_corrected = parse(&k, v)?,
            "smoothing" => self.smoothing = parse(&k, v)?,
            "bootstrap_simulator" => {
                self.bootstrap_simulator = if v.is_empty() || v == "auto" { None } else { Some(parse(&k, v)?) }
            }
            "substeps" => self.substeps = parse(&k, v)?,
            "seed" => self.seed = parse(&k, v)?,
            "scenario" => self.scenario = parse(&k, v)?,
            "gamma" => self.gamma = parse(&k, v)?,
            "initial_infected" => self.initial_infected = parse(&k, v)?,
            "horizon" => self.horizon = parse(&k, v)?,
            "simulator" => self.simulator = parse(&k, v)?,
            "replicates" => self.replicates = parse(&k, v)?,
            "degrees" => self.degrees = parse_list(&k, v)?,
            "families" => self.families = parse_list(&k, v)?,
            "output" => self.output = PathBuf::from(v),
            "workers" => self.workers = Some(parse(&k, v)?),
            _ => return Err(ConfigError::UnknownKey(key.trim().into())),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            self.set(key, value).map_err(|e| ConfigError::Syntax {
                line: n + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        let counts = [
            ("window", self.window),
            ("steps", self.steps),
            ("mc_paths", self.mc_paths),
            ("substeps", self.substeps),
            ("replicates", self.replicates),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return bad(&format!("{name} must be positive"));
        }
        if self.population == Some(0) {
            return bad("population must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be nonnegative");
        }
        if !(self.initial_infected > 0.0 && self.initial_infected <= 1.0) {
            return bad("initial_infected must lie in (0, 1]");
        }
        if !(self.horizon >= 1.0 && self.horizon.is_finite()) {
            return bad("horizon must be at least one day");
        }
        if self.degrees.is_empty() || self.families.is_empty() {
            return bad("degrees and families must not be empty");
        }
        Ok(())
    }

    pub fn level(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn bootstrap_simulator_or(&self, default: SimulatorKind) -> BootstrapSimulator {
        match self.bootstrap_simulator.unwrap_or(default) {
            SimulatorKind::Exact => BootstrapSimulator::Exact,
            SimulatorKind::TauLeap => BootstrapSimulator::TauLeap { substeps: self.substeps },
        }
    }

    /// Every key that affects results, in a fixed order. `output` and
    /// `workers` are left out: they change neither numbers nor file contents.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            ("data", opt(self.data.as_ref().map(|p| p.display().to_string()))),
            ("population", opt(self.population.map(|p| p.to_string()))),
            ("degree", self.degree.to_string()),
            ("window", self.window.to_string()),
            ("family", self.family.to_string()),
            ("steps", self.steps.to_string()),
            ("mc_paths", self.mc_paths.to_string()),
            ("max_knots", self.max_knots.to_string()),
            ("bootstrap", self.bootstrap.to_string()),
            ("alpha", self.alpha.to_string()),
            ("interval", self.interval.to_string()),
            ("bias_corrected", self.bias_corrected.to_string()),
            ("smoothing", self.smoothing.as_str().into()),
            ("bootstrap_simulator", opt(self.bootstrap_simulator.map(|s| s.as_str().into()))),
            ("substeps", self.substeps.to_string()),
            ("seed", self.seed.to_string()),
            ("scenario", self.scenario.to_string()),
            ("gamma", self.gamma.to_string()),
            ("initial_infected", self.initial_infected.to_string()),
            ("horizon", self.horizon.to_string()),
            ("simulator", self.simulator.as_str().into()),
            ("replicates", self.replicates.to_string()),
            ("degrees", join(&self.degrees)),
            ("families", join(&self.families)),
        ]
    }

    /// Config file text that reproduces this run.
    pub fn to_conf(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("degree = 3\nfamilies = diffusion # only one\n\nbootstrap-simulator = exact\nalpha=0.1")
            .unwrap();
        assert_eq!(cfg.degree, 3);
        assert_eq!(cfg.families, vec![Family::Diffusion]);
        assert_eq!(cfg.bootstrap_simulator, Some(SimulatorKind::Exact));
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_conf()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("seed = 1\nwindow = two").unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        assert!(cfg.apply_text("colour = red").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        cfg.validate().unwrap();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.05;
        cfg.window = 0;
        assert!(cfg.validate().is_err());
    }
}
