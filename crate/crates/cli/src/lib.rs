//! Batch front end for `epispline`: data ingestion, configuration, the
//! fitting and bootstrap pipelines and a simulation-study harness.
//!
//! Every command writes CSV/JSON files plus a `manifest.json` and a
//! `run.conf` from which the run can be repeated exactly.

pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;

use anyhow::Result;

pub use config::RunConfig;
pub use ingest::{ingest_covid_csv, IngestError, ONTARIO_POPULATION};
pub use output::Outputs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Rates,
    Fit,
    Bootstrap,
    Simstudy,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Rates => "rates",
            CommandKind::Fit => "fit",
            CommandKind::Bootstrap => "bootstrap",
            CommandKind::Simstudy => "simstudy",
        }
    }
}

/// Validates `cfg`, runs the command and writes its outputs. On failure the
/// partial outputs go to the quarantine directory and the error is returned.
pub fn execute(kind: CommandKind, cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::new();
    let result = cfg.validate().map_err(anyhow::Error::from).and_then(|()| match kind {
        CommandKind::Simulate => commands::simulate(cfg, &mut out),
        CommandKind::Rates => commands::rates(cfg, &mut out),
        CommandKind::Fit => commands::fit(cfg, &mut out),
        CommandKind::Bootstrap => commands::bootstrap(cfg, &mut out),
        CommandKind::Simstudy => commands::simstudy(cfg, &mut out),
    });
    match result {
        Ok(()) => out.commit(kind.name(), cfg),
        Err(e) => {
            if let Err(q) = out.quarantine(cfg, &e) {
                log::error!("could not write quarantine directory: {q:#}");
            }
            Err(e)
        }
    }
}
