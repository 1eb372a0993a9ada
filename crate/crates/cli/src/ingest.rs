//! Reported-case CSV ingestion.
//!
//! Input columns are `date,cumulative_cases,active_cases`. With population
//! `N`, susceptibles are `N − cumulative` and infected are the active cases.
//! Times are whole days after the first row.

use std::path::Path;

use chrono::NaiveDate;
use epispline::{CountState, EpidemicPath};

/// Population of Ontario in 2021.
pub const ONTARIO_POPULATION: u64 = 14_223_942;

const COLUMNS: [&str; 3] = ["date", "cumulative_cases", "active_cases"];

fn lines(rows: &[u64]) -> String {
    rows.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

/// Row numbers are file line numbers (the header is line 1).
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {0}")]
    Csv(#[from] csv::Error),
    #[error("expected columns date,cumulative_cases,active_cases, found {0}")]
    Header(String),
    #[error("no data rows")]
    Empty,
    #[error("missing or unparsable values on lines {}", lines(.0))]
    Missing(Vec<u64>),
    #[error("dates not strictly increasing on lines {}", lines(.0))]
    Dates(Vec<u64>),
    #[error("cumulative cases decrease on lines {}", lines(.0))]
    NotMonotone(Vec<u64>),
    #[error("counts outside [0, {population}] or active above cumulative on lines {}", lines(.rows))]
    Bounds { population: u64, rows: Vec<u64> },
    #[error(transparent)]
    Path(#[from] epispline::Error),
}

struct Row {
    line: u64,
    date: NaiveDate,
    cumulative: u64,
    active: u64,
}

fn read_rows(path: &Path) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if header != COLUMNS {
        return Err(IngestError::Header(header.join(",")));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| record.get(k).filter(|v| !v.is_empty());
        let date = field(0).and_then(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").ok());
        let cumulative = field(1).and_then(|v| v.parse::<u64>().ok());
        let active = field(2).and_then(|v| v.parse::<u64>().ok());
        match (date, cumulative, active) {
            (Some(date), Some(cumulative), Some(active)) if record.len() == 3 => rows.push(Row {
                line,
                date,
                cumulative,
                active,
            }),
            _ => missing.push(line),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::Missing(missing));
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(rows)
}

/// Reads a reported-case CSV into an observed path.
///
/// The removed count `cumulative − active` is not required to be monotone:
/// reporting corrections make it dip, and the likelihood decides what such a
/// transition is worth.
pub fn ingest_covid_csv(path: &Path, population: u64) -> Result<EpidemicPath, IngestError> {
    let rows = read_rows(path)?;
    let later = |bad: &dyn Fn(&Row, &Row) -> bool| -> Vec<u64> {
        rows.windows(2).filter(|w| bad(&w[0], &w[1])).map(|w| w[1].line).collect()
    };
    let dates = later(&|a, b| b.date <= a.date);
    if !dates.is_empty() {
        return Err(IngestError::Dates(dates));
    }
    let falling = later(&|a, b| b.cumulative < a.cumulative);
    if !falling.is_empty() {
        return Err(IngestError::NotMonotone(falling));
    }
    let out_of_range: Vec<u64> = rows
        .iter()
        .filter(|r| r.cumulative > population || r.active > r.cumulative)
        .map(|r| r.line)
        .collect();
    if !out_of_range.is_empty() {
        return Err(IngestError::Bounds {
            population,
            rows: out_of_range,
        });
    }
    let first = rows[0].date;
    let mut times = Vec::with_capacity(rows.len());
    let mut states = Vec::with_capacity(rows.len());
    for r in &rows {
        times.push((r.date - first).num_days() as f64);
        states.push(CountState::new(population - r.cumulative, r.active, population)?);
    }
    Ok(EpidemicPath::from_raw(times, states)?)
}
