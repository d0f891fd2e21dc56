//! `date,close` CSV ingestion and export.

use std::path::Path;

use advhedge_core::backtest::MarketSeries;
use advhedge_core::instruments::TRADING_DAYS_PER_YEAR;
use advhedge_core::simulators::simulate_gbm;
use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::error::CliError;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Reads a daily close series. `min_rows` is the smallest acceptable number
/// of data rows (one window needs `n + 1`).
pub fn load_series(path: &Path, min_rows: usize) -> Result<MarketSeries, CliError> {
    let bad = |line: u64, msg: String| CliError::Config(format!("{}:{line}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["date", "close"] {
        return Err(bad(1, format!("expected header `date,close`, found `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let date_s = &rec[0];
        let date = NaiveDate::parse_from_str(date_s, DATE_FORMAT)
            .map_err(|e| bad(line, format!("date `{date_s}` is not ISO-8601 ({e})")))?;
        let close: f64 = rec[1]
            .parse()
            .map_err(|_| bad(line, format!("close `{}` is not a number", &rec[1])))?;
        if !(close > 0.0 && close.is_finite()) {
            return Err(bad(line, format!("close {close} must be positive")));
        }
        if let Some(p) = prev {
            if date == p {
                return Err(bad(line, format!("duplicate date {date_s}")));
            }
            if date < p {
                return Err(bad(line, format!("date {date_s} is earlier than the previous row")));
            }
        }
        prev = Some(date);
        rows.push((date.format(DATE_FORMAT).to_string(), close));
    }
    if rows.len() < min_rows {
        return Err(CliError::Config(format!(
            "{}: {} data rows, need at least {min_rows}",
            path.display(),
            rows.len()
        )));
    }
    let symbol = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    MarketSeries::new(symbol, rows).map_err(CliError::config(path.display()))
}

pub fn write_series(path: &Path, series: &MarketSeries) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    w.write_record(["date", "close"]).map_err(io)?;
    for (d, c) in series.dates().iter().zip(series.closes()) {
        w.write_record([d.as_str(), &c.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// A GBM close series on consecutive business days starting at `start`.
pub fn synthetic_gbm_series(closes: usize, s0: f64, sigma: f64, seed: u64, start: NaiveDate) -> Result<MarketSeries, CliError> {
    if closes < 2 {
        return Err(CliError::Config("synthetic series needs at least 2 closes".into()));
    }
    let paths = simulate_gbm(s0, sigma, closes - 1, 1.0 / TRADING_DAYS_PER_YEAR, 1, seed)
        .map_err(CliError::config("synthetic series"))?;
    let mut day = start;
    let mut rows = Vec::with_capacity(closes);
    for &c in paths.row(0) {
        while matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            day = day + Days::new(1);
        }
        rows.push((day.format(DATE_FORMAT).to_string(), c));
        day = day + Days::new(1);
    }
    MarketSeries::new("synthetic", rows).map_err(CliError::runtime("synthetic series"))
}
