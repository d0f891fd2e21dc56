//! Artifact writers. Floats are printed in shortest round-trip form, so
//! identical runs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use advhedge_core::backtest::BacktestReport;
use advhedge_core::toy_analysis::{GridSweep, ToyTrajectory};
use advhedge_core::training::HistoryRow;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(CliError::write(dir))?;
    }
    std::fs::write(path, text).map_err(CliError::write(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot encode {}: {e}", path.display())))?;
    s.push('\n');
    write_text(path, &s)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn loss_history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("epoch,hedger_loss,generator_objective,validation_cost\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.epoch,
            r.hedger_loss,
            opt(r.generator_objective),
            opt(r.validation_cost)
        );
    }
    s
}

/// Axis columns, then `value`, then `d_value_d_<axis>` when gradients exist.
pub fn sweep_csv(sweep: &GridSweep) -> String {
    let mut s = String::new();
    let names: Vec<&str> = sweep.axes.iter().map(|a| a.name.as_str()).collect();
    s.push_str(&names.join(","));
    s.push_str(",value");
    if sweep.gradients.is_some() {
        for n in &names {
            let _ = write!(s, ",d_value_d_{n}");
        }
    }
    s.push('\n');
    let inner = sweep.axes.get(1).map_or(1, |a| a.steps);
    for i in 0..sweep.axes[0].steps {
        for j in 0..inner {
            let _ = write!(s, "{}", sweep.axes[0].at(i));
            if let Some(a) = sweep.axes.get(1) {
                let _ = write!(s, ",{}", a.at(j));
            }
            let _ = write!(s, ",{}", sweep.value(i, j));
            if let Some(g) = &sweep.gradients {
                let g = g[i * inner + j];
                let _ = write!(s, ",{}", g[0]);
                if sweep.axes.len() > 1 {
                    let _ = write!(s, ",{}", g[1]);
                }
            }
            s.push('\n');
        }
    }
    s
}

pub fn trajectory_csv(t: &ToyTrajectory) -> String {
    let mut s = String::from("step,delta,mu\n");
    for p in &t.points {
        let _ = writeln!(s, "{},{},{}", p.step, p.delta, p.mu);
    }
    s
}

pub fn histogram_csv(report: &BacktestReport) -> String {
    let mut s = String::from("bin_left,bin_right");
    for r in &report.rows {
        let _ = write!(s, ",count_{}", r.strategy);
    }
    s.push('\n');
    let h = &report.histogram;
    for k in 0..h.edges.len().saturating_sub(1) {
        let _ = write!(s, "{},{}", h.edges[k], h.edges[k + 1]);
        for c in &h.counts {
            let _ = write!(s, ",{}", c[k]);
        }
        s.push('\n');
    }
    s
}

/// Aligned table: pooled utility cost plus per-window PL statistics.
pub fn backtest_text(report: &BacktestReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "option: {:?}  utility: {}  cost rate: {}  windows: {}",
        report.option, report.utility, report.cost_rate, report.window_count
    );
    let _ = writeln!(s, "cost = -u over the pooled window PLs; pl mean/std are across windows");
    let _ = writeln!(
        s,
        "{:<16} {:>14} {:>14} {:>14} {:>8}",
        "strategy", "cost", "pl_mean", "pl_std", "windows"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<16} {:>14.6} {:>14.6} {:>14.6} {:>8}",
            r.strategy, r.cost, r.pl_mean, r.pl_std, r.windows
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// The resolved configuration in TOML; `--config` on this text
    /// reproduces the run.
    pub config: String,
    /// Input files named on the command line.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Manifest {
            format_version: MANIFEST_FORMAT_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: cfg.seed,
            config_sha256: cfg.hash(),
            config: cfg.to_toml(),
            inputs: BTreeMap::new(),
        }
    }

    /// Writes `manifest.json` and `config.toml` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("manifest.json"), self)?;
        write_text(&dir.join("config.toml"), &self.config)
    }
}
