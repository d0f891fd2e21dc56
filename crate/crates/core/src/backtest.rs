//! Historical evaluation: close series, 20-day windows, hedge strategies
//! and pooled reports.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::ParamStore;
use crate::error::{invalid, Error, Result};
use crate::instruments::{self, BsParams, LookbackMc, OptionKind, OptionSpec, TRADING_DAYS_PER_YEAR};
use crate::networks::HedgerPolicy;
use crate::risk::{self, CostSpec, UtilitySpec};

/// Daily closes in strictly increasing ISO-8601 date order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    symbol: String,
    dates: Vec<String>,
    closes: Vec<f64>,
}

impl MarketSeries {
    /// Dates are compared as strings, which orders `YYYY-MM-DD` correctly.
    pub fn new(symbol: impl Into<String>, observations: Vec<(String, f64)>) -> Result<Self> {
        let mut dates = Vec::with_capacity(observations.len());
        let mut closes = Vec::with_capacity(observations.len());
        for (i, (d, c)) in observations.into_iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid("market series", alloc::format!("close {c} on {d} (row {i}) is not positive")));
            }
            if let Some(prev) = dates.last() {
                if &d == prev {
                    return Err(invalid("market series", alloc::format!("duplicate date {d}")));
                }
                if d < *prev {
                    return Err(invalid("market series", alloc::format!("date {d} follows {prev}")));
                }
            }
            dates.push(d);
            closes.push(c);
        }
        Ok(MarketSeries {
            symbol: symbol.into(),
            dates,
            closes,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestWindow {
    /// `n + 1` closes divided by the first; `prices[0] == 1.0`.
    pub prices: Vec<f64>,
    pub start_date: String,
    pub end_date: String,
    /// Annualised volatility of the previous window's log returns, if any.
    pub trailing_sigma: Option<f64>,
}

/// Non-overlapping windows of `n + 1` closes; a short tail is dropped.
pub fn slice_windows(series: &MarketSeries, n: usize) -> Result<Vec<BacktestWindow>> {
    if n == 0 {
        return Err(invalid("window length", "n must be >= 1"));
    }
    if series.len() < n + 1 {
        return Err(Error::Shape {
            what: "market series length",
            expected: n + 1,
            got: series.len(),
        });
    }
    let c = series.closes();
    let mut out = Vec::with_capacity(series.len() / (n + 1));
    let mut prev_sigma = None;
    for (k, chunk) in c.chunks_exact(n + 1).enumerate() {
        let first = chunk[0];
        let prices: Vec<f64> = chunk.iter().map(|&x| x / first).collect();
        let start = k * (n + 1);
        out.push(BacktestWindow {
            start_date: series.dates()[start].clone(),
            end_date: series.dates()[start + n].clone(),
            trailing_sigma: prev_sigma,
            prices,
        });
        prev_sigma = realized_sigma(chunk);
    }
    Ok(out)
}

/// Annualised sample standard deviation of log returns.
pub fn realized_sigma(closes: &[f64]) -> Option<f64> {
    if closes.len() < 3 {
        return None;
    }
    let r: Vec<f64> = closes.windows(2).map(|w| libm::log(w[1] / w[0])).collect();
    let (_, sd) = mean_std(&r);
    Some(sd * libm::sqrt(TRADING_DAYS_PER_YEAR))
}

/// Mean and sample standard deviation (`n - 1`; zero for one value).
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

/// A rule for choosing `δ_0 .. δ_{n-1}` along a path.
#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    Hedger {
        label: &'a str,
        policy: &'a HedgerPolicy,
        store: &'a ParamStore,
    },
    /// Black-Scholes delta at `sigma`, or at the window's trailing realised
    /// volatility when `realized` is set and one is available.
    BsDelta {
        sigma: f64,
        realized: bool,
        lookback: LookbackMc,
    },
    Zero,
}

impl Strategy<'_> {
    pub fn bs_delta(sigma: f64) -> Self {
        Strategy::BsDelta {
            sigma,
            realized: false,
            lookback: LookbackMc::default(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Strategy::Hedger { label, .. } => String::from(*label),
            Strategy::BsDelta { .. } => String::from("bs_delta"),
            Strategy::Zero => String::from("zero_hedge"),
        }
    }

    pub fn positions(&self, spec: &OptionSpec, path: &[f64], trailing_sigma: Option<f64>) -> Result<Vec<f64>> {
        spec.check_path(path.len())?;
        let n = spec.maturity_steps;
        match self {
            Strategy::Hedger { policy, store, .. } => policy.positions(store, spec, path),
            Strategy::BsDelta {
                sigma,
                realized,
                lookback,
            } => {
                let s = match (realized, trailing_sigma) {
                    (true, Some(v)) if v > 0.0 => v,
                    _ => *sigma,
                };
                let bs = BsParams::new(s);
                Ok((0..n)
                    .map(|i| {
                        let tau = spec.time_to_maturity(i);
                        match spec.kind {
                            OptionKind::EuropeanCall => instruments::bs_delta_european(path[i], spec, &bs, tau),
                            OptionKind::LookbackCall => {
                                instruments::bs_delta_lookback(&path[..=i], spec, &bs, tau, lookback)
                            }
                        }
                    })
                    .collect())
            }
            Strategy::Zero => Ok(vec![0.0; n]),
        }
    }

    /// Terminal PL of this strategy on one path.
    pub fn pl(&self, spec: &OptionSpec, cost: &CostSpec, path: &[f64], trailing_sigma: Option<f64>) -> Result<f64> {
        let deltas = self.positions(spec, path, trailing_sigma)?;
        let z = instruments::payoff(spec, path)?;
        risk::pl_terminal(z, path, &deltas, cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyResult {
    pub strategy: String,
    /// `-u` over the pooled window PLs.
    pub cost: f64,
    pub pl_mean: f64,
    pub pl_std: f64,
    pub windows: usize,
    pub pls: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    /// One count vector per strategy, in report order.
    pub counts: Vec<Vec<usize>>,
}

impl Histogram {
    pub fn build(samples: &[&[f64]], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in samples.iter().flat_map(|s| s.iter()) {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            lo = 0.0;
            hi = 0.0;
        }
        if hi <= lo {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + k as f64 * width }).collect();
        let counts = samples
            .iter()
            .map(|s| {
                let mut c = vec![0usize; bins];
                for &x in s.iter() {
                    let k = (((x - lo) / width) as usize).min(bins - 1);
                    c[k] += 1;
                }
                c
            })
            .collect();
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestReport {
    pub option: OptionKind,
    pub utility: String,
    pub cost_rate: f64,
    pub window_count: usize,
    pub rows: Vec<StrategyResult>,
    pub histogram: Histogram,
}

/// Runs every strategy over every window. No randomness is involved apart
/// from the fixed-seed lookback delta.
pub fn run_backtest(
    windows: &[BacktestWindow],
    strategies: &[Strategy<'_>],
    spec: &OptionSpec,
    utility: &UtilitySpec,
    cost: &CostSpec,
    bins: usize,
) -> Result<BacktestReport> {
    if windows.is_empty() {
        return Err(Error::EmptySample);
    }
    if strategies.is_empty() {
        return Err(invalid("backtest", "no strategies"));
    }
    utility.validate()?;
    spec.validate()?;
    let mut rows = Vec::with_capacity(strategies.len());
    for st in strategies {
        let pls = windows
            .iter()
            .map(|w| st.pl(spec, cost, &w.prices, w.trailing_sigma))
            .collect::<Result<Vec<f64>>>()?;
        let cost_value = risk::hedge_loss(&pls, utility)?;
        let (pl_mean, pl_std) = mean_std(&pls);
        rows.push(StrategyResult {
            strategy: st.label(),
            cost: cost_value,
            pl_mean,
            pl_std,
            windows: pls.len(),
            pls,
        });
    }
    let samples: Vec<&[f64]> = rows.iter().map(|r| r.pls.as_slice()).collect();
    let histogram = Histogram::build(&samples, bins);
    Ok(BacktestReport {
        option: spec.kind,
        utility: utility.label(),
        cost_rate: cost.rate,
        window_count: windows.len(),
        rows,
        histogram,
    })
}
