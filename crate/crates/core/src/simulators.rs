//! Geometric Brownian and Heston path simulators.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::rng;

/// `batch × (steps + 1)` prices, row-major, every row starting at `s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    prices: Vec<f64>,
    batch: usize,
    steps: usize,
    s0: f64,
    dt: f64,
}

impl PathBatch {
    pub fn new(prices: Vec<f64>, batch: usize, steps: usize, dt: f64) -> Result<Self> {
        if prices.len() != batch * (steps + 1) || batch == 0 {
            return Err(Error::Shape {
                what: "path batch",
                expected: batch.max(1) * (steps + 1),
                got: prices.len(),
            });
        }
        let s0 = prices[0];
        for (b, row) in prices.chunks_exact(steps + 1).enumerate() {
            if row[0] != s0 {
                return Err(invalid("path batch", format!("row {b} starts at {} not {s0}", row[0])));
            }
            if let Some(j) = row.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
                return Err(invalid("path batch", format!("row {b} step {j} has price {}", row[j])));
            }
        }
        Ok(PathBatch {
            prices,
            batch,
            steps,
            s0,
            dt,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], dt: f64) -> Result<Self> {
        let steps = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        let mut prices = Vec::with_capacity(rows.len() * (steps + 1));
        for r in rows {
            if r.len() != steps + 1 {
                return Err(Error::Shape {
                    what: "path row",
                    expected: steps + 1,
                    got: r.len(),
                });
            }
            prices.extend_from_slice(r);
        }
        Self::new(prices, rows.len(), steps, dt)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn row(&self, b: usize) -> &[f64] {
        let w = self.steps + 1;
        &self.prices[b * w..(b + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.prices.chunks_exact(self.steps + 1)
    }

    pub fn terminal(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(|r| r[r.len() - 1])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prices
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub sigma_vol: f64,
    pub v0: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        HestonParams {
            kappa: 1.0,
            theta: 0.04,
            rho: -0.7,
            sigma_vol: 0.3,
            v0: 0.04,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa >= 0.0
            && self.theta >= 0.0
            && self.sigma_vol >= 0.0
            && self.v0 >= 0.0
            && (-1.0..=1.0).contains(&self.rho);
        if ok {
            Ok(())
        } else {
            Err(invalid("Heston parameters", format!("{self:?}")))
        }
    }
}

fn check_common(s0: f64, steps: usize, dt: f64, batch: usize) -> Result<()> {
    if !(s0 > 0.0) || !(dt > 0.0) || steps == 0 || batch == 0 {
        return Err(invalid(
            "simulation grid",
            format!("s0={s0} dt={dt} steps={steps} batch={batch}"),
        ));
    }
    Ok(())
}

/// Zero-drift geometric Brownian motion,
/// `S_{i+1} = S_i exp(-σ²dt/2 + σ√dt ξ)`. Row `b` draws from stream
/// `(seed, b)`, one normal per step.
pub fn simulate_gbm(s0: f64, sigma: f64, steps: usize, dt: f64, batch: usize, seed: u64) -> Result<PathBatch> {
    check_common(s0, steps, dt, batch)?;
    if !(sigma >= 0.0) {
        return Err(invalid("GBM sigma", format!("{sigma} must be >= 0")));
    }
    let drift = -0.5 * sigma * sigma * dt;
    let vol = sigma * libm::sqrt(dt);
    let mut prices = Vec::with_capacity(batch * (steps + 1));
    for b in 0..batch {
        let mut r = rng::row_rng(seed, b as u64);
        let mut s = s0;
        prices.push(s);
        for _ in 0..steps {
            let xi = rng::normal(&mut r);
            s *= libm::exp(drift + vol * xi);
            prices.push(s);
        }
    }
    PathBatch::new(prices, batch, steps, dt)
}

/// Heston paths by full-truncation Euler on the variance and a log-Euler
/// price step, returning the truncated variance path alongside.
pub fn simulate_heston_with_variance(
    s0: f64,
    params: &HestonParams,
    steps: usize,
    dt: f64,
    batch: usize,
    seed: u64,
) -> Result<(PathBatch, Vec<f64>)> {
    check_common(s0, steps, dt, batch)?;
    params.validate()?;
    let rho_perp = libm::sqrt(1.0 - params.rho * params.rho);
    let mut prices = Vec::with_capacity(batch * (steps + 1));
    let mut variances = Vec::with_capacity(batch * (steps + 1));
    for b in 0..batch {
        let mut r = rng::row_rng(seed, b as u64);
        let mut log_s = libm::log(s0);
        let mut v = params.v0;
        prices.push(s0);
        variances.push(v.max(0.0));
        for _ in 0..steps {
            let z1 = rng::normal(&mut r);
            let w = rng::normal(&mut r);
            let z2 = params.rho * z1 + rho_perp * w;
            let vp = v.max(0.0);
            let sd = libm::sqrt(vp * dt);
            log_s += -0.5 * vp * dt + sd * z1;
            v = v + params.kappa * (params.theta - vp) * dt + params.sigma_vol * sd * z2;
            prices.push(libm::exp(log_s));
            variances.push(v.max(0.0));
        }
    }
    Ok((PathBatch::new(prices, batch, steps, dt)?, variances))
}

pub fn simulate_heston(
    s0: f64,
    params: &HestonParams,
    steps: usize,
    dt: f64,
    batch: usize,
    seed: u64,
) -> Result<PathBatch> {
    simulate_heston_with_variance(s0, params, steps, dt, batch, seed).map(|(p, _)| p)
}

/// Anything that can hand out batches of price paths.
pub trait PathSource {
    fn sample(&self, batch: usize, seed: u64) -> Result<PathBatch>;

    /// True when every call returns the same batch (historical data).
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// A fixed classical simulator on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulator {
    pub model: Model,
    pub s0: f64,
    pub steps: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "model", rename_all = "snake_case"))]
pub enum Model {
    Gbm { sigma: f64 },
    Heston(HestonParams),
}

impl PathSource for Simulator {
    fn sample(&self, batch: usize, seed: u64) -> Result<PathBatch> {
        match &self.model {
            Model::Gbm { sigma } => simulate_gbm(self.s0, *sigma, self.steps, self.dt, batch, seed),
            Model::Heston(p) => simulate_heston(self.s0, p, self.steps, self.dt, batch, seed),
        }
    }
}

/// Historical windows replayed as one deterministic batch; the requested
/// batch size and seed are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPaths(pub PathBatch);

impl PathSource for FixedPaths {
    fn sample(&self, _batch: usize, _seed: u64) -> Result<PathBatch> {
        Ok(self.0.clone())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
