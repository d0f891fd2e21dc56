//! Option payoffs and Black-Scholes analytics.

use alloc::format;

use crate::autodiff::Arith;
use crate::error::{invalid, Error, Result};
use crate::math::norm_cdf;
use crate::rng;

/// Trading days per year used to turn day counts into year fractions.
pub const TRADING_DAYS_PER_YEAR: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptionKind {
    EuropeanCall,
    /// Fixed-strike call on the running maximum of all observed prices.
    LookbackCall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub strike: f64,
    pub maturity_steps: usize,
    /// Years per trading step.
    pub step_years: f64,
}

impl OptionSpec {
    pub fn new(kind: OptionKind, strike: f64, maturity_steps: usize, step_years: f64) -> Result<Self> {
        let spec = OptionSpec {
            kind,
            strike,
            maturity_steps,
            step_years,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 20-day at-the-money option on a unit price, one step per trading day.
    pub fn desk_default(kind: OptionKind) -> Self {
        OptionSpec {
            kind,
            strike: 1.0,
            maturity_steps: 20,
            step_years: 1.0 / TRADING_DAYS_PER_YEAR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) {
            return Err(invalid("option strike", format!("{} must be > 0", self.strike)));
        }
        if self.maturity_steps == 0 {
            return Err(invalid("option maturity", "maturity_steps must be >= 1"));
        }
        if !(self.step_years > 0.0) {
            return Err(invalid("option step", format!("step_years {} must be > 0", self.step_years)));
        }
        Ok(())
    }

    pub fn maturity_years(&self) -> f64 {
        self.maturity_steps as f64 * self.step_years
    }

    /// Years left after `step` trading steps.
    pub fn time_to_maturity(&self, step: usize) -> f64 {
        (self.maturity_steps.saturating_sub(step)) as f64 * self.step_years
    }

    pub fn check_path(&self, len: usize) -> Result<()> {
        if len != self.maturity_steps + 1 {
            return Err(Error::Shape {
                what: "price path",
                expected: self.maturity_steps + 1,
                got: len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BsParams {
    pub sigma: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub rate: f64,
}

impl BsParams {
    pub fn new(sigma: f64) -> Self {
        BsParams { sigma, rate: 0.0 }
    }
}

/// Terminal payoff of `spec` on a full path of `n + 1` prices.
pub fn payoff(spec: &OptionSpec, path: &[f64]) -> Result<f64> {
    payoff_on(&mut crate::autodiff::Eval, spec, path)
}

/// [`payoff`] in any arithmetic context.
pub fn payoff_on<A: Arith>(a: &mut A, spec: &OptionSpec, path: &[A::V]) -> Result<A::V> {
    spec.check_path(path.len())?;
    let underlying = match spec.kind {
        OptionKind::EuropeanCall => path[spec.maturity_steps],
        OptionKind::LookbackCall => {
            let mut m = path[0];
            for &s in &path[1..] {
                m = a.max(m, s);
            }
            m
        }
    };
    let k = a.constant(spec.strike);
    let intrinsic = a.sub(underlying, k);
    let zero = a.constant(0.0);
    Ok(a.max(intrinsic, zero))
}

fn d1_d2(spot: f64, strike: f64, bs: &BsParams, tau: f64) -> Option<(f64, f64)> {
    let vol = bs.sigma * libm::sqrt(tau);
    if !(vol > 0.0) {
        return None;
    }
    let d1 = (libm::log(spot / strike) + (bs.rate + 0.5 * bs.sigma * bs.sigma) * tau) / vol;
    Some((d1, d1 - vol))
}

/// Black-Scholes call value with `tau` years to expiry.
pub fn bs_price_european(spot: f64, spec: &OptionSpec, bs: &BsParams, tau: f64) -> f64 {
    let k = spec.strike;
    let df = libm::exp(-bs.rate * tau);
    match d1_d2(spot, k, bs, tau) {
        Some((d1, d2)) => spot * norm_cdf(d1) - k * df * norm_cdf(d2),
        None => (spot - k * df).max(0.0),
    }
}

/// Black-Scholes call delta `N(d1)`. With no remaining variance the delta is
/// the indicator of being in the money, 0.5 exactly at the strike.
pub fn bs_delta_european(spot: f64, spec: &OptionSpec, bs: &BsParams, tau: f64) -> f64 {
    match d1_d2(spot, spec.strike, bs, tau) {
        Some((d1, _)) => norm_cdf(d1),
        None => {
            let fwd_k = spec.strike * libm::exp(-bs.rate * tau);
            if spot > fwd_k {
                1.0
            } else if spot < fwd_k {
                0.0
            } else {
                0.5
            }
        }
    }
}

/// Monte Carlo settings for the lookback delta.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LookbackMc {
    pub paths: usize,
    /// Relative spot bump for the central difference.
    pub bump: f64,
    pub seed: u64,
}

impl Default for LookbackMc {
    fn default() -> Self {
        LookbackMc {
            paths: 4096,
            bump: 0.01,
            seed: 0x6c6f_6f6b,
        }
    }
}

/// Delta of the discretely monitored fixed-strike lookback call by central
/// bump-and-reprice with common random numbers. The last element of
/// `path_so_far` is the current spot; earlier elements only enter through
/// their maximum, which the bump leaves untouched.
pub fn bs_delta_lookback(
    path_so_far: &[f64],
    spec: &OptionSpec,
    bs: &BsParams,
    tau: f64,
    mc: &LookbackMc,
) -> f64 {
    let Some((&spot, history)) = path_so_far.split_last() else {
        return 0.0;
    };
    let steps = libm::round(tau / spec.step_years) as usize;
    if steps == 0 || mc.paths == 0 {
        return 0.0;
    }
    let past_max = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let up = spot * (1.0 + mc.bump);
    let down = spot * (1.0 - mc.bump);
    let dt = spec.step_years;
    let drift = (bs.rate - 0.5 * bs.sigma * bs.sigma) * dt;
    let vol = bs.sigma * libm::sqrt(dt);
    let k = spec.strike;
    let mut acc = 0.0;
    for row in 0..mc.paths {
        let mut r = rng::row_rng(mc.seed, row as u64);
        let mut x = 0.0;
        let mut fmax = 1.0f64;
        for _ in 0..steps {
            x += drift + vol * rng::normal(&mut r);
            fmax = fmax.max(libm::exp(x));
        }
        let pay_up = (past_max.max(up * fmax) - k).max(0.0);
        let pay_down = (past_max.max(down * fmax) - k).max(0.0);
        acc += pay_up - pay_down;
    }
    let df = libm::exp(-bs.rate * tau);
    df * acc / mc.paths as f64 / (up - down)
}
