//! One-step Gaussian market used to study the stability of the hedger /
//! generator game.
//!
//! `S_1 - S_0 ~ N(μ, σ²)`, strike `K = S_0`, and the seller's PL for a hedge
//! `δ` is `-max(S_1 - K, 0) + δ (S_1 - S_0) - c |δ| S_0`. Expectations are
//! Monte Carlo over a fixed set of standard normals (common random numbers),
//! with `S_1 = S_0 + μ + σ ξ` reparameterised so gradients in `μ` and `σ`
//! flow through the tape.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::{Adam, Arith, Eval, ParamStore, Tape, Var};
use crate::error::{invalid, Result};
use crate::risk::{self, UtilitySpec};
use crate::rng::{self, derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyMarket {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub cost: f64,
}

impl Default for ToyMarket {
    fn default() -> Self {
        ToyMarket {
            s0: 1.0,
            mu: 0.0,
            sigma: 0.2,
            cost: 1e-4,
        }
    }
}

impl ToyMarket {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("toy market", format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.s0 > 0.0) || !(self.cost >= 0.0) || !self.mu.is_finite() {
            return Err(invalid("toy market", "need s0 > 0, cost >= 0 and finite mu"));
        }
        Ok(())
    }
}

/// `n` standard normals for seed `seed`; the same seed always gives the same
/// draws.
pub fn toy_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::row_rng(derive_seed(seed, stream::TOY), 0);
    (0..n).map(|_| rng::normal(&mut r)).collect()
}

/// PL for one draw `xi`.
pub fn toy_pl_on<A: Arith>(a: &mut A, delta: A::V, mu: A::V, sigma: A::V, xi: f64, s0: f64, cost: f64) -> A::V {
    let shock = a.mul_const(sigma, xi);
    let x = a.add(mu, shock);
    let zero = a.constant(0.0);
    let pay = a.max(x, zero);
    let gain = a.mul(delta, x);
    let pl = a.sub(gain, pay);
    if cost == 0.0 {
        return pl;
    }
    let d = a.abs(delta);
    let charge = a.mul_const(d, cost * s0);
    a.sub(pl, charge)
}

/// Monte Carlo estimate of `u(PL(δ))` over `xi`.
pub fn toy_utility_with(delta: f64, market: &ToyMarket, utility: &UtilitySpec, xi: &[f64]) -> Result<f64> {
    let e = &mut Eval;
    let pls: Vec<f64> = xi
        .iter()
        .map(|&z| toy_pl_on(e, delta, market.mu, market.sigma, z, market.s0, market.cost))
        .collect();
    risk::utility(&pls, utility)
}

pub fn toy_utility(delta: f64, market: &ToyMarket, utility: &UtilitySpec, mc_samples: usize, seed: u64) -> Result<f64> {
    if mc_samples == 0 {
        return Err(invalid("toy utility", "mc_samples must be >= 1"));
    }
    market.validate()?;
    toy_utility_with(delta, market, utility, &toy_noise(mc_samples, seed))
}

const GRAD_CHUNK: usize = 4096;

/// `u` and `(∂u/∂δ, ∂u/∂μ, ∂u/∂σ)` by reverse mode: the utility's weights
/// `∂u/∂PL_b` come from a tape over the PL values, then chunks of draws are
/// recorded and back-propagated against those weights.
pub fn toy_utility_grad(delta: f64, market: &ToyMarket, utility: &UtilitySpec, xi: &[f64]) -> Result<(f64, [f64; 3])> {
    let mut store = ParamStore::new();
    store.register("delta", 1, 1, [delta])?;
    store.register("mu", 1, 1, [market.mu])?;
    store.register("sigma", 1, 1, [market.sigma])?;
    let e = &mut Eval;
    let pls: Vec<f64> = xi
        .iter()
        .map(|&z| toy_pl_on(e, delta, market.mu, market.sigma, z, market.s0, market.cost))
        .collect();
    let mut tape = Tape::new();
    let leaves: Vec<Var> = pls.iter().map(|&x| tape.leaf(x)).collect();
    let u = risk::utility_on(&mut tape, &leaves, utility)?;
    let value = tape.value(u);
    tape.finalize(u);
    let adj = tape.adjoints(1.0)?;
    let weights: Vec<f64> = leaves.iter().map(|v| adj[v.index()]).collect();
    // Chunks of draws share one tape whose output is Σ w_b PL_b.
    for (zs, ws) in xi.chunks(GRAD_CHUNK).zip(weights.chunks(GRAD_CHUNK)) {
        if ws.iter().all(|&w| w == 0.0) {
            continue;
        }
        tape.clear();
        let d = tape.param(&store, 0);
        let m = tape.param(&store, 1);
        let s = tape.param(&store, 2);
        let mut pls = Vec::with_capacity(zs.len());
        let mut coef = Vec::with_capacity(zs.len());
        for (&z, &w) in zs.iter().zip(ws) {
            if w != 0.0 {
                pls.push(toy_pl_on(&mut tape, d, m, s, z, market.s0, market.cost));
                coef.push(tape.constant(w));
            }
        }
        let zero = tape.constant(0.0);
        let out = tape.dot(zero, &coef, &pls)?;
        tape.finalize(out);
        tape.backward(&mut store)?;
    }
    let g = store.grads();
    Ok((value, [g[0], g[1], g[2]]))
}

/// `steps` evenly spaced points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(name: &str, lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(lo.is_finite() && hi.is_finite()) || (steps > 1 && !(hi > lo)) {
            return Err(invalid("grid axis", format!("{name}: need steps >= 1 and lo < hi")));
        }
        Ok(Axis {
            name: name.into(),
            lo,
            hi,
            steps,
        })
    }

    pub fn at(&self, k: usize) -> f64 {
        if self.steps == 1 {
            self.lo
        } else if k + 1 == self.steps {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.steps - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.steps).map(|k| self.at(k)).collect()
    }
}

/// Utility values on a one- or two-axis grid, first axis outermost.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSweep {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    /// `(∂u/∂δ, ∂u/∂θ)` per node, `θ` being the second axis' parameter.
    pub gradients: Option<Vec<[f64; 2]>>,
}

impl GridSweep {
    fn inner(&self) -> usize {
        self.axes.get(1).map_or(1, |a| a.steps)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.inner() + j]
    }

    /// Index along the first axis maximising the value with the second
    /// axis fixed at `j` (first index on ties).
    pub fn argmax_first(&self, j: usize) -> usize {
        let mut best = 0;
        for i in 1..self.axes[0].steps {
            if self.value(i, j) > self.value(best, j) {
                best = i;
            }
        }
        best
    }

    /// First-axis coordinate of the maximum, one per second-axis point.
    pub fn argmax_per_column(&self) -> Vec<f64> {
        (0..self.inner()).map(|j| self.axes[0].at(self.argmax_first(j))).collect()
    }
}

/// Case 1: utility along a δ grid with `(μ, σ)` fixed.
pub fn sweep_case1(
    market: &ToyMarket,
    utility: &UtilitySpec,
    delta: &Axis,
    mc_samples: usize,
    seed: u64,
) -> Result<GridSweep> {
    market.validate()?;
    let xi = toy_noise(mc_samples.max(1), seed);
    let values = delta
        .points()
        .into_iter()
        .map(|d| toy_utility_with(d, market, utility, &xi))
        .collect::<Result<Vec<f64>>>()?;
    Ok(GridSweep {
        axes: alloc::vec![delta.clone()],
        values,
        gradients: None,
    })
}

/// Case 2: utility and `(∂u/∂δ, ∂u/∂μ)` over a δ × μ grid.
pub fn sweep_case2(
    market: &ToyMarket,
    utility: &UtilitySpec,
    delta: &Axis,
    mu: &Axis,
    mc_samples: usize,
    seed: u64,
) -> Result<GridSweep> {
    market.validate()?;
    let xi = toy_noise(mc_samples.max(1), seed);
    let mut values = Vec::with_capacity(delta.steps * mu.steps);
    let mut grads = Vec::with_capacity(delta.steps * mu.steps);
    for d in delta.points() {
        for m in mu.points() {
            let mk = ToyMarket { mu: m, ..*market };
            let (u, g) = toy_utility_grad(d, &mk, utility, &xi)?;
            values.push(u);
            grads.push([g[0], g[1]]);
        }
    }
    Ok(GridSweep {
        axes: alloc::vec![delta.clone(), mu.clone()],
        values,
        gradients: Some(grads),
    })
}

/// Case 3: utility over a δ × σ grid.
pub fn sweep_case3(
    market: &ToyMarket,
    utility: &UtilitySpec,
    delta: &Axis,
    sigma: &Axis,
    mc_samples: usize,
    seed: u64,
) -> Result<GridSweep> {
    let xi = toy_noise(mc_samples.max(1), seed);
    let mut values = Vec::with_capacity(delta.steps * sigma.steps);
    for d in delta.points() {
        for s in sigma.points() {
            let mk = ToyMarket { sigma: s, ..*market };
            mk.validate()?;
            values.push(toy_utility_with(d, &mk, utility, &xi)?);
        }
    }
    Ok(GridSweep {
        axes: alloc::vec![delta.clone(), sigma.clone()],
        values,
        gradients: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyAdversarialConfig {
    pub utility: UtilitySpec,
    pub init_delta: f64,
    pub init_mu: f64,
    pub sigma: f64,
    pub cost: f64,
    /// Cycles of `ttur_ratio` hedger steps and one generator step.
    pub cycles: usize,
    pub lr_hedger: f64,
    pub lr_generator: f64,
    pub ttur_ratio: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for ToyAdversarialConfig {
    fn default() -> Self {
        ToyAdversarialConfig {
            utility: UtilitySpec::Erm { lambda: 10.0 },
            init_delta: 0.0,
            init_mu: 0.3,
            sigma: 0.2,
            cost: 1e-4,
            cycles: 2000,
            lr_hedger: 1e-3,
            lr_generator: 1e-3,
            ttur_ratio: 5,
            mc_samples: 4_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryPoint {
    pub step: usize,
    pub delta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyTrajectory {
    /// The initial point, then one point per completed cycle.
    pub points: Vec<TrajectoryPoint>,
    /// Set when `|δ|` or `|μ|` exceeded 10; the run stops there.
    pub diverged: bool,
}

impl ToyTrajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory holds its initial point")
    }
}

/// Adam ascent on δ and descent on μ over a fixed noise sample.
pub fn run_toy_adversarial(cfg: &ToyAdversarialConfig) -> Result<ToyTrajectory> {
    cfg.utility.validate()?;
    if cfg.ttur_ratio == 0 || cfg.mc_samples == 0 || !(cfg.lr_hedger >= 0.0 && cfg.lr_generator >= 0.0) {
        return Err(invalid("toy adversarial config", "ttur_ratio, mc_samples >= 1 and lrs >= 0"));
    }
    let xi = toy_noise(cfg.mc_samples, cfg.seed);
    let mut store = ParamStore::new();
    store.register("delta", 1, 1, [cfg.init_delta])?;
    store.register("mu", 1, 1, [cfg.init_mu])?;
    let mut h_opt = Adam::new(0..1, cfg.lr_hedger);
    let mut g_opt = Adam::new(1..2, cfg.lr_generator);
    let market = |store: &ParamStore| ToyMarket {
        s0: 1.0,
        mu: store.params()[1],
        sigma: cfg.sigma,
        cost: cfg.cost,
    };
    let mut points = alloc::vec![TrajectoryPoint {
        step: 0,
        delta: cfg.init_delta,
        mu: cfg.init_mu,
    }];
    let out_of_bounds = |s: &ParamStore| s.params().iter().any(|p| !(p.abs() <= 10.0));
    for cycle in 1..=cfg.cycles {
        for _ in 0..cfg.ttur_ratio {
            let (_, g) = toy_utility_grad(store.params()[0], &market(&store), &cfg.utility, &xi)?;
            // The hedger maximises u: descend on -u.
            store.grads_mut()[0] = -g[0];
            h_opt.step(&mut store)?;
            if out_of_bounds(&store) {
                break;
            }
        }
        if !out_of_bounds(&store) {
            let (_, g) = toy_utility_grad(store.params()[0], &market(&store), &cfg.utility, &xi)?;
            store.grads_mut()[1] = g[1];
            g_opt.step(&mut store)?;
        }
        points.push(TrajectoryPoint {
            step: cycle,
            delta: store.params()[0],
            mu: store.params()[1],
        });
        if out_of_bounds(&store) {
            return Ok(ToyTrajectory { points, diverged: true });
        }
    }
    Ok(ToyTrajectory { points, diverged: false })
}
