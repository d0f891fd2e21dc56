//! The two players: a feed-forward hedger and a recurrent path generator.
//!
//! Both keep their weights in a shared [`ParamStore`] under a name prefix
//! and are evaluated through [`Arith`], so the same code serves plain
//! evaluation and recorded, differentiable passes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::autodiff::{Arith, Eval, ParamStore};
use crate::error::{invalid, Error, Result};
use crate::instruments::OptionSpec;
use crate::rng::{self, stream};
use crate::simulators::{PathBatch, PathSource};

/// Optional hedger inputs beyond `[log(S/K), (n-i)/n, δ_prev]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSet {
    /// Black-Scholes delta at this volatility (zero rate).
    #[cfg_attr(feature = "serde", serde(default))]
    pub bs_delta_sigma: Option<f64>,
    /// `log(max_{s<=t} S_s / S_t)`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub running_max: bool,
}

impl FeatureSet {
    pub fn arity(&self) -> usize {
        3 + self.bs_delta_sigma.is_some() as usize + self.running_max as usize
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = vec!["log_moneyness", "time_to_maturity", "prev_delta"];
        if self.bs_delta_sigma.is_some() {
            v.push("bs_delta");
        }
        if self.running_max {
            v.push("running_max_ratio");
        }
        v
    }
}

/// Features at step `step` given the current price and running maximum.
pub fn features_at<A: Arith>(
    a: &mut A,
    spot: A::V,
    running_max: A::V,
    step: usize,
    spec: &OptionSpec,
    prev_delta: A::V,
    fs: &FeatureSet,
) -> Result<Vec<A::V>> {
    let n = spec.maturity_steps;
    let mut out = Vec::with_capacity(fs.arity());
    let log_s = a.ln(spot)?;
    let log_m = a.add_const(log_s, -libm::log(spec.strike));
    out.push(log_m);
    out.push(a.constant(n.saturating_sub(step) as f64 / n as f64));
    out.push(prev_delta);
    if let Some(sigma) = fs.bs_delta_sigma {
        let tau = spec.time_to_maturity(step);
        let vol = sigma * libm::sqrt(tau);
        let d = if vol > 0.0 {
            let x = a.add_const(log_m, 0.5 * sigma * sigma * tau);
            let d1 = a.mul_const(x, 1.0 / vol);
            a.norm_cdf(d1)
        } else {
            let v = a.val(log_m);
            a.constant(if v > 0.0 {
                1.0
            } else if v < 0.0 {
                0.0
            } else {
                0.5
            })
        };
        out.push(d);
    }
    if fs.running_max {
        let log_max = a.ln(running_max)?;
        out.push(a.sub(log_max, log_s));
    }
    Ok(out)
}

/// Features for the last point of `prefix` (step `prefix.len() - 1`).
pub fn hedger_features(prefix: &[f64], spec: &OptionSpec, prev_delta: f64, fs: &FeatureSet) -> Result<Vec<f64>> {
    let Some(&spot) = prefix.last() else {
        return Err(Error::Shape {
            what: "path prefix",
            expected: 1,
            got: 0,
        });
    };
    let running_max = prefix.iter().copied().fold(prefix[0], f64::max);
    features_at(&mut Eval, spot, running_max, prefix.len() - 1, spec, prev_delta, fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply<A: Arith>(self, a: &mut A, x: A::V) -> A::V {
        match self {
            Activation::Relu => a.relu(x),
            Activation::Tanh => a.tanh(x),
        }
    }
}

/// Hedger output map. Positions are unbounded unless `Sigmoid` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Squash {
    Identity,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HedgerArch {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub squash: Squash,
    pub features: FeatureSet,
}

impl Default for HedgerArch {
    fn default() -> Self {
        HedgerArch {
            hidden: vec![32, 32, 32],
            activation: Activation::Relu,
            squash: Squash::Identity,
            features: FeatureSet::default(),
        }
    }
}

impl HedgerArch {
    /// `Σ_k (fan_in_k + 1) · fan_out_k` over the hidden layers and the
    /// scalar output layer.
    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| (i + 1) * o).sum()
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.features.arity();
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, 1));
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    /// Offsets relative to the start of the policy's parameter range.
    w: usize,
    b: usize,
}

/// Weights for a [`Layer`] bound into an arithmetic context, flat in
/// store order.
pub struct Bound<V> {
    params: Vec<V>,
}

/// Feed-forward hedger `δ_i = H(features_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgerPolicy {
    arch: HedgerArch,
    prefix: String,
    layers: Vec<Layer>,
    range: Range<usize>,
}

impl HedgerPolicy {
    /// Registers `{prefix}.l{k}.w` (`fan_out × fan_in`) and `{prefix}.l{k}.b`
    /// initialised uniformly in `±1/√fan_in`.
    pub fn new(arch: HedgerArch, prefix: &str, store: &mut ParamStore, seed: u64) -> Result<Self> {
        if arch.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hedger architecture", "hidden widths must be >= 1"));
        }
        let mut r = rng::row_rng(rng::derive_seed(seed, stream::INIT), 0);
        let start = store.len();
        let mut layers = Vec::new();
        for (k, (fan_in, fan_out)) in arch.layer_dims().into_iter().enumerate() {
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng::uniform_sym(&mut r, bound)).collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng::uniform_sym(&mut r, bound)).collect();
            let wr = store.register(&format!("{prefix}.l{k}.w"), fan_out, fan_in, w)?;
            let br = store.register(&format!("{prefix}.l{k}.b"), fan_out, 1, b)?;
            layers.push(Layer {
                fan_in,
                fan_out,
                w: wr.start - start,
                b: br.start - start,
            });
        }
        Ok(HedgerPolicy {
            arch,
            prefix: prefix.into(),
            layers,
            range: start..store.len(),
        })
    }

    pub fn arch(&self) -> &HedgerArch {
        &self.arch
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn features(&self) -> &FeatureSet {
        &self.arch.features
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn bind<A: Arith>(&self, a: &mut A, store: &ParamStore) -> Bound<A::V> {
        Bound {
            params: self.range.clone().map(|i| a.param(store, i)).collect(),
        }
    }

    /// Binds the weights as constants: values flow, gradients do not.
    pub fn bind_frozen<A: Arith>(&self, a: &mut A, store: &ParamStore) -> Bound<A::V> {
        Bound {
            params: self.range.clone().map(|i| a.constant(store.params()[i])).collect(),
        }
    }

    pub fn forward_on<A: Arith>(&self, a: &mut A, bound: &Bound<A::V>, features: &[A::V]) -> Result<A::V> {
        if features.len() != self.arch.features.arity() {
            return Err(Error::Shape {
                what: "hedger features",
                expected: self.arch.features.arity(),
                got: features.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut x: Vec<A::V> = features.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::with_capacity(layer.fan_out);
            for j in 0..layer.fan_out {
                let row = &bound.params[layer.w + j * layer.fan_in..layer.w + (j + 1) * layer.fan_in];
                let z = a.dot(bound.params[layer.b + j], row, &x)?;
                y.push(if k < last { self.arch.activation.apply(a, z) } else { z });
            }
            x = y;
        }
        Ok(match self.arch.squash {
            Squash::Identity => x[0],
            Squash::Sigmoid => a.sigmoid(x[0]),
        })
    }

    pub fn forward(&self, store: &ParamStore, features: &[f64]) -> Result<f64> {
        let bound = self.bind(&mut Eval, store);
        self.forward_on(&mut Eval, &bound, features)
    }

    /// Rolls the policy along a path, returning `δ_0 .. δ_{n-1}`.
    pub fn positions_on<A: Arith>(
        &self,
        a: &mut A,
        bound: &Bound<A::V>,
        spec: &OptionSpec,
        path: &[A::V],
    ) -> Result<Vec<A::V>> {
        let n = spec.maturity_steps;
        if path.len() != n + 1 {
            return Err(Error::Shape {
                what: "price path",
                expected: n + 1,
                got: path.len(),
            });
        }
        let mut deltas = Vec::with_capacity(n);
        let mut prev = a.constant(0.0);
        let mut running_max = path[0];
        for (i, &s) in path[..n].iter().enumerate() {
            if i > 0 {
                running_max = a.max(running_max, s);
            }
            let f = features_at(a, s, running_max, i, spec, prev, &self.arch.features)?;
            let d = self.forward_on(a, bound, &f)?;
            deltas.push(d);
            prev = d;
        }
        Ok(deltas)
    }

    pub fn positions(&self, store: &ParamStore, spec: &OptionSpec, path: &[f64]) -> Result<Vec<f64>> {
        let bound = self.bind(&mut Eval, store);
        self.positions_on(&mut Eval, &bound, spec, path)
    }
}

/// Activations of a batched hedger rollout, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct RolloutCache {
    batch: usize,
    steps: usize,
    /// `inputs[i][k]`: input of layer `k` at step `i`, `batch × fan_in`.
    inputs: Vec<Vec<Vec<f64>>>,
    /// `pre[i][k]`: pre-activation of layer `k` at step `i`, `batch × fan_out`.
    pre: Vec<Vec<Vec<f64>>>,
    /// `batch × steps` positions.
    deltas: Vec<f64>,
}

impl RolloutCache {
    pub fn deltas(&self, b: usize) -> &[f64] {
        &self.deltas[b * self.steps..(b + 1) * self.steps]
    }
}

impl HedgerPolicy {
    /// Rolls the policy over every path at once, keeping activations.
    /// Positions are bitwise equal to [`HedgerPolicy::positions`].
    pub fn rollout_batch(&self, store: &ParamStore, spec: &OptionSpec, paths: &[&[f64]]) -> Result<RolloutCache> {
        let n = spec.maturity_steps;
        let batch = paths.len();
        for p in paths {
            if p.len() != n + 1 {
                return Err(Error::Shape {
                    what: "price path",
                    expected: n + 1,
                    got: p.len(),
                });
            }
        }
        let e = &mut Eval;
        let params = &store.params()[self.range.clone()];
        let last = self.layers.len() - 1;
        let mut running_max: Vec<f64> = paths.iter().map(|p| p[0]).collect();
        let mut deltas = vec![0.0; batch * n];
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = Vec::with_capacity(batch * self.arch.features.arity());
            for (b, p) in paths.iter().enumerate() {
                if i > 0 {
                    running_max[b] = e.max(running_max[b], p[i]);
                }
                let prev = if i > 0 { deltas[b * n + i - 1] } else { 0.0 };
                x.extend(features_at(e, p[i], running_max[b], i, spec, prev, &self.arch.features)?);
            }
            let mut step_inputs = Vec::with_capacity(self.layers.len());
            let mut step_pre = Vec::with_capacity(self.layers.len());
            for (k, layer) in self.layers.iter().enumerate() {
                let w = &params[layer.w..layer.w + layer.fan_in * layer.fan_out];
                let bias = &params[layer.b..layer.b + layer.fan_out];
                let mut z = Vec::with_capacity(batch * layer.fan_out);
                let mut y = Vec::with_capacity(batch * layer.fan_out);
                for xb in x.chunks_exact(layer.fan_in) {
                    for j in 0..layer.fan_out {
                        let row = &w[j * layer.fan_in..(j + 1) * layer.fan_in];
                        let v = e.dot(bias[j], row, xb)?;
                        z.push(v);
                        y.push(if k < last { self.arch.activation.apply(e, v) } else { v });
                    }
                }
                step_inputs.push(x);
                step_pre.push(z);
                x = y;
            }
            for b in 0..batch {
                deltas[b * n + i] = match self.arch.squash {
                    Squash::Identity => x[b],
                    Squash::Sigmoid => e.sigmoid(x[b]),
                };
            }
            inputs.push(step_inputs);
            pre.push(step_pre);
        }
        Ok(RolloutCache {
            batch,
            steps: n,
            inputs,
            pre,
            deltas,
        })
    }

    /// Back-propagates `grad_deltas` (`batch × steps`, the direct derivative
    /// of the objective with respect to each position) through the rollout,
    /// including the dependence of later positions on earlier ones, and adds
    /// the result to the hedger's gradients.
    pub fn backward_batch(&self, store: &mut ParamStore, cache: &RolloutCache, grad_deltas: &[f64]) -> Result<()> {
        self.backward_batch_with(store, cache, grad_deltas, true, None)
    }

    /// [`HedgerPolicy::backward_batch`] that can leave the weight gradients
    /// untouched and write the total derivative with respect to every input
    /// feature into `feature_grads` (`batch × steps × arity`).
    pub fn backward_batch_with(
        &self,
        store: &mut ParamStore,
        cache: &RolloutCache,
        grad_deltas: &[f64],
        accumulate: bool,
        mut feature_grads: Option<&mut Vec<f64>>,
    ) -> Result<()> {
        let (batch, n) = (cache.batch, cache.steps);
        let arity = self.arch.features.arity();
        if let Some(f) = feature_grads.as_deref_mut() {
            f.clear();
            f.resize(batch * n * arity, 0.0);
        }
        if grad_deltas.len() != batch * n {
            return Err(Error::Shape {
                what: "position gradients",
                expected: batch * n,
                got: grad_deltas.len(),
            });
        }
        let params: Vec<f64> = store.params()[self.range.clone()].to_vec();
        let grads = &mut store.grads_mut()[self.range.clone()];
        let prev_idx = 2;
        let mut carry = vec![0.0; batch];
        let widest = self.layers.iter().map(|l| l.fan_in.max(l.fan_out)).max().unwrap_or(1);
        let mut gz = Vec::with_capacity(widest);
        let mut gx = Vec::with_capacity(widest);
        for i in (0..n).rev() {
            for b in 0..batch {
                let g = grad_deltas[b * n + i] + carry[b];
                let last = self.layers.len() - 1;
                let z_out = cache.pre[i][last][b];
                gz.clear();
                gz.push(match self.arch.squash {
                    Squash::Identity => g,
                    Squash::Sigmoid => {
                        let v = Eval.sigmoid(z_out);
                        g * (v * (1.0 - v))
                    }
                });
                for (k, layer) in self.layers.iter().enumerate().rev() {
                    let x = &cache.inputs[i][k][b * layer.fan_in..(b + 1) * layer.fan_in];
                    gx.clear();
                    gx.resize(layer.fan_in, 0.0);
                    for (j, &gj) in gz.iter().enumerate() {
                        if gj == 0.0 {
                            continue;
                        }
                        let off = layer.w + j * layer.fan_in;
                        if accumulate {
                            grads[layer.b + j] += gj;
                            for m in 0..layer.fan_in {
                                grads[off + m] += gj * x[m];
                            }
                        }
                        for m in 0..layer.fan_in {
                            gx[m] += params[off + m] * gj;
                        }
                    }
                    if k > 0 {
                        let z = &cache.pre[i][k - 1][b * layer.fan_in..(b + 1) * layer.fan_in];
                        gz.clear();
                        gz.extend(gx.iter().zip(z).map(|(&g, &zv)| {
                            g * match self.arch.activation {
                                Activation::Relu => {
                                    if zv > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Activation::Tanh => {
                                    let t = libm::tanh(zv);
                                    1.0 - t * t
                                }
                            }
                        }));
                    }
                }
                carry[b] = gx[prev_idx];
                if let Some(f) = feature_grads.as_deref_mut() {
                    f[(b * n + i) * arity..(b * n + i + 1) * arity].copy_from_slice(&gx);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorArch {
    pub hidden_dim: usize,
    pub noise_dim: usize,
    /// Volatility the output head starts from.
    pub init_sigma: f64,
    /// Years per step, used only to initialise the output head.
    pub dt: f64,
}

impl Default for GeneratorArch {
    fn default() -> Self {
        GeneratorArch {
            hidden_dim: 16,
            noise_dim: 4,
            init_sigma: 0.2,
            dt: 1.0 / crate::instruments::TRADING_DAYS_PER_YEAR,
        }
    }
}

impl GeneratorArch {
    /// Per-step scale `σ√dt` the head's log-scale is measured against.
    pub fn reference_scale(&self) -> f64 {
        self.init_sigma * libm::sqrt(self.dt)
    }

    /// Cell `H·(H + 1 + R) + H`, head `H + R + 1`, plus the log-scale.
    pub fn param_count(&self) -> usize {
        let (h, r) = (self.hidden_dim, self.noise_dim);
        h * (h + 1 + r) + h + (h + r + 1) + 1
    }
}

/// Recurrent generator:
/// `h_i = tanh(W_h h_{i-1} + w_s log S_{i-1} + W_r R_i + b)`,
/// `r_i = σ₀√dt e^{ℓ} (v_h·h_i + v_r·R_i) + c`, `S_i = S_{i-1} e^{r_i}`, with
/// `h_0 = 0` and `R_i ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    arch: GeneratorArch,
    prefix: String,
    range: Range<usize>,
}

// Offsets within the generator's parameter range.
struct GenLayout {
    cell_w: usize,
    cell_b: usize,
    head_w: usize,
    head_b: usize,
    log_scale: usize,
}

impl GeneratorModel {
    pub fn new(arch: GeneratorArch, prefix: &str, store: &mut ParamStore, seed: u64) -> Result<Self> {
        if arch.hidden_dim == 0 || arch.noise_dim == 0 {
            return Err(invalid("generator architecture", "hidden_dim and noise_dim must be >= 1"));
        }
        if !(arch.init_sigma > 0.0) || !(arch.dt > 0.0) {
            return Err(invalid("generator architecture", "init_sigma and dt must be > 0"));
        }
        let (h, r) = (arch.hidden_dim, arch.noise_dim);
        let mut rg = rng::row_rng(rng::derive_seed(seed, stream::INIT), 1);
        let fan_in = h + 1 + r;
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let start = store.len();
        let cell_w: Vec<f64> = (0..h * fan_in).map(|_| rng::uniform_sym(&mut rg, bound)).collect();
        let cell_b: Vec<f64> = (0..h).map(|_| rng::uniform_sym(&mut rg, bound)).collect();
        store.register(&format!("{prefix}.cell.w"), h, fan_in, cell_w)?;
        store.register(&format!("{prefix}.cell.b"), h, 1, cell_b)?;
        store.register(&format!("{prefix}.head.w"), 1, h + r, vec![0.0; h + r])?;
        store.register(&format!("{prefix}.head.b"), 1, 1, [0.0])?;
        store.register(&format!("{prefix}.head.log_scale"), 1, 1, [0.0])?;
        let model = GeneratorModel {
            arch,
            prefix: prefix.into(),
            range: start..store.len(),
        };
        model.set_gbm_head(store, arch.init_sigma, arch.dt);
        Ok(model)
    }

    pub fn arch(&self) -> &GeneratorArch {
        &self.arch
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    fn layout(&self) -> GenLayout {
        let (h, r) = (self.arch.hidden_dim, self.arch.noise_dim);
        let cell_w = 0;
        let cell_b = cell_w + h * (h + 1 + r);
        let head_w = cell_b + h;
        let head_b = head_w + h + r;
        GenLayout {
            cell_w,
            cell_b,
            head_w,
            head_b,
            log_scale: head_b + 1,
        }
    }

    /// Sets the output head so that `r_i = σ√dt·R_i[0] - σ²dt/2`, which makes
    /// the generator's law that of zero-drift GBM regardless of the cell.
    pub fn set_gbm_head(&self, store: &mut ParamStore, sigma: f64, dt: f64) {
        let l = self.layout();
        let (h, r) = (self.arch.hidden_dim, self.arch.noise_dim);
        let p = &mut store.params_mut()[self.range.clone()];
        p[l.head_w..l.head_w + h + r].fill(0.0);
        p[l.head_w + h] = 1.0;
        p[l.head_b] = -0.5 * sigma * sigma * dt;
        let target = sigma * libm::sqrt(dt);
        let reference = self.arch.reference_scale();
        p[l.log_scale] = if target == reference { 0.0 } else { libm::log(target / reference) };
    }

    /// `steps × noise_dim` standard normals for one row. Coordinate 0 comes
    /// from stream `(seed, row)`, the same stream [`crate::simulators::simulate_gbm`]
    /// uses for its price shocks; the rest come from a derived stream.
    pub fn noise(&self, steps: usize, seed: u64, row: usize) -> Vec<f64> {
        let r = self.arch.noise_dim;
        let mut main = rng::row_rng(seed, row as u64);
        let mut extra = rng::row_rng(rng::derive_seed(seed, stream::GENERATOR_NOISE), row as u64);
        let mut out = Vec::with_capacity(steps * r);
        for _ in 0..steps {
            out.push(rng::normal(&mut main));
            for _ in 1..r {
                out.push(rng::normal(&mut extra));
            }
        }
        out
    }

    pub fn bind<A: Arith>(&self, a: &mut A, store: &ParamStore) -> Bound<A::V> {
        Bound {
            params: self.range.clone().map(|i| a.param(store, i)).collect(),
        }
    }

    pub fn bind_frozen<A: Arith>(&self, a: &mut A, store: &ParamStore) -> Bound<A::V> {
        Bound {
            params: self.range.clone().map(|i| a.constant(store.params()[i])).collect(),
        }
    }

    /// Emits `steps + 1` prices starting at `s0` from pre-drawn `noise`.
    pub fn roll_on<A: Arith>(
        &self,
        a: &mut A,
        bound: &Bound<A::V>,
        s0: f64,
        steps: usize,
        noise: &[f64],
    ) -> Result<Vec<A::V>> {
        let (h, r) = (self.arch.hidden_dim, self.arch.noise_dim);
        if noise.len() != steps * r {
            return Err(Error::Shape {
                what: "generator noise",
                expected: steps * r,
                got: noise.len(),
            });
        }
        let l = self.layout();
        let p = &bound.params;
        let fan_in = h + 1 + r;
        let zero = a.constant(0.0);
        let mut hidden = vec![zero; h];
        let mut s = a.constant(s0);
        let mut path = Vec::with_capacity(steps + 1);
        path.push(s);
        let e = a.exp(p[l.log_scale]);
        let scale = a.mul_const(e, self.arch.reference_scale());
        for i in 0..steps {
            let eps: Vec<A::V> = noise[i * r..(i + 1) * r].iter().map(|&z| a.constant(z)).collect();
            let log_s = a.ln(s)?;
            let mut input = Vec::with_capacity(fan_in);
            input.extend_from_slice(&hidden);
            input.push(log_s);
            input.extend_from_slice(&eps);
            let mut next = Vec::with_capacity(h);
            for j in 0..h {
                let row = &p[l.cell_w + j * fan_in..l.cell_w + (j + 1) * fan_in];
                let z = a.dot(p[l.cell_b + j], row, &input)?;
                next.push(a.tanh(z));
            }
            hidden = next;
            let mut head_in = hidden.clone();
            head_in.extend_from_slice(&eps);
            let lin = a.dot(zero, &p[l.head_w..l.head_w + h + r], &head_in)?;
            let scaled = a.mul(scale, lin);
            let ret = a.add(scaled, p[l.head_b]);
            let growth = a.exp(ret);
            s = a.mul(s, growth);
            let v = a.val(s);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonFiniteEmission { step: i + 1 });
            }
            path.push(s);
        }
        Ok(path)
    }

    /// Plain batch of generated paths; row `b` uses [`GeneratorModel::noise`]
    /// for `(seed, b)`.
    pub fn sample(&self, store: &ParamStore, s0: f64, steps: usize, dt: f64, batch: usize, seed: u64) -> Result<PathBatch> {
        let bound = self.bind(&mut Eval, store);
        let mut prices = Vec::with_capacity(batch * (steps + 1));
        for b in 0..batch {
            let noise = self.noise(steps, seed, b);
            prices.extend(self.roll_on(&mut Eval, &bound, s0, steps, &noise)?);
        }
        PathBatch::new(prices, batch, steps, dt)
    }
}

/// A generator with a parameter snapshot, usable wherever paths are drawn.
pub struct GeneratorSource<'a> {
    pub model: &'a GeneratorModel,
    pub store: &'a ParamStore,
    pub s0: f64,
    pub steps: usize,
    pub dt: f64,
}

impl PathSource for GeneratorSource<'_> {
    fn sample(&self, batch: usize, seed: u64) -> Result<PathBatch> {
        self.model.sample(self.store, self.s0, self.steps, self.dt, batch, seed)
    }
}
