//! Deep hedging against a fixed simulator and the adversarial hedger /
//! generator game.
//!
//! Gradients are taken per path. A plain pass computes every path's PL, a
//! small tape over those PLs gives `∂loss/∂PL_b`, and each path is then
//! recorded on its own (reused) tape and back-propagated with that weight
//! as the seed. Memory stays at one path's graph regardless of batch size.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::autodiff::{clip_grad_norm, Adam, Arith, Eval, ParamStore, Tape, Var};
use crate::backtest::{mean_std, Strategy};
use crate::error::{invalid, Error, Player, Result};
use crate::instruments::{self, OptionSpec};
use crate::networks::{self, Bound, GeneratorArch, GeneratorModel, HedgerArch, HedgerPolicy};
use crate::risk::{self, CostSpec, UtilitySpec};
use crate::rng::{derive_seed, stream};
use crate::simulators::{simulate_gbm, PathBatch, PathSource};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// Deep hedging: optimizer steps. Adversarial: cycles of `ttur_ratio`
    /// hedger steps plus one generator step.
    pub epochs: usize,
    pub paths_per_epoch: usize,
    pub eval_paths: usize,
    pub lr_hedger: f64,
    pub lr_generator: f64,
    /// Hedger steps per generator step.
    pub ttur_ratio: usize,
    pub snapshot_every: usize,
    /// Not part of serialized configs; experiment files carry one top-level
    /// seed.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub seed: u64,
    /// Global-norm clip applied to each player's gradient before its step.
    pub clip_norm: Option<f64>,
    /// Skip generator updates (the generator keeps its initial weights).
    pub freeze_generator: bool,
    /// Volatility of the Brownian validation batch used for snapshot selection.
    pub validation_sigma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            paths_per_epoch: 512,
            eval_paths: 2048,
            lr_hedger: 1e-3,
            lr_generator: 1e-3,
            ttur_ratio: 5,
            snapshot_every: 10,
            seed: 0,
            clip_norm: None,
            freeze_generator: false,
            validation_sigma: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("epochs", self.epochs),
            ("paths_per_epoch", self.paths_per_epoch),
            ("eval_paths", self.eval_paths),
            ("ttur_ratio", self.ttur_ratio),
            ("snapshot_every", self.snapshot_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(invalid("train config", format!("{name} must be >= 1")));
            }
        }
        for (name, v) in [("lr_hedger", self.lr_hedger), ("lr_generator", self.lr_generator)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("train config", format!("{name} must be > 0, got {v}")));
            }
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(invalid("train config", format!("clip_norm must be > 0, got {c}")));
            }
        }
        if !(self.validation_sigma > 0.0 && self.validation_sigma.is_finite()) {
            return Err(invalid("train config", "validation_sigma must be > 0"));
        }
        Ok(())
    }
}

/// Option, utility and friction: everything the loss depends on besides
/// the players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub spec: OptionSpec,
    pub utility: UtilitySpec,
    pub cost: CostSpec,
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.utility.validate()
    }
}

/// Which parameters receive gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradTarget {
    Hedger,
    Generator,
    Both,
}

/// Where a batch of paths comes from.
#[derive(Clone, Copy)]
pub enum PathInput<'a> {
    Paths(&'a PathBatch),
    /// One noise vector per row, as produced by [`GeneratorModel::noise`].
    Generated {
        model: &'a GeneratorModel,
        s0: f64,
        noise: &'a [Vec<f64>],
    },
}

impl PathInput<'_> {
    fn plain_paths(&self, store: &ParamStore, steps: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            PathInput::Paths(p) => {
                if p.steps() != steps {
                    return Err(Error::Shape {
                        what: "path steps",
                        expected: steps,
                        got: p.steps(),
                    });
                }
                Ok(p.rows().map(<[f64]>::to_vec).collect())
            }
            PathInput::Generated { model, s0, noise } => {
                let gb = model.bind(&mut Eval, store);
                noise.iter().map(|z| model.roll_on(&mut Eval, &gb, *s0, steps, z)).collect()
            }
        }
    }
}

/// Terminal PL of the hedger on one path.
pub fn pl_on<A: Arith>(
    a: &mut A,
    hedger: &HedgerPolicy,
    bound: &Bound<A::V>,
    obj: &Objective,
    path: &[A::V],
) -> Result<A::V> {
    let deltas = hedger.positions_on(a, bound, &obj.spec, path)?;
    let z = instruments::payoff_on(a, &obj.spec, path)?;
    risk::pl_terminal_on(a, z, path, &deltas, &obj.cost)
}

/// `hedge_loss` of the hedger over the batch, without gradients.
pub fn loss_value(store: &ParamStore, hedger: &HedgerPolicy, input: &PathInput<'_>, obj: &Objective) -> Result<f64> {
    let paths = input.plain_paths(store, obj.spec.maturity_steps)?;
    let hb = hedger.bind(&mut Eval, store);
    let pls = paths
        .iter()
        .map(|p| pl_on(&mut Eval, hedger, &hb, obj, p))
        .collect::<Result<Vec<f64>>>()?;
    risk::hedge_loss(&pls, &obj.utility)
}

/// Adds `scale · ∂hedge_loss/∂θ` to the gradients of the `target`
/// parameters and returns the loss. Gradients are accumulated, not reset.
///
/// Hedger-only gradients use the batched rollout of
/// [`HedgerPolicy::rollout_batch`]; everything else goes through
/// [`loss_and_grad_taped`].
pub fn loss_and_grad(
    store: &mut ParamStore,
    hedger: &HedgerPolicy,
    input: &PathInput<'_>,
    obj: &Objective,
    target: GradTarget,
    scale: f64,
    tape: &mut Tape,
) -> Result<f64> {
    match (target, input) {
        (GradTarget::Hedger, _) => {}
        (GradTarget::Generator, PathInput::Generated { model, s0, noise }) => {
            return generator_grad(store, hedger, model, *s0, noise, obj, scale, tape);
        }
        _ => return loss_and_grad_taped(store, hedger, input, obj, target, scale, tape),
    }
    let n = obj.spec.maturity_steps;
    let paths = input.plain_paths(store, n)?;
    let refs: Vec<&[f64]> = paths.iter().map(Vec::as_slice).collect();
    let cache = hedger.rollout_batch(store, &obj.spec, &refs)?;
    let pls = refs
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let z = instruments::payoff(&obj.spec, p)?;
            risk::pl_terminal(z, p, cache.deltas(b), &obj.cost)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (loss, weights) = loss_weights(&pls, &obj.utility, tape)?;
    let mut grad_deltas = Vec::with_capacity(pls.len() * n);
    for (b, p) in refs.iter().enumerate() {
        let w = scale * weights[b];
        if w == 0.0 {
            grad_deltas.extend(core::iter::repeat_n(0.0, n));
        } else {
            grad_deltas.extend(risk::pl_position_grad(p, cache.deltas(b), &obj.cost)?.into_iter().map(|g| w * g));
        }
    }
    hedger.backward_batch(store, &cache, &grad_deltas)?;
    Ok(loss)
}

/// Generator gradient with the hedger frozen. The batched hedger pass gives
/// `∂loss/∂feature` for every step; each path is then recorded with the
/// positions held constant and the surrogate
/// `w_b · PL_b + Σ_{i,f} (∂loss/∂x_{i,f}) · x_{i,f}` back-propagated, which
/// has the same derivative with respect to the path as the full objective.
#[allow(clippy::too_many_arguments)]
fn generator_grad(
    store: &mut ParamStore,
    hedger: &HedgerPolicy,
    model: &GeneratorModel,
    s0: f64,
    noise: &[Vec<f64>],
    obj: &Objective,
    scale: f64,
    tape: &mut Tape,
) -> Result<f64> {
    let n = obj.spec.maturity_steps;
    let fs = *hedger.features();
    let arity = fs.arity();
    let gb = model.bind(&mut Eval, store);
    let paths = noise
        .iter()
        .map(|z| model.roll_on(&mut Eval, &gb, s0, n, z))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let refs: Vec<&[f64]> = paths.iter().map(Vec::as_slice).collect();
    let cache = hedger.rollout_batch(store, &obj.spec, &refs)?;
    let pls = refs
        .iter()
        .enumerate()
        .map(|(b, p)| {
            let z = instruments::payoff(&obj.spec, p)?;
            risk::pl_terminal(z, p, cache.deltas(b), &obj.cost)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (loss, weights) = loss_weights(&pls, &obj.utility, tape)?;
    let mut grad_deltas = Vec::with_capacity(pls.len() * n);
    for (b, p) in refs.iter().enumerate() {
        let w = scale * weights[b];
        grad_deltas.extend(risk::pl_position_grad(p, cache.deltas(b), &obj.cost)?.into_iter().map(|g| w * g));
    }
    let mut feature_grads = Vec::new();
    hedger.backward_batch_with(store, &cache, &grad_deltas, false, Some(&mut feature_grads))?;

    for b in 0..paths.len() {
        let w = scale * weights[b];
        if w == 0.0 {
            continue;
        }
        tape.clear();
        let gb = model.bind(tape, store);
        let path = model.roll_on(tape, &gb, s0, n, &noise[b])?;
        let deltas: Vec<Var> = cache.deltas(b).iter().map(|&d| tape.constant(d)).collect();
        let z = instruments::payoff_on(tape, &obj.spec, &path)?;
        let pl = risk::pl_terminal_on(tape, z, &path, &deltas, &obj.cost)?;
        let mut coef = Vec::with_capacity(n * arity);
        let mut feats = Vec::with_capacity(n * arity);
        let mut running_max = path[0];
        for i in 0..n {
            if i > 0 {
                running_max = tape.max(running_max, path[i]);
            }
            let prev = if i > 0 { deltas[i - 1] } else { tape.constant(0.0) };
            feats.extend(networks::features_at(tape, path[i], running_max, i, &obj.spec, prev, &fs)?);
            let g = &feature_grads[(b * n + i) * arity..(b * n + i + 1) * arity];
            coef.extend_from_slice(g);
        }
        let coef: Vec<Var> = coef.into_iter().map(|x| tape.constant(x)).collect();
        let weighted = tape.mul_const(pl, w);
        let out = tape.dot(weighted, &coef, &feats)?;
        tape.finalize(out);
        tape.backward(store)?;
    }
    Ok(loss)
}

/// `hedge_loss(pls)` and `∂hedge_loss/∂PL_b`.
fn loss_weights(pls: &[f64], utility: &UtilitySpec, tape: &mut Tape) -> Result<(f64, Vec<f64>)> {
    tape.clear();
    let leaves: Vec<Var> = pls.iter().map(|&x| tape.leaf(x)).collect();
    let loss = risk::hedge_loss_on(tape, &leaves, utility)?;
    let value = tape.value(loss);
    tape.finalize(loss);
    let adj = tape.adjoints(1.0)?;
    Ok((value, leaves.iter().map(|v| adj[v.index()]).collect()))
}

/// [`loss_and_grad`] with every path recorded on its own tape.
pub fn loss_and_grad_taped(
    store: &mut ParamStore,
    hedger: &HedgerPolicy,
    input: &PathInput<'_>,
    obj: &Objective,
    target: GradTarget,
    scale: f64,
    tape: &mut Tape,
) -> Result<f64> {
    let steps = obj.spec.maturity_steps;
    if target != GradTarget::Hedger && matches!(input, PathInput::Paths(_)) {
        return Err(invalid("gradient target", "generator gradients need generated paths"));
    }
    let paths = input.plain_paths(store, steps)?;
    let hb = hedger.bind(&mut Eval, store);
    let pls = paths
        .iter()
        .map(|p| pl_on(&mut Eval, hedger, &hb, obj, p))
        .collect::<Result<Vec<f64>>>()?;

    let (loss_value, weights) = loss_weights(&pls, &obj.utility, tape)?;

    for (b, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        tape.clear();
        let out = match (target, input) {
            (GradTarget::Hedger, _) => {
                let hb = hedger.bind(tape, store);
                let path: Vec<Var> = paths[b].iter().map(|&s| tape.leaf(s)).collect();
                pl_on(tape, hedger, &hb, obj, &path)?
            }
            (_, PathInput::Generated { model, s0, noise }) => {
                let gb = model.bind(tape, store);
                let path = model.roll_on(tape, &gb, *s0, steps, &noise[b])?;
                let hb = if target == GradTarget::Both {
                    hedger.bind(tape, store)
                } else {
                    hedger.bind_frozen(tape, store)
                };
                pl_on(tape, hedger, &hb, obj, &path)?
            }
            (_, PathInput::Paths(_)) => unreachable!("rejected above"),
        };
        tape.finalize(out);
        tape.backward_seeded(store, scale * w)?;
    }
    Ok(loss_value)
}

/// Seed of the `k`-th hedger training batch.
pub fn hedger_batch_seed(seed: u64, k: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::TRAIN), k as u64)
}

/// Seed of the generator batch in cycle `cycle`.
pub fn generator_batch_seed(seed: u64, cycle: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::GENERATOR_TRAIN), cycle as u64)
}

/// Seed of the fixed Brownian validation batch.
pub fn validation_seed(seed: u64) -> u64 {
    derive_seed(seed, stream::VALIDATION)
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistoryRow {
    pub epoch: usize,
    /// Mean training hedge loss over the epoch's hedger steps, measured
    /// before each step.
    pub hedger_loss: f64,
    /// Hedge loss the generator step ascended, before the step.
    pub generator_objective: Option<f64>,
    pub validation_cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DeepHedgingRun {
    pub store: ParamStore,
    pub hedger: HedgerPolicy,
    pub history: Vec<HistoryRow>,
}

fn clip(store: &mut ParamStore, range: core::ops::Range<usize>, max_norm: Option<f64>) {
    if let Some(m) = max_norm {
        clip_grad_norm(store, range, m);
    }
}

/// Trains a freshly initialised hedger on batches drawn from `source`.
pub fn train_deep_hedging(
    source: &dyn PathSource,
    obj: &Objective,
    arch: &HedgerArch,
    config: &TrainConfig,
) -> Result<DeepHedgingRun> {
    config.validate()?;
    obj.validate()?;
    let mut store = ParamStore::new();
    let hedger = HedgerPolicy::new(arch.clone(), "hedger", &mut store, config.seed)?;
    let mut opt = Adam::new(hedger.range(), config.lr_hedger);
    let mut tape = Tape::new();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batch = source.sample(config.paths_per_epoch, hedger_batch_seed(config.seed, epoch))?;
        store.zero_grad();
        let loss = loss_and_grad(&mut store, &hedger, &PathInput::Paths(&batch), obj, GradTarget::Hedger, 1.0, &mut tape)
            .map_err(|e| Error::NonFiniteLoss {
                epoch,
                detail: e.to_string(),
            })?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("hedge loss {loss} over {} paths", batch.batch()),
            });
        }
        clip(&mut store, hedger.range(), config.clip_norm);
        opt.step(&mut store).map_err(|e| Error::NonFiniteLoss {
            epoch,
            detail: e.to_string(),
        })?;
        history.push(HistoryRow {
            epoch,
            hedger_loss: loss,
            generator_objective: None,
            validation_cost: None,
        });
    }
    Ok(DeepHedgingRun { store, hedger, history })
}

/// Hedger weights retained by snapshot selection.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub epoch: usize,
    pub validation_cost: f64,
    pub hedger_params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AdversarialRun {
    /// Final weights of both players.
    pub store: ParamStore,
    pub hedger: HedgerPolicy,
    pub generator: GeneratorModel,
    /// Every snapshot that improved on the previous best, in order; the
    /// last one is the selected hedger.
    pub snapshots: Vec<Snapshot>,
    pub history: Vec<HistoryRow>,
    pub hedger_steps: usize,
    pub generator_steps: usize,
}

impl AdversarialRun {
    pub fn best(&self) -> &Snapshot {
        self.snapshots.last().expect("at least one snapshot is always taken")
    }

    /// The final store with the hedger replaced by the best snapshot.
    pub fn best_store(&self) -> ParamStore {
        let mut s = self.store.clone();
        s.params_mut()[self.hedger.range()].copy_from_slice(&self.best().hedger_params);
        s
    }
}

fn update_err(player: Player, cycle: usize) -> impl Fn(Error) -> Error {
    move |e| Error::NonFiniteUpdate {
        player,
        cycle,
        detail: e.to_string(),
    }
}

fn generated_noise(model: &GeneratorModel, steps: usize, batch: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..batch).map(|b| model.noise(steps, seed, b)).collect()
}

/// Alternating min-max training. Each cycle (one epoch) takes
/// `ttur_ratio` hedger steps on fresh generated paths, then one generator
/// step ascending the hedge loss on its own fresh batch with the hedger
/// frozen. Every `snapshot_every` cycles, and after the last, the hedger is
/// scored on a fixed GBM validation batch and kept if it is the best so far.
pub fn train_adversarial(
    obj: &Objective,
    hedger_arch: &HedgerArch,
    generator_arch: &GeneratorArch,
    s0: f64,
    config: &TrainConfig,
) -> Result<AdversarialRun> {
    config.validate()?;
    obj.validate()?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(invalid("initial price", format!("{s0}")));
    }
    let steps = obj.spec.maturity_steps;
    let dt = obj.spec.step_years;
    let mut store = ParamStore::new();
    let hedger = HedgerPolicy::new(hedger_arch.clone(), "hedger", &mut store, config.seed)?;
    let generator = GeneratorModel::new(*generator_arch, "generator", &mut store, config.seed)?;
    let mut h_opt = Adam::new(hedger.range(), config.lr_hedger);
    let mut g_opt = Adam::new(generator.range(), config.lr_generator);
    let validation = simulate_gbm(
        s0,
        config.validation_sigma,
        steps,
        dt,
        config.eval_paths,
        validation_seed(config.seed),
    )?;
    let mut tape = Tape::new();
    let mut history = Vec::with_capacity(config.epochs);
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let (mut hedger_steps, mut generator_steps) = (0, 0);

    for cycle in 0..config.epochs {
        let mut h_losses = 0.0;
        for j in 0..config.ttur_ratio {
            let k = cycle * config.ttur_ratio + j;
            let noise = generated_noise(&generator, steps, config.paths_per_epoch, hedger_batch_seed(config.seed, k));
            let input = PathInput::Generated {
                model: &generator,
                s0,
                noise: &noise,
            };
            store.zero_grad();
            let loss = loss_and_grad(&mut store, &hedger, &input, obj, GradTarget::Hedger, 1.0, &mut tape)
                .map_err(update_err(Player::Hedger, cycle))?;
            if !loss.is_finite() {
                return Err(update_err(Player::Hedger, cycle)(invalid("hedge loss", format!("{loss}"))));
            }
            clip(&mut store, hedger.range(), config.clip_norm);
            h_opt.step(&mut store).map_err(update_err(Player::Hedger, cycle))?;
            h_losses += loss;
            hedger_steps += 1;
        }

        let mut generator_objective = None;
        if !config.freeze_generator {
            let noise = generated_noise(
                &generator,
                steps,
                config.paths_per_epoch,
                generator_batch_seed(config.seed, cycle),
            );
            let input = PathInput::Generated {
                model: &generator,
                s0,
                noise: &noise,
            };
            store.zero_grad();
            let loss = loss_and_grad(&mut store, &hedger, &input, obj, GradTarget::Generator, -1.0, &mut tape)
                .map_err(update_err(Player::Generator, cycle))?;
            if !loss.is_finite() {
                return Err(update_err(Player::Generator, cycle)(invalid("hedge loss", format!("{loss}"))));
            }
            clip(&mut store, generator.range(), config.clip_norm);
            g_opt.step(&mut store).map_err(update_err(Player::Generator, cycle))?;
            generator_objective = Some(loss);
            generator_steps += 1;
        }

        let mut validation_cost = None;
        if (cycle + 1) % config.snapshot_every == 0 || cycle + 1 == config.epochs {
            let v = loss_value(&store, &hedger, &PathInput::Paths(&validation), obj)
                .map_err(update_err(Player::Hedger, cycle))?;
            if !v.is_finite() {
                return Err(update_err(Player::Hedger, cycle)(invalid("validation cost", format!("{v}"))));
            }
            validation_cost = Some(v);
            if snapshots.last().is_none_or(|s| v < s.validation_cost) {
                snapshots.push(Snapshot {
                    epoch: cycle,
                    validation_cost: v,
                    hedger_params: store.params()[hedger.range()].to_vec(),
                });
            }
        }
        history.push(HistoryRow {
            epoch: cycle,
            hedger_loss: h_losses / config.ttur_ratio as f64,
            generator_objective,
            validation_cost,
        });
    }
    Ok(AdversarialRun {
        store,
        hedger,
        generator,
        snapshots,
        history,
        hedger_steps,
        generator_steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalSummary {
    pub mean: f64,
    pub std: f64,
    pub costs: Vec<f64>,
}

/// Hedge cost of `strategy` over `trials` fresh batches from `source` (one
/// pass if the source is deterministic). Trial `t` uses a seed derived from
/// `(seed, t)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    strategy: &Strategy<'_>,
    source: &dyn PathSource,
    obj: &Objective,
    batch: usize,
    trials: usize,
    seed: u64,
) -> Result<EvalSummary> {
    if trials == 0 || batch == 0 {
        return Err(invalid("evaluation", "trials and batch must be >= 1"));
    }
    let runs = if source.is_deterministic() { 1 } else { trials };
    let base = derive_seed(seed, stream::EVAL);
    let mut costs = Vec::with_capacity(runs);
    for t in 0..runs {
        let paths = source.sample(batch, derive_seed(base, t as u64))?;
        let pls = paths
            .rows()
            .map(|p| strategy.pl(&obj.spec, &obj.cost, p, None))
            .collect::<Result<Vec<f64>>>()?;
        costs.push(risk::hedge_loss(&pls, &obj.utility)?);
    }
    let (mean, std) = mean_std(&costs);
    Ok(EvalSummary { mean, std, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruments::OptionKind;
    use crate::networks::FeatureSet;
    use crate::simulators::{FixedPaths, Model, Simulator};

    fn objective(n: usize, utility: UtilitySpec) -> Objective {
        Objective {
            spec: OptionSpec::new(OptionKind::EuropeanCall, 1.0, n, 1.0 / 250.0).unwrap(),
            utility,
            cost: CostSpec::frictionless(),
        }
    }

    fn small_arch() -> HedgerArch {
        HedgerArch {
            hidden: alloc::vec![8, 8],
            ..HedgerArch::default()
        }
    }

    fn gbm(n: usize, sigma: f64) -> Simulator {
        Simulator {
            model: Model::Gbm { sigma },
            s0: 1.0,
            steps: n,
            dt: 1.0 / 250.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            ttur_ratio: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr_hedger: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let full = TrainConfig {
            epochs: 5000,
            paths_per_epoch: 50_000,
            eval_paths: 10_000,
            ..TrainConfig::default()
        };
        assert!(full.validate().is_ok());
    }

    #[test]
    fn zero_vol_training_reaches_zero_loss() {
        let obj = objective(5, UtilitySpec::Erm { lambda: 1.0 });
        let cfg = TrainConfig {
            epochs: 20,
            paths_per_epoch: 16,
            ..TrainConfig::default()
        };
        let run = train_deep_hedging(&gbm(5, 0.0), &obj, &small_arch(), &cfg).unwrap();
        assert!(run.history.iter().all(|r| r.hedger_loss.abs() < 1e-3));
    }

    #[test]
    fn loss_curve_is_finite_and_improves() {
        let obj = objective(5, UtilitySpec::Erm { lambda: 1.0 });
        let cfg = TrainConfig {
            epochs: 60,
            paths_per_epoch: 64,
            lr_hedger: 1e-2,
            ..TrainConfig::default()
        };
        let run = train_deep_hedging(&gbm(5, 0.2), &obj, &small_arch(), &cfg).unwrap();
        assert!(run.history.iter().all(|r| r.hedger_loss.is_finite()));
        let (argmin, _) = run
            .history
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.hedger_loss.total_cmp(&b.1.hedger_loss))
            .unwrap();
        assert!(argmin > 0);
    }

    #[test]
    fn training_is_deterministic() {
        let obj = objective(4, UtilitySpec::Cvar { alpha: 0.5 });
        let cfg = TrainConfig {
            epochs: 5,
            paths_per_epoch: 32,
            ..TrainConfig::default()
        };
        let a = train_deep_hedging(&gbm(4, 0.2), &obj, &small_arch(), &cfg).unwrap();
        let b = train_deep_hedging(&gbm(4, 0.2), &obj, &small_arch(), &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.store.params(), b.store.params());
    }

    #[test]
    fn ttur_bookkeeping_and_snapshots() {
        let obj = objective(3, UtilitySpec::Erm { lambda: 1.0 });
        let cfg = TrainConfig {
            epochs: 100,
            paths_per_epoch: 4,
            eval_paths: 16,
            snapshot_every: 10,
            ..TrainConfig::default()
        };
        let ga = GeneratorArch {
            hidden_dim: 3,
            noise_dim: 2,
            ..GeneratorArch::default()
        };
        let run = train_adversarial(&obj, &small_arch(), &ga, 1.0, &cfg).unwrap();
        assert_eq!(run.hedger_steps, 500);
        assert_eq!(run.generator_steps, 100);
        assert_eq!(run.history.iter().filter(|r| r.validation_cost.is_some()).count(), 10);
        for w in run.snapshots.windows(2) {
            assert!(w[1].validation_cost < w[0].validation_cost);
            assert!(w[1].epoch > w[0].epoch);
        }
        let best = run.best_store();
        let v = loss_value(
            &best,
            &run.hedger,
            &PathInput::Paths(
                &simulate_gbm(1.0, 0.2, 3, 1.0 / 250.0, 16, validation_seed(cfg.seed)).unwrap(),
            ),
            &obj,
        )
        .unwrap();
        assert_eq!(v, run.best().validation_cost);
    }

    #[test]
    fn players_only_touch_their_own_parameters() {
        let obj = objective(3, UtilitySpec::Erm { lambda: 1.0 });
        let mut store = ParamStore::new();
        let h = HedgerPolicy::new(small_arch(), "hedger", &mut store, 1).unwrap();
        let g = GeneratorModel::new(GeneratorArch::default(), "generator", &mut store, 1).unwrap();
        let noise = generated_noise(&g, 3, 8, 5);
        let input = PathInput::Generated {
            model: &g,
            s0: 1.0,
            noise: &noise,
        };
        let mut tape = Tape::new();
        store.zero_grad();
        loss_and_grad(&mut store, &h, &input, &obj, GradTarget::Hedger, 1.0, &mut tape).unwrap();
        assert!(store.grads()[g.range()].iter().all(|&x| x == 0.0));
        assert!(store.grads()[h.range()].iter().any(|&x| x != 0.0));
        store.zero_grad();
        loss_and_grad(&mut store, &h, &input, &obj, GradTarget::Generator, -1.0, &mut tape).unwrap();
        assert!(store.grads()[h.range()].iter().all(|&x| x == 0.0));
        assert!(store.grads()[g.range()].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn batched_and_taped_hedger_gradients_agree() {
        for utility in [UtilitySpec::Erm { lambda: 3.0 }, UtilitySpec::Cvar { alpha: 0.7 }] {
            let obj = Objective {
                cost: CostSpec::new(1e-3).unwrap(),
                ..objective(6, utility)
            };
            let mut store = ParamStore::new();
            let h = HedgerPolicy::new(small_arch(), "hedger", &mut store, 2).unwrap();
            let paths = simulate_gbm(1.0, 0.2, 6, 1.0 / 250.0, 24, 4).unwrap();
            let mut tape = Tape::new();
            store.zero_grad();
            let a = loss_and_grad(&mut store, &h, &PathInput::Paths(&paths), &obj, GradTarget::Hedger, 0.5, &mut tape).unwrap();
            let fused = store.grads().to_vec();
            store.zero_grad();
            let b = loss_and_grad_taped(&mut store, &h, &PathInput::Paths(&paths), &obj, GradTarget::Hedger, 0.5, &mut tape)
                .unwrap();
            assert_eq!(a, b);
            for (x, y) in fused.iter().zip(store.grads()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn linearised_generator_gradient_matches_full_tape() {
        let cases = [
            (OptionKind::EuropeanCall, UtilitySpec::Erm { lambda: 5.0 }, FeatureSet::default()),
            (
                OptionKind::LookbackCall,
                UtilitySpec::Cvar { alpha: 0.6 },
                FeatureSet {
                    bs_delta_sigma: Some(0.2),
                    running_max: true,
                },
            ),
        ];
        for (kind, utility, features) in cases {
            let obj = Objective {
                spec: OptionSpec::new(kind, 1.0, 5, 1.0 / 250.0).unwrap(),
                utility,
                cost: CostSpec::new(1e-3).unwrap(),
            };
            let arch = HedgerArch {
                features,
                activation: crate::networks::Activation::Tanh,
                ..small_arch()
            };
            let mut store = ParamStore::new();
            let h = HedgerPolicy::new(arch, "hedger", &mut store, 2).unwrap();
            let g = GeneratorModel::new(GeneratorArch::default(), "generator", &mut store, 2).unwrap();
            for x in &mut store.params_mut()[g.range()] {
                *x += 0.01;
            }
            let noise = generated_noise(&g, 5, 16, 12);
            let input = PathInput::Generated {
                model: &g,
                s0: 1.0,
                noise: &noise,
            };
            let mut tape = Tape::new();
            store.zero_grad();
            let a = loss_and_grad(&mut store, &h, &input, &obj, GradTarget::Generator, -1.0, &mut tape).unwrap();
            let lin = store.grads().to_vec();
            store.zero_grad();
            let b = loss_and_grad_taped(&mut store, &h, &input, &obj, GradTarget::Generator, -1.0, &mut tape).unwrap();
            assert_eq!(a, b);
            assert!(lin[h.range()].iter().all(|&x| x == 0.0));
            for (i, (x, y)) in lin.iter().zip(store.grads()).enumerate() {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-3), "{}: {x} vs {y}", store.name_of(i));
            }
        }
    }

    #[test]
    fn frozen_generator_reduces_to_deep_hedging() {
        let obj = objective(4, UtilitySpec::Erm { lambda: 1.0 });
        let cfg = TrainConfig {
            epochs: 4,
            paths_per_epoch: 16,
            eval_paths: 8,
            ttur_ratio: 5,
            freeze_generator: true,
            seed: 3,
            ..TrainConfig::default()
        };
        let adv = train_adversarial(&obj, &small_arch(), &GeneratorArch::default(), 1.0, &cfg).unwrap();
        let dh_cfg = TrainConfig { epochs: 20, ..cfg };
        let dh = train_deep_hedging(&gbm(4, 0.2), &obj, &small_arch(), &dh_cfg).unwrap();
        assert_eq!(adv.generator_steps, 0);
        assert_eq!(&adv.store.params()[adv.hedger.range()], &dh.store.params()[dh.hedger.range()]);
    }

    #[test]
    fn evaluate_trials() {
        let obj = objective(5, UtilitySpec::Erm { lambda: 1.0 });
        let st = Strategy::bs_delta(0.2);
        let src = gbm(5, 0.2);
        let a = evaluate(&st, &src, &obj, 64, 1, 9).unwrap();
        let b = evaluate(&st, &src, &obj, 64, 1, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.std, 0.0);
        let fixed = FixedPaths(src.sample(32, 1).unwrap());
        let e = evaluate(&st, &fixed, &obj, 32, 20, 9).unwrap();
        assert_eq!(e.std, 0.0);
        assert!(matches!(evaluate(&st, &src, &obj, 64, 0, 9), Err(Error::Invalid { .. })));
    }
}
