//! Random small hedging games whose parameter gradients are compared with
//! central differences of the plain loss.
#![allow(dead_code)]

use advhedge_core::autodiff::{ParamStore, Tape};
use advhedge_core::instruments::{OptionKind, OptionSpec};
use advhedge_core::networks::{Activation, FeatureSet, GeneratorArch, GeneratorModel, HedgerArch, HedgerPolicy, Squash};
use advhedge_core::risk::{CostSpec, UtilitySpec};
use advhedge_core::training::{loss_and_grad_taped, loss_value, GradTarget, Objective, PathInput};
use rand::{Rng, SeedableRng};

pub const BATCH: usize = 4;
pub const STEPS: usize = 3;
/// Gradients smaller than this are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradReport {
    pub utility: UtilitySpec,
    pub params: usize,
    pub max_rel: f64,
    pub worst: String,
}

pub fn check_instance(seed: u64, smooth: bool) -> GradReport {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let utility = if smooth {
        UtilitySpec::Erm {
            lambda: r.random_range(0.5..10.0),
        }
    } else {
        UtilitySpec::Cvar {
            alpha: r.random_range(0.3..0.9),
        }
    };
    let kind = if r.random_bool(0.5) {
        OptionKind::EuropeanCall
    } else {
        OptionKind::LookbackCall
    };
    let dt = 1.0 / 52.0;
    let obj = Objective {
        spec: OptionSpec::new(kind, r.random_range(0.95..1.05), STEPS, dt).unwrap(),
        utility,
        cost: CostSpec::new(r.random_range(0.0..1e-3)).unwrap(),
    };
    let arch = HedgerArch {
        hidden: vec![r.random_range(2..6), r.random_range(2..6)],
        // Entropic instances are kept smooth end to end; shortfall ones mix in
        // ReLU kinks.
        activation: if smooth || r.random_bool(0.5) {
            Activation::Tanh
        } else {
            Activation::Relu
        },
        squash: if r.random_bool(0.5) { Squash::Identity } else { Squash::Sigmoid },
        features: FeatureSet {
            bs_delta_sigma: r.random_bool(0.5).then_some(0.2),
            running_max: kind == OptionKind::LookbackCall || r.random_bool(0.3),
        },
    };
    let garch = GeneratorArch {
        hidden_dim: 3,
        noise_dim: 2,
        init_sigma: 0.2,
        dt,
    };
    let mut store = ParamStore::new();
    let hedger = HedgerPolicy::new(arch, "hedger", &mut store, seed).unwrap();
    let gen = GeneratorModel::new(garch, "generator", &mut store, seed).unwrap();
    // Move the generator off its Brownian head so every weight matters.
    for i in gen.range() {
        store.params_mut()[i] += r.random_range(-0.3..0.3);
    }
    let noise: Vec<Vec<f64>> = (0..BATCH).map(|b| gen.noise(STEPS, seed, b)).collect();
    let input = PathInput::Generated {
        model: &gen,
        s0: 1.0,
        noise: &noise,
    };

    let mut tape = Tape::new();
    store.zero_grad();
    loss_and_grad_taped(&mut store, &hedger, &input, &obj, GradTarget::Both, 1.0, &mut tape).unwrap();
    let grads = store.grads().to_vec();
    let base = loss_value(&store, &hedger, &input, &obj).unwrap();

    // Five-point stencil, truncation O(h⁴). A kink of the loss (payoff at
    // the strike, a running-max tie, a change of tail sample, a ReLU
    // boundary) inside the stencil spoils the estimate; the step is then
    // cut (at most twice, by 4) until two successive estimates agree, so the reference value is
    // a converged derivative.
    let h0 = if smooth { 1e-4 } else { 1e-5 };
    let mut max_rel = 0.0f64;
    let mut worst = String::new();
    for i in 0..store.len() {
        let x = store.params()[i];
        let mut at = |dx: f64| {
            store.params_mut()[i] = x + dx;
            loss_value(&store, &hedger, &input, &obj).unwrap()
        };
        let mut stencil = |h: f64| (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
        let agree_tol = 0.1 * if smooth { 1e-5 } else { 1e-4 };
        // Rounding allowance of a stencil at step `h`.
        let noise = |h: f64| 64.0 * f64::EPSILON * base.abs().max(1e-3) / h;
        let mut fd = stencil(h0);
        for k in 1..3 {
            let h = h0 / 4f64.powi(k);
            let next = stencil(h);
            if (next - fd).abs() <= agree_tol * next.abs().max(fd.abs()).max(FLOOR) + noise(h) {
                break;
            }
            fd = next;
        }
        store.params_mut()[i] = x;
        let rel = (grads[i] - fd).abs() / grads[i].abs().max(fd.abs()).max(FLOOR);
        if rel > max_rel {
            max_rel = rel;
            worst = format!("{} ad={} fd={}", store.name_of(i), grads[i], fd);
        }
    }
    GradReport {
        utility,
        params: store.len(),
        max_rel,
        worst,
    }
}
