//! Profit and loss of a hedged short option, and the utilities it is scored
//! with.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{Arith, Eval};
use crate::error::{invalid, Error, Result};

/// Proportional transaction cost per unit of traded notional.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostSpec {
    pub rate: f64,
}

impl CostSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(invalid("cost rate", format!("{rate} must be finite and >= 0")));
        }
        Ok(CostSpec { rate })
    }

    pub fn frictionless() -> Self {
        CostSpec { rate: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum UtilitySpec {
    /// Entropic risk measure with risk aversion `lambda`.
    Erm { lambda: f64 },
    /// Expected shortfall at confidence level `alpha`.
    Cvar { alpha: f64 },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Erm { lambda } if !(lambda > 0.0) || !lambda.is_finite() => {
                Err(invalid("ERM lambda", format!("{lambda} must be finite and > 0")))
            }
            UtilitySpec::Cvar { alpha } if !(0.0..1.0).contains(&alpha) => {
                Err(invalid("CVaR alpha", format!("{alpha} must lie in [0, 1)")))
            }
            _ => Ok(()),
        }
    }

    /// `ERM(10)`, `CVaR(0.95)`.
    pub fn label(&self) -> alloc::string::String {
        match *self {
            UtilitySpec::Erm { lambda } => format!("ERM({lambda})"),
            UtilitySpec::Cvar { alpha } => format!("CVaR({alpha})"),
        }
    }

    /// Whether the estimator is smooth in the sample (no selection kinks).
    pub fn is_smooth(&self) -> bool {
        matches!(self, UtilitySpec::Erm { .. })
    }
}

/// Terminal wealth of the option seller:
/// `-Z + Σ δ_i (S_{i+1} - S_i) - Σ_{i=0..n} c S_i |δ_i - δ_{i-1}|`
/// with `δ_{-1} = δ_n = 0`, so the final liquidation is charged.
pub fn pl_terminal_on<A: Arith>(
    a: &mut A,
    payoff: A::V,
    path: &[A::V],
    positions: &[A::V],
    cost: &CostSpec,
) -> Result<A::V> {
    let n = positions.len();
    if path.len() != n + 1 {
        return Err(Error::Shape {
            what: "price path for positions",
            expected: n + 1,
            got: path.len(),
        });
    }
    let moves: Vec<A::V> = path.windows(2).map(|w| a.sub(w[1], w[0])).collect();
    let neg_z = a.neg(payoff);
    let mut pl = a.dot(neg_z, positions, &moves)?;
    if cost.rate != 0.0 && n > 0 {
        let mut traded = Vec::with_capacity(n + 1);
        traded.push(a.abs(positions[0]));
        for i in 1..n {
            let d = a.sub(positions[i], positions[i - 1]);
            traded.push(a.abs(d));
        }
        traded.push(a.abs(positions[n - 1]));
        let zero = a.constant(0.0);
        let notional = a.dot(zero, path, &traded)?;
        let charge = a.mul_const(notional, cost.rate);
        pl = a.sub(pl, charge);
    }
    Ok(pl)
}

pub fn pl_terminal(payoff: f64, path: &[f64], positions: &[f64], cost: &CostSpec) -> Result<f64> {
    pl_terminal_on(&mut Eval, payoff, path, positions, cost)
}

/// `∂PL/∂δ_i` for [`pl_terminal`], using the same subgradient of `|·|`
/// at zero (0) as the recorded version.
pub fn pl_position_grad(path: &[f64], positions: &[f64], cost: &CostSpec) -> Result<Vec<f64>> {
    let n = positions.len();
    if path.len() != n + 1 {
        return Err(Error::Shape {
            what: "price path for positions",
            expected: n + 1,
            got: path.len(),
        });
    }
    let sign = |x: f64| {
        if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut g: Vec<f64> = path.windows(2).map(|w| w[1] - w[0]).collect();
    if cost.rate != 0.0 {
        // Trade i (at S_i) is δ_i - δ_{i-1}; trade n liquidates δ_{n-1}.
        let trade = |i: usize| -> f64 {
            match i {
                0 => positions[0],
                i if i == n => -positions[n - 1],
                i => positions[i] - positions[i - 1],
            }
        };
        for (i, gi) in g.iter_mut().enumerate() {
            let into = path[i] * sign(trade(i));
            let out = path[i + 1] * sign(trade(i + 1));
            *gi -= cost.rate * (into - out);
        }
    }
    Ok(g)
}

/// `-(1/λ) log mean exp(-λ x)`, shifted by the largest exponent. The shift
/// is a constant on the tape; its derivative cancels exactly.
pub fn erm_utility_on<A: Arith>(a: &mut A, samples: &[A::V], lambda: f64) -> Result<A::V> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    UtilitySpec::Erm { lambda }.validate()?;
    let shift = samples
        .iter()
        .map(|&x| -lambda * a.val(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<A::V> = samples
        .iter()
        .map(|&x| {
            let z = a.mul_const(x, -lambda);
            let z = a.add_const(z, -shift);
            a.exp(z)
        })
        .collect();
    let m = a.mean(&terms)?;
    let l = a.ln(m)?;
    let l = a.add_const(l, shift);
    Ok(a.mul_const(l, -1.0 / lambda))
}

/// Number of samples in the lower tail at confidence `alpha`:
/// `ceil((1 - alpha) N)`, at least one. Products within rounding error of an
/// integer are not pushed up by the ceiling.
pub fn cvar_tail_len(n: usize, alpha: f64) -> usize {
    let x = (1.0 - alpha) * n as f64;
    let r = libm::round(x);
    let k = if (x - r).abs() <= 1e-9 * (n as f64).max(1.0) {
        r
    } else {
        libm::ceil(x)
    };
    (k as usize).clamp(1, n.max(1))
}

/// Mean of the worst `ceil((1 - alpha) N)` samples. The selection is made on
/// values and held fixed, so gradients flow only through the selected
/// samples.
pub fn cvar_utility_on<A: Arith>(a: &mut A, samples: &[A::V], alpha: f64) -> Result<A::V> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    UtilitySpec::Cvar { alpha }.validate()?;
    let k = cvar_tail_len(samples.len(), alpha);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&i, &j| a.val(samples[i]).total_cmp(&a.val(samples[j])));
    let tail: Vec<A::V> = order[..k].iter().map(|&i| samples[i]).collect();
    a.mean(&tail)
}

pub fn utility_on<A: Arith>(a: &mut A, samples: &[A::V], utility: &UtilitySpec) -> Result<A::V> {
    match *utility {
        UtilitySpec::Erm { lambda } => erm_utility_on(a, samples, lambda),
        UtilitySpec::Cvar { alpha } => cvar_utility_on(a, samples, alpha),
    }
}

/// Hedging cost `-u(PL)`; lower is better.
pub fn hedge_loss_on<A: Arith>(a: &mut A, samples: &[A::V], utility: &UtilitySpec) -> Result<A::V> {
    let u = utility_on(a, samples, utility)?;
    Ok(a.neg(u))
}

pub fn erm_utility(samples: &[f64], lambda: f64) -> Result<f64> {
    erm_utility_on(&mut Eval, samples, lambda)
}

pub fn cvar_utility(samples: &[f64], alpha: f64) -> Result<f64> {
    cvar_utility_on(&mut Eval, samples, alpha)
}

pub fn utility(samples: &[f64], spec: &UtilitySpec) -> Result<f64> {
    utility_on(&mut Eval, samples, spec)
}

pub fn hedge_loss(samples: &[f64], spec: &UtilitySpec) -> Result<f64> {
    hedge_loss_on(&mut Eval, samples, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{record, ParamStore, Tape};
    use alloc::vec;

    #[test]
    fn pl_examples() {
        let c0 = CostSpec::frictionless();
        assert_eq!(pl_terminal(0.0, &[1.0, 1.2, 0.9], &[0.0, 0.0], &c0).unwrap(), 0.0);
        let pl = pl_terminal(0.0, &[1.0, 1.1], &[1.0], &c0).unwrap();
        assert!((pl - 0.1).abs() < 1e-14);
        let c = CostSpec::new(1e-4).unwrap();
        let pl = pl_terminal(0.0, &[1.0, 1.1], &[1.0], &c).unwrap();
        // direct expansion: 0.1 - 1e-4 * (1.0 * |1 - 0| + 1.1 * |0 - 1|)
        assert!((pl - 0.09979).abs() < 1e-14, "{pl}");
    }

    #[test]
    fn pl_shape_error() {
        assert!(matches!(
            pl_terminal(0.0, &[1.0, 1.1, 1.2], &[1.0], &CostSpec::frictionless()),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn pl_gradient_is_price_move_without_cost() {
        let path = [1.0, 1.05, 0.97, 1.02];
        let mut store = ParamStore::new();
        store.register("delta", 1, 3, [0.3, -0.7, 1.4]).unwrap();
        let mut tape = record(|t: &mut Tape| {
            let d: Vec<_> = (0..3).map(|i| t.param(&store, i)).collect();
            let s: Vec<_> = path.iter().map(|&p| t.leaf(p)).collect();
            let z = t.leaf(0.02);
            pl_terminal_on(t, z, &s, &d, &CostSpec::frictionless())
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        for i in 0..3 {
            assert_eq!(store.grads()[i], path[i + 1] - path[i]);
        }
    }

    #[test]
    fn position_gradient_matches_tape_with_costs() {
        let path = [1.0, 1.05, 0.97, 1.02, 1.01];
        let cases: [[f64; 4]; 3] = [[0.3, -0.7, 1.4, 0.2], [0.5, 0.5, 0.0, 0.0], [0.0, 0.2, 0.2, -0.1]];
        for deltas in cases {
            let mut store = ParamStore::new();
            store.register("delta", 1, 4, deltas).unwrap();
            let cost = CostSpec::new(2e-3).unwrap();
            let mut tape = record(|t: &mut Tape| {
                let d: Vec<_> = (0..4).map(|i| t.param(&store, i)).collect();
                let s: Vec<_> = path.iter().map(|&p| t.leaf(p)).collect();
                let z = t.leaf(0.02);
                pl_terminal_on(t, z, &s, &d, &cost)
            })
            .unwrap();
            tape.backward(&mut store).unwrap();
            let g = pl_position_grad(&path, &deltas, &cost).unwrap();
            for i in 0..4 {
                assert!((store.grads()[i] - g[i]).abs() < 1e-15, "{deltas:?} {i}");
            }
        }
    }

    #[test]
    fn erm_examples() {
        assert!((erm_utility(&[0.37; 5], 3.0).unwrap() - 0.37).abs() < 1e-15);
        let u = erm_utility(&[-1.0, 1.0], 1.0).unwrap();
        assert!((u + libm::log(libm::cosh(1.0))).abs() < 1e-14);
        assert!((u + 0.433781).abs() < 1e-6);
        let xs = [0.3, -0.2, 0.05, 0.9, -1.3];
        let mean = xs.iter().sum::<f64>() / 5.0;
        assert!((erm_utility(&xs, 1e-6).unwrap() - mean).abs() < 1e-4);
    }

    #[test]
    fn erm_is_stable_for_large_exponents() {
        let u = erm_utility(&[-50.0, 0.0], 100.0).unwrap();
        assert!(u.is_finite());
        assert!((u - (-50.0 - libm::log(0.5) / 100.0)).abs() < 1e-9);
    }

    #[test]
    fn cvar_examples() {
        let xs = [0.3, -0.2, 0.05, 0.9];
        assert!((cvar_utility(&xs, 0.0).unwrap() - 0.2625).abs() < 1e-15);
        assert_eq!(cvar_utility(&[0.4; 7], 0.9).unwrap(), 0.4);
        assert_eq!(cvar_utility(&[-4.0, -3.0, -2.0, -1.0], 0.75).unwrap(), -4.0);
        assert_eq!(cvar_utility(&[-1.0, -3.0, -2.0, -4.0], 0.5).unwrap(), -3.5);
    }

    #[test]
    fn tail_len_is_robust_to_rounding() {
        assert_eq!(cvar_tail_len(100, 0.95), 5);
        assert_eq!(cvar_tail_len(10, 0.9), 1);
        assert_eq!(cvar_tail_len(4, 0.75), 1);
        assert_eq!(cvar_tail_len(3, 0.9), 1);
        assert_eq!(cvar_tail_len(7, 0.5), 4);
        assert_eq!(cvar_tail_len(5, 0.0), 5);
        assert_eq!(cvar_tail_len(1, 0.99), 1);
    }

    #[test]
    fn hedge_loss_examples() {
        for u in [UtilitySpec::Erm { lambda: 10.0 }, UtilitySpec::Cvar { alpha: 0.9 }] {
            assert_eq!(hedge_loss(&[0.0; 4], &u).unwrap(), 0.0);
            assert!((hedge_loss(&[-0.25; 4], &u).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn utility_errors() {
        assert_eq!(erm_utility(&[], 1.0), Err(Error::EmptySample));
        assert_eq!(cvar_utility(&[], 0.5), Err(Error::EmptySample));
        assert!(erm_utility(&[1.0], 0.0).is_err());
        assert!(cvar_utility(&[1.0], 1.0).is_err());
        assert!(CostSpec::new(-1e-4).is_err());
    }

    fn fd_check(samples: &[f64], u: UtilitySpec) {
        let mut store = ParamStore::new();
        store.register("x", 1, samples.len(), samples.iter().copied()).unwrap();
        let mut tape = record(|t| {
            let xs: Vec<_> = (0..samples.len()).map(|i| t.param(&store, i)).collect();
            utility_on(t, &xs, &u)
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        let h = 1e-6;
        for i in 0..samples.len() {
            let mut up = samples.to_vec();
            let mut dn = samples.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (utility(&up, &u).unwrap() - utility(&dn, &u).unwrap()) / (2.0 * h);
            let g = store.grads()[i];
            assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()), "{u:?} i={i}: fd {fd} ad {g}");
        }
    }

    #[test]
    fn utility_gradients_match_finite_differences() {
        let xs = vec![0.31, -0.22, 0.05, 0.93, -1.3, 0.4, -0.07, 0.66, -0.51, 0.12];
        fd_check(&xs, UtilitySpec::Erm { lambda: 1.0 });
        fd_check(&xs, UtilitySpec::Erm { lambda: 10.0 });
        fd_check(&xs, UtilitySpec::Cvar { alpha: 0.7 });
        fd_check(&xs, UtilitySpec::Cvar { alpha: 0.0 });
    }
}
