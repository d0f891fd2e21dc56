//! Independent reference values for tests. Nothing here calls into the
//! library; formulas are written from first principles.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Zero-rate call price as `E[(S_T - K)^+]` under driftless GBM, integrated
/// over the standard normal by Simpson's rule on the exercise region, where
/// the integrand is smooth.
pub fn call_price_quadrature(s0: f64, strike: f64, sigma: f64, tau: f64) -> f64 {
    let v = sigma * tau.sqrt();
    let z_star = ((strike / s0).ln() + 0.5 * v * v) / v;
    let hi = z_star.max(0.0) + 12.0;
    simpson(
        |z| (s0 * (-0.5 * v * v + v * z).exp() - strike) * norm_pdf(z),
        z_star.max(-12.0),
        hi,
        4_000,
    )
}

/// One-step toy PL: `-max(X,0) + δX - c|δ|s0`, `X = μ + σξ`.
pub fn toy_pl(delta: f64, mu: f64, sigma: f64, cost: f64, s0: f64, xi: f64) -> f64 {
    let x = mu + sigma * xi;
    -x.max(0.0) + delta * x - cost * delta.abs() * s0
}

/// Entropic utility of the toy PL in closed form. Splitting on the sign of
/// `X` gives two truncated normal moment generating functions.
pub fn toy_erm_exact(delta: f64, mu: f64, sigma: f64, cost: f64, s0: f64, lambda: f64) -> f64 {
    let a = -lambda * delta;
    let b = lambda * (1.0 - delta);
    let neg = (a * mu + 0.5 * a * a * sigma * sigma).exp() * norm_cdf(-(mu + a * sigma * sigma) / sigma);
    let pos = (b * mu + 0.5 * b * b * sigma * sigma).exp() * norm_cdf((mu + b * sigma * sigma) / sigma);
    let m = (lambda * cost * delta.abs() * s0).exp() * (neg + pos);
    -m.ln() / lambda
}

/// `E[X 1{X <= x}]` for `X ~ N(μ, σ²)`.
fn lower_moment(mu: f64, sigma: f64, x: f64) -> f64 {
    let z = (x - mu) / sigma;
    mu * norm_cdf(z) - sigma * norm_pdf(z)
}

/// `E[X 1{X >= x}]` for `X ~ N(μ, σ²)`.
fn upper_moment(mu: f64, sigma: f64, x: f64) -> f64 {
    let z = (x - mu) / sigma;
    mu * (1.0 - norm_cdf(z)) + sigma * norm_pdf(z)
}

/// Expected shortfall utility (mean of the worst `1 - α` mass) of the toy
/// PL for `0 < δ < 1`. The PL without cost is tent-shaped in `X` with peak
/// 0 at `X = 0`, so its lower level sets are two normal tails; the level is
/// found by bisection.
pub fn toy_cvar_exact(delta: f64, mu: f64, sigma: f64, cost: f64, s0: f64, alpha: f64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0);
    let tail = 1.0 - alpha;
    let cuts = |t: f64| (t / delta, -t / (1.0 - delta));
    let mass = |t: f64| {
        let (x1, x2) = cuts(t);
        norm_cdf((x1 - mu) / sigma) + 1.0 - norm_cdf((x2 - mu) / sigma)
    };
    let (mut lo, mut hi) = (-50.0 * sigma - mu.abs(), 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (x1, x2) = cuts(0.5 * (lo + hi));
    let e = delta * lower_moment(mu, sigma, x1) - (1.0 - delta) * upper_moment(mu, sigma, x2);
    e / tail - cost * delta * s0
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Straight-line terminal wealth of the option seller: payoff, gains and
/// proportional costs including the final liquidation.
pub fn pl_reference(payoff: f64, path: &[f64], deltas: &[f64], cost: f64) -> f64 {
    let n = deltas.len();
    let mut w = -payoff;
    let mut prev = 0.0;
    for i in 0..=n {
        let d = if i < n { deltas[i] } else { 0.0 };
        w -= cost * path[i] * (d - prev).abs();
        if i < n {
            w += d * (path[i + 1] - path[i]);
        }
        prev = d;
    }
    w
}

/// Sample entropic utility without any shift.
pub fn erm_naive(x: &[f64], lambda: f64) -> f64 {
    let m = x.iter().map(|v| (-lambda * v).exp()).sum::<f64>() / x.len() as f64;
    -m.ln() / lambda
}

/// Mean of the `k` smallest samples.
pub fn lower_mean(x: &[f64], k: usize) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s[..k].iter().sum::<f64>() / k as f64
}
