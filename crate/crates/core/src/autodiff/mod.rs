//! Scalar reverse-mode differentiation.
//!
//! Model code is written once against the [`Arith`] trait and runs either on
//! a recording [`Tape`] (values plus local partials, differentiable) or on
//! [`Eval`] (plain `f64`, no recording). Both share the same value kernels,
//! so a taped forward pass and a plain one produce bit-identical numbers.

mod kernel;
mod optim;
mod params;
mod tape;

pub use kernel::Primitive;
pub use optim::{clip_grad_norm, Adam, Sgd};
pub use params::{ParamEntry, ParamStore};
pub use tape::{record, Tape, Var};

use crate::error::Result;

/// Arithmetic context over which models, payoffs and utilities are written.
pub trait Arith {
    type V: Copy;

    fn constant(&mut self, x: f64) -> Self::V;
    /// Leaf bound to `store.params()[index]`.
    fn param(&mut self, store: &ParamStore, index: usize) -> Self::V;
    fn val(&self, v: Self::V) -> f64;

    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sub(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn div(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn neg(&mut self, a: Self::V) -> Self::V;
    fn exp(&mut self, a: Self::V) -> Self::V;
    fn ln(&mut self, a: Self::V) -> Result<Self::V>;
    fn sqrt(&mut self, a: Self::V) -> Result<Self::V>;
    /// Ties pick the first argument.
    fn max(&mut self, a: Self::V, b: Self::V) -> Self::V;
    /// Subgradient 0 at the origin.
    fn abs(&mut self, a: Self::V) -> Self::V;
    fn tanh(&mut self, a: Self::V) -> Self::V;
    fn relu(&mut self, a: Self::V) -> Self::V;
    fn sigmoid(&mut self, a: Self::V) -> Self::V;
    /// Standard normal distribution function.
    fn norm_cdf(&mut self, a: Self::V) -> Self::V;
    fn sum(&mut self, xs: &[Self::V]) -> Self::V;
    fn mean(&mut self, xs: &[Self::V]) -> Result<Self::V>;
    /// `bias + Σ w[i]·x[i]`, a fused multiply-sum.
    fn dot(&mut self, bias: Self::V, w: &[Self::V], x: &[Self::V]) -> Result<Self::V>;

    fn add_const(&mut self, a: Self::V, c: f64) -> Self::V {
        let c = self.constant(c);
        self.add(a, c)
    }

    fn mul_const(&mut self, a: Self::V, c: f64) -> Self::V {
        let c = self.constant(c);
        self.mul(a, c)
    }
}

/// Plain floating-point evaluation. Nothing is recorded.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

impl Arith for Eval {
    type V = f64;

    #[inline]
    fn constant(&mut self, x: f64) -> f64 {
        x
    }
    #[inline]
    fn param(&mut self, store: &ParamStore, index: usize) -> f64 {
        store.params()[index]
    }
    #[inline]
    fn val(&self, v: f64) -> f64 {
        v
    }
    #[inline]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline]
    fn sub(&mut self, a: f64, b: f64) -> f64 {
        a - b
    }
    #[inline]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline]
    fn div(&mut self, a: f64, b: f64) -> f64 {
        a / b
    }
    #[inline]
    fn neg(&mut self, a: f64) -> f64 {
        -a
    }
    #[inline]
    fn exp(&mut self, a: f64) -> f64 {
        libm::exp(a)
    }
    fn ln(&mut self, a: f64) -> Result<f64> {
        kernel::ln_value(a, None)
    }
    fn sqrt(&mut self, a: f64) -> Result<f64> {
        kernel::sqrt_value(a, None)
    }
    #[inline]
    fn max(&mut self, a: f64, b: f64) -> f64 {
        if a >= b {
            a
        } else {
            b
        }
    }
    #[inline]
    fn abs(&mut self, a: f64) -> f64 {
        kernel::abs_value(a)
    }
    #[inline]
    fn tanh(&mut self, a: f64) -> f64 {
        libm::tanh(a)
    }
    #[inline]
    fn relu(&mut self, a: f64) -> f64 {
        kernel::relu_value(a)
    }
    #[inline]
    fn sigmoid(&mut self, a: f64) -> f64 {
        kernel::sigmoid_value(a)
    }
    #[inline]
    fn norm_cdf(&mut self, a: f64) -> f64 {
        crate::math::norm_cdf(a)
    }
    fn sum(&mut self, xs: &[f64]) -> f64 {
        kernel::sum_value(xs.iter().copied())
    }
    fn mean(&mut self, xs: &[f64]) -> Result<f64> {
        if xs.is_empty() {
            return Err(crate::Error::EmptySample);
        }
        Ok(kernel::sum_value(xs.iter().copied()) / xs.len() as f64)
    }
    fn dot(&mut self, bias: f64, w: &[f64], x: &[f64]) -> Result<f64> {
        if w.len() != x.len() {
            return Err(crate::Error::Shape {
                what: "dot operands",
                expected: w.len(),
                got: x.len(),
            });
        }
        Ok(kernel::dot_value(bias, w.iter().copied().zip(x.iter().copied())))
    }
}
