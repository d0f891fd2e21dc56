use alloc::string::ToString;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{norm_cdf, norm_pdf};

/// Operations a tape node may record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Max,
    Abs,
    Tanh,
    Relu,
    Sigmoid,
    NormCdf,
    Sum,
    Mean,
    /// Arguments are laid out as `[bias, w0, x0, w1, x1, ...]`.
    Dot,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Div => "div",
            Primitive::Neg => "neg",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sqrt => "sqrt",
            Primitive::Max => "max",
            Primitive::Abs => "abs",
            Primitive::Tanh => "tanh",
            Primitive::Relu => "relu",
            Primitive::Sigmoid => "sigmoid",
            Primitive::NormCdf => "norm_cdf",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::Dot => "dot",
        }
    }

    pub(crate) fn check_arity(self, n: usize) -> Result<()> {
        let (ok, expected) = match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::Max => {
                (n == 2, "2")
            }
            Primitive::Neg
            | Primitive::Exp
            | Primitive::Log
            | Primitive::Sqrt
            | Primitive::Abs
            | Primitive::Tanh
            | Primitive::Relu
            | Primitive::Sigmoid
            | Primitive::NormCdf => (n == 1, "1"),
            Primitive::Sum => (true, "any"),
            Primitive::Mean => (n >= 1, "at least 1"),
            Primitive::Dot => (n % 2 == 1, "an odd number of"),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Arity {
                op: self.name(),
                expected,
                got: n,
            })
        }
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "add" | "+" => Primitive::Add,
            "sub" | "-" => Primitive::Sub,
            "mul" | "*" => Primitive::Mul,
            "div" | "/" => Primitive::Div,
            "neg" => Primitive::Neg,
            "exp" => Primitive::Exp,
            "log" | "ln" => Primitive::Log,
            "sqrt" => Primitive::Sqrt,
            "max" => Primitive::Max,
            "abs" => Primitive::Abs,
            "tanh" => Primitive::Tanh,
            "relu" => Primitive::Relu,
            "sigmoid" => Primitive::Sigmoid,
            "norm_cdf" => Primitive::NormCdf,
            "sum" => Primitive::Sum,
            "mean" => Primitive::Mean,
            "dot" => Primitive::Dot,
            other => return Err(Error::Unsupported(other.to_string())),
        })
    }
}

pub(crate) fn ln_value(a: f64, node: Option<usize>) -> Result<f64> {
    if a < 0.0 || a.is_nan() {
        return Err(Error::Domain {
            op: "log",
            node,
            value: a,
        });
    }
    Ok(libm::log(a))
}

pub(crate) fn sqrt_value(a: f64, node: Option<usize>) -> Result<f64> {
    if a < 0.0 || a.is_nan() {
        return Err(Error::Domain {
            op: "sqrt",
            node,
            value: a,
        });
    }
    Ok(libm::sqrt(a))
}

#[inline]
pub(crate) fn abs_value(a: f64) -> f64 {
    if a < 0.0 {
        -a
    } else {
        a
    }
}

#[inline]
pub(crate) fn relu_value(a: f64) -> f64 {
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn sigmoid_value(a: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-a))
}

#[inline]
pub(crate) fn sum_value(xs: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    for x in xs {
        acc += x;
    }
    acc
}

#[inline]
pub(crate) fn dot_value(bias: f64, pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut acc = bias;
    for (w, x) in pairs {
        acc += w * x;
    }
    acc
}

/// Value and local partials of `prim` at `inputs`. `partials` has the same
/// length as `inputs`.
pub(crate) fn compute(
    prim: Primitive,
    inputs: &[f64],
    partials: &mut [f64],
    node: usize,
) -> Result<f64> {
    let v = match prim {
        Primitive::Add => {
            partials[0] = 1.0;
            partials[1] = 1.0;
            inputs[0] + inputs[1]
        }
        Primitive::Sub => {
            partials[0] = 1.0;
            partials[1] = -1.0;
            inputs[0] - inputs[1]
        }
        Primitive::Mul => {
            partials[0] = inputs[1];
            partials[1] = inputs[0];
            inputs[0] * inputs[1]
        }
        Primitive::Div => {
            let (a, b) = (inputs[0], inputs[1]);
            partials[0] = 1.0 / b;
            partials[1] = -a / (b * b);
            a / b
        }
        Primitive::Neg => {
            partials[0] = -1.0;
            -inputs[0]
        }
        Primitive::Exp => {
            let v = libm::exp(inputs[0]);
            partials[0] = v;
            v
        }
        Primitive::Log => {
            let v = ln_value(inputs[0], Some(node))?;
            partials[0] = 1.0 / inputs[0];
            v
        }
        Primitive::Sqrt => {
            let v = sqrt_value(inputs[0], Some(node))?;
            partials[0] = 0.5 / v;
            v
        }
        Primitive::Max => {
            if inputs[0] >= inputs[1] {
                partials[0] = 1.0;
                partials[1] = 0.0;
                inputs[0]
            } else {
                partials[0] = 0.0;
                partials[1] = 1.0;
                inputs[1]
            }
        }
        Primitive::Abs => {
            let a = inputs[0];
            partials[0] = if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            };
            abs_value(a)
        }
        Primitive::Tanh => {
            let v = libm::tanh(inputs[0]);
            partials[0] = 1.0 - v * v;
            v
        }
        Primitive::Relu => {
            partials[0] = if inputs[0] > 0.0 { 1.0 } else { 0.0 };
            relu_value(inputs[0])
        }
        Primitive::Sigmoid => {
            let v = sigmoid_value(inputs[0]);
            partials[0] = v * (1.0 - v);
            v
        }
        Primitive::NormCdf => {
            partials[0] = norm_pdf(inputs[0]);
            norm_cdf(inputs[0])
        }
        Primitive::Sum => {
            partials.fill(1.0);
            sum_value(inputs.iter().copied())
        }
        Primitive::Mean => {
            let n = inputs.len() as f64;
            partials.fill(1.0 / n);
            sum_value(inputs.iter().copied()) / n
        }
        Primitive::Dot => {
            partials[0] = 1.0;
            let rest = &inputs[1..];
            for (k, pair) in rest.chunks_exact(2).enumerate() {
                partials[1 + 2 * k] = pair[1];
                partials[2 + 2 * k] = pair[0];
            }
            dot_value(inputs[0], rest.chunks_exact(2).map(|p| (p[0], p[1])))
        }
    };
    Ok(v)
}
