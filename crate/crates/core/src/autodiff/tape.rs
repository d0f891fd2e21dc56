use alloc::vec::Vec;

use super::kernel::{self, Primitive};
use super::{Arith, ParamStore};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const,
    Param(u32),
    Prim(Primitive),
}

/// Append-only record of a scalar computation.
///
/// Node arguments always precede the node itself, so a single reverse sweep
/// propagates adjoints. Arguments and local partials are stored flat, node
/// `i` owning `args[starts[i]..starts[i + 1]]`.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<f64>,
    starts: Vec<u32>,
    args: Vec<u32>,
    partials: Vec<f64>,
    output: Option<Var>,
    scratch: Vec<f64>,
    adjoints: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            starts: alloc::vec![0],
            args: Vec::new(),
            partials: Vec::new(),
            output: None,
            scratch: Vec::new(),
            adjoints: Vec::new(),
        }
    }

    /// Drops every node but keeps the allocations.
    pub fn clear(&mut self) {
        self.ops.clear();
        self.values.clear();
        self.starts.clear();
        self.starts.push(0);
        self.args.clear();
        self.partials.clear();
        self.output = None;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn output(&self) -> Option<Var> {
        self.output
    }

    /// Marks `v` as the scalar loss node.
    pub fn finalize(&mut self, v: Var) {
        self.output = Some(v);
    }

    fn push_leaf(&mut self, op: Op, value: f64) -> Var {
        let idx = self.values.len();
        self.ops.push(op);
        self.values.push(value);
        self.starts.push(self.args.len() as u32);
        Var(idx as u32)
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push_leaf(Op::Const, value)
    }

    /// Records `prim` applied to `args`.
    pub fn apply(&mut self, prim: Primitive, args: &[Var]) -> Result<Var> {
        prim.check_arity(args.len())?;
        self.push(prim, args.iter().map(|v| v.0))
    }

    fn push(&mut self, prim: Primitive, args: impl Iterator<Item = u32>) -> Result<Var> {
        let node = self.values.len();
        let start = self.args.len();
        self.scratch.clear();
        for a in args {
            debug_assert!((a as usize) < node, "argument from a different tape");
            self.args.push(a);
            self.scratch.push(self.values[a as usize]);
        }
        let n = self.args.len() - start;
        self.partials.resize(start + n, 0.0);
        match kernel::compute(prim, &self.scratch, &mut self.partials[start..], node) {
            Ok(v) => {
                self.ops.push(Op::Prim(prim));
                self.values.push(v);
                self.starts.push(self.args.len() as u32);
                Ok(Var(node as u32))
            }
            Err(e) => {
                self.args.truncate(start);
                self.partials.truncate(start);
                Err(e)
            }
        }
    }

    fn push_infallible(&mut self, prim: Primitive, args: &[Var]) -> Var {
        self.push(prim, args.iter().map(|v| v.0))
            .expect("primitive without domain restriction")
    }

    /// Recomputes every node from the leaves, re-reading parameter leaves
    /// from `store`.
    pub fn replay(&mut self, store: &ParamStore) -> Result<()> {
        for node in 0..self.ops.len() {
            match self.ops[node] {
                Op::Const => {}
                Op::Param(p) => self.values[node] = store.params()[p as usize],
                Op::Prim(prim) => {
                    let (s, e) = (self.starts[node] as usize, self.starts[node + 1] as usize);
                    self.scratch.clear();
                    for &a in &self.args[s..e] {
                        self.scratch.push(self.values[a as usize]);
                    }
                    self.values[node] =
                        kernel::compute(prim, &self.scratch, &mut self.partials[s..e], node)?;
                }
            }
        }
        Ok(())
    }

    /// Adjoints of the output with respect to every node, seeded with `seed`.
    pub fn adjoints(&mut self, seed: f64) -> Result<&[f64]> {
        let out = self.output.ok_or(Error::NotFinalized)?;
        self.adjoints.clear();
        self.adjoints.resize(self.values.len(), 0.0);
        self.adjoints[out.index()] = seed;
        for node in (0..=out.index()).rev() {
            let g = self.adjoints[node];
            if g == 0.0 {
                continue;
            }
            let (s, e) = (self.starts[node] as usize, self.starts[node + 1] as usize);
            for k in s..e {
                self.adjoints[self.args[k] as usize] += g * self.partials[k];
            }
        }
        Ok(&self.adjoints)
    }

    /// Accumulates `∂output/∂param` into `store`'s gradient buffer.
    pub fn backward(&mut self, store: &mut ParamStore) -> Result<()> {
        self.backward_seeded(store, 1.0)
    }

    /// Like [`Tape::backward`] with the output adjoint set to `seed`, used to
    /// chain an outer derivative through a per-path tape.
    pub fn backward_seeded(&mut self, store: &mut ParamStore, seed: f64) -> Result<()> {
        let n = store.len();
        for op in &self.ops {
            if let Op::Param(p) = op {
                if *p as usize >= n {
                    return Err(Error::Shape {
                        what: "parameter leaf index",
                        expected: n,
                        got: *p as usize,
                    });
                }
            }
        }
        self.adjoints(seed)?;
        let grads = store.grads_mut();
        for (node, op) in self.ops.iter().enumerate() {
            if let Op::Param(p) = op {
                grads[*p as usize] += self.adjoints[node];
            }
        }
        Ok(())
    }
}

/// Runs `build` on a fresh tape and finalizes it at the returned node.
pub fn record<F>(build: F) -> Result<Tape>
where
    F: FnOnce(&mut Tape) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = build(&mut tape)?;
    tape.finalize(out);
    Ok(tape)
}

impl Arith for Tape {
    type V = Var;

    fn constant(&mut self, x: f64) -> Var {
        self.leaf(x)
    }

    fn param(&mut self, store: &ParamStore, index: usize) -> Var {
        self.push_leaf(Op::Param(index as u32), store.params()[index])
    }

    fn val(&self, v: Var) -> f64 {
        self.value(v)
    }

    fn add(&mut self, a: Var, b: Var) -> Var {
        self.push_infallible(Primitive::Add, &[a, b])
    }
    fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push_infallible(Primitive::Sub, &[a, b])
    }
    fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push_infallible(Primitive::Mul, &[a, b])
    }
    fn div(&mut self, a: Var, b: Var) -> Var {
        self.push_infallible(Primitive::Div, &[a, b])
    }
    fn neg(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Neg, &[a])
    }
    fn exp(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Exp, &[a])
    }
    fn ln(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Log, &[a])
    }
    fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.apply(Primitive::Sqrt, &[a])
    }
    fn max(&mut self, a: Var, b: Var) -> Var {
        self.push_infallible(Primitive::Max, &[a, b])
    }
    fn abs(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Abs, &[a])
    }
    fn tanh(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Tanh, &[a])
    }
    fn relu(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Relu, &[a])
    }
    fn sigmoid(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::Sigmoid, &[a])
    }
    fn norm_cdf(&mut self, a: Var) -> Var {
        self.push_infallible(Primitive::NormCdf, &[a])
    }
    fn sum(&mut self, xs: &[Var]) -> Var {
        self.push_infallible(Primitive::Sum, xs)
    }
    fn mean(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        self.apply(Primitive::Mean, xs)
    }
    fn dot(&mut self, bias: Var, w: &[Var], x: &[Var]) -> Result<Var> {
        if w.len() != x.len() {
            return Err(Error::Shape {
                what: "dot operands",
                expected: w.len(),
                got: x.len(),
            });
        }
        let args = core::iter::once(bias.0).chain(w.iter().zip(x).flat_map(|(a, b)| [a.0, b.0]));
        self.push(Primitive::Dot, args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Eval;

    #[test]
    fn square_value_and_derivative() {
        let mut store = ParamStore::new();
        store.register("x", 1, 1, [3.0]).unwrap();
        let mut tape = record(|t| {
            let x = t.param(&store, 0);
            Ok(t.mul(x, x))
        })
        .unwrap();
        assert_eq!(tape.value(tape.output().unwrap()), 9.0);
        tape.backward(&mut store).unwrap();
        assert_eq!(store.grads()[0], 6.0);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let tape = record(|t| {
            let z = t.leaf(0.0);
            Ok(t.exp(z))
        })
        .unwrap();
        assert_eq!(tape.value(tape.output().unwrap()), 1.0);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let mut store = ParamStore::new();
        store.register("x", 1, 1, [1.5]).unwrap();
        let mut tape = record(|t| {
            let _x = t.param(&store, 0);
            Ok(t.leaf(4.0))
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        assert_eq!(store.grads()[0], 0.0);
    }

    #[test]
    fn unfinalized_tape_is_usage_error() {
        let mut store = ParamStore::new();
        let mut tape = Tape::new();
        let a = tape.leaf(1.0);
        let _ = tape.exp(a);
        assert_eq!(tape.backward(&mut store), Err(Error::NotFinalized));
    }

    #[test]
    fn log_of_negative_reports_node() {
        let mut tape = Tape::new();
        let a = tape.leaf(1.0);
        let b = tape.neg(a);
        match tape.ln(b) {
            Err(Error::Domain { op, node, value }) => {
                assert_eq!(op, "log");
                assert_eq!(node, Some(2));
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        // the failed node is not left behind
        assert_eq!(tape.len(), 2);
        assert!(matches!(tape.sqrt(b), Err(Error::Domain { op: "sqrt", .. })));
    }

    #[test]
    fn unknown_primitive_and_bad_arity_fail_construction() {
        assert!(matches!("sin".parse::<Primitive>(), Err(Error::Unsupported(_))));
        let mut tape = Tape::new();
        let a = tape.leaf(1.0);
        assert!(matches!(
            tape.apply(Primitive::Add, &[a]),
            Err(Error::Arity { op: "add", .. })
        ));
        assert!(matches!(
            tape.apply(Primitive::Dot, &[a, a]),
            Err(Error::Arity { op: "dot", .. })
        ));
        let p: Primitive = "tanh".parse().unwrap();
        let t = tape.apply(p, &[a]).unwrap();
        assert_eq!(tape.value(t), libm::tanh(1.0));
    }

    #[test]
    fn subgradient_conventions() {
        let mut store = ParamStore::new();
        store.register("ab", 1, 2, [2.0, 2.0]).unwrap();
        let mut tape = record(|t| {
            let a = t.param(&store, 0);
            let b = t.param(&store, 1);
            Ok(t.max(a, b))
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        assert_eq!(store.grads(), &[1.0, 0.0]);

        let mut store = ParamStore::new();
        store.register("x", 1, 1, [0.0]).unwrap();
        let mut tape = record(|t| {
            let x = t.param(&store, 0);
            Ok(t.abs(x))
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        assert_eq!(store.grads()[0], 0.0);
    }

    #[test]
    fn backward_accumulates() {
        let mut store = ParamStore::new();
        store.register("x", 1, 1, [0.7]).unwrap();
        let mut tape = record(|t| {
            let x = t.param(&store, 0);
            let s = t.sigmoid(x);
            Ok(t.mul(s, x))
        })
        .unwrap();
        tape.backward(&mut store).unwrap();
        let once = store.grads()[0];
        tape.backward(&mut store).unwrap();
        assert_eq!(store.grads()[0], 2.0 * once);
        store.zero_grad();
        assert!(store.grads().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn replay_reproduces_values_and_tracks_params() {
        let mut store = ParamStore::new();
        store.register("w", 1, 3, [0.3, -0.2, 0.9]).unwrap();
        let build = |t: &mut Tape, s: &ParamStore| -> Result<Var> {
            let w: Vec<Var> = (0..3).map(|i| t.param(s, i)).collect();
            let x = [t.leaf(1.0), t.leaf(2.0)];
            let h = t.dot(w[0], &w[1..], &x)?;
            let h = t.tanh(h);
            let e = t.exp(h);
            let l = t.ln(e)?;
            let q = t.sqrt(e)?;
            Ok(t.add(q, l))
        };
        let mut tape = record(|t| build(t, &store)).unwrap();
        let before: Vec<f64> = tape.values.clone();
        tape.replay(&store).unwrap();
        assert_eq!(before, tape.values);

        store.params_mut()[0] = -0.4;
        tape.replay(&store).unwrap();
        let fresh = record(|t| build(t, &store)).unwrap();
        assert_eq!(fresh.values, tape.values);
    }

    #[test]
    fn tape_and_eval_agree_bitwise() {
        let xs = [0.3, -1.2, 2.5];
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(*x)).collect();
        let mut ev = Eval;
        let t_out = {
            let s = tape.sum(&vars);
            let m = tape.mean(&vars).unwrap();
            let d = tape.dot(s, &vars, &vars).unwrap();
            let c = tape.norm_cdf(m);
            let r = tape.relu(d);
            let q = tape.div(r, c);
            tape.value(q)
        };
        let e_out = {
            let s = ev.sum(&xs);
            let m = ev.mean(&xs).unwrap();
            let d = ev.dot(s, &xs, &xs).unwrap();
            let c = ev.norm_cdf(m);
            let r = ev.relu(d);
            ev.div(r, c)
        };
        assert_eq!(t_out.to_bits(), e_out.to_bits());
    }
}
