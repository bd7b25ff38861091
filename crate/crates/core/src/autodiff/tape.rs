use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddScalar(usize),
    MulScalar(usize, T),
    Neg(usize),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    Exp(usize),
    Softplus(usize),
    Abs(usize),
    Square(usize),
    MaxScalar(usize, T),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Sum(usize),
    Mean(usize),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Neg(..) => "neg",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::Exp(..) => "exp",
            Op::Softplus(..) => "softplus",
            Op::Abs(..) => "abs",
            Op::Square(..) => "square",
            Op::MaxScalar(..) => "max_scalar",
            Op::Concat(..) => "concat",
            Op::Slice(..) => "slice",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
        }
    }

    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                vec![*a, *b]
            }
            Op::AddScalar(a)
            | Op::MulScalar(a, _)
            | Op::Neg(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Softplus(a)
            | Op::Abs(a)
            | Op::Square(a)
            | Op::MaxScalar(a, _)
            | Op::Slice(a, _)
            | Op::Sum(a)
            | Op::Mean(a) => vec![*a],
            Op::Concat(parts) => parts.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    /// Leaf flag for trainable inputs.
    requires_grad: bool,
    /// True when some ancestor (or the node itself) requires a gradient.
    needs_grad: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Fault {
    Shape {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    NonFinite {
        op: &'static str,
        node: usize,
    },
    Order(usize),
}

impl Fault {
    fn to_error(&self) -> Error {
        match *self {
            Fault::Shape { op, left, right } => Error::Shape { op, left, right },
            Fault::NonFinite { op, node } => Error::NonFinite { op, node },
            Fault::Order(i) => Error::TapeOrder(i),
        }
    }
}

/// Define-by-run record of primitive operations for reverse-mode
/// differentiation.
///
/// Operations never fail eagerly. The first shape mismatch, ordering
/// violation or non-finite result is latched and surfaced by
/// [`Tape::check`] and [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    fault: Option<Fault>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn broadcast_dim(a: usize, b: usize) -> Option<usize> {
    if a == b {
        Some(a)
    } else if a == 1 {
        Some(b)
    } else if b == 1 {
        Some(a)
    } else {
        None
    }
}

#[inline]
fn bidx(rows: usize, cols: usize, r: usize, c: usize) -> usize {
    let rr = if rows == 1 { 0 } else { r };
    let cc = if cols == 1 { 0 } else { c };
    rr * cols + cc
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::lit(30.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            fault: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Returns the first latched fault, if any.
    pub fn check(&self) -> Result<()> {
        match &self.fault {
            Some(f) => Err(f.to_error()),
            None => Ok(()),
        }
    }

    fn latch(&mut self, f: Fault) {
        if self.fault.is_none() {
            self.fault = Some(f);
        }
    }

    /// Latches an ordering fault when a handle does not belong to this tape
    /// and returns a placeholder node in its place.
    fn foreign(&mut self, vars: &[Var]) -> Option<Var> {
        let n = self.nodes.len();
        if vars.iter().any(|v| v.0 >= n) {
            self.latch(Fault::Order(n));
            Some(self.push(Tensor::zeros(1, 1), Op::Leaf))
        } else {
            None
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let idx = self.nodes.len();
        let mut needs_grad = false;
        for p in op.parents() {
            if p >= idx {
                self.latch(Fault::Order(idx));
            } else {
                needs_grad |= self.nodes[p].needs_grad;
            }
        }
        if !value.is_finite() {
            self.latch(Fault::NonFinite {
                op: op.name(),
                node: idx,
            });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad: false,
            needs_grad,
        });
        Var(idx)
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].requires_grad = requires_grad;
        self.nodes[v.0].needs_grad = requires_grad;
        v
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: &Tensor<T>) -> Var {
        self.leaf(value.clone(), true)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, value: T) -> Var {
        self.constant(Tensor::scalar(value))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        if let Some(v) = self.foreign(&[a, b]) {
            return v;
        }
        let (sa, sb) = (self.shape(a), self.shape(b));
        let shape = match (broadcast_dim(sa[0], sb[0]), broadcast_dim(sa[1], sb[1])) {
            (Some(r), Some(c)) => [r, c],
            _ => {
                self.latch(Fault::Shape {
                    op: op.name(),
                    left: sa,
                    right: sb,
                });
                return self.push(Tensor::zeros(sa[0], sa[1]), op);
            }
        };
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let data = if sa == sb {
            av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let mut data = Vec::with_capacity(shape[0] * shape[1]);
            for r in 0..shape[0] {
                for c in 0..shape[1] {
                    data.push(f(
                        av.data()[bidx(sa[0], sa[1], r, c)],
                        bv.data()[bidx(sb[0], sb[1], r, c)],
                    ));
                }
            }
            data
        };
        let out = Tensor::from_vec(shape[0], shape[1], data).expect("shape computed above");
        self.push(out, op)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        if let Some(v) = self.foreign(&[a]) {
            return v;
        }
        let out = self.nodes[a.0].value.map(f);
        self.push(out, op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        if let Some(v) = self.foreign(&[a, b]) {
            return v;
        }
        match self.nodes[a.0].value.matmul(&self.nodes[b.0].value) {
            Ok(out) => self.push(out, Op::MatMul(a.0, b.0)),
            Err(_) => {
                let (sa, sb) = (self.shape(a), self.shape(b));
                self.latch(Fault::Shape {
                    op: "matmul",
                    left: sa,
                    right: sb,
                });
                self.push(Tensor::zeros(sa[0], sb[1]), Op::MatMul(a.0, b.0))
            }
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a.0, b.0), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a.0, b.0), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a.0, b.0), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Div(a.0, b.0), |x, y| x / y)
    }

    pub fn add_scalar(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::AddScalar(a.0), |x| x + s)
    }

    pub fn mul_scalar(&mut self, a: Var, s: T) -> Var {
        self.unary(a, Op::MulScalar(a.0, s), |x| x * s)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg(a.0), |x| -x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a.0), |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a.0), |x| if x > T::zero() { x } else { T::zero() })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a.0), |x| x.exp())
    }

    /// `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a.0), softplus)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a.0), |x| x.abs())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a.0), |x| x * x)
    }

    /// Element-wise `max(x, floor)`; the gradient passes only where `x > floor`.
    pub fn max_scalar(&mut self, a: Var, floor: T) -> Var {
        self.unary(a, Op::MaxScalar(a.0, floor), |x| if x > floor { x } else { floor })
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        if let Some(v) = self.foreign(parts) {
            return v;
        }
        let rows = parts.first().map(|p| self.shape(*p)[0]).unwrap_or(0);
        let idx: Vec<usize> = parts.iter().map(|p| p.0).collect();
        if let Some(bad) = parts.iter().find(|p| self.shape(**p)[0] != rows) {
            let s = self.shape(*bad);
            self.latch(Fault::Shape {
                op: "concat",
                left: [rows, 0],
                right: s,
            });
            return self.push(Tensor::zeros(rows, 0), Op::Concat(idx));
        }
        let cols: usize = parts.iter().map(|p| self.shape(*p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                let v = &self.nodes[p.0].value;
                data.extend_from_slice(&v.data()[r * v.cols()..(r + 1) * v.cols()]);
            }
        }
        let out = Tensor::from_vec(rows, cols, data).expect("concat shape");
        self.push(out, Op::Concat(idx))
    }

    /// Columns `[start, end)`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Var {
        if let Some(v) = self.foreign(&[a]) {
            return v;
        }
        let s = self.shape(a);
        if start > end || end > s[1] {
            self.latch(Fault::Shape {
                op: "slice",
                left: s,
                right: [start, end],
            });
            return self.push(Tensor::zeros(s[0], 0), Op::Slice(a.0, 0));
        }
        let out = self.nodes[a.0].value.slice_cols(start, end);
        self.push(out, Op::Slice(a.0, start))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        if let Some(v) = self.foreign(&[a]) {
            return v;
        }
        let s = self.nodes[a.0].value.sum();
        self.push(Tensor::scalar(s), Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        if let Some(v) = self.foreign(&[a]) {
            return v;
        }
        let v = &self.nodes[a.0].value;
        let n = T::from_usize(v.len().max(1)).unwrap();
        let s = v.sum() / n;
        self.push(Tensor::scalar(s), Op::Mean(a.0))
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let n = self.neg(a);
        self.add_scalar(n, T::one())
    }

    /// `x·W + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add(xw, b)
    }

    /// Reverse sweep from a scalar `loss`. Every trainable leaf recorded
    /// before `loss` receives a gradient (zeros when unreachable).
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        self.check()?;
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; n];
        grads[loss.0] = Some(vec![T::one()]);
        let mut out: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            let Some(g) = grads[i].take() else {
                continue;
            };
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                if node.requires_grad {
                    let v = &node.value;
                    out[i] = Some(Tensor::from_vec(v.rows(), v.cols(), g).expect("grad shape"));
                }
                continue;
            }
            for p in node.op.parents() {
                if p >= i {
                    return Err(Error::TapeOrder(i));
                }
            }
            self.propagate(i, &g, &mut grads);
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && out[i].is_none() {
                out[i] = Some(Tensor::zeros(node.value.rows(), node.value.cols()));
            }
        }
        Ok(Gradients { grads: out })
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        let [rows, cols] = node.value.shape();
        let val = |k: usize| &self.nodes[k].value;
        let wants = |k: usize| self.nodes[k].needs_grad;

        fn slot<'a, T: Scalar>(grads: &'a mut [Option<Vec<T>>], k: usize, len: usize) -> &'a mut Vec<T> {
            grads[k].get_or_insert_with(|| vec![T::zero(); len])
        }

        // Accumulates `g ⊙ local` into parent `k`, reducing over broadcast dims.
        let acc_bcast = |grads: &mut [Option<Vec<T>>], k: usize, local: &dyn Fn(usize, usize) -> T| {
            let pv = val(k);
            let [pr, pc] = pv.shape();
            let buf = slot(grads, k, pv.len());
            if pr == rows && pc == cols {
                for r in 0..rows {
                    for c in 0..cols {
                        let j = r * cols + c;
                        buf[j] = buf[j] + g[j] * local(r, c);
                    }
                }
            } else {
                for r in 0..rows {
                    for c in 0..cols {
                        let j = bidx(pr, pc, r, c);
                        buf[j] = buf[j] + g[r * cols + c] * local(r, c);
                    }
                }
            }
        };

        let at = |k: usize, r: usize, c: usize| {
            let v = val(k);
            v.data()[bidx(v.rows(), v.cols(), r, c)]
        };

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if wants(a) {
                    // dA = G·Bᵀ
                    let buf = slot(grads, a, m * k);
                    T::gemm(m, n, k, g, false, bv.data(), true, T::one(), buf);
                }
                if wants(b) {
                    // dB = Aᵀ·G
                    let buf = slot(grads, b, k * n);
                    T::gemm(k, m, n, av.data(), true, g, false, T::one(), buf);
                }
            }
            Op::Add(a, b) => {
                if wants(a) {
                    acc_bcast(grads, a, &|_, _| T::one());
                }
                if wants(b) {
                    acc_bcast(grads, b, &|_, _| T::one());
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    acc_bcast(grads, a, &|_, _| T::one());
                }
                if wants(b) {
                    acc_bcast(grads, b, &|_, _| -T::one());
                }
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    acc_bcast(grads, a, &|r, c| at(b, r, c));
                }
                if wants(b) {
                    acc_bcast(grads, b, &|r, c| at(a, r, c));
                }
            }
            Op::Div(a, b) => {
                if wants(a) {
                    acc_bcast(grads, a, &|r, c| T::one() / at(b, r, c));
                }
                if wants(b) {
                    acc_bcast(grads, b, &|r, c| {
                        let d = at(b, r, c);
                        -at(a, r, c) / (d * d)
                    });
                }
            }
            Op::AddScalar(a) => unary_acc(grads, a, g, |_| T::one()),
            Op::MulScalar(a, s) => unary_acc(grads, a, g, |_| s),
            Op::Neg(a) => unary_acc(grads, a, g, |_| -T::one()),
            Op::Tanh(a) => unary_acc(grads, a, g, |j| T::one() - y[j] * y[j]),
            Op::Sigmoid(a) => unary_acc(grads, a, g, |j| y[j] * (T::one() - y[j])),
            Op::Relu(a) => {
                let x = val(a).data();
                unary_acc(grads, a, g, |j| if x[j] > T::zero() { T::one() } else { T::zero() })
            }
            Op::Exp(a) => unary_acc(grads, a, g, |j| y[j]),
            Op::Softplus(a) => {
                let x = val(a).data();
                unary_acc(grads, a, g, |j| sigmoid(x[j]))
            }
            Op::Abs(a) => {
                let x = val(a).data();
                unary_acc(grads, a, g, |j| {
                    if x[j] > T::zero() {
                        T::one()
                    } else if x[j] < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                })
            }
            Op::Square(a) => {
                let x = val(a).data();
                let two = T::lit(2.0);
                unary_acc(grads, a, g, |j| two * x[j])
            }
            Op::MaxScalar(a, floor) => {
                let x = val(a).data();
                unary_acc(grads, a, g, |j| if x[j] > floor { T::one() } else { T::zero() })
            }
            Op::Concat(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = val(p).cols();
                    if wants(p) {
                        let buf = slot(grads, p, rows * pc);
                        for r in 0..rows {
                            for c in 0..pc {
                                buf[r * pc + c] = buf[r * pc + c] + g[r * cols + offset + c];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::Slice(a, start) => {
                if wants(a) {
                    let pc = val(a).cols();
                    let buf = slot(grads, a, rows * pc);
                    for r in 0..rows {
                        for c in 0..cols {
                            buf[r * pc + start + c] = buf[r * pc + start + c] + g[r * cols + c];
                        }
                    }
                }
            }
            Op::Sum(a) => {
                let len = val(a).len();
                let buf = slot(grads, a, len);
                for v in buf.iter_mut() {
                    *v = *v + g[0];
                }
            }
            Op::Mean(a) => {
                let len = val(a).len();
                let share = g[0] / T::from_usize(len.max(1)).unwrap();
                let buf = slot(grads, a, len);
                for v in buf.iter_mut() {
                    *v = *v + share;
                }
            }
        }

        fn unary_acc<T: Scalar>(grads: &mut [Option<Vec<T>>], a: usize, g: &[T], local: impl Fn(usize) -> T) {
            let buf = grads[a].get_or_insert_with(|| vec![T::zero(); g.len()]);
            for (j, (b, &gj)) in buf.iter_mut().zip(g).enumerate() {
                *b = *b + gj * local(j);
            }
        }
    }
}
