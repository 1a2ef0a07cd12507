//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation eagerly: node values are computed at
//! construction, and [`Graph::backward`] walks the tape in reverse to produce
//! exact gradients for every node that depends on a parameter leaf.

use std::sync::Arc;

use crate::nn::tensor::{matmul_t, Tensor};
use crate::nn::NnError;
use crate::scalar::Scalar;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row partition of a stacked point matrix: sample `s` owns rows
/// `offsets[s]..offsets[s + 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segments {
    offsets: Arc<[usize]>,
}

impl Segments {
    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self, NnError> {
        if offsets.first() != Some(&0) || offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NnError::Shape(
                "segment offsets must start at 0 and be strictly increasing".into(),
            ));
        }
        Ok(Self { offsets: offsets.into() })
    }

    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Result<Self, NnError> {
        let mut offsets = vec![0];
        for len in lengths {
            offsets.push(offsets.last().unwrap() + len);
        }
        Self::from_offsets(offsets)
    }

    /// Number of segments (samples).
    pub fn count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of rows covered.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Min(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    AffineCols(Var, Vec<T>),
    LRelu(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Softplus(Var),
    Clamp(Var, T, T),
    SumCols(Var),
    Sum(Var),
    Mean(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SegmentMul(Var, Var, Segments),
    SegmentMaxPool(Var, Arc<[usize]>),
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    tracked: bool,
}

/// Recorded computation.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of a scalar loss with respect to every tracked node.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn of(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

fn shape_err<T>(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<T, NnError> {
    Err(NnError::Shape(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)))
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, tracked: bool) -> Var {
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Constant input; receives no gradient.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t, true)
    }

    /// Copies the current value of `v` in as a new constant (stop-gradient).
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.input(t)
    }

    fn unary(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(x).map(f);
        let tracked = self.tracked(x);
        self.push(op, value, tracked)
    }

    fn binary_same(
        &mut self,
        a: Var,
        b: Var,
        what: &str,
        op: Op<T>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Var, NnError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return shape_err(what, sa, sb);
        }
        let value = self.value(a).zip_map(self.value(b), f);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(op, value, tracked))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let value = matmul_t(self.value(a), false, self.value(b), false)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(Op::MatMul(a, b), value, tracked))
    }

    /// Adds a `1×C` row to every row of `x: N×C`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, NnError> {
        let (sx, sb) = (self.value(x).shape(), self.value(bias).shape());
        if sb.0 != 1 || sb.1 != sx.1 {
            return shape_err("add_bias", sx, sb);
        }
        let mut value = self.value(x).clone();
        let b = self.value(bias).data().to_vec();
        for r in 0..sx.0 {
            for (v, &bb) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bb;
            }
        }
        let tracked = self.tracked(x) || self.tracked(bias);
        Ok(self.push(Op::AddBias(x, bias), value, tracked))
    }

    /// `x · W + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    /// Element-wise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.binary_same(a, b, "min", Op::Min(a, b), |x, y| if y < x { y } else { x })
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -T::one())
    }

    /// Per-column affine map `y[:, j] = scale[j] * x[:, j] + shift[j]` with constant coefficients.
    pub fn affine_cols(&mut self, x: Var, scale: &[T], shift: &[T]) -> Result<Var, NnError> {
        let sx = self.value(x).shape();
        if scale.len() != sx.1 || shift.len() != sx.1 {
            return shape_err("affine_cols", sx, (1, scale.len()));
        }
        let mut value = self.value(x).clone();
        for r in 0..sx.0 {
            for ((v, &a), &b) in value.row_mut(r).iter_mut().zip(scale).zip(shift) {
                *v = a * *v + b;
            }
        }
        let tracked = self.tracked(x);
        Ok(self.push(Op::AffineCols(x, scale.to_vec()), value, tracked))
    }

    pub fn lrelu(&mut self, x: Var, slope: T) -> Var {
        self.unary(x, Op::LRelu(x, slope), |v| lrelu(v, slope))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), |v| v.exp())
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, Op::Log(x), |v| v.ln())
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Op::Softplus(x), softplus)
    }

    /// Clamp to `[lo, hi]`; gradient is zero outside the interval.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        self.unary(x, Op::Clamp(x, lo, hi), |v| v.max(lo).min(hi))
    }

    /// Row sums: `N×C → N×1`.
    pub fn sum_cols(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = (0..t.rows()).map(|r| t.row(r).iter().copied().sum()).collect();
        let value = Tensor::from_vec(t.rows(), 1, data).expect("shape");
        let tracked = self.tracked(x);
        self.push(Op::SumCols(x), value, tracked)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let tracked = self.tracked(x);
        self.push(Op::Sum(x), value, tracked)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.sum() / T::of(t.len() as f64));
        let tracked = self.tracked(x);
        self.push(Op::Mean(x), value, tracked)
    }

    /// Mean squared error between two same-shaped tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).rows(),
            None => return Err(NnError::Shape("concat of zero tensors".into())),
        };
        for &p in parts {
            if self.value(p).rows() != rows {
                return shape_err("concat_cols", self.value(parts[0]).shape(), self.value(p).shape());
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            let out = value.row_mut(r);
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                out[c0..c0 + src.len()].copy_from_slice(src);
                c0 += src.len();
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), value, tracked))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if start + len > t.cols() {
            return shape_err("slice_cols", t.shape(), (t.rows(), start + len));
        }
        let mut value = Tensor::zeros(t.rows(), len);
        for r in 0..t.rows() {
            value.row_mut(r).copy_from_slice(&t.row(r)[start..start + len]);
        }
        let tracked = self.tracked(x);
        Ok(self.push(Op::SliceCols(x, start), value, tracked))
    }

    /// Multiplies every row of segment `s` in `x: N×H` by row `s` of `gate: B×H`.
    pub fn segment_mul(&mut self, x: Var, gate: Var, seg: &Segments) -> Result<Var, NnError> {
        let (sx, sg) = (self.value(x).shape(), self.value(gate).shape());
        if sx.1 != sg.1 || sg.0 != seg.count() || sx.0 != seg.total() {
            return shape_err("segment_mul", sx, sg);
        }
        let mut value = self.value(x).clone();
        let g = self.value(gate);
        for s in 0..seg.count() {
            let grow = g.row(s).to_vec();
            for r in seg.range(s) {
                for (v, &gg) in value.row_mut(r).iter_mut().zip(&grow) {
                    *v *= gg;
                }
            }
        }
        let tracked = self.tracked(x) || self.tracked(gate);
        Ok(self.push(Op::SegmentMul(x, gate, seg.clone()), value, tracked))
    }

    /// Column-wise max over the rows of each segment: `N×K → B×K`.
    ///
    /// Returns the pooled node and, per output element, the row that attained
    /// the maximum (lowest row on ties).
    pub fn segment_max_pool(&mut self, x: Var, seg: &Segments) -> Result<(Var, Vec<usize>), NnError> {
        let t = self.value(x);
        if t.rows() != seg.total() {
            return shape_err("segment_max_pool", t.shape(), (seg.total(), t.cols()));
        }
        let k = t.cols();
        let (value, argmax) = max_pool_rows(t, seg, k);
        let tracked = self.tracked(x);
        let arg: Arc<[usize]> = argmax.clone().into();
        Ok((self.push(Op::SegmentMaxPool(x, arg), value, tracked), argmax))
    }

    /// Reverse pass from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, NnError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NnError::Shape(format!("loss must be 1x1, got {:?}", lv.shape())));
        }
        if !lv.item().is_finite() {
            return Err(NnError::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                grads[i] = Some(dy);
                continue;
            }
            self.propagate(node, &dy, &mut grads)?;
            grads[i] = Some(dy);
        }
        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if self.nodes[i].tracked && !g.all_finite() {
                    return Err(NnError::NonFinite(format!("gradient of node {i}")));
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, dy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<(), NnError> {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, g: Tensor<T>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot => *slot = Some(g),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    acc(*a, matmul_t(dy, false, val(*b), true)?);
                }
                if self.tracked(*b) {
                    acc(*b, matmul_t(val(*a), true, dy, false)?);
                }
            }
            Op::AddBias(x, b) => {
                if self.tracked(*b) {
                    let mut db = Tensor::zeros(1, dy.cols());
                    for r in 0..dy.rows() {
                        for (d, &g) in db.data_mut().iter_mut().zip(dy.row(r)) {
                            *d += g;
                        }
                    }
                    acc(*b, db);
                }
                acc(*x, dy.clone());
            }
            Op::Add(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.map(|g| -g));
            }
            Op::Mul(a, b) => {
                acc(*a, dy.zip_map(val(*b), |g, y| g * y));
                acc(*b, dy.zip_map(val(*a), |g, x| g * x));
            }
            Op::Min(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let mut ga = dy.clone();
                let mut gb = dy.clone();
                for i in 0..dy.len() {
                    if vb.data()[i] < va.data()[i] {
                        ga.data_mut()[i] = T::zero();
                    } else {
                        gb.data_mut()[i] = T::zero();
                    }
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::Scale(x, c) => acc(*x, dy.map(|g| g * *c)),
            Op::AddScalar(x) => acc(*x, dy.clone()),
            Op::AffineCols(x, scale) => {
                let mut g = dy.clone();
                for r in 0..g.rows() {
                    for (v, &a) in g.row_mut(r).iter_mut().zip(scale) {
                        *v *= a;
                    }
                }
                acc(*x, g);
            }
            Op::LRelu(x, slope) => {
                acc(*x, dy.zip_map(val(*x), |g, v| if v > T::zero() { g } else { g * *slope }))
            }
            Op::Sigmoid(x) => acc(*x, dy.zip_map(&node.value, |g, y| g * y * (T::one() - y))),
            Op::Tanh(x) => acc(*x, dy.zip_map(&node.value, |g, y| g * (T::one() - y * y))),
            Op::Exp(x) => acc(*x, dy.zip_map(&node.value, |g, y| g * y)),
            Op::Log(x) => acc(*x, dy.zip_map(val(*x), |g, v| g / v)),
            Op::Square(x) => acc(*x, dy.zip_map(val(*x), |g, v| g * (v + v))),
            Op::Softplus(x) => acc(*x, dy.zip_map(val(*x), |g, v| g * sigmoid(v))),
            Op::Clamp(x, lo, hi) => {
                acc(*x, dy.zip_map(val(*x), |g, v| if v < *lo || v > *hi { T::zero() } else { g }))
            }
            Op::SumCols(x) => {
                let (rows, cols) = val(*x).shape();
                let mut g = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let d = dy.get(r, 0);
                    g.row_mut(r).iter_mut().for_each(|v| *v = d);
                }
                acc(*x, g);
            }
            Op::Sum(x) => {
                let (rows, cols) = val(*x).shape();
                acc(*x, Tensor::filled(rows, cols, dy.item()));
            }
            Op::Mean(x) => {
                let (rows, cols) = val(*x).shape();
                acc(*x, Tensor::filled(rows, cols, dy.item() / T::of((rows * cols) as f64)));
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let (rows, cols) = val(p).shape();
                    if self.tracked(p) {
                        let mut g = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            g.row_mut(r).copy_from_slice(&dy.row(r)[c0..c0 + cols]);
                        }
                        acc(p, g);
                    }
                    c0 += cols;
                }
            }
            Op::SliceCols(x, start) => {
                let (rows, cols) = val(*x).shape();
                let mut g = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    g.row_mut(r)[*start..*start + dy.cols()].copy_from_slice(dy.row(r));
                }
                acc(*x, g);
            }
            Op::SegmentMul(x, gate, seg) => {
                let (vx, vg) = (val(*x), val(*gate));
                if self.tracked(*x) {
                    let mut gx = dy.clone();
                    for s in 0..seg.count() {
                        for r in seg.range(s) {
                            for (v, &gg) in gx.row_mut(r).iter_mut().zip(vg.row(s)) {
                                *v *= gg;
                            }
                        }
                    }
                    acc(*x, gx);
                }
                if self.tracked(*gate) {
                    let mut gg = Tensor::zeros(vg.rows(), vg.cols());
                    for s in 0..seg.count() {
                        let out = gg.row_mut(s);
                        for r in seg.range(s) {
                            for ((o, &d), &xv) in out.iter_mut().zip(dy.row(r)).zip(vx.row(r)) {
                                *o += d * xv;
                            }
                        }
                    }
                    acc(*gate, gg);
                }
            }
            Op::SegmentMaxPool(x, argmax) => {
                let (rows, cols) = val(*x).shape();
                let mut g = Tensor::zeros(rows, cols);
                for s in 0..dy.rows() {
                    for c in 0..cols {
                        let r = argmax[s * cols + c];
                        let cur = g.get(r, c);
                        g.set(r, c, cur + dy.get(s, c));
                    }
                }
                acc(*x, g);
            }
        }
        Ok(())
    }
}

/// Column-wise segment max with lowest-index tie breaking.
pub(crate) fn max_pool_rows<T: Scalar>(t: &Tensor<T>, seg: &Segments, k: usize) -> (Tensor<T>, Vec<usize>) {
    let mut value = Tensor::zeros(seg.count(), k);
    let mut argmax = vec![0usize; seg.count() * k];
    for s in 0..seg.count() {
        let range = seg.range(s);
        let first = range.start;
        let out = value.row_mut(s);
        out.copy_from_slice(t.row(first));
        let arg = &mut argmax[s * k..(s + 1) * k];
        arg.iter_mut().for_each(|a| *a = first);
        for r in range.skip(1) {
            for ((o, a), &v) in out.iter_mut().zip(arg.iter_mut()).zip(t.row(r)) {
                if v > *o {
                    *o = v;
                    *a = r;
                }
            }
        }
    }
    (value, argmax)
}

#[inline]
pub fn lrelu<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn softplus<T: Scalar>(v: T) -> T {
    // max(v, 0) + ln(1 + e^{-|v|})
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}
