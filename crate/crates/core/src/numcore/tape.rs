//! Reverse-mode gradient tape.
//!
//! Every operation appends a node holding its output value. Nodes that do
//! not depend on a variable or parameter are marked constant and skipped
//! during the backward sweep.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::kernels::{gemm_acc, gemm_acc_at, gemm_acc_bt};
use super::{mismatch, NumError, ParamGrads, ParamId, ParamStore, SparseMatrix, Tensor};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Row layout shared by time-wise and graph-wise operators: rows are ordered
/// `(batch, time, lane)` with `lane` fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayout {
    pub batches: usize,
    pub time: usize,
    pub lanes: usize,
}

impl ConvLayout {
    pub fn rows(&self) -> usize {
        self.batches * self.time * self.lanes
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    CausalConv { x: Var, w: Var, layout: ConvLayout },
    Aggregate { x: Var, m: SparseMatrix, layout: ConvLayout },
    ReduceSum { x: Var, axis: usize, mean: bool },
    SumAll { x: Var, mean: bool },
    GatherRows { x: Var, idx: Vec<usize> },
    Concat { xs: Vec<Var>, axis: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'a> {
    params: Option<&'a ParamStore>,
    nodes: Vec<Node>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Grads {
    nodes: Vec<Option<Tensor>>,
    params: ParamGrads,
}

impl Grads {
    /// Gradient of the loss with respect to a variable leaf.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    pub fn params(&self) -> &ParamGrads {
        &self.params
    }

    pub fn into_params(self) -> ParamGrads {
        self.params
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            params: None,
            nodes: Vec::new(),
        }
    }

    pub fn with_params(params: &'a ParamStore) -> Self {
        Self {
            params: Some(params),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var, NumError> {
        if !value.is_finite() {
            return Err(NumError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input whose gradient is reported by [`Grads::wrt`].
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf bound to a parameter of the attached store.
    pub fn param(&mut self, id: ParamId) -> Var {
        let store = self.params.expect("tape has no parameter store attached");
        self.nodes.push(Node {
            value: store.get(id).clone(),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", format!("{:?} x {:?}", sa, sb)));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), ng)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip_map(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, NumError> {
        self.same_shape(op_name, a, b)?;
        let va = self.value(a);
        let data = va.data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        let ng = self.needs(a) || self.needs(b);
        self.push(op_name, t, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.zip_map("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.zip_map("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.zip_map("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `x[r×c] + b[c]`, the bias broadcast of a linear layer.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, NumError> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        let c = self.value(x).cols();
        if sx.len() != 2 || self.value(b).len() != c {
            return Err(mismatch("add_row", format!("{:?} + {:?}", sx, sb)));
        }
        let bias = self.value(b).data();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_mut(c) {
            for (v, bv) in row.iter_mut().zip(bias) {
                *v += bv;
            }
        }
        let t = Tensor::new(sx.to_vec(), data)?;
        let ng = self.needs(x) || self.needs(b);
        self.push("add_row", t, Op::AddRow(x, b), ng)
    }

    fn map(&mut self, op_name: &'static str, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, NumError> {
        let vx = self.value(x);
        let data = vx.data().iter().map(|&v| f(v)).collect();
        let t = Tensor::new(vx.shape().to_vec(), data)?;
        let ng = self.needs(x);
        self.push(op_name, t, op, ng)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var, NumError> {
        self.map("scale", x, |v| v * s, Op::Scale(x, s))
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Result<Var, NumError> {
        self.map("add_scalar", x, |v| v + s, Op::AddScalar(x))
    }

    /// Rectifier. The subgradient at exactly zero is taken as zero.
    pub fn relu(&mut self, x: Var) -> Result<Var, NumError> {
        self.map("relu", x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NumError> {
        self.map("sigmoid", x, |v| 1.0 / (1.0 + math::exp(-v)), Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, NumError> {
        self.map("exp", x, math::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var, NumError> {
        self.map("log", x, math::ln, Op::Log(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var, NumError> {
        self.map("square", x, |v| v * v, Op::Square(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var, NumError> {
        self.map("clamp", x, |v| v.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    /// Causal 1-D convolution along the time axis of `layout`.
    ///
    /// `x` is `[rows × c_in]`, `w` is `[k × c_in × c_out]`. The input is
    /// zero-padded on the past side only, so the output row at time `t`
    /// depends on inputs at times `t-k+1 ..= t`. `w[k-1]` multiplies the
    /// current step and `w[0]` the oldest.
    pub fn causal_conv1d(&mut self, x: Var, w: Var, layout: ConvLayout) -> Result<Var, NumError> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 2 || sw.len() != 3 || sx[0] != layout.rows() || sw[1] != sx[1] {
            return Err(mismatch(
                "causal_conv1d",
                format!("x {:?}, kernel {:?}, layout {:?}", sx, sw, layout),
            ));
        }
        let (k, c_in, c_out) = (sw[0], sw[1], sw[2]);
        let rows = sx[0];
        let mut out = vec![0.0; rows * c_out];
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let block = layout.time * layout.lanes;
        for b in 0..layout.batches {
            for s in 0..k {
                let lag = k - 1 - s;
                if lag >= layout.time {
                    continue;
                }
                let span = (layout.time - lag) * layout.lanes;
                let x0 = b * block;
                let o0 = b * block + lag * layout.lanes;
                gemm_acc(
                    &xd[x0 * c_in..(x0 + span) * c_in],
                    &wd[s * c_in * c_out..(s + 1) * c_in * c_out],
                    &mut out[o0 * c_out..(o0 + span) * c_out],
                    span,
                    c_in,
                    c_out,
                );
            }
        }
        let ng = self.needs(x) || self.needs(w);
        self.push(
            "causal_conv1d",
            Tensor::new(vec![rows, c_out], out)?,
            Op::CausalConv { x, w, layout },
            ng,
        )
    }

    /// Graph aggregation `out[blk, i] = Σ_j m[i][j] · x[blk, j]` for every
    /// `(batch, time)` block, with `layout.lanes` equal to the node count.
    pub fn aggregate(&mut self, x: Var, m: &SparseMatrix, layout: ConvLayout) -> Result<Var, NumError> {
        let sx = self.shape(x);
        if sx.len() != 2 || sx[0] != layout.rows() || m.n_rows() != layout.lanes || m.n_cols() != layout.lanes {
            return Err(mismatch(
                "aggregate",
                format!("x {:?}, matrix {}x{}, layout {:?}", sx, m.n_rows(), m.n_cols(), layout),
            ));
        }
        let f = sx[1];
        let n = layout.lanes;
        let xd = self.value(x).data();
        let mut out = vec![0.0; sx[0] * f];
        for blk in 0..layout.batches * layout.time {
            let base = blk * n;
            for i in 0..n {
                let o = &mut out[(base + i) * f..(base + i + 1) * f];
                for &(j, wij) in m.row(i) {
                    let xr = &xd[(base + j) * f..(base + j + 1) * f];
                    for (ov, xv) in o.iter_mut().zip(xr) {
                        *ov += wij * xv;
                    }
                }
            }
        }
        let ng = self.needs(x);
        let shape = sx.to_vec();
        self.push(
            "aggregate",
            Tensor::new(shape, out)?,
            Op::Aggregate {
                x,
                m: m.clone(),
                layout,
            },
            ng,
        )
    }

    fn reduce(&mut self, x: Var, axis: usize, mean: bool) -> Result<Var, NumError> {
        let sx = self.shape(x).to_vec();
        if axis >= sx.len() {
            return Err(mismatch("reduce", format!("axis {} of {:?}", axis, sx)));
        }
        let (outer, len, inner) = split_axis(&sx, axis);
        let xd = self.value(x).data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &xd[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (d, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        if mean {
            let inv = 1.0 / len as f64;
            out.iter_mut().for_each(|v| *v *= inv);
        }
        let mut shape = sx;
        shape.remove(axis);
        let ng = self.needs(x);
        let name = if mean { "reduce_mean" } else { "reduce_sum" };
        self.push(name, Tensor::new(shape, out)?, Op::ReduceSum { x, axis, mean }, ng)
    }

    pub fn reduce_sum(&mut self, x: Var, axis: usize) -> Result<Var, NumError> {
        self.reduce(x, axis, false)
    }

    pub fn reduce_mean(&mut self, x: Var, axis: usize) -> Result<Var, NumError> {
        self.reduce(x, axis, true)
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var, NumError> {
        let s: f64 = self.value(x).data().iter().sum();
        let ng = self.needs(x);
        self.push("sum_all", Tensor::scalar(s), Op::SumAll { x, mean: false }, ng)
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var, NumError> {
        let v = self.value(x);
        let s: f64 = v.data().iter().sum::<f64>() / v.len() as f64;
        let ng = self.needs(x);
        self.push("mean_all", Tensor::scalar(s), Op::SumAll { x, mean: true }, ng)
    }

    /// Select rows (first-axis slices) by index; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, NumError> {
        let sx = self.shape(x).to_vec();
        if sx.is_empty() {
            return Err(mismatch("gather_rows", "scalar input".into()));
        }
        let width: usize = sx[1..].iter().product();
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(idx.len() * width);
        for &r in idx {
            if r >= sx[0] {
                return Err(mismatch("gather_rows", format!("row {} of {}", r, sx[0])));
            }
            out.extend_from_slice(&xd[r * width..(r + 1) * width]);
        }
        let mut shape = sx;
        shape[0] = idx.len();
        let ng = self.needs(x);
        self.push(
            "gather_rows",
            Tensor::new(shape, out)?,
            Op::GatherRows { x, idx: idx.to_vec() },
            ng,
        )
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var, NumError> {
        let first = self
            .nodes
            .get(xs.first().map_or(usize::MAX, |v| v.0))
            .ok_or_else(|| mismatch("concat", "no inputs".into()))?
            .value
            .shape()
            .to_vec();
        if axis >= first.len() {
            return Err(mismatch("concat", format!("axis {} of {:?}", axis, first)));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let ok = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !ok {
                return Err(mismatch("concat", format!("{:?} vs {:?} on axis {}", s, first, axis)));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_axis(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let len = self.shape(v)[axis];
                let d = self.value(v).data();
                out.extend_from_slice(&d[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let ng = xs.iter().any(|&v| self.needs(v));
        self.push(
            "concat",
            Tensor::new(shape, out)?,
            Op::Concat { xs: xs.to_vec(), axis },
            ng,
        )
    }

    /// Mean squared error between two equally shaped tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let d = self.sub(a, b)?;
        let sq = self.square(d)?;
        self.mean_all(sq)
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Grads, NumError> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 || lv.rank() > 1 {
            return Err(NumError::NotScalarLoss(lv.shape().to_vec()));
        }
        let n_params = self.params.map_or(0, ParamStore::len);
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut params = ParamGrads::with_len(n_params);
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                grads[i] = None;
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                Op::Param(id) => {
                    if let Some(g) = grads[i].take() {
                        params.accumulate(*id, &g);
                    }
                    continue;
                }
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backprop_node(i, &g, &mut grads);
        }
        // keep only leaf gradients for `wrt`
        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[i] = None;
            }
        }
        Ok(Grads { nodes: grads, params })
    }

    fn backprop_node(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()));
            f(slot.data_mut());
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (val(*a).shape(), val(*b).shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                acc(*a, &mut |da| gemm_acc_bt(gd, val(*b).data(), da, m, n, k));
                acc(*b, &mut |db| gemm_acc_at(val(*a).data(), gd, db, m, k, n));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, gd));
                acc(*b, &mut |d| add_into(d, gd));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, gd));
                acc(*b, &mut |d| d.iter_mut().zip(gd).for_each(|(x, g)| *x -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += gd[k] * vb[k];
                    }
                });
                acc(*b, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += gd[k] * va[k];
                    }
                });
            }
            Op::AddRow(x, b) => {
                acc(*x, &mut |d| add_into(d, gd));
                let c = val(*b).len();
                acc(*b, &mut |d| {
                    for row in gd.chunks(c) {
                        add_into(d, row);
                    }
                });
            }
            Op::Scale(x, s) => acc(*x, &mut |d| d.iter_mut().zip(gd).for_each(|(v, g)| *v += s * g)),
            Op::AddScalar(x) => acc(*x, &mut |d| add_into(d, gd)),
            Op::Relu(x) => {
                let vx = val(*x).data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        if vx[k] > 0.0 {
                            d[k] += gd[k];
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += gd[k] * y[k] * (1.0 - y[k]);
                    }
                });
            }
            Op::Exp(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += gd[k] * y[k];
                    }
                });
            }
            Op::Log(x) => {
                let vx = val(*x).data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += gd[k] / vx[k];
                    }
                });
            }
            Op::Square(x) => {
                let vx = val(*x).data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        d[k] += 2.0 * vx[k] * gd[k];
                    }
                });
            }
            Op::Clamp(x, lo, hi) => {
                let vx = val(*x).data();
                acc(*x, &mut |d| {
                    for k in 0..d.len() {
                        if vx[k] >= *lo && vx[k] <= *hi {
                            d[k] += gd[k];
                        }
                    }
                });
            }
            Op::CausalConv { x, w, layout } => {
                let sw = val(*w).shape();
                let (k, c_in, c_out) = (sw[0], sw[1], sw[2]);
                let block = layout.time * layout.lanes;
                let xd = val(*x).data();
                let wd = val(*w).data();
                acc(*x, &mut |dx| {
                    for b in 0..layout.batches {
                        for s in 0..k {
                            let lag = k - 1 - s;
                            if lag >= layout.time {
                                continue;
                            }
                            let span = (layout.time - lag) * layout.lanes;
                            let x0 = b * block;
                            let o0 = b * block + lag * layout.lanes;
                            gemm_acc_bt(
                                &gd[o0 * c_out..(o0 + span) * c_out],
                                &wd[s * c_in * c_out..(s + 1) * c_in * c_out],
                                &mut dx[x0 * c_in..(x0 + span) * c_in],
                                span,
                                c_out,
                                c_in,
                            );
                        }
                    }
                });
                acc(*w, &mut |dw| {
                    for b in 0..layout.batches {
                        for s in 0..k {
                            let lag = k - 1 - s;
                            if lag >= layout.time {
                                continue;
                            }
                            let span = (layout.time - lag) * layout.lanes;
                            let x0 = b * block;
                            let o0 = b * block + lag * layout.lanes;
                            gemm_acc_at(
                                &xd[x0 * c_in..(x0 + span) * c_in],
                                &gd[o0 * c_out..(o0 + span) * c_out],
                                &mut dw[s * c_in * c_out..(s + 1) * c_in * c_out],
                                span,
                                c_in,
                                c_out,
                            );
                        }
                    }
                });
            }
            Op::Aggregate { x, m, layout } => {
                let f = val(*x).cols();
                let n = layout.lanes;
                acc(*x, &mut |dx| {
                    for blk in 0..layout.batches * layout.time {
                        let base = blk * n;
                        for i in 0..n {
                            let go = &gd[(base + i) * f..(base + i + 1) * f];
                            for &(j, wij) in m.row(i) {
                                let dr = &mut dx[(base + j) * f..(base + j + 1) * f];
                                for (dv, gv) in dr.iter_mut().zip(go) {
                                    *dv += wij * gv;
                                }
                            }
                        }
                    }
                });
            }
            Op::ReduceSum { x, axis, mean } => {
                let (outer, len, inner) = split_axis(val(*x).shape(), *axis);
                let scale = if *mean { 1.0 / len as f64 } else { 1.0 };
                acc(*x, &mut |d| {
                    for o in 0..outer {
                        let src = &gd[o * inner..(o + 1) * inner];
                        for a in 0..len {
                            let dst = &mut d[(o * len + a) * inner..(o * len + a + 1) * inner];
                            for (dv, sv) in dst.iter_mut().zip(src) {
                                *dv += scale * sv;
                            }
                        }
                    }
                });
            }
            Op::SumAll { x, mean } => {
                let n = val(*x).len();
                let gv = if *mean { gd[0] / n as f64 } else { gd[0] };
                acc(*x, &mut |d| d.iter_mut().for_each(|v| *v += gv));
            }
            Op::GatherRows { x, idx } => {
                let sx = val(*x).shape();
                let width: usize = sx[1..].iter().product();
                acc(*x, &mut |d| {
                    for (r, &src) in idx.iter().enumerate() {
                        add_into(&mut d[src * width..(src + 1) * width], &gd[r * width..(r + 1) * width]);
                    }
                });
            }
            Op::Concat { xs, axis } => {
                let shape = node.value.shape();
                let (outer, total, inner) = split_axis(shape, *axis);
                let mut offset = 0;
                for &v in xs {
                    let len = val(v).shape()[*axis];
                    acc(v, &mut |d| {
                        for o in 0..outer {
                            let src = &gd[(o * total + offset) * inner..(o * total + offset + len) * inner];
                            add_into(&mut d[o * len * inner..(o + 1) * len * inner], src);
                        }
                    });
                    offset += len;
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Convenience 1-D causal convolution: `x` of length `L`, `kernel` of
/// length `k`, no bias.
pub fn causal_conv1d_seq(x: &[f64], kernel: &[f64]) -> Result<Vec<f64>, NumError> {
    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::new(vec![x.len(), 1], x.to_vec())?);
    let wv = tape.constant(Tensor::new(vec![kernel.len(), 1, 1], kernel.to_vec())?);
    let out = tape.causal_conv1d(
        xv,
        wv,
        ConvLayout {
            batches: 1,
            time: x.len(),
            lanes: 1,
        },
    )?;
    Ok(tape.value(out).data().to_vec())
}
