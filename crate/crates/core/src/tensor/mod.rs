//! Tape-based reverse-mode differentiation over row-major f64 matrices.
//!
//! Every value is a 2-D [`Tensor`]; vectors are `1 × n` or `n × 1`. A forward
//! pass records ops on a [`Tape`], and [`Tape::backward`] walks it in reverse.

mod adam;
mod checkpoint;
mod nn;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, TensorFile, CHECKPOINT_FORMAT_VERSION};
pub use nn::{Affine, AttentionBlock, LayerNormParams, Mlp2, ParamId, ParamStore};

use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}×{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// `a · b`.
fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

/// `a · bᵀ`.
fn matmul_bt(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = arow.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `aᵀ · b`.
fn matmul_at(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let brow = b.row(k);
        for i in 0..a.cols {
            let aki = a.data[k * a.cols + i];
            if aki == 0.0 {
                continue;
            }
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aki * bv;
            }
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    LogSigmoid(Var),
    Exp(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Tensor, inv_std: Vec<f64> },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    RepeatRow(Var),
    MeanRows(Var),
    Sum(Var),
    Gather { x: Var, idx: Vec<usize>, w: Option<Vec<f64>> },
    ScatterAdd { x: Var, idx: Vec<usize>, w: Option<Vec<f64>> },
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation for later differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(ParamId, Var)>,
    branch_sig: u64,
}

/// Gradient of a scalar loss with respect to every parameter in a store.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { grads: store.values().iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect() }
    }

    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (g, o) in self.grads.iter_mut().zip(&other.grads) {
            for (a, b) in g.data.iter_mut().zip(&o.data) {
                *a += scale * b;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.iter().flat_map(|g| g.data.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn shape_err(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape()))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
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

    /// Hash of every piecewise branch taken (ReLU signs, clamp and min sides).
    /// Two evaluations with equal signatures lie on the same smooth piece.
    pub fn branch_signature(&self) -> u64 {
        self.branch_sig
    }

    fn note_branches(&mut self, bits: impl Iterator<Item = u8>) {
        let mut h = self.branch_sig ^ 0xcbf2_9ce4_8422_2325;
        for b in bits {
            h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.branch_sig = h;
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Parameter leaf; repeated calls for the same id share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols != tb.rows {
            return Err(shape_err("matmul", ta, tb));
        }
        let out = matmul(ta, tb);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols != tb.cols {
            return Err(shape_err("matmul_bt", ta, tb));
        }
        let out = matmul_bt(ta, tb);
        Ok(self.push(out, Op::MatMulBt(a, b)))
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta, tb));
        }
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor { rows: ta.rows, cols: ta.cols, data };
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_same(a, b, "minimum", f64::min, Op::Minimum(a, b))?;
        let bits: Vec<u8> = {
            let (ta, tb) = (self.value(a), self.value(b));
            ta.data.iter().zip(&tb.data).map(|(x, y)| (x <= y) as u8).collect()
        };
        self.note_branches(bits.into_iter());
        Ok(out)
    }

    /// `x + b` with `b` a `1 × cols` row broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        if tb.rows != 1 || tb.cols != tx.cols {
            return Err(shape_err("add_row", tx, tb));
        }
        let mut out = tx.clone();
        for r in 0..out.rows {
            for (o, &bv) in out.data[r * out.cols..(r + 1) * out.cols].iter_mut().zip(&tb.data) {
                *o += bv;
            }
        }
        Ok(self.push(out, Op::AddRow(x, b)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.push(out, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let out = tx.map(|v| v.max(0.0));
        let bits: Vec<u8> = tx.data.iter().map(|&v| (v > 0.0) as u8).collect();
        self.note_branches(bits.into_iter());
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let out = self.value(x).map(softplus);
        self.push(out, Op::Softplus(x))
    }

    /// `log σ(x)`, computed as `−softplus(−x)`.
    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| -softplus(-v));
        self.push(out, Op::LogSigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::exp);
        self.push(out, Op::Exp(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let tx = self.value(x);
        let out = tx.map(|v| v.clamp(lo, hi));
        let bits: Vec<u8> = tx.data.iter().map(|&v| (v < lo) as u8 | (((v > hi) as u8) << 1)).collect();
        self.note_branches(bits.into_iter());
        self.push(out, Op::Clamp(x, lo, hi))
    }

    /// Per-row normalization with learned `1 × cols` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let tx = self.value(x);
        let (tg, tb) = (self.value(gain), self.value(bias));
        if tg.shape() != [1, tx.cols] || tb.shape() != [1, tx.cols] {
            return Err(shape_err("layer_norm", tx, tg));
        }
        let n = tx.cols as f64;
        let mut xhat = Tensor::zeros(tx.rows, tx.cols);
        let mut out = Tensor::zeros(tx.rows, tx.cols);
        let mut inv_std = Vec::with_capacity(tx.rows);
        for r in 0..tx.rows {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for c in 0..tx.cols {
                let h = (row[c] - mean) * is;
                xhat.data[r * tx.cols + c] = h;
                out.data[r * tx.cols + c] = h * tg.data[c] + tb.data[c];
            }
        }
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, xhat, inv_std }))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let mut out = tx.clone();
        for r in 0..out.rows {
            let row = &mut out.data[r * out.cols..(r + 1) * out.cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        self.push(out, Op::SoftmaxRows(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows;
        if parts.iter().any(|&p| self.value(p).rows != rows) {
            return Err(Error::Shape("concat_cols: row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = r * cols;
            for &p in parts {
                let row = self.value(p).row(r);
                out.data[off..off + row.len()].copy_from_slice(row);
                off += row.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        if start + len > tx.cols {
            return Err(Error::Shape(format!("slice_cols {start}+{len} of {}", tx.cols)));
        }
        let mut out = Tensor::zeros(tx.rows, len);
        for r in 0..tx.rows {
            out.data[r * len..(r + 1) * len].copy_from_slice(&tx.row(r)[start..start + len]);
        }
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols;
        if parts.iter().any(|&p| self.value(p).cols != cols) {
            return Err(Error::Shape("concat_rows: column counts differ".into()));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(&self.value(p).data);
        }
        let rows = data.len() / cols.max(1);
        let out = Tensor { rows, cols, data };
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Broadcasts a `1 × cols` row to `rows × cols`.
    pub fn repeat_row(&mut self, x: Var, rows: usize) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows != 1 {
            return Err(Error::Shape(format!("repeat_row expects one row, got {}", tx.rows)));
        }
        let data = tx.data.iter().cloned().cycle().take(rows * tx.cols).collect();
        let out = Tensor { rows, cols: tx.cols, data };
        Ok(self.push(out, Op::RepeatRow(x)))
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let mut out = Tensor::zeros(1, tx.cols);
        for r in 0..tx.rows {
            for (o, v) in out.data.iter_mut().zip(tx.row(r)) {
                *o += v;
            }
        }
        let n = tx.rows.max(1) as f64;
        for o in &mut out.data {
            *o /= n;
        }
        self.push(out, Op::MeanRows(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).data.len().max(1) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// `out[e] = w[e] · x[idx[e]]` (rows).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize], w: Option<&[f64]>) -> Result<Var> {
        let tx = self.value(x);
        if idx.iter().any(|&i| i >= tx.rows) || w.is_some_and(|w| w.len() != idx.len()) {
            return Err(Error::Shape("gather_rows: index or weight out of range".into()));
        }
        let mut out = Tensor::zeros(idx.len(), tx.cols);
        for (e, &i) in idx.iter().enumerate() {
            let s = w.map_or(1.0, |w| w[e]);
            for (o, v) in out.data[e * tx.cols..(e + 1) * tx.cols].iter_mut().zip(tx.row(i)) {
                *o = s * v;
            }
        }
        let op = Op::Gather { x, idx: idx.to_vec(), w: w.map(<[f64]>::to_vec) };
        Ok(self.push(out, op))
    }

    /// `out[idx[e]] += w[e] · x[e]` into `rows` output rows.
    pub fn scatter_add(&mut self, x: Var, idx: &[usize], w: Option<&[f64]>, rows: usize) -> Result<Var> {
        let tx = self.value(x);
        if idx.len() != tx.rows || idx.iter().any(|&i| i >= rows) || w.is_some_and(|w| w.len() != idx.len()) {
            return Err(Error::Shape("scatter_add: index or weight out of range".into()));
        }
        let mut out = Tensor::zeros(rows, tx.cols);
        for (e, &i) in idx.iter().enumerate() {
            let s = w.map_or(1.0, |w| w[e]);
            for (o, v) in out.data[i * tx.cols..(i + 1) * tx.cols].iter_mut().zip(tx.row(e)) {
                *o += s * v;
            }
        }
        let op = Op::ScatterAdd { x, idx: idx.to_vec(), w: w.map(<[f64]>::to_vec) };
        Ok(self.push(out, op))
    }

    /// Reverse sweep from a `1 × 1` loss; returns one gradient per store parameter.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.shape() != [1, 1] {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        if !lt.item().is_finite() {
            return Err(Error::NonFinite(format!("loss = {}", lt.item())));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let out = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let ga = matmul_bt(&g, self.value(*b));
                    let gb = matmul_at(self.value(*a), &g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulBt(a, b) => {
                    // out = a bᵀ: da = g b, db = gᵀ a
                    let ga = matmul(&g, self.value(*b));
                    let gb = matmul_at(&g, self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|v| -v));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect(),
                    };
                    let gb = Tensor {
                        rows: g.rows,
                        cols: g.cols,
                        data: g.data.iter().zip(&ta.data).map(|(x, y)| x * y).collect(),
                    };
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(x, b) => {
                    let mut gb = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *b, gb);
                    acc(&mut grads, *x, g);
                }
                Op::Scale(x, s) => acc(&mut grads, *x, g.map(|v| v * s)),
                Op::Relu(x) => {
                    let tx = self.value(*x);
                    let data = g.data.iter().zip(&tx.data).map(|(&gv, &v)| if v > 0.0 { gv } else { 0.0 }).collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::Sigmoid(x) => {
                    let data = g.data.iter().zip(&out.data).map(|(gv, s)| gv * s * (1.0 - s)).collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::Softplus(x) => {
                    let tx = self.value(*x);
                    let data = g.data.iter().zip(&tx.data).map(|(gv, &v)| gv * sigmoid(v)).collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::LogSigmoid(x) => {
                    let tx = self.value(*x);
                    let data = g.data.iter().zip(&tx.data).map(|(gv, &v)| gv * sigmoid(-v)).collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::Exp(x) => {
                    let data = g.data.iter().zip(&out.data).map(|(gv, e)| gv * e).collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::Clamp(x, lo, hi) => {
                    let tx = self.value(*x);
                    let data = g
                        .data
                        .iter()
                        .zip(&tx.data)
                        .map(|(&gv, &v)| if v >= *lo && v <= *hi { gv } else { 0.0 })
                        .collect();
                    acc(&mut grads, *x, Tensor { rows: g.rows, cols: g.cols, data });
                }
                Op::Minimum(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let mut ga = Tensor::zeros(g.rows, g.cols);
                    let mut gb = Tensor::zeros(g.rows, g.cols);
                    for k in 0..g.data.len() {
                        if ta.data[k] <= tb.data[k] {
                            ga.data[k] = g.data[k];
                        } else {
                            gb.data[k] = g.data[k];
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let tg = self.value(*gain);
                    let cols = g.cols;
                    let n = cols as f64;
                    let mut gg = Tensor::zeros(1, cols);
                    let mut gbias = Tensor::zeros(1, cols);
                    let mut gx = Tensor::zeros(g.rows, cols);
                    for r in 0..g.rows {
                        let grow = g.row(r);
                        let hrow = xhat.row(r);
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for c in 0..cols {
                            gg.data[c] += grow[c] * hrow[c];
                            gbias.data[c] += grow[c];
                            let dh = grow[c] * tg.data[c];
                            s1 += dh;
                            s2 += dh * hrow[c];
                        }
                        for c in 0..cols {
                            let dh = grow[c] * tg.data[c];
                            gx.data[r * cols + c] = inv_std[r] * (dh - s1 / n - hrow[c] * s2 / n);
                        }
                    }
                    acc(&mut grads, *gain, gg);
                    acc(&mut grads, *bias, gbias);
                    acc(&mut grads, *x, gx);
                }
                Op::SoftmaxRows(x) => {
                    let mut gx = Tensor::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let (grow, srow) = (g.row(r), out.row(r));
                        let dot: f64 = grow.iter().zip(srow).map(|(a, b)| a * b).sum();
                        for c in 0..g.cols {
                            gx.data[r * g.cols + c] = srow[c] * (grow[c] - dot);
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let pc = self.value(p).cols;
                        let mut gp = Tensor::zeros(g.rows, pc);
                        for r in 0..g.rows {
                            gp.data[r * pc..(r + 1) * pc].copy_from_slice(&g.row(r)[off..off + pc]);
                        }
                        acc(&mut grads, p, gp);
                        off += pc;
                    }
                }
                Op::SliceCols(x, start) => {
                    let tx = self.value(*x);
                    let mut gx = Tensor::zeros(tx.rows, tx.cols);
                    for r in 0..g.rows {
                        gx.data[r * tx.cols + start..r * tx.cols + start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).data.len();
                        let gp = Tensor {
                            rows: self.value(p).rows,
                            cols: g.cols,
                            data: g.data[off..off + len].to_vec(),
                        };
                        acc(&mut grads, p, gp);
                        off += len;
                    }
                }
                Op::RepeatRow(x) => {
                    let mut gx = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in gx.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::MeanRows(x) => {
                    let tx = self.value(*x);
                    let n = tx.rows.max(1) as f64;
                    let data = (0..tx.rows).flat_map(|_| g.data.iter().map(|v| v / n)).collect();
                    acc(&mut grads, *x, Tensor { rows: tx.rows, cols: tx.cols, data });
                }
                Op::Sum(x) => {
                    let tx = self.value(*x);
                    acc(&mut grads, *x, Tensor::filled(tx.rows, tx.cols, g.item()));
                }
                Op::Gather { x, idx, w } => {
                    let tx = self.value(*x);
                    let mut gx = Tensor::zeros(tx.rows, tx.cols);
                    for (e, &i) in idx.iter().enumerate() {
                        let s = w.as_ref().map_or(1.0, |w| w[e]);
                        for (o, v) in gx.data[i * tx.cols..(i + 1) * tx.cols].iter_mut().zip(g.row(e)) {
                            *o += s * v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::ScatterAdd { x, idx, w } => {
                    let tx = self.value(*x);
                    let mut gx = Tensor::zeros(tx.rows, tx.cols);
                    for (e, &i) in idx.iter().enumerate() {
                        let s = w.as_ref().map_or(1.0, |w| w[e]);
                        for (o, v) in gx.data[e * tx.cols..(e + 1) * tx.cols].iter_mut().zip(g.row(i)) {
                            *o = s * v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
            }
        }

        let mut out = Gradients::zeros_like(store);
        for &(id, v) in &self.params {
            if let Some(g) = grads.get_mut(v.0).and_then(Option::take) {
                if g.data.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("gradient of {}", store.name(id))));
                }
                out.grads[id.0] = g;
            }
        }
        Ok(out)
    }
}
