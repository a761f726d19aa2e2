use std::collections::HashMap;

use rand::Rng;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameters in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Invariant(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.values.push(value);
        Ok(ParamId(self.values.len() - 1))
    }

    /// Uniform `±√(6 / (fan_in + fan_out))` weights.
    pub fn glorot(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<ParamId> {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect();
        self.add(name, Tensor { rows: fan_in, cols: fan_out, data })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|t| t.data.len()).sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
}

impl Affine {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let w = store.glorot(&format!("{name}.w"), fan_in, fan_out, rng)?;
        let b = store.add(&format!("{name}.b"), Tensor::zeros(1, fan_out))?;
        Ok(Self { w, b })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNormParams {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Result<Self> {
        let gain = store.add(&format!("{name}.gain"), Tensor::filled(1, width, 1.0))?;
        let bias = store.add(&format!("{name}.bias"), Tensor::zeros(1, width))?;
        Ok(Self { gain, bias })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gain);
        let b = tape.param(store, self.bias);
        tape.layer_norm(x, g, b)
    }
}

/// `in → hidden → ReLU → out`.
#[derive(Debug, Clone, Copy)]
pub struct Mlp2 {
    pub l1: Affine,
    pub l2: Affine,
}

impl Mlp2 {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        hidden: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            l1: Affine::new(store, &format!("{name}.l1"), fan_in, hidden, rng)?,
            l2: Affine::new(store, &format!("{name}.l2"), hidden, fan_out, rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.l1.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.l2.forward(tape, store, h)
    }
}

/// Post-norm transformer block without positional encoding.
#[derive(Debug, Clone)]
pub struct AttentionBlock {
    pub width: usize,
    pub heads: usize,
    pub q: Affine,
    pub k: Affine,
    pub v: Affine,
    pub o: Affine,
    pub ln1: LayerNormParams,
    pub ffn: Mlp2,
    pub ln2: LayerNormParams,
}

impl AttentionBlock {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        width: usize,
        heads: usize,
        ffn_hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::Shape(format!("width {width} not divisible by {heads} heads")));
        }
        Ok(Self {
            width,
            heads,
            q: Affine::new(store, &format!("{name}.q"), width, width, rng)?,
            k: Affine::new(store, &format!("{name}.k"), width, width, rng)?,
            v: Affine::new(store, &format!("{name}.v"), width, width, rng)?,
            o: Affine::new(store, &format!("{name}.o"), width, width, rng)?,
            ln1: LayerNormParams::new(store, &format!("{name}.ln1"), width)?,
            ffn: Mlp2::new(store, &format!("{name}.ffn"), width, ffn_hidden, width, rng)?,
            ln2: LayerNormParams::new(store, &format!("{name}.ln2"), width)?,
        })
    }

    /// `x` is `len × width`; returns the same shape.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let width = tape.value(x).cols;
        if width != self.width {
            return Err(Error::Shape(format!("attention input width {width}, block width {}", self.width)));
        }
        let dh = self.width / self.heads;
        let q = self.q.forward(tape, store, x)?;
        let k = self.k.forward(tape, store, x)?;
        let v = self.v.forward(tape, store, x)?;
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let s = tape.matmul_bt(qh, kh)?;
            let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
            let a = tape.softmax_rows(s);
            outs.push(tape.matmul(a, vh)?);
        }
        let attn = tape.concat_cols(&outs)?;
        let attn = self.o.forward(tape, store, attn)?;
        let x1 = tape.add(x, attn)?;
        let x1 = self.ln1.forward(tape, store, x1)?;
        let f = self.ffn.forward(tape, store, x1)?;
        let x2 = tape.add(x1, f)?;
        self.ln2.forward(tape, store, x2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::zeros(1, 1)).unwrap();
        assert!(s.add("a", Tensor::zeros(1, 1)).is_err());
    }

    #[test]
    fn width_head_mismatch() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(AttentionBlock::new(&mut s, "t", 30, 4, 8, &mut rng), Err(Error::Shape(_))));
    }

    #[test]
    fn single_element_sequence() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let blk = AttentionBlock::new(&mut s, "t", 8, 2, 16, &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(1, 8, (0..8).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap());
        let y = blk.forward(&mut tape, &s, x).unwrap();
        assert_eq!(tape.value(y).shape(), [1, 8]);
        assert!(tape.value(y).data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn attention_is_permutation_equivariant() {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let blk = AttentionBlock::new(&mut s, "t", 8, 4, 16, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let perm = [3, 0, 4, 1, 2];
        let run = |order: &[usize]| {
            let mut tape = Tape::new();
            let data = order.iter().flat_map(|&i| rows[i].clone()).collect();
            let x = tape.leaf(Tensor::from_vec(order.len(), 8, data).unwrap());
            let y = blk.forward(&mut tape, &s, x).unwrap();
            tape.value(y).clone()
        };
        let base = run(&[0, 1, 2, 3, 4]);
        let permuted = run(&perm);
        for (pos, &i) in perm.iter().enumerate() {
            for c in 0..8 {
                assert!((permuted.at(pos, c) - base.at(i, c)).abs() < 1e-12);
            }
        }
    }
}
