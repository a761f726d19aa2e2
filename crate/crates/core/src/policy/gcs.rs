//! Graph-convolutional cut-selection network.
//!
//! Per-class embeddings, bipartite message passing between the variable side
//! and the row side (constraints, added cuts, candidates), a transformer over
//! candidates with a pooled context, a sigmoid head per candidate and a value
//! head over all vertices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::PolicyModel;
use crate::error::{Error, Result};
use crate::state_graph::{
    EdgeBlock, StateGraph, CAND_EDGE_FEATS, CAND_FEATS, CON_EDGE_FEATS, CON_FEATS, CUT_EDGE_FEATS, CUT_FEATS,
    VAR_FEATS,
};
use crate::tensor::{Affine, AttentionBlock, LayerNormParams, Mlp2, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GcsConfig {
    pub width: usize,
    pub rounds: usize,
    pub blocks: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub value_hidden: usize,
}

impl Default for GcsConfig {
    fn default() -> Self {
        Self { width: 32, rounds: 4, blocks: 2, heads: 4, ffn_hidden: 64, value_hidden: 32 }
    }
}

impl GcsConfig {
    fn describe(&self) -> String {
        format!(
            "gcs/v1 width={} rounds={} blocks={} heads={} ffn={} value={} feats={VAR_FEATS},{CON_FEATS},{CUT_FEATS},{CAND_FEATS}",
            self.width, self.rounds, self.blocks, self.heads, self.ffn_hidden, self.value_hidden
        )
    }
}

/// `sign(x)·ln(1 + |x|)`: keeps large raw features (costs, bounds) in range.
fn slog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

fn leaf_from(tape: &mut Tape, data: &[f64], cols: usize) -> Var {
    let rows = if cols == 0 { 0 } else { data.len() / cols };
    tape.leaf(Tensor { rows, cols, data: data.iter().map(|&v| slog(v)).collect() })
}

#[derive(Debug, Clone)]
struct Embed {
    affine: Affine,
    ln: LayerNormParams,
}

impl Embed {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, width: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            affine: Affine::new(store, name, fan_in, width, rng)?,
            ln: LayerNormParams::new(store, &format!("{name}.ln"), width)?,
        })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.affine.forward(tape, store, x)?;
        let h = self.ln.forward(tape, store, h)?;
        Ok(tape.relu(h))
    }
}

/// Message weights for one edge class and direction:
/// `A·h + G·(coef·h) + E·[edge feats] + b`.
#[derive(Debug, Clone)]
struct EdgeConv {
    a: crate::tensor::ParamId,
    g: crate::tensor::ParamId,
    e: Affine,
}

impl EdgeConv {
    fn new(store: &mut ParamStore, name: &str, width: usize, arity: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            a: store.glorot(&format!("{name}.a"), width, width, rng)?,
            g: store.glorot(&format!("{name}.g"), width, width, rng)?,
            e: Affine::new(store, &format!("{name}.e"), arity, width, rng)?,
        })
    }

    /// Sum of messages from `src` rows (picked by `src_idx`) into `dst_rows` rows.
    #[allow(clippy::too_many_arguments)]
    fn messages(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        src: Var,
        edges: &EdgeInput,
        src_idx: &[usize],
        dst_idx: &[usize],
        dst_rows: usize,
    ) -> Result<Var> {
        let a = tape.param(store, self.a);
        let g = tape.param(store, self.g);
        let pa = tape.matmul(src, a)?;
        let pg = tape.matmul(src, g)?;
        let ma = tape.gather_rows(pa, src_idx, None)?;
        let mg = tape.gather_rows(pg, src_idx, Some(&edges.coef))?;
        let me = self.e.forward(tape, store, edges.feats)?;
        let m = tape.add(ma, mg)?;
        let m = tape.add(m, me)?;
        tape.scatter_add(m, dst_idx, None, dst_rows)
    }
}

#[derive(Debug, Clone)]
struct RowClassRound {
    to_row: EdgeConv,
    to_var: EdgeConv,
    self_row: crate::tensor::ParamId,
    ln_row: LayerNormParams,
}

#[derive(Debug, Clone)]
struct Round {
    classes: Vec<RowClassRound>,
    self_var: crate::tensor::ParamId,
    ln_var: LayerNormParams,
}

struct EdgeInput {
    row: Vec<usize>,
    var: Vec<usize>,
    coef: Vec<f64>,
    feats: Var,
}

impl EdgeInput {
    fn new(tape: &mut Tape, block: &EdgeBlock) -> Self {
        let coef: Vec<f64> = (0..block.len()).map(|e| slog(block.coef(e))).collect();
        Self { row: block.row.clone(), var: block.var.clone(), coef, feats: leaf_from(tape, &block.feats, block.arity) }
    }
}

#[derive(Debug, Clone)]
pub struct GcsModel {
    pub config: GcsConfig,
    store: ParamStore,
    embed_var: Embed,
    embed_row: Vec<Embed>,
    rounds: Vec<Round>,
    context: Affine,
    blocks: Vec<AttentionBlock>,
    policy_w: crate::tensor::ParamId,
    policy_b: crate::tensor::ParamId,
    value: Mlp2,
}

const ROW_CLASSES: [(&str, usize, usize); 3] =
    [("con", CON_FEATS, CON_EDGE_FEATS), ("cut", CUT_FEATS, CUT_EDGE_FEATS), ("cand", CAND_FEATS, CAND_EDGE_FEATS)];

impl GcsModel {
    pub fn new(config: GcsConfig, seed: u64) -> Result<Self> {
        if config.width == 0 || config.heads == 0 || config.width % config.heads != 0 {
            return Err(Error::InvalidConfig(format!("width {} / heads {}", config.width, config.heads)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.width;
        let s = &mut store;
        let embed_var = Embed::new(s, "embed.var", VAR_FEATS, d, &mut rng)?;
        let embed_row = ROW_CLASSES
            .iter()
            .map(|(name, f, _)| Embed::new(s, &format!("embed.{name}"), *f, d, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut rounds = Vec::with_capacity(config.rounds);
        for r in 0..config.rounds {
            let classes = ROW_CLASSES
                .iter()
                .map(|(name, _, arity)| {
                    Ok(RowClassRound {
                        to_row: EdgeConv::new(s, &format!("conv{r}.{name}.to_row"), d, *arity, &mut rng)?,
                        to_var: EdgeConv::new(s, &format!("conv{r}.{name}.to_var"), d, *arity, &mut rng)?,
                        self_row: s.glorot(&format!("conv{r}.{name}.self"), d, d, &mut rng)?,
                        ln_row: LayerNormParams::new(s, &format!("conv{r}.{name}.ln"), d)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rounds.push(Round {
                classes,
                self_var: s.glorot(&format!("conv{r}.var.self"), d, d, &mut rng)?,
                ln_var: LayerNormParams::new(s, &format!("conv{r}.var.ln"), d)?,
            });
        }
        let context = Affine::new(s, "context", 2 * d, d, &mut rng)?;
        let blocks = (0..config.blocks)
            .map(|b| AttentionBlock::new(s, &format!("transformer{b}"), d, config.heads, config.ffn_hidden, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let policy_w = s.glorot("W_policy", d, 1, &mut rng)?;
        let policy_b = s.add("b_policy", Tensor::zeros(1, 1))?;
        let value = Mlp2::new(s, "value", d, config.value_hidden, 1, &mut rng)?;
        Ok(Self { config, store, embed_var, embed_row, rounds, context, blocks, policy_w, policy_b, value })
    }
}

impl PolicyModel for GcsModel {
    fn kind(&self) -> &'static str {
        "gcs"
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn config_hash(&self) -> String {
        hex::encode(&Sha256::digest(self.config.describe().as_bytes())[..8])
    }

    fn forward(&self, tape: &mut Tape, graph: &StateGraph) -> Result<(Var, Var)> {
        let l = graph.num_candidates();
        if l == 0 {
            return Err(Error::Invariant("policy forward needs at least one candidate".into()));
        }
        let st = &self.store;
        let n = graph.num_vars;
        let cut_feats = graph.cut_features();
        let row_inputs = [
            leaf_from(tape, graph.con_features(), CON_FEATS),
            leaf_from(tape, &cut_feats, CUT_FEATS),
            leaf_from(tape, graph.candidate_features(), CAND_FEATS),
        ];
        let row_counts = [graph.num_cons, graph.num_cuts(), l];
        let edges = [
            EdgeInput::new(tape, &graph.con_edges),
            EdgeInput::new(tape, &graph.cut_edges),
            EdgeInput::new(tape, &graph.cand_edges),
        ];

        let xv = leaf_from(tape, graph.var_features(), VAR_FEATS);
        let mut hv = self.embed_var.forward(tape, st, xv)?;
        let mut hr = Vec::with_capacity(3);
        for (c, &x) in row_inputs.iter().enumerate() {
            hr.push(self.embed_row[c].forward(tape, st, x)?);
        }

        for round in &self.rounds {
            // variables → rows
            for (c, cls) in round.classes.iter().enumerate() {
                let e = &edges[c];
                let agg = cls.to_row.messages(tape, st, hv, e, &e.var, &e.row, row_counts[c])?;
                let u = tape.param(st, cls.self_row);
                let own = tape.matmul(hr[c], u)?;
                let z = tape.add(own, agg)?;
                let z = cls.ln_row.forward(tape, st, z)?;
                hr[c] = tape.relu(z);
            }
            // rows → variables
            let u = tape.param(st, round.self_var);
            let mut z = tape.matmul(hv, u)?;
            for (c, cls) in round.classes.iter().enumerate() {
                let e = &edges[c];
                let agg = cls.to_var.messages(tape, st, hr[c], e, &e.row, &e.var, n)?;
                z = tape.add(z, agg)?;
            }
            let z = round.ln_var.forward(tape, st, z)?;
            hv = tape.relu(z);
        }

        let hc = hr[2];
        let pooled = tape.mean_rows(hc);
        let ctx = tape.repeat_row(pooled, l)?;
        let joined = tape.concat_cols(&[hc, ctx])?;
        let mut h = self.context.forward(tape, st, joined)?;
        for blk in &self.blocks {
            h = blk.forward(tape, st, h)?;
        }
        let w = tape.param(st, self.policy_w);
        let b = tape.param(st, self.policy_b);
        let logits = tape.matmul(h, w)?;
        let logits = tape.add_row(logits, b)?;

        let all = tape.concat_rows(&[hv, hr[0], hr[1], hr[2]])?;
        let mean_all = tape.mean_rows(all);
        let value = self.value.forward(tape, st, mean_all)?;
        Ok((logits, value))
    }
}
