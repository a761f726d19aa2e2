//! Score-based policy: a per-cut perceptron over the five candidate features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{bernoulli_log_prob, rank_desc, top_count, CutAction, PolicyModel};
use crate::error::{Error, Result};
use crate::state_graph::{StateGraph, CAND_FEATS};
use crate::tensor::{Mlp2, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct SbpConfig {
    pub hidden: usize,
    pub rho: f64,
}

impl Default for SbpConfig {
    fn default() -> Self {
        Self { hidden: 16, rho: 0.3 }
    }
}

#[derive(Debug, Clone)]
pub struct SbpModel {
    pub config: SbpConfig,
    store: ParamStore,
    score: Mlp2,
    value: Mlp2,
}

impl SbpModel {
    pub fn new(config: SbpConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 || !(0.0..=1.0).contains(&config.rho) {
            return Err(Error::InvalidConfig(format!("sbp config {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let score = Mlp2::new(&mut store, "score", CAND_FEATS, config.hidden, 1, &mut rng)?;
        let value = Mlp2::new(&mut store, "value", CAND_FEATS, config.hidden, 1, &mut rng)?;
        Ok(Self { config, store, score, value })
    }

    /// Per-candidate scores for a raw `l × 5` feature block.
    pub fn scores(&self, feats: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(feats.len() / CAND_FEATS, CAND_FEATS, feats.to_vec())?);
        let s = self.score.forward(&mut tape, &self.store, x)?;
        Ok(tape.value(s).data.clone())
    }
}

impl PolicyModel for SbpModel {
    fn kind(&self) -> &'static str {
        "sbp"
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn config_hash(&self) -> String {
        let desc = format!("sbp/v1 hidden={} feats={CAND_FEATS}", self.config.hidden);
        hex::encode(&Sha256::digest(desc.as_bytes())[..8])
    }

    fn forward(&self, tape: &mut Tape, graph: &StateGraph) -> Result<(Var, Var)> {
        let feats = graph.candidate_features();
        let l = feats.len() / CAND_FEATS;
        if l == 0 {
            return Err(Error::Invariant("policy forward needs at least one candidate".into()));
        }
        let x = tape.leaf(Tensor::from_vec(l, CAND_FEATS, feats.to_vec())?);
        let logits = self.score.forward(tape, &self.store, x)?;
        let pooled = tape.mean_rows(x);
        let value = self.value.forward(tape, &self.store, pooled)?;
        Ok((logits, value))
    }

    /// Top `⌈ρ·l⌉` by score, ordered by score.
    fn greedy(&self, probs: &[f64]) -> CutAction {
        let mut order = rank_desc(probs, |_| true);
        order.truncate(top_count(self.config.rho, probs.len()));
        let mut selected = vec![false; probs.len()];
        for &i in &order {
            selected[i] = true;
        }
        CutAction { log_prob: bernoulli_log_prob(probs, &selected), selected, order, probs: probs.to_vec() }
    }
}
