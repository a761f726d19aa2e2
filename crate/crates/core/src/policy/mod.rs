//! Cut selectors: the learned graph policy, its score-based variant, and the
//! fixed baselines.

mod gcs;
mod sbp;

pub use gcs::{GcsConfig, GcsModel};
pub use sbp::{SbpConfig, SbpModel};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cuts::directed_cutoff;
use crate::error::{Error, Result};
use crate::state_graph::StateGraph;
use crate::tensor::{Checkpoint, ParamStore, Tape, Var};
use crate::tree::{CutSelector, DecisionContext};

/// A sampled selection: bits `y`, the order `π` of the selected cuts, the
/// probabilities they were drawn from, and the Bernoulli log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CutAction {
    pub selected: Vec<bool>,
    pub order: Vec<usize>,
    pub probs: Vec<f64>,
    pub log_prob: f64,
}

pub enum SampleMode<'a> {
    Greedy,
    Stochastic(&'a mut ChaCha8Rng),
}

/// Bernoulli log-probability of `selected` under `probs`.
pub fn bernoulli_log_prob(probs: &[f64], selected: &[bool]) -> f64 {
    probs
        .iter()
        .zip(selected)
        .map(|(&p, &y)| if y { p.ln() } else { (-p).ln_1p() })
        .sum()
}

/// Indices sorted by descending probability, ties by index.
fn rank_desc(scores: &[f64], keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| keep(i)).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

pub fn sample_action(probs: &[f64], mode: SampleMode<'_>, max_select: Option<usize>) -> CutAction {
    let mut selected: Vec<bool> = match mode {
        SampleMode::Greedy => probs.iter().map(|&p| p > 0.5).collect(),
        SampleMode::Stochastic(rng) => probs.iter().map(|&p| rng.gen::<f64>() < p).collect(),
    };
    let mut order = rank_desc(probs, |i| selected[i]);
    if let Some(k) = max_select {
        for &i in order.iter().skip(k) {
            selected[i] = false;
        }
        order.truncate(k);
    }
    CutAction {
        log_prob: bernoulli_log_prob(probs, &selected),
        selected,
        order,
        probs: probs.to_vec(),
    }
}

/// Number of `⌈ρ·l⌉` candidates kept by score-ranked selectors.
pub fn top_count(rho: f64, l: usize) -> usize {
    ((rho * l as f64) - 1e-12).ceil().clamp(0.0, l as f64) as usize
}

/// Selects nothing.
#[derive(Debug, Default, Clone)]
pub struct NoCuts;

impl CutSelector for NoCuts {
    fn tag(&self) -> String {
        "nocuts".into()
    }

    fn select(&mut self, _ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        Ok(Vec::new())
    }
}

/// Each candidate kept with probability ½, kept cuts in random order.
#[derive(Debug, Clone)]
pub struct RandomSelector {
    rng: ChaCha8Rng,
}

impl RandomSelector {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl CutSelector for RandomSelector {
    fn tag(&self) -> String {
        "random".into()
    }

    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        let mut chosen: Vec<usize> = (0..ctx.candidates.len()).filter(|_| self.rng.gen_bool(0.5)).collect();
        chosen.shuffle(&mut self.rng);
        Ok(chosen)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultWeights {
    pub efficacy: f64,
    pub parallelism: f64,
    pub integral_support: f64,
    /// Applied only once an incumbent exists.
    pub directed_cutoff: f64,
    pub rho: f64,
}

impl Default for DefaultWeights {
    fn default() -> Self {
        Self { efficacy: 1.0, parallelism: 0.1, integral_support: 0.1, directed_cutoff: 0.5, rho: 0.3 }
    }
}

/// Weighted literature score, top `⌈ρ·l⌉` by score.
#[derive(Debug, Clone, Default)]
pub struct DefaultScore {
    pub weights: DefaultWeights,
}

impl DefaultScore {
    pub fn new(weights: DefaultWeights) -> Result<Self> {
        let w = weights;
        let all = [w.efficacy, w.parallelism, w.integral_support, w.directed_cutoff, w.rho];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || w.rho > 1.0 {
            return Err(Error::InvalidConfig(format!("default-score weights must be finite and non-negative, ρ ≤ 1: {w:?}")));
        }
        Ok(Self { weights })
    }

    pub fn scores(&self, ctx: &DecisionContext<'_>) -> Vec<f64> {
        let w = &self.weights;
        let w_dcd = if ctx.incumbent.is_some() { w.directed_cutoff } else { 0.0 };
        ctx.candidates
            .iter()
            .map(|c| {
                let f = &c.features;
                let dcd = if w_dcd > 0.0 { directed_cutoff(c, ctx.lp_x, ctx.incumbent) } else { 0.0 };
                w.efficacy * f.efficacy + w.parallelism * f.parallelism + w.integral_support * f.integral_support + w_dcd * dcd
            })
            .collect()
    }
}

impl CutSelector for DefaultScore {
    fn tag(&self) -> String {
        "default".into()
    }

    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        let scores = self.scores(ctx);
        let mut order = rank_desc(&scores, |_| true);
        order.truncate(top_count(self.weights.rho, scores.len()));
        Ok(order)
    }
}

/// A trainable network that maps a state graph to per-candidate logits and a value.
pub trait PolicyModel: Send + Sync {
    fn kind(&self) -> &'static str;

    fn store(&self) -> &ParamStore;

    fn store_mut(&mut self) -> &mut ParamStore;

    fn config_hash(&self) -> String;

    /// Returns `(logits: l × 1, value: 1 × 1)`.
    fn forward(&self, tape: &mut Tape, graph: &StateGraph) -> Result<(Var, Var)>;

    /// Deterministic evaluation-time selection.
    fn greedy(&self, probs: &[f64]) -> CutAction {
        sample_action(probs, SampleMode::Greedy, None)
    }
}

/// `(probabilities, value)` for one graph.
pub fn evaluate<M: PolicyModel + ?Sized>(model: &M, graph: &StateGraph) -> Result<(Vec<f64>, f64)> {
    let mut tape = Tape::new();
    let (logits, value) = model.forward(&mut tape, graph)?;
    let p = tape.sigmoid(logits);
    Ok((tape.value(p).data.clone(), tape.value(value).item()))
}

pub fn load_model_checkpoint<M: PolicyModel>(model: &mut M, path: &Path) -> Result<()> {
    let ck = Checkpoint::load(path)?;
    let hash = model.config_hash();
    ck.restore(model.store_mut(), &hash)?;
    Ok(())
}

/// One stochastic decision recorded during a rollout.
#[derive(Debug, Clone)]
pub struct PolicyStep {
    pub t: usize,
    pub graph: StateGraph,
    pub action: CutAction,
    pub value: f64,
}

/// Wraps a [`PolicyModel`] as a [`CutSelector`].
pub struct PolicySelector<M: PolicyModel + ?Sized> {
    pub model: Arc<M>,
    rng: Option<ChaCha8Rng>,
    pub max_select: Option<usize>,
    pub steps: Vec<PolicyStep>,
    record: bool,
}

impl<M: PolicyModel + ?Sized> PolicySelector<M> {
    pub fn greedy(model: Arc<M>) -> Self {
        Self { model, rng: None, max_select: None, steps: Vec::new(), record: false }
    }

    /// Samples Bernoulli actions and records every step for training.
    pub fn stochastic(model: Arc<M>, seed: u64) -> Self {
        Self { model, rng: Some(ChaCha8Rng::seed_from_u64(seed)), max_select: None, steps: Vec::new(), record: true }
    }
}

impl<M: PolicyModel + ?Sized> CutSelector for PolicySelector<M> {
    fn tag(&self) -> String {
        self.model.kind().to_string()
    }

    fn wants_graph(&self) -> bool {
        true
    }

    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        let graph = ctx.graph.ok_or_else(|| Error::Invariant("policy selector needs the state graph".into()))?;
        let (probs, value) = evaluate(&*self.model, graph)?;
        if let Some(bad) = probs.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("policy probability {bad}")));
        }
        let action = match &mut self.rng {
            Some(rng) => sample_action(&probs, SampleMode::Stochastic(rng), self.max_select),
            None => {
                let mut a = self.model.greedy(&probs);
                if let Some(k) = self.max_select {
                    a.order.truncate(k);
                }
                a
            }
        };
        let order = action.order.clone();
        if self.record {
            self.steps.push(PolicyStep { t: ctx.t, graph: graph.clone(), action, value });
        }
        Ok(order)
    }
}

/// Selector named on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectorTag {
    NoCuts,
    Default,
    Random,
    Sbp(PathBuf),
    Gcs(PathBuf),
}

impl SelectorTag {
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown selector {s:?} (nocuts | default | random | sbp:<ckpt> | gcs:<ckpt>)"));
        match s {
            "nocuts" => return Ok(SelectorTag::NoCuts),
            "default" => return Ok(SelectorTag::Default),
            "random" => return Ok(SelectorTag::Random),
            _ => {}
        }
        let (kind, path) = s.split_once(':').ok_or_else(bad)?;
        if path.is_empty() {
            return Err(bad());
        }
        match kind {
            "sbp" => Ok(SelectorTag::Sbp(PathBuf::from(path))),
            "gcs" => Ok(SelectorTag::Gcs(PathBuf::from(path))),
            _ => Err(bad()),
        }
    }

    /// Short label used in result files and comparison tables.
    pub fn label(&self) -> &'static str {
        match self {
            SelectorTag::NoCuts => "nocuts",
            SelectorTag::Default => "default",
            SelectorTag::Random => "random",
            SelectorTag::Sbp(_) => "sbp",
            SelectorTag::Gcs(_) => "gcs",
        }
    }

    /// Instantiates the selector; learned selectors run greedily.
    pub fn build(&self, seed: u64) -> Result<Box<dyn CutSelector + Send>> {
        Ok(match self {
            SelectorTag::NoCuts => Box::new(NoCuts),
            SelectorTag::Default => Box::new(DefaultScore::default()),
            SelectorTag::Random => Box::new(RandomSelector::new(seed)),
            SelectorTag::Sbp(path) => {
                let mut m = SbpModel::new(SbpConfig::default(), 0)?;
                load_model_checkpoint(&mut m, path)?;
                Box::new(PolicySelector::greedy(Arc::new(m)))
            }
            SelectorTag::Gcs(path) => {
                let mut m = GcsModel::new(GcsConfig::default(), 0)?;
                load_model_checkpoint(&mut m, path)?;
                Box::new(PolicySelector::greedy(Arc::new(m)))
            }
        })
    }
}
