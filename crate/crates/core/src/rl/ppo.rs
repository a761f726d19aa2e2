use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::PpoConfig;
use crate::error::{Error, Result};
use crate::policy::PolicyModel;
use crate::state_graph::StateGraph;
use crate::tensor::{adam_step, AdamConfig, AdamState, Gradients, Tape, Tensor};

/// One decision step as consumed by the update.
#[derive(Debug, Clone)]
pub struct PpoSample {
    pub graph: StateGraph,
    pub selected: Vec<bool>,
    pub old_log_prob: f64,
    /// Value estimate at rollout time.
    pub value: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub updates: usize,
}

/// Loss terms of one sample and the gradient of their weighted sum.
#[derive(Debug, Clone)]
pub struct SampleLoss {
    /// `−min(ratio·A, clip(ratio)·A)`.
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Ratio outside `[1 − ε, 1 + ε]`.
    pub clipped: bool,
    pub grads: Gradients,
}

pub fn sample_loss<M: PolicyModel + ?Sized>(
    model: &M,
    s: &PpoSample,
    adv: f64,
    cfg: &PpoConfig,
) -> Result<SampleLoss> {
    let mut tape = Tape::new();
    let (logits, value) = model.forward(&mut tape, &s.graph)?;
    let l = tape.value(logits).rows;
    if l != s.selected.len() {
        return Err(Error::Invariant(format!("{} logits for {} recorded choices", l, s.selected.len())));
    }
    let y: Vec<f64> = s.selected.iter().map(|&b| b as u8 as f64).collect();
    let ym = tape.leaf(Tensor { rows: l, cols: 1, data: y.clone() });
    let nm = tape.leaf(Tensor { rows: l, cols: 1, data: y.iter().map(|v| 1.0 - v).collect() });

    let lp_pos = tape.log_sigmoid(logits);
    let neg = tape.scale(logits, -1.0);
    let lp_neg = tape.log_sigmoid(neg);
    let a = tape.mul(lp_pos, ym)?;
    let b = tape.mul(lp_neg, nm)?;
    let lp = tape.add(a, b)?;
    let lp = tape.sum(lp);

    let old = tape.leaf(Tensor::scalar(s.old_log_prob));
    let diff = tape.sub(lp, old)?;
    let ratio = tape.exp(diff);
    let s1 = tape.scale(ratio, adv);
    let clipped = tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    let s2 = tape.scale(clipped, adv);
    let surrogate = tape.minimum(s1, s2)?;
    let r = tape.value(ratio).item();
    let was_clipped = r < 1.0 - cfg.clip || r > 1.0 + cfg.clip;

    // Bernoulli entropy softplus(z) − σ(z)·z, averaged over candidates
    let sp = tape.softplus(logits);
    let p = tape.sigmoid(logits);
    let pz = tape.mul(p, logits)?;
    let ent = tape.sub(sp, pz)?;
    let ent = tape.mean(ent);

    let target = tape.leaf(Tensor::scalar(s.ret));
    let verr = tape.sub(value, target)?;
    let vloss = tape.mul(verr, verr)?;

    let pol = tape.scale(surrogate, -1.0);
    let ent_term = tape.scale(ent, -cfg.entropy_weight);
    let v_term = tape.scale(vloss, cfg.value_weight);
    let total = tape.add(pol, ent_term)?;
    let total = tape.add(total, v_term)?;

    let grads = tape.backward(total, model.store())?;
    Ok(SampleLoss {
        policy: tape.value(pol).item(),
        value: tape.value(vloss).item(),
        entropy: tape.value(ent).item(),
        clipped: was_clipped,
        grads,
    })
}

/// Clipped-surrogate update over `samples` for `cfg.epochs` epochs.
/// Advantages `R − V` are normalized over the whole batch.
pub fn ppo_update<M: PolicyModel + ?Sized>(
    model: &mut M,
    opt: &mut AdamState,
    samples: &[PpoSample],
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossStats> {
    cfg.validate()?;
    if samples.is_empty() {
        return Ok(LossStats::default());
    }
    let raw: Vec<f64> = samples.iter().map(|s| s.ret - s.value).collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let var = raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / raw.len() as f64;
    let sd = var.sqrt();
    let adv: Vec<f64> = raw.iter().map(|a| if sd > 1e-8 { (a - mean) / sd } else { a - mean }).collect();

    let adam = AdamConfig { lr: cfg.lr, ..Default::default() };
    let mut stats = LossStats::default();
    let mut seen = 0usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mut grads = Gradients::zeros_like(model.store());
            let w = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let sl = sample_loss(&*model, &samples[i], adv[i], cfg).map_err(|e| match e {
                    Error::NonFinite(msg) => Error::NonFinite(format!(
                        "{msg}; minibatch samples {chunk:?}: returns {:?}, advantages {:?}, old log-probs {:?}",
                        chunk.iter().map(|&k| samples[k].ret).collect::<Vec<_>>(),
                        chunk.iter().map(|&k| adv[k]).collect::<Vec<_>>(),
                        chunk.iter().map(|&k| samples[k].old_log_prob).collect::<Vec<_>>(),
                    )),
                    other => other,
                })?;
                grads.accumulate(&sl.grads, w);
                stats.policy_loss += sl.policy;
                stats.value_loss += sl.value;
                stats.entropy += sl.entropy;
                stats.clip_fraction += sl.clipped as u8 as f64;
                seen += 1;
            }
            adam_step(model.store_mut(), opt, &grads, &adam);
            stats.updates += 1;
        }
    }
    let n = seen.max(1) as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.clip_fraction /= n;
    Ok(stats)
}
