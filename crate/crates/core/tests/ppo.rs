mod common;

#[test]
fn bandit_learns_to_select_rewarded_candidate() {
    let p0 = common::run_bandit(1, 200, 16);
    assert!(p0 > 0.9, "p0 = {p0}");
}

use gcs_core::policy::{bernoulli_log_prob, evaluate, PolicyModel, SbpConfig, SbpModel};
use gcs_core::rl::{sample_loss, PpoConfig, PpoSample};
use gcs_core::tensor::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64) -> (SbpModel, gcs_core::state_graph::StateGraph, Vec<bool>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = loop {
        let g = common::random_state_graph(&mut rng);
        if g.num_candidates() >= 2 {
            break g;
        }
    };
    let model = SbpModel::new(SbpConfig::default(), seed).unwrap();
    let selected: Vec<bool> = (0..graph.num_candidates()).map(|i| i % 2 == 0).collect();
    let (probs, _) = evaluate(&model, &graph).unwrap();
    let lp = bernoulli_log_prob(&probs, &selected);
    (model, graph, selected, lp)
}

fn policy_only() -> PpoConfig {
    PpoConfig { value_weight: 0.0, entropy_weight: 0.0, ..Default::default() }
}

/// Gradient of `−A · log π(a|s)` built directly from the logits.
fn reinforce_grad(model: &SbpModel, graph: &gcs_core::state_graph::StateGraph, selected: &[bool], adv: f64) -> Vec<f64> {
    let mut tape = Tape::new();
    let (z, _) = model.forward(&mut tape, graph).unwrap();
    let l = selected.len();
    let y: Vec<f64> = selected.iter().map(|&b| b as u8 as f64).collect();
    let ym = tape.leaf(Tensor::from_vec(l, 1, y.clone()).unwrap());
    let nm = tape.leaf(Tensor::from_vec(l, 1, y.iter().map(|v| 1.0 - v).collect()).unwrap());
    let pos = tape.log_sigmoid(z);
    let nz = tape.scale(z, -1.0);
    let neg = tape.log_sigmoid(nz);
    let a = tape.mul(pos, ym).unwrap();
    let b = tape.mul(neg, nm).unwrap();
    let s = tape.add(a, b).unwrap();
    let lp = tape.sum(s);
    let loss = tape.scale(lp, -adv);
    let g = tape.backward(loss, model.store()).unwrap();
    model.store().ids().flat_map(|id| g.get(id).data.clone()).collect()
}

fn flat(model: &SbpModel, g: &gcs_core::tensor::Gradients) -> Vec<f64> {
    model.store().ids().flat_map(|id| g.get(id).data.clone()).collect()
}

#[test]
fn unit_ratio_reduces_to_reinforce() {
    for seed in 0..5 {
        let (model, graph, selected, lp) = setup(seed);
        for adv in [1.3, -0.7] {
            let s = PpoSample { graph: graph.clone(), selected: selected.clone(), old_log_prob: lp, value: 0.0, ret: 0.0 };
            let out = sample_loss(&model, &s, adv, &policy_only()).unwrap();
            assert!(!out.clipped);
            assert!((out.policy + adv).abs() < 1e-12);
            let want = reinforce_grad(&model, &graph, &selected, adv);
            for (a, b) in flat(&model, &out.grads).iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn clipping_never_rewards_leaving_the_trust_region() {
    let cfg = policy_only();
    for seed in 0..5 {
        let (model, graph, selected, lp) = setup(seed);
        for (ratio, adv, frozen) in [(1.5, 1.0, true), (0.5, -1.0, true), (0.5, 1.0, false), (1.5, -1.0, false)] {
            let s = PpoSample {
                graph: graph.clone(),
                selected: selected.clone(),
                old_log_prob: lp - f64::ln(ratio),
                value: 0.0,
                ret: 0.0,
            };
            let out = sample_loss(&model, &s, adv, &cfg).unwrap();
            assert!(out.clipped);
            let surr = -out.policy;
            let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            assert!((surr - (ratio * adv).min(clipped * adv)).abs() < 1e-9);
            let gmax = flat(&model, &out.grads).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if frozen {
                assert_eq!(gmax, 0.0, "ratio {ratio} adv {adv}");
            } else {
                assert!(gmax > 0.0, "ratio {ratio} adv {adv}");
            }
        }
    }
}

#[test]
fn ratio_example_from_clip_arithmetic() {
    let cfg = policy_only();
    let (model, graph, selected, lp) = setup(11);
    let s = PpoSample { graph, selected, old_log_prob: lp - f64::ln(1.5), value: 0.0, ret: 0.0 };
    let out = sample_loss(&model, &s, 1.0, &cfg).unwrap();
    assert!((-out.policy - 1.2).abs() < 1e-9);
}
