mod common;

use gcs_core::policy::{GcsConfig, GcsModel, PolicyModel, SbpConfig, SbpModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn gcs_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut model = GcsModel::new(GcsConfig::default(), 1).unwrap();
    for _ in 0..4 {
        let g = common::random_state_graph(&mut rng);
        let r = common::gradient_check(&mut model, &g, &mut rng, 2);
        assert!(r.checked > 50, "{r:?}");
        assert!(r.max_rel_err <= 1e-4, "{r:?}");
    }
}

#[test]
fn sbp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut model = SbpModel::new(SbpConfig::default(), 2).unwrap();
    for _ in 0..5 {
        let g = common::random_state_graph(&mut rng);
        let r = common::gradient_check(&mut model, &g, &mut rng, 16);
        assert!(r.max_rel_err <= 1e-4, "{r:?}");
    }
}

#[test]
fn every_gcs_parameter_receives_gradient() {
    use gcs_core::tensor::{Tape, Tensor};
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = GcsModel::new(GcsConfig::default(), 3).unwrap();
    let mut touched = vec![false; model.store().len()];
    for _ in 0..10 {
        let g = common::random_state_graph(&mut rng);
        let mut tape = Tape::new();
        let (logits, value) = model.forward(&mut tape, &g).unwrap();
        let w = tape.leaf(Tensor::filled(g.num_candidates(), 1, 0.37));
        let p = tape.mul(logits, w).unwrap();
        let s = tape.sum(p);
        let loss = tape.add(s, value).unwrap();
        let grads = tape.backward(loss, model.store()).unwrap();
        for (i, id) in model.store().ids().enumerate() {
            touched[i] |= grads.get(id).data.iter().any(|&v| v != 0.0);
        }
    }
    let dead: Vec<&str> = model.store().ids().zip(&touched).filter(|(_, &t)| !t).map(|(id, _)| model.store().name(id)).collect();
    assert!(dead.is_empty(), "parameters without gradient: {dead:?}");
}
