//! Brute-force oracles and random problem generators shared by integration tests.

#![allow(dead_code)]

use gcs_core::instance::{MipInstance, SparseRow};
use gcs_core::simplex::LpProblem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense `a·x ≤ b` rows.
pub type DenseRows = Vec<(Vec<f64>, f64)>;

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Every vertex of `{x : rows, lower ≤ x ≤ upper}` (possibly with repeats).
pub fn polytope_vertices(rows: &DenseRows, lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    let n = lower.len();
    if n == 0 {
        return if rows.iter().all(|(_, b)| *b >= -1e-9) { vec![vec![]] } else { vec![] };
    }
    let mut cons: DenseRows = rows.clone();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), upper[j]));
        e[j] = -1.0;
        cons.push((e, -lower[j]));
    }
    let k = cons.len();
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a = pick.iter().map(|&i| cons[i].0.clone()).collect();
        let b = pick.iter().map(|&i| cons[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = cons.iter().all(|(a, b)| {
                let act: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
                act <= b + 1e-9 * (1.0 + b.abs())
            });
            if feasible {
                out.push(x);
            }
        }
        // next n-subset of 0..k
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pick[i] < k - n + i {
                break;
            }
        }
        pick[i] += 1;
        for t in i + 1..n {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

/// Optimum of `min cᵀx` over a bounded polyhedron by vertex enumeration.
/// Returns `None` when infeasible.
pub fn vertex_enum_min(c: &[f64], rows: &DenseRows, lower: &[f64], upper: &[f64]) -> Option<(f64, Vec<f64>)> {
    polytope_vertices(rows, lower, upper)
        .into_iter()
        .map(|x| (c.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>(), x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

pub fn dense(rows: &[SparseRow], n: usize) -> DenseRows {
    rows.iter()
        .map(|r| {
            let mut a = vec![0.0; n];
            for &(j, v) in &r.coefs {
                a[j] += v;
            }
            (a, r.rhs)
        })
        .collect()
}

/// Random bounded LP with a feasible interior point.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=0) as f64).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(1..=6) as f64).collect();
    let center: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| rng.gen_range(*l..*u)).collect();
    let rows = (0..m)
        .map(|_| {
            let mut coefs = Vec::new();
            for j in 0..n {
                let a = rng.gen_range(-50..=50) as f64 / 10.0;
                if rng.gen_bool(0.7) && a != 0.0 {
                    coefs.push((j, a));
                }
            }
            let act: f64 = coefs.iter().map(|&(j, a)| a * center[j]).sum();
            SparseRow::new(coefs, (act + rng.gen_range(0.0..3.0) * 10.0).round() / 10.0)
        })
        .filter(|r| !r.coefs.is_empty())
        .collect();
    let objective = (0..n).map(|_| rng.gen_range(-10..=10) as f64).collect();
    LpProblem { objective, rows, lower, upper }
}

/// Every integer assignment of the integer variables within bounds.
pub fn integer_grid(inst: &MipInstance) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for &j in &inst.integer_set {
        let (lo, hi) = (inst.var_lower[j].ceil() as i64, inst.var_upper[j].floor() as i64);
        let mut next = Vec::new();
        for p in &out {
            for v in lo..=hi {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Restriction of `inst` to its continuous variables with integers fixed to `z`.
fn continuous_part(inst: &MipInstance, z: &[i64], objective: &[f64]) -> (Vec<usize>, Vec<f64>, DenseRows, Vec<f64>, Vec<f64>) {
    let cont: Vec<usize> = (0..inst.num_vars).filter(|&j| !inst.is_integer(j)).collect();
    let mut fixed = vec![0.0; inst.num_vars];
    for (k, &j) in inst.integer_set.iter().enumerate() {
        fixed[j] = z[k] as f64;
    }
    let pos: std::collections::HashMap<usize, usize> = cont.iter().enumerate().map(|(k, &j)| (j, k)).collect();
    let rows = inst
        .rows
        .iter()
        .map(|r| {
            let mut a = vec![0.0; cont.len()];
            let mut b = r.rhs;
            for &(j, v) in &r.coefs {
                match pos.get(&j) {
                    Some(&k) => a[k] += v,
                    None => b -= v * fixed[j],
                }
            }
            (a, b)
        })
        .collect();
    let c = cont.iter().map(|&j| objective[j]).collect();
    let lo = cont.iter().map(|&j| inst.var_lower[j]).collect();
    let hi = cont.iter().map(|&j| inst.var_upper[j]).collect();
    (cont, c, rows, lo, hi)
}

/// For each integer assignment, the best point over the continuous part for
/// `objective` (minimized); infeasible assignments are skipped.
pub fn feasible_extremes(inst: &MipInstance, objective: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mut out = Vec::new();
    for z in integer_grid(inst) {
        let (cont, c, rows, lo, hi) = continuous_part(inst, &z, objective);
        if let Some((_, xc)) = vertex_enum_min(&c, &rows, &lo, &hi) {
            let mut x = vec![0.0; inst.num_vars];
            for (k, &j) in inst.integer_set.iter().enumerate() {
                x[j] = z[k] as f64;
            }
            for (k, &j) in cont.iter().enumerate() {
                x[j] = xc[k];
            }
            let val: f64 = objective.iter().zip(&x).map(|(a, b)| a * b).sum();
            out.push((val, x));
        }
    }
    out
}

/// Every integer assignment joined with every vertex of its continuous fiber.
/// Any linear function attains its maximum over the mixed-integer set at one of these.
pub fn feasible_vertices(inst: &MipInstance) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for z in integer_grid(inst) {
        let (cont, _, rows, lo, hi) = continuous_part(inst, &z, &inst.objective);
        for xc in polytope_vertices(&rows, &lo, &hi) {
            let mut x = vec![0.0; inst.num_vars];
            for (k, &j) in inst.integer_set.iter().enumerate() {
                x[j] = z[k] as f64;
            }
            for (k, &j) in cont.iter().enumerate() {
                x[j] = xc[k];
            }
            out.push(x);
        }
    }
    out
}

/// Brute-force MIP optimum (integer enumeration, vertex enumeration for the rest).
pub fn brute_force_optimum(inst: &MipInstance) -> Option<f64> {
    feasible_extremes(inst, &inst.objective)
        .into_iter()
        .map(|(v, _)| v)
        .min_by(f64::total_cmp)
}

/// `max αᵀx` over the mixed-integer feasible set.
pub fn max_activity(inst: &MipInstance, alpha: &[f64]) -> Option<f64> {
    let neg: Vec<f64> = alpha.iter().map(|a| -a).collect();
    feasible_extremes(inst, &neg)
        .into_iter()
        .map(|(v, _)| -v)
        .max_by(f64::total_cmp)
}

/// Random small MIP from a mix of families; `max_n` bounds the variable count.
pub fn random_mip(rng: &mut ChaCha8Rng, max_n: usize, allow_continuous: bool) -> MipInstance {
    let kind = rng.gen_range(0..4);
    let n = rng.gen_range(2..=max_n.max(2));
    let (objective, rows, upper, integer_set): (Vec<f64>, Vec<SparseRow>, Vec<f64>, Vec<usize>) = match kind {
        0 => {
            // covering
            let m = rng.gen_range(1..=n + 2);
            let rows = (0..m)
                .map(|_| {
                    let mut coefs: Vec<(usize, f64)> = (0..n).filter(|_| rng.gen_bool(0.4)).map(|j| (j, -1.0)).collect();
                    if coefs.is_empty() {
                        coefs.push((rng.gen_range(0..n), -1.0));
                    }
                    SparseRow::new(coefs, -1.0)
                })
                .collect();
            let c = (0..n).map(|_| rng.gen_range(1..=20) as f64).collect();
            (c, rows, vec![1.0; n], (0..n).collect())
        }
        1 => {
            // packing / knapsack
            let m = rng.gen_range(1..=3);
            let rows = (0..m)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=12) as f64).collect();
                    let cap = (0.5 * w.iter().sum::<f64>()).floor();
                    SparseRow::new(w.into_iter().enumerate().collect(), cap)
                })
                .collect();
            let c = (0..n).map(|_| -(rng.gen_range(1..=15) as f64)).collect();
            (c, rows, vec![1.0; n], (0..n).collect())
        }
        _ => {
            // general bounded integer program
            let m = rng.gen_range(1..=5);
            let ub_max = if n > 7 { 1 } else { 3 };
            let ub: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=ub_max) as f64).collect();
            let point: Vec<f64> = ub.iter().map(|&u| rng.gen_range(0..=u as i64) as f64).collect();
            let rows = (0..m)
                .map(|_| {
                    let mut coefs = Vec::new();
                    for j in 0..n {
                        let a = rng.gen_range(-6..=6) as f64;
                        if rng.gen_bool(0.6) && a != 0.0 {
                            coefs.push((j, a));
                        }
                    }
                    if coefs.is_empty() {
                        coefs.push((0, 1.0 + rng.gen_range(0..3) as f64));
                    }
                    let act: f64 = coefs.iter().map(|&(j, a)| a * point[j]).sum();
                    let slack = rng.gen_range(0..=3) as f64;
                    // integer data keeps a feasible point, half-integers test fractional rows
                    let rhs = if rng.gen_bool(0.8) { act + slack } else { act + slack + 0.5 };
                    SparseRow::new(coefs, rhs)
                })
                .collect();
            let c = (0..n).map(|_| rng.gen_range(-9..=9) as f64).collect();
            let mut ints: Vec<usize> = (0..n).collect();
            if allow_continuous && kind == 3 && n > 2 {
                ints.retain(|_| rng.gen_bool(0.7));
                if ints.is_empty() {
                    ints.push(0);
                }
            }
            (c, rows, ub, ints)
        }
    };
    MipInstance::new(format!("rand{kind}_n{n}"), objective, rows, vec![0.0; n], upper, integer_set).unwrap()
}

/// Random nonempty cut over `n` variables with random features.
pub fn random_candidate(rng: &mut ChaCha8Rng, n: usize) -> gcs_core::cuts::CutCandidate {
    use gcs_core::cuts::{CutCandidate, CutFeatures, CutOrigin};
    let mut coefs: Vec<(usize, f64)> = (0..n)
        .filter_map(|j| {
            let a = rng.gen_range(-4..=4) as f64;
            (a != 0.0 && rng.gen_bool(0.5)).then_some((j, a))
        })
        .collect();
    if coefs.is_empty() {
        coefs.push((rng.gen_range(0..n), 1.0));
    }
    let origin = CutOrigin { node: 0, round: 0, ..Default::default() };
    let mut c = CutCandidate::from_raw(SparseRow::new(coefs, rng.gen_range(-5..=5) as f64), origin).unwrap();
    c.features = CutFeatures {
        parallelism: rng.gen(),
        efficacy: rng.gen(),
        support: rng.gen(),
        integral_support: rng.gen(),
        normalized_violation: rng.gen(),
    };
    c
}

pub fn random_provenance(rng: &mut ChaCha8Rng, n: usize, round: usize) -> gcs_core::state_graph::CutProvenance {
    let sign = [0.0, 1.0, -1.0][rng.gen_range(0..3)];
    gcs_core::state_graph::CutProvenance {
        cut: random_candidate(rng, n),
        node: rng.gen_range(0..10),
        addition_round: round,
        improvement: rng.gen_range(-1.0..1.0),
        branch_sign: sign,
        branch_rhs: if sign == 0.0 { 0.0 } else { rng.gen_range(0..3) as f64 },
    }
}

/// Outcome of replaying one random delta chain against full rebuilds.
pub struct ChainCheck {
    pub deltas: usize,
    pub all_equal: bool,
    pub counts_hold: bool,
    /// Largest `ops / elements added` over non-empty deltas.
    pub worst_ratio: f64,
}

/// Builds a random instance and applies `len` random deltas, comparing against
/// `StateGraph::build` after every step.
pub fn check_delta_chain(rng: &mut ChaCha8Rng, len: usize) -> ChainCheck {
    use gcs_core::state_graph::{GraphDelta, StateGraph};
    let inst = random_mip(rng, 8, true);
    let n = inst.num_vars;
    let mut added = Vec::new();
    let mut cands: Vec<gcs_core::cuts::CutCandidate> = (0..rng.gen_range(0..4)).map(|_| random_candidate(rng, n)).collect();
    let mut g = StateGraph::build(&inst, &added, &cands, 0);
    let mut out = ChainCheck { deltas: 0, all_equal: true, counts_hold: true, worst_ratio: 0.0 };
    for round in 1..=len {
        let new_cuts: Vec<_> = (0..rng.gen_range(0..3)).map(|_| random_provenance(rng, n, round)).collect();
        cands = (0..rng.gen_range(0..5)).map(|_| random_candidate(rng, n)).collect();
        let elements: usize = new_cuts.iter().map(|p| 1 + p.cut.coefs.len()).sum::<usize>()
            + cands.iter().map(|c| 1 + c.coefs.len()).sum::<usize>();
        let delta = GraphDelta { base_version: g.version, new_cuts: new_cuts.clone(), candidates: cands.clone(), current_round: round };
        let ops = g.apply(&delta).unwrap();
        added.extend(new_cuts);
        let full = StateGraph::build(&inst, &added, &cands, round);
        out.all_equal &= g.same_content(&full);
        let q_nnz: usize = added.iter().map(|p| p.cut.coefs.len()).sum();
        let l_nnz: usize = cands.iter().map(|c| c.coefs.len()).sum();
        out.counts_hold &= g.num_vertices() == n + inst.num_cons() + added.len() + cands.len()
            && g.num_edges() == inst.nnz() + q_nnz + l_nnz;
        if elements > 0 {
            out.worst_ratio = out.worst_ratio.max(ops as f64 / elements as f64);
        } else {
            out.counts_hold &= ops == 0;
        }
        out.deltas += 1;
    }
    out
}

/// Random small state graph with at least one candidate.
pub fn random_state_graph(rng: &mut ChaCha8Rng) -> gcs_core::state_graph::StateGraph {
    let inst = random_mip(rng, 6, true);
    let n = inst.num_vars;
    let round = rng.gen_range(0..5);
    let mut added = Vec::new();
    for _ in 0..rng.gen_range(0..4) {
        let r = rng.gen_range(0..=round);
        added.push(random_provenance(rng, n, r));
    }
    let cands: Vec<_> = (0..rng.gen_range(1..5)).map(|_| random_candidate(rng, n)).collect();
    gcs_core::state_graph::StateGraph::build(&inst, &added, &cands, round)
}

/// Result of comparing analytic and central-difference gradients.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Entries whose perturbation crossed a relu/clamp/min kink.
    pub skipped: usize,
}

/// Checks `Σ wᵢ·logitᵢ + c·value` for `per_tensor` random entries of every parameter tensor.
/// Relative error is `|a − f| / max(|a|, |f|, 1e-5)`; the floor keeps exactly-zero
/// gradients (such as attention key biases) from turning round-off into error.
pub fn gradient_check<M: gcs_core::policy::PolicyModel>(
    model: &mut M,
    graph: &gcs_core::state_graph::StateGraph,
    rng: &mut ChaCha8Rng,
    per_tensor: usize,
) -> GradCheck {
    use gcs_core::tensor::{Tape, Tensor};
    let l = graph.num_candidates();
    let w: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c: f64 = rng.gen_range(-1.0..1.0);
    let eval = |m: &M, want_grad: bool| {
        let mut tape = Tape::new();
        let (logits, value) = m.forward(&mut tape, graph).unwrap();
        let wv = tape.leaf(Tensor::from_vec(l, 1, w.clone()).unwrap());
        let prod = tape.mul(logits, wv).unwrap();
        let s = tape.sum(prod);
        let v = tape.scale(value, c);
        let loss = tape.add(s, v).unwrap();
        let grads = want_grad.then(|| tape.backward(loss, m.store()).unwrap());
        (tape.value(loss).item(), tape.branch_signature(), grads)
    };
    let (_, sig0, grads) = eval(model, true);
    let grads = grads.unwrap();
    let h = 1e-5;
    let mut out = GradCheck::default();
    let ids: Vec<_> = model.store().ids().collect();
    for id in ids {
        let size = model.store().get(id).data.len();
        for _ in 0..per_tensor.min(size) {
            let k = rng.gen_range(0..size);
            let orig = model.store().get(id).data[k];
            model.store_mut().get_mut(id).data[k] = orig + h;
            let (fp, sp, _) = eval(model, false);
            model.store_mut().get_mut(id).data[k] = orig - h;
            let (fm, sm, _) = eval(model, false);
            model.store_mut().get_mut(id).data[k] = orig;
            if sp != sig0 || sm != sig0 {
                out.skipped += 1;
                continue;
            }
            let fd = (fp - fm) / (2.0 * h);
            let an = grads.get(id).data[k];
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-5);
            out.max_rel_err = out.max_rel_err.max(rel);
            out.checked += 1;
        }
    }
    out
}

/// Single-step bandit over a fixed two-candidate graph with reward `y₀`
/// (1 when candidate 0 is selected). Returns `p₀` under the final policy.
pub fn run_bandit(seed: u64, iterations: usize, batch: usize) -> f64 {
    use gcs_core::policy::{evaluate, sample_action, GcsConfig, GcsModel, SampleMode};
    use gcs_core::rl::{discounted_returns, ppo_update, PpoConfig, PpoSample};
    use gcs_core::tensor::AdamState;
    use rand::SeedableRng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_mip(&mut rng, 4, false);
    let cands = vec![random_candidate(&mut rng, inst.num_vars), random_candidate(&mut rng, inst.num_vars)];
    let graph = gcs_core::state_graph::StateGraph::build(&inst, &[], &cands, 0);
    let mut model = GcsModel::new(GcsConfig::default(), seed).unwrap();
    let mut opt = AdamState::new(gcs_core::policy::PolicyModel::store(&model));
    let cfg = PpoConfig { seed, ..Default::default() };
    for _ in 0..iterations {
        let (probs, value) = evaluate(&model, &graph).unwrap();
        let samples: Vec<PpoSample> = (0..batch)
            .map(|_| {
                let a = sample_action(&probs, SampleMode::Stochastic(&mut rng), None);
                let r = if a.selected[0] { 1.0 } else { 0.0 };
                PpoSample {
                    graph: graph.clone(),
                    ret: discounted_returns(&[r], 0.0, cfg.gamma)[0],
                    selected: a.selected,
                    old_log_prob: a.log_prob,
                    value,
                }
            })
            .collect();
        ppo_update(&mut model, &mut opt, &samples, &cfg, &mut rng).unwrap();
    }
    evaluate(&model, &graph).unwrap().0[0]
}
