//! Bipartite encoding of the whole branch-and-cut tree.
//!
//! Variable vertices sit on one side; original constraints, every cut added
//! anywhere in the tree, and the current candidate cuts sit on the other.
//! Cut–variable edges carry the branching constraint `(sign, rhs)` of the
//! node where the cut entered, which is what localizes a cut in the tree.
//!
//! Variables and constraints never change during a solve, so refreshing only
//! appends new cut vertices and swaps the candidate block. Work is counted
//! in [`StateGraph::ops`]; each appended vertex or edge costs at most
//! [`OPS_PER_ELEMENT`] ops.

use serde::Serialize;

use crate::cuts::CutCandidate;
use crate::error::{Error, Result};
use crate::instance::MipInstance;

pub const VAR_FEATS: usize = 6;
pub const CON_FEATS: usize = 5;
pub const CUT_FEATS: usize = 3;
pub const CAND_FEATS: usize = 5;
pub const CON_EDGE_FEATS: usize = 1;
pub const CUT_EDGE_FEATS: usize = 3;
pub const CAND_EDGE_FEATS: usize = 1;

/// Upper bound on counted ops per appended vertex or edge (one push plus at
/// most five feature writes).
pub const OPS_PER_ELEMENT: u64 = 6;

const BOUND_CLIP: f64 = 1e10;

/// Everything the graph needs to know about a cut that was added to the LP.
#[derive(Debug, Clone, PartialEq)]
pub struct CutProvenance {
    pub cut: CutCandidate,
    /// Tree node that received the cut.
    pub node: usize,
    /// Global decision index at which it was added.
    pub addition_round: usize,
    /// Relative change of the node's LP bound in the round it entered.
    pub improvement: f64,
    /// Branching constraint of that node: +1 for `x ≤ rhs`, −1 for `x ≥ rhs`, 0 at the root.
    pub branch_sign: f64,
    pub branch_rhs: f64,
}

/// Time and effect features of an added cut, normalized to the current round.
pub fn cut_history_features(p: &CutProvenance, current_round: usize) -> [f64; CUT_FEATS] {
    [
        p.addition_round as f64 / current_round.max(1) as f64,
        p.improvement,
        p.cut.features.parallelism,
    ]
}

/// Bound-relative improvement `(z_after − z_before) / max(|z_before|, 1)`.
pub fn improvement_effect(z_before: f64, z_after: f64) -> f64 {
    ((z_after - z_before) / z_before.abs().max(1.0)).clamp(-BOUND_CLIP, BOUND_CLIP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDelta {
    pub base_version: u64,
    pub new_cuts: Vec<CutProvenance>,
    pub candidates: Vec<CutCandidate>,
    pub current_round: usize,
}

/// Sparse edge block between variables and one row-side vertex class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeBlock {
    /// Local row-side index (constraint, cut or candidate number).
    pub row: Vec<usize>,
    pub var: Vec<usize>,
    /// `arity` features per edge, row-major.
    pub feats: Vec<f64>,
    pub arity: usize,
}

impl EdgeBlock {
    fn new(arity: usize) -> Self {
        Self { arity, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row.is_empty()
    }

    pub fn coef(&self, e: usize) -> f64 {
        self.feats[e * self.arity]
    }

    pub fn features(&self, e: usize) -> &[f64] {
        &self.feats[e * self.arity..(e + 1) * self.arity]
    }

    fn truncate(&mut self, edges: usize) {
        self.row.truncate(edges);
        self.var.truncate(edges);
        self.feats.truncate(edges * self.arity);
    }
}

#[derive(Debug, Clone)]
pub struct StateGraph {
    pub version: u64,
    pub num_vars: usize,
    pub num_cons: usize,
    var_feats: Vec<f64>,
    con_feats: Vec<f64>,
    /// Raw cut metadata: addition round, improvement, parallelism.
    cut_meta: Vec<[f64; 3]>,
    cut_rhs: Vec<f64>,
    cut_node: Vec<usize>,
    cand_feats: Vec<f64>,
    pub con_edges: EdgeBlock,
    pub cut_edges: EdgeBlock,
    pub cand_edges: EdgeBlock,
    pub current_round: usize,
    ops: u64,
}

impl StateGraph {
    /// Full construction from the instance, all added cuts and the current candidates.
    pub fn build(
        inst: &MipInstance,
        added: &[CutProvenance],
        candidates: &[CutCandidate],
        current_round: usize,
    ) -> Self {
        let n = inst.num_vars;
        let mut var_feats = Vec::with_capacity(n * VAR_FEATS);
        for j in 0..n {
            let (lb, ub) = (inst.var_lower[j], inst.var_upper[j]);
            let integer = inst.is_integer(j);
            let binary = integer && lb == 0.0 && ub == 1.0;
            var_feats.extend_from_slice(&[
                lb.clamp(-BOUND_CLIP, BOUND_CLIP),
                ub.clamp(-BOUND_CLIP, BOUND_CLIP),
                inst.objective[j],
                binary as u8 as f64,
                (integer && !binary) as u8 as f64,
                (!integer) as u8 as f64,
            ]);
        }
        let mut con_feats = Vec::with_capacity(inst.num_cons() * CON_FEATS);
        let mut con_edges = EdgeBlock::new(CON_EDGE_FEATS);
        for (i, row) in inst.rows.iter().enumerate() {
            // rhs, lhs = −∞ flag, ≤ / = one-hot, nnz
            con_feats.extend_from_slice(&[row.rhs, 1.0, 1.0, 0.0, row.nnz() as f64]);
            for &(j, a) in &row.coefs {
                con_edges.row.push(i);
                con_edges.var.push(j);
                con_edges.feats.push(a);
            }
        }
        let mut g = Self {
            version: 0,
            num_vars: n,
            num_cons: inst.num_cons(),
            var_feats,
            con_feats,
            cut_meta: Vec::new(),
            cut_rhs: Vec::new(),
            cut_node: Vec::new(),
            cand_feats: Vec::new(),
            con_edges,
            cut_edges: EdgeBlock::new(CUT_EDGE_FEATS),
            cand_edges: EdgeBlock::new(CAND_EDGE_FEATS),
            current_round,
            ops: 0,
        };
        for p in added {
            g.push_cut(p);
        }
        g.set_candidates(candidates);
        g.ops = 0;
        g
    }

    /// Applies an incremental update and returns the ops it cost.
    pub fn apply(&mut self, delta: &GraphDelta) -> Result<u64> {
        if delta.base_version != self.version {
            return Err(Error::StaleDelta {
                delta: delta.base_version,
                graph: self.version,
            });
        }
        let before = self.ops;
        for p in &delta.new_cuts {
            self.push_cut(p);
        }
        self.set_candidates(&delta.candidates);
        self.current_round = delta.current_round;
        self.version += 1;
        Ok(self.ops - before)
    }

    /// Counted work since construction.
    pub fn ops(&self) -> u64 {
        self.ops
    }

    fn push_cut(&mut self, p: &CutProvenance) {
        let local = self.cut_meta.len();
        self.cut_meta.push([
            p.addition_round as f64,
            p.improvement,
            p.cut.features.parallelism,
        ]);
        self.cut_rhs.push(p.cut.rhs);
        self.cut_node.push(p.node);
        self.ops += 1 + CUT_FEATS as u64;
        for &(j, a) in &p.cut.coefs {
            self.cut_edges.row.push(local);
            self.cut_edges.var.push(j);
            self.cut_edges
                .feats
                .extend_from_slice(&[a, p.branch_sign, p.branch_rhs.clamp(-BOUND_CLIP, BOUND_CLIP)]);
            self.ops += 1 + CUT_EDGE_FEATS as u64;
        }
    }

    fn set_candidates(&mut self, candidates: &[CutCandidate]) {
        self.cand_feats.clear();
        self.cand_edges.truncate(0);
        for (k, c) in candidates.iter().enumerate() {
            self.cand_feats.extend_from_slice(&c.features.to_array());
            self.ops += 1 + CAND_FEATS as u64;
            for &(j, a) in &c.coefs {
                self.cand_edges.row.push(k);
                self.cand_edges.var.push(j);
                self.cand_edges.feats.push(a);
                self.ops += 1 + CAND_EDGE_FEATS as u64;
            }
        }
    }

    pub fn num_cuts(&self) -> usize {
        self.cut_meta.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.cand_feats.len() / CAND_FEATS
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vars + self.num_cons + self.num_cuts() + self.num_candidates()
    }

    pub fn num_edges(&self) -> usize {
        self.con_edges.len() + self.cut_edges.len() + self.cand_edges.len()
    }

    pub fn var_features(&self) -> &[f64] {
        &self.var_feats
    }

    pub fn con_features(&self) -> &[f64] {
        &self.con_feats
    }

    /// Row-major `q × CUT_FEATS` block with the addition time normalized to the current round.
    pub fn cut_features(&self) -> Vec<f64> {
        let denom = self.current_round.max(1) as f64;
        self.cut_meta
            .iter()
            .flat_map(|m| [m[0] / denom, m[1], m[2]])
            .collect()
    }

    pub fn candidate_features(&self) -> &[f64] {
        &self.cand_feats
    }

    pub fn cut_node(&self, k: usize) -> usize {
        self.cut_node[k]
    }

    /// Normalized `(α, β)` rows of the added cuts whose node satisfies `keep`.
    pub fn cut_rows_where(&self, keep: impl Fn(usize) -> bool) -> Vec<(Vec<(usize, f64)>, f64)> {
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = (0..self.num_cuts())
            .map(|k| (Vec::new(), self.cut_rhs[k]))
            .collect();
        for e in 0..self.cut_edges.len() {
            rows[self.cut_edges.row[e]].0.push((self.cut_edges.var[e], self.cut_edges.coef(e)));
        }
        rows.into_iter()
            .enumerate()
            .filter(|(k, _)| keep(self.cut_node[*k]))
            .map(|(_, r)| r)
            .collect()
    }

    /// Original constraint rows as recovered from constraint vertices and edges.
    pub fn original_rows(&self) -> Vec<(Vec<(usize, f64)>, f64)> {
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = (0..self.num_cons)
            .map(|i| (Vec::new(), self.con_feats[i * CON_FEATS]))
            .collect();
        for e in 0..self.con_edges.len() {
            rows[self.con_edges.row[e]].0.push((self.con_edges.var[e], self.con_edges.coef(e)));
        }
        rows
    }

    /// Bitwise equality of every feature and edge, ignoring version and op counters.
    pub fn same_content(&self, other: &Self) -> bool {
        fn bits(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        fn block(a: &EdgeBlock, b: &EdgeBlock) -> bool {
            a.row == b.row && a.var == b.var && a.arity == b.arity && bits(&a.feats, &b.feats)
        }
        self.num_vars == other.num_vars
            && self.num_cons == other.num_cons
            && self.current_round == other.current_round
            && bits(&self.var_feats, &other.var_feats)
            && bits(&self.con_feats, &other.con_feats)
            && bits(&self.cut_features(), &other.cut_features())
            && bits(&self.cut_rhs, &other.cut_rhs)
            && self.cut_node == other.cut_node
            && bits(&self.cand_feats, &other.cand_feats)
            && block(&self.con_edges, &other.con_edges)
            && block(&self.cut_edges, &other.cut_edges)
            && block(&self.cand_edges, &other.cand_edges)
    }

    /// Debug dump used by test fixtures.
    pub fn dump(&self) -> GraphDump {
        let mut vertices = Vec::with_capacity(self.num_vertices());
        let mut push = |class: &'static str, feats: &[f64], arity: usize| {
            for chunk in feats.chunks(arity) {
                vertices.push(DumpVertex { class, features: chunk.to_vec() });
            }
        };
        push("variable", &self.var_feats, VAR_FEATS);
        push("constraint", &self.con_feats, CON_FEATS);
        push("cut", &self.cut_features(), CUT_FEATS);
        push("candidate", &self.cand_feats, CAND_FEATS);
        let con_base = self.num_vars;
        let cut_base = con_base + self.num_cons;
        let cand_base = cut_base + self.num_cuts();
        let mut edges = Vec::with_capacity(self.num_edges());
        for (block, base) in [
            (&self.con_edges, con_base),
            (&self.cut_edges, cut_base),
            (&self.cand_edges, cand_base),
        ] {
            for e in 0..block.len() {
                edges.push(DumpEdge {
                    u: block.var[e],
                    v: base + block.row[e],
                    features: block.features(e).to_vec(),
                });
            }
        }
        GraphDump { vertices, edges, version: self.version }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpVertex {
    pub class: &'static str,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DumpEdge {
    pub u: usize,
    pub v: usize,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphDump {
    pub vertices: Vec<DumpVertex>,
    pub edges: Vec<DumpEdge>,
    pub version: u64,
}
