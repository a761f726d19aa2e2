//! Gomory fractional cut separation and candidate-cut features.

use serde::{Deserialize, Serialize};

use crate::instance::{MipInstance, SparseRow};
use crate::simplex::{LpProblem, LpSolution, LpStatus, TOL_FEAS, TOL_INTEGRALITY};

pub const DEFAULT_MAX_CUTS: usize = 20;

/// Coefficients further than this from an integer make a derived row unusable.
const INTEGRAL_COEF_TOL: f64 = 1e-6;
/// Tableau entries below this magnitude are treated as zero.
const TABLEAU_ZERO: f64 = 1e-11;
const MAX_CUT_COEF: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CutFeatures {
    pub parallelism: f64,
    pub efficacy: f64,
    pub support: f64,
    pub integral_support: f64,
    pub normalized_violation: f64,
}

impl CutFeatures {
    /// Feature order used by the graph and the networks.
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.parallelism,
            self.efficacy,
            self.support,
            self.integral_support,
            self.normalized_violation,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CutOrigin {
    pub node: usize,
    pub round: usize,
    pub generator: CutGenerator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CutGenerator {
    #[default]
    GomoryFractional,
}

/// A separated inequality `αᵀx ≤ β` with `‖α‖₂ = 1`.
///
/// `raw` keeps the integer-coefficient form the cut was derived in; that is
/// the row handed to the LP so the new slack stays integral for later rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CutCandidate {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub raw: SparseRow,
    pub features: CutFeatures,
    pub origin: CutOrigin,
}

impl CutCandidate {
    /// Normalizes `raw` to unit length. Returns `None` for an all-zero row.
    pub fn from_raw(raw: SparseRow, origin: CutOrigin) -> Option<Self> {
        let norm = raw.coefs.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt();
        if raw.coefs.is_empty() || norm == 0.0 {
            return None;
        }
        Some(Self {
            coefs: raw.coefs.iter().map(|&(j, a)| (j, a / norm)).collect(),
            rhs: raw.rhs / norm,
            raw,
            features: CutFeatures::default(),
            origin,
        })
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// `αᵀx − β`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.activity(x) - self.rhs
    }
}

fn is_near_integer(v: f64, tol: f64) -> bool {
    (v - v.round()).abs() <= tol
}

/// Integer-aware floor: values within 1e-9 of an integer snap to it first.
fn safe_floor(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 {
        r
    } else {
        v.floor()
    }
}

/// Which LP columns take integer values at every integer-feasible point:
/// integer structurals, and slacks of rows with integer data over integer
/// variables only.
pub fn integral_columns(lp: &LpProblem, inst: &MipInstance) -> Vec<bool> {
    let mut cols = inst.integer_mask();
    cols.resize(lp.num_structural(), false);
    for row in &lp.rows {
        let integral = is_near_integer(row.rhs, 1e-12)
            && row
                .coefs
                .iter()
                .all(|&(j, a)| cols[j] && is_near_integer(a, 1e-12));
        cols.push(integral);
    }
    cols
}

/// Gomory fractional cuts from the rows of the most fractional basic integer
/// variables: descending fractionality, ties by lowest variable index.
pub fn separate_gomory(
    lp: &LpProblem,
    sol: &LpSolution,
    inst: &MipInstance,
    max_cuts: usize,
    node: usize,
    round: usize,
) -> Vec<CutCandidate> {
    if sol.status != LpStatus::Optimal || max_cuts == 0 {
        return Vec::new();
    }
    let n = lp.num_structural();
    let integral = integral_columns(lp, inst);

    let mut sources: Vec<(usize, f64)> = inst
        .integer_set
        .iter()
        .filter(|&&j| sol.is_basic(j))
        .filter_map(|&j| {
            let f = sol.x[j] - sol.x[j].floor();
            let frac = f.min(1.0 - f);
            (frac > TOL_INTEGRALITY).then_some((j, frac))
        })
        .collect();
    sources.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let origin = CutOrigin {
        node,
        round,
        generator: CutGenerator::GomoryFractional,
    };
    let mut out: Vec<CutCandidate> = Vec::new();
    for (j, _) in sources {
        if out.len() >= max_cuts {
            break;
        }
        let Some(raw) = derive_cut(lp, sol, &integral, j) else {
            continue;
        };
        if out.iter().any(|c| c.raw == raw) {
            continue;
        }
        let Some(mut cut) = CutCandidate::from_raw(raw, origin) else {
            continue;
        };
        if cut.violation(&sol.x) < TOL_FEAS {
            continue;
        }
        cut.features = compute_features(&cut, &sol.x, inst);
        out.push(cut);
    }
    debug_assert!(out.iter().all(|c| c.coefs.iter().all(|&(k, _)| k < n)));
    out
}

/// Chvátal–Gomory form of the fractional cut on the tableau row of basic `j`,
/// in structural space: `x_j + Σ ⌊â_k⌋ y_k ≤ ⌊x̄_j⌋` with every nonbasic
/// shifted to `y_k ≥ 0` from its active bound, then slacks substituted out.
fn derive_cut(lp: &LpProblem, sol: &LpSolution, integral: &[bool], j: usize) -> Option<SparseRow> {
    let n = lp.num_structural();
    let (row, _) = sol.tableau_row(j).ok()?;
    let xj = sol.x[j];

    // Dense coefficient vector over all columns, and the right-hand side.
    let mut g = vec![0.0; lp.num_cols()];
    let mut h = safe_floor(xj);
    g[j] = 1.0;
    for (k, a) in row {
        if a.abs() <= TABLEAU_ZERO {
            continue;
        }
        if !integral[k] {
            return None;
        }
        let at_upper = sol.col_at_upper[k];
        let bound = if at_upper { lp.col_upper(k) } else { lp.col_lower(k) };
        if !bound.is_finite() || !is_near_integer(bound, 1e-9) {
            return None;
        }
        let bound = bound.round();
        let shifted = if at_upper { -a } else { a };
        let f = safe_floor(shifted);
        if f == 0.0 {
            continue;
        }
        if at_upper {
            // f·y = f·(u − x)
            g[k] -= f;
            h -= f * bound;
        } else {
            // f·y = f·(x − l)
            g[k] += f;
            h += f * bound;
        }
    }
    // s_i = b_i − a_iᵀx
    for (i, r) in lp.rows.iter().enumerate() {
        let gs = g[n + i];
        if gs == 0.0 {
            continue;
        }
        h -= gs * r.rhs;
        for &(k, a) in &r.coefs {
            g[k] -= gs * a;
        }
        g[n + i] = 0.0;
    }
    let mut coefs = Vec::new();
    for (k, &v) in g[..n].iter().enumerate() {
        if v.abs() <= INTEGRAL_COEF_TOL {
            continue;
        }
        if !is_near_integer(v, INTEGRAL_COEF_TOL) || v.abs() > MAX_CUT_COEF {
            return None;
        }
        coefs.push((k, v.round()));
    }
    if coefs.is_empty() || !is_near_integer(h, INTEGRAL_COEF_TOL) || h.abs() > MAX_CUT_COEF * n as f64 {
        return None;
    }
    Some(SparseRow::new(coefs, h.round()))
}

/// The five candidate features for a normalized cut at LP point `x`.
pub fn compute_features(cut: &CutCandidate, x: &[f64], inst: &MipInstance) -> CutFeatures {
    let alpha_norm = cut.coefs.iter().map(|&(_, a)| a * a).sum::<f64>().sqrt();
    let violation = cut.violation(x);
    let c_norm = inst.objective.iter().map(|c| c * c).sum::<f64>().sqrt();
    let parallelism = if c_norm == 0.0 || alpha_norm == 0.0 {
        0.0
    } else {
        let dot: f64 = cut.coefs.iter().map(|&(j, a)| a * inst.objective[j]).sum();
        (dot.abs() / (c_norm * alpha_norm)).min(1.0)
    };
    let nnz = cut.coefs.len();
    let int_nnz = cut.coefs.iter().filter(|&&(j, _)| inst.is_integer(j)).count();
    CutFeatures {
        parallelism,
        efficacy: violation / alpha_norm,
        support: nnz as f64 / inst.num_vars.max(1) as f64,
        integral_support: if nnz == 0 { 0.0 } else { int_nnz as f64 / nnz as f64 },
        normalized_violation: (violation / cut.rhs.abs().max(1e-9)).max(0.0),
    }
}

/// Cutoff distance along the ray from the LP point toward the incumbent.
/// Non-violated cuts score 0.
pub fn directed_cutoff(cut: &CutCandidate, x: &[f64], incumbent: Option<&[f64]>) -> f64 {
    let Some(inc) = incumbent else { return 0.0 };
    let violation = cut.violation(x);
    if violation <= 0.0 {
        return 0.0;
    }
    let diff: Vec<f64> = inc.iter().zip(x).map(|(a, b)| a - b).collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return 0.0;
    }
    let along: f64 = cut.coefs.iter().map(|&(j, a)| a * diff[j] / norm).sum();
    if along > 1e-9 {
        violation / along.max(1e-9)
    } else {
        0.0
    }
}
