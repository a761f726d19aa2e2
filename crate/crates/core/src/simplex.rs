//! Bounded-variable primal simplex on a dense tableau.
//!
//! Every row `aᵀx ≤ b` gets a slack `s ≥ 0` so the working system is
//! `[A | I] (x, s) = b`. Column `j < n` is structural, column `n + i` is the
//! slack of row `i`. Appending rows never renumbers existing columns, so a
//! basis from a parent LP stays meaningful after cuts are added.
//!
//! Infeasible starting bases are repaired with a composite phase one that
//! minimizes the sum of bound violations of the basic variables, which lets
//! children warm-start from their parent's basis after a bound change.

use crate::instance::{MipInstance, SparseRow};

pub const TOL_FEAS: f64 = 1e-7;
pub const TOL_INTEGRALITY: f64 = 1e-6;
pub const DEFAULT_PIVOT_CAP: usize = 50_000;

const TOL_PIVOT: f64 = 1e-9;
const TOL_DJ: f64 = 1e-9;
const BLAND_AFTER: usize = 1000;
const REFACTOR_EVERY: usize = 100;

/// LP relaxation view: instance rows plus any appended cut rows, with
/// (possibly node-local) structural bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn from_instance(inst: &MipInstance) -> Self {
        Self {
            objective: inst.objective.clone(),
            rows: inst.rows.clone(),
            lower: inst.var_lower.clone(),
            upper: inst.var_upper.clone(),
        }
    }

    pub fn num_structural(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Structural plus slack columns.
    pub fn num_cols(&self) -> usize {
        self.objective.len() + self.rows.len()
    }

    pub fn col_lower(&self, j: usize) -> f64 {
        if j < self.num_structural() {
            self.lower[j]
        } else {
            0.0
        }
    }

    pub fn col_upper(&self, j: usize) -> f64 {
        if j < self.num_structural() {
            self.upper[j]
        } else {
            f64::INFINITY
        }
    }
}

/// Basic column per tableau row, plus which structural nonbasics sit at
/// their upper bound.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub pivot_cap: usize,
    /// Record the phase-two objective after every iteration.
    pub record_trace: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_cap: DEFAULT_PIVOT_CAP,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values.
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub pivot_count: usize,
    /// Values of every column, structural then slack.
    pub values: Vec<f64>,
    /// Nonbasic-at-upper flag for every column.
    pub col_at_upper: Vec<bool>,
    pub objective_trace: Vec<f64>,
    num_structural: usize,
    tableau: Tableau,
}

impl LpSolution {
    pub fn num_structural(&self) -> usize {
        self.num_structural
    }

    pub fn num_rows(&self) -> usize {
        self.tableau.m
    }

    pub fn is_basic(&self, col: usize) -> bool {
        self.basis.basic.contains(&col)
    }

    /// Tableau row of a basic column: `x_B = rhs − Σ coef_j · x_j` over the
    /// nonbasic columns `j` (returned in increasing column order, zeros kept).
    pub fn tableau_row(&self, basic_col: usize) -> crate::Result<(Vec<(usize, f64)>, f64)> {
        let r = self
            .basis
            .basic
            .iter()
            .position(|&c| c == basic_col)
            .ok_or(crate::Error::NotBasic(basic_col))?;
        let mut is_basic = vec![false; self.tableau.nc];
        for &c in &self.basis.basic {
            is_basic[c] = true;
        }
        let row = self.tableau.row(r);
        let coefs = (0..self.tableau.nc)
            .filter(|&j| !is_basic[j])
            .map(|j| (j, row[j]))
            .collect();
        Ok((coefs, self.tableau.rhs[r]))
    }
}

/// Convenience wrapper over [`solve_lp_with`] using default options.
pub fn solve_lp(problem: &LpProblem, warm: Option<&Basis>) -> LpSolution {
    solve_lp_with(problem, warm, &SimplexOptions::default())
}

#[derive(Debug, Clone)]
struct Tableau {
    m: usize,
    nc: usize,
    data: Vec<f64>,
    rhs: Vec<f64>,
}

impl Tableau {
    fn from_problem(p: &LpProblem) -> Self {
        let n = p.num_structural();
        let m = p.num_rows();
        let nc = n + m;
        let mut data = vec![0.0; m * nc];
        let mut rhs = Vec::with_capacity(m);
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                data[i * nc + j] = a;
            }
            data[i * nc + n + i] = 1.0;
            rhs.push(row.rhs);
        }
        Self { m, nc, data, rhs }
    }

    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.nc..(r + 1) * self.nc]
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.nc + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let nc = self.nc;
        let inv = 1.0 / self.data[r * nc + c];
        {
            let row = &mut self.data[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[c] = 1.0;
        }
        self.rhs[r] *= inv;
        let (pivot_row, pivot_rhs) = (self.data[r * nc..(r + 1) * nc].to_vec(), self.rhs[r]);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * nc + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * nc..(i + 1) * nc];
            for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
        }
    }

    /// Pivots the requested columns into the basis where numerically possible
    /// and fills the remaining rows (preferring each row's own slack).
    fn install(&mut self, wanted: &[usize], n: usize) -> Vec<usize> {
        let mut head = vec![usize::MAX; self.m];
        let mut is_basic = vec![false; self.nc];
        for &c in wanted {
            if c >= self.nc || is_basic[c] {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if head[r] != usize::MAX {
                    continue;
                }
                let a = self.at(r, c).abs();
                if a > 1e-9 && best.map_or(true, |(_, b)| a > b) {
                    best = Some((r, a));
                }
            }
            if let Some((r, _)) = best {
                self.pivot(r, c);
                head[r] = c;
                is_basic[c] = true;
            }
        }
        for r in 0..self.m {
            if head[r] != usize::MAX {
                continue;
            }
            let own = n + r;
            let col = if !is_basic[own] && self.at(r, own).abs() > 1e-9 {
                own
            } else {
                let mut best = (usize::MAX, 0.0);
                for c in 0..self.nc {
                    let a = self.at(r, c).abs();
                    if !is_basic[c] && a > best.1 {
                        best = (c, a);
                    }
                }
                best.0
            };
            if col == usize::MAX {
                // Structurally empty row: keep its slack, the tableau row is 0 = rhs.
                head[r] = own;
                is_basic[own] = true;
                continue;
            }
            self.pivot(r, col);
            head[r] = col;
            is_basic[col] = true;
        }
        head
    }
}

struct Workspace<'a> {
    p: &'a LpProblem,
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    t: Tableau,
    head: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    values: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(p: &'a LpProblem, warm: Option<&Basis>) -> Self {
        let n = p.num_structural();
        let nc = p.num_cols();
        let lower: Vec<f64> = (0..nc).map(|j| p.col_lower(j)).collect();
        let upper: Vec<f64> = (0..nc).map(|j| p.col_upper(j)).collect();
        let mut cost = p.objective.clone();
        cost.resize(nc, 0.0);
        let mut t = Tableau::from_problem(p);
        let wanted: Vec<usize> = match warm {
            Some(b) if b.basic.len() <= p.num_rows() => b.basic.clone(),
            _ => Vec::new(),
        };
        let head = t.install(&wanted, n);
        let mut is_basic = vec![false; nc];
        for &c in &head {
            is_basic[c] = true;
        }
        let mut at_upper = vec![false; nc];
        if let Some(b) = warm {
            for (j, &u) in b.at_upper.iter().enumerate().take(n) {
                at_upper[j] = u && upper[j].is_finite() && !is_basic[j];
            }
        }
        let mut ws = Self {
            p,
            n,
            lower,
            upper,
            cost,
            t,
            head,
            is_basic,
            at_upper,
            values: vec![0.0; nc],
        };
        ws.recompute_values();
        ws
    }

    fn recompute_values(&mut self) {
        let nc = self.t.nc;
        for j in 0..nc {
            if !self.is_basic[j] {
                self.values[j] = if self.at_upper[j] {
                    self.upper[j]
                } else {
                    self.lower[j]
                };
            }
        }
        for r in 0..self.t.m {
            let row = self.t.row(r);
            let mut v = self.t.rhs[r];
            for j in 0..nc {
                if !self.is_basic[j] && row[j] != 0.0 {
                    v -= row[j] * self.values[j];
                }
            }
            self.values[self.head[r]] = v;
        }
    }

    fn refactor(&mut self) {
        let mut t = Tableau::from_problem(self.p);
        let head = t.install(&self.head, self.n);
        self.t = t;
        self.is_basic.iter_mut().for_each(|b| *b = false);
        for &c in &head {
            self.is_basic[c] = true;
        }
        for j in 0..self.t.nc {
            if self.is_basic[j] {
                self.at_upper[j] = false;
            }
        }
        self.head = head;
        self.recompute_values();
    }

    fn phase_weights(&self) -> Option<Vec<f64>> {
        let mut any = false;
        let w: Vec<f64> = self
            .head
            .iter()
            .map(|&c| {
                let x = self.values[c];
                if x < self.lower[c] - TOL_FEAS {
                    any = true;
                    -1.0
                } else if x > self.upper[c] + TOL_FEAS {
                    any = true;
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        any.then_some(w)
    }

    fn structural_objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.values[j]).sum()
    }
}

pub fn solve_lp_with(problem: &LpProblem, warm: Option<&Basis>, opts: &SimplexOptions) -> LpSolution {
    let n = problem.num_structural();
    let mut ws = Workspace::new(problem, warm);
    let nc = ws.t.nc;
    let m = ws.t.m;

    let mut pivots = 0usize;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut trace = Vec::new();
    let mut since_refactor = 0usize;

    let bounds_conflict = (0..n).any(|j| ws.lower[j] > ws.upper[j] + TOL_FEAS);
    let status = if bounds_conflict {
        LpStatus::Infeasible
    } else {
        let mut dj = vec![0.0; nc];
        loop {
            if pivots >= opts.pivot_cap {
                break LpStatus::IterLimit;
            }
            if since_refactor >= REFACTOR_EVERY {
                ws.refactor();
                since_refactor = 0;
            }
            let weights = ws.phase_weights();
            let phase_one = weights.is_some();

            // Reduced costs d_j = c_j − Σ_r cB_r T[r][j] (phase one: c = 0, cB = w).
            for (j, d) in dj.iter_mut().enumerate() {
                *d = if phase_one { 0.0 } else { ws.cost[j] };
            }
            for r in 0..m {
                let cb = match &weights {
                    Some(w) => w[r],
                    None => ws.cost[ws.head[r]],
                };
                if cb == 0.0 {
                    continue;
                }
                for (d, &a) in dj.iter_mut().zip(ws.t.row(r)) {
                    *d -= cb * a;
                }
            }

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..nc {
                if ws.is_basic[j] || ws.upper[j] - ws.lower[j] <= 0.0 {
                    continue;
                }
                let dir = if !ws.at_upper[j] && dj[j] < -TOL_DJ {
                    1.0
                } else if ws.at_upper[j] && dj[j] > TOL_DJ {
                    -1.0
                } else {
                    continue;
                };
                let score = dj[j].abs();
                if bland {
                    entering = Some((j, dir, score));
                    break;
                }
                if entering.map_or(true, |(_, _, s)| score > s) {
                    entering = Some((j, dir, score));
                }
            }
            let Some((enter, dir, _)) = entering else {
                break if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };

            // Ratio test. `None` leaving row means a bound flip of the entering column.
            let mut theta = ws.upper[enter] - ws.lower[enter];
            let mut leaving: Option<(usize, bool, f64)> = None;
            for r in 0..m {
                let alpha = ws.t.at(r, enter);
                if alpha.abs() <= TOL_PIVOT {
                    continue;
                }
                let c = ws.head[r];
                let rate = -dir * alpha;
                let x = ws.values[c];
                let (lo, up) = (ws.lower[c], ws.upper[c]);
                let limit = if rate < 0.0 {
                    if x > up + TOL_FEAS {
                        Some(((x - up) / -rate, true))
                    } else if x >= lo - TOL_FEAS {
                        Some(((x - lo).max(0.0) / -rate, false))
                    } else {
                        None
                    }
                } else if x < lo - TOL_FEAS {
                    Some(((lo - x) / rate, false))
                } else if x <= up + TOL_FEAS && up.is_finite() {
                    Some(((up - x).max(0.0) / rate, true))
                } else {
                    None
                };
                let Some((lim, to_upper)) = limit else { continue };
                let better = match leaving {
                    _ if lim < theta - 1e-12 => true,
                    None => lim < theta,
                    Some((lr, _, la)) if (lim - theta).abs() <= 1e-12 => {
                        if bland {
                            c < ws.head[lr]
                        } else {
                            alpha.abs() > la || (alpha.abs() == la && c < ws.head[lr])
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = lim.min(theta);
                    leaving = Some((r, to_upper, alpha.abs()));
                }
            }

            if !theta.is_finite() {
                break if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Unbounded
                };
            }

            let step = dir * theta;
            if theta > 0.0 {
                ws.values[enter] += step;
                for r in 0..m {
                    let a = ws.t.at(r, enter);
                    if a != 0.0 {
                        ws.values[ws.head[r]] -= step * a;
                    }
                }
            }
            match leaving {
                None => {
                    ws.at_upper[enter] = dir > 0.0;
                    ws.values[enter] = if dir > 0.0 {
                        ws.upper[enter]
                    } else {
                        ws.lower[enter]
                    };
                }
                Some((r, to_upper, _)) => {
                    let out = ws.head[r];
                    ws.values[out] = if to_upper { ws.upper[out] } else { ws.lower[out] };
                    ws.at_upper[out] = to_upper;
                    ws.is_basic[out] = false;
                    ws.t.pivot(r, enter);
                    ws.head[r] = enter;
                    ws.is_basic[enter] = true;
                    ws.at_upper[enter] = false;
                    since_refactor += 1;
                }
            }
            pivots += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            if opts.record_trace && ws.phase_weights().is_none() {
                trace.push(ws.structural_objective());
            }
        }
    };

    if status == LpStatus::Optimal && since_refactor > 0 {
        // Clean accumulated drift before exposing the tableau.
        ws.refactor();
    }
    let objective = match status {
        LpStatus::Optimal => ws.structural_objective(),
        LpStatus::Unbounded => f64::NEG_INFINITY,
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::IterLimit => f64::NAN,
    };
    LpSolution {
        status,
        x: ws.values[..n].to_vec(),
        objective,
        basis: Basis {
            basic: ws.head.clone(),
            at_upper: ws.at_upper[..n].to_vec(),
        },
        pivot_count: pivots,
        values: ws.values.clone(),
        col_at_upper: ws.at_upper.clone(),
        objective_trace: trace,
        num_structural: n,
        tableau: ws.t,
    }
}
