//! Branch-and-cut engine.
//!
//! Best-bound node selection (ties FIFO), most-fractional branching (ties by
//! lowest index), and up to `rounds_per_node` separate → select → add →
//! re-solve cycles at every node inside the configured cut scope. Cuts are
//! local to the subtree of the node that received them.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cuts::{separate_gomory, CutCandidate, DEFAULT_MAX_CUTS};
use crate::error::{Error, Result};
use crate::instance::MipInstance;
use crate::simplex::{solve_lp_with, Basis, LpProblem, LpSolution, LpStatus, SimplexOptions, DEFAULT_PIVOT_CAP, TOL_INTEGRALITY};
use crate::state_graph::{improvement_effect, CutProvenance, GraphDelta, StateGraph};

const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutScope {
    RootOnly,
    AllNodes,
    None,
}

impl CutScope {
    pub fn tag(self) -> &'static str {
        match self {
            CutScope::RootOnly => "root_only",
            CutScope::AllNodes => "all_nodes",
            CutScope::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "root_only" => Ok(CutScope::RootOnly),
            "all_nodes" => Ok(CutScope::AllNodes),
            "none" => Ok(CutScope::None),
            other => Err(Error::InvalidConfig(format!("unknown cut scope {other:?}"))),
        }
    }

    fn covers(self, depth: usize) -> bool {
        match self {
            CutScope::RootOnly => depth == 0,
            CutScope::AllNodes => true,
            CutScope::None => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub cut_scope: CutScope,
    pub rounds_per_node: usize,
    pub max_cuts_per_round: usize,
    pub node_limit: Option<usize>,
    /// Budget on total simplex pivots over the whole run.
    pub pivot_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Per-LP pivot cap; hitting it aborts the run.
    pub lp_pivot_cap: usize,
    pub seed: u64,
    /// When false, wall time is reported as 0 so outputs are reproducible.
    pub record_wall: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            cut_scope: CutScope::AllNodes,
            rounds_per_node: 2,
            max_cuts_per_round: DEFAULT_MAX_CUTS,
            node_limit: None,
            pivot_limit: None,
            time_limit: None,
            lp_pivot_cap: DEFAULT_PIVOT_CAP,
            seed: 0,
            record_wall: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_limit == Some(0) || self.pivot_limit == Some(0) || self.lp_pivot_cap == 0 {
            return Err(Error::InvalidConfig("limits must be positive".into()));
        }
        if self.time_limit == Some(Duration::ZERO) {
            return Err(Error::InvalidConfig("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchDirection {
    Down,
    Up,
}

/// `x_var ≤ value` (down) or `x_var ≥ value` (up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchConstraint {
    pub var: usize,
    pub direction: BranchDirection,
    pub value: f64,
}

impl BranchConstraint {
    pub fn sign(&self) -> f64 {
        match self.direction {
            BranchDirection::Down => 1.0,
            BranchDirection::Up => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Open,
    Branched,
    PrunedBound,
    PrunedInfeasible,
    Integral,
}

#[derive(Debug, Clone)]
pub struct BncNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: Option<BranchConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Indices into the run's added-cut list active at this node, in LP row order.
    pub cut_ids: Vec<usize>,
    pub basis: Option<Basis>,
    pub dual_bound: f64,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

impl RunStatus {
    pub fn tag(self) -> &'static str {
        match self {
            RunStatus::Optimal => "optimal",
            RunStatus::Infeasible => "infeasible",
            RunStatus::Unbounded => "unbounded",
            RunStatus::LimitReached => "limit_reached",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub nodes_processed: usize,
    pub total_pivots: usize,
    pub wall_time: f64,
    pub cuts_added: usize,
    pub decisions: usize,
    /// `(decision index, global gap after the decision)`.
    pub gap_trace: Vec<(usize, f64)>,
    pub status: RunStatus,
    pub incumbent_value: Option<f64>,
    pub dual_bound: f64,
}

/// Primal–dual gap `|p − d| / max(|p|, 1e-9)`, capped at 1; 1 without an incumbent.
pub fn global_gap(primal: Option<f64>, dual: f64) -> f64 {
    let Some(p) = primal else { return 1.0 };
    let diff = (p - dual).abs();
    if diff <= 1e-9 {
        return 0.0;
    }
    (diff / p.abs().max(1e-9)).min(1.0)
}

/// What a selector sees at a decision point.
pub struct DecisionContext<'a> {
    pub t: usize,
    pub node: usize,
    pub depth: usize,
    pub round: usize,
    pub instance: &'a MipInstance,
    pub candidates: &'a [CutCandidate],
    pub lp_x: &'a [f64],
    /// Node-local variable bounds; cuts are valid within them.
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub incumbent: Option<&'a [f64]>,
    /// Present when the selector asked for it.
    pub graph: Option<&'a StateGraph>,
}

/// Cut-selection strategy plugged into the engine.
pub trait CutSelector {
    fn tag(&self) -> String;

    fn wants_graph(&self) -> bool {
        false
    }

    /// Returns the chosen candidate indices in the order they should be added.
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>>;
}

impl<S: CutSelector + ?Sized> CutSelector for &mut S {
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn wants_graph(&self) -> bool {
        (**self).wants_graph()
    }
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        (**self).select(ctx)
    }
}

impl<S: CutSelector + ?Sized> CutSelector for Box<S> {
    fn tag(&self) -> String {
        (**self).tag()
    }
    fn wants_graph(&self) -> bool {
        (**self).wants_graph()
    }
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        (**self).select(ctx)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub metrics: RunMetrics,
    pub incumbent: Option<Vec<f64>>,
    pub nodes: Vec<BncNode>,
    pub cuts: Vec<CutProvenance>,
    /// Node ids in processing order.
    pub order: Vec<usize>,
    /// Global dual bound when each node in `order` was picked.
    pub dual_trace: Vec<f64>,
}

impl SolveOutcome {
    pub fn run_result(&self, instance: &str, selector: &str, scope: CutScope) -> RunResult {
        let m = &self.metrics;
        RunResult {
            instance: instance.to_string(),
            selector: selector.to_string(),
            scope: scope.tag().to_string(),
            status: m.status.tag().to_string(),
            incumbent: m.incumbent_value,
            dual_bound: m.dual_bound.is_finite().then_some(m.dual_bound),
            nodes: m.nodes_processed,
            pivots: m.total_pivots,
            cuts_added: m.cuts_added,
            wall_s: m.wall_time,
            gap_trace: m.gap_trace.clone(),
        }
    }

    /// Structural rows of a node's LP: original rows then its active cuts.
    pub fn node_rows(&self, inst: &MipInstance, node: usize) -> Vec<crate::instance::SparseRow> {
        let mut rows = inst.rows.clone();
        rows.extend(self.nodes[node].cut_ids.iter().map(|&k| self.cuts[k].cut.raw.clone()));
        rows
    }

    /// Whether `ancestor` lies on the path from the root to `node` (inclusive).
    pub fn is_ancestor(&self, ancestor: usize, node: usize) -> bool {
        let mut cur = Some(node);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.nodes[c].parent;
        }
        false
    }
}

/// Serialized outcome of one `(instance, selector, scope)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub instance: String,
    pub selector: String,
    pub scope: String,
    pub status: String,
    pub incumbent: Option<f64>,
    pub dual_bound: Option<f64>,
    pub nodes: usize,
    pub pivots: usize,
    pub cuts_added: usize,
    pub wall_s: f64,
    pub gap_trace: Vec<(usize, f64)>,
}

impl RunResult {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("run result serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let r: RunResult = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("run-result JSON (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if !r.wall_s.is_finite() || r.wall_s < 0.0 {
            return Err(Error::Schema(format!("wall_s must be a non-negative number, got {}", r.wall_s)));
        }
        CutScope::parse(&r.scope).map_err(|_| Error::Schema(format!("unknown scope {:?}", r.scope)))?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    bound: f64,
    id: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: smallest bound first, then smallest id.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn most_fractional(x: &[f64], inst: &MipInstance) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in &inst.integer_set {
        let f = x[j] - x[j].floor();
        let frac = f.min(1.0 - f);
        if frac > TOL_INTEGRALITY && best.map_or(true, |(_, b)| frac > b) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Node fate after an LP solve.
enum Fate {
    Continue,
    Closed,
}

struct Engine<'a, S: CutSelector> {
    inst: &'a MipInstance,
    cfg: &'a SolveConfig,
    selector: S,
    lp_opts: SimplexOptions,
    nodes: Vec<BncNode>,
    cuts: Vec<CutProvenance>,
    queue: BinaryHeap<QueueEntry>,
    incumbent: Option<(f64, Vec<f64>)>,
    pivots: usize,
    decisions: usize,
    cuts_added: usize,
    gap_trace: Vec<(usize, f64)>,
    graph: Option<StateGraph>,
    graph_synced: usize,
}

impl<'a, S: CutSelector> Engine<'a, S> {
    fn incumbent_value(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(v, _)| *v)
    }

    fn cutoff(&self, bound: f64) -> bool {
        matches!(self.incumbent_value(), Some(p) if bound >= p - PRUNE_TOL)
    }

    /// Global dual bound with `current` (a still-open node bound) included.
    fn dual_bound(&self, current: Option<f64>) -> f64 {
        let mut d = self.queue.peek().map_or(f64::INFINITY, |e| e.bound);
        if let Some(c) = current {
            d = d.min(c);
        }
        match self.incumbent_value() {
            Some(p) => d.min(p),
            None => d,
        }
    }

    fn lp_for(&self, node: &BncNode) -> LpProblem {
        let mut rows = self.inst.rows.clone();
        rows.extend(node.cut_ids.iter().map(|&k| self.cuts[k].cut.raw.clone()));
        LpProblem {
            objective: self.inst.objective.clone(),
            rows,
            lower: node.lower.clone(),
            upper: node.upper.clone(),
        }
    }

    fn solve(&mut self, lp: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution> {
        let sol = solve_lp_with(lp, warm, &self.lp_opts);
        self.pivots += sol.pivot_count;
        if sol.status == LpStatus::IterLimit {
            return Err(Error::IterLimit(self.lp_opts.pivot_cap));
        }
        Ok(sol)
    }

    /// Records an integral LP point as incumbent when it improves.
    fn try_incumbent(&mut self, x: &[f64]) {
        let mut point = x.to_vec();
        for &j in &self.inst.integer_set {
            point[j] = point[j].round();
        }
        let value = self.inst.objective_value(&point);
        if self.incumbent_value().map_or(true, |p| value < p - PRUNE_TOL) {
            self.incumbent = Some((value, point));
        }
    }

    /// Settles a freshly solved LP at node `id`: infeasible, integral, pruned or open.
    fn settle(&mut self, id: usize, sol: &LpSolution) -> Fate {
        if sol.status == LpStatus::Infeasible {
            self.nodes[id].status = NodeStatus::PrunedInfeasible;
            self.nodes[id].dual_bound = f64::INFINITY;
            return Fate::Closed;
        }
        let bound = sol.objective.max(self.nodes[id].dual_bound);
        self.nodes[id].dual_bound = bound;
        self.nodes[id].basis = Some(sol.basis.clone());
        if most_fractional(&sol.x, self.inst).is_none() {
            self.try_incumbent(&sol.x);
            self.nodes[id].status = NodeStatus::Integral;
            return Fate::Closed;
        }
        if self.cutoff(bound) {
            self.nodes[id].status = NodeStatus::PrunedBound;
            return Fate::Closed;
        }
        Fate::Continue
    }

    fn cut_rounds(&mut self, id: usize, mut sol: LpSolution) -> Result<(Fate, LpSolution)> {
        let mut lp = self.lp_for(&self.nodes[id]);
        for round in 0..self.cfg.rounds_per_node {
            let candidates = separate_gomory(&lp, &sol, self.inst, self.cfg.max_cuts_per_round, id, round);
            if candidates.is_empty() {
                break;
            }
            let t = self.decisions;
            if self.selector.wants_graph() {
                self.sync_graph(&candidates, t)?;
            }
            let node = &self.nodes[id];
            let ctx = DecisionContext {
                t,
                node: id,
                depth: node.depth,
                round,
                instance: self.inst,
                candidates: &candidates,
                lp_x: &sol.x,
                lower: &node.lower,
                upper: &node.upper,
                incumbent: self.incumbent.as_ref().map(|(_, x)| x.as_slice()),
                graph: self.graph.as_ref().filter(|_| self.selector.wants_graph()),
            };
            let chosen = self.selector.select(&ctx)?;
            validate_selection(&chosen, candidates.len())?;
            self.decisions += 1;
            if chosen.is_empty() {
                let gap = global_gap(self.incumbent_value(), self.dual_bound(Some(self.nodes[id].dual_bound)));
                self.gap_trace.push((t, gap));
                break;
            }

            let z_before = sol.objective;
            let (sign, rhs) = self.nodes[id]
                .branch
                .map_or((0.0, 0.0), |b| (b.sign(), b.value));
            let first_new = self.cuts.len();
            for &k in &chosen {
                let cut = candidates[k].clone();
                lp.rows.push(cut.raw.clone());
                self.nodes[id].cut_ids.push(self.cuts.len());
                self.cuts.push(CutProvenance {
                    cut,
                    node: id,
                    addition_round: t,
                    improvement: 0.0,
                    branch_sign: sign,
                    branch_rhs: rhs,
                });
            }
            self.cuts_added += chosen.len();
            sol = self.solve(&lp, Some(&sol.basis))?;
            let effect = if sol.status == LpStatus::Infeasible {
                1.0
            } else {
                improvement_effect(z_before, sol.objective)
            };
            for p in &mut self.cuts[first_new..] {
                p.improvement = effect;
            }
            let fate = self.settle(id, &sol);
            let open = matches!(fate, Fate::Continue).then_some(self.nodes[id].dual_bound);
            let gap = global_gap(self.incumbent_value(), self.dual_bound(open));
            self.gap_trace.push((t, gap));
            if let Fate::Closed = fate {
                return Ok((Fate::Closed, sol));
            }
        }
        Ok((Fate::Continue, sol))
    }

    fn sync_graph(&mut self, candidates: &[CutCandidate], t: usize) -> Result<()> {
        match &mut self.graph {
            None => {
                self.graph = Some(StateGraph::build(self.inst, &self.cuts, candidates, t));
            }
            Some(g) => {
                let delta = GraphDelta {
                    base_version: g.version,
                    new_cuts: self.cuts[self.graph_synced..].to_vec(),
                    candidates: candidates.to_vec(),
                    current_round: t,
                };
                g.apply(&delta)?;
            }
        }
        self.graph_synced = self.cuts.len();
        Ok(())
    }

    fn branch(&mut self, id: usize, x: &[f64]) {
        let j = most_fractional(x, self.inst).expect("fractional LP point");
        let parent = &self.nodes[id];
        let (floor, ceil) = (x[j].floor(), x[j].ceil());
        let mut down = BncNode {
            id: self.nodes.len(),
            parent: Some(id),
            depth: parent.depth + 1,
            branch: Some(BranchConstraint { var: j, direction: BranchDirection::Down, value: floor }),
            lower: parent.lower.clone(),
            upper: parent.upper.clone(),
            cut_ids: parent.cut_ids.clone(),
            basis: parent.basis.clone(),
            dual_bound: parent.dual_bound,
            status: NodeStatus::Open,
        };
        down.upper[j] = floor;
        let mut up = down.clone();
        up.id = down.id + 1;
        up.branch = Some(BranchConstraint { var: j, direction: BranchDirection::Up, value: ceil });
        up.upper[j] = parent.upper[j];
        up.lower[j] = ceil;
        self.nodes[id].status = NodeStatus::Branched;
        for child in [down, up] {
            self.queue.push(QueueEntry { bound: child.dual_bound, id: child.id });
            self.nodes.push(child);
        }
    }
}

fn validate_selection(chosen: &[usize], len: usize) -> Result<()> {
    let mut seen = vec![false; len];
    for &k in chosen {
        if k >= len || seen[k] {
            return Err(Error::Validation(format!(
                "selector returned invalid or repeated candidate index {k} (of {len})"
            )));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Solves `inst` to optimality (or until a limit) with `selector` choosing cuts.
pub fn solve<S: CutSelector>(inst: &MipInstance, cfg: &SolveConfig, selector: S) -> Result<SolveOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let root = BncNode {
        id: 0,
        parent: None,
        depth: 0,
        branch: None,
        lower: inst.var_lower.clone(),
        upper: inst.var_upper.clone(),
        cut_ids: Vec::new(),
        basis: None,
        dual_bound: f64::NEG_INFINITY,
        status: NodeStatus::Open,
    };
    let mut eng = Engine {
        inst,
        cfg,
        selector,
        lp_opts: SimplexOptions { pivot_cap: cfg.lp_pivot_cap, record_trace: false },
        nodes: vec![root],
        cuts: Vec::new(),
        queue: BinaryHeap::new(),
        incumbent: None,
        pivots: 0,
        decisions: 0,
        cuts_added: 0,
        gap_trace: Vec::new(),
        graph: None,
        graph_synced: 0,
    };
    eng.queue.push(QueueEntry { bound: f64::NEG_INFINITY, id: 0 });

    let mut nodes_processed = 0usize;
    let mut status = None;
    let (mut order, mut dual_trace) = (Vec::new(), Vec::new());
    while let Some(entry) = eng.queue.pop() {
        let limit_hit = cfg.node_limit.is_some_and(|l| nodes_processed >= l)
            || cfg.pivot_limit.is_some_and(|l| eng.pivots >= l)
            || cfg.time_limit.is_some_and(|l| start.elapsed() >= l);
        if limit_hit {
            eng.queue.push(entry);
            status = Some(RunStatus::LimitReached);
            break;
        }
        let id = entry.id;
        if eng.cutoff(eng.nodes[id].dual_bound) {
            eng.nodes[id].status = NodeStatus::PrunedBound;
            continue;
        }
        nodes_processed += 1;
        order.push(id);
        dual_trace.push(eng.dual_bound(Some(entry.bound)));
        let lp = eng.lp_for(&eng.nodes[id]);
        let warm = eng.nodes[id].basis.clone();
        let sol = eng.solve(&lp, warm.as_ref())?;
        if sol.status == LpStatus::Unbounded {
            status = Some(RunStatus::Unbounded);
            break;
        }
        if let Fate::Closed = eng.settle(id, &sol) {
            continue;
        }
        let sol = if cfg.cut_scope.covers(eng.nodes[id].depth) {
            match eng.cut_rounds(id, sol)? {
                (Fate::Closed, _) => continue,
                (Fate::Continue, s) => s,
            }
        } else {
            sol
        };
        eng.branch(id, &sol.x);
    }

    let status = status.unwrap_or(if eng.incumbent.is_some() {
        RunStatus::Optimal
    } else {
        RunStatus::Infeasible
    });
    let dual_bound = match status {
        RunStatus::Optimal => eng.incumbent_value().unwrap(),
        RunStatus::Infeasible => f64::INFINITY,
        RunStatus::Unbounded => f64::NEG_INFINITY,
        RunStatus::LimitReached => eng.dual_bound(None),
    };
    let incumbent_value = eng.incumbent_value();
    let metrics = RunMetrics {
        nodes_processed,
        total_pivots: eng.pivots,
        wall_time: if cfg.record_wall { start.elapsed().as_secs_f64() } else { 0.0 },
        cuts_added: eng.cuts_added,
        decisions: eng.decisions,
        gap_trace: eng.gap_trace,
        status,
        incumbent_value,
        dual_bound,
    };
    Ok(SolveOutcome {
        metrics,
        incumbent: eng.incumbent.map(|(_, x)| x),
        nodes: eng.nodes,
        cuts: eng.cuts,
        order,
        dual_trace,
    })
}

/// One recorded `(node, round)` decision.
#[derive(Debug, Clone)]
pub struct DecisionPoint {
    pub t: usize,
    pub node: usize,
    pub round: usize,
    pub candidates: Vec<CutCandidate>,
    pub graph: StateGraph,
}

/// Wraps a selector and records every decision point it is shown.
pub struct Recording<S> {
    pub inner: S,
    pub points: Vec<DecisionPoint>,
}

impl<S: CutSelector> CutSelector for Recording<S> {
    fn tag(&self) -> String {
        self.inner.tag()
    }
    fn wants_graph(&self) -> bool {
        true
    }
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Vec<usize>> {
        self.points.push(DecisionPoint {
            t: ctx.t,
            node: ctx.node,
            round: ctx.round,
            candidates: ctx.candidates.to_vec(),
            graph: ctx.graph.expect("recording requests the graph").clone(),
        });
        self.inner.select(ctx)
    }
}

/// Runs a solve and returns its decision points in processing order.
pub fn decision_points<S: CutSelector>(
    inst: &MipInstance,
    cfg: &SolveConfig,
    selector: S,
) -> Result<(Vec<DecisionPoint>, SolveOutcome)> {
    let mut rec = Recording { inner: selector, points: Vec::new() };
    let outcome = solve(inst, cfg, &mut rec)?;
    Ok((rec.points, outcome))
}
