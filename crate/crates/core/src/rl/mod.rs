//! PPO training of cut-selection policies against solver rewards.
//!
//! Step reward: gap improvement minus the default selector's improvement at
//! the same decision index. Terminal reward: relative pivot savings against
//! that same baseline run (wall-time savings with [`CostMeasure::Wall`]).

mod ppo;
mod train;

pub use ppo::{ppo_update, sample_loss, LossStats, PpoSample, SampleLoss};
pub use train::{
    baseline_for, evaluate_greedy, fill_baselines, mean_return, run_episode, train, write_curve, BaselineCache, CurveRow,
    Episode, EvalSummary, TrainConfig, TrainOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::MipInstance;
use crate::policy::{DefaultScore, PolicyStep};
use crate::tree::{solve, SolveConfig};

/// Run cost used by the terminal reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostMeasure {
    /// Total simplex pivots; deterministic.
    #[default]
    Pivots,
    /// Wall-clock seconds; needs wall recording and is not reproducible.
    Wall,
}

impl CostMeasure {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pivots" => Ok(Self::Pivots),
            "wall" => Ok(Self::Wall),
            _ => Err(Error::InvalidConfig(format!("unknown cost measure {s:?} (pivots | wall)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    pub terminal_weight: f64,
    pub cost: CostMeasure,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            clip: 0.2,
            epochs: 4,
            minibatch: 32,
            lr: 3e-4,
            value_weight: 0.5,
            entropy_weight: 0.01,
            terminal_weight: 1.0,
            cost: CostMeasure::Pivots,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::InvalidConfig(format!("clip ε must lie in (0, 1), got {}", self.clip)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!("γ must lie in (0, 1], got {}", self.gamma)));
        }
        if self.epochs == 0 || self.minibatch == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidConfig("epochs, minibatch and lr must be positive".into()));
        }
        Ok(())
    }
}

/// The default selector's per-step gap improvements and total pivots on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrace {
    pub improvements: Vec<f64>,
    pub cost: usize,
    #[serde(default)]
    pub wall_s: f64,
}

impl BaselineTrace {
    pub fn compute(inst: &MipInstance, cfg: &SolveConfig) -> Result<Self> {
        let out = solve(inst, cfg, DefaultScore::default())?;
        Ok(Self {
            improvements: gap_improvements(&out.metrics.gap_trace),
            cost: out.metrics.total_pivots,
            wall_s: out.metrics.wall_time,
        })
    }

    pub fn at(&self, t: usize) -> f64 {
        self.improvements.get(t).copied().unwrap_or(0.0)
    }
}

/// `gap_{t−1} − gap_t` with `gap_{−1} = 1`.
pub fn gap_improvements(trace: &[(usize, f64)]) -> Vec<f64> {
    let mut prev = 1.0;
    trace
        .iter()
        .map(|&(_, g)| {
            let d = prev - g;
            prev = g;
            d
        })
        .collect()
}

/// Per-step rewards and the terminal reward.
pub fn compute_rewards(
    gap_trace: &[(usize, f64)],
    baseline: &BaselineTrace,
    method_cost: usize,
    terminal_weight: f64,
) -> (Vec<f64>, f64) {
    let rewards = gap_improvements(gap_trace)
        .into_iter()
        .enumerate()
        .map(|(t, d)| d - baseline.at(t))
        .collect();
    (rewards, terminal_reward(baseline.cost as f64, method_cost as f64, 1.0, terminal_weight))
}

/// `λ·(C_base − C_method) / max(C_base, floor)`.
pub fn terminal_reward(base: f64, method: f64, floor: f64, weight: f64) -> f64 {
    weight * (base - method) / base.max(floor)
}

/// `R_t = r_t + γ·R_{t+1}` with the terminal reward folded into the last step.
pub fn discounted_returns(rewards: &[f64], terminal: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        let r = if t + 1 == rewards.len() { rewards[t] + terminal } else { rewards[t] };
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// One episode's decision steps with rewards and returns.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<PolicyStep>,
    pub rewards: Vec<f64>,
    pub terminal: f64,
    pub returns: Vec<f64>,
}

impl Trajectory {
    pub fn new(steps: Vec<PolicyStep>, rewards: Vec<f64>, terminal: f64, gamma: f64) -> Result<Self> {
        if steps.len() != rewards.len() {
            return Err(Error::Invariant(format!("{} steps but {} rewards", steps.len(), rewards.len())));
        }
        let returns = discounted_returns(&rewards, terminal, gamma);
        Ok(Self { steps, rewards, terminal, returns })
    }

    pub fn samples(&self) -> impl Iterator<Item = PpoSample> + '_ {
        self.steps.iter().zip(&self.returns).map(|(s, &r)| PpoSample {
            graph: s.graph.clone(),
            selected: s.action.selected.clone(),
            old_log_prob: s.action.log_prob,
            value: s.value,
            ret: r,
        })
    }
}

/// `Σ_{k=0}^{n} n!/(n−k)!`: ordered subsets of `n` candidates.
pub fn count_action_space(n: usize) -> Result<u64> {
    if n > 12 {
        return Err(Error::Overflow(n));
    }
    let mut total = 0u64;
    let mut term = 1u64;
    for k in 0..=n as u64 {
        total += term;
        term *= n as u64 - k;
    }
    Ok(total)
}
