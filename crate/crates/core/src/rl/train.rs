use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    compute_rewards, ppo_update, terminal_reward, BaselineTrace, CostMeasure, LossStats, PpoConfig, PpoSample, Trajectory,
};
use crate::error::{Error, Result};
use crate::generate::derive_seed;
use crate::instance::MipInstance;
use crate::parallel::parallel_map;
use crate::policy::{PolicyModel, PolicySelector};
use crate::tensor::{AdamState, Checkpoint};
use crate::tree::{solve, SolveConfig};

/// Baseline traces keyed by instance content hash.
pub type BaselineCache = HashMap<String, BaselineTrace>;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    /// Held-out greedy evaluation period (0 disables).
    pub eval_every: usize,
    /// Periodic checkpoint period (0 disables); needs `out_dir`.
    pub checkpoint_every: usize,
    pub solve: SolveConfig,
    pub workers: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            iterations: 200,
            episodes_per_iter: 8,
            eval_every: 10,
            checkpoint_every: 50,
            solve: SolveConfig { record_wall: false, ..Default::default() },
            workers: 1,
            seed: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub eval_nodes_mean: Option<f64>,
    pub eval_pivots_mean: Option<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
}

pub struct TrainOutcome<M> {
    pub model: M,
    pub opt: AdamState,
    pub best: Option<(usize, M)>,
    pub curve: Vec<CurveRow>,
    pub dropped_episodes: usize,
}

/// Result of one stochastic solver episode.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub nodes: usize,
    pub pivots: usize,
}

impl Episode {
    /// `R_0`, or `None` for an episode without decisions.
    pub fn ret(&self) -> Option<f64> {
        self.trajectory.returns.first().copied()
    }
}

pub fn baseline_for(cache: &BaselineCache, inst: &MipInstance) -> Result<BaselineTrace> {
    cache
        .get(&inst.content_hash())
        .cloned()
        .ok_or_else(|| Error::Invariant(format!("no baseline trace for {}", inst.name)))
}

/// Fills `cache` for every instance that is missing.
pub fn fill_baselines(cache: &mut BaselineCache, insts: &[MipInstance], cfg: &SolveConfig, workers: usize) -> Result<()> {
    let missing: Vec<&MipInstance> = {
        let mut seen = std::collections::HashSet::new();
        insts
            .iter()
            .filter(|i| !cache.contains_key(&i.content_hash()) && seen.insert(i.content_hash()))
            .collect()
    };
    let traces = parallel_map(&missing, workers, |_, inst| BaselineTrace::compute(inst, cfg));
    for (inst, trace) in missing.iter().zip(traces) {
        cache.insert(inst.content_hash(), trace?);
    }
    Ok(())
}

pub fn run_episode<M: PolicyModel + ?Sized>(
    model: Arc<M>,
    inst: &MipInstance,
    cfg: &SolveConfig,
    seed: u64,
    baseline: &BaselineTrace,
    ppo: &PpoConfig,
) -> Result<Episode> {
    let mut sel = PolicySelector::stochastic(model, seed);
    let out = solve(inst, cfg, &mut sel)?;
    let (rewards, mut terminal) =
        compute_rewards(&out.metrics.gap_trace, baseline, out.metrics.total_pivots, ppo.terminal_weight);
    if ppo.cost == CostMeasure::Wall {
        terminal = terminal_reward(baseline.wall_s, out.metrics.wall_time, 1e-6, ppo.terminal_weight);
    }
    let trajectory = Trajectory::new(sel.steps, rewards, terminal, ppo.gamma)?;
    Ok(Episode { trajectory, nodes: out.metrics.nodes_processed, pivots: out.metrics.total_pivots })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub nodes: Vec<usize>,
    pub pivots: Vec<usize>,
}

impl EvalSummary {
    pub fn nodes_mean(&self) -> f64 {
        self.nodes.iter().sum::<usize>() as f64 / self.nodes.len().max(1) as f64
    }

    pub fn pivots_mean(&self) -> f64 {
        self.pivots.iter().sum::<usize>() as f64 / self.pivots.len().max(1) as f64
    }
}

/// Greedy runs of `model` over `insts`.
pub fn evaluate_greedy<M: PolicyModel + ?Sized>(
    model: Arc<M>,
    insts: &[MipInstance],
    cfg: &SolveConfig,
    workers: usize,
) -> Result<EvalSummary> {
    let runs = parallel_map(insts, workers, |_, inst| solve(inst, cfg, PolicySelector::greedy(model.clone())));
    let mut s = EvalSummary { nodes: Vec::new(), pivots: Vec::new() };
    for r in runs {
        let r = r?;
        s.nodes.push(r.metrics.nodes_processed);
        s.pivots.push(r.metrics.total_pivots);
    }
    Ok(s)
}

/// Mean `R_0` of stochastic episodes over `insts × seeds` (episodes without decisions skipped).
pub fn mean_return<M: PolicyModel + ?Sized>(
    model: Arc<M>,
    insts: &[MipInstance],
    seeds: &[u64],
    cache: &BaselineCache,
    cfg: &TrainConfig,
) -> Result<f64> {
    let jobs: Vec<(usize, u64)> = (0..insts.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let rets = parallel_map(&jobs, cfg.workers, |_, &(i, s)| -> Result<Option<f64>> {
        let base = baseline_for(cache, &insts[i])?;
        Ok(run_episode(model.clone(), &insts[i], &cfg.solve, s, &base, &cfg.ppo)?.ret())
    });
    let mut vals = Vec::new();
    for r in rets {
        if let Some(v) = r? {
            vals.push(v);
        }
    }
    Ok(if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 })
}

fn save(model: &impl PolicyModel, opt: &AdamState, step: usize, dir: &Option<PathBuf>, name: &str) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Checkpoint::capture(model.store(), opt, &model.config_hash(), step as u64).save(dir.join(name))?;
    }
    Ok(())
}

/// PPO loop: roll out, reward, update, evaluate, checkpoint.
pub fn train<M: PolicyModel + Clone + 'static>(
    mut model: M,
    train_set: &[MipInstance],
    held_out: &[MipInstance],
    cfg: &TrainConfig,
    cache: &mut BaselineCache,
) -> Result<TrainOutcome<M>> {
    cfg.ppo.validate()?;
    if cfg.ppo.cost == CostMeasure::Wall && !cfg.solve.record_wall {
        return Err(Error::InvalidConfig("wall-time rewards need wall recording".into()));
    }
    if train_set.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if cfg.episodes_per_iter == 0 {
        return Err(Error::InvalidConfig("episodes per iteration must be positive".into()));
    }
    fill_baselines(cache, train_set, &cfg.solve, cfg.workers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x7261_696e));
    let mut opt = AdamState::new(model.store());
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut dropped = 0usize;
    let mut best: Option<(usize, f64, M)> = None;
    save(&model, &opt, 0, &cfg.out_dir, "init.json")?;

    for it in 0..cfg.iterations {
        let snapshot = Arc::new(model.clone());
        let jobs: Vec<(usize, u64)> = (0..cfg.episodes_per_iter)
            .map(|_| (rng.gen_range(0..train_set.len()), rng.gen::<u64>()))
            .collect();
        let episodes = parallel_map(&jobs, cfg.workers, |_, &(i, seed)| -> Result<Episode> {
            let base = baseline_for(cache, &train_set[i])?;
            run_episode(snapshot.clone(), &train_set[i], &cfg.solve, seed, &base, &cfg.ppo)
        });
        let mut samples: Vec<PpoSample> = Vec::new();
        let mut rets = Vec::new();
        for ep in episodes {
            match ep {
                Ok(ep) => {
                    rets.extend(ep.ret());
                    samples.extend(ep.trajectory.samples());
                }
                Err(Error::NonFinite(msg)) => return Err(Error::NonFinite(msg)),
                Err(_) => dropped += 1,
            }
        }
        let stats: LossStats = ppo_update(&mut model, &mut opt, &samples, &cfg.ppo, &mut rng)?;
        let mean_return = if rets.is_empty() { 0.0 } else { rets.iter().sum::<f64>() / rets.len() as f64 };

        let step = it + 1;
        let (mut eval_nodes, mut eval_pivots) = (None, None);
        if cfg.eval_every > 0 && !held_out.is_empty() && (step % cfg.eval_every == 0 || step == cfg.iterations) {
            let ev = evaluate_greedy(Arc::new(model.clone()), held_out, &cfg.solve, cfg.workers)?;
            eval_nodes = Some(ev.nodes_mean());
            eval_pivots = Some(ev.pivots_mean());
            if best.as_ref().map_or(true, |(_, b, _)| ev.nodes_mean() < *b) {
                save(&model, &opt, step, &cfg.out_dir, "best.json")?;
                best = Some((step, ev.nodes_mean(), model.clone()));
            }
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            save(&model, &opt, step, &cfg.out_dir, &format!("iter_{step:05}.json"))?;
        }
        curve.push(CurveRow {
            iteration: it,
            mean_return,
            eval_nodes_mean: eval_nodes,
            eval_pivots_mean: eval_pivots,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
        });
    }
    save(&model, &opt, cfg.iterations, &cfg.out_dir, "final.json")?;
    if let Some(dir) = &cfg.out_dir {
        write_curve(&dir.join("learning_curve.csv"), &curve)?;
    }
    Ok(TrainOutcome { model, opt, best: best.map(|(s, _, m)| (s, m)), curve, dropped_episodes: dropped })
}

pub fn write_curve(path: &std::path::Path, curve: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for row in curve {
        w.serialize(row).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
