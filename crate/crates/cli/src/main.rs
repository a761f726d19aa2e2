use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use gcs_core::experiment::{self, SplitPart};
use gcs_core::generate::{Family, GeneratorConfig};
use gcs_core::instance::MipInstance;
use gcs_core::policy::{load_model_checkpoint, GcsConfig, GcsModel, PolicyModel, SbpConfig, SbpModel, SelectorTag};
use gcs_core::rl::{self, BaselineCache, CostMeasure, PpoConfig, TrainConfig};
use gcs_core::tree::{solve, CutScope, SolveConfig};
use gcs_core::{Error, Result};

#[derive(Parser)]
#[command(name = "gcs", version, about = "Branch-and-cut MIP solver with learned cut selection")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded instance set.
    Gen(GenArgs),
    /// Solve one instance and print its run-result JSON.
    Solve(SolveArgs),
    /// Train a cut-selection policy with PPO.
    Train(TrainArgs),
    /// Evaluate selectors over an instance set.
    Eval(EvalArgs),
    /// Compare result sets against a reference selector.
    Compare(CompareArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Set-covering row density or MIS edge probability.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Solver limits and cut settings shared by solve, train and eval.
#[derive(Args, Clone)]
struct LimitArgs {
    #[arg(long, default_value_t = 2)]
    rounds: usize,
    #[arg(long, default_value_t = 20)]
    max_cuts: usize,
    #[arg(long)]
    node_limit: Option<usize>,
    #[arg(long)]
    pivot_limit: Option<usize>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    /// Report wall time as 0 / NA so outputs are byte-reproducible.
    #[arg(long)]
    no_wall: bool,
}

impl LimitArgs {
    fn config(&self, scope: CutScope, seed: u64) -> Result<SolveConfig> {
        let time_limit = match self.time_limit_s {
            Some(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::InvalidConfig(format!("--time-limit-s must be positive, got {t}")))
            }
            t => t.map(Duration::from_secs_f64),
        };
        let cfg = SolveConfig {
            cut_scope: scope,
            rounds_per_node: self.rounds,
            max_cuts_per_round: self.max_cuts,
            node_limit: self.node_limit,
            pivot_limit: self.pivot_limit,
            time_limit,
            seed,
            record_wall: !self.no_wall,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "all_nodes")]
    scope: String,
    #[arg(long, default_value = "default")]
    selector: String,
    /// Checkpoint for a bare `gcs` or `sbp` selector.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the run-result JSON here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Instance files or directories; the 80% training part of the split is used.
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, default_value = "gcs")]
    model: String,
    #[arg(long, default_value = "all_nodes")]
    scope: String,
    /// Initialize from this checkpoint instead of a fresh model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 8)]
    episodes: usize,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    #[arg(long, default_value_t = 50)]
    checkpoint_every: usize,
    #[arg(long)]
    lr: Option<f64>,
    /// Terminal reward cost: pivots | wall.
    #[arg(long, default_value = "pivots")]
    reward_cost: String,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    /// One or more selectors, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "default")]
    selector: Vec<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// One or more scopes, comma separated.
    #[arg(long = "scope", value_delimiter = ',', default_value = "all_nodes")]
    scopes: Vec<String>,
    #[arg(long, default_value = "test")]
    split: String,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Run-result files or directories (searched recursively).
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "default")]
    reference: String,
    #[arg(long)]
    no_wall: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn selector_tag(s: &str, checkpoint: &Option<PathBuf>) -> Result<SelectorTag> {
    match (s, checkpoint) {
        ("gcs", Some(p)) => Ok(SelectorTag::Gcs(p.clone())),
        ("sbp", Some(p)) => Ok(SelectorTag::Sbp(p.clone())),
        ("gcs" | "sbp", None) => Err(Error::InvalidConfig(format!("selector {s} needs --checkpoint or {s}:<path>"))),
        _ => SelectorTag::parse(s),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let family = Family::parse(&a.family)?;
    let template = match family {
        Family::SetCovering => {
            GeneratorConfig::set_covering(a.n.unwrap_or(60), a.m.unwrap_or(30), a.density.unwrap_or(0.25), 0)
        }
        Family::MaxIndependentSet => GeneratorConfig::max_independent_set(a.p.unwrap_or(40), a.density.unwrap_or(0.2), 0),
        Family::MultiKnapsack => GeneratorConfig::multi_knapsack(a.n.unwrap_or(30), a.m.unwrap_or(3), 0),
    };
    let insts = experiment::generate_set(&template, a.count, a.seed)?;
    let paths = experiment::write_instances(&insts, &a.out_dir)?;
    println!("{}", serde_json::json!({ "family": family.tag(), "written": paths.len(), "out_dir": a.out_dir }));
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let inst = MipInstance::load(&a.instance)?;
    let tag = selector_tag(&a.selector, &a.checkpoint)?;
    let cfg = a.limits.config(CutScope::parse(&a.scope)?, a.seed)?;
    let out = solve(&inst, &cfg, tag.build(a.seed)?)?;
    let json = out.run_result(&inst.name, tag.label(), cfg.cut_scope).to_json_string();
    if let Some(dir) = &a.out_dir {
        write_file(&dir.join(format!("{}_{}_{}.json", inst.name, tag.label(), cfg.cut_scope.tag())), &json)?;
    }
    println!("{json}");
    Ok(())
}

fn run_training<M: PolicyModel + Clone + 'static>(mut model: M, a: &TrainArgs) -> Result<()> {
    if let Some(ck) = &a.checkpoint {
        load_model_checkpoint(&mut model, ck)?;
    }
    let all = experiment::load_instances(&a.instances)?;
    let train_set = experiment::select_split(all.clone(), SplitPart::Train, a.seed);
    let held_out = experiment::select_split(all, SplitPart::Test, a.seed);
    let mut ppo = PpoConfig { seed: a.seed, cost: CostMeasure::parse(&a.reward_cost)?, ..Default::default() };
    if let Some(lr) = a.lr {
        ppo.lr = lr;
    }
    let cfg = TrainConfig {
        ppo,
        iterations: a.iterations,
        episodes_per_iter: a.episodes,
        eval_every: a.eval_every,
        checkpoint_every: a.checkpoint_every,
        solve: a.limits.config(CutScope::parse(&a.scope)?, a.seed)?,
        workers: a.workers,
        seed: a.seed,
        out_dir: Some(a.out_dir.clone()),
    };
    let mut cache = BaselineCache::new();
    let out = rl::train(model, &train_set, &held_out, &cfg, &mut cache)?;
    let last = out.curve.last();
    println!(
        "{}",
        serde_json::json!({
            "iterations": out.curve.len(),
            "train_instances": train_set.len(),
            "held_out_instances": held_out.len(),
            "dropped_episodes": out.dropped_episodes,
            "final_mean_return": last.map(|r| r.mean_return),
            "best_iteration": out.best.as_ref().map(|b| b.0),
            "out_dir": a.out_dir,
        })
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    match a.model.as_str() {
        "gcs" => run_training(GcsModel::new(GcsConfig::default(), a.seed)?, &a),
        "sbp" => run_training(SbpModel::new(SbpConfig::default(), a.seed)?, &a),
        other => Err(Error::InvalidConfig(format!("unknown model {other:?} (gcs | sbp)"))),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let part = SplitPart::parse(&a.split)?;
    let insts = experiment::select_split(experiment::load_instances(&a.instances)?, part, a.seed);
    if insts.is_empty() {
        return Err(Error::Validation(format!("{} split of the instance set is empty", a.split)));
    }
    let tags: Vec<SelectorTag> = a.selector.iter().map(|s| selector_tag(s, &a.checkpoint)).collect::<Result<_>>()?;
    let scopes: Vec<CutScope> = a.scopes.iter().map(|s| CutScope::parse(s)).collect::<Result<_>>()?;
    let mut groups = Vec::new();
    for tag in &tags {
        for &scope in &scopes {
            let cfg = a.limits.config(scope, a.seed)?;
            groups.push(experiment::eval_selector(&insts, tag, &cfg, a.workers)?);
        }
    }
    experiment::write_eval(&a.out_dir, &groups, a.limits.no_wall)?;
    let aggs: Vec<_> = groups.iter().map(|g| experiment::aggregate(g)).collect::<Result<_>>()?;
    print!("{}", experiment::summary_csv(&aggs, a.limits.no_wall));
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let results = experiment::load_results(&a.results)?;
    let rows = experiment::compare(&results, &a.reference)?;
    let csv = experiment::compare_csv(&rows, a.no_wall);
    let table = experiment::compare_table(&rows, a.no_wall);
    if let Some(dir) = &a.out_dir {
        write_file(&dir.join("comparison.csv"), &csv)?;
        write_file(&dir.join("comparison.txt"), &table)?;
    }
    print!("{table}");
    Ok(())
}

fn error_record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_record("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let res = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Compare(a) => cmd_compare(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
