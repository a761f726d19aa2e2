//! Experiment harness: instance sets, splits, evaluation and comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generate::{derive_seed, generate, GeneratorConfig};
use crate::instance::MipInstance;
use crate::parallel::parallel_map;
use crate::policy::SelectorTag;
use crate::tree::{solve, CutScope, RunResult, SolveConfig};

pub const TRAIN_FRACTION: f64 = 0.8;
const SPLIT_STREAM: u64 = 0x5350_4c49_54;

/// `count` instances of one family, instance `i` seeded by `derive_seed(seed, i)`.
pub fn generate_set(template: &GeneratorConfig, count: usize, seed: u64) -> Result<Vec<MipInstance>> {
    (0..count)
        .map(|i| {
            let cfg = GeneratorConfig { seed: derive_seed(seed, i as u64), ..template.clone() };
            let mut inst = generate(&cfg)?;
            inst.name = format!("{}_{i:04}", template.family.tag());
            Ok(inst)
        })
        .collect()
}

/// Writes each instance as `<name>.json` and returns the paths.
pub fn write_instances(insts: &[MipInstance], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    insts
        .iter()
        .map(|inst| {
            let path = dir.join(format!("{}.json", inst.name));
            inst.save(&path)?;
            Ok(path)
        })
        .collect()
}

/// Loads instance files; directories contribute their `*.json` entries sorted by name.
pub fn load_instances(paths: &[PathBuf]) -> Result<Vec<MipInstance>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|x| x == "json"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(MipInstance::load).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Test,
    All,
}

impl SplitPart {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitPart::Train),
            "test" => Ok(SplitPart::Test),
            "all" => Ok(SplitPart::All),
            other => Err(Error::InvalidConfig(format!("unknown split {other:?} (train | test | all)"))),
        }
    }
}

/// Seeded permutation of `0..count`: the first `round(0.8·count)` indices train, the rest test.
/// Both parts come back sorted.
pub fn split_indices(count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM)));
    let n_train = (TRAIN_FRACTION * count as f64).round() as usize;
    let (mut train, mut test) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn select_split(insts: Vec<MipInstance>, part: SplitPart, seed: u64) -> Vec<MipInstance> {
    if part == SplitPart::All {
        return insts;
    }
    let (train, test) = split_indices(insts.len(), seed);
    let keep: BTreeSet<usize> = match part {
        SplitPart::Train => train.into_iter().collect(),
        _ => test.into_iter().collect(),
    };
    insts.into_iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, x)| x).collect()
}

/// Runs one selector over `insts`, results in input order.
/// Random selectors get a per-instance seed from `cfg.seed`.
pub fn eval_selector(insts: &[MipInstance], tag: &SelectorTag, cfg: &SolveConfig, workers: usize) -> Result<Vec<RunResult>> {
    if insts.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    cfg.validate()?;
    let runs = parallel_map(insts, workers, |i, inst| -> Result<RunResult> {
        let sel = tag.build(derive_seed(cfg.seed, i as u64))?;
        Ok(solve(inst, cfg, sel)?.run_result(&inst.name, tag.label(), cfg.cut_scope))
    });
    runs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub scope: String,
    pub instances: usize,
    pub mean_pivots: f64,
    pub mean_nodes: f64,
    pub mean_wall_s: f64,
}

pub fn aggregate(results: &[RunResult]) -> Result<Aggregate> {
    let first = results.first().ok_or_else(|| Error::Validation("no results to aggregate".into()))?;
    if let Some(r) = results.iter().find(|r| r.selector != first.selector || r.scope != first.scope) {
        return Err(Error::Validation(format!(
            "mixed groups: {}/{} and {}/{}",
            first.selector, first.scope, r.selector, r.scope
        )));
    }
    let n = results.len() as f64;
    Ok(Aggregate {
        method: first.selector.clone(),
        scope: first.scope.clone(),
        instances: results.len(),
        mean_pivots: results.iter().map(|r| r.pivots as f64).sum::<f64>() / n,
        mean_nodes: results.iter().map(|r| r.nodes as f64).sum::<f64>() / n,
        mean_wall_s: results.iter().map(|r| r.wall_s).sum::<f64>() / n,
    })
}

/// Relative decrease `(reference − method)/reference`; 0 when both are 0.
pub fn relative_decrease(reference: f64, method: f64) -> f64 {
    if reference == 0.0 {
        if method == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (reference - method) / reference
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub scope: String,
    pub instances: usize,
    pub mean_pivots: f64,
    pub mean_nodes: f64,
    pub mean_wall_s: f64,
    pub improvement_pivots: f64,
    pub node_reduction: f64,
}

impl CompareRow {
    fn against(agg: &Aggregate, reference: &Aggregate, scope: String) -> Self {
        Self {
            method: agg.method.clone(),
            scope,
            instances: agg.instances,
            mean_pivots: agg.mean_pivots,
            mean_nodes: agg.mean_nodes,
            mean_wall_s: agg.mean_wall_s,
            improvement_pivots: relative_decrease(reference.mean_pivots, agg.mean_pivots),
            node_reduction: relative_decrease(reference.mean_nodes, agg.mean_nodes),
        }
    }
}

pub const COMPARE_HEADER: &str = "method,scope,instances,mean_pivots,mean_nodes,mean_wall_s,improvement_pivots,node_reduction";
const ABLATION_SCOPE: &str = "all_nodes_vs_root_only";

/// Groups results by `(selector, scope)` and compares each group against `reference`.
///
/// The reference group is the one whose selector equals `reference` and whose
/// scope matches the row's scope, falling back to the reference's first scope.
/// Every group must cover the same instance names. When a method has both
/// `root_only` and `all_nodes` groups an extra ablation row compares the two,
/// with root_only as the reference.
pub fn compare(results: &[RunResult], reference: &str) -> Result<Vec<CompareRow>> {
    let mut groups: BTreeMap<(String, String), Vec<RunResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.selector.clone(), r.scope.clone())).or_default().push(r.clone());
    }
    if groups.len() < 2 {
        return Err(Error::Validation(format!("comparison needs at least 2 selector groups, got {}", groups.len())));
    }
    let mut expected: Option<(&(String, String), BTreeSet<&str>)> = None;
    for (key, rs) in &groups {
        let names: BTreeSet<&str> = rs.iter().map(|r| r.instance.as_str()).collect();
        if names.len() != rs.len() {
            return Err(Error::Validation(format!("{}/{} has repeated instances", key.0, key.1)));
        }
        match &expected {
            None => expected = Some((key, names)),
            Some((k0, n0)) if *n0 != names => {
                let missing: Vec<_> = n0.symmetric_difference(&names).take(5).collect();
                return Err(Error::InstanceMismatch(format!("{}/{} vs {}/{}: {missing:?}", k0.0, k0.1, key.0, key.1)));
            }
            _ => {}
        }
    }
    let aggs: BTreeMap<(String, String), Aggregate> =
        groups.iter().map(|(k, rs)| Ok((k.clone(), aggregate(rs)?))).collect::<Result<_>>()?;
    let ref_default = aggs
        .iter()
        .find(|((m, _), _)| m == reference)
        .map(|(_, a)| a)
        .ok_or_else(|| Error::Validation(format!("reference selector {reference:?} not among results")))?;

    let mut rows = Vec::new();
    for ((method, scope), agg) in &aggs {
        let r = aggs.get(&(reference.to_string(), scope.clone())).unwrap_or(ref_default);
        rows.push(CompareRow::against(agg, r, scope.clone()));
        let (ro, an) = (CutScope::RootOnly.tag(), CutScope::AllNodes.tag());
        if scope == an {
            if let Some(root) = aggs.get(&(method.clone(), ro.to_string())) {
                rows.push(CompareRow::against(agg, root, ABLATION_SCOPE.to_string()));
            }
        }
    }
    Ok(rows)
}

fn fmt_wall(v: f64, no_wall: bool) -> String {
    if no_wall {
        "NA".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn compare_csv(rows: &[CompareRow], no_wall: bool) -> String {
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{},{:.6},{:.6}",
            r.method,
            r.scope,
            r.instances,
            r.mean_pivots,
            r.mean_nodes,
            fmt_wall(r.mean_wall_s, no_wall),
            r.improvement_pivots,
            r.node_reduction
        );
    }
    s
}

/// Aligned plain-text version of the comparison, percentages with one decimal.
pub fn compare_table(rows: &[CompareRow], no_wall: bool) -> String {
    let header = ["method", "scope", "n", "pivots", "nodes", "wall_s", "Im(pivots)", "node red."];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.scope.clone(),
                r.instances.to_string(),
                format!("{:.2}", r.mean_pivots),
                format!("{:.2}", r.mean_nodes),
                if no_wall { "NA".into() } else { format!("{:.3}", r.mean_wall_s) },
                format!("{:.1}%", 100.0 * r.improvement_pivots),
                format!("{:.1}%", 100.0 * r.node_reduction),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..8).map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let mut s = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, v)| if c < 2 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        s.push_str(parts.join("  ").trim_end());
        s.push('\n');
    };
    line(header.to_vec());
    for r in &body {
        line(r.iter().map(String::as_str).collect());
    }
    s
}

pub const RESULTS_HEADER: &str = "instance,method,scope,status,incumbent,dual_bound,nodes,pivots,cuts_added,wall_s";
pub const SUMMARY_HEADER: &str = "method,scope,instances,mean_pivots,mean_nodes,mean_wall_s";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x}"))
}

pub fn results_csv(results: &[RunResult], no_wall: bool) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.instance,
            r.selector,
            r.scope,
            r.status,
            opt(r.incumbent),
            opt(r.dual_bound),
            r.nodes,
            r.pivots,
            r.cuts_added,
            fmt_wall(r.wall_s, no_wall)
        );
    }
    s
}

pub fn summary_csv(aggs: &[Aggregate], no_wall: bool) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for a in aggs {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{}",
            a.method,
            a.scope,
            a.instances,
            a.mean_pivots,
            a.mean_nodes,
            fmt_wall(a.mean_wall_s, no_wall)
        );
    }
    s
}

/// Per-instance JSON files plus `results.csv` and `summary.csv` under `dir`.
/// JSON files go to `dir/<method>_<scope>/<instance>.json`.
pub fn write_eval(dir: &Path, groups: &[Vec<RunResult>], no_wall: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut all = Vec::new();
    let mut aggs = Vec::new();
    for g in groups {
        let agg = aggregate(g)?;
        let sub = dir.join(format!("{}_{}", agg.method, agg.scope));
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for r in g {
            let path = sub.join(format!("{}.json", r.instance));
            std::fs::write(&path, r.to_json_string()).map_err(|e| Error::io(&path, e))?;
        }
        all.extend(g.iter().cloned());
        aggs.push(agg);
    }
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write("results.csv", results_csv(&all, no_wall))?;
    write("summary.csv", summary_csv(&aggs, no_wall))
}

/// Loads run-result JSON files; directories are searched recursively.
pub fn load_results(paths: &[PathBuf]) -> Result<Vec<RunResult>> {
    fn walk(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> =
                std::fs::read_dir(p).map_err(|e| Error::io(p, e))?.filter_map(|e| e.ok().map(|e| e.path())).collect();
            entries.sort();
            for e in entries {
                walk(&e, out)?;
            }
        } else if p.extension().is_some_and(|x| x == "json") {
            out.push(p.to_path_buf());
        }
        Ok(())
    }
    let mut files = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")));
        }
        walk(p, &mut files)?;
    }
    files.iter().map(RunResult::load).collect()
}
