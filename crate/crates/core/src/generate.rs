//! Seeded synthetic instance families.
//!
//! Every generator is a pure function of its [`GeneratorConfig`]: the same
//! config always yields byte-identical instance JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{MipInstance, SparseRow};

const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SetCovering,
    MaxIndependentSet,
    MultiKnapsack,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::SetCovering => "set_covering",
            Family::MaxIndependentSet => "max_independent_set",
            Family::MultiKnapsack => "multi_knapsack",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "set_covering" | "setcover" => Ok(Family::SetCovering),
            "max_independent_set" | "mis" => Ok(Family::MaxIndependentSet),
            "multi_knapsack" | "knapsack" => Ok(Family::MultiKnapsack),
            other => Err(Error::InvalidConfig(format!("unknown family {other:?}"))),
        }
    }
}

/// Size parameters are interpreted per family:
/// set covering uses `n` columns, `m` rows and `density`;
/// MIS uses `p` vertices and `density` as the edge probability;
/// multi-knapsack uses `n` items and `m` weight rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub density: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn set_covering(n: usize, m: usize, density: f64, seed: u64) -> Self {
        Self { family: Family::SetCovering, n, m, p: 0, density, seed }
    }

    pub fn max_independent_set(p: usize, density: f64, seed: u64) -> Self {
        Self { family: Family::MaxIndependentSet, n: 0, m: 0, p, density, seed }
    }

    pub fn multi_knapsack(n: usize, k: usize, seed: u64) -> Self {
        Self { family: Family::MultiKnapsack, n, m: k, p: 0, density: 1.0, seed }
    }

    fn check(&self) -> Result<()> {
        let positive = match self.family {
            Family::SetCovering | Family::MultiKnapsack => self.n > 0 && self.m > 0,
            Family::MaxIndependentSet => self.p > 0,
        };
        if !positive {
            return Err(Error::InvalidConfig(format!(
                "{}: size parameters must be positive",
                self.family.tag()
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        Ok(())
    }
}

/// Mixes a base seed with an index into an independent per-instance seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate(config: &GeneratorConfig) -> Result<MipInstance> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.family {
        Family::SetCovering => set_covering(config, &mut rng),
        Family::MaxIndependentSet => {
            let p = config.p;
            let mut edges = Vec::new();
            for u in 0..p {
                for v in (u + 1)..p {
                    if rng.gen::<f64>() < config.density {
                        edges.push((u, v));
                    }
                }
            }
            mis_from_edges(format!("mis_p{}_s{}", p, config.seed), p, &edges)
        }
        Family::MultiKnapsack => {
            let (n, k) = (config.n, config.m);
            let profits: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=30) as f64).collect();
            let weights: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.gen_range(1..=30) as f64).collect())
                .collect();
            let capacities: Vec<f64> = weights
                .iter()
                .map(|w| (0.5 * w.iter().sum::<f64>()).floor())
                .collect();
            multi_knapsack_from_data(
                format!("knapsack_n{}_k{}_s{}", n, k, config.seed),
                &profits,
                &weights,
                &capacities,
            )
        }
    }
}

fn set_covering(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<MipInstance> {
    let (n, m) = (config.n, config.m);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        // an uncoverable (empty) row is redrawn, up to MAX_RETRIES times
        let coefs = (0..MAX_RETRIES)
            .map(|_| {
                (0..n)
                    .filter(|_| rng.gen::<f64>() < config.density)
                    .map(|j| (j, -1.0))
                    .collect::<Vec<(usize, f64)>>()
            })
            .find(|c| !c.is_empty())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "set covering n={n} m={m} density={}: could not draw a non-empty row in {MAX_RETRIES} attempts",
                    config.density
                ))
            })?;
        rows.push(SparseRow::new(coefs, -1.0));
    }
    let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=100) as f64).collect();
    MipInstance::new(
        format!("setcover_n{}_m{}_s{}", n, m, config.seed),
        costs,
        rows,
        vec![0.0; n],
        vec![1.0; n],
        (0..n).collect(),
    )
}

/// Maximum independent set on an explicit graph, stored as `min −Σx`.
pub fn mis_from_edges(name: String, p: usize, edges: &[(usize, usize)]) -> Result<MipInstance> {
    let rows = edges
        .iter()
        .map(|&(u, v)| {
            if u == v || u >= p || v >= p {
                return Err(Error::InvalidConfig(format!("bad edge ({u}, {v}) for p = {p}")));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            Ok(SparseRow::new(vec![(a, 1.0), (b, 1.0)], 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    MipInstance::new(name, vec![-1.0; p], rows, vec![0.0; p], vec![1.0; p], (0..p).collect())
}

/// Binary multi-dimensional knapsack, stored as `min −Σ p_j x_j`.
pub fn multi_knapsack_from_data(
    name: String,
    profits: &[f64],
    weights: &[Vec<f64>],
    capacities: &[f64],
) -> Result<MipInstance> {
    let n = profits.len();
    if weights.len() != capacities.len() || weights.iter().any(|w| w.len() != n) {
        return Err(Error::InvalidConfig("knapsack weight matrix shape mismatch".into()));
    }
    let rows = weights
        .iter()
        .zip(capacities)
        .map(|(w, &cap)| {
            let coefs: Vec<(usize, f64)> = w
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(j, &a)| (j, a))
                .collect();
            if coefs.is_empty() {
                return Err(Error::InvalidConfig("knapsack row would be empty".into()));
            }
            Ok(SparseRow::new(coefs, cap))
        })
        .collect::<Result<Vec<_>>>()?;
    MipInstance::new(
        name,
        profits.iter().map(|p| -p).collect(),
        rows,
        vec![0.0; n],
        vec![1.0; n],
        (0..n).collect(),
    )
}
