//! MIP data model (minimize `cᵀx` s.t. `Ax ≤ b`, `lb ≤ x ≤ ub`, `x_j ∈ ℤ` for `j ∈ I`)
//! and the instance JSON exchange format.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const INSTANCE_FORMAT_VERSION: u64 = 1;

/// One `aᵀx ≤ b` row in sparse form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn nnz(&self) -> usize {
        self.coefs.len()
    }
}

/// A mixed-integer program in canonical minimization form.
#[derive(Debug, Clone, PartialEq)]
pub struct MipInstance {
    pub name: String,
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<SparseRow>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    /// Sorted, strictly increasing indices of the integer variables.
    pub integer_set: Vec<usize>,
}

impl MipInstance {
    /// Builds an instance and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        objective: Vec<f64>,
        rows: Vec<SparseRow>,
        var_lower: Vec<f64>,
        var_upper: Vec<f64>,
        integer_set: Vec<usize>,
    ) -> Result<Self> {
        let inst = Self {
            name: name.into(),
            num_vars: objective.len(),
            objective,
            rows,
            var_lower,
            var_upper,
            integer_set,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn num_cons(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseRow::nnz).sum()
    }

    pub fn is_integer(&self, j: usize) -> bool {
        self.integer_set.binary_search(&j).is_ok()
    }

    /// Boolean mask over variables, `true` for members of `I`.
    pub fn integer_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vars];
        for &j in &self.integer_set {
            mask[j] = true;
        }
        mask
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks bounds, rows and integrality of `x` at tolerance `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.num_vars {
            return false;
        }
        for j in 0..self.num_vars {
            if x[j] < self.var_lower[j] - tol || x[j] > self.var_upper[j] + tol {
                return false;
            }
        }
        if self
            .integer_set
            .iter()
            .any(|&j| (x[j] - x[j].round()).abs() > tol)
        {
            return false;
        }
        self.rows.iter().all(|r| r.dot(x) <= r.rhs + tol)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars;
        if self.objective.len() != n || self.var_lower.len() != n || self.var_upper.len() != n {
            return Err(Error::Schema(format!(
                "vector lengths (c={}, lb={}, ub={}) must all equal n={}",
                self.objective.len(),
                self.var_lower.len(),
                self.var_upper.len(),
                n
            )));
        }
        for (k, &j) in self.integer_set.iter().enumerate() {
            if j >= n {
                return Err(Error::Schema(format!(
                    "integers[{k}] = {j} is out of range for n = {n}"
                )));
            }
            if k > 0 && self.integer_set[k - 1] >= j {
                return Err(Error::Schema(format!(
                    "integers must be strictly increasing (integers[{}] = {}, integers[{k}] = {j})",
                    k - 1,
                    self.integer_set[k - 1]
                )));
            }
        }
        for j in 0..n {
            let (lb, ub) = (self.var_lower[j], self.var_upper[j]);
            if !self.objective[j].is_finite() {
                return Err(Error::Invariant(format!("c[{j}] is not finite")));
            }
            if !lb.is_finite() {
                return Err(Error::Invariant(format!("lb[{j}] must be finite")));
            }
            if ub.is_nan() || ub == f64::NEG_INFINITY {
                return Err(Error::Invariant(format!("ub[{j}] is invalid")));
            }
            if lb > ub {
                return Err(Error::Invariant(format!("lb[{j}] = {lb} > ub[{j}] = {ub}")));
            }
        }
        let mut seen = vec![usize::MAX; n];
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Invariant(format!("rows[{i}].rhs is not finite")));
            }
            for &(j, a) in &row.coefs {
                if j >= n {
                    return Err(Error::Schema(format!(
                        "rows[{i}] references variable {j} but n = {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::Invariant(format!("rows[{i}] coefficient on x{j} is not finite")));
                }
                if a == 0.0 {
                    return Err(Error::Invariant(format!("rows[{i}] has an explicit zero on x{j}")));
                }
                if seen[j] == i {
                    return Err(Error::Invariant(format!("rows[{i}] repeats variable {j}")));
                }
                seen[j] = i;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding. Used as a cache key.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_string().as_bytes()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&InstanceFile::from(self)).expect("instance serializes")
    }

    /// Parses and validates an instance document.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("instance JSON (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        file.into_instance()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { context, message } => Error::Parse {
                context: format!("{} ({context})", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

/// Upper bounds are either a number or the string `"inf"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum UpperBound {
    Finite(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct RowFile {
    coefs: Vec<(usize, f64)>,
    rhs: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u64,
    name: String,
    n: usize,
    m: usize,
    c: Vec<f64>,
    rows: Vec<RowFile>,
    lb: Vec<f64>,
    ub: Vec<UpperBound>,
    integers: Vec<usize>,
}

impl From<&MipInstance> for InstanceFile {
    fn from(inst: &MipInstance) -> Self {
        Self {
            format_version: INSTANCE_FORMAT_VERSION,
            name: inst.name.clone(),
            n: inst.num_vars,
            m: inst.rows.len(),
            c: inst.objective.clone(),
            rows: inst
                .rows
                .iter()
                .map(|r| RowFile {
                    coefs: r.coefs.clone(),
                    rhs: r.rhs,
                })
                .collect(),
            lb: inst.var_lower.clone(),
            ub: inst
                .var_upper
                .iter()
                .map(|&u| {
                    if u == f64::INFINITY {
                        UpperBound::Text("inf".into())
                    } else {
                        UpperBound::Finite(u)
                    }
                })
                .collect(),
            integers: inst.integer_set.clone(),
        }
    }
}

impl InstanceFile {
    fn into_instance(self) -> Result<MipInstance> {
        if self.format_version != INSTANCE_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: INSTANCE_FORMAT_VERSION,
            });
        }
        if self.c.len() != self.n {
            return Err(Error::Schema(format!("c has {} entries, n = {}", self.c.len(), self.n)));
        }
        if self.rows.len() != self.m {
            return Err(Error::Schema(format!("rows has {} entries, m = {}", self.rows.len(), self.m)));
        }
        let mut upper = Vec::with_capacity(self.ub.len());
        for (j, u) in self.ub.into_iter().enumerate() {
            upper.push(match u {
                UpperBound::Finite(v) => v,
                UpperBound::Text(s) if s == "inf" => f64::INFINITY,
                UpperBound::Text(s) => {
                    return Err(Error::Schema(format!("ub[{j}] = {s:?}: expected a number or \"inf\"")))
                }
            });
        }
        let inst = MipInstance {
            name: self.name,
            num_vars: self.n,
            objective: self.c,
            rows: self
                .rows
                .into_iter()
                .map(|r| SparseRow::new(r.coefs, r.rhs))
                .collect(),
            var_lower: self.lb,
            var_upper: upper,
            integer_set: self.integers,
        };
        inst.validate()?;
        Ok(inst)
    }
}
