use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl TensorFile {
    fn from_tensor(t: &Tensor) -> Self {
        Self { shape: t.shape().to_vec(), data: t.data.clone() }
    }

    fn to_tensor(&self, name: &str) -> Result<Tensor> {
        let [rows, cols] = match self.shape.as_slice() {
            &[r, c] => [r, c],
            &[c] => [1, c],
            other => return Err(Error::Schema(format!("{name}: unsupported shape {other:?}"))),
        };
        let expected = rows.checked_mul(cols).ok_or_else(|| Error::Schema(format!("{name}: shape overflows")))?;
        if self.data.len() != expected {
            return Err(Error::Schema(format!(
                "{name}: shape {:?} needs {expected} values, found {}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor { rows, cols, data: self.data.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptStateFile {
    pub t: u64,
    pub m: BTreeMap<String, TensorFile>,
    pub v: BTreeMap<String, TensorFile>,
}

/// On-disk model state: parameters, optimizer moments and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u64,
    pub config_hash: String,
    pub params: BTreeMap<String, TensorFile>,
    pub opt_state: OptStateFile,
    pub step: u64,
}

impl Checkpoint {
    pub fn capture(store: &ParamStore, opt: &AdamState, config_hash: &str, step: u64) -> Self {
        let named = |ts: &[Tensor]| -> BTreeMap<String, TensorFile> {
            store.names().iter().cloned().zip(ts.iter().map(TensorFile::from_tensor)).collect()
        };
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config_hash: config_hash.to_string(),
            params: named(store.values()),
            opt_state: OptStateFile { t: opt.t, m: named(&opt.m), v: named(&opt.v) },
            step,
        }
    }

    /// Copies parameters and optimizer state into a store with the same layout.
    pub fn restore(&self, store: &mut ParamStore, expected_hash: &str) -> Result<AdamState> {
        if self.config_hash != expected_hash {
            return Err(Error::Schema(format!(
                "checkpoint config_hash {} does not match model {expected_hash}",
                self.config_hash
            )));
        }
        if self.params.len() != store.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        let mut opt = AdamState::new(store);
        opt.t = self.opt_state.t;
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.name(id).to_string();
            let shape = store.get(id).shape();
            let load = |map: &BTreeMap<String, TensorFile>, what: &str| -> Result<Tensor> {
                let t = map
                    .get(&name)
                    .ok_or_else(|| Error::Schema(format!("{what} missing entry {name:?}")))?
                    .to_tensor(&name)?;
                if t.shape() != shape {
                    return Err(Error::Schema(format!("{name}: shape {:?}, model expects {shape:?}", t.shape())));
                }
                Ok(t)
            };
            *store.get_mut(id) = load(&self.params, "params")?;
            opt.m[id.0] = load(&self.opt_state.m, "opt_state.m")?;
            opt.v[id.0] = load(&self.opt_state.v, "opt_state.v")?;
        }
        Ok(opt)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("checkpoint JSON (line {}, column {})", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion { found: ck.format_version, expected: CHECKPOINT_FORMAT_VERSION });
        }
        for (name, t) in ck.params.iter().chain(&ck.opt_state.m).chain(&ck.opt_state.v) {
            t.to_tensor(name)?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        s.glorot("w", 3, 4, &mut rng).unwrap();
        s.add("b", Tensor::from_vec(1, 2, vec![0.1, 1.0 / 3.0]).unwrap()).unwrap();
        s
    }

    #[test]
    fn round_trip_preserves_bits() {
        let s = store();
        let mut opt = AdamState::new(&s);
        opt.t = 7;
        opt.m[0].data[1] = std::f64::consts::PI * 1e-300;
        let text = Checkpoint::capture(&s, &opt, "h", 7).to_json_string();
        let ck = Checkpoint::from_json_str(&text).unwrap();
        let mut fresh = store();
        for v in fresh.values_mut() {
            v.data.iter_mut().for_each(|x| *x = 0.0);
        }
        let opt2 = ck.restore(&mut fresh, "h").unwrap();
        for (a, b) in s.values().iter().zip(fresh.values()) {
            let bits = |t: &Tensor| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(opt2, opt);
        assert_eq!(ck.step, 7);
    }

    #[test]
    fn rejects_bad_shape_and_version() {
        let bad = r#"{"format_version":1,"config_hash":"h","params":{"w":{"shape":[2,2],"data":[1]}},"opt_state":{"t":0,"m":{},"v":{}},"step":0}"#;
        assert!(matches!(Checkpoint::from_json_str(bad), Err(Error::Schema(_))));
        let v2 = r#"{"format_version":2,"config_hash":"h","params":{},"opt_state":{"t":0,"m":{},"v":{}},"step":0}"#;
        assert!(matches!(Checkpoint::from_json_str(v2), Err(Error::FormatVersion { found: 2, .. })));
    }

    #[test]
    fn hash_mismatch_rejected() {
        let s = store();
        let ck = Checkpoint::capture(&s, &AdamState::new(&s), "a", 0);
        assert!(ck.restore(&mut store(), "b").is_err());
    }
}
