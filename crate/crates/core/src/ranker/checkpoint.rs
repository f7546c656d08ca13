//! Versioned JSON container of named parameter arrays.
//!
//! ```text
//! {"format":"rankattack-checkpoint","version":1,"kind":"surrogate",
//!  "config_hash":"<sha256 hex>","arrays":[{"name":"embeddings","shape":[V,m],"data":[...]}, ...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::NeuralRanker;
use crate::error::{Error, Result};
use crate::linalg::{Activation, Mlp};

pub const CHECKPOINT_FORMAT: &str = "rankattack-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub config_hash: String,
    pub arrays: Vec<NamedArray>,
}

/// SHA-256 over `key=value` lines sorted by key.
pub fn config_hash(entries: &[(&str, String)]) -> String {
    let mut sorted: Vec<_> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let mut hasher = Sha256::new();
    for (k, v) in sorted {
        hasher.update(format!("{k}={v}\n").as_bytes());
    }
    hex::encode(hasher.finalize())
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind: kind.into(),
            config_hash: config_hash.into(),
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "array `{name}` shape");
        self.arrays.push(NamedArray {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: data.to_vec(),
        });
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))
    }

    /// Array data, checked against an expected shape.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let a = self.get(name)?;
        if a.shape != shape || a.data.len() != shape.iter().product::<usize>() {
            return Err(Error::Checkpoint(format!(
                "array `{name}` has shape {:?}, expected {shape:?}",
                a.shape
            )));
        }
        Ok(a.data.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Loads and refuses the file unless its config hash equals `expected`.
    pub fn load(path: &Path, expected_hash: &str) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck = Self::from_json(&text)?;
        ck.check_hash(expected_hash)?;
        Ok(ck)
    }

    pub fn check_hash(&self, expected: &str) -> Result<()> {
        if self.config_hash != expected {
            return Err(Error::HashMismatch {
                expected: self.config_hash.clone(),
                found: expected.to_string(),
            });
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!("expected a `{kind}` checkpoint, found `{}`", self.kind)));
        }
        Ok(())
    }
}

pub(crate) fn push_mlp(ck: &mut Checkpoint, prefix: &str, mlp: &Mlp) {
    ck.push(&format!("{prefix}.w1"), &[mlp.hidden, mlp.input], &mlp.w1);
    ck.push(&format!("{prefix}.b1"), &[mlp.hidden], &mlp.b1);
    ck.push(&format!("{prefix}.w2"), &[mlp.output, mlp.hidden], &mlp.w2);
    ck.push(&format!("{prefix}.b2"), &[mlp.output], &mlp.b2);
}

pub(crate) fn take_mlp(ck: &Checkpoint, prefix: &str, act: Activation) -> Result<Mlp> {
    let w1 = ck.get(&format!("{prefix}.w1"))?;
    let (hidden, input) = match w1.shape.as_slice() {
        [h, i] => (*h, *i),
        _ => return Err(Error::Checkpoint(format!("`{prefix}.w1` must be 2-d"))),
    };
    let w2 = ck.get(&format!("{prefix}.w2"))?;
    let output = w2.shape.first().copied().unwrap_or(0);
    let mut mlp = Mlp::zeros(input, hidden, output, act);
    mlp.w1 = ck.take(&format!("{prefix}.w1"), &[hidden, input])?;
    mlp.b1 = ck.take(&format!("{prefix}.b1"), &[hidden])?;
    mlp.w2 = ck.take(&format!("{prefix}.w2"), &[output, hidden])?;
    mlp.b2 = ck.take(&format!("{prefix}.b2"), &[output])?;
    Ok(mlp)
}

impl NeuralRanker {
    pub fn to_checkpoint(&self, kind: &str, config_hash: &str) -> Checkpoint {
        let mut ck = Checkpoint::new(kind, config_hash);
        self.write_arrays(&mut ck, "ranker");
        ck
    }

    pub(crate) fn write_arrays(&self, ck: &mut Checkpoint, prefix: &str) {
        let m = self.dim;
        ck.push(&format!("{prefix}.embeddings"), &[self.vocab_size, m], &self.embeddings);
        ck.push(&format!("{prefix}.enc_w"), &[m, m], &self.enc_w);
        ck.push(&format!("{prefix}.enc_b"), &[m], &self.enc_b);
        push_mlp(ck, &format!("{prefix}.scorer"), &self.scorer);
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Self::read_arrays(ck, "ranker")
    }

    pub(crate) fn read_arrays(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let emb = ck.get(&format!("{prefix}.embeddings"))?;
        let (vocab_size, dim) = match emb.shape.as_slice() {
            [v, m] => (*v, *m),
            _ => return Err(Error::Checkpoint("embeddings must be 2-d".into())),
        };
        let scorer = take_mlp(ck, &format!("{prefix}.scorer"), Activation::Relu)?;
        if scorer.input != 3 * dim || scorer.output != 1 {
            return Err(Error::Checkpoint("scorer shape does not match embeddings".into()));
        }
        let r = NeuralRanker {
            vocab_size,
            dim,
            embeddings: emb.data.clone(),
            enc_w: ck.take(&format!("{prefix}.enc_w"), &[dim, dim])?,
            enc_b: ck.take(&format!("{prefix}.enc_b"), &[dim])?,
            scorer,
        };
        if !r.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::RankerConfig;

    #[test]
    fn ranker_round_trips_exactly() {
        let r = NeuralRanker::random(12, RankerConfig { dim: 4, hidden: 3 }, 3);
        let ck = r.to_checkpoint("surrogate", "abc");
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(NeuralRanker::from_checkpoint(&back).unwrap(), r);
    }

    #[test]
    fn hash_mismatch_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let r = NeuralRanker::random(5, RankerConfig { dim: 2, hidden: 2 }, 3);
        r.to_checkpoint("surrogate", "aaa").save(&path).unwrap();
        assert!(Checkpoint::load(&path, "aaa").is_ok());
        assert!(matches!(Checkpoint::load(&path, "bbb"), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn config_hash_ignores_entry_order() {
        let a = config_hash(&[("x", "1".into()), ("y", "2".into())]);
        let b = config_hash(&[("y", "2".into()), ("x", "1".into())]);
        assert_eq!(a, b);
        assert_ne!(a, config_hash(&[("x", "1".into()), ("y", "3".into())]));
    }
}
