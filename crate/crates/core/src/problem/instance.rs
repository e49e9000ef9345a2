use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::problem::BlockProblem;

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

/// Generator family, parameters and seed that produced an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTag {
    pub family: String,
    pub params: serde_json::Value,
    pub seed: u64,
}

/// A problem together with its provenance and optional helper points.
///
/// On disk this is a JSON document:
///
/// ```text
/// { "format_version": 1,
///   "generator": { "family": "sphere", "params": {...}, "seed": 7 },
///   "problem": { "blocks": [...], "global_set": {...}, "a": {...}, "b": {...} },
///   "initial_x": [...] | null,
///   "certificate": [...] | null,
///   "reference": { ...problem... } | null }
/// ```
///
/// Blocks carry `dim`, an `objective` (`zero`, `quadratic`, `coulomb`) and a
/// `set` (`whole_space`, `box`, `spheres`, `manifold`); matrices are
/// `{rows, cols, entries: [[r, c, v], ...]}` in row-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub format_version: u32,
    pub generator: GeneratorTag,
    pub problem: BlockProblem,
    /// Block-feasible starting point chosen by the generator.
    #[serde(default)]
    pub initial_x: Option<Vec<f64>>,
    /// Point with `Ax + Bx̄ = 0` and `x ∈ X`, stacked as `(x, x̄)`.
    #[serde(default)]
    pub certificate: Option<Vec<f64>>,
    /// Single-block model of the same problem for centralized solves.
    #[serde(default)]
    pub reference: Option<BlockProblem>,
}

impl Instance {
    pub fn new(generator: GeneratorTag, problem: BlockProblem) -> Self {
        Self {
            format_version: INSTANCE_FORMAT_VERSION,
            generator,
            problem,
            initial_x: None,
            certificate: None,
            reference: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(s)?;
        inst.check_version()?;
        Ok(inst)
    }

    fn check_version(&self) -> Result<()> {
        if self.format_version != INSTANCE_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported instance format version {}",
                self.format_version
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let inst: Instance = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        inst.check_version()?;
        Ok(inst)
    }

    /// Hex SHA-256 of the serialized problem and generator tag.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.generator)?);
        h.update(serde_json::to_vec(&self.problem)?);
        Ok(hex::encode(h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;
    use crate::problem::{BlockSpec, GlobalSet, Objective, SetKind};

    fn small() -> Instance {
        let p = BlockProblem::new(
            vec![BlockSpec {
                dim: 1,
                objective: Objective::separable_quadratic(&[1.0], &[0.3]),
                set: SetKind::Box {
                    lower: vec![-1.0],
                    upper: vec![1.0],
                },
            }],
            GlobalSet::uniform_box(1, -2.0, 2.0),
            SparseMatrix::identity(1),
            SparseMatrix::scaled_identity(1, -1.0),
        )
        .unwrap();
        let tag = GeneratorTag {
            family: "hand".into(),
            params: serde_json::json!({"n": 1}),
            seed: 3,
        };
        let mut inst = Instance::new(tag, p);
        inst.initial_x = Some(vec![0.1]);
        inst
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let inst = small();
        let s = inst.to_json().unwrap();
        let back = Instance::from_json(&s).unwrap();
        assert_eq!(back.to_json().unwrap(), s);
        assert_eq!(back.hash().unwrap(), inst.hash().unwrap());
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = small();
        let mut b = small();
        b.generator.seed = 4;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn rejects_future_version() {
        let mut inst = small();
        inst.format_version = 99;
        let s = serde_json::to_string(&inst).unwrap();
        assert!(Instance::from_json(&s).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let inst = small();
        inst.save(&path).unwrap();
        let back = Instance::load(&path).unwrap();
        assert_eq!(back.hash().unwrap(), inst.hash().unwrap());
    }
}
