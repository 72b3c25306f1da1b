//! JSON reports and run manifests.
//!
//! Reports hold no timestamps or durations, so identical inputs give
//! byte-identical files; timings go to a separate file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::gluing::Part;
use crate::metris::Equivalence;
use crate::tensor::Signature;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Computed, positive answer.
    Ok,
    /// Computed, negative answer (not geodesible, not equivalent, recovery failed).
    Negative,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Negative => 1,
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::Negative
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub status: Status,
    pub inputs: BTreeMap<String, InputDigest>,
    pub config: BTreeMap<String, serde_json::Value>,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, status: Status, result: T) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            status,
            inputs: BTreeMap::new(),
            config: BTreeMap::new(),
            result,
        }
    }

    pub fn input(mut self, name: &str, path: &Path, bytes: &[u8]) -> Self {
        self.inputs.insert(
            name.to_string(),
            InputDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        self
    }

    pub fn config(mut self, key: &str, value: impl Serialize) -> Self {
        self.config
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// Written next to a generated family.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub metric_sha256: String,
    pub mode: String,
    pub targets: usize,
    pub per_point: usize,
    pub curves: usize,
    pub jets: usize,
    /// sha256 of every output file, by file name.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerateResult {
    pub targets: usize,
    pub curves: usize,
    pub jets: usize,
    pub family: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyResult {
    pub tol: f64,
    pub equivalence: Equivalence,
    /// Max difference of the two Levi-Civita connections.
    pub connection_difference: f64,
    pub affinely_equivalent: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueResult {
    pub dim: usize,
    pub parts: Vec<Part>,
    pub signature: Signature,
    pub equivalence: Equivalence,
    pub l_consistency: f64,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub command: String,
    pub seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn status_codes() {
        assert_eq!(Status::from_bool(true).exit_code(), 0);
        assert_eq!(Status::from_bool(false).exit_code(), 1);
    }
}
