//! JSON schemas for system and sequence files, run manifests, and atomic
//! file output.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, CMatrix};
use crate::sequence::PulseSequence;
use crate::system::LevelSystem;

/// On-disk description of a level system and its Hamiltonian. Complex
/// entries are encoded as two-element [re, im] arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub flip_set: Vec<usize>,
    pub hamiltonian: Vec<Vec<[f64; 2]>>,
}

impl SystemConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Decodes and validates, returning the level system and Hamiltonian.
    pub fn into_parts(self) -> Result<(LevelSystem, CMatrix)> {
        let dim = self.dim;
        if self.hamiltonian.len() != dim || self.hamiltonian.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!(
                "hamiltonian must be a {dim}x{dim} array"
            )));
        }
        let h = CMatrix::from_fn(dim, dim, |i, j| {
            C64::new(self.hamiltonian[i][j][0], self.hamiltonian[i][j][1])
        });
        // Reject non-Hermitian input naming the worst entry.
        let mut worst = (0usize, 0usize, 0.0f64);
        for i in 0..dim {
            for j in 0..dim {
                let defect = (h[(i, j)] - h[(j, i)].conj()).norm();
                if defect > worst.2 {
                    worst = (i, j, defect);
                }
            }
        }
        if worst.2 > matrix::HERMITIAN_TOL {
            return Err(Error::Config(format!(
                "hamiltonian is not Hermitian: entry ({}, {}) has defect {:.3e}",
                worst.0, worst.1, worst.2
            )));
        }
        let system = match self.labels {
            Some(labels) => LevelSystem::with_labels(dim, labels, self.flip_set)?,
            None => LevelSystem::with_flip_set(dim, self.flip_set)?,
        };
        Ok((system, h))
    }

    pub fn from_parts(system: &LevelSystem, h: &CMatrix) -> Self {
        let dim = system.dim();
        Self {
            dim,
            labels: Some(system.labels().to_vec()),
            flip_set: system.flip_set().to_vec(),
            hamiltonian: (0..dim)
                .map(|i| (0..dim).map(|j| [h[(i, j)].re, h[(i, j)].im]).collect())
                .collect(),
        }
    }
}

/// On-disk pulse sequence: `{"n": 4, "deltas": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceFile {
    pub n: usize,
    pub deltas: Vec<f64>,
}

impl SequenceFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn into_sequence(self) -> Result<PulseSequence> {
        if self.deltas.len() != self.n + 1 {
            return Err(Error::Config(format!(
                "n = {} implies {} fractions, got {}",
                self.n,
                self.n + 1,
                self.deltas.len()
            )));
        }
        PulseSequence::new(self.deltas)
    }

    pub fn from_sequence(seq: &PulseSequence) -> Self {
        Self {
            n: seq.n(),
            deltas: seq.deltas().to_vec(),
        }
    }
}

/// Reproducibility record emitted alongside every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            parameters,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

/// Writes via a temp file in the target directory and renames into place.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
        None => std::path::PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// 17-significant-digit scientific form: round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Encodes a complex matrix as nested [re, im] pairs for JSON output.
pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_config_json() -> &'static str {
        r#"{
            "dim": 3,
            "flip_set": [1, 2],
            "hamiltonian": [
                [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
                [[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
                [[1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
            ]
        }"#
    }

    #[test]
    fn system_config_round_trip() {
        let cfg: SystemConfig = serde_json::from_str(example_config_json()).unwrap();
        let (system, h) = cfg.into_parts().unwrap();
        assert_eq!(system.dim(), 3);
        assert_eq!(system.labels()[0], "g");
        assert_eq!(h[(0, 1)], C64::new(1.0, 0.0));
        let back = SystemConfig::from_parts(&system, &h);
        let (system2, h2) = back.into_parts().unwrap();
        assert_eq!(system.flip_set(), system2.flip_set());
        assert_eq!(matrix::frobenius_norm(&(h - h2)), 0.0);
    }

    #[test]
    fn non_hermitian_config_rejected_with_location() {
        let mut cfg: SystemConfig = serde_json::from_str(example_config_json()).unwrap();
        cfg.hamiltonian[0][1] = [2.0, 0.0];
        match cfg.into_parts() {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("(0, 1)") || msg.contains("(1, 0)"), "{msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn sequence_file_validation() {
        let f = SequenceFile {
            n: 2,
            deltas: vec![0.25, 0.5, 0.25],
        };
        assert!(f.into_sequence().is_ok());
        let f = SequenceFile {
            n: 4,
            deltas: vec![0.25, 0.5, 0.25],
        };
        assert!(f.into_sequence().is_err());
    }

    #[test]
    fn fmt_round_trips() {
        for x in [0.1, 1.0 / 3.0, 2.0_f64.powi(-40), 0.30901699437494745] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
