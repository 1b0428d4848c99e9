//! JSON manifest listing the checkpoints of one downstream task.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub id: String,
    pub features_path: PathBuf,
    pub labels_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_probs_path: Option<PathBuf>,
    /// Ground-truth downstream test error `e_M` in [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Number of downstream classes; inferred from the labels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    pub entries: Vec<CheckpointEntry>,
}

impl CheckpointManifest {
    /// Parse a manifest and resolve relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: CheckpointManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut manifest.entries {
            for p in [Some(&mut e.features_path), Some(&mut e.labels_path), e.source_probs_path.as_mut()]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Ids unique, error rates in range, referenced files present.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::validation(format!("duplicate checkpoint id {:?}", e.id)));
            }
            if let Some(err) = e.test_error {
                if !(0.0..=1.0).contains(&err) {
                    return Err(Error::validation(format!("test_error of {:?} is outside [0, 1]: {err}", e.id)));
                }
            }
            for p in [Some(&e.features_path), Some(&e.labels_path), e.source_probs_path.as_ref()]
                .into_iter()
                .flatten()
            {
                if !p.is_file() {
                    return Err(Error::validation(format!("{:?}: file {} does not exist", e.id, p.display())));
                }
            }
        }
        Ok(())
    }

    /// Test errors of all entries, or the ids lacking one.
    pub fn test_errors(&self) -> std::result::Result<Vec<f64>, Vec<String>> {
        let missing: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.test_error.is_none())
            .map(|e| e.id.clone())
            .collect();
        if missing.is_empty() {
            Ok(self.entries.iter().map(|e| e.test_error.unwrap()).collect())
        } else {
            Err(missing)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_and_duplicates_fail() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("f.csv"), "1\n").unwrap();
        fs::write(dir.path().join("l.csv"), "0\n").unwrap();
        let json = r#"{"entries":[{"id":"a","features_path":"f.csv","labels_path":"l.csv","test_error":0.25}]}"#;
        fs::write(dir.path().join("m.json"), json).unwrap();
        let m = CheckpointManifest::load(dir.path().join("m.json")).unwrap();
        assert_eq!(m.entries[0].features_path, dir.path().join("f.csv"));
        assert_eq!(m.test_errors().unwrap(), vec![0.25]);

        let json = r#"{"entries":[{"id":"a","features_path":"f.csv","labels_path":"l.csv"},
                                  {"id":"a","features_path":"f.csv","labels_path":"l.csv"}]}"#;
        fs::write(dir.path().join("m.json"), json).unwrap();
        assert!(CheckpointManifest::load(dir.path().join("m.json")).is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let json = r#"{"entries":[{"id":"a","features_path":"nope.ptrn","labels_path":"nope.ptrn"}]}"#;
        fs::write(dir.path().join("m.json"), json).unwrap();
        let err = CheckpointManifest::load(dir.path().join("m.json")).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }
}
