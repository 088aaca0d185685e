//! Content-digest tracking between pipeline stages. Every produced
//! artifact records its own digest plus the digests of the inputs it was
//! built from; consumers refuse stale or tampered inputs unless forced.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Artifact path (relative to the output dir) -> record.
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub sha256: String,
    /// Input path -> digest at production time.
    pub inputs: BTreeMap<String, String>,
    pub command: String,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("hashing {} for provenance", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub struct ProvenanceStore {
    path: PathBuf,
    output_dir: PathBuf,
    data: Provenance,
}

impl ProvenanceStore {
    pub fn open(output_dir: &Path) -> Result<Self> {
        let path = output_dir.join("provenance.json");
        let data = if path.exists() {
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text).unwrap_or_default()
        } else {
            Provenance::default()
        };
        Ok(ProvenanceStore {
            path,
            output_dir: output_dir.to_path_buf(),
            data,
        })
    }

    fn key_for(&self, artifact: &Path) -> String {
        artifact
            .strip_prefix(&self.output_dir)
            .unwrap_or(artifact)
            .to_string_lossy()
            .to_string()
    }

    /// Record a freshly written artifact and the inputs that produced it.
    pub fn record(&mut self, command: &str, artifact: &Path, inputs: &[&Path]) -> Result<()> {
        let mut input_digests = BTreeMap::new();
        for input in inputs {
            input_digests.insert(input.to_string_lossy().to_string(), file_digest(input)?);
        }
        let record = ArtifactRecord {
            sha256: file_digest(artifact)?,
            inputs: input_digests,
            command: command.to_string(),
        };
        self.data.artifacts.insert(self.key_for(artifact), record);
        Ok(())
    }

    /// Verify an artifact this command is about to consume: its content
    /// must match the recorded digest, and the inputs it was built from
    /// must not have changed since.
    pub fn verify(&self, artifact: &Path, force: bool) -> Result<()> {
        let key = self.key_for(artifact);
        let Some(record) = self.data.artifacts.get(&key) else {
            return Ok(()); // not pipeline-produced; nothing to check
        };
        let mut problems = Vec::new();
        match file_digest(artifact) {
            Ok(digest) if digest == record.sha256 => {}
            Ok(_) => problems.push(format!("{key} was modified after `{}` wrote it", record.command)),
            Err(e) => problems.push(format!("{key}: {e}")),
        }
        for (input, recorded) in &record.inputs {
            match file_digest(Path::new(input)) {
                Ok(digest) if &digest == recorded => {}
                Ok(_) => problems.push(format!(
                    "{key} is stale: input {input} changed since `{}` ran",
                    record.command
                )),
                Err(_) => problems.push(format!("{key}: input {input} is missing")),
            }
        }
        if problems.is_empty() {
            return Ok(());
        }
        if force {
            for p in &problems {
                log::warn!("--force: ignoring provenance problem: {p}");
            }
            return Ok(());
        }
        bail!(
            "stale or modified inputs (rerun the producing command or pass --force):\n  {}",
            problems.join("\n  ")
        );
    }

    pub fn save(&self) -> Result<()> {
        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string_pretty(&self.data)?;
        fs::write(&self.path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_catches_staleness_and_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        fs::create_dir_all(&out).unwrap();
        let input = dir.path().join("input.txt");
        fs::write(&input, "source data").unwrap();
        let artifact = out.join("artifact.json");
        fs::write(&artifact, "{\"v\":1}").unwrap();

        let mut store = ProvenanceStore::open(&out).unwrap();
        store.record("align", &artifact, &[&input]).unwrap();
        store.save().unwrap();

        let store = ProvenanceStore::open(&out).unwrap();
        store.verify(&artifact, false).unwrap();

        // Upstream change makes the artifact stale.
        fs::write(&input, "changed").unwrap();
        assert!(store.verify(&artifact, false).is_err());
        store.verify(&artifact, true).unwrap(); // forced

        // Restore the input, tamper with the artifact itself.
        fs::write(&input, "source data").unwrap();
        store.verify(&artifact, false).unwrap();
        fs::write(&artifact, "{\"v\":2}").unwrap();
        assert!(store.verify(&artifact, false).is_err());
    }

    #[test]
    fn unknown_artifacts_pass_verification() {
        let dir = tempfile::tempdir().unwrap();
        let store = ProvenanceStore::open(dir.path()).unwrap();
        let outside = dir.path().join("user_supplied.vec");
        fs::write(&outside, "2 2\na 1 0\nb 0 1\n").unwrap();
        store.verify(&outside, false).unwrap();
    }
}
