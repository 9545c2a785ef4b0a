use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "hemoforge-manifest";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEntry {
    pub name: String,
    /// File path, or `bundled` / `default` for built-in inputs.
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub seed: u64,
    pub train_seed: u64,
    pub config_sha256: String,
    pub inputs: Vec<InputEntry>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files under one root and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactSink {
    root: PathBuf,
    entries: Vec<ArtifactEntry>,
}

impl ArtifactSink {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(ArtifactSink {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path of `rel`, creating parent directories.
    pub fn path(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(p)
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let p = self.path(rel)?;
        std::fs::write(&p, contents.as_ref()).map_err(|e| CliError::io(&p, e))?;
        self.record(rel)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        self.write(rel, serde_json::to_string_pretty(value)? + "\n")
    }

    /// Hashes a file that something else already wrote under the root.
    pub fn record(&mut self, rel: &str) -> CliResult<()> {
        let p = self.root.join(rel);
        let bytes = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        self.entries.retain(|e| e.path != rel);
        self.entries.push(ArtifactEntry {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    pub fn write_manifest(&self, mut manifest: Manifest) -> CliResult<()> {
        manifest.artifacts = self.entries.clone();
        manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let p = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT {
        return Err(CliError::config(format!("{}: not a hemoforge manifest", p.display())));
    }
    Ok(m)
}

/// Paths whose current contents no longer match the manifest.
pub fn verify_manifest(dir: &Path) -> CliResult<Vec<String>> {
    let m = read_manifest(dir)?;
    Ok(m.artifacts
        .iter()
        .filter(|a| std::fs::read(dir.join(&a.path)).map_or(true, |b| sha256_hex(&b) != a.sha256))
        .map(|a| a.path.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        sink.write("a/b.txt", "hello").unwrap();
        sink.write("c.txt", "world").unwrap();
        sink.write_manifest(Manifest {
            format: MANIFEST_FORMAT.into(),
            tool_version: "0".into(),
            seed: 1,
            train_seed: 2,
            config_sha256: String::new(),
            inputs: vec![],
            complete: true,
            failed_stage: None,
            error: None,
            artifacts: vec![],
        })
        .unwrap();
        assert!(verify_manifest(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("c.txt"), "World").unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["c.txt".to_string()]);
    }
}
