//! Run manifests: the configuration hash, fitted constants, produced files
//! with checksums, and the pass/fail summary. The manifest is always written
//! last, so an interrupted run leaves no manifest behind.

use std::path::{Path, PathBuf};

use cracklab::geo::fnv1a64;
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub r0: Option<f64>,
    pub constants: serde_json::Map<String, serde_json::Value>,
    pub files: Vec<FileEntry>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub pass: bool,
    pub checks: Vec<CheckLine>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub fn file_checksum(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes.iter().copied()))
}

/// Collector that stages outputs in a temporary directory and renames it to
/// the final location only after the manifest lands.
pub struct OutputStage {
    final_dir: PathBuf,
    work_dir: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputStage {
    pub fn create(final_dir: &Path) -> std::io::Result<Self> {
        if final_dir.exists() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("output directory {} already exists", final_dir.display()),
            ));
        }
        let work_dir = final_dir.with_extension("partial");
        if work_dir.exists() {
            std::fs::remove_dir_all(&work_dir)?;
        }
        std::fs::create_dir_all(&work_dir)?;
        Ok(OutputStage { final_dir: final_dir.to_path_buf(), work_dir, files: Vec::new() })
    }

    pub fn write(&mut self, rel_path: &str, content: &str) -> std::io::Result<()> {
        let path = self.work_dir.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, content)?;
        self.files.push(FileEntry {
            path: rel_path.to_string(),
            checksum: file_checksum(content.as_bytes()),
        });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Write the manifest and atomically publish the directory.
    pub fn finish(mut self, mut manifest: RunManifest) -> std::io::Result<PathBuf> {
        manifest.files = self.files.clone();
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let path = self.work_dir.join(MANIFEST_NAME);
        std::fs::write(&path, &text)?;
        self.files.push(FileEntry { path: MANIFEST_NAME.into(), checksum: file_checksum(text.as_bytes()) });
        std::fs::rename(&self.work_dir, &self.final_dir)?;
        Ok(self.final_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staging_is_atomic() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run1");
        let mut stage = OutputStage::create(&out).unwrap();
        stage.write("data.csv", "r,H,D,N\n").unwrap();
        // nothing published yet, and no manifest anywhere
        assert!(!out.exists());
        let manifest = RunManifest {
            config_hash: "deadbeef".into(),
            tool_version: "0.0.0".into(),
            r0: None,
            constants: serde_json::Map::new(),
            files: vec![],
            summary: RunSummary { pass: true, checks: vec![] },
        };
        let published = stage.finish(manifest).unwrap();
        assert!(published.join(MANIFEST_NAME).exists());
        assert!(published.join("data.csv").exists());
        // second run into the same directory is refused
        assert!(OutputStage::create(&out).is_err());
    }

    #[test]
    fn checksums_match_content() {
        let a = file_checksum(b"hello");
        let b = file_checksum(b"hello");
        let c = file_checksum(b"hello!");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
