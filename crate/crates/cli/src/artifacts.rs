//! Atomic artifact writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ArtifactRecord {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SkippedSlot {
    pub stage: String,
    pub slot: String,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub stages: Vec<String>,
    pub input_records: usize,
    pub rejected_records: usize,
    pub artifacts: Vec<ArtifactRecord>,
    pub skipped: Vec<SkippedSlot>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

/// Collects artifact records while stages write in parallel.
#[derive(Debug)]
pub struct ArtifactStore {
    root: PathBuf,
    records: Mutex<Vec<ArtifactRecord>>,
    skipped: Mutex<Vec<SkippedSlot>>,
}

impl ArtifactStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactStore {
            root: root.into(),
            records: Mutex::new(Vec::new()),
            skipped: Mutex::new(Vec::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(
        &self,
        rel: &str,
        bytes: &[u8],
        stage: &str,
        window: Option<&str>,
        anchor: Option<&str>,
    ) -> std::io::Result<()> {
        let path = rel.split('/').fold(self.root.clone(), |p, part| p.join(part));
        write_atomic(&path, bytes)?;
        self.records
            .lock()
            .expect("artifact list poisoned")
            .push(ArtifactRecord {
                path: rel.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
                stage: stage.to_string(),
                window: window.map(str::to_string),
                anchor: anchor.map(str::to_string),
            });
        Ok(())
    }

    pub fn skip(&self, stage: &str, slot: String, reason: String) {
        self.skipped.lock().expect("skip list poisoned").push(SkippedSlot {
            stage: stage.to_string(),
            slot,
            reason,
        });
    }

    /// Records sorted by path, and skipped slots sorted.
    pub fn finish(&self) -> (Vec<ArtifactRecord>, Vec<SkippedSlot>) {
        let mut records = self.records.lock().expect("artifact list poisoned").clone();
        records.sort();
        let mut skipped = self.skipped.lock().expect("skip list poisoned").clone();
        skipped.sort();
        (records, skipped)
    }
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(&root.join("manifest.json"), text.as_bytes())
}
