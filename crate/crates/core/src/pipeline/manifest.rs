use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Record written after a stage finishes: who produced which files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Output file name (relative to the run directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StageStatus {
    Missing,
    /// Manifest present but an output file is gone or altered.
    Stale,
    Complete(StageManifest),
}

pub fn manifest_path(out: &Path, stage: &str) -> PathBuf {
    out.join("manifests").join(format!("{stage}.json"))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path).map_err(|e| Error::io(path, e))?)))
}

pub fn write_manifest(
    out: &Path,
    stage: &str,
    config_hash: &str,
    seed: u64,
    outputs: &[String],
    summary: serde_json::Value,
) -> Result<StageManifest> {
    let mut files = BTreeMap::new();
    for name in outputs {
        files.insert(name.clone(), file_sha256(&out.join(name))?);
    }
    let m = StageManifest {
        stage: stage.to_string(),
        config_hash: config_hash.to_string(),
        seed,
        outputs: files,
        summary,
    };
    let path = manifest_path(out, stage);
    let dir = path.parent().expect("manifest path has a parent");
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    fs::write(&path, serde_json::to_string_pretty(&m)?).map_err(|e| Error::io(&path, e))?;
    Ok(m)
}

/// Status of `stage` in `out`. A manifest written under a different config
/// hash is an error: resuming would mix two experiments.
pub fn stage_status(out: &Path, stage: &str, config_hash: &str) -> Result<StageStatus> {
    let path = manifest_path(out, stage);
    if !path.exists() {
        return Ok(StageStatus::Missing);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: StageManifest = serde_json::from_str(&text)?;
    if m.config_hash != config_hash {
        return Err(Error::invalid(format!(
            "{} holds stage `{stage}` of config {}, not {config_hash}; refusing to resume",
            out.display(),
            m.config_hash
        )));
    }
    for (name, digest) in &m.outputs {
        let p = out.join(name);
        if !p.is_file() || &file_sha256(&p)? != digest {
            return Ok(StageStatus::Stale);
        }
    }
    Ok(StageStatus::Complete(m))
}

/// Like [`stage_status`] but requires a complete stage.
pub fn require_stage(out: &Path, stage: &str, config_hash: &str) -> Result<StageManifest> {
    match stage_status(out, stage, config_hash)? {
        StageStatus::Complete(m) => Ok(m),
        StageStatus::Missing => Err(Error::invalid(format!("stage `{stage}` has not been run in {}", out.display()))),
        StageStatus::Stale => Err(Error::invalid(format!(
            "outputs of stage `{stage}` in {} were modified; rerun it",
            out.display()
        ))),
    }
}
