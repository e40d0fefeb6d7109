//! Stage manifests, content hashes and the per-directory lock.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lrrec.lock";
pub const ARTIFACT_VERSION: u32 = 1;

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn config_hash<T: Serialize>(section: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(section)?)))
}

/// What a stage consumed and produced. Paths are relative to the run
/// directory; no timestamps, so identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: u32,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(stage_dir: &Path) -> Result<Option<Manifest>> {
        let path = stage_dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn write(&self, stage_dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(stage_dir.join(MANIFEST_FILE), bytes)?;
        Ok(())
    }

    /// True when every recorded output still exists with its recorded hash.
    pub fn outputs_intact(&self, run_dir: &Path) -> bool {
        self.outputs.iter().all(|(rel, hash)| {
            sha256_file(&run_dir.join(rel)).map(|h| &h == hash).unwrap_or(false)
        })
    }
}

/// Hashes files given relative to `run_dir`.
pub fn hash_files(run_dir: &Path, rels: &[String]) -> Result<BTreeMap<String, String>> {
    rels.iter()
        .map(|r| Ok((r.clone(), sha256_file(&run_dir.join(r))?)))
        .collect()
}

/// Exclusive lock on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<RunLock> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::validation(format!(
                "another stage holds {}; remove it if no lrrec process is running",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(a);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_round_trip_and_intact_check() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("s")).unwrap();
        fs::write(dir.path().join("s/out.txt"), "x").unwrap();
        let m = Manifest {
            stage: "s".into(),
            version: ARTIFACT_VERSION,
            config_hash: config_hash(&("a", 1)).unwrap(),
            inputs: BTreeMap::new(),
            outputs: hash_files(dir.path(), &["s/out.txt".into()]).unwrap(),
        };
        m.write(&dir.path().join("s")).unwrap();
        assert_eq!(Manifest::read(&dir.path().join("s")).unwrap(), Some(m.clone()));
        assert!(m.outputs_intact(dir.path()));
        fs::write(dir.path().join("s/out.txt"), "y").unwrap();
        assert!(!m.outputs_intact(dir.path()));
        assert_eq!(Manifest::read(&dir.path().join("none")).unwrap(), None);
    }
}
