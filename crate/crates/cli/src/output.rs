//! Run artifacts: buffered in memory, then written atomically.

use crate::error::CliError;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

/// Outputs of one run, in the order they were produced.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json(&mut self, name: &str, value: &impl serde::Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn digests(&self) -> Value {
        let map: serde_json::Map<String, Value> = self
            .files
            .iter()
            .map(|(name, bytes)| (name.clone(), Value::String(hex(&Sha256::digest(bytes)))))
            .collect();
        Value::Object(map)
    }

    /// Writes every file, then the manifest last.
    pub fn commit(mut self, dir: &Path, manifest: Value) -> Result<Vec<String>, CliError> {
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        self.files.push(("manifest.json".into(), bytes));
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, bytes) in &self.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        Ok(self.files.into_iter().map(|(n, _)| n).collect())
    }
}

/// Writes to a temporary file in the target directory and renames it into
/// place, so a reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style content hash: SHA-256 of `blob <len>\0<content>`.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    format!("sha256:{}", hex(&h.finalize()))
}

pub fn manifest(subcommand: &str, config: &crate::config::RunConfig, seeds: Value, derived: Value, outputs: Value) -> Value {
    json!({
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "generator": innokde::rng::GENERATOR,
        "config": config.effective,
        "input_hash": content_hash(&config.canonical_text()),
        "seeds": seeds,
        "derived": derived,
        "outputs": outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_hash_matches_git_blob_framing() {
        // printf 'blob 6\0hello\n' | sha256sum
        let want = {
            let mut h = Sha256::new();
            h.update(b"blob 6\0hello\n");
            hex(&h.finalize())
        };
        assert_eq!(content_hash("hello\n"), format!("sha256:{want}"));
        assert_ne!(content_hash("hello\n"), content_hash("hello"));
    }

    #[test]
    fn atomic_write_leaves_only_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, b"x\n").unwrap();
        write_atomic(&path, b"y\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"y\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
