use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance line embedded in every artifact.
pub fn stamp(run: &Resolved) -> String {
    format!("cvqkd {VERSION} config={} seed={}", run.hash, run.seed)
}

pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::config("out_dir", format!("{}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `payload` as pretty JSON wrapped with the provenance fields.
    pub fn write_json(
        &mut self,
        name: &str,
        run: &Resolved,
        payload: impl Serialize,
    ) -> Result<(), CliError> {
        let mut doc = json!({
            "tool": "cvqkd",
            "version": VERSION,
            "config_hash": run.hash,
            "seed": run.seed,
        });
        let body = serde_json::to_value(payload).map_err(|e| CliError::Numerical(e.to_string()))?;
        match body {
            Value::Object(map) => doc.as_object_mut().unwrap().extend(map),
            other => {
                doc["data"] = other;
            }
        }
        let mut text =
            serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.display().to_string())
            .collect()
    }
}

/// Key file: provenance line, then the key bits packed into bytes as hex.
pub fn key_file(run: &Resolved, bits: &[u8]) -> Vec<u8> {
    let hex: String = cvqkd::distill::pack_bytes(bits)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    format!("# {}\n# bits={}\n{hex}\n", stamp(run), bits.len()).into_bytes()
}

/// Transcript file: provenance line, then the binary transcript.
pub fn transcript_file(
    run: &Resolved,
    records: &[cvqkd::distill::transcript::Record],
) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# {}\n", stamp(run)).into_bytes();
    cvqkd::distill::transcript::write_transcript(&mut out, records)?;
    Ok(out)
}

/// Strips the provenance line written by [`transcript_file`], if present.
pub fn split_transcript(data: &[u8]) -> (Option<String>, &[u8]) {
    if data.first() == Some(&b'#') {
        if let Some(end) = data.iter().position(|&b| b == b'\n') {
            let line = String::from_utf8_lossy(&data[1..end]).trim().to_string();
            return (Some(line), &data[end + 1..]);
        }
    }
    (None, data)
}
