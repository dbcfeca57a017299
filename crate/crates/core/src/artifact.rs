//! Artifact headers and atomic file writes.
//!
//! Every artifact starts with `#` comment lines:
//!
//! ```text
//! # editbench corpus v1
//! # tool_version=0.1.0
//! # seed=7
//! # config_hash=3f2a9c0d11b2e4f7
//! # facts=1000
//! ```
//!
//! Config lines are sorted by key. Paths never appear, so reruns elsewhere are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{ArtifactError, Error};

pub const TOOL_NAME: &str = "editbench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactHeader {
    pub kind: String,
    pub version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
}

impl ArtifactHeader {
    pub fn new(kind: &str, version: u32, seed: u64) -> Self {
        Self {
            kind: kind.to_string(),
            version,
            tool_version: TOOL_VERSION.to_string(),
            seed,
            config: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    /// First 16 hex digits of SHA-256 over kind, seed and the sorted config.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}\nseed={}\n", self.kind, self.seed));
        for (k, v) in &self.config {
            h.update(format!("{k}={v}\n"));
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "# {TOOL_NAME} {} v{}\n# tool_version={}\n# seed={}\n# config_hash={}\n",
            self.kind,
            self.version,
            self.tool_version,
            self.seed,
            self.config_hash()
        );
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out
    }

    /// Splits `text` into its header and the remaining body, checking kind and version.
    pub fn split<'a>(
        text: &'a str,
        kind: &'static str,
        version: u32,
        path: &str,
    ) -> Result<(Self, &'a str), ArtifactError> {
        let fmt = |message: String| ArtifactError::Format {
            path: path.to_string(),
            message,
        };
        let mut rest = text;
        let mut lines = Vec::new();
        while let Some(line) = rest.strip_prefix("# ") {
            let (head, tail) = line.split_once('\n').unwrap_or((line, ""));
            lines.push(head);
            rest = tail;
        }
        let first = lines
            .first()
            .ok_or_else(|| fmt("missing artifact header".into()))?;
        let mut parts = first.split(' ');
        let (tool, found_kind, ver) = (parts.next(), parts.next(), parts.next());
        if tool != Some(TOOL_NAME) || parts.next().is_some() {
            return Err(fmt(format!("not an {TOOL_NAME} artifact: {first:?}")));
        }
        if found_kind != Some(kind) {
            return Err(fmt(format!(
                "expected a {kind} artifact, found {}",
                found_kind.unwrap_or("nothing")
            )));
        }
        let found: u32 = ver
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fmt(format!("bad version in header {first:?}")))?;
        if found != version {
            return Err(ArtifactError::Version {
                path: path.to_string(),
                kind,
                found,
                expected: version,
            });
        }
        let mut header = Self::new(kind, version, 0);
        let mut seed = None;
        for line in &lines[1..] {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| fmt(format!("bad header line {line:?}")))?;
            match k {
                "tool_version" => header.tool_version = v.to_string(),
                "seed" => seed = Some(v.parse().map_err(|_| fmt(format!("bad seed {v:?}")))?),
                "config_hash" => {}
                _ => {
                    header.config.insert(k.to_string(), v.to_string());
                }
            }
        }
        header.seed = seed.ok_or_else(|| fmt("header lacks a seed".into()))?;
        Ok((header, rest))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.config.get(key).map(String::as_str)
    }
}

/// Reads a whole artifact file, mapping IO errors to the path.
pub fn read_text(path: &Path) -> Result<String, ArtifactError> {
    fs::read_to_string(path).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// First 16 hex digits of the SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let d = Sha256::digest(&bytes);
    Ok(d[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Fails with [`Error::MissingArtifact`] when `path` does not exist.
pub fn require(what: &'static str, path: &Path) -> Result<(), Error> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            what,
            path: path.display().to_string(),
        })
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes through a temporary sibling file and renames it into place. The temporary file is
/// removed if writing fails.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), ArtifactError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}
