//! Run configuration.
//!
//! A config file is flat `key = value` text; blank lines and `#` comments are ignored:
//!
//! ```text
//! seed = 42
//! facts = 1000
//! floor = 0.6
//! edit_weight = auto
//! ```
//!
//! Values are resolved flags first, then the file, then defaults. Every knob (but no path) is
//! echoed into the header of each artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::artifact::ArtifactHeader;
use crate::corpus::{CorpusPaths, DEFAULT_CONNECTIVES_PER_SUBJECT};
use crate::error::Error;
use crate::eval::{EditWeightMode, DEFAULT_WINDOW};
use crate::language::MAX_DOCUMENT_SENTENCES;
use crate::oracle::{DEFAULT_EDIT_WEIGHT, DEFAULT_THRESHOLD};
use crate::pipeline::{DEFAULT_TOP_K, DESK_FACTS};
use crate::world::DEFAULT_FLOOR;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EDITBENCH_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "editbench-out";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BENCH_CASES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub world: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub oracle: Option<PathBuf>,
    pub bench: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Unset means the builder's own default, which differs for triple files and synthetic graphs.
    pub min_cooccur: Option<usize>,
    pub top_k: usize,
    pub floor: f64,
    pub facts: usize,
    pub connectives_per_subject: usize,
    pub max_per_doc: usize,
    pub n_cases: usize,
    pub threshold: f64,
    pub fixed_weight: f64,
    pub edit_weight: EditWeightMode,
    pub window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            world: None,
            corpus_dir: None,
            oracle: None,
            bench: None,
            report: None,
            min_cooccur: None,
            top_k: DEFAULT_TOP_K,
            floor: DEFAULT_FLOOR,
            facts: DESK_FACTS,
            connectives_per_subject: DEFAULT_CONNECTIVES_PER_SUBJECT,
            max_per_doc: MAX_DOCUMENT_SENTENCES,
            n_cases: DEFAULT_BENCH_CASES,
            threshold: DEFAULT_THRESHOLD,
            fixed_weight: DEFAULT_EDIT_WEIGHT,
            edit_weight: EditWeightMode::Auto,
            window: DEFAULT_WINDOW,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Defaults, with the output directory taken from the environment when set.
    pub fn from_env() -> Self {
        let mut c = Self::default();
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            c.out_dir = PathBuf::from(dir);
        }
        c
    }

    /// Sets one knob by its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "world" => self.world = Some(PathBuf::from(v)),
            "corpus_dir" => self.corpus_dir = Some(PathBuf::from(v)),
            "oracle" => self.oracle = Some(PathBuf::from(v)),
            "bench" => self.bench = Some(PathBuf::from(v)),
            "report" => self.report = Some(PathBuf::from(v)),
            "min_cooccur" => self.min_cooccur = Some(parse(key, v)?),
            "top_k" => self.top_k = parse(key, v)?,
            "floor" => self.floor = parse(key, v)?,
            "facts" => self.facts = parse(key, v)?,
            "connectives_per_subject" => self.connectives_per_subject = parse(key, v)?,
            "max_per_doc" => self.max_per_doc = parse(key, v)?,
            "n_cases" => self.n_cases = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "fixed_weight" => self.fixed_weight = parse(key, v)?,
            "edit_weight" => self.edit_weight = v.parse().map_err(Error::Config)?,
            "window" => self.window = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Error> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = std::fs::read_to_string(path).map_err(|_| Error::MissingArtifact {
            what: "config file",
            path: path.display().to_string(),
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.facts == 0 {
            return bad("facts must be at least 1");
        }
        if !(self.floor > 0.5 && self.floor <= 1.0) {
            return bad("floor must lie in (0.5, 1]");
        }
        if self.top_k < 2 {
            return bad("top_k must be at least 2");
        }
        if self.max_per_doc == 0 {
            return bad("max_per_doc must be at least 1");
        }
        if self.n_cases == 0 {
            return bad("n_cases must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(self.fixed_weight > 0.0 && self.fixed_weight.is_finite()) {
            return bad("fixed_weight must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        Ok(())
    }

    /// Knobs echoed into artifact headers, keyed as in the config file.
    pub fn knobs(&self) -> BTreeMap<String, String> {
        let mut out: BTreeMap<String, String> = [
            ("top_k", self.top_k.to_string()),
            ("floor", self.floor.to_string()),
            ("facts", self.facts.to_string()),
            (
                "connectives_per_subject",
                self.connectives_per_subject.to_string(),
            ),
            ("max_per_doc", self.max_per_doc.to_string()),
            ("n_cases", self.n_cases.to_string()),
            ("threshold", self.threshold.to_string()),
            ("fixed_weight", self.fixed_weight.to_string()),
            ("edit_weight", self.edit_weight.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        if let Some(m) = self.min_cooccur {
            out.insert("min_cooccur".into(), m.to_string());
        }
        out
    }

    pub fn header(&self, kind: &str, version: u32) -> ArtifactHeader {
        let mut h = ArtifactHeader::new(kind, version, self.seed);
        h.config = self.knobs();
        h
    }

    pub fn world_path(&self) -> PathBuf {
        self.world
            .clone()
            .unwrap_or_else(|| self.out_dir.join("world.json"))
    }

    pub fn corpus_paths(&self) -> CorpusPaths {
        CorpusPaths::in_dir(
            &self
                .corpus_dir
                .clone()
                .unwrap_or_else(|| self.out_dir.join("corpus")),
        )
    }

    pub fn oracle_path(&self) -> PathBuf {
        self.oracle
            .clone()
            .unwrap_or_else(|| self.out_dir.join("oracle.json"))
    }

    pub fn bench_path(&self) -> PathBuf {
        self.bench
            .clone()
            .unwrap_or_else(|| self.out_dir.join("bench.jsonl"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.report
            .clone()
            .unwrap_or_else(|| self.out_dir.join("report.txt"))
    }
}
