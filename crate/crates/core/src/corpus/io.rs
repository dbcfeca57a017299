use std::io::Write;
use std::path::{Path, PathBuf};

use crate::artifact::{read_text, write_atomic, ArtifactHeader};
use crate::error::ArtifactError;
use crate::language::{render_document, Vocabulary};

use super::{Corpus, CorpusStats};

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const CORPUS_FILE: &str = "corpus.txt";
pub const STATS_FILE: &str = "corpus.stats";
pub const VOCAB_FILE: &str = "vocab.tsv";

/// The three files a corpus directory holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub corpus: PathBuf,
    pub stats: PathBuf,
    pub vocab: PathBuf,
}

impl CorpusPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            corpus: dir.join(CORPUS_FILE),
            stats: dir.join(STATS_FILE),
            vocab: dir.join(VOCAB_FILE),
        }
    }
}

fn with_kind(header: &ArtifactHeader, kind: &str) -> ArtifactHeader {
    let mut h = header.clone();
    h.kind = kind.to_string();
    h.version = CORPUS_FORMAT_VERSION;
    h
}

/// Writes one document per line, plus the statistics and vocabulary files. All three share
/// the header's seed and config.
pub fn write_corpus(
    corpus: &Corpus,
    vocab: &Vocabulary,
    header: &ArtifactHeader,
    paths: &CorpusPaths,
) -> Result<(), ArtifactError> {
    write_atomic(&paths.corpus, |w: &mut dyn Write| {
        w.write_all(with_kind(header, "corpus").render().as_bytes())?;
        for d in &corpus.documents {
            writeln!(w, "{}", render_document(d, vocab))?;
        }
        Ok(())
    })?;
    write_atomic(&paths.stats, |w: &mut dyn Write| {
        w.write_all(with_kind(header, "stats").render().as_bytes())?;
        write!(w, "{}", corpus.stats)
    })?;
    write_atomic(&paths.vocab, |w: &mut dyn Write| {
        w.write_all(with_kind(header, "vocab").render().as_bytes())?;
        vocab.write_to(w)
    })
}

pub fn read_vocab(path: &Path) -> Result<(ArtifactHeader, Vocabulary), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (h, body) = ArtifactHeader::split(&text, "vocab", CORPUS_FORMAT_VERSION, &p)?;
    Ok((h, Vocabulary::read_from(body.as_bytes(), &p)?))
}

pub fn read_stats(path: &Path) -> Result<(ArtifactHeader, CorpusStats), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (h, body) = ArtifactHeader::split(&text, "stats", CORPUS_FORMAT_VERSION, &p)?;
    Ok((h, CorpusStats::from_key_values(body.as_bytes(), &p)?))
}

/// Reads the corpus text, returning its header and the document lines.
pub fn read_corpus_text(path: &Path) -> Result<(ArtifactHeader, String), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (h, body) = ArtifactHeader::split(&text, "corpus", CORPUS_FORMAT_VERSION, &p)?;
    Ok((h, body.to_string()))
}
