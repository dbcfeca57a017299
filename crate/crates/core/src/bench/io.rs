use std::io::Write;
use std::path::Path;

use crate::artifact::{read_text, write_atomic, ArtifactHeader};
use crate::error::ArtifactError;

use super::TestCase;

pub const BENCH_FORMAT_VERSION: u32 = 1;
const KIND: &str = "bench";

/// One JSON record per line after the header.
pub fn write_bench(
    cases: &[TestCase],
    header: &ArtifactHeader,
    path: &Path,
) -> Result<(), ArtifactError> {
    let mut header = header.clone();
    header.kind = KIND.into();
    header.version = BENCH_FORMAT_VERSION;
    write_atomic(path, |w: &mut dyn Write| {
        w.write_all(header.render().as_bytes())?;
        for c in cases {
            serde_json::to_writer(&mut *w, c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn read_bench(path: &Path) -> Result<(ArtifactHeader, Vec<TestCase>), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (header, body) = ArtifactHeader::split(&text, KIND, BENCH_FORMAT_VERSION, &p)?;
    let cases = body
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ArtifactError::Format {
                path: p.clone(),
                message: format!("case record {}: {e}", i + 1),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok((header, cases))
}
