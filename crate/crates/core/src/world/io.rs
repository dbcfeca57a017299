use std::io::Write;
use std::path::Path;

use crate::artifact::{read_text, write_atomic, ArtifactHeader};
use crate::error::ArtifactError;
use crate::world::WorldModel;

pub const WORLD_FORMAT_VERSION: u32 = 1;
const KIND: &str = "world";

pub fn world_header(seed: u64) -> ArtifactHeader {
    ArtifactHeader::new(KIND, WORLD_FORMAT_VERSION, seed)
}

pub fn write_world(
    world: &WorldModel,
    header: &ArtifactHeader,
    path: &Path,
) -> Result<(), ArtifactError> {
    write_atomic(path, |w: &mut dyn Write| {
        w.write_all(header.render().as_bytes())?;
        serde_json::to_writer(&mut *w, world)?;
        w.write_all(b"\n")
    })
}

pub fn read_world(path: &Path) -> Result<(ArtifactHeader, WorldModel), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (header, body) = ArtifactHeader::split(&text, KIND, WORLD_FORMAT_VERSION, &p)?;
    let world = serde_json::from_str(body).map_err(|e| ArtifactError::Format {
        path: p,
        message: e.to_string(),
    })?;
    Ok((header, world))
}
