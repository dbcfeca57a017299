use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_text, write_atomic, ArtifactHeader};
use crate::error::ArtifactError;
use crate::ids::{CondKey, EntityId, FactKey, RelationId};
use crate::world::DependencyMap;

use super::{OracleState, Row};

pub const ORACLE_FORMAT_VERSION: u32 = 1;
const KIND: &str = "oracle";

#[derive(Serialize, Deserialize)]
struct BasicEntry {
    key: FactKey,
    #[serde(flatten)]
    row: Row,
}

#[derive(Serialize, Deserialize)]
struct CondEntry {
    key: CondKey,
    counts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    prior_alpha: f64,
    deps: DependencyMap,
    basic: Vec<BasicEntry>,
    cond_support: BTreeMap<RelationId, Vec<EntityId>>,
    cond: Vec<CondEntry>,
}

/// Serializes the fitted counts. Snapshots are not persisted.
pub fn write_oracle(
    state: &OracleState,
    header: ArtifactHeader,
    path: &Path,
) -> Result<(), ArtifactError> {
    let c = state.counts();
    let body = Body {
        prior_alpha: c.prior_alpha,
        deps: state.deps().clone(),
        basic: c
            .basic()
            .iter()
            .map(|(key, row)| BasicEntry {
                key: key.clone(),
                row: row.clone(),
            })
            .collect(),
        cond_support: c.cond_support_map().clone(),
        cond: c
            .cond()
            .iter()
            .map(|(key, counts)| CondEntry {
                key: key.clone(),
                counts: counts.clone(),
            })
            .collect(),
    };
    let mut header = header;
    header.kind = KIND.into();
    header.version = ORACLE_FORMAT_VERSION;
    write_atomic(path, |w: &mut dyn Write| {
        w.write_all(header.render().as_bytes())?;
        serde_json::to_writer(&mut *w, &body)?;
        w.write_all(b"\n")
    })
}

pub fn read_oracle(path: &Path) -> Result<(ArtifactHeader, OracleState), ArtifactError> {
    let p = path.display().to_string();
    let text = read_text(path)?;
    let (header, body) = ArtifactHeader::split(&text, KIND, ORACLE_FORMAT_VERSION, &p)?;
    let body: Body = serde_json::from_str(body).map_err(|e| ArtifactError::Format {
        path: p.clone(),
        message: e.to_string(),
    })?;
    for e in &body.basic {
        if e.row.support.len() != e.row.counts.len() {
            return Err(ArtifactError::Format {
                path: p,
                message: format!("support and counts differ in length for {}", e.key),
            });
        }
    }
    let state = OracleState::from_parts(
        body.deps,
        body.prior_alpha,
        body.basic.into_iter().map(|e| (e.key, e.row)).collect(),
        body.cond_support,
        body.cond.into_iter().map(|e| (e.key, e.counts)).collect(),
    );
    Ok((header, state))
}
