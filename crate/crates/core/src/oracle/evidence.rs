//! Turning corpus sentences into weighted evidence.
//!
//! Fitting runs in stages so that the result does not depend on sentence order:
//!
//! 1. every atom's object is registered in its fact's support;
//! 2. atomic and true/false sentences add basic counts;
//! 3. their downstream evidence is spread over the conditional tables using the upstream
//!    posteriors left by stage 2;
//! 4. connective sentences are weighted from the state after stage 3 and added;
//! 5. the downstream evidence from stage 4 is propagated the same way.
//!
//! An atom inside a labeled claim counts as a true observation with weight
//! `t = P(atom true | label)` and as "atom is false" evidence with weight `1 - t`.

use std::io::BufRead;

use crate::error::{OracleError, ParseError};
use crate::ids::{EntityId, FactKey};
use crate::language::{parse_document, Atom, Claim, Sentence, Vocabulary};

use super::OracleState;

/// Sentence counts seen while fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorpusEvidence {
    pub atomic: usize,
    pub tf: usize,
    pub connective: usize,
}

type Pending = Vec<(FactKey, EntityId, f64)>;

fn add_true(state: &mut OracleState, atom: &Atom, w: f64, pending: &mut Pending) {
    if w <= 0.0 {
        return;
    }
    let key = atom.key();
    let i = state.register(&key, &atom.object);
    state.add_basic(&key, i, w);
    pending.push((key, atom.object.clone(), w));
}

fn add_false(state: &mut OracleState, atom: &Atom, w: f64, pending: &mut Pending) {
    if w <= 0.0 {
        return;
    }
    let key = atom.key();
    let others: Vec<EntityId> = state
        .basic_row(&key)
        .map(|r| {
            r.support
                .iter()
                .filter(|o| **o != atom.object)
                .cloned()
                .collect()
        })
        .unwrap_or_default();
    if others.is_empty() {
        return;
    }
    let share = w / others.len() as f64;
    for o in others {
        let i = state.register(&key, &o);
        state.add_basic(&key, i, share);
        pending.push((key.clone(), o, share));
    }
}

fn flush(state: &mut OracleState, pending: Pending) {
    for (key, object, w) in pending {
        state.propagate_downstream(&key, &object, w);
    }
}

/// `P(atom true | claim has truth value label)` for each atom of the claim, treating atoms
/// as independent with the state's current probabilities. Empty when the label has
/// probability zero.
pub fn connective_atom_weights(
    state: &OracleState,
    claim: &Claim,
    label: bool,
) -> Result<Vec<(Atom, f64)>, OracleError> {
    let certain = |a: &Atom, t: bool| vec![(a.clone(), if t { 1.0 } else { 0.0 })];
    let (a, b, holds): (&Atom, &Atom, fn(bool, bool) -> bool) = match claim {
        Claim::Atom(a) => return Ok(certain(a, label)),
        Claim::Not(a) => return Ok(certain(a, !label)),
        Claim::And(a, b) => (a, b, |x, y| x && y),
        Claim::Or(a, b) => (a, b, |x, y| x || y),
    };
    if a.key() == b.key() {
        return Err(OracleError::DependenceUnsupported(a.key()));
    }
    let pa = state.atom_probability(a)?;
    let pb = state.atom_probability(b)?;
    let (mut z, mut za, mut zb) = (0.0, 0.0, 0.0);
    for x in [true, false] {
        for y in [true, false] {
            if holds(x, y) != label {
                continue;
            }
            let p = (if x { pa } else { 1.0 - pa }) * (if y { pb } else { 1.0 - pb });
            z += p;
            if x {
                za += p;
            }
            if y {
                zb += p;
            }
        }
    }
    if z <= 0.0 {
        return Ok(Vec::new());
    }
    Ok(vec![(a.clone(), za / z), (b.clone(), zb / z)])
}

/// Fits the state on a corpus. The result is invariant to sentence order.
pub fn observe_corpus<'a, I>(
    state: &mut OracleState,
    sentences: I,
) -> Result<CorpusEvidence, OracleError>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let sentences: Vec<&Sentence> = sentences.into_iter().collect();
    for s in &sentences {
        for a in s.atoms() {
            state.register(&a.key(), &a.object);
        }
    }

    let mut seen = CorpusEvidence::default();
    let mut pending = Pending::new();
    let mut connectives = Vec::new();
    for s in &sentences {
        match s {
            Sentence::Atomic(a) => {
                seen.atomic += 1;
                add_true(state, a, 1.0, &mut pending);
            }
            Sentence::Truth {
                claim: Claim::Atom(a),
                label,
            } => {
                seen.tf += 1;
                if *label {
                    add_true(state, a, 1.0, &mut pending);
                } else {
                    add_false(state, a, 1.0, &mut pending);
                }
            }
            Sentence::Truth { claim, label } => {
                seen.connective += 1;
                connectives.push((claim, *label));
            }
        }
    }
    flush(state, pending);

    let mut weighted = Vec::new();
    for (claim, label) in connectives {
        weighted.extend(connective_atom_weights(state, claim, label)?);
    }
    let mut pending = Pending::new();
    for (atom, t) in &weighted {
        add_true(state, atom, *t, &mut pending);
        add_false(state, atom, 1.0 - t, &mut pending);
    }
    flush(state, pending);
    Ok(seen)
}

/// Parses corpus text (one document per line, `#` lines skipped) and fits the state on it.
pub fn observe_corpus_text<R: BufRead>(
    state: &mut OracleState,
    reader: R,
    vocab: &Vocabulary,
) -> Result<CorpusEvidence, OracleError> {
    let mut sentences = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| OracleError::CorpusLine {
            line: i + 1,
            source: ParseError::Syntax {
                pos: 0,
                message: e.to_string(),
            },
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let doc = parse_document(&line, vocab).map_err(|source| OracleError::CorpusLine {
            line: i + 1,
            source,
        })?;
        sentences.extend(doc);
    }
    observe_corpus(state, &sentences)
}
