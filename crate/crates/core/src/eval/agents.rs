//! Built-in reference agents that answer probes without any external model.
//!
//! * [`BayesAgent`] wraps a fitted oracle and applies edits with `apply_edit`.
//! * [`Memorizer`] answers with relative frequencies of atomic sentences and treats an edit
//!   as that many extra observations.
//! * A memorizer built with [`Memorizer::stale`] ignores edits entirely.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use crate::error::{EvalError, OracleError, ParseError};
use crate::ids::{EntityId, FactKey};
use crate::language::{parse_document, parse_prompt, Atom, Claim, Prompt, Sentence, Vocabulary};
use crate::oracle::{OracleState, SnapshotToken};

use super::protocol::{ProbeKind, ProbeModel, ProbeQuery, ProbeResponse};

/// Probabilities and generations shared by the built-in agents.
trait Beliefs {
    fn object_probability(&self, key: &FactKey, object: &EntityId) -> Result<f64, EvalError>;
    fn generate(&self, key: &FactKey) -> Result<Option<EntityId>, EvalError>;

    fn atom_probability(&self, a: &Atom) -> Result<f64, EvalError> {
        self.object_probability(&a.key(), &a.object)
    }

    fn claim_probability(&self, claim: &Claim) -> Result<f64, EvalError> {
        Ok(match claim {
            Claim::Atom(a) => self.atom_probability(a)?,
            Claim::Not(a) => 1.0 - self.atom_probability(a)?,
            Claim::And(a, b) => self.atom_probability(a)? * self.atom_probability(b)?,
            Claim::Or(a, b) => {
                let (pa, pb) = (self.atom_probability(a)?, self.atom_probability(b)?);
                pa + pb - pa * pb
            }
        })
    }
}

fn entity<'a>(vocab: &'a Vocabulary, surface: &str) -> Result<&'a EntityId, EvalError> {
    vocab.entity(surface.trim()).ok_or_else(|| {
        EvalError::Parse(ParseError::UnknownEntity {
            span: 0..surface.len(),
            text: surface.to_string(),
        })
    })
}

fn key_prompt(vocab: &Vocabulary, prompt: &str) -> Result<FactKey, EvalError> {
    match parse_prompt(prompt, vocab)? {
        Prompt::NextObject(k) => Ok(k),
        Prompt::Truth(_) => Err(EvalError::Protocol(format!(
            "expected an `s r` prompt, got {prompt:?}"
        ))),
    }
}

fn answer_one<B: Beliefs>(
    b: &B,
    vocab: &Vocabulary,
    q: &ProbeQuery,
) -> Result<ProbeResponse, EvalError> {
    match q.kind {
        ProbeKind::NextObject => {
            let key = key_prompt(vocab, &q.prompt)?;
            let cand = q
                .candidate
                .as_deref()
                .ok_or_else(|| EvalError::Protocol("next_object needs a candidate".into()))?;
            let o = entity(vocab, cand)?;
            Ok(ProbeResponse::probability(
                &q.id,
                b.object_probability(&key, o)?,
            ))
        }
        ProbeKind::Generate => {
            let key = key_prompt(vocab, &q.prompt)?;
            let text = b
                .generate(&key)?
                .map(|o| vocab.entity_surface(&o).to_string())
                .unwrap_or_default();
            Ok(ProbeResponse::text(&q.id, text))
        }
        ProbeKind::Truth => {
            let Prompt::Truth(claim) = parse_prompt(&q.prompt, vocab)? else {
                return Err(EvalError::Protocol(format!(
                    "expected a truth prompt, got {:?}",
                    q.prompt
                )));
            };
            let p = b.claim_probability(&claim)?;
            let p = match q.candidate.as_deref().unwrap_or("true") {
                "true" => p,
                "false" => 1.0 - p,
                other => return Err(EvalError::Protocol(format!("truth candidate {other:?}"))),
            };
            Ok(ProbeResponse::probability(&q.id, p))
        }
        ProbeKind::Edit | ProbeKind::Revert => Err(EvalError::Protocol(
            "edit requests go through the edit hook".into(),
        )),
    }
}

fn answer_all<B: Beliefs>(b: &B, vocab: &Vocabulary, queries: &[ProbeQuery]) -> Vec<ProbeResponse> {
    queries
        .iter()
        .map(|q| answer_one(b, vocab, q).unwrap_or_else(|e| ProbeResponse::error(&q.id, e)))
        .collect()
}

fn edit_atom(vocab: &Vocabulary, prompt: &str, candidate: &str) -> Result<Atom, EvalError> {
    let key = key_prompt(vocab, prompt)?;
    let o = entity(vocab, candidate)?.clone();
    Ok(Atom {
        subject: key.subject,
        relation: key.relation,
        object: o,
    })
}

/// The exact Bayesian agent.
pub struct BayesAgent {
    oracle: OracleState,
    vocab: Vocabulary,
    tokens: Vec<SnapshotToken>,
}

struct OracleBeliefs<'a>(&'a OracleState);

impl Beliefs for OracleBeliefs<'_> {
    fn object_probability(&self, key: &FactKey, object: &EntityId) -> Result<f64, EvalError> {
        Ok(self.0.posterior(key)?.prob(object))
    }

    fn generate(&self, key: &FactKey) -> Result<Option<EntityId>, EvalError> {
        Ok(self.0.posterior(key)?.mode().cloned())
    }

    fn claim_probability(&self, claim: &Claim) -> Result<f64, EvalError> {
        Ok(self.0.claim_probability(claim)?)
    }
}

impl BayesAgent {
    pub fn new(oracle: OracleState, vocab: Vocabulary) -> Self {
        Self {
            oracle,
            vocab,
            tokens: Vec::new(),
        }
    }

    pub fn oracle(&self) -> &OracleState {
        &self.oracle
    }
}

impl ProbeModel for BayesAgent {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        Ok(answer_all(
            &OracleBeliefs(&self.oracle),
            &self.vocab,
            queries,
        ))
    }

    fn edit(
        &mut self,
        _id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        let atom = edit_atom(&self.vocab, prompt, candidate)?;
        let token = self.oracle.snapshot();
        if weight > 0.0 {
            if let Err(e) = self.oracle.apply_edit(&atom, weight) {
                self.oracle.restore(token)?;
                return Err(e.into());
            }
        }
        self.tokens.push(token);
        Ok(())
    }

    fn revert(&mut self, _id: &str) -> Result<(), EvalError> {
        let token = self
            .tokens
            .pop()
            .ok_or_else(|| EvalError::EditHook("revert without a pending edit".into()))?;
        self.oracle.restore(token)?;
        Ok(())
    }
}

/// Relative-frequency memorizer over atomic sentences.
#[derive(Debug, Clone)]
pub struct Memorizer {
    counts: HashMap<FactKey, BTreeMap<EntityId, f64>>,
    vocab: Vocabulary,
    follows_edits: bool,
    undo: Vec<(FactKey, Option<BTreeMap<EntityId, f64>>)>,
}

impl Beliefs for Memorizer {
    fn object_probability(&self, key: &FactKey, object: &EntityId) -> Result<f64, EvalError> {
        let Some(row) = self.counts.get(key) else {
            return Ok(0.0);
        };
        let total: f64 = row.values().sum();
        Ok(if total > 0.0 {
            row.get(object).copied().unwrap_or(0.0) / total
        } else {
            0.0
        })
    }

    /// Most frequent object; ties go to the smallest id.
    fn generate(&self, key: &FactKey) -> Result<Option<EntityId>, EvalError> {
        let Some(row) = self.counts.get(key) else {
            return Ok(None);
        };
        let mut best: Option<(&EntityId, f64)> = None;
        for (o, c) in row {
            if best.is_none_or(|(_, b)| *c > b) {
                best = Some((o, *c));
            }
        }
        Ok(best.map(|(o, _)| o.clone()))
    }
}

impl Memorizer {
    pub fn new(vocab: Vocabulary) -> Self {
        Self {
            counts: HashMap::new(),
            vocab,
            follows_edits: true,
            undo: Vec::new(),
        }
    }

    /// A memorizer whose edit hook does nothing.
    pub fn stale(vocab: Vocabulary) -> Self {
        Self {
            follows_edits: false,
            ..Self::new(vocab)
        }
    }

    pub fn observe(&mut self, atom: &Atom, weight: f64) {
        *self
            .counts
            .entry(atom.key())
            .or_default()
            .entry(atom.object.clone())
            .or_insert(0.0) += weight;
    }

    /// Counts the atomic sentences of corpus text; everything else is ignored.
    pub fn observe_corpus_text<R: BufRead>(&mut self, reader: R) -> Result<(), OracleError> {
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
            let doc =
                parse_document(&line, &self.vocab).map_err(|source| OracleError::CorpusLine {
                    line: i + 1,
                    source,
                })?;
            for s in doc {
                if let Sentence::Atomic(a) = s {
                    self.observe(&a, 1.0);
                }
            }
        }
        Ok(())
    }
}

impl ProbeModel for Memorizer {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        Ok(answer_all(&*self, &self.vocab, queries))
    }

    fn edit(
        &mut self,
        _id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        if !self.follows_edits {
            return Ok(());
        }
        let atom = edit_atom(&self.vocab, prompt, candidate)?;
        let key = atom.key();
        self.undo
            .push((key.clone(), self.counts.get(&key).cloned()));
        if weight > 0.0 {
            self.observe(&atom, weight);
        }
        Ok(())
    }

    fn revert(&mut self, _id: &str) -> Result<(), EvalError> {
        if !self.follows_edits {
            return Ok(());
        }
        let (key, old) = self
            .undo
            .pop()
            .ok_or_else(|| EvalError::EditHook("revert without a pending edit".into()))?;
        match old {
            Some(row) => self.counts.insert(key, row),
            None => self.counts.remove(&key),
        };
        Ok(())
    }
}
