//! Noisy pretraining corpus sampled from a [`WorldModel`].

mod io;
mod stats;

pub use io::{
    read_corpus_text, read_stats, read_vocab, write_corpus, CorpusPaths, CORPUS_FILE,
    CORPUS_FORMAT_VERSION, STATS_FILE, VOCAB_FILE,
};
pub use stats::{recount_corpus, CorpusStats};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CorpusError, WorldError};
use crate::ids::{EntityId, FactKey};
use crate::language::{Atom, Claim, Document, Sentence, Vocabulary, MAX_DOCUMENT_SENTENCES};
use crate::seeding::derive_rng;
use crate::world::WorldModel;

pub const SAMPLES_PER_FACT: usize = 10;
pub const MIN_TRUE_SAMPLES: usize = 6;
pub const MAX_REJECTION_ATTEMPTS: usize = 10_000;
pub const DEFAULT_CONNECTIVES_PER_SUBJECT: usize = 20;

/// Ten noisy samples of one fact and the matching true/false sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct FactBlock {
    pub key: FactKey,
    pub atomic_samples: Vec<Atom>,
    pub tf_sentences: Vec<Sentence>,
}

impl FactBlock {
    pub fn true_samples(&self, ground_truth: &EntityId) -> usize {
        self.atomic_samples
            .iter()
            .filter(|a| &a.object == ground_truth)
            .count()
    }
}

/// Draws an object for `(s, r)` from the fact's base or conditional distribution.
pub fn sample_object<R: Rng + ?Sized>(
    world: &WorldModel,
    key: &FactKey,
    rng: &mut R,
) -> Result<EntityId, WorldError> {
    Ok(world.fact_distribution(key)?.sample(rng).clone())
}

/// Samples ten atoms for a fact, resampling the whole block until at least six carry the
/// ground-truth object.
///
/// Each sampled ground-truth object yields `"s r o" is true`; each other sample `o'` yields
/// `"s r o'" is false`, so labels are truthful and in proportion to the noisy samples.
pub fn gen_fact_block<R: Rng + ?Sized>(
    world: &WorldModel,
    key: &FactKey,
    rng: &mut R,
) -> Result<FactBlock, CorpusError> {
    let gt = world.ground_truth(key)?.clone();
    let dist = world.fact_distribution(key)?;
    for _ in 0..MAX_REJECTION_ATTEMPTS {
        let objects: Vec<EntityId> = (0..SAMPLES_PER_FACT)
            .map(|_| dist.sample(rng).clone())
            .collect();
        if objects.iter().filter(|o| **o == gt).count() < MIN_TRUE_SAMPLES {
            continue;
        }
        let atomic_samples: Vec<Atom> = objects
            .into_iter()
            .map(|o| Atom {
                subject: key.subject.clone(),
                relation: key.relation.clone(),
                object: o,
            })
            .collect();
        let tf_sentences = atomic_samples
            .iter()
            .map(|a| Sentence::truth(Claim::Atom(a.clone()), a.object == gt))
            .collect();
        return Ok(FactBlock {
            key: key.clone(),
            atomic_samples,
            tf_sentences,
        });
    }
    Err(CorpusError::RejectionFailed(
        key.clone(),
        MAX_REJECTION_ATTEMPTS,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Connective {
    And,
    Or,
    Not,
}

fn atom_with_truth<R: Rng + ?Sized>(
    world: &WorldModel,
    key: &FactKey,
    truthful: bool,
    rng: &mut R,
) -> Result<Atom, WorldError> {
    let object = if truthful {
        world.ground_truth(key)?.clone()
    } else {
        world.false_object(key, rng)?
    };
    Ok(Atom {
        subject: key.subject.clone(),
        relation: key.relation.clone(),
        object,
    })
}

/// Truth of a claim under the world's ground truth.
pub fn claim_truth(world: &WorldModel, claim: &Claim) -> Result<bool, WorldError> {
    let t = |a: &Atom| world.is_true(&a.key(), &a.object);
    Ok(match claim {
        Claim::Atom(a) => t(a)?,
        Claim::Not(a) => !t(a)?,
        Claim::And(a, b) => t(a)? && t(b)?,
        Claim::Or(a, b) => t(a)? || t(b)?,
    })
}

/// Correctly labeled and/or/not sentences about `subject`, in equal expected thirds.
///
/// The left operand is one of `facts` (the subject's corpus facts) with a true or false object
/// at even odds; the partner of an and/or is drawn from `partner_pool` among other subjects,
/// also true or false at even odds. A `not` over the ground truth reads `"not A" is false`;
/// over a false object it reads `"not A" is true`.
pub fn gen_connective_sentences<R: Rng + ?Sized>(
    world: &WorldModel,
    facts: &[FactKey],
    count: usize,
    rng: &mut R,
    partner_pool: &[FactKey],
) -> Result<Vec<Sentence>, WorldError> {
    let Some(subject) = facts.first().map(|k| k.subject.clone()) else {
        return Ok(Vec::new());
    };
    let has_partner = partner_pool.iter().any(|k| k.subject != subject);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut kind = match rng.random_range(0..3) {
            0 => Connective::And,
            1 => Connective::Or,
            _ => Connective::Not,
        };
        if !has_partner {
            kind = Connective::Not;
        }
        let key = &facts[rng.random_range(0..facts.len())];
        let a = atom_with_truth(world, key, rng.random_bool(0.5), rng)?;
        let claim = match kind {
            Connective::Not => Claim::Not(a),
            Connective::And | Connective::Or => {
                let partner = loop {
                    let k = &partner_pool[rng.random_range(0..partner_pool.len())];
                    if k.subject != subject {
                        break k;
                    }
                };
                let b = atom_with_truth(world, partner, rng.random_bool(0.5), rng)?;
                if kind == Connective::And {
                    Claim::And(a, b)
                } else {
                    Claim::Or(a, b)
                }
            }
        };
        let label = claim_truth(world, &claim)?;
        out.push(Sentence::truth(claim, label));
    }
    Ok(out)
}

/// Shuffles one subject's sentences and chunks them into documents of at most `max_per_doc`.
pub fn assemble_documents<R: Rng + ?Sized>(
    topic: &EntityId,
    mut sentences: Vec<Sentence>,
    max_per_doc: usize,
    rng: &mut R,
) -> Vec<Document> {
    let max_per_doc = max_per_doc.clamp(1, MAX_DOCUMENT_SENTENCES);
    sentences.shuffle(rng);
    sentences
        .chunks(max_per_doc)
        .map(|chunk| Document {
            topic: topic.clone(),
            sentences: chunk.to_vec(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub target_facts: usize,
    pub connectives_per_subject: usize,
    pub max_per_doc: usize,
    pub seed: u64,
}

impl CorpusConfig {
    pub fn new(target_facts: usize, seed: u64) -> Self {
        Self {
            target_facts,
            connectives_per_subject: DEFAULT_CONNECTIVES_PER_SUBJECT,
            max_per_doc: MAX_DOCUMENT_SENTENCES,
            seed,
        }
    }
}

/// A generated corpus: documents in emission order plus the facts it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub facts: Vec<FactKey>,
    pub stats: CorpusStats,
}

/// Picks subjects in random order, taking their facts until exactly `target` are used.
pub fn select_facts(
    world: &WorldModel,
    target: usize,
    seed: u64,
) -> Result<Vec<(EntityId, Vec<FactKey>)>, CorpusError> {
    let available = world.n_facts();
    if target > available {
        return Err(CorpusError::NotEnoughFacts {
            available,
            requested: target,
        });
    }
    let by_subject = world.facts_by_subject();
    let mut subjects: Vec<&EntityId> = by_subject.keys().collect();
    subjects.shuffle(&mut derive_rng(seed, &["subject-order"]));
    let mut selected = Vec::new();
    let mut used = 0;
    for s in subjects {
        if used == target {
            break;
        }
        let facts = &by_subject[s];
        let take = facts.len().min(target - used);
        used += take;
        selected.push((s.clone(), facts[..take].to_vec()));
    }
    Ok(selected)
}

/// Generates the whole corpus. Subjects are processed in parallel on independent RNG streams
/// keyed by subject id; output order follows subject selection order.
pub fn generate_corpus(
    world: &WorldModel,
    vocab: &Vocabulary,
    cfg: &CorpusConfig,
) -> Result<Corpus, CorpusError> {
    let selected = select_facts(world, cfg.target_facts, cfg.seed)?;
    let pool: Vec<FactKey> = selected
        .iter()
        .flat_map(|(_, facts)| facts.iter().cloned())
        .collect();

    let per_subject: Vec<Vec<Document>> = selected
        .par_iter()
        .map(|(subject, facts)| -> Result<Vec<Document>, CorpusError> {
            let mut rng = derive_rng(cfg.seed, &["subject", subject.as_str()]);
            let mut sentences = Vec::new();
            for key in facts {
                let block = gen_fact_block(world, key, &mut rng)?;
                sentences.extend(block.atomic_samples.into_iter().map(Sentence::Atomic));
                sentences.extend(block.tf_sentences);
            }
            sentences.extend(gen_connective_sentences(
                world,
                facts,
                cfg.connectives_per_subject,
                &mut rng,
                &pool,
            )?);
            Ok(assemble_documents(
                subject,
                sentences,
                cfg.max_per_doc,
                &mut rng,
            ))
        })
        .collect::<Result<_, _>>()?;

    let documents: Vec<Document> = per_subject.into_iter().flatten().collect();
    let stats = CorpusStats::tally(&documents, vocab);
    Ok(Corpus {
        documents,
        facts: pool,
        stats,
    })
}

/// Facts covered by a corpus, grouped by subject.
pub fn facts_by_subject(facts: &[FactKey]) -> BTreeMap<EntityId, Vec<FactKey>> {
    let mut out: BTreeMap<EntityId, Vec<FactKey>> = BTreeMap::new();
    for k in facts {
        out.entry(k.subject.clone()).or_default().push(k.clone());
    }
    out
}
