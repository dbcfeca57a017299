//! Editing test cases with exact pre- and post-edit Bayesian targets.
//!
//! A case edits `s1 r1` to a requested object `o*` and probes four atoms (`s1 r1`, `s1 r2`,
//! `s2 r1`, `s2 r2`, where `r2` is the downstream partner of `r1`) and five truth claims built
//! from the edit atom `A` and an unrelated atom `B`.

mod io;

pub use io::{read_bench, write_bench, BENCH_FORMAT_VERSION};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, OracleError};
use crate::ids::{EntityId, FactKey, RelationId};
use crate::language::{Atom, Claim, Sentence};
use crate::oracle::{OracleState, DEFAULT_EDIT_WEIGHT, DEFAULT_THRESHOLD};
use crate::seeding::derive_rng;
use crate::world::WorldModel;

pub const DEFAULT_CASES: usize = 5000;
pub const ERROR_FIXING_RATE: f64 = 0.5;
/// Share of counterfactual cases that try to flip the downstream answer.
pub const DOWNSTREAM_PREFERENCE: f64 = 0.8;
pub const MAX_FLIP_DRAWS: usize = 50;
const MAX_SUBJECT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Counterfactual,
    ErrorFixing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub atom: Atom,
    pub kind: EditKind,
}

/// `auto` is the smallest integer weight reaching the threshold; `fixed` the constant weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditWeights {
    pub auto: u64,
    pub fixed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeTag {
    S1r1,
    S1r2,
    S2r1,
    S2r2,
    Tf,
    B,
    Not,
    And,
    Or,
}

impl ProbeTag {
    pub const ATOMS: [ProbeTag; 4] = [
        ProbeTag::S1r1,
        ProbeTag::S1r2,
        ProbeTag::S2r1,
        ProbeTag::S2r2,
    ];
    pub const ALL: [ProbeTag; 9] = [
        ProbeTag::S1r1,
        ProbeTag::S1r2,
        ProbeTag::S2r1,
        ProbeTag::S2r2,
        ProbeTag::Tf,
        ProbeTag::B,
        ProbeTag::Not,
        ProbeTag::And,
        ProbeTag::Or,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeTag::S1r1 => "s1r1",
            ProbeTag::S1r2 => "s1r2",
            ProbeTag::S2r1 => "s2r1",
            ProbeTag::S2r2 => "s2r2",
            ProbeTag::Tf => "tf",
            ProbeTag::B => "b",
            ProbeTag::Not => "not",
            ProbeTag::And => "and",
            ProbeTag::Or => "or",
        }
    }

    pub fn is_atom(self) -> bool {
        Self::ATOMS.contains(&self)
    }
}

impl fmt::Display for ProbeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Atom probes hold `Sentence::Atomic`; logic probes hold a claim labeled true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub tag: ProbeTag,
    pub sentence: Sentence,
}

/// Target probability of a probe, plus the argmax objects of its fact for atom probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub argmax: Vec<EntityId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseFlags {
    pub error_fixing: bool,
    pub downstream_change: bool,
    /// `r2` is not the downstream partner of `r1`.
    pub r2_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub edit: EditRequest,
    pub weights: EditWeights,
    pub probes: Vec<Probe>,
    pub targets_pre: Vec<Target>,
    /// After an edit of weight `weights.auto`.
    pub targets_post: Vec<Target>,
    /// After an edit of weight `weights.fixed`.
    pub targets_post_fixed: Vec<Target>,
    pub flags: CaseFlags,
}

impl TestCase {
    pub fn probe(&self, tag: ProbeTag) -> Option<(&Probe, usize)> {
        self.probes
            .iter()
            .enumerate()
            .find(|(_, p)| p.tag == tag)
            .map(|(i, p)| (p, i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n_cases: usize,
    pub threshold: f64,
    pub fixed_weight: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(n_cases: usize, seed: u64) -> Self {
        Self {
            n_cases,
            threshold: DEFAULT_THRESHOLD,
            fixed_weight: DEFAULT_EDIT_WEIGHT,
            seed,
        }
    }
}

fn probe_target(state: &OracleState, probe: &Probe) -> Result<Target, OracleError> {
    match &probe.sentence {
        Sentence::Atomic(a) => {
            let post = state.posterior(&a.key())?;
            Ok(Target {
                probability: post.prob(&a.object),
                argmax: post.argmax_set(),
            })
        }
        s => Ok(Target {
            probability: state.truth_probability(s)?,
            argmax: Vec::new(),
        }),
    }
}

pub fn probe_targets(state: &OracleState, probes: &[Probe]) -> Result<Vec<Target>, OracleError> {
    probes.iter().map(|p| probe_target(state, p)).collect()
}

/// Runs `f` on the state after an edit of `weight` (none when zero), then restores it.
pub fn with_edit<T>(
    state: &mut OracleState,
    atom: &Atom,
    weight: f64,
    f: impl FnOnce(&OracleState) -> Result<T, OracleError>,
) -> Result<T, OracleError> {
    let token = state.snapshot();
    let out = (|| {
        if weight > 0.0 {
            state.apply_edit(atom, weight)?;
        }
        f(state)
    })();
    state.restore(token)?;
    out
}

/// Pre-edit targets and post-edit targets for the given weight.
pub fn compute_targets(
    state: &mut OracleState,
    edit: &Atom,
    weight: f64,
    probes: &[Probe],
) -> Result<(Vec<Target>, Vec<Target>), OracleError> {
    let pre = probe_targets(state, probes)?;
    let post = with_edit(state, edit, weight, |s| probe_targets(s, probes))?;
    Ok((pre, post))
}

/// Recomputes every stored target of a case against `state`.
pub fn recompute_case(state: &mut OracleState, case: &TestCase) -> Result<TestCase, OracleError> {
    let (pre, post) = compute_targets(
        state,
        &case.edit.atom,
        case.weights.auto as f64,
        &case.probes,
    )?;
    let post_fixed = with_edit(state, &case.edit.atom, case.weights.fixed, |s| {
        probe_targets(s, &case.probes)
    })?;
    Ok(TestCase {
        targets_pre: pre,
        targets_post: post,
        targets_post_fixed: post_fixed,
        ..case.clone()
    })
}

struct Trained {
    relations: BTreeMap<EntityId, Vec<RelationId>>,
}

impl Trained {
    fn new(state: &OracleState) -> Self {
        let mut relations: BTreeMap<EntityId, Vec<RelationId>> = BTreeMap::new();
        for k in state.fact_keys() {
            relations
                .entry(k.subject.clone())
                .or_default()
                .push(k.relation.clone());
        }
        Self { relations }
    }

    fn has(&self, s: &EntityId, r: &RelationId) -> bool {
        self.relations.get(s).is_some_and(|rs| rs.contains(r))
    }
}

fn mode_of(state: &OracleState, key: &FactKey) -> Result<EntityId, OracleError> {
    state
        .posterior(key)?
        .mode()
        .cloned()
        .ok_or_else(|| OracleError::UnknownFactKey(key.clone()))
}

struct Slots {
    s1: EntityId,
    r1: RelationId,
    r2: RelationId,
    s2: EntityId,
    fallback: bool,
}

fn pick_slots<R: Rng + ?Sized>(
    state: &OracleState,
    trained: &Trained,
    eligible: &[&EntityId],
    rng: &mut R,
) -> Option<Slots> {
    let deps = state.deps();
    for _ in 0..MAX_SUBJECT_ATTEMPTS {
        let s1 = (*eligible.choose(rng)?).clone();
        let rels = &trained.relations[&s1];
        let upstream: Vec<&RelationId> = rels.iter().filter(|r| !deps.is_downstream(r)).collect();
        let r1 = (*upstream.choose(rng)?).clone();
        let (r2, fallback) = match deps.downstream_of(&r1) {
            Some(d) if trained.has(&s1, d) => (d.clone(), false),
            _ => {
                let others: Vec<&RelationId> = rels.iter().filter(|r| **r != r1).collect();
                match others.choose(rng) {
                    Some(r) => ((*r).clone(), true),
                    None => continue,
                }
            }
        };
        let s2s: Vec<&EntityId> = trained
            .relations
            .keys()
            .filter(|s| **s != s1 && trained.has(s, &r1) && trained.has(s, &r2))
            .collect();
        let Some(s2) = s2s.choose(rng) else {
            continue;
        };
        return Some(Slots {
            s2: (*s2).clone(),
            s1,
            r1,
            r2,
            fallback,
        });
    }
    None
}

/// Draws `B`: a fact of another subject, labeled true or false with equal odds.
fn pick_partner<R: Rng + ?Sized>(
    world: &WorldModel,
    state: &OracleState,
    trained: &Trained,
    s1: &EntityId,
    rng: &mut R,
) -> Result<Atom, BenchError> {
    let others: Vec<&EntityId> = trained.relations.keys().filter(|s| *s != s1).collect();
    let s = (*others.choose(rng).ok_or(BenchError::TooFewSubjects(1))?).clone();
    let r = trained.relations[&s].choose(rng).expect("nonempty").clone();
    let key = FactKey::new(s.clone(), r.clone());
    let gt = world.ground_truth(&key)?.clone();
    let object = if rng.random_bool(0.5) {
        gt
    } else {
        let alts: Vec<&EntityId> = state
            .basic_row(&key)
            .map(|row| row.support.iter().filter(|o| **o != gt).collect())
            .unwrap_or_default();
        match alts.choose(rng) {
            Some(o) => (*o).clone(),
            None => world.false_object(&key, rng)?,
        }
    };
    Ok(Atom {
        subject: s,
        relation: r,
        object,
    })
}

fn flips(
    state: &mut OracleState,
    atom: &Atom,
    watch: &FactKey,
    threshold: f64,
) -> Result<bool, OracleError> {
    let before = mode_of(state, watch)?;
    let w = state.min_weight_for(atom, threshold)?;
    let after = with_edit(state, atom, w as f64, |s| mode_of(s, watch))?;
    Ok(before != after)
}

/// Generates `cfg.n_cases` cases against a fitted oracle. The oracle is restored after every
/// case, so it is unchanged on return.
pub fn gen_cases(
    world: &WorldModel,
    state: &mut OracleState,
    cfg: &BenchConfig,
) -> Result<Vec<TestCase>, BenchError> {
    let trained = Trained::new(state);
    if trained.relations.len() < 2 {
        return Err(BenchError::TooFewSubjects(trained.relations.len()));
    }
    let eligible: Vec<&EntityId> = trained
        .relations
        .iter()
        .filter(|(_, rs)| rs.iter().any(|r| !state.deps().is_downstream(r)))
        .map(|(s, _)| s)
        .collect();
    let mut rng = derive_rng(cfg.seed, &["bench"]);
    let mut cases = Vec::with_capacity(cfg.n_cases);
    for i in 0..cfg.n_cases {
        let slots = pick_slots(state, &trained, &eligible, &mut rng)
            .ok_or(BenchError::NoEligibleSubjects)?;
        let k1 = FactKey::new(slots.s1.clone(), slots.r1.clone());
        let k12 = FactKey::new(slots.s1.clone(), slots.r2.clone());
        let gt = world.ground_truth(&k1)?.clone();
        let error_fixing = rng.random_bool(ERROR_FIXING_RATE);
        let object = if error_fixing {
            gt.clone()
        } else {
            let pool: Vec<&EntityId> = world
                .relation_objects(&slots.r1)
                .iter()
                .filter(|o| **o != gt)
                .collect();
            if pool.is_empty() {
                return Err(BenchError::World(crate::error::WorldError::NoDistractor(
                    slots.r1.clone(),
                )));
            }
            let draws = if !slots.fallback && rng.random_bool(DOWNSTREAM_PREFERENCE) {
                MAX_FLIP_DRAWS
            } else {
                1
            };
            let mut chosen = (*pool.choose(&mut rng).expect("nonempty")).clone();
            for d in 1..=draws {
                let a = Atom::new(slots.s1.clone(), slots.r1.clone(), chosen.clone());
                if draws == 1 || flips(state, &a, &k12, cfg.threshold)? || d == draws {
                    break;
                }
                chosen = (*pool.choose(&mut rng).expect("nonempty")).clone();
            }
            chosen
        };
        let edit = Atom::new(slots.s1.clone(), slots.r1.clone(), object);
        let b = pick_partner(world, state, &trained, &slots.s1, &mut rng)?;
        let auto = state.min_weight_for(&edit, cfg.threshold)?;

        let atom_keys = [
            (ProbeTag::S1r2, k12.clone()),
            (
                ProbeTag::S2r1,
                FactKey::new(slots.s2.clone(), slots.r1.clone()),
            ),
            (
                ProbeTag::S2r2,
                FactKey::new(slots.s2.clone(), slots.r2.clone()),
            ),
        ];
        let candidates = with_edit(state, &edit, auto as f64, |s| {
            atom_keys
                .iter()
                .map(|(_, k)| mode_of(s, k))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut probes = vec![Probe {
            tag: ProbeTag::S1r1,
            sentence: Sentence::Atomic(edit.clone()),
        }];
        for ((tag, k), o) in atom_keys.iter().zip(candidates) {
            probes.push(Probe {
                tag: *tag,
                sentence: Sentence::Atomic(Atom::new(k.subject.clone(), k.relation.clone(), o)),
            });
        }
        for (tag, claim) in [
            (ProbeTag::Tf, Claim::Atom(edit.clone())),
            (ProbeTag::B, Claim::Atom(b.clone())),
            (ProbeTag::Not, Claim::Not(edit.clone())),
            (ProbeTag::And, Claim::And(edit.clone(), b.clone())),
            (ProbeTag::Or, Claim::Or(edit.clone(), b.clone())),
        ] {
            probes.push(Probe {
                tag,
                sentence: Sentence::truth(claim, true),
            });
        }

        let draft = TestCase {
            id: format!("case-{i:05}"),
            edit: EditRequest {
                atom: edit,
                kind: if error_fixing {
                    EditKind::ErrorFixing
                } else {
                    EditKind::Counterfactual
                },
            },
            weights: EditWeights {
                auto,
                fixed: cfg.fixed_weight,
            },
            probes,
            targets_pre: Vec::new(),
            targets_post: Vec::new(),
            targets_post_fixed: Vec::new(),
            flags: CaseFlags {
                error_fixing,
                downstream_change: false,
                r2_fallback: slots.fallback,
            },
        };
        let mut case = recompute_case(state, &draft)?;
        if !slots.fallback {
            let pre = mode_of(state, &k12)?;
            let post = with_edit(state, &case.edit.atom, auto as f64, |s| mode_of(s, &k12))?;
            case.flags.downstream_change = pre != post;
        }
        cases.push(case);
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    Downstream,
    Errorfix,
}

impl Subset {
    pub const EVERY: [Subset; 3] = [Subset::All, Subset::Downstream, Subset::Errorfix];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::Downstream => "downstream",
            Subset::Errorfix => "errorfix",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Subset::All => "All edit requests",
            Subset::Downstream => "Edit requests with downstream answer changes",
            Subset::Errorfix => "Fixing errors w.r.t. pretraining facts",
        }
    }

    pub fn contains(self, case: &TestCase) -> bool {
        match self {
            Subset::All => true,
            Subset::Downstream => case.flags.downstream_change,
            Subset::Errorfix => case.flags.error_fixing,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subset::EVERY
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown subset {s:?} (expected all, downstream or errorfix)"))
    }
}

/// Case indices per subset. Subsets may overlap.
pub fn split_subsets(cases: &[TestCase]) -> BTreeMap<Subset, Vec<usize>> {
    Subset::EVERY
        .into_iter()
        .map(|s| {
            let idx = cases
                .iter()
                .enumerate()
                .filter(|(_, c)| s.contains(c))
                .map(|(i, _)| i)
                .collect();
            (s, idx)
        })
        .collect()
}

#[cfg(test)]
mod tests;
