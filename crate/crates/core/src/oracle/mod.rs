//! Exact Bayesian reference agent.
//!
//! Each fact `(s, r)` is a Dirichlet-Categorical model over its registered objects with a
//! symmetric pseudo-count prior. Downstream relations additionally share conditional tables
//! `p(o_d | r_d, r_u, o_u)` across subjects; a subject's downstream posterior marginalizes
//! those tables over its own upstream posterior.

mod evidence;
mod file;

pub use evidence::{connective_atom_weights, observe_corpus, observe_corpus_text, CorpusEvidence};
pub use file::{read_oracle, write_oracle, ORACLE_FORMAT_VERSION};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::Categorical;
use crate::error::OracleError;
use crate::ids::{CondKey, EntityId, FactKey, RelationId};
use crate::language::{Atom, Claim, Sentence};
use crate::world::DependencyMap;

pub const DEFAULT_PRIOR: f64 = 1.0;
pub const DEFAULT_EDIT_WEIGHT: f64 = 1000.0;
pub const DEFAULT_THRESHOLD: f64 = 0.95;

/// Registered objects and their evidence for one fact.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Row {
    pub support: Vec<EntityId>,
    pub counts: Vec<f64>,
}

impl Row {
    fn index(&self, object: &EntityId) -> Option<usize> {
        self.support.iter().position(|o| o == object)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, object: &EntityId) -> f64 {
        self.index(object).map_or(0.0, |i| self.counts[i])
    }
}

/// Evidence counts. Conditional rows are indexed by the downstream relation's global support
/// and may be shorter than it; missing cells are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountTable {
    basic: BTreeMap<FactKey, Row>,
    cond_support: BTreeMap<RelationId, Vec<EntityId>>,
    cond_index: BTreeMap<RelationId, HashMap<EntityId, usize>>,
    cond: BTreeMap<CondKey, Vec<f64>>,
    pub prior_alpha: f64,
}

#[derive(Debug, Clone)]
enum Undo {
    NewBasicKey(FactKey),
    BasicSupportPush(FactKey),
    BasicCount(FactKey, usize, f64),
    CondSupportPush(RelationId),
    NewCondRow(CondKey),
    CondRowLen(CondKey, usize),
    CondCount(CondKey, usize, f64),
}

/// Opaque handle returned by [`OracleState::snapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SnapshotToken {
    id: u64,
}

/// Downstream posterior plus whether it had to fall back to the fact's own counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub dist: Categorical,
    pub fell_back: bool,
}

#[derive(Debug, Clone)]
pub struct OracleState {
    counts: CountTable,
    deps: DependencyMap,
    journal: Vec<Undo>,
    snapshots: Vec<(u64, usize)>,
    next_snapshot: u64,
}

fn predictive(alpha: f64, counts: &[f64], k: usize, i: usize) -> f64 {
    let n: f64 = counts.iter().sum();
    (alpha + counts.get(i).copied().unwrap_or(0.0)) / (alpha * k as f64 + n)
}

impl OracleState {
    pub fn new(deps: DependencyMap) -> Self {
        Self::with_prior(deps, DEFAULT_PRIOR)
    }

    pub fn with_prior(deps: DependencyMap, prior_alpha: f64) -> Self {
        Self {
            counts: CountTable {
                prior_alpha,
                ..CountTable::default()
            },
            deps,
            journal: Vec::new(),
            snapshots: Vec::new(),
            next_snapshot: 0,
        }
    }

    pub fn deps(&self) -> &DependencyMap {
        &self.deps
    }

    pub fn prior_alpha(&self) -> f64 {
        self.counts.prior_alpha
    }

    fn log(&mut self, u: Undo) {
        if !self.snapshots.is_empty() {
            self.journal.push(u);
        }
    }

    // ---- registration and raw counts ----

    /// Registered fact keys in order.
    pub fn fact_keys(&self) -> impl Iterator<Item = &FactKey> {
        self.counts.basic.keys()
    }

    pub fn is_registered(&self, key: &FactKey) -> bool {
        self.counts.basic.contains_key(key)
    }

    pub fn basic_row(&self, key: &FactKey) -> Option<&Row> {
        self.counts.basic.get(key)
    }

    pub fn cond_support(&self, downstream: &RelationId) -> &[EntityId] {
        self.counts
            .cond_support
            .get(downstream)
            .map_or(&[], Vec::as_slice)
    }

    pub fn cond_counts(&self, key: &CondKey) -> Option<&[f64]> {
        self.counts.cond.get(key).map(Vec::as_slice)
    }

    pub fn cond_keys(&self) -> impl Iterator<Item = &CondKey> {
        self.counts.cond.keys()
    }

    /// Adds `object` to the fact's support (and to the downstream support when the relation
    /// is downstream). Returns its index in the fact row.
    pub fn register(&mut self, key: &FactKey, object: &EntityId) -> usize {
        if !self.counts.basic.contains_key(key) {
            self.counts.basic.insert(key.clone(), Row::default());
            self.log(Undo::NewBasicKey(key.clone()));
        }
        if self.deps.is_downstream(&key.relation) {
            self.register_cond_object(&key.relation, object);
        }
        let row = self.counts.basic.get_mut(key).expect("inserted above");
        if let Some(i) = row.index(object) {
            return i;
        }
        row.support.push(object.clone());
        row.counts.push(0.0);
        let i = row.support.len() - 1;
        self.log(Undo::BasicSupportPush(key.clone()));
        i
    }

    fn register_cond_object(&mut self, downstream: &RelationId, object: &EntityId) -> usize {
        let index = self
            .counts
            .cond_index
            .entry(downstream.clone())
            .or_default();
        if let Some(&i) = index.get(object) {
            return i;
        }
        let support = self
            .counts
            .cond_support
            .entry(downstream.clone())
            .or_default();
        support.push(object.clone());
        let i = support.len() - 1;
        index.insert(object.clone(), i);
        self.log(Undo::CondSupportPush(downstream.clone()));
        i
    }

    fn add_basic(&mut self, key: &FactKey, i: usize, w: f64) {
        let cell = &mut self.counts.basic.get_mut(key).expect("registered").counts[i];
        let old = *cell;
        *cell += w;
        self.log(Undo::BasicCount(key.clone(), i, old));
    }

    fn add_cond(&mut self, key: &CondKey, i: usize, w: f64) {
        if !self.counts.cond.contains_key(key) {
            self.counts.cond.insert(key.clone(), Vec::new());
            self.log(Undo::NewCondRow(key.clone()));
        }
        let row = self.counts.cond.get_mut(key).expect("inserted above");
        if row.len() <= i {
            let old_len = row.len();
            row.resize(i + 1, 0.0);
            self.log(Undo::CondRowLen(key.clone(), old_len));
        }
        let row = self.counts.cond.get_mut(key).expect("inserted above");
        let old = row[i];
        row[i] += w;
        self.log(Undo::CondCount(key.clone(), i, old));
    }

    /// Spreads downstream evidence `w` for `object` over the conditional rows of the subject's
    /// registered upstream objects, in proportion to their current posterior.
    fn propagate_downstream(&mut self, key: &FactKey, object: &EntityId, w: f64) {
        let Some(up) = self.deps.upstream_of(&key.relation).cloned() else {
            return;
        };
        let up_key = FactKey::new(key.subject.clone(), up.clone());
        let Ok(up_post) = self.posterior_basic(&up_key) else {
            return;
        };
        let i = self.register_cond_object(&key.relation, object);
        for (o_u, p) in up_post.entries() {
            let ck = CondKey {
                downstream: key.relation.clone(),
                upstream: up.clone(),
                upstream_object: o_u.clone(),
            };
            self.add_cond(&ck, i, w * p);
        }
    }

    fn check_weight(weight: f64) -> Result<(), OracleError> {
        if weight.is_nan() || weight < 0.0 {
            return Err(OracleError::NegativeWeight(weight));
        }
        Ok(())
    }

    /// Records `weight` observations of the atom. A zero weight is a no-op, including for
    /// unregistered objects.
    pub fn observe_atomic(&mut self, atom: &Atom, weight: f64) -> Result<(), OracleError> {
        Self::check_weight(weight)?;
        if weight == 0.0 {
            return Ok(());
        }
        let key = atom.key();
        let i = self.register(&key, &atom.object);
        self.add_basic(&key, i, weight);
        self.propagate_downstream(&key, &atom.object, weight);
        Ok(())
    }

    /// Evidence that the atom is false: `weight` spread uniformly over the fact's other
    /// registered objects.
    pub fn observe_false(&mut self, atom: &Atom, weight: f64) -> Result<(), OracleError> {
        Self::check_weight(weight)?;
        if weight == 0.0 {
            return Ok(());
        }
        let key = atom.key();
        self.register(&key, &atom.object);
        let others: Vec<EntityId> = self.counts.basic[&key]
            .support
            .iter()
            .filter(|o| **o != atom.object)
            .cloned()
            .collect();
        if others.is_empty() {
            return Ok(());
        }
        let share = weight / others.len() as f64;
        for o in others {
            let i = self.register(&key, &o);
            self.add_basic(&key, i, share);
            self.propagate_downstream(&key, &o, share);
        }
        Ok(())
    }

    /// Treats the atom as a new observation with the given positive weight.
    pub fn apply_edit(&mut self, atom: &Atom, weight: f64) -> Result<(), OracleError> {
        if weight.is_nan() || weight <= 0.0 {
            return Err(OracleError::NonPositiveWeight(weight));
        }
        self.observe_atomic(atom, weight)
    }

    // ---- posteriors ----

    /// Posterior predictive `(α + counts) / Σ(α + counts)` over the fact's registered objects.
    pub fn posterior_basic(&self, key: &FactKey) -> Result<Categorical, OracleError> {
        let row = self
            .counts
            .basic
            .get(key)
            .ok_or_else(|| OracleError::UnknownFactKey(key.clone()))?;
        let k = row.support.len();
        Ok(Categorical::new(row.support.iter().enumerate().map(
            |(i, o)| {
                (
                    o.clone(),
                    predictive(self.counts.prior_alpha, &row.counts, k, i),
                )
            },
        )))
    }

    /// Posterior predictive of a conditional table over the downstream relation's support.
    pub fn posterior_conditional(&self, key: &CondKey) -> Categorical {
        let support = self.cond_support(&key.downstream);
        let counts = self.cond_counts(key).unwrap_or(&[]);
        let k = support.len();
        Categorical::new(
            support
                .iter()
                .enumerate()
                .map(|(i, o)| (o.clone(), predictive(self.counts.prior_alpha, counts, k, i))),
        )
    }

    /// `Σ_{o_u} p(o_d | r_d, r_u, o_u) · p(o_u | s, r_u)`.
    ///
    /// Falls back to [`OracleState::posterior_basic`] (flagged) when the relation has no
    /// upstream pair or the subject has no registered upstream fact.
    pub fn posterior_downstream(&self, key: &FactKey) -> Result<Marginal, OracleError> {
        let fallback = || -> Result<Marginal, OracleError> {
            Ok(Marginal {
                dist: self.posterior_basic(key)?,
                fell_back: true,
            })
        };
        let Some(up) = self.deps.upstream_of(&key.relation) else {
            return fallback();
        };
        let up_key = FactKey::new(key.subject.clone(), up.clone());
        if !self.is_registered(&up_key) || self.cond_support(&key.relation).is_empty() {
            return fallback();
        }
        let up_post = self.posterior_basic(&up_key)?;
        let support = self.cond_support(&key.relation);
        let k = support.len();
        let alpha = self.counts.prior_alpha;
        let mut mix = vec![0.0; k];
        for (o_u, p_u) in up_post.entries() {
            let ck = CondKey {
                downstream: key.relation.clone(),
                upstream: up.clone(),
                upstream_object: o_u.clone(),
            };
            let counts = self.cond_counts(&ck).unwrap_or(&[]);
            for (i, m) in mix.iter_mut().enumerate() {
                *m += p_u * predictive(alpha, counts, k, i);
            }
        }
        Ok(Marginal {
            dist: Categorical::new(support.iter().cloned().zip(mix)),
            fell_back: false,
        })
    }

    /// The posterior used for answers: marginalized for downstream facts, basic otherwise.
    pub fn posterior(&self, key: &FactKey) -> Result<Categorical, OracleError> {
        if self.deps.is_downstream(&key.relation) {
            Ok(self.posterior_downstream(key)?.dist)
        } else {
            self.posterior_basic(key)
        }
    }

    pub fn atom_probability(&self, atom: &Atom) -> Result<f64, OracleError> {
        Ok(self.posterior(&atom.key())?.prob(&atom.object))
    }

    /// Probability that a claim holds, treating atoms about different facts as independent.
    pub fn claim_probability(&self, claim: &Claim) -> Result<f64, OracleError> {
        let pair = |a: &Atom, b: &Atom| -> Result<(f64, f64), OracleError> {
            if a.key() == b.key() {
                return Err(OracleError::DependenceUnsupported(a.key()));
            }
            Ok((self.atom_probability(a)?, self.atom_probability(b)?))
        };
        Ok(match claim {
            Claim::Atom(a) => self.atom_probability(a)?,
            Claim::Not(a) => 1.0 - self.atom_probability(a)?,
            Claim::And(a, b) => {
                let (pa, pb) = pair(a, b)?;
                pa * pb
            }
            Claim::Or(a, b) => {
                let (pa, pb) = pair(a, b)?;
                pa + pb - pa * pb
            }
        })
    }

    /// Probability that the sentence, as labeled, is true.
    pub fn truth_probability(&self, sentence: &Sentence) -> Result<f64, OracleError> {
        match sentence {
            Sentence::Atomic(a) => self.atom_probability(a),
            Sentence::Truth { claim, label } => {
                let p = self.claim_probability(claim)?;
                Ok(if *label { p } else { 1.0 - p })
            }
        }
    }

    /// Smallest integer weight `w` with `(α + c + w) / (Σα + N + w) ≥ threshold` for the atom's
    /// object, counting it as a new support object if unregistered. Zero when the current
    /// posterior already meets the threshold.
    pub fn min_weight_for(&self, atom: &Atom, threshold: f64) -> Result<u64, OracleError> {
        if threshold.is_nan() || threshold >= 1.0 {
            return Err(OracleError::InvalidThreshold(threshold));
        }
        let alpha = self.counts.prior_alpha;
        let (k, n, c) = match self.counts.basic.get(&atom.key()) {
            Some(row) => match row.index(&atom.object) {
                Some(i) => (row.support.len(), row.total(), row.counts[i]),
                None => (row.support.len() + 1, row.total(), 0.0),
            },
            None => (1, 0.0, 0.0),
        };
        let denom = alpha * k as f64 + n;
        let at = |w: f64| (alpha + c + w) / (denom + w);
        if at(0.0) >= threshold {
            return Ok(0);
        }
        let closed = ((threshold * denom - alpha - c) / (1.0 - threshold))
            .ceil()
            .max(0.0);
        let mut w = closed as u64;
        while at(w as f64) < threshold {
            w += 1;
        }
        while w > 0 && at((w - 1) as f64) >= threshold {
            w -= 1;
        }
        Ok(w)
    }

    // ---- snapshots ----

    pub fn snapshot(&mut self) -> SnapshotToken {
        let id = self.next_snapshot;
        self.next_snapshot += 1;
        self.snapshots.push((id, self.journal.len()));
        SnapshotToken { id }
    }

    /// Rolls counts back to the snapshot. Snapshots taken after it become stale.
    pub fn restore(&mut self, token: SnapshotToken) -> Result<(), OracleError> {
        let pos = self
            .snapshots
            .iter()
            .position(|(id, _)| *id == token.id)
            .ok_or(OracleError::StaleSnapshot)?;
        let mark = self.snapshots[pos].1;
        self.snapshots.truncate(pos);
        while self.journal.len() > mark {
            let u = self.journal.pop().expect("len > mark");
            self.undo(u);
        }
        if self.snapshots.is_empty() {
            self.journal.clear();
        }
        Ok(())
    }

    fn undo(&mut self, u: Undo) {
        let c = &mut self.counts;
        match u {
            Undo::NewBasicKey(k) => {
                c.basic.remove(&k);
            }
            Undo::BasicSupportPush(k) => {
                let row = c.basic.get_mut(&k).expect("journal order");
                row.support.pop();
                row.counts.pop();
            }
            Undo::BasicCount(k, i, old) => {
                c.basic.get_mut(&k).expect("journal order").counts[i] = old
            }
            Undo::CondSupportPush(r) => {
                let o = c.cond_support.get_mut(&r).expect("journal order").pop();
                if let Some(o) = o {
                    c.cond_index.get_mut(&r).expect("journal order").remove(&o);
                }
            }
            Undo::NewCondRow(k) => {
                c.cond.remove(&k);
            }
            Undo::CondRowLen(k, len) => c.cond.get_mut(&k).expect("journal order").truncate(len),
            Undo::CondCount(k, i, old) => c.cond.get_mut(&k).expect("journal order")[i] = old,
        }
    }

    /// SHA-256 over every registered support and the bit patterns of every count.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.counts.prior_alpha.to_bits().to_le_bytes());
        for (k, row) in &self.counts.basic {
            h.update(k.subject.as_str());
            h.update([0]);
            h.update(k.relation.as_str());
            h.update([0]);
            for (o, c) in row.support.iter().zip(&row.counts) {
                h.update(o.as_str());
                h.update(c.to_bits().to_le_bytes());
            }
            h.update([1]);
        }
        for (r, support) in &self.counts.cond_support {
            h.update(r.as_str());
            for o in support {
                h.update(o.as_str());
                h.update([0]);
            }
            h.update([1]);
        }
        for (k, row) in &self.counts.cond {
            h.update(k.downstream.as_str());
            h.update(k.upstream.as_str());
            h.update(k.upstream_object.as_str());
            for c in row {
                h.update(c.to_bits().to_le_bytes());
            }
            h.update([1]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Trained subjects, sorted.
    pub fn subjects(&self) -> Vec<EntityId> {
        let mut out: Vec<EntityId> = self
            .counts
            .basic
            .keys()
            .map(|k| k.subject.clone())
            .collect();
        out.dedup();
        out
    }

    pub(crate) fn counts(&self) -> &CountTable {
        &self.counts
    }

    pub(crate) fn from_parts(
        deps: DependencyMap,
        prior_alpha: f64,
        basic: BTreeMap<FactKey, Row>,
        cond_support: BTreeMap<RelationId, Vec<EntityId>>,
        cond: BTreeMap<CondKey, Vec<f64>>,
    ) -> Self {
        let cond_index = cond_support
            .iter()
            .map(|(r, s)| {
                (
                    r.clone(),
                    s.iter().enumerate().map(|(i, o)| (o.clone(), i)).collect(),
                )
            })
            .collect();
        Self {
            counts: CountTable {
                basic,
                cond_support,
                cond_index,
                cond,
                prior_alpha,
            },
            deps,
            journal: Vec::new(),
            snapshots: Vec::new(),
            next_snapshot: 0,
        }
    }
}

impl CountTable {
    pub(crate) fn basic(&self) -> &BTreeMap<FactKey, Row> {
        &self.basic
    }

    pub(crate) fn cond_support_map(&self) -> &BTreeMap<RelationId, Vec<EntityId>> {
        &self.cond_support
    }

    pub(crate) fn cond(&self) -> &BTreeMap<CondKey, Vec<f64>> {
        &self.cond
    }
}

#[cfg(test)]
mod tests;
