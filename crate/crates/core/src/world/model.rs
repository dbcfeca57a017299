use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::WorldError;
use crate::ids::{CondKey, EntityId, FactKey, RelationId};
use crate::seeding::derive_rng;
use crate::world::deps::DependencyMap;
use crate::world::graph::KnowledgeGraph;

pub const DEFAULT_FLOOR: f64 = 0.6;

/// Ground-truth generative model of the world.
///
/// Facts whose subject holds the paired upstream relation are *conditioned*: their objects are
/// drawn from the shared conditional table for the subject's upstream object. Every other fact
/// draws from a two-object base distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub graph: KnowledgeGraph,
    pub deps: DependencyMap,
    pub floor: f64,
    #[serde(with = "crate::ids::pairs")]
    pub base_dist: BTreeMap<FactKey, Categorical>,
    #[serde(with = "crate::ids::pairs")]
    pub cond_dist: BTreeMap<CondKey, Categorical>,
    /// Conditioned facts and the table they draw from.
    #[serde(with = "crate::ids::pairs")]
    pub conditioned: BTreeMap<FactKey, CondKey>,
    #[serde(with = "crate::ids::pairs")]
    kg_objects: BTreeMap<FactKey, EntityId>,
    relation_objects: BTreeMap<RelationId, Vec<EntityId>>,
}

/// Raises the modal probability to at least `floor`, scaling the other mass proportionally.
pub fn enforce_floor(dist: &Categorical, floor: f64) -> Categorical {
    let Some(mode) = dist.mode().cloned() else {
        return dist.clone();
    };
    let pm = dist.prob(&mode);
    if pm >= floor {
        return dist.clone();
    }
    let scale = (1.0 - floor) / (1.0 - pm);
    Categorical::new(
        dist.entries()
            .iter()
            .map(|(o, p)| (o.clone(), if *o == mode { floor } else { p * scale })),
    )
}

impl WorldModel {
    pub fn fact_keys(&self) -> impl Iterator<Item = &FactKey> {
        self.kg_objects.keys()
    }

    pub fn n_facts(&self) -> usize {
        self.kg_objects.len()
    }

    pub fn contains(&self, key: &FactKey) -> bool {
        self.kg_objects.contains_key(key)
    }

    /// Facts grouped by subject, relations in id order.
    pub fn facts_by_subject(&self) -> BTreeMap<EntityId, Vec<FactKey>> {
        let mut out: BTreeMap<EntityId, Vec<FactKey>> = BTreeMap::new();
        for k in self.kg_objects.keys() {
            out.entry(k.subject.clone()).or_default().push(k.clone());
        }
        out
    }

    /// The object recorded in the knowledge graph.
    pub fn kg_object(&self, key: &FactKey) -> Result<&EntityId, WorldError> {
        self.kg_objects
            .get(key)
            .ok_or_else(|| WorldError::UnknownFact(key.clone()))
    }

    /// The distribution a fact's corpus samples are drawn from.
    pub fn fact_distribution(&self, key: &FactKey) -> Result<&Categorical, WorldError> {
        if let Some(ck) = self.conditioned.get(key) {
            return Ok(&self.cond_dist[ck]);
        }
        self.base_dist
            .get(key)
            .ok_or_else(|| WorldError::UnknownFact(key.clone()))
    }

    /// Modal object of the fact's distribution; what a perfect memorizer of the corpus answers.
    pub fn ground_truth(&self, key: &FactKey) -> Result<&EntityId, WorldError> {
        Ok(self
            .fact_distribution(key)?
            .mode()
            .expect("world distributions are nonempty"))
    }

    pub fn is_conditioned(&self, key: &FactKey) -> bool {
        self.conditioned.contains_key(key)
    }

    pub fn conditioned_fraction(&self) -> f64 {
        if self.kg_objects.is_empty() {
            return 0.0;
        }
        self.conditioned.len() as f64 / self.kg_objects.len() as f64
    }

    /// Every object observed for a relation, sorted.
    pub fn relation_objects(&self, r: &RelationId) -> &[EntityId] {
        self.relation_objects.get(r).map_or(&[], Vec::as_slice)
    }

    /// A wrong object for the fact: drawn from the fact's support if it has one, else from the
    /// relation's pool.
    pub fn false_object<R: Rng + ?Sized>(
        &self,
        key: &FactKey,
        rng: &mut R,
    ) -> Result<EntityId, WorldError> {
        let gt = self.ground_truth(key)?;
        let in_support: Vec<&EntityId> = self
            .fact_distribution(key)?
            .entries()
            .iter()
            .filter(|(o, p)| o != gt && *p > 0.0)
            .map(|(o, _)| o)
            .collect();
        let pool: Vec<&EntityId> = if in_support.is_empty() {
            self.relation_objects(&key.relation)
                .iter()
                .filter(|o| *o != gt)
                .collect()
        } else {
            in_support
        };
        if pool.is_empty() {
            return Err(WorldError::NoDistractor(key.relation.clone()));
        }
        Ok(pool[rng.random_range(0..pool.len())].clone())
    }

    /// Whether an atom agrees with the world's ground truth.
    pub fn is_true(&self, key: &FactKey, object: &EntityId) -> Result<bool, WorldError> {
        Ok(self.ground_truth(key)? == object)
    }
}

/// Builds the ground-truth distributions for every fact.
///
/// Base facts get support `{kg object, distractor}` with the kg object at probability drawn
/// uniformly from `[floor, 1]`; the distractor is drawn uniformly from the relation's other
/// objects. Both draws use a stream keyed by `(seed, subject, relation)`.
pub fn build_generative_model(
    graph: &KnowledgeGraph,
    deps: &DependencyMap,
    floor: f64,
    seed: u64,
) -> Result<WorldModel, WorldError> {
    if !(floor > 0.5 && floor <= 1.0) {
        return Err(WorldError::InvalidFloor(floor));
    }
    let relations = graph.relations();
    for (u, d) in deps.pairs() {
        for r in [u, d] {
            if !relations.contains(r) {
                return Err(WorldError::UnknownRelation(r.clone()));
            }
        }
    }

    let mut kg_objects = BTreeMap::new();
    let mut relation_objects: BTreeMap<RelationId, Vec<EntityId>> = BTreeMap::new();
    for t in graph.triples() {
        if kg_objects.insert(t.key(), t.object.clone()).is_some() {
            return Err(WorldError::InvalidParameter(format!(
                "fact {} has several objects; enforce one-to-one first",
                t.key()
            )));
        }
        relation_objects
            .entry(t.relation.clone())
            .or_default()
            .push(t.object.clone());
    }
    for objs in relation_objects.values_mut() {
        objs.sort();
        objs.dedup();
    }

    // empirical downstream counts per (r_d, r_u, o_u)
    let mut conditioned = BTreeMap::new();
    let mut cond_counts: BTreeMap<CondKey, BTreeMap<EntityId, f64>> = BTreeMap::new();
    for (key, object) in &kg_objects {
        let Some(up) = deps.upstream_of(&key.relation) else {
            continue;
        };
        let up_key = FactKey::new(key.subject.clone(), up.clone());
        if let Some(up_obj) = kg_objects.get(&up_key) {
            let ck = CondKey {
                downstream: key.relation.clone(),
                upstream: up.clone(),
                upstream_object: up_obj.clone(),
            };
            *cond_counts
                .entry(ck.clone())
                .or_default()
                .entry(object.clone())
                .or_insert(0.0) += 1.0;
            conditioned.insert(key.clone(), ck);
        }
    }
    let cond_dist: BTreeMap<CondKey, Categorical> = cond_counts
        .into_iter()
        .map(|(k, counts)| (k, enforce_floor(&Categorical::from_weights(counts), floor)))
        .collect();

    let mut base_dist = BTreeMap::new();
    for (key, object) in &kg_objects {
        if conditioned.contains_key(key) {
            continue;
        }
        let others: Vec<&EntityId> = relation_objects[&key.relation]
            .iter()
            .filter(|o| *o != object)
            .collect();
        if others.is_empty() {
            return Err(WorldError::NoDistractor(key.relation.clone()));
        }
        let mut rng = derive_rng(
            seed,
            &["distractor", key.subject.as_str(), key.relation.as_str()],
        );
        let distractor = others[rng.random_range(0..others.len())].clone();
        let p_true = floor + (1.0 - floor) * rng.random::<f64>();
        base_dist.insert(
            key.clone(),
            Categorical::new([(object.clone(), p_true), (distractor, 1.0 - p_true)]),
        );
    }

    Ok(WorldModel {
        graph: graph.clone(),
        deps: deps.clone(),
        floor,
        base_dist,
        cond_dist,
        conditioned,
        kg_objects,
        relation_objects,
    })
}
