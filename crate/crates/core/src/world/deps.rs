//! Upstream → downstream relation pairing.
//!
//! The co-occurrence matrix `M[u][d]` holds the fraction of subjects carrying `d` that also
//! carry `u`, scaled to doubly-stochastic form. Pairs are then chosen as the maximum-weight
//! set of disjoint directed pairs, solved exactly by dynamic programming over relation subsets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::WorldError;
use crate::ids::RelationId;
use crate::world::graph::KnowledgeGraph;

pub const SINKHORN_MAX_ROUNDS: usize = 100;
pub const SINKHORN_TOL: f64 = 1e-8;

/// Largest relation count the exact pairing solver accepts.
pub const MAX_PAIRING_RELATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DependencyMap {
    pairs: Vec<(RelationId, RelationId)>,
}

impl DependencyMap {
    /// Builds a map from `(upstream, downstream)` pairs; rejects a relation used twice.
    pub fn new(pairs: Vec<(RelationId, RelationId)>) -> Result<Self, WorldError> {
        let mut seen = std::collections::BTreeSet::new();
        for (u, d) in &pairs {
            if u == d || !seen.insert(u.clone()) || !seen.insert(d.clone()) {
                return Err(WorldError::InvalidParameter(format!(
                    "dependency pairs must be disjoint; {u} -> {d} reuses a relation"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(RelationId, RelationId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn upstream_of(&self, downstream: &RelationId) -> Option<&RelationId> {
        self.pairs
            .iter()
            .find(|(_, d)| d == downstream)
            .map(|(u, _)| u)
    }

    pub fn downstream_of(&self, upstream: &RelationId) -> Option<&RelationId> {
        self.pairs
            .iter()
            .find(|(u, _)| u == upstream)
            .map(|(_, d)| d)
    }

    pub fn is_downstream(&self, r: &RelationId) -> bool {
        self.upstream_of(r).is_some()
    }
}

/// Square matrix indexed by a sorted relation list.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMatrix {
    pub relations: Vec<RelationId>,
    pub values: Vec<Vec<f64>>,
}

impl RelationMatrix {
    pub fn is_all_zero(&self) -> bool {
        self.values.iter().flatten().all(|v| *v == 0.0)
    }
}

/// `M[u][d] = |subjects with u and d| / |subjects with d|`, zero diagonal.
pub fn cooccurrence_rates(graph: &KnowledgeGraph) -> RelationMatrix {
    let relations = graph.relations();
    let by_rel = graph.subjects_by_relation();
    let counts = graph.cooccurrence_counts();
    let n = relations.len();
    let mut values = vec![vec![0.0; n]; n];
    for (i, u) in relations.iter().enumerate() {
        for (j, d) in relations.iter().enumerate() {
            if i == j {
                continue;
            }
            let both = counts.get(&(u.clone(), d.clone())).copied().unwrap_or(0);
            let carriers = by_rel.get(d).map_or(0, |s| s.len());
            if carriers > 0 {
                values[i][j] = both as f64 / carriers as f64;
            }
        }
    }
    RelationMatrix { relations, values }
}

/// Iterative proportional fitting toward unit row and column sums.
///
/// All-zero rows and columns are left at zero. Stops after `max_rounds` or once every
/// nonzero row and column sums to 1 within `tol`.
pub fn sinkhorn(values: &mut [Vec<f64>], max_rounds: usize, tol: f64) -> usize {
    let n = values.len();
    for round in 1..=max_rounds {
        for row in values.iter_mut() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        for j in 0..n {
            let s: f64 = values.iter().map(|row| row[j]).sum();
            if s > 0.0 {
                values.iter_mut().for_each(|row| row[j] /= s);
            }
        }
        let worst_row = values
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .filter(|s| *s > 0.0)
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max);
        if worst_row < tol {
            return round;
        }
    }
    max_rounds
}

/// Doubly-stochastic co-occurrence matrix for a graph.
pub fn normalized_cooccurrence(graph: &KnowledgeGraph) -> RelationMatrix {
    let mut m = cooccurrence_rates(graph);
    sinkhorn(&mut m.values, SINKHORN_MAX_ROUNDS, SINKHORN_TOL);
    m
}

fn pair_weight(w: &[Vec<f64>], i: usize, j: usize) -> f64 {
    w[i][j].max(w[j][i])
}

/// Maximum-weight set of disjoint directed pairs `(upstream, downstream)` over indices of `w`.
///
/// A pair `{i, j}` is worth `max(w[i][j], w[j][i])` and oriented along the larger entry; equal
/// entries orient from the lower index. Zero-weight pairs are never formed. Among optimal
/// pairings the one found by pairing the lowest free index with its lowest viable partner
/// first is returned, so the answer is unique for sorted relation ids.
pub fn max_weight_pairing(w: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = w.len();
    assert!(
        n <= MAX_PAIRING_RELATIONS,
        "pairing solver supports at most {MAX_PAIRING_RELATIONS} relations"
    );
    let full: usize = (1usize << n) - 1;
    let mut best = vec![0.0f64; 1 << n];
    for mask in 1..=full {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = best[rest];
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let wij = pair_weight(w, i, j);
            if wij > 0.0 {
                b = b.max(wij + best[rest & !(1 << j)]);
            }
        }
        best[mask] = b;
    }

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    let mut pairs = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut chosen = None;
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let wij = pair_weight(w, i, j);
            if wij > 0.0 && close(wij + best[rest & !(1 << j)], best[mask]) {
                chosen = Some(j);
                break;
            }
        }
        match chosen {
            Some(j) => {
                let directed = if w[j][i] > w[i][j] { (j, i) } else { (i, j) };
                pairs.push(directed);
                mask = rest & !(1 << j);
            }
            None => mask = rest,
        }
    }
    pairs
}

pub fn pairing_weight(w: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(u, d)| w[u][d]).sum()
}

/// Pairs the graph's relations into upstream → downstream dependencies.
pub fn assign_dependencies(graph: &KnowledgeGraph) -> Result<DependencyMap, WorldError> {
    let m = normalized_cooccurrence(graph);
    if m.relations.len() > MAX_PAIRING_RELATIONS {
        return Err(WorldError::InvalidParameter(format!(
            "{} relations exceed the pairing limit of {MAX_PAIRING_RELATIONS}",
            m.relations.len()
        )));
    }
    if m.is_all_zero() {
        return Err(WorldError::NoCooccurrence);
    }
    let pairs = max_weight_pairing(&m.values)
        .into_iter()
        .map(|(u, d)| (m.relations[u].clone(), m.relations[d].clone()))
        .collect();
    DependencyMap::new(pairs)
}

/// Named view of a matrix, for reports.
pub fn matrix_by_name(m: &RelationMatrix) -> BTreeMap<(RelationId, RelationId), f64> {
    let mut out = BTreeMap::new();
    for (i, u) in m.relations.iter().enumerate() {
        for (j, d) in m.relations.iter().enumerate() {
            out.insert((u.clone(), d.clone()), m.values[i][j]);
        }
    }
    out
}
