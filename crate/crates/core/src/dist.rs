use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ids::EntityId;

/// Tolerance used when comparing probabilities for argmax ties.
pub const TIE_EPS: f64 = 1e-12;

/// A finite categorical distribution over entities, kept sorted by entity id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    entries: Vec<(EntityId, f64)>,
}

impl Categorical {
    /// Builds a distribution from (possibly unsorted) entries. Duplicate ids are summed.
    pub fn new(entries: impl IntoIterator<Item = (EntityId, f64)>) -> Self {
        let mut entries: Vec<(EntityId, f64)> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        Self { entries }
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(entries: impl IntoIterator<Item = (EntityId, f64)>) -> Self {
        let mut d = Self::new(entries);
        let total: f64 = d.entries.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            for (_, w) in &mut d.entries {
                *w /= total;
            }
        }
        d
    }

    pub fn point(object: EntityId) -> Self {
        Self {
            entries: vec![(object, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(EntityId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = &EntityId> {
        self.entries.iter().map(|(o, _)| o)
    }

    pub fn prob(&self, object: &EntityId) -> f64 {
        self.entries
            .binary_search_by(|(o, _)| o.cmp(object))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// The most probable object; ties go to the smallest id.
    pub fn mode(&self) -> Option<&EntityId> {
        let max = self.max_prob()?;
        self.entries
            .iter()
            .find(|(_, p)| *p >= max - TIE_EPS)
            .map(|(o, _)| o)
    }

    pub fn max_prob(&self) -> Option<f64> {
        self.entries.iter().map(|(_, p)| *p).reduce(f64::max)
    }

    /// All objects tied (within [`TIE_EPS`]) for the maximum probability.
    pub fn argmax_set(&self) -> Vec<EntityId> {
        let Some(max) = self.max_prob() else {
            return Vec::new();
        };
        self.entries
            .iter()
            .filter(|(_, p)| *p >= max - TIE_EPS)
            .map(|(o, _)| o.clone())
            .collect()
    }

    /// Draws one object by inverse-CDF over the sorted entries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &EntityId {
        let u: f64 = rng.random::<f64>() * self.total();
        let mut acc = 0.0;
        for (o, p) in &self.entries {
            acc += p;
            if u < acc {
                return o;
            }
        }
        // u landed on the rounding slack above the last cumulative sum
        &self
            .entries
            .iter()
            .rev()
            .find(|(_, p)| *p > 0.0)
            .unwrap_or(&self.entries[self.entries.len() - 1])
            .0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(s: &str) -> EntityId {
        EntityId::from(s)
    }

    #[test]
    fn degenerate_distribution_always_samples_its_object() {
        let d = Categorical::point(e("only"));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(d.sample(&mut rng), &e("only"));
        }
    }

    #[test]
    fn mode_breaks_ties_by_id() {
        let d = Categorical::new([(e("b"), 0.5), (e("a"), 0.5)]);
        assert_eq!(d.mode(), Some(&e("a")));
        assert_eq!(d.argmax_set(), vec![e("a"), e("b")]);
    }

    #[test]
    fn duplicate_entries_are_merged() {
        let d = Categorical::from_weights([(e("a"), 1.0), (e("b"), 2.0), (e("a"), 1.0)]);
        assert_eq!(d.len(), 2);
        assert!((d.prob(&e("a")) - 0.5).abs() < 1e-15);
    }
}
