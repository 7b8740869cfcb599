//! Particle beliefs over candidate worlds.
//!
//! A belief is a finite distribution over indices into a fixed list of
//! candidate initial worlds. Weights are exact rationals: a belief starts
//! as a size-`k` multiset of world indices (weights are multiples of
//! `1/k`), and updates only ever discard particles and renormalize, so
//! denominators stay tiny and comparisons are exact.

use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::grid::{observe, Observation, WorldState};

/// Exact particle weight.
pub type Weight = Ratio<u64>;

/// Number of belief particles drawn in the default belief prior.
pub const DEFAULT_PARTICLE_COUNT: u32 = 3;

/// A normalized distribution over candidate-world indices. Particles are
/// sorted by index, strictly positive, and sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Belief {
    particles: Vec<(usize, Weight)>,
}

impl Belief {
    /// A belief from world indices with weights, normalizing the total.
    /// Duplicate indices are merged; zero weights are dropped.
    pub fn from_weights(weights: impl IntoIterator<Item = (usize, Weight)>) -> Result<Belief> {
        let mut particles: Vec<(usize, Weight)> = Vec::new();
        for (idx, w) in weights {
            if w.is_zero() {
                continue;
            }
            particles.push((idx, w));
        }
        particles.sort_by_key(|&(idx, _)| idx);
        particles.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        if particles.is_empty() {
            return Err(Error::BeliefAnnihilated);
        }
        let total: Weight = particles.iter().map(|&(_, w)| w).sum();
        for (_, w) in &mut particles {
            *w /= total;
        }
        Ok(Belief { particles })
    }

    /// The belief putting all mass on one world.
    pub fn singleton(index: usize) -> Belief {
        Belief {
            particles: vec![(index, Weight::new(1, 1))],
        }
    }

    /// A belief from a multiset of world indices: weight = count / total.
    pub fn from_counts(counts: &[(usize, u32)]) -> Result<Belief> {
        Belief::from_weights(
            counts
                .iter()
                .filter(|&&(_, n)| n > 0)
                .map(|&(idx, n)| (idx, Weight::new(n as u64, 1))),
        )
    }

    /// The particles as `(world index, weight)`, sorted by index.
    pub fn particles(&self) -> &[(usize, Weight)] {
        &self.particles
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.particles.iter().map(|&(idx, _)| idx)
    }

    pub fn support_size(&self) -> usize {
        self.particles.len()
    }

    /// The weight on `index` (zero if outside the support).
    pub fn weight_of(&self, index: usize) -> Weight {
        self.particles
            .iter()
            .find(|&&(idx, _)| idx == index)
            .map(|&(_, w)| w)
            .unwrap_or_else(Weight::zero)
    }

    /// Keeps only particles whose index satisfies `keep`, renormalizing.
    /// Errors if nothing survives.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Result<Belief> {
        let kept: Vec<(usize, Weight)> = self
            .particles
            .iter()
            .copied()
            .filter(|&(idx, _)| keep(idx))
            .collect();
        if kept.is_empty() {
            return Err(Error::BeliefAnnihilated);
        }
        let total: Weight = kept.iter().map(|&(_, w)| w).sum();
        Ok(Belief {
            particles: kept.into_iter().map(|(idx, w)| (idx, w / total)).collect(),
        })
    }

    /// Total weight on indices satisfying `pred` (an exact rational).
    pub fn mass_where(&self, pred: impl Fn(usize) -> bool) -> Weight {
        self.particles
            .iter()
            .filter(|&&(idx, _)| pred(idx))
            .map(|&(_, w)| w)
            .sum()
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (idx, w)) in self.particles.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{idx}: {w}")?;
        }
        f.write_str("}")
    }
}

/// Converts an exact weight to `f64`.
pub fn weight_to_f64(w: Weight) -> f64 {
    w.to_f64().expect("small rational fits in f64")
}

/// Every belief obtainable by drawing `particle_count` world indices with
/// replacement from `0..n_worlds`, i.e. all size-`particle_count` multisets.
/// There are `C(n_worlds + particle_count - 1, particle_count)` of them.
/// Ordered lexicographically by the count vector over world indices.
pub fn enumerate_belief_prior(n_worlds: usize, particle_count: u32) -> Vec<Belief> {
    assert!(n_worlds > 0, "need at least one candidate world");
    let mut beliefs = Vec::new();
    let mut counts = vec![0u32; n_worlds];
    fill_counts(&mut counts, 0, particle_count, &mut beliefs);
    beliefs
}

fn fill_counts(counts: &mut Vec<u32>, from: usize, remaining: u32, out: &mut Vec<Belief>) {
    if from == counts.len() - 1 {
        counts[from] = remaining;
        let weighted: Vec<(usize, u32)> = counts
            .iter()
            .enumerate()
            .map(|(idx, &n)| (idx, n))
            .collect();
        out.push(Belief::from_counts(&weighted).expect("nonzero multiset"));
        counts[from] = 0;
        return;
    }
    // Lexicographically largest count first would reverse the order; count
    // vectors ascend when the first coordinate grows last, so iterate 0..=.
    for n in 0..=remaining {
        counts[from] = n;
        fill_counts(counts, from + 1, remaining - n, out);
        counts[from] = 0;
    }
}

/// Bayes-updates a belief on an observation: each particle's candidate
/// world has evolved to `worlds[index]`; particles whose world looks
/// different from `obs` are discarded and the rest renormalized.
pub fn update(belief: &Belief, worlds: &[WorldState], obs: &Observation) -> Result<Belief> {
    belief.filter(|idx| observe(&worlds[idx]) == *obs)
}

/// Did the belief change between steps? Exact comparison of supports and
/// rational weights.
pub fn belief_changed(before: &Belief, after: &Belief) -> bool {
    before != after
}
