use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;

use super::dataset::{PropertyDataset, TaskSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpisodeError {
    #[error("no {phase:?} property has {k} positives and {k} negatives (best: property {property} with {positives}+/{negatives}-)")]
    InsufficientLabels { phase: Phase, property: usize, positives: usize, negatives: usize, k: usize },
    #[error("K must be positive")]
    ZeroShot,
    #[error("query set would be empty")]
    EmptyQuery,
    #[error("episode has no auxiliary properties")]
    NoAuxiliary,
}

/// One 2-way K-shot task: the support holds K positives then K negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub target: usize,
    pub auxiliary: Vec<usize>,
    pub support: Vec<usize>,
    pub query: Vec<usize>,
}

impl Episode {
    pub fn support_labels(&self, ds: &PropertyDataset) -> Vec<bool> {
        self.support.iter().map(|&m| ds.label(m, self.target).expect("support is labeled")).collect()
    }

    pub fn query_labels(&self, ds: &PropertyDataset) -> Vec<bool> {
        self.query.iter().map(|&m| ds.label(m, self.target).expect("query is labeled")).collect()
    }
}

/// Auxiliary properties are always drawn from the training properties so that
/// test-property labels never enter a context graph during meta-training.
pub fn auxiliary_properties(split: &TaskSplit, target: usize) -> Vec<usize> {
    split.train().iter().copied().filter(|&p| p != target).collect()
}

/// Samples an episode for a uniformly chosen eligible property of `phase`
/// (one with at least `k` labels of each class).
pub fn sample_episode<R: Rng + ?Sized>(
    ds: &PropertyDataset,
    split: &TaskSplit,
    phase: Phase,
    k: usize,
    query_size: usize,
    rng: &mut R,
) -> Result<Episode, EpisodeError> {
    if k == 0 {
        return Err(EpisodeError::ZeroShot);
    }
    let candidates = match phase {
        Phase::Train => split.train(),
        Phase::Test => split.test(),
    };
    let mut eligible = Vec::new();
    let mut best = (candidates[0], 0, 0);
    for &p in candidates {
        let (pos, neg) = (ds.labeled(p, true).len(), ds.labeled(p, false).len());
        if pos >= k && neg >= k {
            eligible.push(p);
        } else if pos.min(neg) > best.1.min(best.2) {
            best = (p, pos, neg);
        }
    }
    if eligible.is_empty() {
        let (property, positives, negatives) = best;
        return Err(EpisodeError::InsufficientLabels { phase, property, positives, negatives, k });
    }
    let target = eligible[rng.random_range(0..eligible.len())];
    sample_episode_for(ds, split, target, k, query_size, rng)
}

/// Samples an episode for a fixed target property.
pub fn sample_episode_for<R: Rng + ?Sized>(
    ds: &PropertyDataset,
    split: &TaskSplit,
    target: usize,
    k: usize,
    query_size: usize,
    rng: &mut R,
) -> Result<Episode, EpisodeError> {
    let positives = ds.labeled(target, true);
    let negatives = ds.labeled(target, false);
    if k == 0 {
        return Err(EpisodeError::ZeroShot);
    }
    if positives.len() < k || negatives.len() < k {
        let phase = if split.train().contains(&target) { Phase::Train } else { Phase::Test };
        return Err(EpisodeError::InsufficientLabels {
            phase,
            property: target,
            positives: positives.len(),
            negatives: negatives.len(),
            k,
        });
    }
    let auxiliary = auxiliary_properties(split, target);
    if auxiliary.is_empty() {
        return Err(EpisodeError::NoAuxiliary);
    }
    let (sup_pos, rest_pos) = split_sample(&positives, k, rng);
    let (sup_neg, rest_neg) = split_sample(&negatives, k, rng);

    // balanced when possible, topped up from whichever class has spares
    let mut want_pos = (query_size / 2).min(rest_pos.len());
    let want_neg = (query_size - want_pos).min(rest_neg.len());
    want_pos = (query_size - want_neg).min(rest_pos.len());
    let (q_pos, _) = split_sample(&rest_pos, want_pos, rng);
    let (q_neg, _) = split_sample(&rest_neg, want_neg, rng);
    let query: Vec<usize> = q_pos.into_iter().chain(q_neg).collect();
    if query.is_empty() {
        return Err(EpisodeError::EmptyQuery);
    }
    Ok(Episode { target, auxiliary, support: sup_pos.into_iter().chain(sup_neg).collect(), query })
}

/// Picks `n` items uniformly without replacement; returns (picked, rest),
/// both in source order.
fn split_sample<R: Rng + ?Sized>(items: &[usize], n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut chosen = alloc::vec![false; items.len()];
    for i in sample(rng, items.len(), n).into_iter() {
        chosen[i] = true;
    }
    let mut picked = Vec::with_capacity(n);
    let mut rest = Vec::with_capacity(items.len() - n);
    for (i, &m) in items.iter().enumerate() {
        if chosen[i] {
            picked.push(m);
        } else {
            rest.push(m);
        }
    }
    (picked, rest)
}
