//! Cross-entropy subset selection under a word budget.
//!
//! Each iteration draws `N` length-feasible subsets from the current per-item
//! inclusion policy, keeps the elite samples at or above the `(1 - ρ)`
//! quantile of their scores, re-estimates the policy as the elite inclusion
//! frequency and smooths it against the previous policy. The optional
//! adaptive-length mode also learns the sampling length limit.
//!
//! Every sample owns a ChaCha stream keyed by `(seed, iteration, index)`, so
//! results do not depend on how rayon schedules the work.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentSet, Sentence};
use crate::error::{Error, Result};
use crate::predictors::{CandidateSummary, ObjectiveSpec, PreparedObjective, INFEASIBLE};

/// Initial inclusion probability of every item.
pub const INITIAL_PROBABILITY: f64 = 0.5;

/// In adaptive mode an iteration only counts towards convergence if the
/// length limit moved by less than this many words.
pub const LENGTH_STABILITY_WORDS: f64 = 0.5;

/// Per-item inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy(pub Vec<f64>);

impl SelectionPolicy {
    pub fn uniform(n: usize, p: f64) -> Self {
        Self(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    /// Walk items by descending probability and keep those that fit.
    #[default]
    Greedy,
    /// Draw one more sample from the final policy.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CeParams {
    pub sample_count: usize,
    pub elite_fraction: f64,
    pub smoothing: f64,
    pub max_iterations: usize,
    pub stability_window: usize,
    /// Relative change in γ below which an iteration counts as stable.
    pub stability_epsilon: f64,
    pub seed: u64,
    pub extraction: Extraction,
}

impl Default for CeParams {
    fn default() -> Self {
        Self {
            sample_count: 10_000,
            elite_fraction: 0.01,
            smoothing: 0.7,
            max_iterations: 100,
            stability_window: 5,
            stability_epsilon: 1e-6,
            seed: 0,
            extraction: Extraction::Greedy,
        }
    }
}

impl CeParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::Validation("sample_count must be positive".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "elite_fraction must lie in (0, 1), got {}",
                self.elite_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::Validation(format!("smoothing must lie in [0, 1], got {}", self.smoothing)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Learned sampling length limit for the adaptive variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveLengthState {
    pub initial: f64,
    pub current: f64,
}

impl AdaptiveLengthState {
    pub fn new(initial: f64) -> Self {
        Self {
            initial,
            current: initial,
        }
    }
}

/// A chosen set of items and its total length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Subset {
    /// Ascending item indices.
    pub members: Vec<usize>,
    pub total_words: usize,
}

impl Subset {
    pub fn contains(&self, item: usize) -> bool {
        self.members.binary_search(&item).is_ok()
    }
}

/// Item lengths plus the deterministic tie-break order used by extraction.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    lengths: Vec<usize>,
    /// `tie_rank[i]` is item `i`'s position in tie-break order.
    tie_rank: Vec<usize>,
}

impl SearchSpace {
    /// Items tie-break by index.
    pub fn new(lengths: Vec<usize>) -> Self {
        let tie_rank = (0..lengths.len()).collect();
        Self { lengths, tie_rank }
    }

    /// Sentences tie-break by `(doc_id, char_offset)`.
    pub fn from_sentences(candidates: &[Sentence]) -> Self {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| candidates[a].order_key().cmp(&candidates[b].order_key()));
        let mut tie_rank = vec![0; candidates.len()];
        for (rank, &i) in order.iter().enumerate() {
            tie_rank[i] = rank;
        }
        Self {
            lengths: candidates.iter().map(|s| s.word_count).collect(),
            tie_rank,
        }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    fn subset(&self, mut members: Vec<usize>) -> Subset {
        members.sort_unstable();
        let total_words = members.iter().map(|&i| self.lengths[i]).sum();
        Subset { members, total_words }
    }
}

/// Scores subsets. Implementations are called from several threads at once.
pub trait SubsetObjective: Sync {
    fn score(&self, subset: &Subset) -> Result<f64>;
}

impl<F> SubsetObjective for F
where
    F: Fn(&Subset) -> f64 + Sync,
{
    fn score(&self, subset: &Subset) -> Result<f64> {
        Ok(self(subset))
    }
}

/// The RNG stream of one sample.
pub fn sample_rng(seed: u64, iteration: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(iteration) << 32) | u64::from(index));
    rng
}

/// Visits items in random order, includes each with its policy probability,
/// and skips any item that would overflow `budget`.
pub fn sample_subset<R: Rng + ?Sized>(policy: &SelectionPolicy, space: &SearchSpace, budget: usize, rng: &mut R) -> Subset {
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.shuffle(rng);
    let mut members = Vec::new();
    let mut total = 0;
    for i in order {
        let take = rng.gen::<f64>() < policy.0[i];
        if take && total + space.lengths[i] <= budget {
            total += space.lengths[i];
            members.push(i);
        }
    }
    space.subset(members)
}

/// The score at descending rank `⌈ρN⌉`, counting infeasible scores last.
/// When fewer feasible scores exist than that rank, the lowest feasible score.
pub fn elite_threshold(scores: &[f64], elite_fraction: f64) -> Result<f64> {
    let mut finite: Vec<f64> = scores.iter().copied().filter(|s| *s > INFEASIBLE).collect();
    if finite.is_empty() {
        return Err(Error::Optimization(
            "every sampled summary is infeasible; increase the length budget".into(),
        ));
    }
    finite.sort_by(|a, b| b.total_cmp(a));
    let rank = ((elite_fraction * scores.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(finite[rank.min(finite.len()) - 1])
}

/// Fraction of elite subsets that contain each item.
pub fn update_policy(elite: &[&Subset], n_items: usize) -> SelectionPolicy {
    assert!(!elite.is_empty(), "elite set must be non-empty");
    let mut counts = vec![0usize; n_items];
    for s in elite {
        for &i in &s.members {
            counts[i] += 1;
        }
    }
    let m = elite.len() as f64;
    SelectionPolicy(counts.into_iter().map(|c| c as f64 / m).collect())
}

/// `α·prev + (1-α)·new`, component-wise.
pub fn smooth_policy(prev: &SelectionPolicy, new: &SelectionPolicy, alpha: f64) -> SelectionPolicy {
    assert_eq!(prev.len(), new.len());
    SelectionPolicy(
        prev.0
            .iter()
            .zip(&new.0)
            .map(|(p, n)| alpha * p + (1.0 - alpha) * n)
            .collect(),
    )
}

/// Mean elite length, smoothed against the previous limit.
pub fn update_length(elite_lengths: &[usize], prev: f64, alpha: f64) -> f64 {
    assert!(!elite_lengths.is_empty(), "elite set must be non-empty");
    let mean = elite_lengths.iter().sum::<usize>() as f64 / elite_lengths.len() as f64;
    alpha * prev + (1.0 - alpha) * mean
}

/// Deterministic realization of a policy: items by descending probability
/// (ties by tie-break order); an item is kept when its probability is at
/// least one half and it fits. If nothing qualifies, the most likely fitting
/// item is returned alone.
pub fn extract_summary(policy: &SelectionPolicy, space: &SearchSpace, budget: usize) -> Subset {
    let mut order: Vec<usize> = (0..space.len()).collect();
    order.sort_by(|&a, &b| {
        policy.0[b]
            .total_cmp(&policy.0[a])
            .then(space.tie_rank[a].cmp(&space.tie_rank[b]))
    });
    let mut members = Vec::new();
    let mut total = 0;
    for &i in &order {
        if policy.0[i] >= 0.5 && total + space.lengths[i] <= budget {
            total += space.lengths[i];
            members.push(i);
        }
    }
    if members.is_empty() {
        if let Some(&i) = order.iter().find(|&&i| space.lengths[i] <= budget) {
            members.push(i);
        }
    }
    space.subset(members)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub gamma: f64,
    pub elite_mean: f64,
    pub elite_size: usize,
    /// Sampling length limit in force during the iteration.
    pub length_limit: f64,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone)]
pub struct CeOutcome {
    pub best: Subset,
    pub policy: SelectionPolicy,
    pub trace: Vec<IterationTrace>,
    /// Final learned length limit in adaptive mode.
    pub final_length: Option<f64>,
}

/// Runs the cross-entropy loop over `space` under a hard `budget`.
pub fn optimize<O: SubsetObjective>(
    objective: &O,
    space: &SearchSpace,
    budget: usize,
    params: &CeParams,
    adaptive: Option<AdaptiveLengthState>,
) -> Result<CeOutcome> {
    params.validate()?;
    if space.is_empty() {
        return Err(Error::Validation("no candidates to select from".into()));
    }
    let min_len = *space.lengths.iter().min().unwrap();
    if min_len > budget {
        return Err(Error::Optimization(format!(
            "no candidate fits the {budget}-word budget (shortest has {min_len} words)"
        )));
    }
    if let Some(a) = adaptive {
        if !(a.initial > 0.0 && a.initial.is_finite()) {
            return Err(Error::Validation(format!("initial adaptive length must be positive, got {}", a.initial)));
        }
    }

    let start = Instant::now();
    let n = space.len();
    let mut policy = SelectionPolicy::uniform(n, INITIAL_PROBABILITY);
    let mut length = adaptive.map(|a| a.current);
    let mut trace = Vec::new();
    let mut stable_run = 0;
    let mut prev_gamma: Option<f64> = None;

    for t in 1..=params.max_iterations {
        let poisson = match length {
            Some(l) => Some(Poisson::new(l).map_err(|e| Error::Optimization(format!("length distribution: {e}")))?),
            None => None,
        };
        let samples: Vec<(Subset, f64)> = (0..params.sample_count)
            .into_par_iter()
            .map(|j| {
                let mut rng = sample_rng(params.seed, t as u32, j as u32);
                let limit = match &poisson {
                    Some(p) => {
                        let draw: f64 = p.sample(&mut rng);
                        (draw.max(0.0) as usize).min(budget)
                    }
                    None => budget,
                };
                let subset = sample_subset(&policy, space, limit, &mut rng);
                let score = if subset.total_words > budget {
                    INFEASIBLE
                } else {
                    objective.score(&subset)?
                };
                Ok((subset, score))
            })
            .collect::<Result<_>>()?;

        let scores: Vec<f64> = samples.iter().map(|(_, s)| *s).collect();
        let gamma = elite_threshold(&scores, params.elite_fraction)?;
        let elite: Vec<&Subset> = samples
            .iter()
            .filter(|(_, s)| *s >= gamma)
            .map(|(subset, _)| subset)
            .collect();
        let elite_mean = samples.iter().filter(|(_, s)| *s >= gamma).map(|(_, s)| s).sum::<f64>() / elite.len() as f64;

        let fresh = update_policy(&elite, n);
        policy = smooth_policy(&policy, &fresh, params.smoothing);
        let limit_used = length.unwrap_or(budget as f64);
        let mut length_stable = true;
        if let Some(l) = length.as_mut() {
            let lens: Vec<usize> = elite.iter().map(|s| s.total_words).collect();
            let next = update_length(&lens, *l, params.smoothing);
            length_stable = (next - *l).abs() < LENGTH_STABILITY_WORDS;
            *l = next;
        }

        trace.push(IterationTrace {
            iteration: t,
            gamma,
            elite_mean,
            elite_size: elite.len(),
            length_limit: limit_used,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if let Some(prev) = prev_gamma {
            let scale = prev.abs().max(f64::MIN_POSITIVE);
            if (gamma - prev).abs() <= params.stability_epsilon * scale && length_stable {
                stable_run += 1;
            } else {
                stable_run = 0;
            }
        }
        prev_gamma = Some(gamma);
        if params.stability_window > 0 && stable_run >= params.stability_window {
            break;
        }
    }

    let best = match params.extraction {
        Extraction::Greedy => extract_summary(&policy, space, budget),
        Extraction::Sample => {
            let mut rng = sample_rng(params.seed, u32::MAX, 0);
            sample_subset(&policy, space, budget, &mut rng)
        }
    };
    Ok(CeOutcome {
        best,
        policy,
        trace,
        final_length: length,
    })
}

/// Scores candidate subsets with a predictor product.
pub struct SummaryObjective<'a>(pub PreparedObjective<'a>);

impl SubsetObjective for SummaryObjective<'_> {
    fn score(&self, subset: &Subset) -> Result<f64> {
        Ok(self.0.score(&subset.members))
    }
}

/// Summary optimization: runs [`optimize`] with the predictor product `spec`
/// and materializes the selected sentences.
pub fn run(
    spec: &ObjectiveSpec,
    docs: &DocumentSet,
    candidates: &[Sentence],
    budget: usize,
    params: &CeParams,
    adaptive: Option<AdaptiveLengthState>,
) -> Result<(CandidateSummary, CeOutcome)> {
    let space = SearchSpace::from_sentences(candidates);
    let objective = SummaryObjective(PreparedObjective::new(spec, docs, candidates, budget)?);
    let outcome = optimize(&objective, &space, budget, params, adaptive)?;
    let summary = CandidateSummary::new(candidates, &outcome.best.members);
    Ok((summary, outcome))
}
