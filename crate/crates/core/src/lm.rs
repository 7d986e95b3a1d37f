//! Sparse term-frequency vectors, maximum-likelihood unigram language models,
//! and the similarity kernels shared by the summary-quality predictors.
//!
//! Terms are interned into [`TermId`]s by the corpus vocabulary. A bigram is a
//! pair of adjacent unigram ids. Vector order (unigram or bigram) is carried by
//! the key type, so comparing a unigram vector against a bigram vector is a
//! compile error rather than a runtime one.

use std::fmt;

use crate::error::{Error, Result};

/// Interned analyzed unigram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

/// Two adjacent analyzed unigrams within one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bigram(pub TermId, pub TermId);

/// A key type usable in a [`TermVector`].
pub trait Gram: Copy + Ord + fmt::Debug {
    /// 1 for unigrams, 2 for bigrams.
    const ORDER: u8;
}

impl Gram for TermId {
    const ORDER: u8 = 1;
}

impl Gram for Bigram {
    const ORDER: u8 = 2;
}

/// Sparse count vector, stored as entries sorted by key with no zero counts.
#[derive(Clone, PartialEq)]
pub struct TermVector<K> {
    entries: Vec<(K, u32)>,
    total: u64,
    norm_sq: f64,
}

impl<K: Gram> fmt::Debug for TermVector<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TermVector")
            .field("order", &K::ORDER)
            .field("entries", &self.entries)
            .finish()
    }
}

impl<K: Gram> Default for TermVector<K> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            total: 0,
            norm_sq: 0.0,
        }
    }
}

impl<K: Gram> TermVector<K> {
    /// Counts each occurrence of a term.
    pub fn from_terms<I: IntoIterator<Item = K>>(terms: I) -> Self {
        Self::from_counts(terms.into_iter().map(|t| (t, 1)))
    }

    /// Builds a vector from (term, count) pairs; duplicate terms are summed
    /// and zero counts dropped.
    pub fn from_counts<I: IntoIterator<Item = (K, u32)>>(pairs: I) -> Self {
        let mut entries: Vec<(K, u32)> = pairs.into_iter().filter(|&(_, c)| c > 0).collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        entries.dedup_by(|later, kept| {
            if later.0 == kept.0 {
                kept.1 += later.1;
                true
            } else {
                false
            }
        });
        Self::from_sorted(entries)
    }

    fn from_sorted(entries: Vec<(K, u32)>) -> Self {
        let total = entries.iter().map(|&(_, c)| u64::from(c)).sum();
        let norm_sq = entries.iter().map(|&(_, c)| f64::from(c) * f64::from(c)).sum();
        Self {
            entries,
            total,
            norm_sq,
        }
    }

    /// Element-wise sum of several vectors.
    pub fn sum<'a, I>(vectors: I) -> Self
    where
        I: IntoIterator<Item = &'a TermVector<K>>,
        K: 'a,
    {
        let mut iter = vectors.into_iter();
        let Some(first) = iter.next() else {
            return Self::default();
        };
        let mut all = first.entries.clone();
        let mut merged_any = false;
        for v in iter {
            all.extend_from_slice(&v.entries);
            merged_any = true;
        }
        if merged_any {
            Self::from_counts(all)
        } else {
            Self::from_sorted(all)
        }
    }

    pub fn order(&self) -> u8 {
        K::ORDER
    }

    pub fn get(&self, term: &K) -> u32 {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(term))
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn contains(&self, term: &K) -> bool {
        self.get(term) > 0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (K, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = K> + '_ {
        self.entries.iter().map(|&(k, _)| k)
    }

    /// Number of distinct terms.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        if small.is_empty() {
            return 0.0;
        }
        // Binary search wins when one side is much sparser, e.g. a summary
        // against the document-set centroid.
        if small.len() * 8 < large.len() {
            return small
                .entries
                .iter()
                .map(|&(k, c)| f64::from(c) * f64::from(large.get(&k)))
                .sum();
        }
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < small.entries.len() && j < large.entries.len() {
            let (ka, ca) = small.entries[i];
            let (kb, cb) = large.entries[j];
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += f64::from(ca) * f64::from(cb);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Maximum-likelihood (unsmoothed) unigram distribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnigramLM {
    probs: Vec<(TermId, f64)>,
}

impl UnigramLM {
    /// `p(w) = count(w) / total`.
    pub fn from_vector(v: &TermVector<TermId>) -> Self {
        let total = v.total() as f64;
        Self {
            probs: v.iter().map(|(t, c)| (t, f64::from(c) / total)).collect(),
        }
    }

    /// Builds a model from explicit probabilities. They must be positive and
    /// sum to one within 1e-9.
    pub fn from_probs<I: IntoIterator<Item = (TermId, f64)>>(probs: I) -> Result<Self> {
        let mut probs: Vec<(TermId, f64)> = probs.into_iter().collect();
        probs.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        if probs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Validation("duplicate term in language model".into()));
        }
        if probs.iter().any(|&(_, p)| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Validation("language-model probabilities must be positive".into()));
        }
        let sum: f64 = probs.iter().map(|&(_, p)| p).sum();
        if !probs.is_empty() && (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("language-model probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn prob(&self, term: TermId) -> f64 {
        self.probs
            .binary_search_by(|(k, _)| k.cmp(&term))
            .map_or(0.0, |i| self.probs[i].1)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (TermId, f64)> + '_ {
        self.probs.iter().copied()
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Cosine of two sparse count vectors; 0 when either is empty.
pub fn cosine<K: Gram>(a: &TermVector<K>, b: &TermVector<K>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    (a.dot(b) / (a.norm() * b.norm())).min(1.0)
}

/// Bhattacharyya coefficient, summed over the query model's support.
pub fn bhattacharyya(query_lm: &UnigramLM, s_lm: &UnigramLM) -> f64 {
    let bc: f64 = query_lm
        .iter()
        .map(|(w, pq)| (pq * s_lm.prob(w)).sqrt())
        .sum();
    bc.min(1.0)
}

/// `exp(-KL(s || d))` with natural logarithms.
///
/// Every term of `s_lm` must have positive probability under `d_lm`.
pub fn kl_similarity(s_lm: &UnigramLM, d_lm: &UnigramLM) -> Result<f64> {
    let mut kl = 0.0;
    for (w, ps) in s_lm.iter() {
        let pd = d_lm.prob(w);
        if pd <= 0.0 {
            return Err(Error::Invariant(format!(
                "term {w:?} of the summary model is missing from the document-set model"
            )));
        }
        kl += ps * (ps / pd).ln();
    }
    // Rounding can push KL a hair below zero for identical models.
    Ok((-kl.max(0.0)).exp())
}
