//! Summary-quality predictors and their product composition.
//!
//! Every predictor scores a [`CandidateSummary`] against the document set
//! and/or the prepared query. An [`ObjectiveSpec`] multiplies a chosen set of
//! them; a summary longer than the word budget is [`INFEASIBLE`].

use std::collections::HashMap;
use std::sync::Arc;

use crate::corpus::{DocumentSet, Sentence};
use crate::error::{Error, Result};
use crate::lm::{bhattacharyya, cosine, kl_similarity, Bigram, TermId, TermVector, UnigramLM};

/// Objective value of a summary that breaks the length budget. Compares below
/// every finite value.
pub const INFEASIBLE: f64 = f64::NEG_INFINITY;

/// Floor applied to each factor before taking the product.
pub const FACTOR_FLOOR: f64 = 1e-12;

/// Default position-bias hyperparameter `b`.
pub const DEFAULT_POSITION_BIAS: f64 = 2.0;

/// A subset of candidate sentences with its aggregated representations.
#[derive(Debug, Clone)]
pub struct CandidateSummary {
    /// Indices into the candidate pool, ascending.
    pub members: Vec<usize>,
    pub total_words: usize,
    /// Character offsets of the members, aligned with `members`.
    pub positions: Vec<usize>,
    pub word_counts: Vec<usize>,
    pub unigrams: TermVector<TermId>,
    pub bigrams: TermVector<Bigram>,
    pub lm: UnigramLM,
}

impl CandidateSummary {
    pub fn new(candidates: &[Sentence], members: &[usize]) -> Self {
        let mut members = members.to_vec();
        members.sort_unstable();
        members.dedup();
        let sentences: Vec<&Sentence> = members.iter().map(|&i| &candidates[i]).collect();
        let unigrams = TermVector::sum(sentences.iter().map(|s| &s.unigram_vector));
        let bigrams = TermVector::sum(sentences.iter().map(|s| &s.bigram_vector));
        let lm = UnigramLM::from_vector(&unigrams);
        Self {
            total_words: sentences.iter().map(|s| s.word_count).sum(),
            positions: sentences.iter().map(|s| s.char_offset).collect(),
            word_counts: sentences.iter().map(|s| s.word_count).collect(),
            members,
            unigrams,
            bigrams,
            lm,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One question of the topic, concatenated with the title and expanded.
#[derive(Debug, Clone)]
pub struct SubQuery {
    /// Distinct terms.
    pub terms: Vec<TermId>,
    pub vector: TermVector<TermId>,
    pub lm: UnigramLM,
}

impl SubQuery {
    /// `tokens` is the analyzed sub-query text; repeated tokens weigh more in
    /// the vector and the model but count once in `terms`.
    pub fn from_tokens(tokens: &[TermId]) -> Self {
        let vector = TermVector::from_terms(tokens.iter().copied());
        Self {
            terms: vector.terms().collect(),
            lm: UnigramLM::from_vector(&vector),
            vector,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct QueryContext {
    pub subqueries: Vec<SubQuery>,
}

impl QueryContext {
    /// Distinct terms over all sub-queries.
    pub fn all_terms(&self) -> Vec<TermId> {
        let mut all: Vec<TermId> = self.subqueries.iter().flat_map(|q| q.terms.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

/// Pseudo-feedback distilled from a long saliency-oriented summary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackDistillate {
    /// Sorted, distinct.
    pub salient_terms: Vec<TermId>,
    /// Mean start offset (characters) of the feedback sentences.
    pub avg_position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predictor {
    /// Bigram cosine between summary and document set.
    Coverage,
    /// Geometric mean of `1 + 1/ln(b + pos(s))`.
    PositionBias,
    /// Mean sentence length in words.
    Length,
    /// `exp(-KL)` between summary and document-set unigram models.
    KlCoverage,
    /// Summary model mass on query terms.
    QueryFocus,
    /// Geometric mean of Bhattacharyya and cosine query similarity.
    QueryRelevancy,
    /// Number of distilled feedback terms present in the summary.
    FeedbackCoverage,
}

impl Predictor {
    pub const ALL: [Predictor; 7] = [
        Predictor::Coverage,
        Predictor::PositionBias,
        Predictor::Length,
        Predictor::KlCoverage,
        Predictor::QueryFocus,
        Predictor::QueryRelevancy,
        Predictor::FeedbackCoverage,
    ];

    /// 1-based number used in the literature for this predictor.
    pub fn number(self) -> usize {
        Self::ALL.iter().position(|&p| p == self).unwrap() + 1
    }
}

/// Product of predictors plus the parameters they need.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    terms: Vec<Predictor>,
    pub position_bias: f64,
    pub feedback: Option<FeedbackDistillate>,
    pub query: Arc<QueryContext>,
}

impl ObjectiveSpec {
    pub fn new(
        terms: Vec<Predictor>,
        position_bias: f64,
        feedback: Option<FeedbackDistillate>,
        query: Arc<QueryContext>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Validation("objective needs at least one predictor".into()));
        }
        for (i, p) in terms.iter().enumerate() {
            if terms[..i].contains(p) {
                return Err(Error::Validation(format!("predictor {p:?} listed twice")));
            }
        }
        if terms.contains(&Predictor::FeedbackCoverage) && feedback.is_none() {
            return Err(Error::Validation("feedback coverage requires a distillate".into()));
        }
        // b = 0 is legal: the position factor guards the log singularity.
        if !(position_bias >= 0.0 && position_bias.is_finite()) {
            return Err(Error::Validation(format!("position bias must be non-negative, got {position_bias}")));
        }
        Ok(Self {
            terms,
            position_bias,
            feedback,
            query,
        })
    }

    fn from_numbers(numbers: &[usize], position_bias: f64, feedback: Option<FeedbackDistillate>, query: Arc<QueryContext>) -> Self {
        let terms = numbers.iter().map(|&n| Predictor::ALL[n - 1]).collect();
        Self::new(terms, position_bias, feedback, query).expect("built-in objective is valid")
    }

    /// Saliency objective: predictors 1-5.
    pub fn saliency(query: Arc<QueryContext>) -> Self {
        Self::from_numbers(&[1, 2, 3, 4, 5], DEFAULT_POSITION_BIAS, None, query)
    }

    /// Focus objective: predictors 1-7, with `b` taken from the caller.
    pub fn focus(query: Arc<QueryContext>, feedback: FeedbackDistillate, position_bias: f64) -> Result<Self> {
        Self::new(Predictor::ALL.to_vec(), position_bias, Some(feedback), query)
    }

    /// Original single-step objective: predictors 1, 2, 3, 5, 6.
    pub fn ces(query: Arc<QueryContext>) -> Self {
        Self::from_numbers(&[1, 2, 3, 5, 6], DEFAULT_POSITION_BIAS, None, query)
    }

    /// Single-step objective over predictors 1-6.
    pub fn ces_plus(query: Arc<QueryContext>) -> Self {
        Self::from_numbers(&[1, 2, 3, 4, 5, 6], DEFAULT_POSITION_BIAS, None, query)
    }

    pub fn predictors(&self) -> &[Predictor] {
        &self.terms
    }

    /// Number of combined predictors.
    pub fn arity(&self) -> usize {
        self.terms.len()
    }
}

pub fn q_cov(s: &CandidateSummary, docs: &DocumentSet) -> f64 {
    cosine(&s.bigrams, &docs.centroid_bigrams)
}

fn position_factor(b: f64, pos: usize) -> f64 {
    let x = (b + pos as f64).max(1.0 + 1e-6);
    1.0 + 1.0 / x.ln()
}

pub fn q_pos(s: &CandidateSummary, b: f64) -> f64 {
    if s.is_empty() {
        return 1.0;
    }
    let log_sum: f64 = s.positions.iter().map(|&p| position_factor(b, p).ln()).sum();
    (log_sum / s.len() as f64).exp()
}

pub fn q_len(s: &CandidateSummary) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    s.total_words as f64 / s.len() as f64
}

pub fn q_kl(s: &CandidateSummary, docs: &DocumentSet) -> Result<f64> {
    kl_similarity(&s.lm, &docs.lm)
}

pub fn q_qf(s: &CandidateSummary, query: &QueryContext) -> f64 {
    query
        .subqueries
        .iter()
        .map(|q| q.terms.iter().map(|&w| s.lm.prob(w)).sum::<f64>())
        .sum()
}

pub fn q_sim(s: &CandidateSummary, query: &QueryContext) -> f64 {
    query
        .subqueries
        .iter()
        .map(|q| (bhattacharyya(&q.lm, &s.lm) * cosine(&q.vector, &s.unigrams)).sqrt())
        .sum()
}

pub fn q_cov_feedback(s: &CandidateSummary, feedback: &FeedbackDistillate) -> u32 {
    feedback
        .salient_terms
        .iter()
        .filter(|w| s.unigrams.contains(w))
        .count() as u32
}

/// Value of a single predictor inside `spec`.
pub fn predictor_value(p: Predictor, spec: &ObjectiveSpec, s: &CandidateSummary, docs: &DocumentSet) -> Result<f64> {
    Ok(match p {
        Predictor::Coverage => q_cov(s, docs),
        Predictor::PositionBias => q_pos(s, spec.position_bias),
        Predictor::Length => q_len(s),
        Predictor::KlCoverage => q_kl(s, docs)?,
        Predictor::QueryFocus => q_qf(s, &spec.query),
        Predictor::QueryRelevancy => q_sim(s, &spec.query),
        Predictor::FeedbackCoverage => {
            let fb = spec
                .feedback
                .as_ref()
                .ok_or_else(|| Error::Validation("feedback coverage requires a distillate".into()))?;
            f64::from(q_cov_feedback(s, fb))
        }
    })
}

/// Product of the spec's predictors, each floored at [`FACTOR_FLOOR`].
/// Empty summaries and summaries over `budget` words are [`INFEASIBLE`].
pub fn evaluate_objective(spec: &ObjectiveSpec, s: &CandidateSummary, docs: &DocumentSet, budget: usize) -> Result<f64> {
    if s.is_empty() || s.total_words > budget {
        return Ok(INFEASIBLE);
    }
    let mut product = 1.0;
    for &p in &spec.terms {
        product *= predictor_value(p, spec, s, docs)?.max(FACTOR_FLOOR);
    }
    Ok(product)
}

struct PreparedQuery {
    /// (local term, query count, query probability) for query terms in the pool.
    entries: Vec<(u32, f64, f64)>,
    norm: f64,
}

/// An objective bound to one candidate pool, with every per-sentence quantity
/// mapped to dense local ids. Scores agree with [`evaluate_objective`] up to
/// floating-point summation order.
pub struct PreparedObjective<'a> {
    spec: &'a ObjectiveSpec,
    budget: usize,
    words: Vec<usize>,
    log_position: Vec<f64>,
    unigrams: Vec<Vec<(u32, u32)>>,
    bigrams: Vec<Vec<(u32, u32)>>,
    term_count: usize,
    bigram_count: usize,
    doc_bigram: Vec<f64>,
    doc_bigram_norm: f64,
    doc_ln_prob: Vec<f64>,
    queries: Vec<PreparedQuery>,
    feedback: Vec<u32>,
}

impl<'a> PreparedObjective<'a> {
    pub fn new(spec: &'a ObjectiveSpec, docs: &DocumentSet, candidates: &[Sentence], budget: usize) -> Result<Self> {
        let mut term_ids: HashMap<TermId, u32> = HashMap::new();
        let mut bigram_ids: HashMap<Bigram, u32> = HashMap::new();
        let mut local_terms = Vec::new();
        let mut local_bigrams = Vec::new();
        let mut unigrams = Vec::with_capacity(candidates.len());
        let mut bigrams = Vec::with_capacity(candidates.len());
        for s in candidates {
            unigrams.push(
                s.unigram_vector
                    .iter()
                    .map(|(w, c)| {
                        let id = *term_ids.entry(w).or_insert_with(|| {
                            local_terms.push(w);
                            local_terms.len() as u32 - 1
                        });
                        (id, c)
                    })
                    .collect(),
            );
            bigrams.push(
                s.bigram_vector
                    .iter()
                    .map(|(g, c)| {
                        let id = *bigram_ids.entry(g).or_insert_with(|| {
                            local_bigrams.push(g);
                            local_bigrams.len() as u32 - 1
                        });
                        (id, c)
                    })
                    .collect(),
            );
        }
        let needs_kl = spec.terms.contains(&Predictor::KlCoverage);
        let mut doc_ln_prob = Vec::with_capacity(local_terms.len());
        for &w in &local_terms {
            let pd = docs.lm.prob(w);
            if needs_kl && pd <= 0.0 {
                return Err(Error::Invariant(format!(
                    "term {w:?} of the candidate pool is missing from the document-set model"
                )));
            }
            doc_ln_prob.push(pd.ln());
        }
        let queries = spec
            .query
            .subqueries
            .iter()
            .map(|q| PreparedQuery {
                entries: q
                    .vector
                    .iter()
                    .filter_map(|(w, c)| term_ids.get(&w).map(|&id| (id, f64::from(c), q.lm.prob(w))))
                    .collect(),
                norm: q.vector.norm(),
            })
            .collect();
        let feedback = spec
            .feedback
            .iter()
            .flat_map(|f| f.salient_terms.iter())
            .filter_map(|w| term_ids.get(w).copied())
            .collect();
        Ok(Self {
            spec,
            budget,
            words: candidates.iter().map(|s| s.word_count).collect(),
            log_position: candidates
                .iter()
                .map(|s| position_factor(spec.position_bias, s.char_offset).ln())
                .collect(),
            unigrams,
            bigrams,
            term_count: local_terms.len(),
            bigram_count: local_bigrams.len(),
            doc_bigram: local_bigrams.iter().map(|g| f64::from(docs.centroid_bigrams.get(g))).collect(),
            doc_bigram_norm: docs.centroid_bigrams.norm(),
            doc_ln_prob,
            queries,
            feedback,
        })
    }

    /// Objective value of the subset `members` (indices into the pool).
    pub fn score(&self, members: &[usize]) -> f64 {
        let total_words: usize = members.iter().map(|&i| self.words[i]).sum();
        if members.is_empty() || total_words > self.budget {
            return INFEASIBLE;
        }
        let mut counts = vec![0u32; self.term_count];
        let mut touched = Vec::new();
        let mut total = 0u64;
        for &i in members {
            for &(w, c) in &self.unigrams[i] {
                let slot = &mut counts[w as usize];
                if *slot == 0 {
                    touched.push(w);
                }
                *slot += c;
                total += u64::from(c);
            }
        }
        // An all-stopword selection has no terms; treat its model as empty.
        let inv_total = if total == 0 { 0.0 } else { 1.0 / total as f64 };
        let k = members.len() as f64;
        let mut product = 1.0;
        for &p in &self.spec.terms {
            let v = match p {
                Predictor::Coverage => self.coverage(members),
                Predictor::PositionBias => (members.iter().map(|&i| self.log_position[i]).sum::<f64>() / k).exp(),
                Predictor::Length => total_words as f64 / k,
                Predictor::KlCoverage => {
                    let kl: f64 = touched
                        .iter()
                        .map(|&w| {
                            let ps = f64::from(counts[w as usize]) * inv_total;
                            ps * (ps.ln() - self.doc_ln_prob[w as usize])
                        })
                        .sum();
                    (-kl.max(0.0)).exp()
                }
                Predictor::QueryFocus => self
                    .queries
                    .iter()
                    .flat_map(|q| q.entries.iter())
                    .map(|&(w, _, _)| f64::from(counts[w as usize]))
                    .sum::<f64>()
                    * inv_total,
                Predictor::QueryRelevancy => {
                    let norm = touched
                        .iter()
                        .map(|&w| f64::from(counts[w as usize]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    self.queries
                        .iter()
                        .map(|q| {
                            let (mut bc, mut dot) = (0.0, 0.0);
                            for &(w, qc, pq) in &q.entries {
                                let c = f64::from(counts[w as usize]);
                                bc += (pq * c * inv_total).sqrt();
                                dot += qc * c;
                            }
                            let cos = if q.norm == 0.0 || norm == 0.0 { 0.0 } else { (dot / (q.norm * norm)).min(1.0) };
                            (bc.min(1.0) * cos).sqrt()
                        })
                        .sum()
                }
                Predictor::FeedbackCoverage => self.feedback.iter().filter(|&&w| counts[w as usize] > 0).count() as f64,
            };
            product *= v.max(FACTOR_FLOOR);
        }
        product
    }

    fn coverage(&self, members: &[usize]) -> f64 {
        let mut counts = vec![0u32; self.bigram_count];
        let mut touched = Vec::new();
        for &i in members {
            for &(g, c) in &self.bigrams[i] {
                let slot = &mut counts[g as usize];
                if *slot == 0 {
                    touched.push(g);
                }
                *slot += c;
            }
        }
        if touched.is_empty() || self.doc_bigram_norm == 0.0 {
            return 0.0;
        }
        let (mut dot, mut norm_sq) = (0.0, 0.0);
        for &g in &touched {
            let c = f64::from(counts[g as usize]);
            dot += c * self.doc_bigram[g as usize];
            norm_sq += c * c;
        }
        (dot / (norm_sq.sqrt() * self.doc_bigram_norm)).min(1.0)
    }
}
