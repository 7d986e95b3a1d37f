//! End-to-end summarization: query preparation, candidate pruning, and the
//! single-step and two-step (saliency then focus) optimization flows.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cem::{self, AdaptiveLengthState, CeParams, IterationTrace};
use crate::corpus::{prune_with_lm, topic_query_lm, DocumentSet, Sentence, Topic, Vocabulary};
use crate::error::{Error, Result};
use crate::predictors::{
    evaluate_objective, q_cov, CandidateSummary, FeedbackDistillate, ObjectiveSpec, QueryContext, SubQuery,
};

/// Expansion terms kept per sub-query.
pub const DEFAULT_EXPANSION_TERMS: usize = 100;

/// Mixed into the seed of the saliency step so it does not replay the focus
/// step's sample streams.
const SALIENCY_SEED_SALT: u64 = 0x5A11_E1C7_D0A1_CE55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Ces,
    CesPlus,
    Dual,
    DualAdaptive,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Ces, Mode::CesPlus, Mode::Dual, Mode::DualAdaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ces => "ces",
            Mode::CesPlus => "ces-plus",
            Mode::Dual => "dual",
            Mode::DualAdaptive => "dual-adaptive",
        }
    }

    pub fn is_dual(self) -> bool {
        matches!(self, Mode::Dual | Mode::DualAdaptive)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    /// Final summary word limit.
    pub l_max: usize,
    /// Word limit of the saliency step.
    pub l_bar: usize,
    /// Initial length, and hard ceiling, of the adaptive saliency step.
    pub adaptive_l0: usize,
    pub prune_k: usize,
    pub feedback_top_k: usize,
    pub position_bias_b: f64,
    pub expansion_terms: usize,
    /// Include the distilled-term coverage predictor in the focus step.
    pub feedback_enabled: bool,
    /// Replace `b` in the focus step with the feedback sentences' mean offset.
    pub adaptive_position_bias: bool,
    /// Use expanded sub-queries in the saliency step's query-focus predictor.
    pub expand_saliency_query: bool,
    pub ce: CeParams,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            l_max: 250,
            l_bar: 1500,
            adaptive_l0: 3000,
            prune_k: crate::corpus::DEFAULT_PRUNE_K,
            feedback_top_k: 100,
            position_bias_b: 2.0,
            expansion_terms: DEFAULT_EXPANSION_TERMS,
            feedback_enabled: true,
            adaptive_position_bias: true,
            expand_saliency_query: true,
            ce: CeParams::default(),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_max == 0 {
            return Err(Error::Validation("l_max must be positive".into()));
        }
        if self.l_bar < self.l_max {
            return Err(Error::Validation(format!(
                "l_bar ({}) must be at least l_max ({})",
                self.l_bar, self.l_max
            )));
        }
        if self.adaptive_l0 == 0 {
            return Err(Error::Validation("adaptive_l0 must be positive".into()));
        }
        if self.prune_k == 0 {
            return Err(Error::Validation("prune_k must be positive".into()));
        }
        if !(self.position_bias_b > 0.0) {
            return Err(Error::Validation("position_bias_b must be positive".into()));
        }
        self.ce.validate()
    }
}

/// One sub-query per question: analyzed `title + question` plus up to
/// `max_expansion` expansion terms.
pub fn prepare_subqueries(topic: &Topic, max_expansion: usize) -> QueryContext {
    QueryContext {
        subqueries: (0..topic.questions.len())
            .map(|i| SubQuery::from_tokens(&topic.subquery_terms(i, max_expansion)))
            .collect(),
    }
}

/// Top-`top_k` unigrams of the feedback summary by frequency (ties broken by
/// term text) and the mean start offset of its sentences.
pub fn distill(step1: &CandidateSummary, vocab: &Vocabulary, top_k: usize) -> FeedbackDistillate {
    let mut ranked: Vec<_> = step1.unigrams.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| vocab.term(a.0).cmp(vocab.term(b.0))));
    let mut salient_terms: Vec<_> = ranked.into_iter().take(top_k).map(|(t, _)| t).collect();
    salient_terms.sort_unstable();
    let avg_position = if step1.is_empty() {
        0.0
    } else {
        step1.positions.iter().sum::<usize>() as f64 / step1.len() as f64
    };
    FeedbackDistillate {
        salient_terms,
        avg_position,
    }
}

/// Outcome of one optimizer invocation.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub summary: CandidateSummary,
    pub objective: f64,
    pub budget: usize,
    pub trace: Vec<IterationTrace>,
    pub final_length: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SummaryResult {
    pub mode: Mode,
    pub seed: u64,
    /// The pruned pool both steps select from; summaries index into it.
    pub candidates: Vec<Sentence>,
    pub query: Arc<QueryContext>,
    pub summary: StepResult,
    pub step1: Option<StepResult>,
    pub distillate: Option<FeedbackDistillate>,
}

impl SummaryResult {
    /// Selected sentences in `(doc_id, char_offset)` order.
    pub fn sentences(&self) -> Vec<&Sentence> {
        ordered(&self.candidates, &self.summary.summary)
    }

    pub fn step1_sentences(&self) -> Option<Vec<&Sentence>> {
        self.step1.as_ref().map(|s| ordered(&self.candidates, &s.summary))
    }

    pub fn total_words(&self) -> usize {
        self.summary.summary.total_words
    }

    pub fn text(&self) -> String {
        self.sentences().iter().map(|s| s.raw_text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

fn ordered<'a>(candidates: &'a [Sentence], summary: &CandidateSummary) -> Vec<&'a Sentence> {
    let mut out: Vec<&Sentence> = summary.members.iter().map(|&i| &candidates[i]).collect();
    out.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    out
}

/// Query context, pruned pool, and unexpanded context for one topic.
struct Prepared {
    query: Arc<QueryContext>,
    unexpanded: Arc<QueryContext>,
    candidates: Vec<Sentence>,
}

fn prepare(topic: &Topic, docs: &DocumentSet, config: &CascadeConfig) -> Result<Prepared> {
    config.validate()?;
    let query = Arc::new(prepare_subqueries(topic, config.expansion_terms));
    let unexpanded = Arc::new(prepare_subqueries(topic, 0));
    let candidates = prune_with_lm(docs, &topic_query_lm(topic, config.expansion_terms), config.prune_k);
    if candidates.is_empty() {
        return Err(Error::Validation(format!("topic {}: candidate pool is empty", topic.topic_id)));
    }
    Ok(Prepared {
        query,
        unexpanded,
        candidates,
    })
}

fn step(
    spec: &ObjectiveSpec,
    docs: &DocumentSet,
    candidates: &[Sentence],
    budget: usize,
    params: &CeParams,
    adaptive: Option<AdaptiveLengthState>,
) -> Result<StepResult> {
    let (summary, outcome) = cem::run(spec, docs, candidates, budget, params, adaptive)?;
    let objective = evaluate_objective(spec, &summary, docs, budget)?;
    Ok(StepResult {
        summary,
        objective,
        budget,
        trace: outcome.trace,
        final_length: outcome.final_length,
    })
}

/// Single optimizer invocation at `l_max` with the CES or CES⁺ objective.
pub fn run_ces_baseline(topic: &Topic, docs: &DocumentSet, config: &CascadeConfig, variant: Mode) -> Result<SummaryResult> {
    let prepared = prepare(topic, docs, config)?;
    let mut spec = match variant {
        Mode::Ces => ObjectiveSpec::ces(prepared.query.clone()),
        Mode::CesPlus => ObjectiveSpec::ces_plus(prepared.query.clone()),
        other => return Err(Error::Validation(format!("{other} is not a single-step variant"))),
    };
    spec.position_bias = config.position_bias_b;
    let summary = step(&spec, docs, &prepared.candidates, config.l_max, &config.ce, None)?;
    Ok(SummaryResult {
        mode: variant,
        seed: config.ce.seed,
        candidates: prepared.candidates,
        query: prepared.query,
        summary,
        step1: None,
        distillate: None,
    })
}

/// Saliency step at `l_bar` (or adaptive length), distillation, then the
/// focus step at `l_max` over the same candidate pool.
pub fn run_dual_ces(topic: &Topic, docs: &DocumentSet, config: &CascadeConfig, mode: Mode) -> Result<SummaryResult> {
    if !mode.is_dual() {
        return Err(Error::Validation(format!("{mode} is not a cascade mode")));
    }
    let prepared = prepare(topic, docs, config)?;
    let candidates = &prepared.candidates;

    let saliency_query = if config.expand_saliency_query {
        prepared.query.clone()
    } else {
        prepared.unexpanded.clone()
    };
    let mut saliency = ObjectiveSpec::saliency(saliency_query);
    saliency.position_bias = config.position_bias_b;
    let step1_params = CeParams {
        seed: config.ce.seed ^ SALIENCY_SEED_SALT,
        ..config.ce.clone()
    };
    let step1 = match mode {
        Mode::DualAdaptive => {
            let l0 = config.adaptive_l0;
            step(&saliency, docs, candidates, l0, &step1_params, Some(AdaptiveLengthState::new(l0 as f64)))?
        }
        _ => step(&saliency, docs, candidates, config.l_bar, &step1_params, None)?,
    };
    if step1.summary.is_empty() {
        return Err(Error::Optimization("saliency step produced an empty summary".into()));
    }

    let distillate = distill(&step1.summary, &docs.vocabulary, config.feedback_top_k);
    let b = if config.adaptive_position_bias {
        distillate.avg_position
    } else {
        config.position_bias_b
    };
    let focus = if config.feedback_enabled {
        ObjectiveSpec::focus(prepared.query.clone(), distillate.clone(), b)?
    } else {
        let mut spec = ObjectiveSpec::ces_plus(prepared.query.clone());
        spec.position_bias = b;
        spec
    };
    let summary = step(&focus, docs, candidates, config.l_max, &config.ce, None)?;

    Ok(SummaryResult {
        mode,
        seed: config.ce.seed,
        candidates: prepared.candidates,
        query: prepared.query,
        summary,
        step1: Some(step1),
        distillate: Some(distillate),
    })
}

/// Dispatches on `mode`.
pub fn summarize(topic: &Topic, docs: &DocumentSet, config: &CascadeConfig, mode: Mode) -> Result<SummaryResult> {
    match mode {
        Mode::Ces | Mode::CesPlus => run_ces_baseline(topic, docs, config, mode),
        Mode::Dual | Mode::DualAdaptive => run_dual_ces(topic, docs, config, mode),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TradeoffRow {
    Solved {
        budget: usize,
        /// Bigram cosine of the summary against the document set.
        saliency: f64,
        /// Summary model mass on query terms.
        focus: f64,
        word_count: usize,
    },
    /// No candidate sentence fits the budget.
    Infeasible { budget: usize },
}

impl TradeoffRow {
    pub fn budget(&self) -> usize {
        match *self {
            TradeoffRow::Solved { budget, .. } | TradeoffRow::Infeasible { budget } => budget,
        }
    }
}

/// Summary model mass on the union of all sub-query terms.
pub fn query_mass(summary: &CandidateSummary, query: &QueryContext) -> f64 {
    query.all_terms().into_iter().map(|w| summary.lm.prob(w)).sum()
}

/// Runs the saliency objective at each budget and reports how saliency and
/// focus of the result move as the length limit relaxes.
pub fn tradeoff_profile(topic: &Topic, docs: &DocumentSet, config: &CascadeConfig, budgets: &[usize]) -> Result<Vec<TradeoffRow>> {
    if budgets.is_empty() {
        return Err(Error::Validation("at least one budget is required".into()));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(format!("budgets must be strictly ascending, got {budgets:?}")));
    }
    let prepared = prepare(topic, docs, config)?;
    let mut spec = ObjectiveSpec::saliency(prepared.query.clone());
    spec.position_bias = config.position_bias_b;
    let shortest = prepared.candidates.iter().map(|s| s.word_count).min().unwrap_or(0);

    budgets
        .iter()
        .map(|&budget| {
            if budget < shortest {
                return Ok(TradeoffRow::Infeasible { budget });
            }
            let (summary, _) = cem::run(&spec, docs, &prepared.candidates, budget, &config.ce, None)?;
            Ok(TradeoffRow::Solved {
                budget,
                saliency: q_cov(&summary, docs),
                focus: query_mass(&summary, &prepared.query),
                word_count: summary.total_words,
            })
        })
        .collect()
}
