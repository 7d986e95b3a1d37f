//! Straight-line reference implementations shared by the integration tests
//! and the acceptance suite. Nothing here calls into the library's scoring
//! code; only corpus analysis output (token and bigram lists) is consumed.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;

use ce_summ::corpus::{CorpusFile, DocumentFile, Sentence};
use ce_summ::lm::{Bigram, TermId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn counts<K: Hash + Eq + Copy>(items: impl IntoIterator<Item = K>) -> HashMap<K, f64> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0.0) += 1.0;
    }
    m
}

pub fn cosine<K: Hash + Eq>(a: &HashMap<K, f64>, b: &HashMap<K, f64>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(k, x)| x * b.get(k).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).min(1.0)
}

fn unigram_counts(sentences: &[&Sentence]) -> HashMap<TermId, f64> {
    counts(sentences.iter().flat_map(|s| s.tokens.iter().copied()))
}

fn bigram_counts(sentences: &[&Sentence]) -> HashMap<Bigram, f64> {
    counts(sentences.iter().flat_map(|s| s.bigrams.iter().copied()))
}

fn probs(c: &HashMap<TermId, f64>) -> HashMap<TermId, f64> {
    let total: f64 = c.values().sum();
    c.iter().map(|(&k, &v)| (k, v / total)).collect()
}

pub fn q_cov(summary: &[&Sentence], all: &[&Sentence]) -> f64 {
    cosine(&bigram_counts(summary), &bigram_counts(all))
}

pub fn q_pos(offsets: &[usize], b: f64) -> f64 {
    let product: f64 = offsets
        .iter()
        .map(|&p| 1.0 + 1.0 / (b + p as f64).max(1.0 + 1e-6).ln())
        .product();
    product.powf(1.0 / offsets.len() as f64)
}

pub fn q_len(summary: &[&Sentence]) -> f64 {
    summary.iter().map(|s| s.word_count).sum::<usize>() as f64 / summary.len() as f64
}

pub fn q_kl(summary: &[&Sentence], all: &[&Sentence]) -> f64 {
    let ps = probs(&unigram_counts(summary));
    let pd = probs(&unigram_counts(all));
    let kl: f64 = ps.iter().map(|(w, p)| p * (p / pd[w]).ln()).sum();
    (-kl.max(0.0)).exp()
}

fn unique(q: &[TermId]) -> HashSet<TermId> {
    q.iter().copied().collect()
}

pub fn q_qf(summary: &[&Sentence], subqueries: &[Vec<TermId>]) -> f64 {
    let c = unigram_counts(summary);
    let total: f64 = c.values().sum();
    if total == 0.0 {
        return 0.0;
    }
    subqueries
        .iter()
        .map(|q| unique(q).iter().map(|w| c.get(w).copied().unwrap_or(0.0) / total).sum::<f64>())
        .sum()
}

pub fn q_sim(summary: &[&Sentence], subqueries: &[Vec<TermId>]) -> f64 {
    let c = unigram_counts(summary);
    let ps = probs(&c);
    subqueries
        .iter()
        .map(|q| {
            let qc = counts(q.iter().copied());
            let pq = probs(&qc);
            let bc: f64 = pq
                .iter()
                .map(|(w, p)| (p * ps.get(w).copied().unwrap_or(0.0)).sqrt())
                .sum();
            (bc.min(1.0) * cosine(&qc, &c)).sqrt()
        })
        .sum()
}

pub fn q_cov_feedback(summary: &[&Sentence], terms: &[TermId]) -> f64 {
    let present = unique(&summary.iter().flat_map(|s| s.tokens.iter().copied()).collect::<Vec<_>>());
    terms.iter().filter(|t| present.contains(t)).count() as f64
}

/// All seven predictor values, in predictor-number order.
pub fn all_predictors(
    summary: &[&Sentence],
    all: &[&Sentence],
    subqueries: &[Vec<TermId>],
    feedback: &[TermId],
    b: f64,
) -> [f64; 7] {
    let offsets: Vec<usize> = summary.iter().map(|s| s.char_offset).collect();
    [
        q_cov(summary, all),
        q_pos(&offsets, b),
        q_len(summary),
        q_kl(summary, all),
        q_qf(summary, subqueries),
        q_sim(summary, subqueries),
        q_cov_feedback(summary, feedback),
    ]
}

/// Random corpus over a small vocabulary so that sentences overlap.
pub fn random_corpus<R: Rng>(rng: &mut R, id: &str) -> CorpusFile {
    const WORDS: &[&str] = &[
        "storm", "flood", "river", "bridge", "rescue", "damage", "city", "water", "rain", "wind", "levee", "crew",
        "power", "road", "school", "army", "relief", "coast", "the", "of", "and", "in",
    ];
    let docs = rng.gen_range(1..=3);
    let documents = (0..docs)
        .map(|d| DocumentFile {
            doc_id: format!("{id}.d{d}"),
            sentences: (0..rng.gen_range(1..=5))
                .map(|_| {
                    let mut words: Vec<&str> = Vec::new();
                    while words.len() < rng.gen_range(2..=9) || words.iter().all(|w| w.len() <= 3) {
                        words.push(WORDS.choose(rng).unwrap());
                    }
                    words.join(" ")
                })
                .collect(),
        })
        .collect();
    CorpusFile {
        topic_id: id.to_string(),
        title: "storm".into(),
        questions: vec!["What damage did the flood cause?".into(), "Who joined the rescue?".into()],
        expansion_terms: [("0".to_string(), vec!["river".to_string(), "levee".to_string()])].into(),
        documents,
    }
}

/// Best value of `f` over every subset of `n` items whose lengths fit `budget`.
pub fn brute_force(lengths: &[usize], budget: usize, f: impl Fn(&[usize]) -> f64) -> f64 {
    let n = lengths.len();
    let mut best = f64::NEG_INFINITY;
    let mut members = Vec::with_capacity(n);
    for mask in 1u32..(1 << n) {
        members.clear();
        let mut total = 0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                members.push(i);
                total += lengths[i];
            }
        }
        if total <= budget {
            best = best.max(f(&members));
        }
    }
    best
}

/// Budgeted weighted max-coverage instance.
#[derive(Debug, Clone)]
pub struct CoverageInstance {
    pub lengths: Vec<usize>,
    pub covers: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub budget: usize,
}

impl CoverageInstance {
    pub fn random<R: Rng>(rng: &mut R, n: usize) -> Self {
        let elements = 3 * n;
        let lengths: Vec<usize> = (0..n).map(|_| rng.gen_range(5..=30)).collect();
        let covers = (0..n)
            .map(|_| {
                let k = rng.gen_range(2..=6);
                let mut c: Vec<usize> = (0..k).map(|_| rng.gen_range(0..elements)).collect();
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        let weights = (0..elements).map(|_| rng.gen_range(1.0..10.0)).collect();
        let budget = lengths.iter().sum::<usize>() * 2 / 5;
        Self {
            lengths,
            covers,
            weights,
            budget,
        }
    }

    pub fn value(&self, members: &[usize]) -> f64 {
        let covered: BTreeSet<usize> = members.iter().flat_map(|&i| self.covers[i].iter().copied()).collect();
        covered.iter().map(|&e| self.weights[e]).sum()
    }

    pub fn optimum(&self) -> f64 {
        brute_force(&self.lengths, self.budget, |m| self.value(m))
    }
}

/// Literal policy update: for each item, the share of elite samples that
/// contain it, as an exact (count, elite size) ratio.
pub fn literal_policy(elite: &[Vec<usize>], n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|i| (elite.iter().filter(|s| s.contains(&i)).count(), elite.len()))
        .collect()
}

/// ROUGE by direct enumeration: recall, precision and F per metric name.
pub mod rouge {
    fn grams(tokens: &[&str], n: usize) -> Vec<String> {
        if tokens.len() < n {
            return vec![];
        }
        (0..=tokens.len() - n).map(|i| tokens[i..i + n].join(" ")).collect()
    }

    fn skip_units(tokens: &[&str]) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..tokens.len() {
            out.push(tokens[i].to_string());
            for j in i + 1..tokens.len() {
                if j - i <= 5 {
                    out.push(format!("{} {}", tokens[i], tokens[j]));
                }
            }
        }
        out
    }

    /// Clipped overlap: walk the candidate list, consuming matching
    /// reference units one at a time.
    fn overlap(cand: &[String], reference: &[String]) -> usize {
        let mut pool: Vec<Option<&String>> = reference.iter().map(Some).collect();
        let mut hits = 0;
        for c in cand {
            if let Some(slot) = pool.iter_mut().find(|r| r.is_some_and(|r| r == c)) {
                *slot = None;
                hits += 1;
            }
        }
        hits
    }

    pub fn score(cand: &[&str], refs: &[Vec<&str>], unit: &dyn Fn(&[&str]) -> Vec<String>) -> (f64, f64, f64) {
        let c = unit(cand);
        let (mut r, mut p, mut used) = (0.0, 0.0, 0.0);
        for reference in refs {
            let ru = unit(reference);
            if ru.is_empty() {
                continue;
            }
            let hits = overlap(&c, &ru) as f64;
            r += hits / ru.len() as f64;
            if !c.is_empty() {
                p += hits / c.len() as f64;
            }
            used += 1.0;
        }
        let (r, p) = (r / used, p / used);
        let f = if r > 0.0 && p > 0.0 { r * p / (0.5 * p + 0.5 * r) } else { 0.0 };
        (r, p, f)
    }

    pub fn all(cand: &[&str], refs: &[Vec<&str>]) -> [(&'static str, (f64, f64, f64)); 3] {
        let cand = &cand[..cand.len().min(250)];
        [
            ("ROUGE-1", score(cand, refs, &|t| grams(t, 1))),
            ("ROUGE-2", score(cand, refs, &|t| grams(t, 2))),
            ("ROUGE-SU4", score(cand, refs, &skip_units)),
        ]
    }

    /// Twenty candidate/reference fixtures, compared as whitespace tokens
    /// without stemming.
    pub const FIXTURES: [(&str, &[&str]); 20] = [
        ("the cat sat on the mat", &["the cat sat on the mat"]),
        ("the cat sat on the mat", &["a dog ran in the park"]),
        ("police kill the gunman", &["police kill the gunman", "the gunman kill police"]),
        ("the gunman kill police", &["police kill the gunman"]),
        ("a b c d e f g", &["a c e g", "b d f"]),
        ("a a a b", &["a b b b"]),
        ("x y z", &["x y z x y z"]),
        ("x y z x y z", &["x y z"]),
        ("one two three four five six seven", &["one seven"]),
        ("one two three four five six seven", &["one six"]),
        ("alpha beta gamma", &["delta epsilon", "alpha beta"]),
        ("alpha", &["alpha beta gamma"]),
        ("red fish blue fish", &["one fish two fish red fish blue fish"]),
        ("storm hit the coast on monday", &["on monday the storm hit", "coast guard on alert"]),
        ("to be or not to be", &["to be is to do", "to do is to be"]),
        ("a b a b a b", &["b a b a b a"]),
        ("m n o p", &["p o n m"]),
        ("the the the the", &["the cat", "the the dog"]),
        ("q r s t u v w", &["q w", "r v", "s u"]),
        ("we met at noon and left at dusk", &["we left at dusk", "met at noon"]),
    ];
}
