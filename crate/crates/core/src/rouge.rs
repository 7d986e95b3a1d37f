//! ROUGE-N and ROUGE-SU recall, precision and F-measure against multiple
//! references.
//!
//! Matches are clipped per unit (`min(candidate count, reference count)`).
//! Multi-reference scores average recall and precision over the non-empty
//! references and derive F from the averages. Scores are comparable with each
//! other but not with the Perl toolkit, which jackknifes over references.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RougeConfig {
    /// Porter-stem tokens before matching.
    pub stemming: bool,
    /// Maximum number of words between the two halves of a skip-bigram.
    pub skip_distance: usize,
    /// Count unigrams alongside skip-bigrams.
    pub include_unigrams: bool,
    /// Precision weight in the F-measure.
    pub f_alpha: f64,
    /// Candidate words kept before scoring; `None` disables truncation.
    pub length_limit: Option<usize>,
}

impl Default for RougeConfig {
    fn default() -> Self {
        Self {
            stemming: true,
            skip_distance: 4,
            include_unigrams: true,
            f_alpha: 0.5,
            length_limit: Some(250),
        }
    }
}

/// Reference summaries for one topic, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFile {
    pub topic_id: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f: f64,
}

/// Lowercased alphanumeric words, optionally stemmed. Stop-words are kept.
pub fn tokenize(text: &str, config: &RougeConfig) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let w = w.to_lowercase();
            if config.stemming && w.bytes().all(|b| b.is_ascii_alphabetic()) {
                porter_stemmer::stem(&w)
            } else {
                w
            }
        })
        .collect()
}

type Units<'a> = HashMap<Vec<&'a str>, u32>;

fn ngrams<'a>(tokens: &'a [String], n: usize) -> Units<'a> {
    let mut out = Units::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(String::as_str).collect()).or_default() += 1;
    }
    out
}

fn skip_units<'a>(tokens: &'a [String], config: &RougeConfig) -> Units<'a> {
    let mut out = Units::new();
    for i in 0..tokens.len() {
        let end = (i + config.skip_distance + 2).min(tokens.len());
        for j in i + 1..end {
            *out.entry(vec![tokens[i].as_str(), tokens[j].as_str()]).or_default() += 1;
        }
        if config.include_unigrams {
            *out.entry(vec![tokens[i].as_str()]).or_default() += 1;
        }
    }
    out
}

fn truncate<'a>(candidate: &'a [String], config: &RougeConfig) -> &'a [String] {
    match config.length_limit {
        Some(limit) if candidate.len() > limit => &candidate[..limit],
        _ => candidate,
    }
}

fn f_measure(recall: f64, precision: f64, alpha: f64) -> f64 {
    if recall <= 0.0 || precision <= 0.0 {
        return 0.0;
    }
    recall * precision / ((1.0 - alpha) * precision + alpha * recall)
}

fn score_units<'a>(candidate: &Units<'a>, references: &[Units<'a>], config: &RougeConfig) -> Result<RougeScore> {
    let cand_total: u32 = candidate.values().sum();
    let (mut recall, mut precision, mut used) = (0.0, 0.0, 0usize);
    for reference in references {
        let ref_total: u32 = reference.values().sum();
        if ref_total == 0 {
            continue;
        }
        let hits: u32 = reference
            .iter()
            .map(|(unit, &rc)| candidate.get(unit).map_or(0, |&cc| cc.min(rc)))
            .sum();
        recall += f64::from(hits) / f64::from(ref_total);
        if cand_total > 0 {
            precision += f64::from(hits) / f64::from(cand_total);
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::Validation("every reference summary is empty".into()));
    }
    let recall = recall / used as f64;
    let precision = precision / used as f64;
    Ok(RougeScore {
        recall,
        precision,
        f: f_measure(recall, precision, config.f_alpha),
    })
}

/// ROUGE-N for `n` in {1, 2}.
pub fn rouge_n(candidate: &[String], references: &[Vec<String>], n: usize, config: &RougeConfig) -> Result<RougeScore> {
    if !(1..=2).contains(&n) {
        return Err(Error::Validation(format!("ROUGE-N supports n = 1 or 2, got {n}")));
    }
    let cand = ngrams(truncate(candidate, config), n);
    let refs: Vec<Units> = references.iter().map(|r| ngrams(r, n)).collect();
    score_units(&cand, &refs, config)
}

/// ROUGE-SU with the configured skip distance (ROUGE-SU4 by default).
pub fn rouge_su4(candidate: &[String], references: &[Vec<String>], config: &RougeConfig) -> Result<RougeScore> {
    let cand = skip_units(truncate(candidate, config), config);
    let refs: Vec<Units> = references.iter().map(|r| skip_units(r, config)).collect();
    score_units(&cand, &refs, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeReport {
    pub rouge_1: RougeScore,
    pub rouge_2: RougeScore,
    pub rouge_su4: RougeScore,
}

impl RougeReport {
    pub fn metrics(&self) -> [(&'static str, RougeScore); 3] {
        [
            ("ROUGE-1", self.rouge_1),
            ("ROUGE-2", self.rouge_2),
            ("ROUGE-SU4", self.rouge_su4),
        ]
    }
}

/// Tokenizes raw texts and computes all three metrics.
pub fn evaluate(candidate: &str, references: &[String], config: &RougeConfig) -> Result<RougeReport> {
    let cand = tokenize(candidate, config);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r, config)).collect();
    Ok(RougeReport {
        rouge_1: rouge_n(&cand, &refs, 1, config)?,
        rouge_2: rouge_n(&cand, &refs, 2, config)?,
        rouge_su4: rouge_su4(&cand, &refs, config)?,
    })
}
