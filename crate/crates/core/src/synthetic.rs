//! Seeded generator for a small query-focused summarization benchmark.
//!
//! Each topic mixes several themes. Every theme owns a set of content words
//! and recurring two-word phrases. A few themes answer the topic's questions
//! ("query themes"); others dominate the document set without being asked
//! about ("salient themes"); the rest are background. Reference summaries
//! draw from both query and salient themes, the content a good focused yet
//! salient summary should carry.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusFile, DocumentFile};
use crate::rouge::ReferenceFile;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub documents: usize,
    pub sentences_per_document: usize,
    pub references: usize,
    pub reference_words: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            topics: 20,
            documents: 12,
            sentences_per_document: 14,
            references: 4,
            reference_words: 250,
            seed: 2018,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTopic {
    pub corpus: CorpusFile,
    pub references: ReferenceFile,
}

const STOPWORDS: &[&str] = &["the", "of", "and", "in", "a", "to", "was", "for", "with", "is", "on", "by", "that", "as"];
const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "st", "tr"];
const NUCLEI: &[&str] = &["a", "o", "u", "i"];
const THEME_WORDS: usize = 40;
const THEME_PHRASES: usize = 10;
const FILLER_WORDS: usize = 600;
const CODA_VOWELS: &[&str] = &["a", "o"];

/// How a theme relates to the topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Query,
    Salient,
    Background,
}

struct Theme {
    role: Role,
    weight: f64,
    words: Vec<String>,
    phrases: Vec<(String, String)>,
}

struct TopicModel {
    themes: Vec<Theme>,
    query_words: Vec<String>,
    filler: Vec<String>,
}

fn pseudo_word<R: Rng>(rng: &mut R, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for i in 0..syllables {
            w.push_str(ONSETS.choose(rng).unwrap());
            let nuclei = if i + 1 == syllables { CODA_VOWELS } else { NUCLEI };
            w.push_str(nuclei.choose(rng).unwrap());
        }
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn words<R: Rng>(rng: &mut R, used: &mut HashSet<String>, n: usize) -> Vec<String> {
    (0..n).map(|_| pseudo_word(rng, used)).collect()
}

fn build_model<R: Rng>(rng: &mut R) -> TopicModel {
    let mut used = HashSet::new();
    let roles = [
        (Role::Query, 0.13),
        (Role::Query, 0.10),
        (Role::Salient, 0.24),
        (Role::Salient, 0.20),
        (Role::Background, 0.06),
        (Role::Background, 0.06),
        (Role::Background, 0.055),
        (Role::Background, 0.055),
        (Role::Background, 0.05),
        (Role::Background, 0.05),
    ];
    let themes = roles
        .iter()
        .map(|&(role, weight)| {
            let ws = words(rng, &mut used, THEME_WORDS);
            let phrases = (0..THEME_PHRASES)
                .map(|_| {
                    let a = ws.choose(rng).unwrap().clone();
                    let b = loop {
                        let b = ws.choose(rng).unwrap();
                        if *b != a {
                            break b.clone();
                        }
                    };
                    (a, b)
                })
                .collect();
            Theme {
                role,
                weight,
                words: ws,
                phrases,
            }
        })
        .collect();
    TopicModel {
        themes,
        query_words: words(rng, &mut used, 8),
        filler: words(rng, &mut used, FILLER_WORDS),
    }
}

/// Zipf-like pick favouring the front of the list.
fn skewed<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    let u: f64 = rng.gen();
    let i = ((u * u) * items.len() as f64) as usize;
    &items[i.min(items.len() - 1)]
}

fn pick_theme<R: Rng>(rng: &mut R, model: &TopicModel, lead: bool) -> usize {
    let weight = |t: &Theme| match (lead, t.role) {
        (true, Role::Salient) => t.weight * 2.5,
        _ => t.weight,
    };
    let total: f64 = model.themes.iter().map(weight).sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, t) in model.themes.iter().enumerate() {
        u -= weight(t);
        if u <= 0.0 {
            return i;
        }
    }
    model.themes.len() - 1
}

fn sentence<R: Rng>(rng: &mut R, model: &TopicModel, theme: usize, query_boost: f64) -> String {
    let t = &model.themes[theme];
    let target = rng.gen_range(10..=30);
    let mut out: Vec<String> = Vec::with_capacity(target + 4);
    let query_rate = match t.role {
        Role::Query => 0.22 * query_boost,
        Role::Salient => 0.03,
        Role::Background => 0.01,
    };
    while out.len() < target {
        let r: f64 = rng.gen();
        if r < 0.16 {
            let (a, b) = t.phrases.choose(rng).unwrap();
            out.push(a.clone());
            out.push(b.clone());
        } else if r < 0.16 + query_rate {
            let q = match t.role {
                Role::Query => {
                    // Each query theme answers its own half of the query words.
                    let half = model.query_words.len() / 2;
                    let k = theme.min(1);
                    model.query_words[k * half + rng.gen_range(0..half)].clone()
                }
                _ => model.query_words.choose(rng).unwrap().clone(),
            };
            out.push(q);
        } else if r < 0.62 {
            out.push(skewed(rng, &t.words).to_string());
        } else if r < 0.78 {
            out.push(skewed(rng, &model.filler).to_string());
        } else {
            out.push(STOPWORDS.choose(rng).unwrap().to_string());
        }
    }
    let mut text = out.join(" ");
    if let Some(first) = text.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    text.push('.');
    text
}

fn generate_topic(index: usize, config: &SyntheticConfig) -> SyntheticTopic {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let model = build_model(&mut rng);
    let topic_id = format!("S{:03}", index + 1);

    let half = model.query_words.len() / 2;
    let title = format!("{} {}", model.query_words[0], model.query_words[half]);
    let questions = vec![
        format!(
            "What is known about the {} of {} and {}?",
            model.query_words[1], model.query_words[2], model.query_words[3]
        ),
        format!(
            "Describe the {} and {} of {}.",
            model.query_words[half + 1],
            model.query_words[half + 2],
            model.query_words[half + 3]
        ),
    ];
    let mut expansion_terms = BTreeMap::new();
    for (qi, theme) in [0usize, 1].into_iter().enumerate() {
        let mut related: Vec<String> = model.themes[theme].words[..8].to_vec();
        related.extend(model.filler.choose_multiple(&mut rng, 4).cloned());
        expansion_terms.insert(qi.to_string(), related);
    }

    let documents = (0..config.documents)
        .map(|d| DocumentFile {
            doc_id: format!("{topic_id}.D{:02}", d + 1),
            sentences: (0..config.sentences_per_document)
                .map(|s| {
                    let theme = pick_theme(&mut rng, &model, s < 2);
                    sentence(&mut rng, &model, theme, 1.0)
                })
                .collect(),
        })
        .collect();

    let references = (0..config.references)
        .map(|_| {
            let mut text = String::new();
            let mut count = 0;
            let plan: Vec<usize> = model
                .themes
                .iter()
                .enumerate()
                .filter(|(_, t)| t.role != Role::Background)
                .map(|(i, _)| i)
                .collect();
            while count < config.reference_words {
                let theme = *plan.choose(&mut rng).unwrap();
                let s = sentence(&mut rng, &model, theme, 0.5);
                count += s.split_whitespace().count();
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(&s);
            }
            text
        })
        .collect();

    SyntheticTopic {
        corpus: CorpusFile {
            topic_id: topic_id.clone(),
            title,
            questions,
            expansion_terms,
            documents,
        },
        references: ReferenceFile { topic_id, references },
    }
}

/// The benchmark: `config.topics` independent topics, reproducible from
/// `config.seed`.
pub fn benchmark(config: &SyntheticConfig) -> Vec<SyntheticTopic> {
    (0..config.topics).map(|i| generate_topic(i, config)).collect()
}
