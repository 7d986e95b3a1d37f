//! Topic and document ingestion, the English analysis chain, and candidate
//! pruning.
//!
//! Documents arrive pre-segmented into sentences. Each sentence keeps its raw
//! text (for output and word-count budgets) alongside its analyzed unigrams
//! and bigrams, interned into a vocabulary shared by the whole topic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{bhattacharyya, Bigram, TermId, TermVector, UnigramLM};

/// Default number of candidate sentences kept after pruning.
pub const DEFAULT_PRUNE_K: usize = 150;

/// Lucene's classic English stop set.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzerConfig {
    pub stopwords: BTreeSet<String>,
    pub stemming: bool,
    pub lowercase: bool,
    /// Form bigrams after stop-word removal (true) or over the stemmed
    /// token stream with stop-words still in place (false).
    pub bigrams_after_stopwords: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            stopwords: ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            stemming: true,
            lowercase: true,
            bigrams_after_stopwords: true,
        }
    }
}

struct RawToken {
    term: String,
    stop: bool,
}

fn tokenize(text: &str, config: &AnalyzerConfig) -> Vec<RawToken> {
    let mut out = Vec::new();
    for piece in text.split(|c: char| !c.is_alphanumeric() && c != '\'' && c != '\u{2019}') {
        // Possessives go first, then any remaining apostrophes split the word.
        let piece = piece
            .strip_suffix("'s")
            .or_else(|| piece.strip_suffix("'S"))
            .or_else(|| piece.strip_suffix("\u{2019}s"))
            .unwrap_or(piece);
        for word in piece.split(['\'', '\u{2019}']).filter(|w| !w.is_empty()) {
            let word = if config.lowercase {
                word.to_lowercase()
            } else {
                word.to_string()
            };
            let stop = config.stopwords.contains(&word);
            let term = if config.stemming && !stop && word.bytes().all(|b| b.is_ascii_alphabetic()) {
                porter_stemmer::stem(&word)
            } else {
                word
            };
            out.push(RawToken { term, stop });
        }
    }
    out
}

/// Runs the analysis chain: tokenize, drop possessives, lowercase, remove
/// stop-words, Porter-stem.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    tokenize(text, config)
        .into_iter()
        .filter(|t| !t.stop)
        .map(|t| t.term)
        .collect()
}

/// Number of whitespace-delimited words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Bidirectional term ↔ id map for one topic.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    terms: IndexSet<String>,
}

impl Vocabulary {
    pub fn intern(&mut self, term: &str) -> TermId {
        if let Some(i) = self.terms.get_index_of(term) {
            return TermId(i as u32);
        }
        let (i, _) = self.terms.insert_full(term.to_string());
        TermId(i as u32)
    }

    pub fn get(&self, term: &str) -> Option<TermId> {
        self.terms.get_index_of(term).map(|i| TermId(i as u32))
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Sentence {
    pub id: String,
    pub doc_id: String,
    pub raw_text: String,
    /// Start of the sentence within its document, in characters.
    pub char_offset: usize,
    pub word_count: usize,
    pub tokens: Vec<TermId>,
    pub bigrams: Vec<Bigram>,
    pub unigram_vector: TermVector<TermId>,
    pub bigram_vector: TermVector<Bigram>,
}

impl Sentence {
    /// Deterministic tie-break key.
    pub fn order_key(&self) -> (&str, usize) {
        (&self.doc_id, self.char_offset)
    }

    pub fn lm(&self) -> UnigramLM {
        UnigramLM::from_vector(&self.unigram_vector)
    }
}

#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone)]
pub struct DocumentSet {
    pub topic_id: String,
    pub documents: Vec<Document>,
    pub vocabulary: Vocabulary,
    pub centroid_unigrams: TermVector<TermId>,
    pub centroid_bigrams: TermVector<Bigram>,
    pub lm: UnigramLM,
}

impl DocumentSet {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Topic {
    pub topic_id: String,
    pub title: String,
    pub questions: Vec<String>,
    /// Raw related terms per question, in provider rank order.
    pub expansion_terms: Vec<Vec<String>>,
    /// Analyzed `title + question` per question.
    pub question_tokens: Vec<Vec<TermId>>,
    /// Analyzed form of each raw expansion term, per question.
    pub expansion_tokens: Vec<Vec<Vec<TermId>>>,
}

impl Topic {
    /// Analyzed sub-query `i`: title and question tokens followed by the
    /// tokens of at most `max_expansion` expansion terms.
    pub fn subquery_terms(&self, i: usize, max_expansion: usize) -> Vec<TermId> {
        let mut terms = self.question_tokens[i].clone();
        for tokens in self.expansion_tokens[i].iter().take(max_expansion) {
            terms.extend_from_slice(tokens);
        }
        terms
    }
}

/// On-disk corpus format: one topic per JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusFile {
    pub topic_id: String,
    pub title: String,
    pub questions: Vec<String>,
    /// Keyed by question index (as a decimal string).
    #[serde(default)]
    pub expansion_terms: BTreeMap<String, Vec<String>>,
    pub documents: Vec<DocumentFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentFile {
    pub doc_id: String,
    pub sentences: Vec<String>,
}

impl CorpusFile {
    pub fn from_json(json: &str, context: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let message = e.inner().to_string();
            // A missing field is reported against its parent; name the field itself.
            let field = match message.strip_prefix("missing field `") {
                Some(rest) => {
                    let name = rest.split('`').next().unwrap_or_default();
                    if field == "." {
                        name.to_string()
                    } else {
                        format!("{field}.{name}")
                    }
                }
                None => field,
            };
            Error::schema(context, field, message)
        })
    }
}

/// Reads and analyzes a corpus file with the default analyzer.
pub fn load_corpus(path: &Path) -> Result<(Topic, DocumentSet)> {
    load_corpus_with(path, &AnalyzerConfig::default())
}

pub fn load_corpus_with(path: &Path, config: &AnalyzerConfig) -> Result<(Topic, DocumentSet)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let file = CorpusFile::from_json(text, &path.display().to_string())?;
    build_corpus(&file, config)
}

/// Validates a parsed corpus and runs the analysis chain over it.
pub fn build_corpus(file: &CorpusFile, config: &AnalyzerConfig) -> Result<(Topic, DocumentSet)> {
    let ctx = format!("topic {}", file.topic_id);
    if file.questions.is_empty() {
        return Err(Error::schema(&ctx, "questions", "at least one question is required"));
    }
    if file.documents.is_empty() {
        return Err(Error::Validation(format!("{ctx}: document set is empty")));
    }

    let mut vocab = Vocabulary::default();
    let mut seen_docs = HashSet::new();
    let mut documents = Vec::with_capacity(file.documents.len());
    for (di, doc) in file.documents.iter().enumerate() {
        if !seen_docs.insert(doc.doc_id.as_str()) {
            return Err(Error::Validation(format!("{ctx}: duplicate doc_id {:?}", doc.doc_id)));
        }
        if doc.sentences.is_empty() {
            return Err(Error::Validation(format!(
                "{ctx}: document {:?} has no sentences",
                doc.doc_id
            )));
        }
        let mut offset = 0;
        let mut sentences = Vec::with_capacity(doc.sentences.len());
        for (si, raw) in doc.sentences.iter().enumerate() {
            let words = word_count(raw);
            if words == 0 {
                return Err(Error::schema(
                    &ctx,
                    format!("documents[{di}].sentences[{si}]"),
                    "sentence has no words",
                ));
            }
            sentences.push(analyze_sentence(
                &mut vocab,
                config,
                format!("{}:{si}", doc.doc_id),
                &doc.doc_id,
                raw,
                offset,
                words,
            ));
            // Sentences are laid out back to back, separated by one character.
            offset += raw.chars().count() + 1;
        }
        documents.push(Document {
            doc_id: doc.doc_id.clone(),
            sentences,
        });
    }

    let mut question_tokens = Vec::with_capacity(file.questions.len());
    let mut expansion_terms = vec![Vec::new(); file.questions.len()];
    for question in &file.questions {
        let text = format!("{} {}", file.title, question);
        question_tokens.push(analyze(&text, config).iter().map(|t| vocab.intern(t)).collect());
    }
    for (key, terms) in &file.expansion_terms {
        let idx: usize = key
            .parse()
            .ok()
            .filter(|&i| i < file.questions.len())
            .ok_or_else(|| {
                Error::schema(
                    &ctx,
                    format!("expansion_terms.{key}"),
                    "key must be the index of an existing question",
                )
            })?;
        expansion_terms[idx] = terms.clone();
    }
    let expansion_tokens = expansion_terms
        .iter()
        .map(|terms| {
            terms
                .iter()
                .map(|t| analyze(t, config).iter().map(|w| vocab.intern(w)).collect())
                .collect()
        })
        .collect();

    let all: Vec<&Sentence> = documents.iter().flat_map(|d| d.sentences.iter()).collect();
    let centroid_unigrams = TermVector::sum(all.iter().map(|s| &s.unigram_vector));
    let centroid_bigrams = TermVector::sum(all.iter().map(|s| &s.bigram_vector));
    let lm = UnigramLM::from_vector(&centroid_unigrams);

    let topic = Topic {
        topic_id: file.topic_id.clone(),
        title: file.title.clone(),
        questions: file.questions.clone(),
        expansion_terms,
        question_tokens,
        expansion_tokens,
    };
    let docs = DocumentSet {
        topic_id: file.topic_id.clone(),
        documents,
        vocabulary: vocab,
        centroid_unigrams,
        centroid_bigrams,
        lm,
    };
    Ok((topic, docs))
}

fn analyze_sentence(
    vocab: &mut Vocabulary,
    config: &AnalyzerConfig,
    id: String,
    doc_id: &str,
    raw: &str,
    char_offset: usize,
    word_count: usize,
) -> Sentence {
    let stream: Vec<(TermId, bool)> = tokenize(raw, config)
        .into_iter()
        .map(|t| (vocab.intern(&t.term), t.stop))
        .collect();
    let tokens: Vec<TermId> = stream.iter().filter(|(_, stop)| !stop).map(|&(t, _)| t).collect();
    let bigrams: Vec<Bigram> = if config.bigrams_after_stopwords {
        tokens.windows(2).map(|w| Bigram(w[0], w[1])).collect()
    } else {
        stream.windows(2).map(|w| Bigram(w[0].0, w[1].0)).collect()
    };
    Sentence {
        id,
        doc_id: doc_id.to_string(),
        raw_text: raw.to_string(),
        char_offset,
        word_count,
        unigram_vector: TermVector::from_terms(tokens.iter().copied()),
        bigram_vector: TermVector::from_terms(bigrams.iter().copied()),
        tokens,
        bigrams,
    }
}

/// Unigram model of all sub-queries of a topic taken together.
pub fn topic_query_lm(topic: &Topic, max_expansion: usize) -> UnigramLM {
    let terms = (0..topic.questions.len()).flat_map(|i| topic.subquery_terms(i, max_expansion));
    UnigramLM::from_vector(&TermVector::from_terms(terms))
}

/// Keeps the `k` sentences most similar (Bhattacharyya) to the combined topic
/// query, best first. Ties fall back to `(doc_id, char_offset)`.
pub fn prune_candidates(docs: &DocumentSet, topic: &Topic, k: usize) -> Vec<Sentence> {
    prune_with_lm(docs, &topic_query_lm(topic, crate::cascade::DEFAULT_EXPANSION_TERMS), k)
}

pub fn prune_with_lm(docs: &DocumentSet, query_lm: &UnigramLM, k: usize) -> Vec<Sentence> {
    let mut scored: Vec<(f64, &Sentence)> = docs
        .sentences()
        .map(|s| (bhattacharyya(query_lm, &s.lm()), s))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.order_key().cmp(&b.1.order_key())));
    scored.into_iter().take(k).map(|(_, s)| s.clone()).collect()
}
