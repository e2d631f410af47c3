//! Document corpus, BM25 inverted index, and top-k retrieval.
//!
//! The index is built once from a corpus and immutable afterwards, so it can
//! be shared freely across threads. Scoring uses the Robertson/Spärck Jones
//! BM25 formula with `idf = ln((N - df + 0.5) / (df + 0.5) + 1)`; the `+ 1`
//! keeps idf nonnegative on small corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic header identifying a persisted index artifact (format version 1).
const INDEX_MAGIC: &[u8] = b"CLMCK-IDX-V1\n";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate doc_id `{0}` in corpus")]
    DuplicateDocId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document `{0}` violates corpus invariants: {1}")]
    InvalidDocument(String, String),
    #[error("query tokenizes to nothing")]
    EmptyQuery,
    #[error("gold document set is empty")]
    EmptyGold,
    #[error("corpus line {0}: {1}")]
    Format(usize, String),
    #[error("not an index artifact (bad magic header)")]
    BadMagic,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One retrievable unit of evidence. `text` holds the paragraph body.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

/// Which document fields a query is matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QueryFields {
    #[default]
    TitleAndBody,
    Body,
    Title,
}

/// BM25 parameters plus the retrieval depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Term-frequency saturation.
    pub k1: f64,
    /// Document-length normalization, in `[0, 1]`.
    pub b: f64,
    /// Number of documents returned per retrieval.
    pub top_k: usize,
    /// Fields indexed for matching.
    pub query_fields: QueryFields,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k1: 0.9,
            b: 0.4,
            top_k: 10,
            query_fields: QueryFields::TitleAndBody,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k1 < 0.0 {
            return Err(format!("k1 must be >= 0, got {}", self.k1));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(format!("b must be in [0, 1], got {}", self.b));
        }
        if self.top_k == 0 {
            return Err("top_k must be >= 1".into());
        }
        Ok(())
    }
}

/// A single retrieval result. Result lists are sorted by descending score,
/// ties broken by ascending `doc_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub doc_id: String,
    pub score: f64,
}

/// Lowercases and splits on any non-alphanumeric character, dropping empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Posting {
    /// Ordinal into `docs`.
    doc: u32,
    /// Term frequency within that document.
    tf: u32,
}

/// Immutable BM25 index over a corpus.
///
/// All maps are `BTreeMap`s so serialization (and thus the persisted
/// artifact) is byte-deterministic for a given corpus and config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Index {
    config: RetrievalConfig,
    docs: Vec<Document>,
    /// Token count of each document's indexed text.
    doc_lens: Vec<u32>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl Index {
    /// Builds the index. Fails on an empty corpus, a duplicate `doc_id`, or a
    /// document with an empty id or body.
    pub fn build(docs: Vec<Document>, config: RetrievalConfig) -> Result<Self, CorpusError> {
        config
            .validate()
            .map_err(|m| CorpusError::InvalidDocument("<config>".into(), m))?;
        if docs.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        for doc in &docs {
            if doc.doc_id.is_empty() {
                return Err(CorpusError::InvalidDocument(
                    doc.title.clone(),
                    "empty doc_id".into(),
                ));
            }
            if doc.text.is_empty() {
                return Err(CorpusError::InvalidDocument(
                    doc.doc_id.clone(),
                    "empty text".into(),
                ));
            }
            if !seen.insert(doc.doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId(doc.doc_id.clone()));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (ord, doc) in docs.iter().enumerate() {
            let tokens = tokenize(&indexed_text(doc, config.query_fields));
            doc_lens.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for tok in tokens {
                *counts.entry(tok).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting {
                    doc: ord as u32,
                    tf,
                });
            }
        }
        let avgdl = doc_lens.iter().map(|&l| l as f64).sum::<f64>() / docs.len() as f64;
        Ok(Self {
            config,
            docs,
            doc_lens,
            avgdl,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn config(&self) -> &RetrievalConfig {
        &self.config
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Document frequency of a term, as counted at build time.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        ((n - df as f64 + 0.5) / (df as f64 + 0.5) + 1.0).ln()
    }

    /// Scores every document containing at least one query term and returns
    /// the top `k` hits. Zero-score documents never appear.
    pub fn retrieve_topk(&self, query: &str, k: usize) -> Result<Vec<RankedHit>, CorpusError> {
        let terms = tokenize(query);
        if terms.is_empty() {
            return Err(CorpusError::EmptyQuery);
        }
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for term in &terms {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for p in postings {
                let tf = p.tf as f64;
                let dl = self.doc_lens[p.doc as usize] as f64;
                let denom = tf + self.config.k1 * (1.0 - self.config.b + self.config.b * dl / self.avgdl);
                let contrib = idf * tf * (self.config.k1 + 1.0) / denom;
                *scores.entry(p.doc).or_insert(0.0) += contrib;
            }
        }
        let mut hits: Vec<RankedHit> = scores
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(ord, score)| RankedHit {
                doc_id: self.docs[ord as usize].doc_id.clone(),
                score,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("BM25 scores are finite")
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        hits.truncate(k);
        Ok(hits)
    }

    /// Convenience: retrieval at the configured depth.
    pub fn retrieve(&self, query: &str) -> Result<Vec<RankedHit>, CorpusError> {
        self.retrieve_topk(query, self.config.top_k)
    }

    /// Persists the index as a single artifact: magic header then JSON.
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut out = Vec::from(INDEX_MAGIC);
        out.extend_from_slice(
            serde_json::to_string(self)
                .expect("index serializes")
                .as_bytes(),
        );
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path)?;
        let Some(body) = bytes.strip_prefix(INDEX_MAGIC) else {
            return Err(CorpusError::BadMagic);
        };
        serde_json::from_slice(body).map_err(|e| CorpusError::Format(0, e.to_string()))
    }
}

fn indexed_text(doc: &Document, fields: QueryFields) -> String {
    match fields {
        QueryFields::TitleAndBody => format!("{} {}", doc.title, doc.text),
        QueryFields::Body => doc.text.clone(),
        QueryFields::Title => doc.title.clone(),
    }
}

/// Fraction of gold documents present in the retrieved set.
pub fn recall_at_k(
    retrieved: &BTreeSet<String>,
    gold: &BTreeSet<String>,
) -> Result<f64, CorpusError> {
    if gold.is_empty() {
        return Err(CorpusError::EmptyGold);
    }
    let hit = gold.intersection(retrieved).count();
    Ok(hit as f64 / gold.len() as f64)
}

/// Reads a JSON-lines corpus: one object per line with `id`, `title`, `text`.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    #[derive(Deserialize)]
    struct Record {
        id: String,
        #[serde(default)]
        title: String,
        text: String,
    }
    let file = std::fs::File::open(path)?;
    let mut docs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(&line).map_err(|e| CorpusError::Format(i + 1, e.to_string()))?;
        docs.push(Document {
            doc_id: rec.id,
            title: rec.title,
            text: rec.text,
        });
    }
    Ok(docs)
}
