//! Shared fixtures and independent oracles for the integration suites.
//!
//! Oracles here deliberately avoid the library's internal helpers: the BM25
//! oracle scores every document with raw loops, and the metric oracle counts
//! its own confusion matrix.

use claimcheck_core::corpus::Document;

/// Fixed vocabulary for the deterministic fixture corpus.
pub const WORDS: [&str; 40] = [
    "heron", "basalt", "violet", "archive", "meadow", "copper", "lantern", "orchid", "timber",
    "harbor", "falcon", "granite", "saffron", "ledger", "prairie", "cobalt", "beacon", "juniper",
    "walnut", "quarry", "osprey", "marble", "indigo", "scroll", "thicket", "bronze", "signal",
    "laurel", "cedar", "jetty", "kestrel", "slate", "amber", "codex", "fenland", "nickel",
    "pharos", "myrtle", "rowan", "wharf",
];

/// 100 deterministic documents built from [`WORDS`] by index arithmetic.
/// No randomness: the corpus is reproducible by construction.
pub fn fixture_corpus(n: usize) -> Vec<Document> {
    (0..n)
        .map(|i| {
            let len = 5 + (i * 7) % 11;
            let words: Vec<&str> = (0..len)
                .map(|j| WORDS[(i * 7 + j * 3 + (i % 5) * j) % WORDS.len()])
                .collect();
            Document {
                doc_id: format!("D{i:03}"),
                title: format!("{} {}", WORDS[i % WORDS.len()], WORDS[(i * 11 + 5) % WORDS.len()]),
                text: words.join(" "),
            }
        })
        .collect()
}

/// 20 fixed queries: present terms, absent terms, duplicates, punctuation.
pub fn fixture_queries() -> Vec<String> {
    let mut queries: Vec<String> = (0..17)
        .map(|q: usize| {
            let a = WORDS[(q * 5) % WORDS.len()];
            let b = WORDS[(q * 13 + 7) % WORDS.len()];
            let c = WORDS[(q * 3 + 21) % WORDS.len()];
            match q % 4 {
                0 => format!("{a} {b}"),
                1 => format!("{a}, {b}! {c}"),
                2 => format!("{a} {a} {b}"), // duplicated term
                _ => format!("{a} {b} {c}"),
            }
        })
        .collect();
    queries.push("zzz-unseen-term heron".into());
    queries.push("completely absent tokens".into());
    queries.push("Copper HARBOR ledger".into());
    queries
}

/// Brute-force BM25: scores every document directly from the formula,
/// filters zero scores, and sorts by (score desc, doc_id asc).
///
/// Query terms form a multiset: a term repeated in the query contributes
/// once per occurrence.
pub fn bm25_oracle(
    docs: &[Document],
    index_title_and_body: bool,
    query: &str,
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    fn toks(s: &str) -> Vec<String> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    }
    let texts: Vec<String> = docs
        .iter()
        .map(|d| {
            if index_title_and_body {
                format!("{} {}", d.title, d.text)
            } else {
                d.text.clone()
            }
        })
        .collect();
    let doc_tokens: Vec<Vec<String>> = texts.iter().map(|t| toks(t)).collect();
    let n = docs.len() as f64;
    let avgdl = doc_tokens.iter().map(|t| t.len() as f64).sum::<f64>() / n;
    let query_terms = toks(query);

    let mut scored: Vec<(String, f64)> = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        let dl = doc_tokens[i].len() as f64;
        let mut score = 0.0;
        for term in &query_terms {
            let tf = doc_tokens[i].iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = doc_tokens
                .iter()
                .filter(|tokens| tokens.contains(term))
                .count() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if score > 0.0 {
            scored.push((doc.doc_id.clone(), score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

/// Independent per-class confusion counts.
pub struct OracleConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

pub fn oracle_confusion(preds: &[bool], golds: &[bool], class: bool) -> OracleConfusion {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for i in 0..preds.len() {
        if preds[i] == class && golds[i] == class {
            tp += 1;
        }
        if preds[i] == class && golds[i] != class {
            fp += 1;
        }
        if preds[i] != class && golds[i] == class {
            fn_ += 1;
        }
    }
    OracleConfusion { tp, fp, fn_ }
}

/// Macro F1 from independently counted confusion matrices; per-class F1 is
/// 0 when the class never appears in predictions or golds.
pub fn oracle_macro_f1(preds: &[bool], golds: &[bool]) -> f64 {
    let f1 = |class: bool| {
        let c = oracle_confusion(preds, golds, class);
        let denom = 2 * c.tp + c.fp + c.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * c.tp as f64 / denom as f64
        }
    };
    (f1(true) + f1(false)) / 2.0
}

/// Balanced accuracy from independent counts; `None` when a class has no
/// gold support.
pub fn oracle_bacc(preds: &[bool], golds: &[bool]) -> Option<f64> {
    let recall = |class: bool| {
        let c = oracle_confusion(preds, golds, class);
        if c.tp + c.fn_ == 0 {
            None
        } else {
            Some(c.tp as f64 / (c.tp + c.fn_) as f64)
        }
    };
    Some((recall(true)? + recall(false)?) / 2.0)
}
