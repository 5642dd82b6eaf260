//! Keyword lookup over the bundled documentation.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const SNIPPET_CHARS: usize = 512;
pub const DEFAULT_K: usize = 5;

const DOCS_JSON: &str = include_str!("../../schemas/docs.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Doc {
    pub id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocHit {
    pub id: String,
    pub title: String,
    pub score: usize,
    pub snippet: String,
}

pub fn corpus() -> &'static [Doc] {
    static DOCS: OnceLock<Vec<Doc>> = OnceLock::new();
    DOCS.get_or_init(|| serde_json::from_str(DOCS_JSON).expect("bundled docs.json is valid"))
}

/// Lower-cased alphanumeric runs; underscores stay inside a token.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Sum over distinct query tokens of their frequency in the document.
pub fn score(query_tokens: &[String], doc: &Doc) -> usize {
    let mut tf: HashMap<String, usize> = HashMap::new();
    for t in tokenize(&doc.title).into_iter().chain(tokenize(&doc.text)) {
        *tf.entry(t).or_default() += 1;
    }
    let mut seen: Vec<&String> = Vec::new();
    let mut total = 0;
    for t in query_tokens {
        if !seen.contains(&t) {
            seen.push(t);
            total += tf.get(t).copied().unwrap_or(0);
        }
    }
    total
}

fn snippet(text: &str) -> String {
    match text.char_indices().nth(SNIPPET_CHARS) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// Top `k` documents by score, ties broken by id. An empty query matches nothing.
pub fn lookup(docs: &[Doc], query: &str, k: usize) -> Vec<DocHit> {
    let q = tokenize(query);
    if q.is_empty() {
        return Vec::new();
    }
    let mut scored: Vec<(usize, &Doc)> = docs.iter().map(|d| (score(&q, d), d)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    scored
        .into_iter()
        .take(k.max(1))
        .map(|(score, d)| DocHit { id: d.id.clone(), title: d.title.clone(), score, snippet: snippet(&d.text) })
        .collect()
}
