//! Okapi BM25 retrieval with P@k and nDCG@k, and the tweet-versus-span
//! query comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::preprocess::{normalize_text, tokenize, AnnotatedPost};
use crate::{Error, Result};

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercased word tokens after URL and noise removal. Punctuation tokens
/// are dropped.
pub fn index_terms(text: &str) -> Vec<String> {
    tokenize(&normalize_text(text).text)
        .into_iter()
        .filter(|t| t.surface.chars().any(char::is_alphanumeric))
        .map(|t| t.surface.to_lowercase())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bm25Index {
    pub k1: f64,
    pub b: f64,
    ids: Vec<String>,
    lengths: Vec<usize>,
    term_freqs: Vec<HashMap<String, usize>>,
    doc_freq: HashMap<String, usize>,
    avgdl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

impl Bm25Index {
    pub fn build(docs: &[Document], k1: f64, b: f64) -> Self {
        let mut ids = Vec::with_capacity(docs.len());
        let mut lengths = Vec::with_capacity(docs.len());
        let mut term_freqs = Vec::with_capacity(docs.len());
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let terms = index_terms(&doc.text);
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
            ids.push(doc.id.clone());
            lengths.push(terms.len());
            term_freqs.push(tf);
        }
        let total: usize = lengths.iter().sum();
        let avgdl = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
        Self { k1, b, ids, lengths, term_freqs, doc_freq, avgdl }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn doc_length(&self, doc: usize) -> usize {
        self.lengths[doc]
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Score of one document; repeated query terms count once per occurrence.
    pub fn score(&self, terms: &[String], doc: usize) -> f64 {
        let dl = self.lengths[doc] as f64;
        let norm = if self.avgdl > 0.0 { dl / self.avgdl } else { 0.0 };
        terms
            .iter()
            .map(|t| {
                let tf = self.term_freqs[doc].get(t).copied().unwrap_or(0) as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                self.idf(t) * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * norm))
            })
            .sum()
    }

    /// Top-`k` documents with a positive score, best first, ties broken by
    /// ascending document id.
    pub fn query(&self, text: &str, k: usize) -> Vec<Hit> {
        let terms = index_terms(text);
        let mut hits: Vec<Hit> = (0..self.len())
            .map(|d| Hit { id: self.ids[d].clone(), score: self.score(&terms, d) })
            .filter(|h| h.score > 0.0)
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        hits.truncate(k);
        hits
    }
}

/// A ranked list with binary relevance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub query_id: String,
    #[serde(default)]
    pub ranked: Vec<String>,
    pub relevant: Vec<String>,
}

impl Judgment {
    fn check(&self) -> Result<()> {
        let unique: BTreeSet<_> = self.ranked.iter().collect();
        if unique.len() != self.ranked.len() {
            return Err(Error::Input(format!("query {}: repeated document in ranking", self.query_id)));
        }
        Ok(())
    }

    fn gains(&self, k: usize) -> Vec<f64> {
        let rel: BTreeSet<&String> = self.relevant.iter().collect();
        self.ranked
            .iter()
            .take(k)
            .map(|d| if rel.contains(d) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Relevant documents in the top `k`, divided by `k`.
pub fn precision_at_k(j: &Judgment, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    j.gains(k).iter().sum::<f64>() / k as f64
}

fn dcg(gains: &[f64]) -> f64 {
    gains
        .iter()
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// Binary-relevance nDCG@k; the ideal ranking places every relevant
/// document first. Zero when nothing is relevant.
pub fn ndcg_at_k(j: &Judgment, k: usize) -> f64 {
    let n_rel: BTreeSet<&String> = j.relevant.iter().collect();
    let ideal = vec![1.0; n_rel.len().min(k)];
    let idcg = dcg(&ideal);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(&j.gains(k)) / idcg
}

pub fn parse_judgments(content: &str, source: &Path) -> Result<Vec<Judgment>> {
    let mut out = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = |message: String| Error::Record {
            path: source.to_path_buf(),
            line: n + 1,
            message,
        };
        let j: Judgment = serde_json::from_str(line).map_err(|e| record(e.to_string()))?;
        j.check().map_err(|e| record(e.to_string()))?;
        out.push(j);
    }
    Ok(out)
}

pub fn load_judgments(path: impl AsRef<Path>) -> Result<Vec<Judgment>> {
    let path = path.as_ref();
    parse_judgments(&crate::error::read_text(path)?, path)
}

pub fn parse_documents(content: &str, source: &Path) -> Result<Vec<Document>> {
    let mut out = Vec::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| Error::Record {
            path: source.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(doc);
    }
    Ok(out)
}

pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    parse_documents(&crate::error::read_text(path)?, path)
}

/// Mean P@k and nDCG@k for one query condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionScores {
    pub precision: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub k: Vec<usize>,
    pub n_queries: usize,
    pub tweets: ConditionScores,
    pub spans: ConditionScores,
}

impl RetrievalReport {
    pub fn render_table(&self) -> String {
        let mut header = format!("{:<8}", "query");
        for k in &self.k {
            header += &format!(" {:>8}", format!("P@{k}"));
        }
        for k in &self.k {
            header += &format!(" {:>8}", format!("nDCG@{k}"));
        }
        let row = |name: &str, c: &ConditionScores| {
            let mut s = format!("{name:<8}");
            for k in &self.k {
                s += &format!(" {:>8.4}", c.precision[k]);
            }
            for k in &self.k {
                s += &format!(" {:>8.4}", c.ndcg[k]);
            }
            s
        };
        format!("{header}\n{}\n{}\n", row("tweets", &self.tweets), row("spans", &self.spans))
    }
}

/// Text of the gold spans of a post joined by spaces.
pub fn span_query(post: &AnnotatedPost) -> String {
    post.spans
        .iter()
        .map(|s| s.slice(&post.text))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Runs every post as a tweet query and as a span query against the index
/// and scores both rankings with the relevance sets from `judgments`
/// (matched by post id). Posts without a judgment are an error.
pub fn compare_conditions(
    posts: &[AnnotatedPost],
    index: &Bm25Index,
    judgments: &[Judgment],
    k_list: &[usize],
) -> Result<RetrievalReport> {
    if posts.is_empty() {
        return Err(Error::Input("retrieval comparison needs at least one query post".into()));
    }
    let relevant: HashMap<&str, &Vec<String>> = judgments
        .iter()
        .map(|j| (j.query_id.as_str(), &j.relevant))
        .collect();
    let depth = k_list.iter().copied().max().unwrap_or(0);
    let mut tweet_j = Vec::with_capacity(posts.len());
    let mut span_j = Vec::with_capacity(posts.len());
    for post in posts {
        let rel = relevant
            .get(post.id.as_str())
            .ok_or_else(|| Error::Input(format!("no relevance judgment for post {}", post.id)))?;
        for (text, out) in [(post.text.clone(), &mut tweet_j), (span_query(post), &mut span_j)] {
            out.push(Judgment {
                query_id: post.id.clone(),
                ranked: index.query(&text, depth).into_iter().map(|h| h.id).collect(),
                relevant: (*rel).clone(),
            });
        }
    }
    let aggregate = |js: &[Judgment]| {
        let n = js.len() as f64;
        ConditionScores {
            precision: k_list
                .iter()
                .map(|&k| (k, js.iter().map(|j| precision_at_k(j, k)).sum::<f64>() / n))
                .collect(),
            ndcg: k_list
                .iter()
                .map(|&k| (k, js.iter().map(|j| ndcg_at_k(j, k)).sum::<f64>() / n))
                .collect(),
        }
    };
    Ok(RetrievalReport {
        k: k_list.to_vec(),
        n_queries: posts.len(),
        tweets: aggregate(&tweet_j),
        spans: aggregate(&span_j),
    })
}
