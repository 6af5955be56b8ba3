use serde::{Deserialize, Serialize};

use super::{encode_bio, normalize_post, tokenize, AnnotatedPost, CharSpan, Tag};
use crate::{Error, Result};

/// A post after normalization, tokenization and BIO encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessedPost {
    pub id: String,
    /// Normalized text; offsets below refer to it.
    pub text: String,
    pub spans: Vec<CharSpan>,
    pub tokens: Vec<String>,
    /// One character per token, from `B`, `I` and `O`.
    pub tags: String,
}

pub fn process_post(post: &AnnotatedPost) -> Result<ProcessedPost> {
    let norm = normalize_post(post).map_err(|e| Error::Input(format!("post {}: {e}", post.id)))?;
    let tokens = tokenize(&norm.text);
    let tags = encode_bio(&tokens, &norm.spans)?;
    Ok(ProcessedPost {
        id: norm.id,
        text: norm.text,
        spans: norm.spans,
        tokens: tokens.into_iter().map(|t| t.surface).collect(),
        tags: tags.iter().map(|t| t.as_char()).collect(),
    })
}

/// Corpus statistics; lengths are in tokens.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub posts: usize,
    pub spans: usize,
    pub avg_post_length: f64,
    pub avg_span_length: f64,
    pub spans_per_post: f64,
    pub single_span_posts: usize,
    pub multi_span_posts: usize,
    pub no_span_posts: usize,
}

impl CorpusStats {
    pub fn from_processed(posts: &[ProcessedPost]) -> Self {
        let mut s = CorpusStats { posts: posts.len(), ..Self::default() };
        if posts.is_empty() {
            return s;
        }
        let mut tokens = 0;
        let mut span_tokens = 0;
        for p in posts {
            tokens += p.tokens.len();
            let n = p.tags.chars().filter(|&c| c == Tag::B.as_char()).count();
            span_tokens += p.tags.chars().filter(|&c| c != Tag::O.as_char()).count();
            s.spans += n;
            match n {
                0 => s.no_span_posts += 1,
                1 => s.single_span_posts += 1,
                _ => s.multi_span_posts += 1,
            }
        }
        s.avg_post_length = tokens as f64 / posts.len() as f64;
        s.avg_span_length = if s.spans == 0 { 0.0 } else { span_tokens as f64 / s.spans as f64 };
        s.spans_per_post = s.spans as f64 / posts.len() as f64;
        s
    }
}
