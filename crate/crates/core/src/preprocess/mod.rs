//! Text normalization, tokenization with character offsets, BIO encoding
//! and corpus I/O.
//!
//! All offsets in this module are character (Unicode scalar) indices, never
//! byte indices.

mod bio;
mod corpus;
mod normalize;
mod stats;
mod tokenize;

pub use bio::{decode_bio, encode_bio, Decoded, Tag, TagSequence};
pub use corpus::{load_corpus, parse_corpus, save_corpus, to_jsonl, validate_post};
pub use normalize::{normalize_post, normalize_text, Normalized};
pub use stats::{process_post, CorpusStats, ProcessedPost};
pub use tokenize::{split_hashtag, tokenize, Token};

use serde::{Deserialize, Serialize};

/// Half-open character range `[start, end)` inside a post's text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty span {start}..{end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersects(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }

    /// The covered substring of `text`, by character index.
    pub fn slice(&self, text: &str) -> String {
        text.chars().skip(self.start).take(self.len()).collect()
    }
}

/// A post with gold claim spans and, after prediction, predicted spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedPost {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub spans: Vec<CharSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_spans: Option<Vec<CharSpan>>,
}

impl AnnotatedPost {
    pub fn new(id: impl Into<String>, text: impl Into<String>, spans: Vec<CharSpan>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            spans,
            predicted_spans: None,
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Checks that spans are non-empty, in range, sorted and non-overlapping.
pub fn check_spans(spans: &[CharSpan], text_len: usize) -> crate::Result<()> {
    let mut prev_end = 0;
    for (i, span) in spans.iter().enumerate() {
        if span.start >= span.end {
            return Err(crate::Error::Spans(format!(
                "span {}..{} is empty",
                span.start, span.end
            )));
        }
        if span.end > text_len {
            return Err(crate::Error::Spans(format!(
                "span {}..{} exceeds text length {text_len}",
                span.start, span.end
            )));
        }
        if i > 0 && span.start < prev_end {
            return Err(crate::Error::Spans(format!(
                "span {}..{} overlaps or precedes the previous span ending at {prev_end}",
                span.start, span.end
            )));
        }
        prev_end = span.end;
    }
    Ok(())
}
