use std::fs;
use std::path::Path;

use super::{check_spans, AnnotatedPost};
use crate::{Error, Result};

/// Validates span offsets of a post against its character length.
pub fn validate_post(post: &AnnotatedPost) -> Result<()> {
    let len = post.char_len();
    check_spans(&post.spans, len)
        .map_err(|e| Error::Spans(format!("record {:?}: {e}", post.id)))?;
    if let Some(pred) = &post.predicted_spans {
        check_spans(pred, len)
            .map_err(|e| Error::Spans(format!("record {:?} predicted_spans: {e}", post.id)))?;
    }
    Ok(())
}

/// Parses line-delimited JSON posts. Blank lines are skipped; `source` only
/// labels error messages.
pub fn parse_corpus(content: &str, source: &Path) -> Result<Vec<AnnotatedPost>> {
    let record_err = |line: usize, message: String| Error::Record {
        path: source.to_path_buf(),
        line,
        message,
    };
    let mut posts = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let post: AnnotatedPost = serde_json::from_str(line)
            .map_err(|e| record_err(idx + 1, format!("malformed record: {e}")))?;
        validate_post(&post).map_err(|e| match e {
            Error::Spans(msg) => record_err(idx + 1, msg),
            other => other,
        })?;
        posts.push(post);
    }
    Ok(posts)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<AnnotatedPost>> {
    let path = path.as_ref();
    let content = crate::error::read_text(path)?;
    parse_corpus(&content, path)
}

/// Serializes posts as one JSON object per line.
pub fn to_jsonl(posts: &[AnnotatedPost]) -> Result<String> {
    let mut out = String::new();
    for post in posts {
        out.push_str(&serde_json::to_string(post)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_corpus(posts: &[AnnotatedPost], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_jsonl(posts)?)?;
    Ok(())
}
