use super::{check_spans, AnnotatedPost, CharSpan};

/// Normalized text plus, for every output character, the index of the
/// input character it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub source: Vec<usize>,
}

impl Normalized {
    /// Maps spans over the original text onto the normalized text. Spans
    /// whose characters were all removed are dropped.
    pub fn remap_spans(&self, spans: &[CharSpan]) -> Vec<CharSpan> {
        spans
            .iter()
            .filter_map(|span| {
                let lo = self.source.partition_point(|&s| s < span.start);
                let hi = self.source.partition_point(|&s| s < span.end);
                (lo < hi).then(|| CharSpan::new(lo, hi))
            })
            .collect()
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://")
}

/// A whitespace-delimited chunk with no ASCII letter or digit is made only
/// of non-ASCII and special characters.
fn is_noise(chunk: &str) -> bool {
    !chunk.chars().any(|c| c.is_ascii_alphanumeric())
}

/// Removes URLs and chunks made only of non-ASCII or special characters.
///
/// Each kept chunk keeps the whitespace that preceded it, except that
/// nothing is emitted before the first kept chunk when earlier chunks were
/// dropped. Applying the function twice gives the same result as once.
pub fn normalize_text(raw: &str) -> Normalized {
    let chars: Vec<char> = raw.chars().collect();
    let mut text = String::with_capacity(raw.len());
    let mut source = Vec::with_capacity(chars.len());

    let mut i = 0;
    let mut emitted_any = false;
    let mut dropped_any = false;
    let mut last_kept_end = None;
    while i < chars.len() {
        let sep_start = i;
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i == chars.len() {
            break;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let chunk: String = chars[chunk_start..i].iter().collect();
        if is_url(&chunk) || is_noise(&chunk) {
            dropped_any = true;
            continue;
        }
        let emit_from = if !emitted_any && dropped_any {
            chunk_start
        } else {
            sep_start
        };
        for (k, c) in chars[emit_from..i].iter().enumerate() {
            text.push(*c);
            source.push(emit_from + k);
        }
        emitted_any = true;
        last_kept_end = Some(i);
    }
    // Trailing whitespace survives only when the final chunk was kept.
    if let Some(end) = last_kept_end {
        if chars[end..].iter().all(|c| c.is_whitespace()) {
            for (k, c) in chars[end..].iter().enumerate() {
                text.push(*c);
                source.push(end + k);
            }
        }
    }
    Normalized { text, source }
}

/// Normalizes a post's text and carries its gold and predicted spans along.
pub fn normalize_post(post: &AnnotatedPost) -> crate::Result<AnnotatedPost> {
    check_spans(&post.spans, post.char_len())?;
    let norm = normalize_text(&post.text);
    Ok(AnnotatedPost {
        id: post.id.clone(),
        spans: trim_spans(&norm.text, norm.remap_spans(&post.spans)),
        predicted_spans: post
            .predicted_spans
            .as_ref()
            .map(|p| trim_spans(&norm.text, norm.remap_spans(p))),
        text: norm.text,
    })
}

/// Shrinks spans so they neither start nor end on whitespace.
fn trim_spans(text: &str, spans: Vec<CharSpan>) -> Vec<CharSpan> {
    let chars: Vec<char> = text.chars().collect();
    spans
        .into_iter()
        .filter_map(|mut s| {
            while s.start < s.end && chars[s.start].is_whitespace() {
                s.start += 1;
            }
            while s.end > s.start && chars[s.end - 1].is_whitespace() {
                s.end -= 1;
            }
            (s.start < s.end).then_some(s)
        })
        .collect()
}
