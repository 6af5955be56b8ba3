use serde::{Deserialize, Serialize};

use super::{check_spans, CharSpan, Token};

/// BIO tag. The discriminant order `B < I < O` is also the CRF tag index and
/// the Viterbi tie-breaking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    B = 0,
    I = 1,
    O = 2,
}

pub type TagSequence = Vec<Tag>;

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::B, Tag::I, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Tag {
        Self::ALL[i]
    }

    pub fn in_span(self) -> bool {
        self != Tag::O
    }

    pub fn as_char(self) -> char {
        match self {
            Tag::B => 'B',
            Tag::I => 'I',
            Tag::O => 'O',
        }
    }
}

/// Tags tokens from character spans. A token is in a span iff its character
/// range intersects it; the first such token gets `B`, the rest `I`.
pub fn encode_bio(tokens: &[Token], spans: &[CharSpan]) -> crate::Result<TagSequence> {
    let text_end = tokens.last().map_or(0, |t| t.end);
    let limit = spans.iter().map(|s| s.end).max().unwrap_or(0).max(text_end);
    check_spans(spans, limit)?;

    let mut tags = vec![Tag::O; tokens.len()];
    for span in spans {
        let mut first = true;
        for (tag, tok) in tags.iter_mut().zip(tokens) {
            if *tag != Tag::O || !span.intersects(tok.start, tok.end) {
                continue;
            }
            *tag = if first { Tag::B } else { Tag::I };
            first = false;
        }
    }
    Ok(tags)
}

/// Result of turning a tag sequence back into spans.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Decoded {
    pub spans: Vec<CharSpan>,
    /// Number of `I` tags that started a run (after `O` or at the start) and
    /// were read as `B`.
    pub repaired: usize,
}

/// Turns each maximal `B I*` run into a span from the first token's start to
/// the last token's end. Tokens without a tag count as `O`.
pub fn decode_bio(tokens: &[Token], tags: &[Tag]) -> Decoded {
    let mut out = Decoded::default();
    let mut open: Option<CharSpan> = None;
    for (tok, &tag) in tokens.iter().zip(tags) {
        match tag {
            Tag::O => out.spans.extend(open.take()),
            Tag::B => {
                out.spans.extend(open.take());
                open = Some(CharSpan::new(tok.start, tok.end));
            }
            Tag::I => match open.as_mut() {
                Some(span) => span.end = tok.end,
                None => {
                    out.repaired += 1;
                    open = Some(CharSpan::new(tok.start, tok.end));
                }
            },
        }
    }
    out.spans.extend(open);
    out
}
