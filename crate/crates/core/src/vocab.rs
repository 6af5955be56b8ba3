//! Word-level vocabulary over lowercased token surfaces.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::preprocess::{normalize_text, tokenize, Token};

pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Builds from raw texts: words are ordered by descending frequency,
    /// then alphabetically, after the unknown token. `cap` (when non-zero)
    /// bounds the total size including the unknown token.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, cap: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in tokenize(&normalize_text(text).text) {
                *counts.entry(tok.surface.to_lowercase()).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut words = vec![UNK.to_string()];
        words.extend(entries.into_iter().map(|(w, _)| w));
        if cap > 0 {
            words.truncate(cap);
        }
        Self::from(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, surface: &str) -> usize {
        self.index
            .get(&surface.to_lowercase())
            .copied()
            .unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(&t.surface)).collect()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_and_unknowns() {
        let v = Vocab::build(["b a b", "C b a"], 0);
        assert_eq!(v.words(), [UNK, "b", "a", "c"]);
        assert_eq!(v.id("B"), 1);
        assert_eq!(v.id("zebra"), UNK_ID);
        let capped = Vocab::build(["b a b", "C b a"], 2);
        assert_eq!(capped.len(), 2);
        assert_eq!(capped.id("a"), UNK_ID);
    }

    #[test]
    fn serializes_as_word_list() {
        let v = Vocab::build(["x y"], 0);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<unk>","x","y"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
