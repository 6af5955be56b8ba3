use serde::{Deserialize, Serialize};

/// A word or punctuation token with its character range in the source text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    fn from_chars(chars: &[char], start: usize, end: usize) -> Self {
        Self {
            surface: chars[start..end].iter().collect(),
            start,
            end,
        }
    }
}

fn is_hashtag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Relative `(start, end)` ranges of the pieces of a hashtag body (the
/// characters after `#`). Pieces are cut at underscores and before an
/// uppercase character whose predecessor is not uppercase.
fn hashtag_pieces(body: &[char]) -> Vec<(usize, usize)> {
    let mut pieces = Vec::new();
    let mut start = 0;
    for k in 0..=body.len() {
        let cut_here = k == body.len()
            || body[k] == '_'
            || (k > start && body[k].is_uppercase() && !body[k - 1].is_uppercase());
        if !cut_here {
            continue;
        }
        if k > start {
            pieces.push((start, k));
        }
        start = if k < body.len() && body[k] == '_' { k + 1 } else { k };
    }
    pieces
}

/// Splits a hashtag into words: `#WuhanLab` gives `["Wuhan", "Lab"]`.
///
/// Tokens not starting with `#` are returned whole; a bare `#` gives an
/// empty list.
pub fn split_hashtag(token: &str) -> Vec<String> {
    let Some(body) = token.strip_prefix('#') else {
        return vec![token.to_string()];
    };
    let chars: Vec<char> = body.chars().collect();
    hashtag_pieces(&chars)
        .into_iter()
        .map(|(s, e)| chars[s..e].iter().collect())
        .collect()
}

const CLITICS: [&str; 6] = ["s", "re", "ll", "ve", "d", "m"];

/// Splits English clitics off a word the way Treebank-style tokenizers do:
/// `won't` becomes `wo` + `n't`, `it's` becomes `it` + `'s`.
fn clitic_split(word: &[char]) -> Option<usize> {
    let n = word.len();
    if n > 3
        && word[n - 3].eq_ignore_ascii_case(&'n')
        && is_apostrophe(word[n - 2])
        && word[n - 1].eq_ignore_ascii_case(&'t')
    {
        return Some(n - 3);
    }
    let apos = word.iter().rposition(|&c| is_apostrophe(c))?;
    let suffix: String = word[apos + 1..].iter().collect::<String>().to_lowercase();
    (apos > 0 && CLITICS.contains(&suffix.as_str())).then_some(apos)
}

/// Whitespace- and punctuation-delimited tokenization with exact character
/// offsets.
///
/// * Runs of alphanumeric characters form words; an apostrophe between two
///   alphanumerics stays inside the word, then clitics are split off.
/// * `#` followed by word characters is a hashtag and is replaced by its
///   pieces (see [`split_hashtag`]), each keeping its own sub-range.
/// * Every other non-whitespace character is a one-character token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' && i + 1 < n && is_hashtag_char(chars[i + 1]) {
            let body_start = i + 1;
            let mut j = body_start;
            while j < n && is_hashtag_char(chars[j]) {
                j += 1;
            }
            for (s, e) in hashtag_pieces(&chars[body_start..j]) {
                tokens.push(Token::from_chars(&chars, body_start + s, body_start + e));
            }
            i = j;
        } else if c.is_alphanumeric() {
            let mut j = i + 1;
            loop {
                if j < n && chars[j].is_alphanumeric() {
                    j += 1;
                } else if j + 1 < n && is_apostrophe(chars[j]) && chars[j + 1].is_alphanumeric() {
                    j += 2;
                } else {
                    break;
                }
            }
            match clitic_split(&chars[i..j]) {
                Some(cut) => {
                    tokens.push(Token::from_chars(&chars, i, i + cut));
                    tokens.push(Token::from_chars(&chars, i + cut, j));
                }
                None => tokens.push(Token::from_chars(&chars, i, j)),
            }
            i = j;
        } else {
            tokens.push(Token::from_chars(&chars, i, i + 1));
            i += 1;
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn hashtag_splitting() {
        assert_eq!(split_hashtag("#WuhanLab"), ["Wuhan", "Lab"]);
        assert_eq!(split_hashtag("#covid_19"), ["covid", "19"]);
        assert_eq!(split_hashtag("#COVID19"), ["COVID19"]);
        assert_eq!(split_hashtag("#DontDrinkLysol"), ["Dont", "Drink", "Lysol"]);
        assert_eq!(split_hashtag("#covid__19_"), ["covid", "19"]);
        assert!(split_hashtag("#").is_empty());
    }

    #[test]
    fn words_and_hashtags() {
        let toks = tokenize("wine cures #COVID19");
        assert_eq!(
            toks,
            vec![
                Token { surface: "wine".into(), start: 0, end: 4 },
                Token { surface: "cures".into(), start: 5, end: 10 },
                Token { surface: "COVID19".into(), start: 12, end: 19 },
            ]
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn punctuation_and_clitics() {
        assert_eq!(
            surfaces("No! #Bleach won't cure"),
            ["No", "!", "Bleach", "wo", "n't", "cure"]
        );
        assert_eq!(surfaces("it's they're"), ["it", "'s", "they", "'re"]);
        assert_eq!(surfaces("@user: 14%"), ["@", "user", ":", "14", "%"]);
        assert_eq!(surfaces("a # b"), ["a", "#", "b"]);
    }

    #[test]
    fn hashtag_pieces_keep_offsets() {
        let text = "x #WuhanLab";
        for t in tokenize(text) {
            let s: String = text.chars().skip(t.start).take(t.end - t.start).collect();
            assert_eq!(s, t.surface);
        }
        let toks = tokenize(text);
        assert_eq!((toks[1].start, toks[1].end), (3, 8));
        assert_eq!((toks[2].start, toks[2].end), (8, 11));
    }

    #[test]
    fn non_ascii_offsets_are_characters() {
        let toks = tokenize("café ok");
        assert_eq!((toks[1].start, toks[1].end), (5, 7));
    }
}
