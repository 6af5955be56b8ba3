//! Seeded generators for a small annotated corpus with planted claim
//! templates and a matching retrieval collection.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};

use crate::preprocess::{AnnotatedPost, CharSpan};
use crate::retrieval::{Document, Judgment};
use crate::SeededRng;

const AGENTS: &[&str] = &[
    "garlic", "ginger", "lemon juice", "bleach", "turmeric", "honey", "onion", "vinegar",
    "colloidal silver", "zinc", "cannabis", "alcohol", "black pepper", "chloroquine", "ivermectin",
    "hot tea", "salt water", "cow urine", "vitamin d", "baking soda",
];
const DISEASES: &[&str] = &[
    "covid", "coronavirus", "the flu", "the virus", "pneumonia", "cancer", "malaria", "measles",
];
const MAKERS: &[&str] = &[
    "china", "the lab", "bill gates", "the government", "big pharma", "the military", "the cia",
    "scientists in wuhan",
];
const GROUPS: &[&str] = &[
    "children", "vegetarians", "smokers", "athletes", "nurses", "women", "teenagers", "farmers",
];
const PEOPLE: &[&str] = &[
    "my doctor", "my uncle", "a nurse", "the president", "the professor", "a famous chef",
    "my neighbour", "the pastor",
];
const ACTIONS: &[&str] = &[
    "drink hot water", "eat raw garlic", "take zinc", "run every day", "sleep early",
    "gargle salt water", "hold your breath", "eat spicy food",
];
const OPENERS: &[&str] = &["honestly", "fyi", "breaking", "lol", "wow", "listen"];
const TOPICS: &[&[&str]] = &[
    &["went", "to", "the", "market", "and", "bought", "fresh", "bread"],
    &["my", "cat", "is", "sleeping", "on", "the", "sofa", "again"],
    &["the", "weather", "is", "lovely", "this", "morning"],
    &["we", "watched", "a", "great", "movie", "last", "night"],
    &["please", "share", "this", "with", "your", "friends"],
    &["stay", "safe", "and", "look", "after", "each", "other"],
    &["what", "a", "long", "week", "at", "work"],
    &["the", "football", "match", "was", "boring", "today"],
    &["my", "sister", "started", "a", "new", "job", "in", "town"],
    &["traffic", "on", "the", "bridge", "is", "terrible"],
    &["just", "finished", "reading", "a", "good", "book"],
    &["the", "kids", "are", "playing", "in", "the", "garden"],
    &["cannot", "wait", "for", "the", "summer", "holidays"],
    &["our", "neighbours", "painted", "their", "house", "blue"],
    &["the", "concert", "tickets", "sold", "out", "quickly"],
    &["coffee", "prices", "went", "up", "again"],
];
const MENTIONS: &[&str] = &["i hope {y} ends soon", "my friend is worried about {y}"];
const HASHTAGS: &[&str] = &["#StaySafe", "#Covid19", "#WuhanLab", "#health_news", "#TruthMatters"];

/// Claim classes planted by the generator, one per description.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimKind {
    Statistic,
    Negation,
    Sarcasm,
    Societal,
    Conditional,
    Quote,
}

impl ClaimKind {
    pub const ALL: [ClaimKind; 6] = [
        ClaimKind::Statistic,
        ClaimKind::Negation,
        ClaimKind::Sarcasm,
        ClaimKind::Societal,
        ClaimKind::Conditional,
        ClaimKind::Quote,
    ];
}

/// One description per planted claim class, worded after the templates.
pub fn synthetic_bank() -> Vec<String> {
    [
        "a percent of people are immune to a disease",
        "a disease is not real and does not exist",
        "sure a disease is just a cold",
        "a disease is a bioweapon made by someone",
        "if you do something you are immune to a disease",
        "someone said a remedy can cure a disease",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// A claim sentence: optional text before the span, the span, and the words
/// relevant documents share with it.
struct Claim {
    prefix: String,
    span: String,
    key_terms: Vec<String>,
}

fn pick<'a>(rng: &mut SeededRng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("non-empty word list")
}

fn make_claim(kind: ClaimKind, rng: &mut SeededRng) -> Claim {
    let x = pick(rng, AGENTS);
    let y = pick(rng, DISEASES);
    let terms = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect();
    let (prefix, span, key_terms) = match kind {
        ClaimKind::Statistic => {
            let n = rng.random_range(10..100);
            let g = pick(rng, GROUPS);
            (String::new(), format!("{n} percent of {g} are immune to {y}"), terms(&[g, y]))
        }
        ClaimKind::Negation => {
            let form = rng.random_range(0..2);
            let span = if form == 0 {
                format!("{y} is not real")
            } else {
                format!("masks do not stop {y}")
            };
            (String::new(), span, terms(&[y, "hoax"]))
        }
        ClaimKind::Sarcasm => (String::new(), format!("sure, {y} is just a cold"), terms(&[y, "cold"])),
        ClaimKind::Societal => {
            let c = pick(rng, MAKERS);
            (String::new(), format!("{y} is a bioweapon made by {c}"), terms(&[y, c]))
        }
        ClaimKind::Conditional => {
            let a = pick(rng, ACTIONS);
            (String::new(), format!("if you {a} you are immune to {y}"), terms(&[a, y]))
        }
        ClaimKind::Quote => {
            let p = pick(rng, PEOPLE);
            let verb = if rng.random_bool(0.5) { "can cure" } else { "cures" };
            (format!("{p} said "), format!("{x} {verb} {y}"), terms(&[x, y]))
        }
    };
    Claim { prefix, span, key_terms }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

enum Piece {
    Claim(Claim),
    Filler(String),
}

/// Builds the text, returning the post and the distractor words used.
fn assemble(id: String, pieces: Vec<Piece>, rng: &mut SeededRng) -> (AnnotatedPost, Vec<String>) {
    let mut text = String::new();
    let mut spans = Vec::new();
    let mut filler_words = Vec::new();
    let push = |text: &mut String, s: &str| {
        let start = text.chars().count();
        text.push_str(s);
        start
    };
    for (i, piece) in pieces.into_iter().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        match piece {
            Piece::Claim(c) => {
                let mut lead = c.prefix.clone();
                if lead.is_empty() && rng.random_bool(0.25) {
                    lead = format!("{} ", pick(rng, OPENERS));
                }
                let (lead, body) = if lead.is_empty() {
                    (String::new(), capitalize(&c.span))
                } else {
                    (capitalize(&lead), c.span.clone())
                };
                push(&mut text, &lead);
                let start = push(&mut text, &body);
                spans.push(CharSpan::new(start, start + body.chars().count()));
                push(&mut text, if rng.random_bool(0.5) { "!" } else { "." });
            }
            Piece::Filler(s) => {
                filler_words.extend(s.split_whitespace().map(str::to_string));
                push(&mut text, &capitalize(&s));
                push(&mut text, ".");
            }
        }
    }
    if rng.random_bool(0.3) {
        let tag = pick(rng, HASHTAGS);
        text.push(' ');
        text.push_str(tag);
    }
    if rng.random_bool(0.3) {
        let code: u32 = rng.random_range(0..1_000_000);
        text.push_str(&format!(" https://t.co/{code:06x}"));
    }
    if rng.random_bool(0.1) {
        text.push_str(" 🙏");
    }
    (AnnotatedPost::new(id, text, spans), filler_words)
}

fn filler(rng: &mut SeededRng, y: &str) -> String {
    if rng.random_bool(0.15) {
        pick(rng, MENTIONS).replace("{y}", y)
    } else {
        TOPICS.choose(rng).expect("topics").join(" ")
    }
}

struct Generated {
    post: AnnotatedPost,
    claims: Vec<Vec<String>>,
    filler_words: Vec<String>,
}

fn generate_post(index: usize, rng: &mut SeededRng) -> Generated {
    let n_claims = if index % 4 == 3 { 2 } else { 1 };
    let mut pieces = Vec::new();
    let mut claims = Vec::new();
    for _ in 0..n_claims {
        let kind = *ClaimKind::ALL.choose(rng).expect("kinds");
        let claim = make_claim(kind, rng);
        claims.push(claim.key_terms.clone());
        pieces.push(Piece::Claim(claim));
    }
    let n_fillers = rng.random_range(1..=2);
    for _ in 0..n_fillers {
        let y = pick(rng, DISEASES);
        pieces.push(Piece::Filler(filler(rng, y)));
    }
    pieces.shuffle(rng);
    let (post, filler_words) = assemble(format!("syn{index:04}"), pieces, rng);
    Generated { post, claims, filler_words }
}

/// `n` posts; every fourth post carries two claims, the rest one, so the
/// corpus averages 1.25 spans per post.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<AnnotatedPost> {
    let mut rng = SeededRng::seed_from_u64(seed);
    (0..n).map(|i| generate_post(i, &mut rng).post).collect()
}

/// Consecutive 80/10/10 train, validation and test split.
pub fn split_80_10_10(
    posts: &[AnnotatedPost],
) -> (Vec<AnnotatedPost>, Vec<AnnotatedPost>, Vec<AnnotatedPost>) {
    let n_train = posts.len() * 8 / 10;
    let n_val = posts.len() / 10;
    (
        posts[..n_train].to_vec(),
        posts[n_train..n_train + n_val].to_vec(),
        posts[n_train + n_val..].to_vec(),
    )
}

pub struct RetrievalFixture {
    pub posts: Vec<AnnotatedPost>,
    pub documents: Vec<Document>,
    pub judgments: Vec<Judgment>,
}

const DOC_FILLER: &[&str] = &[
    "report", "article", "study", "evidence", "review", "source", "analysis", "update",
];

/// Posts with two relevant documents each that repeat the terms of the gold
/// spans, plus distractor documents that repeat the words of the text
/// around the spans.
pub fn retrieval_fixture(n_posts: usize, seed: u64) -> RetrievalFixture {
    let mut rng = SeededRng::seed_from_u64(seed);
    let mut posts = Vec::new();
    let mut documents = Vec::new();
    let mut judgments = Vec::new();
    for i in 0..n_posts {
        let g = generate_post(i, &mut rng);
        let id = g.post.id.clone();
        let mut relevant = Vec::new();
        for r in 0..2 {
            let claim = &g.claims[r % g.claims.len()];
            let mut words: Vec<String> = claim.clone();
            words.extend(claim.iter().cloned());
            words.push(pick(&mut rng, DOC_FILLER).to_string());
            words.push(pick(&mut rng, DOC_FILLER).to_string());
            let doc_id = format!("{id}-rel{r}");
            documents.push(Document { id: doc_id.clone(), text: words.join(" ") });
            relevant.push(doc_id);
        }
        let content: Vec<&String> = g
            .filler_words
            .iter()
            .filter(|w| w.len() > 3)
            .collect();
        for r in 0..3 {
            let mut words: Vec<String> = content.iter().map(|w| w.to_string()).collect();
            words.extend(content.iter().map(|w| w.to_string()));
            words.push(pick(&mut rng, DOC_FILLER).to_string());
            words.push(format!("{}{}", pick(&mut rng, DOC_FILLER), r));
            documents.push(Document { id: format!("{id}-noise{r}"), text: words.join(" ") });
        }
        judgments.push(Judgment { query_id: id, ranked: Vec::new(), relevant });
        posts.push(g.post);
    }
    RetrievalFixture { posts, documents, judgments }
}
