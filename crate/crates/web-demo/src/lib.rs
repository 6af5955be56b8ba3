//! Browser demo around a small tagger trained in the page on the synthetic
//! corpus. `Demo::tag` returns spans with per-token marginals.
//! `Demo::attention` returns CoDA or softmax weights from a post to one
//! description. `retrieval` scores BM25 with tweet queries against span
//! queries.
//!
//! The plain Rust functions are what the tests exercise; the exported
//! wrappers only convert errors and serialize to JSON strings.

use claimspan::autodiff::softmax_rows;
use claimspan::config::{ModelConfig, TrainConfig};
use claimspan::descnet::{coda, DescriptionBank};
use claimspan::model::{ClaimTagger, PreparedPost};
use claimspan::preprocess::{normalize_text, tokenize, AnnotatedPost, CharSpan};
use claimspan::retrieval::{compare_conditions, span_query, Bm25Index, RetrievalReport};
use claimspan::synthetic::{generate_corpus, retrieval_fixture, split_80_10_10, synthetic_bank};
use claimspan::training::{evaluate, prepare, train};
use claimspan::Mat;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Model size used in the page; small enough to train in a few seconds.
pub fn demo_config(seed: u64) -> ModelConfig {
    ModelConfig {
        d_model: 32,
        heads: 4,
        d_ff: 64,
        layers: 2,
        adapter_layer: 2,
        seed,
        ..ModelConfig::default()
    }
}

#[derive(Debug, Serialize)]
pub struct Segment {
    pub text: String,
    pub claim: bool,
}

#[derive(Debug, Serialize)]
pub struct TokenView {
    pub surface: String,
    pub tag: char,
    /// Marginal probabilities of B, I and O.
    pub marginals: [f64; 3],
}

#[derive(Debug, Serialize)]
pub struct Tagged {
    pub segments: Vec<Segment>,
    pub tokens: Vec<TokenView>,
}

#[derive(Debug, Serialize)]
pub struct AttentionView {
    pub variant: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub test_f1: f64,
    pub test_dsc: f64,
    pub parameters: usize,
}

#[derive(Debug, Serialize)]
pub struct QueryExample {
    pub tweet: String,
    pub span_query: String,
    pub relevant: Vec<String>,
    pub tweet_hits: Vec<String>,
    pub span_hits: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RetrievalView {
    pub report: RetrievalReport,
    pub example: QueryExample,
}

/// Splits `text` into alternating claim and non-claim pieces.
pub fn segments(text: &str, spans: &[CharSpan]) -> Vec<Segment> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut at = 0;
    for s in spans {
        if s.start > at {
            out.push(Segment { text: chars[at..s.start].iter().collect(), claim: false });
        }
        out.push(Segment { text: chars[s.start..s.end].iter().collect(), claim: true });
        at = s.end;
    }
    if at < chars.len() {
        out.push(Segment { text: chars[at..].iter().collect(), claim: false });
    }
    out
}

#[wasm_bindgen]
pub struct Demo {
    model: ClaimTagger,
    bank: Option<DescriptionBank>,
    summary: TrainSummary,
}

impl Demo {
    pub fn train(seed: u64, posts: usize, epochs: usize) -> claimspan::Result<Demo> {
        let corpus = generate_corpus(posts.max(10), seed);
        let (tr, val, test) = split_80_10_10(&corpus);
        let train_cfg = TrainConfig {
            max_epochs: epochs.max(1),
            patience: epochs.max(1),
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(&tr, &val, &synthetic_bank(), &demo_config(seed), &train_cfg, |_| {})?;
        let report = evaluate(&outcome.model, &prepare(&test)?)?;
        let summary = TrainSummary {
            epochs: outcome.log.len(),
            best_epoch: outcome.best_epoch,
            test_f1: report.overall.f1,
            test_dsc: report.dsc,
            parameters: outcome.model.num_parameters(),
        };
        let bank = outcome.model.encode_descriptions();
        Ok(Demo { model: outcome.model, bank, summary })
    }

    pub fn summary(&self) -> &TrainSummary {
        &self.summary
    }

    pub fn descriptions(&self) -> &[String] {
        &self.model.descriptions
    }

    pub fn tag_text(&self, text: &str) -> claimspan::Result<Tagged> {
        let prepared = PreparedPost::new(&AnnotatedPost::new("demo", text, Vec::new()))?;
        let (tags, spans) = self.model.predict_post(&prepared, self.bank.as_ref());
        let marginals = self.model.tag_marginals(&prepared.tokens, self.bank.as_ref());
        let tokens = prepared
            .tokens
            .iter()
            .zip(&tags)
            .enumerate()
            .map(|(i, (t, tag))| TokenView {
                surface: t.surface.clone(),
                tag: tag.as_char(),
                marginals: if i < marginals.nrows() {
                    [marginals[[i, 0]], marginals[[i, 1]], marginals[[i, 2]]]
                } else {
                    [0.0, 0.0, 1.0]
                },
            })
            .collect();
        Ok(Tagged { segments: segments(text, &spans), tokens })
    }

    /// Attention from the post's representation entering the adapter to the
    /// encoded tokens of one description.
    pub fn attention_view(&self, text: &str, description: usize, variant: &str) -> claimspan::Result<AttentionView> {
        let bank = self
            .bank
            .as_ref()
            .ok_or_else(|| claimspan::Error::Input("model has no description bank".into()))?;
        let desc = bank.matrices.get(description).ok_or_else(|| {
            claimspan::Error::Input(format!("description {description} outside 0..{}", bank.matrices.len()))
        })?;
        let tokens = tokenize(&normalize_text(text).text);
        let ids = self.model.token_ids(&tokens);
        if ids.is_empty() {
            return Err(claimspan::Error::Input("empty post".into()));
        }
        let z = self.encode_before_adapter(&ids)?;
        let weights: Mat = match variant {
            "coda" => coda(&z, desc),
            "dpa" => softmax_rows(&(z.dot(&desc.t()) / (z.ncols() as f64).sqrt())),
            other => return Err(claimspan::Error::Input(format!("unknown attention variant {other:?}"))),
        };
        let cols = tokenize(&normalize_text(&bank.texts[description]).text)
            .into_iter()
            .map(|t| t.surface)
            .collect();
        Ok(AttentionView {
            variant: variant.to_string(),
            rows: tokens.iter().take(ids.len()).map(|t| t.surface.clone()).collect(),
            cols,
            weights: weights.rows().into_iter().map(|r| r.to_vec()).collect(),
        })
    }

    fn encode_before_adapter(&self, ids: &[usize]) -> claimspan::Result<Mat> {
        // The demo places the adapter after the last block, so encoding
        // without a bank yields exactly the adapter's input.
        debug_assert_eq!(self.model.config.adapter_layer, self.model.config.layers);
        self.model.encode(ids, None)
    }
}

/// BM25 over the seeded retrieval fixture with the given parameters.
pub fn retrieval_view(k1: f64, b: f64, queries: usize, seed: u64) -> claimspan::Result<RetrievalView> {
    if !(k1 >= 0.0 && (0.0..=1.0).contains(&b)) {
        return Err(claimspan::Error::Input(format!("need k1 >= 0 and 0 <= b <= 1, got {k1}, {b}")));
    }
    let fixture = retrieval_fixture(queries.max(1), seed);
    let index = Bm25Index::build(&fixture.documents, k1, b);
    let report = compare_conditions(&fixture.posts, &index, &fixture.judgments, &[3, 5])?;
    let post = &fixture.posts[0];
    let hits = |q: &str| index.query(q, 5).into_iter().map(|h| h.id).collect();
    let query = span_query(post);
    let example = QueryExample {
        tweet: post.text.clone(),
        span_hits: hits(&query),
        span_query: query,
        relevant: fixture.judgments[0].relevant.clone(),
        tweet_hits: hits(&post.text),
    };
    Ok(RetrievalView { report, example })
}

fn to_js<T: Serialize>(value: claimspan::Result<T>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
impl Demo {
    /// Trains the page's model; blocks until training ends.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, posts: u32, epochs: u32) -> Result<Demo, JsError> {
        Demo::train(seed.into(), posts as usize, epochs as usize).map_err(|e| JsError::new(&e.to_string()))
    }

    #[wasm_bindgen(js_name = summaryJson)]
    pub fn summary_json(&self) -> Result<String, JsError> {
        to_js(Ok(&self.summary))
    }

    #[wasm_bindgen(js_name = descriptionsJson)]
    pub fn descriptions_json(&self) -> Result<String, JsError> {
        to_js(Ok(self.descriptions()))
    }

    /// Segments and per-token tags and marginals as JSON.
    pub fn tag(&self, text: &str) -> Result<String, JsError> {
        to_js(self.tag_text(text))
    }

    /// Token-by-description attention weights as JSON; `variant` is
    /// `"coda"` or `"dpa"`.
    pub fn attention(&self, text: &str, description: u32, variant: &str) -> Result<String, JsError> {
        to_js(self.attention_view(text, description as usize, variant))
    }
}

/// Tweet-query and span-query retrieval scores as JSON.
#[wasm_bindgen]
pub fn retrieval(k1: f64, b: f64, queries: u32, seed: u32) -> Result<String, JsError> {
    to_js(retrieval_view(k1, b, queries as usize, seed.into()))
}
