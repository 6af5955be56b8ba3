//! The complete tagger: encoder, optional description adapter, CRF head.

use rand::SeedableRng;

use crate::autodiff::{Gradients, Graph, Var};
use crate::config::ModelConfig;
use crate::crf::{self, Transitions, NUM_TAGS};
use crate::descnet::{descnet_graph, AdapterSettings, DescNetParams, DescriptionBank};
use crate::encoder::{block_graph, check_ids, embed_graph, EncoderParams, Mode};
use crate::params::{ParamId, ParamStore};
use crate::preprocess::{
    decode_bio, encode_bio, normalize_post, normalize_text, tokenize, AnnotatedPost, CharSpan,
    Normalized, Tag, Token,
};
use crate::vocab::Vocab;
use crate::{Error, Mat, Result, SeededRng};

/// Emission projection and transition scores.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfHead {
    /// d×3
    pub emit_w: ParamId,
    /// 1×3
    pub emit_b: ParamId,
    /// 3×3, pinned entries fixed at [`crf::FORBIDDEN`].
    pub transitions: ParamId,
    pub start: ParamId,
    pub end: ParamId,
}

impl CrfHead {
    fn register(store: &mut ParamStore, d: usize, rng: &mut SeededRng) -> Self {
        let head = Self {
            emit_w: store.normal("crf.emit.w", d, NUM_TAGS, rng),
            emit_b: store.zeros("crf.emit.b", 1, NUM_TAGS),
            transitions: store.normal("crf.transitions", NUM_TAGS, NUM_TAGS, rng),
            start: store.normal("crf.start", 1, NUM_TAGS, rng),
            end: store.normal("crf.end", 1, NUM_TAGS, rng),
        };
        head.pin(store);
        head
    }

    /// Writes the forbidden scores into the pinned entries.
    pub fn pin(&self, store: &mut ParamStore) {
        let mut t = self.transitions(store);
        t.pin();
        for a in 0..NUM_TAGS {
            for b in 0..NUM_TAGS {
                store.get_mut(self.transitions)[[a, b]] = t.trans[a][b];
            }
            store.get_mut(self.start)[[0, a]] = t.start[a];
        }
    }

    pub fn transitions(&self, store: &ParamStore) -> Transitions {
        Transitions::from_mats(
            store.get(self.transitions),
            store.get(self.start),
            store.get(self.end),
        )
    }

    pub fn scalar_count(d: usize) -> usize {
        d * NUM_TAGS + NUM_TAGS + NUM_TAGS * NUM_TAGS + 2 * NUM_TAGS
    }
}

/// One training sequence: token ids and gold tags, already truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub tags: Vec<Tag>,
}

/// A post after normalization and tokenization.
#[derive(Clone, Debug)]
pub struct PreparedPost {
    pub normalized: Normalized,
    pub tokens: Vec<Token>,
    /// Gold tags over all tokens (not truncated).
    pub gold: Vec<Tag>,
}

impl PreparedPost {
    pub fn new(post: &AnnotatedPost) -> Result<Self> {
        let norm_post = normalize_post(post)?;
        let normalized = normalize_text(&post.text);
        let tokens = tokenize(&normalized.text);
        let gold = encode_bio(&tokens, &norm_post.spans)?;
        Ok(Self {
            normalized,
            tokens,
            gold,
        })
    }

    /// Maps spans over the normalized text back to the original text.
    pub fn to_original(&self, spans: &[CharSpan]) -> Vec<CharSpan> {
        let src = &self.normalized.source;
        spans
            .iter()
            .map(|s| CharSpan::new(src[s.start], src[s.end - 1] + 1))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClaimTagger {
    pub config: ModelConfig,
    pub vocab: Vocab,
    /// Description texts; empty when the adapter is disabled.
    pub descriptions: Vec<String>,
    description_ids: Vec<Vec<usize>>,
    pub store: ParamStore,
    pub encoder: EncoderParams,
    pub descnet: Option<DescNetParams>,
    pub crf: CrfHead,
}

impl ClaimTagger {
    /// Initializes every weight from `config.seed`. Embeddings and encoder
    /// blocks are drawn first, so models that differ only in adapter
    /// settings share their encoder initialization.
    pub fn new(config: ModelConfig, vocab: Vocab, descriptions: Vec<String>) -> Result<Self> {
        config.validate()?;
        if config.vocab_size > 0 && vocab.len() > config.vocab_size {
            return Err(Error::Config(format!(
                "vocabulary of {} exceeds vocab_size {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        let descriptions = if config.use_descnet {
            if descriptions.is_empty() {
                return Err(Error::Config("the adapter needs at least one description".into()));
            }
            descriptions
        } else {
            Vec::new()
        };
        let description_ids = descriptions
            .iter()
            .map(|text| {
                let ids = vocab.ids(&tokenize(&normalize_text(text).text));
                check_ids(&ids, vocab.len(), config.max_len)
                    .map_err(|e| Error::Config(format!("description {text:?}: {e}")))?;
                Ok(ids)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut rng = SeededRng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.d_model;
        let encoder = EncoderParams::register(
            &mut store,
            vocab.len(),
            config.max_len,
            d,
            config.d_ff,
            config.layers,
            &mut rng,
        );
        let mut crf_rng = SeededRng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let descnet = config
            .use_descnet
            .then(|| DescNetParams::register(&mut store, &config, descriptions.len(), &mut rng));
        let crf = CrfHead::register(&mut store, d, &mut crf_rng);
        Ok(Self {
            config,
            vocab,
            descriptions,
            description_ids,
            store,
            encoder,
            descnet,
            crf,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Vocabulary ids of the tokens, truncated to the maximum length.
    pub fn token_ids(&self, tokens: &[Token]) -> Vec<usize> {
        let mut ids = self.vocab.ids(tokens);
        ids.truncate(self.config.max_len);
        ids
    }

    pub fn example(&self, prepared: &PreparedPost) -> Option<Example> {
        let ids = self.token_ids(&prepared.tokens);
        if ids.is_empty() {
            return None;
        }
        let tags = prepared.gold[..ids.len()].to_vec();
        Some(Example { ids, tags })
    }

    /// Encodes every description on the graph (embedding + description
    /// block) so gradients reach the description encoder.
    pub fn bank_graph(&self, g: &mut Graph<'_>, mode: &mut Mode<'_>) -> Vec<Var> {
        let Some(dn) = &self.descnet else { return Vec::new() };
        let tok = g.param(self.encoder.token_embedding);
        let pos = g.param(self.encoder.positional_embedding);
        let block = dn.description_block.vars(g);
        self.description_ids
            .iter()
            .map(|ids| {
                let z = embed_graph(g, ids, tok, pos);
                block_graph(g, z, &block, self.config.heads, self.config.dropout, mode)
            })
            .collect()
    }

    /// Representation handed to the CRF: encoder blocks with the adapter
    /// applied after block `adapter_layer` when a bank is given.
    pub fn representation_graph(
        &self,
        g: &mut Graph<'_>,
        ids: &[usize],
        bank: Option<&[Var]>,
        mode: &mut Mode<'_>,
    ) -> Var {
        let cfg = &self.config;
        let tok = g.param(self.encoder.token_embedding);
        let pos = g.param(self.encoder.positional_embedding);
        let mut z = embed_graph(g, ids, tok, pos);
        for (l, block) in self.encoder.blocks.iter().enumerate() {
            let b = block.vars(g);
            z = block_graph(g, z, &b, cfg.heads, cfg.dropout, mode);
            if l + 1 == cfg.adapter_layer {
                if let (Some(dn), Some(bank)) = (&self.descnet, bank) {
                    let w = dn.vars(g);
                    z = descnet_graph(g, z, bank, &w, AdapterSettings::from(cfg), mode);
                }
            }
        }
        z
    }

    pub fn emissions_graph(
        &self,
        g: &mut Graph<'_>,
        ids: &[usize],
        bank: Option<&[Var]>,
        mode: &mut Mode<'_>,
    ) -> Var {
        let z = self.representation_graph(g, ids, bank, mode);
        let w = g.param(self.crf.emit_w);
        let b = g.param(self.crf.emit_b);
        let e = g.matmul(z, w);
        g.add_row(e, b)
    }

    /// Mean CRF negative log-likelihood over a batch, with the description
    /// bank encoded once for the whole batch.
    pub fn batch_loss_graph(&self, g: &mut Graph<'_>, batch: &[&Example], mode: &mut Mode<'_>) -> Var {
        let bank = self.bank_graph(g, mode);
        let bank = self.descnet.as_ref().map(|_| bank.as_slice());
        let trans = g.param(self.crf.transitions);
        let start = g.param(self.crf.start);
        let end = g.param(self.crf.end);
        let losses: Vec<Var> = batch
            .iter()
            .map(|ex| {
                let e = self.emissions_graph(g, &ex.ids, bank, mode);
                g.crf_nll(e, trans, start, end, &ex.tags)
            })
            .collect();
        let total = g.sum(&losses);
        g.scale(total, 1.0 / batch.len() as f64)
    }

    /// Loss value and parameter gradients for a batch.
    pub fn loss_and_gradients(&self, batch: &[&Example], mode: &mut Mode<'_>) -> (f64, Gradients) {
        let mut g = Graph::with_params(&self.store);
        let loss = self.batch_loss_graph(&mut g, batch, mode);
        (g.scalar(loss), g.backward(loss))
    }

    pub fn batch_loss(&self, batch: &[&Example], mode: &mut Mode<'_>) -> f64 {
        let mut g = Graph::with_params(&self.store);
        let loss = self.batch_loss_graph(&mut g, batch, mode);
        g.scalar(loss)
    }

    /// Encodes the description bank for inference.
    pub fn encode_descriptions(&self) -> Option<DescriptionBank> {
        self.descnet.as_ref()?;
        let mut g = Graph::with_params(&self.store);
        let vars = self.bank_graph(&mut g, &mut Mode::Eval);
        Some(DescriptionBank {
            texts: self.descriptions.clone(),
            matrices: vars.into_iter().map(|v| g.value(v).clone()).collect(),
        })
    }

    fn with_bank_inputs<T>(
        &self,
        bank: Option<&DescriptionBank>,
        f: impl FnOnce(&mut Graph<'_>, Option<&[Var]>) -> T,
    ) -> T {
        let mut g = Graph::with_params(&self.store);
        let vars: Option<Vec<Var>> = match (&self.descnet, bank) {
            (Some(_), Some(b)) => Some(b.matrices.iter().map(|m| g.input(m.clone())).collect()),
            _ => None,
        };
        f(&mut g, vars.as_deref())
    }

    /// Final token representations (evaluation mode).
    pub fn encode(&self, ids: &[usize], bank: Option<&DescriptionBank>) -> Result<Mat> {
        check_ids(ids, self.vocab.len(), self.config.max_len)?;
        Ok(self.with_bank_inputs(bank, |g, vars| {
            let z = self.representation_graph(g, ids, vars, &mut Mode::Eval);
            g.value(z).clone()
        }))
    }

    pub fn emissions(&self, ids: &[usize], bank: Option<&DescriptionBank>) -> Result<Mat> {
        check_ids(ids, self.vocab.len(), self.config.max_len)?;
        Ok(self.with_bank_inputs(bank, |g, vars| {
            let e = self.emissions_graph(g, ids, vars, &mut Mode::Eval);
            g.value(e).clone()
        }))
    }

    pub fn transitions(&self) -> Transitions {
        self.crf.transitions(&self.store)
    }

    /// Viterbi tags for every token; tokens beyond the maximum length are `O`.
    pub fn predict_tags(&self, tokens: &[Token], bank: Option<&DescriptionBank>) -> Vec<Tag> {
        let ids = self.token_ids(tokens);
        let mut tags = vec![Tag::O; tokens.len()];
        if ids.is_empty() {
            return tags;
        }
        let e = self.emissions(&ids, bank).expect("ids checked by construction");
        let decoded = crf::viterbi_decode(e.view(), &self.transitions());
        tags[..decoded.len()].copy_from_slice(&decoded);
        tags
    }

    /// Per-token tag marginals for the first `max_len` tokens.
    pub fn tag_marginals(&self, tokens: &[Token], bank: Option<&DescriptionBank>) -> Mat {
        let ids = self.token_ids(tokens);
        if ids.is_empty() {
            return Mat::zeros((0, NUM_TAGS));
        }
        let e = self.emissions(&ids, bank).expect("ids checked by construction");
        crf::marginal_tags(e.view(), &self.transitions())
    }

    /// Predicted spans in the original text's character coordinates.
    pub fn predict_post(&self, prepared: &PreparedPost, bank: Option<&DescriptionBank>) -> (Vec<Tag>, Vec<CharSpan>) {
        let tags = self.predict_tags(&prepared.tokens, bank);
        let spans = decode_bio(&prepared.tokens, &tags).spans;
        let original = prepared.to_original(&spans);
        (tags, original)
    }
}
