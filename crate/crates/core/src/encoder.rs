//! Word-level transformer encoder: learned token and positional embeddings
//! followed by post-norm blocks of multi-head self-attention and a GELU
//! feed-forward network.
//!
//! Every layer is written once against [`Graph`] and reused both for
//! training (with gradients) and for the plain matrix functions below.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::params::{ParamId, ParamStore};
use crate::{Error, Mat, Result, SeededRng};

/// Training mode carries the generator that draws dropout masks; evaluation
/// mode makes dropout the identity.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut SeededRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }

    /// Inverted dropout: kept entries are scaled by `1/(1−p)`.
    pub fn dropout(&mut self, g: &mut Graph<'_>, x: Var, p: f64) -> Var {
        let Mode::Train(rng) = self else { return x };
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let (r, c) = g.shape(x);
        let mask = Mat::from_shape_fn((r, c), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
        g.dropout_mask(x, mask)
    }
}

/// Weights of one encoder block.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub wq: T,
    pub wk: T,
    pub wv: T,
    pub wo: T,
    pub w1: T,
    pub w2: T,
    pub ln1_gain: T,
    pub ln1_bias: T,
    pub ln2_gain: T,
    pub ln2_bias: T,
}

impl<T> Block<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Block<U> {
        Block {
            wq: f(&self.wq),
            wk: f(&self.wk),
            wv: f(&self.wv),
            wo: f(&self.wo),
            w1: f(&self.w1),
            w2: f(&self.w2),
            ln1_gain: f(&self.ln1_gain),
            ln1_bias: f(&self.ln1_bias),
            ln2_gain: f(&self.ln2_gain),
            ln2_bias: f(&self.ln2_bias),
        }
    }
}

impl Block<ParamId> {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        d_ff: usize,
        rng: &mut SeededRng,
    ) -> Self {
        Block {
            wq: store.normal(format!("{prefix}.attn.wq"), d, d, rng),
            wk: store.normal(format!("{prefix}.attn.wk"), d, d, rng),
            wv: store.normal(format!("{prefix}.attn.wv"), d, d, rng),
            wo: store.normal(format!("{prefix}.attn.wo"), d, d, rng),
            w1: store.normal(format!("{prefix}.ffn.w1"), d, d_ff, rng),
            w2: store.normal(format!("{prefix}.ffn.w2"), d_ff, d, rng),
            ln1_gain: store.ones(format!("{prefix}.ln1.gain"), 1, d),
            ln1_bias: store.zeros(format!("{prefix}.ln1.bias"), 1, d),
            ln2_gain: store.ones(format!("{prefix}.ln2.gain"), 1, d),
            ln2_bias: store.zeros(format!("{prefix}.ln2.bias"), 1, d),
        }
    }

    pub fn vars(&self, g: &mut Graph<'_>) -> Block<Var> {
        self.map(|&id| g.param(id))
    }

    pub fn values(&self, store: &ParamStore) -> Block<Mat> {
        self.map(|&id| store.get(id).clone())
    }

    /// Scalars per block: four d×d attention projections, the two
    /// feed-forward matrices and two gain/bias pairs.
    pub fn scalar_count(d: usize, d_ff: usize) -> usize {
        4 * d * d + 2 * d * d_ff + 4 * d
    }
}

impl Block<Mat> {
    pub fn inputs(&self, g: &mut Graph<'_>) -> Block<Var> {
        self.map(|m| g.input(m.clone()))
    }
}

/// Embedding tables and the block stack.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub token_embedding: ParamId,
    pub positional_embedding: ParamId,
    pub blocks: Vec<Block<ParamId>>,
}

impl EncoderParams {
    pub fn register(
        store: &mut ParamStore,
        vocab: usize,
        max_len: usize,
        d: usize,
        d_ff: usize,
        layers: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let token_embedding = store.normal("embed.token", vocab, d, rng);
        let positional_embedding = store.normal("embed.position", max_len, d, rng);
        let blocks = (0..layers)
            .map(|l| Block::register(store, &format!("encoder.{l}"), d, d_ff, rng))
            .collect();
        Self {
            token_embedding,
            positional_embedding,
            blocks,
        }
    }

    /// Scalars in the embeddings plus `layers` blocks.
    pub fn scalar_count(vocab: usize, max_len: usize, d: usize, d_ff: usize, layers: usize) -> usize {
        vocab * d + max_len * d + layers * Block::<ParamId>::scalar_count(d, d_ff)
    }
}

pub fn check_ids(ids: &[usize], vocab: usize, max_len: usize) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if ids.len() > max_len {
        return Err(Error::Input(format!(
            "sequence of {} tokens exceeds max length {max_len}",
            ids.len()
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
        return Err(Error::Input(format!("token id {bad} outside vocabulary of {vocab}")));
    }
    Ok(())
}

/// `token_embedding[id_t] + positional_embedding[t]` for every position.
pub fn embed_graph(g: &mut Graph<'_>, ids: &[usize], token: Var, position: Var) -> Var {
    let tok = g.gather_rows(token, ids);
    let pos = g.top_rows(position, ids.len());
    g.add(tok, pos)
}

/// Scaled dot-product attention per head; returns the projected output and
/// each head's attention matrix.
pub fn attention_graph(g: &mut Graph<'_>, z: Var, block: &Block<Var>, heads: usize) -> (Var, Vec<Var>) {
    let d = g.shape(z).1;
    let dh = d / heads;
    let q = g.matmul(z, block.wq);
    let k = g.matmul(z, block.wk);
    let v = g.matmul(z, block.wv);
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, dh);
        let kh = g.slice_cols(k, h * dh, dh);
        let vh = g.slice_cols(v, h * dh, dh);
        let scores = g.matmul_t(qh, kh);
        let scores = g.scale(scores, 1.0 / (dh as f64).sqrt());
        let a = g.softmax_rows(scores);
        outs.push(g.matmul(a, vh));
        weights.push(a);
    }
    let cat = if heads == 1 { outs[0] } else { g.concat_cols(&outs) };
    (g.matmul(cat, block.wo), weights)
}

pub fn feed_forward_graph(g: &mut Graph<'_>, z: Var, w1: Var, w2: Var) -> Var {
    let h = g.matmul(z, w1);
    let h = g.gelu(h);
    g.matmul(h, w2)
}

pub fn layer_norm_graph(g: &mut Graph<'_>, x: Var, gain: Var, bias: Var) -> Var {
    let n = g.normalize_rows(x);
    let n = g.mul_row(n, gain);
    g.add_row(n, bias)
}

/// `Z → LN(Z + Drop(MHSA(Z))) → LN(· + Drop(FFN(·)))`.
pub fn block_graph(
    g: &mut Graph<'_>,
    z: Var,
    block: &Block<Var>,
    heads: usize,
    dropout: f64,
    mode: &mut Mode<'_>,
) -> Var {
    let (attn, _) = attention_graph(g, z, block, heads);
    let attn = mode.dropout(g, attn, dropout);
    let x = g.add(z, attn);
    let x = layer_norm_graph(g, x, block.ln1_gain, block.ln1_bias);
    let ff = feed_forward_graph(g, x, block.w1, block.w2);
    let ff = mode.dropout(g, ff, dropout);
    let y = g.add(x, ff);
    layer_norm_graph(g, y, block.ln2_gain, block.ln2_bias)
}

/// Plain-matrix embedding lookup with range and length checks.
pub fn embed(ids: &[usize], token_embedding: &Mat, positional_embedding: &Mat) -> Result<Mat> {
    check_ids(ids, token_embedding.nrows(), positional_embedding.nrows())?;
    let mut g = Graph::new();
    let t = g.input(token_embedding.clone());
    let p = g.input(positional_embedding.clone());
    let out = embed_graph(&mut g, ids, t, p);
    Ok(g.value(out).clone())
}

/// Plain-matrix multi-head self-attention: output and per-head weights.
pub fn multi_head_self_attention(z: &Mat, block: &Block<Mat>, heads: usize) -> (Mat, Vec<Mat>) {
    let mut g = Graph::new();
    let zi = g.input(z.clone());
    let b = block.inputs(&mut g);
    let (out, weights) = attention_graph(&mut g, zi, &b, heads);
    (
        g.value(out).clone(),
        weights.into_iter().map(|w| g.value(w).clone()).collect(),
    )
}

pub fn feed_forward(z: &Mat, w1: &Mat, w2: &Mat) -> Mat {
    let mut g = Graph::new();
    let (zi, a, b) = (g.input(z.clone()), g.input(w1.clone()), g.input(w2.clone()));
    let out = feed_forward_graph(&mut g, zi, a, b);
    g.value(out).clone()
}

pub fn encoder_block(z: &Mat, block: &Block<Mat>, heads: usize, dropout: f64, mode: &mut Mode<'_>) -> Mat {
    let mut g = Graph::new();
    let zi = g.input(z.clone());
    let b = block.inputs(&mut g);
    let out = block_graph(&mut g, zi, &b, heads, dropout, mode);
    g.value(out).clone()
}
