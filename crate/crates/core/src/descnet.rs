//! Description-aware adapter.
//!
//! Token representations `Z` (N×d) attend to every encoded claim
//! description `D_j` (M_j×d) with compositional de-attention, whose weights
//! `tanh(QKᵀ/√d) ⊙ σ(G/√d)` lie in (−1, 1) with `G` the negative pairwise
//! L1 distance. The m results are concatenated, passed through dropout and
//! `tanh(· W_f + b_f)`, projected by `W`, and finally merged with `Z` by the
//! interactive gating mechanism:
//!
//! ```text
//! p  = maxpool(Z)            p' = maxpool(Z'W)
//! μc = σ(p Wc1 + p' Wc2 + bc1)
//! C  = tanh((p ⊙ μc) Wc3 + (p' ⊙ (1 − μc)) Wc4 + bc2)
//! μr = σ(p Wr1 + p' Wr2 + br1)
//! R  = tanh((p ⊙ μr) Wr3 + (p' ⊙ μr) Wr4 + br2)
//! A  = R + (1 − μr) ⊙ C
//! Ẑ  = tanh(A Wa + ba) ⊙ Z       (the d-vector gate is broadcast over rows)
//! ```

use crate::autodiff::{Graph, Var};
use crate::config::{AttentionVariant, ModelConfig};
use crate::encoder::{Block, Mode};
use crate::params::{ParamId, ParamStore};
use crate::{Mat, SeededRng};

/// Gating weights. Matrices are d×d, biases 1×d.
#[derive(Clone, Debug, PartialEq)]
pub struct Igm<T> {
    pub wc1: T,
    pub wc2: T,
    pub wc3: T,
    pub wc4: T,
    pub bc1: T,
    pub bc2: T,
    pub wr1: T,
    pub wr2: T,
    pub wr3: T,
    pub wr4: T,
    pub br1: T,
    pub br2: T,
    pub wa: T,
    pub ba: T,
}

impl<T> Igm<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Igm<U> {
        Igm {
            wc1: f(&self.wc1),
            wc2: f(&self.wc2),
            wc3: f(&self.wc3),
            wc4: f(&self.wc4),
            bc1: f(&self.bc1),
            bc2: f(&self.bc2),
            wr1: f(&self.wr1),
            wr2: f(&self.wr2),
            wr3: f(&self.wr3),
            wr4: f(&self.wr4),
            br1: f(&self.br1),
            br2: f(&self.br2),
            wa: f(&self.wa),
            ba: f(&self.ba),
        }
    }
}

impl Igm<ParamId> {
    fn register(store: &mut ParamStore, d: usize, rng: &mut SeededRng) -> Self {
        let mut w = |name: &str| store.normal(format!("descnet.igm.{name}"), d, d, rng);
        let (wc1, wc2, wc3, wc4) = (w("wc1"), w("wc2"), w("wc3"), w("wc4"));
        let (wr1, wr2, wr3, wr4) = (w("wr1"), w("wr2"), w("wr3"), w("wr4"));
        let wa = w("wa");
        let mut b = |name: &str| store.zeros(format!("descnet.igm.{name}"), 1, d);
        Igm {
            wc1,
            wc2,
            wc3,
            wc4,
            bc1: b("bc1"),
            bc2: b("bc2"),
            wr1,
            wr2,
            wr3,
            wr4,
            br1: b("br1"),
            br2: b("br2"),
            wa,
            ba: b("ba"),
        }
    }
}

/// All adapter parameters, including the block that encodes descriptions.
#[derive(Clone, Debug, PartialEq)]
pub struct DescNetParams {
    pub description_block: Block<ParamId>,
    /// (m·d)×d fusion projection and its 1×d bias.
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
    /// d×d projection applied to the fused representation before gating.
    pub proj_w: ParamId,
    pub igm: Igm<ParamId>,
}

impl DescNetParams {
    pub fn register(store: &mut ParamStore, cfg: &ModelConfig, bank_size: usize, rng: &mut SeededRng) -> Self {
        let d = cfg.d_model;
        Self {
            description_block: Block::register(store, "descnet.description", d, cfg.d_ff, rng),
            fuse_w: store.normal("descnet.fuse.w", bank_size * d, d, rng),
            fuse_b: store.zeros("descnet.fuse.b", 1, d),
            proj_w: store.normal("descnet.proj.w", d, d, rng),
            igm: Igm::register(store, d, rng),
        }
    }

    pub fn vars(&self, g: &mut Graph<'_>) -> DescNetVars {
        DescNetVars {
            fuse_w: g.param(self.fuse_w),
            fuse_b: g.param(self.fuse_b),
            proj_w: g.param(self.proj_w),
            igm: self.igm.map(|&id| g.param(id)),
        }
    }

    pub fn scalar_count(d: usize, d_ff: usize, bank_size: usize) -> usize {
        Block::<ParamId>::scalar_count(d, d_ff) + bank_size * d * d + d + d * d + 9 * d * d + 5 * d
    }
}

/// Graph handles of the adapter weights used per token sequence.
#[derive(Clone, Debug)]
pub struct DescNetVars {
    pub fuse_w: Var,
    pub fuse_b: Var,
    pub proj_w: Var,
    pub igm: Igm<Var>,
}

/// Adapter behaviour switches taken from the model configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdapterSettings {
    pub attention: AttentionVariant,
    pub use_igm: bool,
    pub residual: bool,
    pub dropout: f64,
}

impl From<&ModelConfig> for AdapterSettings {
    fn from(cfg: &ModelConfig) -> Self {
        Self {
            attention: cfg.attention,
            use_igm: cfg.use_igm,
            residual: cfg.residual_adapter,
            dropout: cfg.descnet_dropout,
        }
    }
}

/// Encoded claim descriptions: one M_j×d matrix per description text.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptionBank {
    pub texts: Vec<String>,
    pub matrices: Vec<Mat>,
}

impl DescriptionBank {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }
}

/// Quasi-attention matrix (N×M) between queries and keys of equal width.
pub fn coda_graph(g: &mut Graph<'_>, q: Var, k: Var) -> Var {
    let scale = 1.0 / (g.shape(q).1 as f64).sqrt();
    let affinity = g.matmul_t(q, k);
    let affinity = g.scale(affinity, scale);
    let affinity = g.tanh(affinity);
    let dist = g.neg_l1(q, k);
    let dist = g.scale(dist, scale);
    let dist = g.sigmoid(dist);
    g.mul(affinity, dist)
}

/// `CoDA(Z, D) · D`: the description is both key and value.
pub fn coda_interact_graph(g: &mut Graph<'_>, z: Var, desc: Var) -> Var {
    let a = coda_graph(g, z, desc);
    g.matmul(a, desc)
}

/// `softmax(Z Dᵀ/√d) · D`.
pub fn dpa_interact_graph(g: &mut Graph<'_>, z: Var, desc: Var) -> Var {
    let scale = 1.0 / (g.shape(z).1 as f64).sqrt();
    let s = g.matmul_t(z, desc);
    let s = g.scale(s, scale);
    let a = g.softmax_rows(s);
    g.matmul(a, desc)
}

/// Concatenate, dropout, then `tanh(· W_f + b_f)`.
pub fn fuse_graph(
    g: &mut Graph<'_>,
    parts: &[Var],
    fuse_w: Var,
    fuse_b: Var,
    dropout: f64,
    mode: &mut Mode<'_>,
) -> Var {
    let cat = if parts.len() == 1 { parts[0] } else { g.concat_cols(parts) };
    let cat = mode.dropout(g, cat, dropout);
    let h = g.matmul(cat, fuse_w);
    let h = g.add_row(h, fuse_b);
    g.tanh(h)
}

/// Intermediate values of the gating mechanism, all 1×d except `output`.
#[derive(Clone, Copy, Debug)]
pub struct IgmNodes {
    pub pooled: Var,
    pub pooled_fused: Var,
    pub mu_c: Var,
    pub conflict: Var,
    pub mu_r: Var,
    pub refine: Var,
    pub gate: Var,
    pub output: Var,
}

/// Gating of `z` driven by the fused description features `zp`.
pub fn igm_graph(g: &mut Graph<'_>, zp: Var, z: Var, w: &Igm<Var>) -> IgmNodes {
    let p = g.max_pool(z);
    let pp = g.max_pool(zp);

    let lin2 = |g: &mut Graph<'_>, a: Var, wa: Var, b: Var, wb: Var, bias: Var| {
        let x = g.matmul(a, wa);
        let y = g.matmul(b, wb);
        let s = g.add(x, y);
        g.add_row(s, bias)
    };

    let pre = lin2(g, p, w.wc1, pp, w.wc2, w.bc1);
    let mu_c = g.sigmoid(pre);
    let not_mu_c = g.one_minus(mu_c);
    let a = g.mul(p, mu_c);
    let b = g.mul(pp, not_mu_c);
    let pre = lin2(g, a, w.wc3, b, w.wc4, w.bc2);
    let conflict = g.tanh(pre);

    let pre = lin2(g, p, w.wr1, pp, w.wr2, w.br1);
    let mu_r = g.sigmoid(pre);
    let a = g.mul(p, mu_r);
    let b = g.mul(pp, mu_r);
    let pre = lin2(g, a, w.wr3, b, w.wr4, w.br2);
    let refine = g.tanh(pre);

    let not_mu_r = g.one_minus(mu_r);
    let mixed = g.mul(not_mu_r, conflict);
    let adaptive = g.add(refine, mixed);
    let pre = g.matmul(adaptive, w.wa);
    let pre = g.add_row(pre, w.ba);
    let gate = g.tanh(pre);
    let output = g.mul_row(z, gate);
    IgmNodes {
        pooled: p,
        pooled_fused: pp,
        mu_c,
        conflict,
        mu_r,
        refine,
        gate,
        output,
    }
}

/// Full adapter on one token sequence against an encoded bank.
pub fn descnet_graph(
    g: &mut Graph<'_>,
    z: Var,
    bank: &[Var],
    w: &DescNetVars,
    settings: AdapterSettings,
    mode: &mut Mode<'_>,
) -> Var {
    let parts: Vec<Var> = bank
        .iter()
        .map(|&desc| match settings.attention {
            AttentionVariant::Coda => coda_interact_graph(g, z, desc),
            AttentionVariant::Dpa => dpa_interact_graph(g, z, desc),
        })
        .collect();
    let fused = fuse_graph(g, &parts, w.fuse_w, w.fuse_b, settings.dropout, mode);
    let projected = g.matmul(fused, w.proj_w);
    let out = if settings.use_igm {
        igm_graph(g, projected, z, &w.igm).output
    } else {
        g.add(z, projected)
    };
    if settings.residual {
        g.add(z, out)
    } else {
        out
    }
}

/// Quasi-attention weights between the rows of `q` and `k`.
pub fn coda(q: &Mat, k: &Mat) -> Mat {
    let mut g = Graph::new();
    let (qi, ki) = (g.input(q.clone()), g.input(k.clone()));
    let out = coda_graph(&mut g, qi, ki);
    g.value(out).clone()
}

pub fn coda_interact(z: &Mat, desc: &Mat) -> Mat {
    let mut g = Graph::new();
    let (zi, di) = (g.input(z.clone()), g.input(desc.clone()));
    let out = coda_interact_graph(&mut g, zi, di);
    g.value(out).clone()
}

pub fn dpa_interact(z: &Mat, desc: &Mat) -> Mat {
    let mut g = Graph::new();
    let (zi, di) = (g.input(z.clone()), g.input(desc.clone()));
    let out = dpa_interact_graph(&mut g, zi, di);
    g.value(out).clone()
}

pub fn fuse_descriptions(parts: &[Mat], fuse_w: &Mat, fuse_b: &Mat, dropout: f64, mode: &mut Mode<'_>) -> Mat {
    let mut g = Graph::new();
    let vars: Vec<Var> = parts.iter().map(|p| g.input(p.clone())).collect();
    let (w, b) = (g.input(fuse_w.clone()), g.input(fuse_b.clone()));
    let out = fuse_graph(&mut g, &vars, w, b, dropout, mode);
    g.value(out).clone()
}

/// Every intermediate of the gating mechanism as plain matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct IgmTrace {
    pub pooled: Mat,
    pub pooled_fused: Mat,
    pub mu_c: Mat,
    pub conflict: Mat,
    pub mu_r: Mat,
    pub refine: Mat,
    pub gate: Mat,
    pub output: Mat,
}

pub fn igm_trace(zp: &Mat, z: &Mat, weights: &Igm<Mat>) -> IgmTrace {
    let mut g = Graph::new();
    let (zpi, zi) = (g.input(zp.clone()), g.input(z.clone()));
    let w = weights.map(|m| g.input(m.clone()));
    let n = igm_graph(&mut g, zpi, zi, &w);
    let v = |x: Var| g.value(x).clone();
    IgmTrace {
        pooled: v(n.pooled),
        pooled_fused: v(n.pooled_fused),
        mu_c: v(n.mu_c),
        conflict: v(n.conflict),
        mu_r: v(n.mu_r),
        refine: v(n.refine),
        gate: v(n.gate),
        output: v(n.output),
    }
}

/// `Ẑ` from the projected fused features `zp` and token representations `z`.
pub fn igm(zp: &Mat, z: &Mat, weights: &Igm<Mat>) -> Mat {
    igm_trace(zp, z, weights).output
}
