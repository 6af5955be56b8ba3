//! Independent reference implementations used by the integration and
//! acceptance tests: exhaustive CRF enumeration and scalar-loop versions of
//! the adapter and encoder layers.

#![allow(dead_code)]

use claimspan::crf::Transitions;
use claimspan::descnet::Igm;
use claimspan::encoder::Block;
use claimspan::preprocess::Tag;
use claimspan::{Mat, SeededRng};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut SeededRng, rows: usize, cols: usize, std: f64) -> Mat {
    let normal = Normal::new(0.0, std).unwrap();
    Mat::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

/// Random scores with the forbidden entries pinned.
pub fn random_transitions(rng: &mut SeededRng) -> Transitions {
    let m = random_mat(rng, 5, 3, 1.0);
    let mut t = Transitions::default();
    for a in 0..3 {
        for b in 0..3 {
            t.trans[a][b] = m[[a, b]];
        }
        t.start[a] = m[[3, a]];
        t.end[a] = m[[4, a]];
    }
    t.pin();
    t
}

/// Every tag sequence of length `n` with no `I` at the start and no `O → I`.
pub fn valid_sequences(n: usize) -> Vec<Vec<Tag>> {
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        let tags: Vec<Tag> = (0..n)
            .map(|_| {
                let t = Tag::from_index(c % 3);
                c /= 3;
                t
            })
            .collect();
        let starts_inside = tags.first() == Some(&Tag::I);
        let broken = tags.windows(2).any(|w| w[0] == Tag::O && w[1] == Tag::I);
        if !starts_inside && !broken {
            out.push(tags);
        }
    }
    out
}

/// Unnormalized log score of one sequence, summed term by term.
pub fn sequence_score(e: &Mat, t: &Transitions, tags: &[Tag]) -> f64 {
    let mut s = t.start[tags[0].index()];
    for (i, tag) in tags.iter().enumerate() {
        s += e[[i, tag.index()]];
        if i > 0 {
            s += t.trans[tags[i - 1].index()][tag.index()];
        }
    }
    s + t.end[tags[tags.len() - 1].index()]
}

pub struct Enumerated {
    pub log_z: f64,
    pub marginals: Mat,
    pub best: Vec<Tag>,
}

/// Partition function, marginals and argmax by listing every valid sequence.
pub fn enumerate_crf(e: &Mat, t: &Transitions) -> Enumerated {
    let n = e.nrows();
    let seqs = valid_sequences(n);
    let scores: Vec<f64> = seqs.iter().map(|s| sequence_score(e, t, s)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut marginals = Mat::zeros((n, 3));
    for (seq, w) in seqs.iter().zip(&weights) {
        for (i, tag) in seq.iter().enumerate() {
            marginals[[i, tag.index()]] += w / total;
        }
    }
    let best_idx = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
    Enumerated {
        log_z: max + total.ln(),
        marginals,
        best: seqs[best_idx].clone(),
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `tanh(q·k/√d) σ(−‖q−k‖₁/√d)` entry by entry.
pub fn coda_scalar(q: &Mat, k: &Mat) -> Mat {
    let d = q.ncols();
    let scale = (d as f64).sqrt();
    let mut out = Mat::zeros((q.nrows(), k.nrows()));
    for i in 0..q.nrows() {
        for j in 0..k.nrows() {
            let mut dot = 0.0;
            let mut l1 = 0.0;
            for c in 0..d {
                dot += q[[i, c]] * k[[j, c]];
                l1 += (q[[i, c]] - k[[j, c]]).abs();
            }
            out[[i, j]] = (dot / scale).tanh() * sigmoid(-l1 / scale);
        }
    }
    out
}

pub fn matmul_scalar(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[[i, k]] * b[[k, j]];
            }
            out[[i, j]] = s;
        }
    }
    out
}

pub fn coda_interact_scalar(z: &Mat, desc: &Mat) -> Mat {
    matmul_scalar(&coda_scalar(z, desc), desc)
}

pub fn softmax_row_scalar(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|v| v / total).collect()
}

pub fn dpa_interact_scalar(z: &Mat, desc: &Mat) -> Mat {
    let scale = (z.ncols() as f64).sqrt();
    let mut a = Mat::zeros((z.nrows(), desc.nrows()));
    for i in 0..z.nrows() {
        let row: Vec<f64> = (0..desc.nrows())
            .map(|j| (0..z.ncols()).map(|c| z[[i, c]] * desc[[j, c]]).sum::<f64>() / scale)
            .collect();
        for (j, v) in softmax_row_scalar(&row).into_iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    matmul_scalar(&a, desc)
}

/// `tanh([parts] W + b)` without dropout.
pub fn fuse_scalar(parts: &[Mat], w: &Mat, b: &Mat) -> Mat {
    let n = parts[0].nrows();
    let mut out = Mat::zeros((n, w.ncols()));
    for i in 0..n {
        for j in 0..w.ncols() {
            let mut s = b[[0, j]];
            let mut row = 0;
            for p in parts {
                for c in 0..p.ncols() {
                    s += p[[i, c]] * w[[row, j]];
                    row += 1;
                }
            }
            out[[i, j]] = s.tanh();
        }
    }
    out
}

fn max_pool_scalar(z: &Mat) -> Vec<f64> {
    (0..z.ncols())
        .map(|c| (0..z.nrows()).map(|r| z[[r, c]]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// `x W` for a row vector.
fn vec_mat(x: &[f64], w: &Mat) -> Vec<f64> {
    (0..w.ncols())
        .map(|j| x.iter().enumerate().map(|(k, v)| v * w[[k, j]]).sum())
        .collect()
}

pub struct IgmScalar {
    pub mu_c: Vec<f64>,
    pub conflict: Vec<f64>,
    pub mu_r: Vec<f64>,
    pub refine: Vec<f64>,
    pub gate: Vec<f64>,
    pub output: Mat,
}

/// Conflict gate, refine gate and adaptive gating with explicit loops.
pub fn igm_scalar(zp: &Mat, z: &Mat, w: &Igm<Mat>) -> IgmScalar {
    let d = z.ncols();
    let p = max_pool_scalar(z);
    let pp = max_pool_scalar(zp);
    let add3 = |a: Vec<f64>, b: Vec<f64>, bias: &Mat| -> Vec<f64> {
        (0..d).map(|j| a[j] + b[j] + bias[[0, j]]).collect()
    };
    let mu_c: Vec<f64> = add3(vec_mat(&p, &w.wc1), vec_mat(&pp, &w.wc2), &w.bc1)
        .into_iter()
        .map(sigmoid)
        .collect();
    let pc: Vec<f64> = (0..d).map(|j| p[j] * mu_c[j]).collect();
    let ppc: Vec<f64> = (0..d).map(|j| pp[j] * (1.0 - mu_c[j])).collect();
    let conflict: Vec<f64> = add3(vec_mat(&pc, &w.wc3), vec_mat(&ppc, &w.wc4), &w.bc2)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let mu_r: Vec<f64> = add3(vec_mat(&p, &w.wr1), vec_mat(&pp, &w.wr2), &w.br1)
        .into_iter()
        .map(sigmoid)
        .collect();
    let pr: Vec<f64> = (0..d).map(|j| p[j] * mu_r[j]).collect();
    let ppr: Vec<f64> = (0..d).map(|j| pp[j] * mu_r[j]).collect();
    let refine: Vec<f64> = add3(vec_mat(&pr, &w.wr3), vec_mat(&ppr, &w.wr4), &w.br2)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let adaptive: Vec<f64> = (0..d).map(|j| refine[j] + (1.0 - mu_r[j]) * conflict[j]).collect();
    let gate: Vec<f64> = vec_mat(&adaptive, &w.wa)
        .into_iter()
        .enumerate()
        .map(|(j, v)| (v + w.ba[[0, j]]).tanh())
        .collect();
    let output = Mat::from_shape_fn(z.raw_dim(), |(i, j)| gate[j] * z[[i, j]]);
    IgmScalar { mu_c, conflict, mu_r, refine, gate, output }
}

pub fn random_igm(rng: &mut SeededRng, d: usize, std: f64) -> Igm<Mat> {
    let mut m = |r| random_mat(rng, r, d, std);
    Igm {
        wc1: m(d),
        wc2: m(d),
        wc3: m(d),
        wc4: m(d),
        bc1: m(1),
        bc2: m(1),
        wr1: m(d),
        wr2: m(d),
        wr3: m(d),
        wr4: m(d),
        br1: m(1),
        br2: m(1),
        wa: m(d),
        ba: m(1),
    }
}

fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn layer_norm_scalar(x: &Mat, gain: &Mat, bias: &Mat) -> Mat {
    let d = x.ncols() as f64;
    let mut out = x.clone();
    for i in 0..x.nrows() {
        let mean = (0..x.ncols()).map(|j| x[[i, j]]).sum::<f64>() / d;
        let var = (0..x.ncols()).map(|j| (x[[i, j]] - mean).powi(2)).sum::<f64>() / d;
        for j in 0..x.ncols() {
            out[[i, j]] = (x[[i, j]] - mean) / (var + 1e-12).sqrt() * gain[[0, j]] + bias[[0, j]];
        }
    }
    out
}

/// Post-norm block in evaluation mode, one head at a time.
pub fn encoder_block_scalar(z: &Mat, b: &Block<Mat>, heads: usize) -> Mat {
    let (n, d) = z.dim();
    let dh = d / heads;
    let q = matmul_scalar(z, &b.wq);
    let k = matmul_scalar(z, &b.wk);
    let v = matmul_scalar(z, &b.wv);
    let mut cat = Mat::zeros((n, d));
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        for i in 0..n {
            let scores: Vec<f64> = (0..n)
                .map(|j| cols.clone().map(|c| q[[i, c]] * k[[j, c]]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let a = softmax_row_scalar(&scores);
            for c in cols.clone() {
                cat[[i, c]] = (0..n).map(|j| a[j] * v[[j, c]]).sum();
            }
        }
    }
    let attn = matmul_scalar(&cat, &b.wo);
    let x = layer_norm_scalar(&(z + &attn), &b.ln1_gain, &b.ln1_bias);
    let hidden = matmul_scalar(&x, &b.w1).mapv(gelu_scalar);
    let ff = matmul_scalar(&hidden, &b.w2);
    layer_norm_scalar(&(&x + &ff), &b.ln2_gain, &b.ln2_bias)
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
