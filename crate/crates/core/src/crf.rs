//! Linear-chain CRF over the three BIO tags.
//!
//! A tag sequence `y` over `N` positions scores
//! `start[y₀] + Σ e[t, y_t] + Σ trans[y_t, y_{t+1}] + end[y_{N−1}]`.
//! Transitions `O → I` and the start score of `I` are pinned to
//! [`FORBIDDEN`], which makes every decoded sequence a valid BIO sequence.
//! All recursions run in log space.

use ndarray::ArrayView2;

use crate::preprocess::Tag;
use crate::Mat;

pub const NUM_TAGS: usize = 3;

/// Score of a forbidden transition or start.
pub const FORBIDDEN: f64 = -1e4;

const I: usize = 1;
const O: usize = 2;

pub fn is_forbidden_transition(from: usize, to: usize) -> bool {
    from == O && to == I
}

pub fn is_forbidden_start(tag: usize) -> bool {
    tag == I
}

/// Transition, start and end scores.
#[derive(Clone, Debug, PartialEq)]
pub struct Transitions {
    pub trans: [[f64; NUM_TAGS]; NUM_TAGS],
    pub start: [f64; NUM_TAGS],
    pub end: [f64; NUM_TAGS],
}

impl Default for Transitions {
    /// All-zero scores with the forbidden entries pinned.
    fn default() -> Self {
        let mut t = Self {
            trans: [[0.0; NUM_TAGS]; NUM_TAGS],
            start: [0.0; NUM_TAGS],
            end: [0.0; NUM_TAGS],
        };
        t.pin();
        t
    }
}

impl Transitions {
    /// Builds from a 3×3 transition matrix and 1×3 start/end rows.
    pub fn from_mats(trans: &Mat, start: &Mat, end: &Mat) -> Self {
        let mut t = Self {
            trans: [[0.0; NUM_TAGS]; NUM_TAGS],
            start: [0.0; NUM_TAGS],
            end: [0.0; NUM_TAGS],
        };
        for a in 0..NUM_TAGS {
            for b in 0..NUM_TAGS {
                t.trans[a][b] = trans[[a, b]];
            }
            t.start[a] = start[[0, a]];
            t.end[a] = end[[0, a]];
        }
        t
    }

    /// Writes [`FORBIDDEN`] into the pinned entries.
    pub fn pin(&mut self) {
        self.trans[O][I] = FORBIDDEN;
        self.start[I] = FORBIDDEN;
    }

    /// Score of a complete tag sequence.
    pub fn score(&self, emissions: ArrayView2<f64>, tags: &[Tag]) -> f64 {
        assert_eq!(emissions.nrows(), tags.len());
        let Some(first) = tags.first() else { return 0.0 };
        let mut s = self.start[first.index()] + self.end[tags[tags.len() - 1].index()];
        for (t, tag) in tags.iter().enumerate() {
            s += emissions[[t, tag.index()]];
            if t > 0 {
                s += self.trans[tags[t - 1].index()][tag.index()];
            }
        }
        s
    }
}

fn log_sum_exp(xs: &[f64; NUM_TAGS]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Forward log-messages `α[t][y]`: log-sum of all prefixes ending in `y` at
/// `t`, including the emission at `t`.
fn forward(e: ArrayView2<f64>, tr: &Transitions) -> Vec<[f64; NUM_TAGS]> {
    let n = e.nrows();
    let mut alpha = vec![[0.0; NUM_TAGS]; n];
    for y in 0..NUM_TAGS {
        alpha[0][y] = tr.start[y] + e[[0, y]];
    }
    for t in 1..n {
        for y in 0..NUM_TAGS {
            let terms: [f64; NUM_TAGS] =
                std::array::from_fn(|p| alpha[t - 1][p] + tr.trans[p][y]);
            alpha[t][y] = log_sum_exp(&terms) + e[[t, y]];
        }
    }
    alpha
}

/// Backward log-messages `β[t][y]`: log-sum of all suffixes after `t`
/// given `y` at `t`, including the end score.
fn backward(e: ArrayView2<f64>, tr: &Transitions) -> Vec<[f64; NUM_TAGS]> {
    let n = e.nrows();
    let mut beta = vec![[0.0; NUM_TAGS]; n];
    beta[n - 1] = tr.end;
    for t in (0..n - 1).rev() {
        for y in 0..NUM_TAGS {
            let terms: [f64; NUM_TAGS] =
                std::array::from_fn(|q| tr.trans[y][q] + e[[t + 1, q]] + beta[t + 1][q]);
            beta[t][y] = log_sum_exp(&terms);
        }
    }
    beta
}

/// Log of the sum over all tag sequences of `exp(score)`.
pub fn log_partition(emissions: ArrayView2<f64>, tr: &Transitions) -> f64 {
    assert!(emissions.nrows() >= 1, "empty sequence");
    let alpha = forward(emissions, tr);
    let last = alpha[alpha.len() - 1];
    log_sum_exp(&std::array::from_fn(|y| last[y] + tr.end[y]))
}

/// `log Z − score(gold)`; non-negative up to rounding.
pub fn nll_loss(emissions: ArrayView2<f64>, tr: &Transitions, gold: &[Tag]) -> f64 {
    log_partition(emissions, tr) - tr.score(emissions, gold)
}

/// Per-position tag marginals via forward-backward (N×3, rows sum to 1).
pub fn marginal_tags(emissions: ArrayView2<f64>, tr: &Transitions) -> Mat {
    let n = emissions.nrows();
    assert!(n >= 1, "empty sequence");
    let alpha = forward(emissions, tr);
    let beta = backward(emissions, tr);
    let log_z = log_partition(emissions, tr);
    Mat::from_shape_fn((n, NUM_TAGS), |(t, y)| (alpha[t][y] + beta[t][y] - log_z).exp())
}

/// Highest-scoring tag sequence. At every comparison the lower tag index
/// (`B < I < O`) wins ties.
pub fn viterbi_decode(emissions: ArrayView2<f64>, tr: &Transitions) -> Vec<Tag> {
    let n = emissions.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut score = [0.0; NUM_TAGS];
    for y in 0..NUM_TAGS {
        score[y] = tr.start[y] + emissions[[0, y]];
    }
    let mut back = vec![[0usize; NUM_TAGS]; n];
    for t in 1..n {
        let mut next = [0.0; NUM_TAGS];
        for y in 0..NUM_TAGS {
            let mut best = 0;
            for p in 1..NUM_TAGS {
                if score[p] + tr.trans[p][y] > score[best] + tr.trans[best][y] {
                    best = p;
                }
            }
            back[t][y] = best;
            next[y] = score[best] + tr.trans[best][y] + emissions[[t, y]];
        }
        score = next;
    }
    let mut last = 0;
    for y in 1..NUM_TAGS {
        if score[y] + tr.end[y] > score[last] + tr.end[last] {
            last = y;
        }
    }
    let mut tags = vec![Tag::O; n];
    tags[n - 1] = Tag::from_index(last);
    for t in (1..n).rev() {
        last = back[t][last];
        tags[t - 1] = Tag::from_index(last);
    }
    tags
}

/// Loss and its partial derivatives. Derivatives at pinned entries are zero
/// so the optimizer never moves them.
#[derive(Clone, Debug)]
pub struct NllGradients {
    pub loss: f64,
    /// N×3: marginals minus the one-hot gold tags.
    pub emissions: Mat,
    /// 3×3: expected minus gold transition counts.
    pub transitions: Mat,
    /// 1×3
    pub start: Mat,
    /// 1×3
    pub end: Mat,
}

pub fn nll_gradients(emissions: ArrayView2<f64>, tr: &Transitions, gold: &[Tag]) -> NllGradients {
    let n = emissions.nrows();
    assert_eq!(n, gold.len(), "emissions and gold tags differ in length");
    assert!(n >= 1, "empty sequence");
    let alpha = forward(emissions, tr);
    let beta = backward(emissions, tr);
    let log_z = log_sum_exp(&std::array::from_fn(|y| alpha[n - 1][y] + tr.end[y]));
    let loss = log_z - tr.score(emissions, gold);

    let mut d_em =
        Mat::from_shape_fn((n, NUM_TAGS), |(t, y)| (alpha[t][y] + beta[t][y] - log_z).exp());
    let mut d_tr = Mat::zeros((NUM_TAGS, NUM_TAGS));
    for t in 0..n - 1 {
        for a in 0..NUM_TAGS {
            for b in 0..NUM_TAGS {
                d_tr[[a, b]] += (alpha[t][a] + tr.trans[a][b] + emissions[[t + 1, b]]
                    + beta[t + 1][b]
                    - log_z)
                    .exp();
            }
        }
    }
    let mut d_start = Mat::from_shape_fn((1, NUM_TAGS), |(_, y)| d_em[[0, y]]);
    let mut d_end = Mat::from_shape_fn((1, NUM_TAGS), |(_, y)| d_em[[n - 1, y]]);

    for (t, tag) in gold.iter().enumerate() {
        d_em[[t, tag.index()]] -= 1.0;
        if t > 0 {
            d_tr[[gold[t - 1].index(), tag.index()]] -= 1.0;
        }
    }
    d_start[[0, gold[0].index()]] -= 1.0;
    d_end[[0, gold[n - 1].index()]] -= 1.0;

    d_tr[[O, I]] = 0.0;
    d_start[[0, I]] = 0.0;

    NllGradients {
        loss,
        emissions: d_em,
        transitions: d_tr,
        start: d_start,
        end: d_end,
    }
}

/// True when no `I` starts the sequence or follows `O`.
pub fn is_valid_sequence(tags: &[Tag]) -> bool {
    tags.first() != Some(&Tag::I)
        && tags
            .windows(2)
            .all(|w| !is_forbidden_transition(w[0].index(), w[1].index()))
}
