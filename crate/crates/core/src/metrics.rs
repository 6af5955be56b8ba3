//! Token-level precision/recall/F1, Dice, span-count ratio and the paired
//! t-test over per-post F1 scores.
//!
//! Two averaging rules are used. Overall scores treat the in-span tokens of
//! each post as a set, score every post separately and average over posts.
//! Per-tag scores pool token counts over the whole corpus. Whenever both the
//! predicted and the gold positive sets are empty, precision and recall are 1;
//! otherwise an empty denominator gives 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::preprocess::Tag;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(true_pos: usize, predicted: usize, gold: usize) -> Self {
        if predicted == 0 && gold == 0 {
            return Self { p: 1.0, r: 1.0, f1: 1.0 };
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self::from_pr(ratio(true_pos, predicted), ratio(true_pos, gold))
    }

    pub fn from_pr(p: f64, r: f64) -> Self {
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Self { p, r, f1 }
    }
}

/// Token counts for one tag treated as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub true_pos: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl TagCounts {
    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.true_pos, self.predicted, self.gold)
    }
}

fn check_aligned(pred: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Input(format!(
            "{} predicted sequences for {} gold sequences",
            pred.len(),
            gold.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Input(format!(
                "post {i}: {} predicted tags for {} gold tags",
                p.len(),
                g.len()
            )));
        }
    }
    Ok(())
}

/// Set scores for the in-span tokens of a single post.
pub fn post_prf(pred: &[Tag], gold: &[Tag]) -> Prf {
    let (tp, np, ng) = in_span_counts(pred, gold);
    Prf::from_counts(tp, np, ng)
}

fn in_span_counts(pred: &[Tag], gold: &[Tag]) -> (usize, usize, usize) {
    let mut counts = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let (p, g) = (p.in_span(), g.in_span());
        counts.0 += usize::from(p && g);
        counts.1 += usize::from(p);
        counts.2 += usize::from(g);
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    /// Mean over posts of the per-post in-span scores.
    pub overall: Prf,
    /// In-span scores from token counts pooled over the corpus.
    pub overall_micro: Prf,
    pub per_tag: BTreeMap<char, Prf>,
}

/// Overall (macro over posts and pooled) and per-tag (pooled) scores.
pub fn token_prf(pred: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<TokenScores> {
    check_aligned(pred, gold)?;
    let mut tags = [TagCounts::default(); 3];
    let mut pooled = (0, 0, 0);
    let mut sum = Prf::default();
    for (p, g) in pred.iter().zip(gold) {
        for (&pt, &gt) in p.iter().zip(g) {
            tags[pt.index()].predicted += 1;
            tags[gt.index()].gold += 1;
            if pt == gt {
                tags[pt.index()].true_pos += 1;
            }
        }
        let (tp, np, ng) = in_span_counts(p, g);
        pooled = (pooled.0 + tp, pooled.1 + np, pooled.2 + ng);
        let s = Prf::from_counts(tp, np, ng);
        sum.p += s.p;
        sum.r += s.r;
        sum.f1 += s.f1;
    }
    let n = pred.len().max(1) as f64;
    let overall = if pred.is_empty() {
        Prf::from_counts(0, 0, 0)
    } else {
        Prf { p: sum.p / n, r: sum.r / n, f1: sum.f1 / n }
    };
    Ok(TokenScores {
        overall,
        overall_micro: Prf::from_counts(pooled.0, pooled.1, pooled.2),
        per_tag: Tag::ALL
            .iter()
            .map(|t| (t.as_char(), tags[t.index()].prf()))
            .collect(),
    })
}

/// 2|A∩B| / (|A|+|B|) for sorted or unsorted id sets; two empty sets give 1.
pub fn dice(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::BTreeSet;
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * a.intersection(&b).count() as f64 / (a.len() + b.len()) as f64
}

/// Positions of in-span tokens.
pub fn in_span_positions(tags: &[Tag]) -> Vec<usize> {
    tags.iter()
        .enumerate()
        .filter(|(_, t)| t.in_span())
        .map(|(i, _)| i)
        .collect()
}

/// Mean per-post Dice over in-span token positions.
pub fn corpus_dice(pred: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<f64> {
    check_aligned(pred, gold)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let total: f64 = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| dice(&in_span_positions(p), &in_span_positions(g)))
        .sum();
    Ok(total / pred.len() as f64)
}

/// Total predicted spans over total gold spans.
pub fn span_count_ratio(predicted: usize, gold: usize) -> Result<f64> {
    if gold == 0 {
        return Err(Error::Statistics("span count ratio undefined with no gold spans".into()));
    }
    Ok(predicted as f64 / gold as f64)
}

/// Number of maximal `B I*` runs in a tag sequence.
pub fn count_spans(tags: &[Tag]) -> usize {
    tags.iter().filter(|t| **t == Tag::B).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_difference: f64,
}

/// Paired two-sided t-test on per-post scores `a − b`.
pub fn paired_f1_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Statistics(format!(
            "paired test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Statistics("paired test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::Statistics("paired differences have zero variance".into()));
    }
    let t = mean / (var / n as f64).sqrt();
    let df = (n - 1) as f64;
    Ok(TTest {
        t,
        df,
        p_two_sided: student_t_two_sided(t, df),
        mean_difference: mean,
    })
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom, through the
/// regularized incomplete beta function.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Averaging rule behind `overall`.
    pub overall_rule: String,
    pub overall: Prf,
    pub overall_micro: Prf,
    pub per_tag: BTreeMap<char, Prf>,
    pub dsc: f64,
    /// Absent when the gold data has no spans.
    pub span_count_ratio: Option<f64>,
    pub n_posts: usize,
    /// Per-post in-span F1, kept for significance testing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_post_f1: Vec<f64>,
}

pub const MACRO_OVER_POSTS: &str = "macro_over_posts";

impl EvalReport {
    pub fn compute(pred: &[Vec<Tag>], gold: &[Vec<Tag>]) -> Result<Self> {
        let scores = token_prf(pred, gold)?;
        let pred_spans: usize = pred.iter().map(|t| count_spans(t)).sum();
        let gold_spans: usize = gold.iter().map(|t| count_spans(t)).sum();
        Ok(Self {
            overall_rule: MACRO_OVER_POSTS.into(),
            overall: scores.overall,
            overall_micro: scores.overall_micro,
            per_tag: scores.per_tag,
            dsc: corpus_dice(pred, gold)?,
            span_count_ratio: span_count_ratio(pred_spans, gold_spans).ok(),
            n_posts: pred.len(),
            per_post_f1: pred.iter().zip(gold).map(|(p, g)| post_prf(p, g).f1).collect(),
        })
    }

    /// Header line of the results table.
    pub fn table_header() -> String {
        format!(
            "{:<24} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6}",
            "model", "F1", "P", "R", "F1-B", "F1-I", "F1-O", "P-B", "P-I", "P-O", "R-B", "R-I", "R-O", "DSC"
        )
    }

    /// One results-table row.
    pub fn table_row(&self, name: &str) -> String {
        let tag = |c: char| self.per_tag.get(&c).copied().unwrap_or_default();
        let (b, i, o) = (tag('B'), tag('I'), tag('O'));
        format!(
            "{:<24} {:>6.4} {:>6.4} {:>6.4} | {:>6.4} {:>6.4} {:>6.4} | {:>6.4} {:>6.4} {:>6.4} | {:>6.4} {:>6.4} {:>6.4} | {:>6.4}",
            name,
            self.overall.f1,
            self.overall.p,
            self.overall.r,
            b.f1,
            i.f1,
            o.f1,
            b.p,
            i.p,
            o.p,
            b.r,
            i.r,
            o.r,
            self.dsc
        )
    }

    pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
        let mut out = Self::table_header();
        out.push('\n');
        for (name, report) in rows {
            let _ = writeln!(out, "{}", report.table_row(name));
        }
        out
    }
}
