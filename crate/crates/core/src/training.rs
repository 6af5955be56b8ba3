//! Adam, the training loop with early stopping on validation Dice, the
//! finite-difference gradient checker and the adapter placement sweep.

use web_time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autodiff::Gradients;
use crate::config::{ModelConfig, TrainConfig};
use crate::crf::{is_forbidden_start, is_forbidden_transition, NUM_TAGS};
use crate::encoder::Mode;
use crate::metrics::EvalReport;
use crate::model::{ClaimTagger, Example, PreparedPost};
use crate::params::{ParamId, ParamStore};
use crate::preprocess::{AnnotatedPost, CharSpan, Tag};
use crate::vocab::Vocab;
use crate::{Error, Mat, Result, SeededRng};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
    pub step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Mat> = store.tensors().iter().map(|t| Mat::zeros(t.raw_dim())).collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One bias-corrected Adam update, tensor by tensor in store order.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, g), m), v) in store
        .tensors_mut()
        .iter_mut()
        .zip(&grads.grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        });
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_p: f64,
    pub val_r: f64,
    pub val_f1: f64,
    pub val_dsc: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation Dice.
    pub model: ClaimTagger,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Vocabulary over the training texts and the description texts.
pub fn build_vocab(train: &[AnnotatedPost], descriptions: &[String], cap: usize) -> Vocab {
    Vocab::build(
        train
            .iter()
            .map(|p| p.text.as_str())
            .chain(descriptions.iter().map(String::as_str)),
        cap,
    )
}

pub fn prepare(posts: &[AnnotatedPost]) -> Result<Vec<PreparedPost>> {
    posts
        .iter()
        .map(|p| {
            PreparedPost::new(p).map_err(|e| Error::Input(format!("post {}: {e}", p.id)))
        })
        .collect()
}

/// Predicted tags and spans for every post.
pub fn predict(model: &ClaimTagger, prepared: &[PreparedPost]) -> Vec<(Vec<Tag>, Vec<CharSpan>)> {
    let bank = model.encode_descriptions();
    prepared.iter().map(|p| model.predict_post(p, bank.as_ref())).collect()
}

/// Scores the model on annotated posts.
pub fn evaluate(model: &ClaimTagger, prepared: &[PreparedPost]) -> Result<EvalReport> {
    let pred: Vec<Vec<Tag>> = predict(model, prepared).into_iter().map(|(t, _)| t).collect();
    let gold: Vec<Vec<Tag>> = prepared.iter().map(|p| p.gold.clone()).collect();
    EvalReport::compute(&pred, &gold)
}

/// Trains from scratch. The same seeds give bitwise-identical weights and
/// logs apart from the wall-clock field.
pub fn train(
    train_posts: &[AnnotatedPost],
    val_posts: &[AnnotatedPost],
    descriptions: &[String],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    if train_posts.is_empty() || val_posts.is_empty() {
        return Err(Error::Input("training and validation corpora must be non-empty".into()));
    }
    let vocab = build_vocab(train_posts, descriptions, model_cfg.vocab_size);
    let mut model = ClaimTagger::new(model_cfg.clone(), vocab, descriptions.to_vec())?;
    let train_prep = prepare(train_posts)?;
    let val_prep = prepare(val_posts)?;
    let examples: Vec<Example> = train_prep.iter().filter_map(|p| model.example(p)).collect();
    if examples.is_empty() {
        return Err(Error::Input("no training post has any token".into()));
    }

    let mut rng = SeededRng::seed_from_u64(train_cfg.seed);
    let mut adam = AdamState::new(&model.store);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let start = Instant::now();
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ClaimTagger)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=train_cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&batch, &mut Mode::Train(&mut rng));
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("batch loss {loss}; lower the learning rate"),
                });
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut model.store, &grads, &mut adam, train_cfg.learning_rate);
            model.crf.pin(&mut model.store);
        }
        let report = evaluate(&model, &val_prep)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / examples.len() as f64,
            val_p: report.overall.p,
            val_r: report.overall.r,
            val_f1: report.overall.f1,
            val_dsc: report.dsc,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.push(record);
        if best.as_ref().is_none_or(|(dsc, _, _)| report.dsc > *dsc) {
            best = Some((report.dsc, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= train_cfg.patience {
                stopped_early = epoch < train_cfg.max_epochs;
                break;
            }
        }
    }
    let (_, best_epoch, model) = best.expect("at least one epoch runs");
    Ok(TrainOutcome { model, best_epoch, log, stopped_early })
}

/// Per-example average loss of the current weights without dropout.
pub fn mean_loss(model: &ClaimTagger, examples: &[Example]) -> f64 {
    let batch: Vec<&Example> = examples.iter().collect();
    model.batch_loss(&batch, &mut Mode::Eval)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst entry.
    pub offending: Option<(String, usize)>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Smallest denominator of the relative error. Below it entries compare by
/// absolute difference: with a step of 1e-5 and a loss of order 10, central
/// differences carry rounding noise near 1e-10, which would otherwise
/// dominate the relative error of gradients around 1e-6.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Standard deviation of the noise added to the gradient-check weights.
pub const GRAD_CHECK_WEIGHT_STD: f64 = 0.5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// The small model and batch the gradient check runs on: d=8, two blocks,
/// two descriptions, five tokens.
pub fn grad_check_instance(base: &ModelConfig) -> Result<(ClaimTagger, Vec<Example>)> {
    let cfg = ModelConfig {
        d_model: 8,
        heads: 2,
        d_ff: 16,
        layers: 2,
        max_len: 8,
        vocab_size: 0,
        adapter_layer: base.adapter_layer.min(2),
        ..base.clone()
    };
    let vocab = Vocab::build(["garlic water cures the virus", "bleach kills covid fast"], 0);
    let descriptions = vec![
        "garlic cures virus".to_string(),
        "bleach kills covid".to_string(),
    ];
    let mut model = ClaimTagger::new(cfg, vocab, descriptions)?;
    // Redraw every weight at a larger scale so gradients are well above
    // finite-difference noise and nonlinearities leave their linear range.
    let mut rng = SeededRng::seed_from_u64(base.seed);
    let normal = rand_distr::Normal::new(0.0, GRAD_CHECK_WEIGHT_STD).expect("valid std");
    for t in model.store.tensors_mut() {
        t.mapv_inplace(|v| v + rng.sample(normal));
    }
    model.crf.pin(&mut model.store);
    let words = ["garlic", "water", "cures", "the", "virus"];
    let ids = words.iter().map(|w| model.vocab.id(w)).collect();
    let tags = vec![Tag::B, Tag::I, Tag::I, Tag::O, Tag::B];
    Ok((model, vec![Example { ids, tags }]))
}

fn is_pinned(model: &ClaimTagger, id: ParamId, flat: usize) -> bool {
    if id == model.crf.transitions {
        is_forbidden_transition(flat / NUM_TAGS, flat % NUM_TAGS)
    } else if id == model.crf.start {
        is_forbidden_start(flat)
    } else {
        false
    }
}

/// Central finite differences of the batch loss for every free parameter
/// entry. Dropout masks are replayed from `seed` on every evaluation.
pub fn numeric_gradients(model: &ClaimTagger, batch: &[Example], seed: u64) -> Gradients {
    let refs: Vec<&Example> = batch.iter().collect();
    let mut probe = model.clone();
    let mut out = Gradients::zeros_like(&model.store);
    let loss = |m: &ClaimTagger| {
        let mut rng = SeededRng::seed_from_u64(seed);
        m.batch_loss(&refs, &mut Mode::Train(&mut rng))
    };
    for id in model.store.ids().collect::<Vec<_>>() {
        let len = model.store.get(id).len();
        for flat in 0..len {
            if is_pinned(model, id, flat) {
                continue;
            }
            let original = model.store.get(id).as_slice().expect("standard layout")[flat];
            let set = |p: &mut ClaimTagger, v: f64| {
                p.store.get_mut(id).as_slice_mut().expect("standard layout")[flat] = v;
            };
            set(&mut probe, original + GRAD_CHECK_STEP);
            let up = loss(&probe);
            set(&mut probe, original - GRAD_CHECK_STEP);
            let down = loss(&probe);
            set(&mut probe, original);
            out.get_mut(id).as_slice_mut().expect("standard layout")[flat] =
                (up - down) / (2.0 * GRAD_CHECK_STEP);
        }
    }
    out
}

/// Compares two gradient buffers entry by entry, skipping pinned entries.
pub fn compare_gradients(
    model: &ClaimTagger,
    analytic: &Gradients,
    numeric: &Gradients,
    tolerance: f64,
) -> GradCheckReport {
    let mut worst = (0.0, None);
    let mut checked = 0;
    for id in model.store.ids() {
        let a = analytic.get(id).as_slice().expect("standard layout");
        let n = numeric.get(id).as_slice().expect("standard layout");
        for flat in 0..a.len() {
            if is_pinned(model, id, flat) {
                continue;
            }
            checked += 1;
            let err = relative_error(a[flat], n[flat]);
            if !(err <= worst.0) {
                worst = (err, Some((model.store.name(id).to_string(), flat)));
            }
        }
    }
    GradCheckReport {
        max_rel_err: worst.0,
        offending: worst.1,
        checked,
        tolerance,
        passed: worst.0 < tolerance,
    }
}

/// Analytic gradients of the full loss against central differences on the
/// small instance built from `base` (adapter flags and dropout are kept).
pub fn grad_check(base: &ModelConfig, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    let (model, batch) = grad_check_instance(base)?;
    let refs: Vec<&Example> = batch.iter().collect();
    let mut rng = SeededRng::seed_from_u64(seed);
    let (_, analytic) = model.loss_and_gradients(&refs, &mut Mode::Train(&mut rng));
    let numeric = numeric_gradients(&model, &batch, seed);
    Ok(compare_gradients(&model, &analytic, &numeric, tolerance))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub layer: usize,
    pub f1: f64,
    pub dsc: f64,
    pub best_epoch: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Whether F1 never decreases as the adapter moves deeper.
    pub f1_monotone_in_layer: bool,
}

/// Trains one model per adapter position and scores each on `test`.
pub fn layer_sweep(
    train_posts: &[AnnotatedPost],
    val_posts: &[AnnotatedPost],
    test_posts: &[AnnotatedPost],
    descriptions: &[String],
    base: &ModelConfig,
    train_cfg: &TrainConfig,
    layers: &[usize],
) -> Result<SweepReport> {
    let test_prep = prepare(test_posts)?;
    let mut rows = Vec::with_capacity(layers.len());
    for &layer in layers {
        let cfg = ModelConfig { adapter_layer: layer, ..base.clone() };
        let outcome = train(train_posts, val_posts, descriptions, &cfg, train_cfg, |_| {})?;
        let report = evaluate(&outcome.model, &test_prep)?;
        rows.push(SweepRow {
            layer,
            f1: report.overall.f1,
            dsc: report.dsc,
            best_epoch: outcome.best_epoch,
        });
    }
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.layer);
    let f1_monotone_in_layer = sorted.windows(2).all(|w| w[1].f1 >= w[0].f1);
    Ok(SweepReport { rows, f1_monotone_in_layer })
}

/// Splits off the last `fraction` of the posts (at least one) as validation.
pub fn split_validation(posts: &[AnnotatedPost], fraction: f64) -> Result<(Vec<AnnotatedPost>, Vec<AnnotatedPost>)> {
    if posts.len() < 2 {
        return Err(Error::Input("need at least two posts to hold out validation data".into()));
    }
    let n_val = ((posts.len() as f64 * fraction).round() as usize).clamp(1, posts.len() - 1);
    let cut = posts.len() - n_val;
    Ok((posts[..cut].to_vec(), posts[cut..].to_vec()))
}
