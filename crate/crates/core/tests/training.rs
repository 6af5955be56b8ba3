use claimspan::autodiff::Graph;
use claimspan::checkpoint::Checkpoint;
use claimspan::config::{AttentionVariant, ModelConfig, TrainConfig};
use claimspan::crf::{is_forbidden_start, is_forbidden_transition, FORBIDDEN, NUM_TAGS};
use claimspan::encoder::{embed_graph, Mode};
use claimspan::model::{ClaimTagger, Example};
use claimspan::preprocess::{AnnotatedPost, CharSpan};
use claimspan::synthetic::{generate_corpus, synthetic_bank};
use claimspan::training::*;
use claimspan::vocab::Vocab;
use claimspan::SeededRng;
use rand::SeedableRng;

fn small_model() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        heads: 2,
        d_ff: 32,
        layers: 2,
        max_len: 32,
        adapter_layer: 2,
        ..ModelConfig::default()
    }
}

fn small_train(epochs: usize) -> TrainConfig {
    TrainConfig { batch_size: 8, max_epochs: epochs, patience: epochs, ..TrainConfig::default() }
}

fn pinned_entries_hold(model: &ClaimTagger) -> bool {
    let trans = model.store.get(model.crf.transitions);
    let start = model.store.get(model.crf.start);
    (0..NUM_TAGS).all(|from| {
        (0..NUM_TAGS).all(|to| !is_forbidden_transition(from, to) || trans[[from, to]] == FORBIDDEN)
    }) && (0..NUM_TAGS).all(|t| !is_forbidden_start(t) || start[[0, t]] == FORBIDDEN)
}

#[test]
fn embedding_is_token_row_plus_position_row() {
    let vocab = Vocab::build(["garlic cures the virus"], 0);
    let model = ClaimTagger::new(small_model(), vocab, synthetic_bank()).unwrap();
    let ids = [3, 1, 4, 1];
    let mut g = Graph::with_params(&model.store);
    let tok = g.param(model.encoder.token_embedding);
    let pos = g.param(model.encoder.positional_embedding);
    let z = embed_graph(&mut g, &ids, tok, pos);
    let tok_table = model.store.get(model.encoder.token_embedding);
    let pos_table = model.store.get(model.encoder.positional_embedding);
    let out = g.value(z);
    for (t, &id) in ids.iter().enumerate() {
        for c in 0..16 {
            assert_eq!(out[[t, c]], tok_table[[id, c]] + pos_table[[t, c]]);
        }
    }
}

#[test]
fn same_seed_gives_identical_weights_and_logs() {
    let posts = generate_corpus(48, 3);
    let (tr, val) = posts.split_at(40);
    let run = || train(tr, val, &synthetic_bank(), &small_model(), &small_train(2), |_| {}).unwrap();
    let (a, b) = (run(), run());
    let ja = serde_json::to_string(&Checkpoint::from_model(&a.model, None)).unwrap();
    let jb = serde_json::to_string(&Checkpoint::from_model(&b.model, None)).unwrap();
    assert!(ja == jb, "checkpoints differ");
    let mask = |log: &[EpochRecord]| {
        log.iter()
            .map(|r| EpochRecord { elapsed_s: 0.0, ..r.clone() })
            .collect::<Vec<_>>()
    };
    assert_eq!(mask(&a.log), mask(&b.log));

    let other = TrainConfig { seed: 1, ..small_train(2) };
    let c = train(tr, val, &synthetic_bank(), &small_model(), &other, |_| {}).unwrap();
    let jc = serde_json::to_string(&Checkpoint::from_model(&c.model, None)).unwrap();
    assert!(ja != jc, "a different shuffle seed should change the weights");
}

#[test]
fn memorizes_two_posts() {
    let posts = vec![
        AnnotatedPost::new("a", "they say garlic cures covid overnight", vec![CharSpan::new(9, 28)]),
        AnnotatedPost::new("b", "masks cause oxygen loss in kids , trust me", vec![CharSpan::new(0, 31)]),
    ];
    let model_cfg = ModelConfig { dropout: 0.0, descnet_dropout: 0.0, ..small_model() };
    let train_cfg = TrainConfig { learning_rate: 1e-2, batch_size: 2, max_epochs: 80, patience: 80, ..TrainConfig::default() };
    let outcome = train(&posts, &posts, &synthetic_bank(), &model_cfg, &train_cfg, |_| {}).unwrap();
    let prepared = prepare(&posts).unwrap();
    for (p, (tags, spans)) in prepared.iter().zip(predict(&outcome.model, &prepared)) {
        assert_eq!(tags, p.gold);
        assert_eq!(spans.len(), 1);
    }
    let last = outcome.log.last().unwrap();
    assert!(last.train_loss < outcome.log[0].train_loss);
}

#[test]
fn two_example_loss_reaches_its_minimum() {
    // The CRF negative log-likelihood is bounded below by zero.
    let posts = vec![
        AnnotatedPost::new("a", "garlic cures covid", vec![CharSpan::new(0, 18)]),
        AnnotatedPost::new("b", "stay home , bleach kills the virus", vec![CharSpan::new(12, 34)]),
    ];
    let cfg = ModelConfig { dropout: 0.0, descnet_dropout: 0.0, ..small_model() };
    let vocab = build_vocab(&posts, &synthetic_bank(), 0);
    let mut model = ClaimTagger::new(cfg, vocab, synthetic_bank()).unwrap();
    let examples: Vec<Example> = prepare(&posts).unwrap().iter().filter_map(|p| model.example(p)).collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let mut adam = AdamState::new(&model.store);
    for _ in 0..400 {
        let (_, grads) = model.loss_and_gradients(&refs, &mut Mode::Eval);
        adam_step(&mut model.store, &grads, &mut adam, 1e-2);
        model.crf.pin(&mut model.store);
    }
    let loss = mean_loss(&model, &examples);
    assert!((0.0..1e-3).contains(&loss), "loss {loss}");
    assert!(pinned_entries_hold(&model));
}

#[test]
fn early_stopping_waits_exactly_patience_epochs() {
    let posts = generate_corpus(24, 5);
    let (tr, val) = posts.split_at(20);
    // A negligible learning rate leaves validation Dice flat after epoch one.
    let cfg = TrainConfig { learning_rate: 1e-12, max_epochs: 10, patience: 3, batch_size: 8, ..TrainConfig::default() };
    let mut seen = Vec::new();
    let outcome = train(tr, val, &synthetic_bank(), &small_model(), &cfg, |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, [1, 2, 3, 4]);
    assert_eq!(outcome.best_epoch, 1);
    assert!(outcome.stopped_early);
    assert_eq!(outcome.log.len(), 4);
}

#[test]
fn training_never_moves_pinned_transitions() {
    let posts = generate_corpus(30, 9);
    let (tr, val) = posts.split_at(24);
    let cfg = TrainConfig { learning_rate: 5e-2, ..small_train(2) };
    let outcome = train(tr, val, &synthetic_bank(), &small_model(), &cfg, |_| {}).unwrap();
    assert!(pinned_entries_hold(&outcome.model));

    let (model, batch) = grad_check_instance(&small_model()).unwrap();
    let refs: Vec<&Example> = batch.iter().collect();
    let (_, grads) = model.loss_and_gradients(&refs, &mut Mode::Eval);
    let gt = grads.get(model.crf.transitions);
    let gs = grads.get(model.crf.start);
    for from in 0..NUM_TAGS {
        for to in 0..NUM_TAGS {
            if is_forbidden_transition(from, to) {
                assert_eq!(gt[[from, to]], 0.0);
            }
        }
        if is_forbidden_start(from) {
            assert_eq!(gs[[0, from]], 0.0);
        }
    }
}

fn checked_gradients(cfg: &ModelConfig) -> (ClaimTagger, claimspan::autodiff::Gradients, claimspan::autodiff::Gradients) {
    let (model, batch) = grad_check_instance(cfg).unwrap();
    let refs: Vec<&Example> = batch.iter().collect();
    let mut rng = SeededRng::seed_from_u64(4);
    let (_, analytic) = model.loss_and_gradients(&refs, &mut Mode::Train(&mut rng));
    let numeric = numeric_gradients(&model, &batch, 4);
    (model, analytic, numeric)
}

#[test]
fn gradient_check_catches_a_corrupted_entry() {
    let (model, mut analytic, numeric) = checked_gradients(&ModelConfig::default());
    let clean = compare_gradients(&model, &analytic, &numeric, 1e-4);
    assert!(clean.passed, "clean gradients: {clean:?}");
    assert!(clean.checked > 1000);

    let target = model.store.id("descnet.fuse.w").unwrap();
    let name = model.store.name(target).to_string();
    let slot = &mut analytic.get_mut(target).as_slice_mut().unwrap()[3];
    *slot = *slot * 1.01 + 1e-3;
    let broken = compare_gradients(&model, &analytic, &numeric, 1e-4);
    assert!(!broken.passed);
    assert_eq!(broken.offending, Some((name, 3)));
}

#[test]
fn gradient_check_passes_for_every_adapter_variant() {
    let variants = [
        ModelConfig::default(),
        ModelConfig { use_descnet: false, ..ModelConfig::default() },
        ModelConfig { attention: AttentionVariant::Dpa, ..ModelConfig::default() },
        ModelConfig { use_igm: false, ..ModelConfig::default() },
        ModelConfig { residual_adapter: true, adapter_layer: 1, ..ModelConfig::default() },
    ];
    for cfg in variants {
        let report = grad_check(&cfg, 11, 1e-4).unwrap();
        assert!(report.passed, "{cfg:?}: {report:?}");
    }
}

#[test]
fn layer_sweep_reports_one_row_per_layer() {
    let posts = generate_corpus(30, 2);
    let (tr, rest) = posts.split_at(24);
    let (val, test) = rest.split_at(3);
    let report = layer_sweep(tr, val, test, &synthetic_bank(), &small_model(), &small_train(1), &[2, 1]).unwrap();
    assert_eq!(report.rows.iter().map(|r| r.layer).collect::<Vec<_>>(), [2, 1]);
    let by_layer = |l: usize| report.rows.iter().find(|r| r.layer == l).unwrap().f1;
    assert_eq!(report.f1_monotone_in_layer, by_layer(2) >= by_layer(1));
}

#[test]
fn empty_inputs_are_rejected() {
    let posts = generate_corpus(4, 0);
    let cfg = small_train(1);
    assert!(train(&[], &posts, &synthetic_bank(), &small_model(), &cfg, |_| {}).is_err());
    assert!(train(&posts, &[], &synthetic_bank(), &small_model(), &cfg, |_| {}).is_err());
    let no_bank = train(&posts, &posts, &[], &small_model(), &cfg, |_| {});
    assert!(no_bank.is_err());
    let plain = ModelConfig { use_descnet: false, ..small_model() };
    assert!(train(&posts, &posts, &[], &plain, &cfg, |_| {}).is_ok());
}
