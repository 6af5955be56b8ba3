use claimspan::metrics::*;
use claimspan::preprocess::Tag;
use proptest::prelude::*;

fn tags(s: &str) -> Vec<Tag> {
    s.chars()
        .map(|c| match c {
            'B' => Tag::B,
            'I' => Tag::I,
            _ => Tag::O,
        })
        .collect()
}

/// Per-tag precision and recall counted with plain loops over the pooled corpus.
fn per_tag_scalar(pred: &[Vec<Tag>], gold: &[Vec<Tag>], tag: Tag) -> (f64, f64) {
    let (mut tp, mut np, mut ng) = (0.0, 0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        for i in 0..p.len() {
            if p[i] == tag {
                np += 1.0;
            }
            if g[i] == tag {
                ng += 1.0;
            }
            if p[i] == tag && g[i] == tag {
                tp += 1.0;
            }
        }
    }
    if np == 0.0 && ng == 0.0 {
        return (1.0, 1.0);
    }
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    (div(tp, np), div(tp, ng))
}

fn tag_seq() -> impl Strategy<Value = Vec<Tag>> {
    prop::collection::vec(prop::sample::select(Tag::ALL.to_vec()), 1..12)
}

fn paired_corpus() -> impl Strategy<Value = (Vec<Vec<Tag>>, Vec<Vec<Tag>>)> {
    prop::collection::vec(tag_seq(), 1..6).prop_flat_map(|gold| {
        let pred = gold
            .iter()
            .map(|g| prop::collection::vec(prop::sample::select(Tag::ALL.to_vec()), g.len()))
            .collect::<Vec<_>>();
        (pred, Just(gold))
    })
}

#[test]
fn dice_fixture() {
    // |A| = 4, |B| = 6, three shared ids.
    assert_eq!(dice(&[1, 2, 3, 4], &[2, 3, 4, 5, 6, 7]), 0.6);
    assert_eq!(dice(&[3, 4, 5, 6, 7], &[1, 2, 3, 4, 5]), 0.6);
    assert_eq!(dice(&[], &[]), 1.0);
    assert_eq!(dice(&[1], &[]), 0.0);
}

#[test]
fn eighty_five_of_one_hundred() {
    let gold = vec![vec![Tag::B; 100]];
    let mut pred = gold.clone();
    for t in pred[0].iter_mut().take(15) {
        *t = Tag::O;
    }
    let s = token_prf(&pred, &gold).unwrap();
    assert_eq!(s.overall.r, 0.85);
    assert_eq!(s.overall.p, 1.0);
}

#[test]
fn paired_ttest_matches_frozen_reference() {
    // scipy.stats.ttest_rel(a, b) with scipy 1.15.3.
    let a = [0.91, 0.85, 0.78, 0.88, 0.95, 0.70, 0.83, 0.90, 0.76, 0.87];
    let b = [0.89, 0.80, 0.79, 0.84, 0.90, 0.66, 0.80, 0.91, 0.70, 0.85];
    let r = paired_f1_ttest(&a, &b).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    assert!(rel(r.t, 3.782608695652172) < 1e-4);
    assert!(rel(r.p_two_sided, 0.004331599478116001) < 1e-4);
    // Tighter than four significant figures in practice.
    assert!(rel(r.t, 3.782608695652172) < 1e-12);
    assert!(rel(r.p_two_sided, 0.004331599478116001) < 1e-9);
    assert_eq!(r.df, 9.0);
    // Reversing the pair order negates t and leaves p unchanged.
    let s = paired_f1_ttest(&b, &a).unwrap();
    assert!((s.t + r.t).abs() < 1e-12);
    assert!((s.p_two_sided - r.p_two_sided).abs() < 1e-15);
}

#[test]
fn ttest_rejects_degenerate_input() {
    assert!(paired_f1_ttest(&[0.5], &[0.4]).is_err());
    assert!(paired_f1_ttest(&[0.5, 0.6], &[0.4]).is_err());
    assert!(paired_f1_ttest(&[0.5, 0.6], &[0.4, 0.5]).is_err());
}

#[test]
fn student_t_known_points() {
    assert!((student_t_two_sided(0.0, 5.0) - 1.0).abs() < 1e-12);
    // Two-sided 5% critical value for 10 degrees of freedom.
    assert!((student_t_two_sided(2.228138851986273, 10.0) - 0.05).abs() < 1e-9);
    // With one degree of freedom the t distribution is Cauchy.
    let t: f64 = 3.0;
    let cauchy = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
    assert!((student_t_two_sided(t, 1.0) - cauchy).abs() < 1e-12);
}

#[test]
fn span_count_ratio_cases() {
    assert_eq!(span_count_ratio(3, 2).unwrap(), 1.5);
    assert!(span_count_ratio(3, 0).is_err());
    let report = EvalReport::compute(&[tags("BOO")], &[tags("OOO")]).unwrap();
    assert_eq!(report.span_count_ratio, None);
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(token_prf(&[tags("BO")], &[tags("BOO")]).is_err());
    assert!(token_prf(&[tags("BO")], &[]).is_err());
}

#[test]
fn macro_and_micro_differ_on_unbalanced_posts() {
    // Post one: 1/1 in-span tokens right. Post two: 0 of 9 predicted.
    let gold = vec![tags("B"), tags("BIIIIIIII")];
    let pred = vec![tags("B"), tags("OOOOOOOOO")];
    let s = token_prf(&pred, &gold).unwrap();
    assert_eq!(s.overall.r, 0.5);
    assert_eq!(s.overall_micro.r, 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn per_tag_matches_scalar_counts((pred, gold) in paired_corpus()) {
        let s = token_prf(&pred, &gold).unwrap();
        for tag in Tag::ALL {
            let (p, r) = per_tag_scalar(&pred, &gold, tag);
            let got = s.per_tag[&tag.as_char()];
            prop_assert_eq!((got.p, got.r), (p, r));
            let h = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((got.f1 - h).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_pred_and_gold_swaps_p_and_r((pred, gold) in paired_corpus()) {
        let a = token_prf(&pred, &gold).unwrap();
        let b = token_prf(&gold, &pred).unwrap();
        for (k, x) in &a.per_tag {
            let y = b.per_tag[k];
            prop_assert_eq!((x.p, x.r), (y.r, y.p));
        }
        prop_assert!((a.overall.p - b.overall.r).abs() < 1e-12);
        prop_assert!((a.overall.r - b.overall.p).abs() < 1e-12);
    }

    #[test]
    fn scores_lie_in_unit_interval_and_f1_equals_dice_per_post((pred, gold) in paired_corpus()) {
        let report = EvalReport::compute(&pred, &gold).unwrap();
        for v in [report.overall.p, report.overall.r, report.overall.f1, report.dsc] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
            let d = dice(&in_span_positions(p), &in_span_positions(g));
            prop_assert!((report.per_post_f1[i] - d).abs() < 1e-12);
        }
        prop_assert!((report.overall.f1 - report.dsc).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_scores_one(gold in prop::collection::vec(tag_seq(), 1..6)) {
        let report = EvalReport::compute(&gold, &gold).unwrap();
        prop_assert_eq!(report.overall.f1, 1.0);
        prop_assert_eq!(report.dsc, 1.0);
        for v in report.per_tag.values() {
            prop_assert_eq!(v.f1, 1.0);
        }
    }
}
