use claimspan::preprocess::CharSpan;
use claimspan_web_demo::{retrieval_view, segments, Demo};

#[test]
fn segments_cover_the_text_in_order() {
    let text = "So 🙏 garlic cures covid, friends";
    let segs = segments(text, &[CharSpan::new(5, 23)]);
    let joined: String = segs.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(joined, text);
    assert_eq!(segs.iter().map(|s| s.claim).collect::<Vec<_>>(), [false, true, false]);
    assert_eq!(segs[1].text, "garlic cures covid");
    assert!(segments("", &[]).is_empty());
}

#[test]
fn trained_demo_tags_and_attends() {
    let demo = Demo::train(0, 120, 4).unwrap();
    assert_eq!(demo.summary().epochs, 4);
    assert_eq!(demo.descriptions().len(), 6);

    let tagged = demo.tag_text("Breaking: garlic cures covid in one night #health").unwrap();
    for t in &tagged.tokens {
        let sum: f64 = t.marginals.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    let joined: String = tagged.segments.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(joined, "Breaking: garlic cures covid in one night #health");

    let coda = demo.attention_view("garlic cures covid", 0, "coda").unwrap();
    assert_eq!(coda.rows.len(), coda.weights.len());
    assert!(coda.weights.iter().flatten().all(|w| w.abs() < 1.0));
    assert!(coda.weights.iter().all(|r| r.len() == coda.cols.len()));
    let dpa = demo.attention_view("garlic cures covid", 0, "dpa").unwrap();
    for row in &dpa.weights {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|w| *w >= 0.0));
    }
    assert!(demo.attention_view("garlic", 99, "coda").is_err());
    assert!(demo.attention_view("garlic", 0, "softmax").is_err());
    assert!(demo.attention_view("   ", 0, "coda").is_err());
}

#[test]
fn retrieval_view_reports_both_conditions() {
    let view = retrieval_view(1.2, 0.75, 20, 0).unwrap();
    assert_eq!(view.report.n_queries, 20);
    assert!(view.report.spans.precision[&5] > view.report.tweets.precision[&5]);
    assert!(view.example.span_hits.len() <= 5);
    assert!(retrieval_view(1.2, 1.5, 20, 0).is_err());
    assert!(retrieval_view(-1.0, 0.5, 20, 0).is_err());
}
