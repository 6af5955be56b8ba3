use claimspan::preprocess::{AnnotatedPost, CharSpan};
use claimspan::retrieval::*;
use claimspan::synthetic::retrieval_fixture;

fn docs(texts: &[&str]) -> Vec<Document> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document { id: format!("d{}", i + 1), text: t.to_string() })
        .collect()
}

fn judged(ranked: &[&str], relevant: &[&str]) -> Judgment {
    Judgment {
        query_id: "q".into(),
        ranked: ranked.iter().map(|s| s.to_string()).collect(),
        relevant: relevant.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn three_document_hand_computation() {
    let idx = Bm25Index::build(
        &docs(&["garlic cures covid", "Garlic garlic soup recipe!", "covid vaccine trial results today"]),
        DEFAULT_K1,
        DEFAULT_B,
    );
    // N = 3, df(garlic) = df(covid) = 2, lengths 3, 4, 5, avgdl = 4.
    assert_eq!(idx.len(), 3);
    assert_eq!(idx.avgdl(), 4.0);
    assert_eq!((idx.doc_freq("garlic"), idx.doc_freq("covid"), idx.doc_freq("soup")), (2, 2, 1));
    assert_eq!((idx.doc_length(0), idx.doc_length(1), idx.doc_length(2)), (3, 4, 5));

    let idf = ((3.0 - 2.0 + 0.5) / (2.0 + 0.5) + 1.0f64).ln();
    assert!((idf - 1.6f64.ln()).abs() < 1e-15);
    let term = |tf: f64, dl: f64| idf * tf * (1.2 + 1.0) / (tf + 1.2 * (1.0 - 0.75 + 0.75 * (dl / 4.0)));
    let d1 = term(1.0, 3.0) + term(1.0, 3.0);
    let d2 = term(2.0, 4.0);
    let d3 = term(1.0, 5.0);

    let hits = idx.query("garlic covid", 10);
    let got: Vec<(&str, f64)> = hits.iter().map(|h| (h.id.as_str(), h.score)).collect();
    assert_eq!(got, [("d1", d1), ("d2", d2), ("d3", d3)]);
    assert!((d1 - 1.047_096_693).abs() < 1e-9);
    assert!((d2 - 0.646_254_990).abs() < 1e-9);
    assert!((d3 - 0.426_395_045).abs() < 1e-9);
    assert!(d1 > d2 && d2 > d3);
}

#[test]
fn scores_are_non_negative_and_deterministic() {
    let d = docs(&["a b c", "a a a a a a", "b c d e"]);
    let idx = Bm25Index::build(&d, DEFAULT_K1, DEFAULT_B);
    let terms: Vec<String> = ["a", "b", "z"].iter().map(|s| s.to_string()).collect();
    for doc in 0..3 {
        assert!(idx.score(&terms, doc) >= 0.0);
    }
    assert_eq!(idx.query("a b", 3), idx.query("a b", 3));
}

#[test]
fn precision_fixture_averages_to_0_44() {
    let rel = ["r1", "r2", "r3"];
    let fixture = [
        judged(&["r1", "x", "r2", "y", "r3"], &rel),
        judged(&["r1", "r2", "x", "y", "z"], &rel),
        judged(&["x", "r1", "y", "r3", "z"], &rel),
        judged(&["x", "y", "z", "r2", "r3"], &rel),
        judged(&["r3", "x", "y", "z", "r1"], &rel),
    ];
    let mean = fixture.iter().map(|j| precision_at_k(j, 5)).sum::<f64>() / 5.0;
    assert!((mean - 0.44).abs() < 1e-12);
}

#[test]
fn ndcg_fixtures() {
    let one = judged(&["x", "r", "y"], &["r"]);
    assert!((ndcg_at_k(&one, 3) - 1.0 / 3f64.log2()).abs() < 1e-12);
    assert!((ndcg_at_k(&one, 3) - 0.6309).abs() < 1e-4);
    let ideal = judged(&["r1", "r2", "x"], &["r1", "r2"]);
    assert_eq!(ndcg_at_k(&ideal, 3), 1.0);
    assert_eq!(ndcg_at_k(&judged(&["x", "y"], &["r"]), 3), 0.0);
}

#[test]
fn identical_spans_and_tweets_give_identical_rows() {
    let posts = vec![
        AnnotatedPost::new("p1", "garlic cures covid", vec![CharSpan::new(0, 18)]),
        AnnotatedPost::new("p2", "bleach kills the virus", vec![CharSpan::new(0, 22)]),
    ];
    let idx = Bm25Index::build(
        &docs(&["garlic covid remedy", "bleach virus warning", "unrelated football"]),
        DEFAULT_K1,
        DEFAULT_B,
    );
    let judgments = vec![
        Judgment { query_id: "p1".into(), ranked: vec![], relevant: vec!["d1".into()] },
        Judgment { query_id: "p2".into(), ranked: vec![], relevant: vec!["d2".into()] },
    ];
    let report = compare_conditions(&posts, &idx, &judgments, &[3, 5]).unwrap();
    assert_eq!(report.tweets, report.spans);
    assert!(compare_conditions(&posts, &idx, &judgments[..1], &[3]).is_err());
}

#[test]
fn span_queries_beat_tweet_queries_on_planted_fixture() {
    let f = retrieval_fixture(40, 7);
    let idx = Bm25Index::build(&f.documents, DEFAULT_K1, DEFAULT_B);
    let report = compare_conditions(&f.posts, &idx, &f.judgments, &[3, 5]).unwrap();
    for k in [3, 5] {
        assert!(report.spans.precision[&k] > report.tweets.precision[&k]);
        assert!(report.spans.ndcg[&k] > report.tweets.ndcg[&k]);
    }
}

#[test]
fn report_schema() {
    let f = retrieval_fixture(4, 1);
    let idx = Bm25Index::build(&f.documents, DEFAULT_K1, DEFAULT_B);
    let report = compare_conditions(&f.posts, &idx, &f.judgments, &[3, 5]).unwrap();
    let value = serde_json::to_value(&report).unwrap();
    let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["k", "n_queries", "spans", "tweets"]);
    assert_eq!(value["tweets"]["precision"].as_object().unwrap().len(), 2);
}
