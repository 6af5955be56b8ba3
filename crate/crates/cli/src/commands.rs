use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use claimspan::bank::{default_bank, load_bank};
use claimspan::checkpoint::{load_model, save_model};
use claimspan::config::Config;
use claimspan::metrics::EvalReport;
use claimspan::preprocess::{load_corpus, process_post, save_corpus, to_jsonl, CorpusStats};
use claimspan::retrieval::{compare_conditions, load_documents, load_judgments, Bm25Index, DEFAULT_B, DEFAULT_K1};
use claimspan::synthetic::{generate_corpus, retrieval_fixture, synthetic_bank};
use claimspan::training::{self, evaluate, layer_sweep, prepare, predict, split_validation};
use claimspan::Error;
use serde::Serialize;

use crate::{
    Command, EvalArgs, GradcheckArgs, LayerSweepArgs, ModelArgs, PredictArgs, PreprocessArgs,
    RetrieveEvalArgs, SynthArgs, TrainArgs,
};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// The command ran but its check did not pass.
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::CheckFailed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::LayerSweep(a) => sweep(a),
        Command::RetrieveEval(a) => retrieve_eval(a),
        Command::Synth(a) => synth(a),
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")
}

fn load_config(args: &ModelArgs) -> Result<Config> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn bank(path: Option<&Path>) -> Result<Vec<String>> {
    Ok(match path {
        Some(p) => load_bank(p)?,
        None => default_bank(),
    })
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let posts = load_corpus(&a.input)?;
    let processed = posts.iter().map(process_post).collect::<claimspan::Result<Vec<_>>>()?;
    if let Some(out) = &a.output {
        let mut text = String::new();
        for p in &processed {
            text += &serde_json::to_string(p).map_err(Error::from)?;
            text.push('\n');
        }
        fs::write(out, text)?;
    }
    let stats = CorpusStats::from_processed(&processed);
    if a.pretty {
        let rows = [
            ("posts", stats.posts.to_string()),
            ("spans", stats.spans.to_string()),
            ("avg. length of posts", format!("{:.2}", stats.avg_post_length)),
            ("avg. length of spans", format!("{:.2}", stats.avg_span_length)),
            ("spans per post", format!("{:.2}", stats.spans_per_post)),
            ("single-span posts", stats.single_span_posts.to_string()),
            ("multi-span posts", stats.multi_span_posts.to_string()),
            ("posts without spans", stats.no_span_posts.to_string()),
        ];
        let text: String = rows.iter().map(|(k, v)| format!("{k:<22} {v:>8}\n")).collect();
        emit(None, &text)
    } else {
        emit(None, &json(&stats)?)
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.model)?;
    cfg.validate()?;
    let posts = load_corpus(&a.input)?;
    let (train_posts, val_posts) = match &a.validation {
        Some(p) => (posts, load_corpus(p)?),
        None => split_validation(&posts, cfg.train.val_fraction)?,
    };
    let descriptions = bank(a.bank.as_deref())?;
    let pretty = a.pretty;
    let mut failure = None;
    let outcome = training::train(&train_posts, &val_posts, &descriptions, &cfg.model, &cfg.train, |r| {
        let line = if pretty {
            format!(
                "epoch {:>3}  loss {:>10.4}  val P {:.4}  R {:.4}  F1 {:.4}  DSC {:.4}  {:>7.1}s\n",
                r.epoch, r.train_loss, r.val_p, r.val_r, r.val_f1, r.val_dsc, r.elapsed_s
            )
        } else {
            serde_json::to_string(r).expect("records serialize") + "\n"
        };
        if let Err(e) = emit(None, &line) {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    save_model(&outcome.model, Some(&cfg.train), &a.output)?;
    if pretty {
        emit(None, &format!("best epoch {} written to {}\n", outcome.best_epoch, a.output.display()))?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let posts = load_corpus(&a.input)?;
    let report = evaluate(&model, &prepare(&posts)?)?;
    if a.pretty {
        let mut text = EvalReport::render_table(&[("model", &report)]);
        text += &format!("posts {}  (P/R/F1 averaged over posts)\n", report.n_posts);
        match report.span_count_ratio {
            Some(r) => text += &format!("span count ratio {r:.4}\n"),
            None => text += "span count ratio undefined (no gold spans)\n",
        }
        emit(a.output.as_deref(), &text)
    } else {
        emit(a.output.as_deref(), &json(&report)?)
    }
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.checkpoint)?;
    let mut posts = load_corpus(&a.input)?;
    let predictions = predict(&model, &prepare(&posts)?);
    for (post, (_, spans)) in posts.iter_mut().zip(predictions) {
        post.predicted_spans = Some(spans);
    }
    if a.pretty {
        let mut text = String::new();
        for post in &posts {
            let chars: Vec<char> = post.text.chars().collect();
            let mut line = String::new();
            let mut at = 0;
            for s in post.predicted_spans.as_deref().unwrap_or_default() {
                line.extend(&chars[at..s.start]);
                line.push('[');
                line.extend(&chars[s.start..s.end]);
                line.push(']');
                at = s.end;
            }
            line.extend(&chars[at..]);
            text += &format!("{}\t{}\n", post.id, line);
        }
        return emit(a.output.as_deref(), &text);
    }
    match &a.output {
        Some(path) => save_corpus(&posts, path)?,
        None => emit(None, &to_jsonl(&posts)?)?,
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = load_config(&a.model)?;
    let report = training::grad_check(&cfg.model, cfg.train.seed, a.tolerance)?;
    let text = if a.pretty {
        let (name, index) = report.offending.clone().unwrap_or_default();
        format!(
            "{}  max relative error {:.3e} (tolerance {:.1e}) over {} entries, worst {}[{}]\n",
            if report.passed { "PASS" } else { "FAIL" },
            report.max_rel_err,
            report.tolerance,
            report.checked,
            name,
            index
        )
    } else {
        json(&report)?
    };
    emit(a.output.as_deref(), &text)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "gradient check failed: max relative error {:e}",
            report.max_rel_err
        )))
    }
}

fn sweep(a: LayerSweepArgs) -> Result<()> {
    let cfg = load_config(&a.model)?;
    cfg.validate()?;
    let posts = load_corpus(&a.input)?;
    if posts.len() < 3 {
        return Err(Error::Input("layer sweep needs at least three posts".into()).into());
    }
    let n_train = (posts.len() * 8 / 10).max(1);
    let n_val = (posts.len() / 10).max(1);
    let (train_posts, rest) = posts.split_at(n_train);
    let (val_posts, test_posts) = rest.split_at(n_val.min(rest.len() - 1));
    let layers = if a.layers.is_empty() {
        (1..=cfg.model.layers).collect()
    } else {
        a.layers.clone()
    };
    let descriptions = bank(a.bank.as_deref())?;
    let report = layer_sweep(train_posts, val_posts, test_posts, &descriptions, &cfg.model, &cfg.train, &layers)?;
    let text = if a.pretty {
        let mut t = format!("{:>5} {:>8} {:>8} {:>10}\n", "layer", "F1", "DSC", "best epoch");
        for r in &report.rows {
            t += &format!("{:>5} {:>8.4} {:>8.4} {:>10}\n", r.layer, r.f1, r.dsc, r.best_epoch);
        }
        t += &format!("F1 monotone in layer: {}\n", report.f1_monotone_in_layer);
        t
    } else {
        json(&report)?
    };
    emit(a.output.as_deref(), &text)
}

fn retrieve_eval(a: RetrieveEvalArgs) -> Result<()> {
    if a.k.is_empty() || a.k.contains(&0) {
        return Err(Error::Input("--k needs positive cutoffs".into()).into());
    }
    let posts = load_corpus(&a.input)?;
    let docs = load_documents(&a.corpus)?;
    let judgments = load_judgments(&a.judgments)?;
    let index = Bm25Index::build(&docs, DEFAULT_K1, DEFAULT_B);
    let report = compare_conditions(&posts, &index, &judgments, &a.k)?;
    let text = if a.pretty { report.render_table() } else { json(&report)? };
    emit(a.output.as_deref(), &text)
}

fn synth(a: SynthArgs) -> Result<()> {
    fs::create_dir_all(&a.output)?;
    save_corpus(&generate_corpus(a.posts, a.seed), a.output.join("corpus.jsonl"))?;
    fs::write(a.output.join("bank.txt"), synthetic_bank().join("\n") + "\n")?;
    let fixture = retrieval_fixture(a.queries, a.seed);
    save_corpus(&fixture.posts, a.output.join("queries.jsonl"))?;
    let lines = |items: Vec<String>| items.into_iter().map(|l| l + "\n").collect::<String>();
    let docs = fixture
        .documents
        .iter()
        .map(serde_json::to_string)
        .collect::<serde_json::Result<Vec<_>>>()
        .map_err(Error::from)?;
    fs::write(a.output.join("documents.jsonl"), lines(docs))?;
    let judgments = fixture
        .judgments
        .iter()
        .map(serde_json::to_string)
        .collect::<serde_json::Result<Vec<_>>>()
        .map_err(Error::from)?;
    fs::write(a.output.join("judgments.jsonl"), lines(judgments))?;
    Ok(())
}
