//! Subcommand implementations.
//!
//! Output layout under `--out`:
//!
//! ```text
//! prepared/  tokens.csv  split.manifest  vocab_word2vec.tsv  vocab_lstm.tsv  summary.json
//! models/    <kind>.model  <kind>.vectors.txt
//! curves/    lstm_loss.csv  <kind>_word2vec_loss.csv  svm_objective.csv
//! reports/   <kind>.json  <kind>.txt  <kind>_roc.csv  comparison.json  comparison.txt
//! metrics.jsonl
//! ```

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surat_core::artifact::ModelArtifact;
use surat_core::corpus::{
    generate_synthetic, load_csv, save_csv, stratified_split_labels, Split, SplitSpec, SyntheticSpec,
};
use surat_core::embedding::{build_vocabulary, Vocabulary};
use surat_core::eval::{compare_models, roc_curve, ComparisonTable, MetricsReport};
use surat_core::par::Execution;
use surat_core::pipeline::{evaluate_model, prepare, score_labeled, train_model_with, ModelKind, TrainOutcome};
use surat_core::preprocess::StopwordList;
use surat_core::Label;

use crate::config::RunConfig;
use crate::metrics_log::MetricsLog;
use crate::{Cli, CliError, Command, ModelRef};

pub struct Context {
    pub config: RunConfig,
    pub exec: Execution,
}

impl Context {
    fn out(&self, parts: &[&str]) -> PathBuf {
        let mut p = self.config.out.clone();
        p.extend(parts);
        p
    }

    fn log(&self, label: &str) -> MetricsLog {
        MetricsLog::new(
            self.out(&["metrics.jsonl"]),
            MetricsLog::run_id_for(label, self.config.seed),
        )
    }

    fn model_path(&self, kind: ModelKind) -> PathBuf {
        self.out(&["models", &format!("{kind}.model")])
    }

    fn artifact_path(&self, r: &ModelRef) -> PathBuf {
        match (&r.artifact, r.model) {
            (Some(p), _) => p.clone(),
            (None, Some(kind)) => self.model_path(kind),
            (None, None) => unreachable!("clap requires one of --model/--artifact"),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .resolve(cli.seed, cli.out.clone())?;
    let ctx = Context {
        config,
        exec: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    match cli.command {
        Command::Prepare { data } => cmd_prepare(&ctx, data),
        Command::Train {
            model,
            validation_fraction,
        } => cmd_train(&ctx, model, validation_fraction),
        Command::Evaluate(r) => cmd_evaluate(&ctx, &r),
        Command::Compare { models, artifacts } => cmd_compare(&ctx, &models, &artifacts),
        Command::Predict { target, text, json } => cmd_predict(&ctx, &target, &text, json),
        Command::Synth {
            n_per_class,
            overlap,
            output,
        } => cmd_synth(&ctx, n_per_class, overlap, output),
        Command::Config => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        create_dir(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

// prepare -------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparedSummary {
    pub dataset: String,
    /// SHA-256 of the cleaned, filtered corpus.
    pub dataset_fingerprint: String,
    pub records: usize,
    pub dropped: usize,
    pub train: [usize; 2],
    pub test: [usize; 2],
    pub seed: u64,
    pub train_fraction: f64,
    pub stopwords: Vec<String>,
    pub config: serde_json::Value,
}

/// Prepared data read back from disk.
pub struct Prepared {
    pub summary: PreparedSummary,
    pub tokens: Vec<Vec<String>>,
    pub labels: Vec<Label>,
    pub split: Split,
}

impl Prepared {
    fn pick(&self, idx: &[usize]) -> (Vec<Vec<String>>, Vec<Label>) {
        (
            idx.iter().map(|&i| self.tokens[i].clone()).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn train_set(&self) -> (Vec<Vec<String>>, Vec<Label>) {
        self.pick(&self.split.train)
    }

    pub fn test_set(&self) -> (Vec<Vec<String>>, Vec<Label>) {
        self.pick(&self.split.test)
    }
}

fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), CliError> {
    let mut s = String::from("id\ttoken\tcount\n");
    for (i, (t, c)) in vocab.tokens().iter().zip(vocab.counts()).enumerate() {
        let _ = writeln!(s, "{i}\t{t}\t{c}");
    }
    write_file(path, &s)
}

fn class_split(split_ids: &[usize], labels: &[Label]) -> [usize; 2] {
    let spam = split_ids.iter().filter(|&&i| labels[i] == Label::Spam).count();
    [split_ids.len() - spam, spam]
}

fn cmd_prepare(ctx: &Context, data: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let path = data
        .or_else(|| cfg.dataset.clone())
        .ok_or_else(|| CliError::Usage("no dataset: pass --data or set `dataset` in the config".into()))?;
    let corpus = load_csv(&path)?;
    let pre = cfg.preprocessor()?;
    let spec = cfg.pipeline().split_spec()?;
    let prepared = prepare(&corpus, &pre, &spec)?;
    let labels = prepared.labels();

    let dir = ctx.out(&["prepared"]);
    create_dir(&dir)?;
    let mut tokens = String::from("index,label,tokens\n");
    for (i, (t, l)) in prepared.tokens.iter().zip(&labels).enumerate() {
        let _ = writeln!(tokens, "{i},{l},{}", t.join(" "));
    }
    write_file(&dir.join("tokens.csv"), &tokens)?;

    let manifest = dir.join("split.manifest");
    let f = File::create(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    let mut w = BufWriter::new(f);
    prepared
        .split
        .write_manifest(&mut w, &spec)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&manifest, e))?;

    let train_tokens = prepared.train_tokens();
    write_vocab(
        &dir.join("vocab_word2vec.tsv"),
        &build_vocabulary(&train_tokens, cfg.classical_min_freq)?,
    )?;
    write_vocab(
        &dir.join("vocab_lstm.tsv"),
        &build_vocabulary(&train_tokens, cfg.lstm.min_freq)?,
    )?;

    let summary = PreparedSummary {
        dataset: path.display().to_string(),
        dataset_fingerprint: prepared.corpus.fingerprint(),
        records: prepared.corpus.len(),
        dropped: prepared.dropped,
        train: class_split(&prepared.split.train, &labels),
        test: class_split(&prepared.split.test, &labels),
        seed: cfg.seed,
        train_fraction: cfg.train_fraction,
        stopwords: pre.stopwords().sorted_words(),
        config: cfg.to_json(),
    };
    write_json(&dir.join("summary.json"), &summary)?;

    println!("dataset   {}", summary.dataset);
    println!(
        "records   {} kept, {} dropped (empty after cleaning)",
        summary.records, summary.dropped
    );
    println!("{:<8}{:>8}{:>8}{:>8}", "split", "ham", "spam", "total");
    for (name, [h, s]) in [("train", summary.train), ("test", summary.test)] {
        println!("{name:<8}{h:>8}{s:>8}{:>8}", h + s);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn load_prepared(out: &Path) -> Result<Prepared, CliError> {
    let dir = out.join("prepared");
    let summary_path = dir.join("summary.json");
    if !summary_path.exists() {
        return Err(CliError::Data(format!(
            "no prepared data under {}; run `surat prepare` first",
            dir.display()
        )));
    }
    let summary: PreparedSummary = read_json(&summary_path)?;

    let tokens_path = dir.join("tokens.csv");
    let f = File::open(&tokens_path).map_err(|e| CliError::io(&tokens_path, e))?;
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate().skip(1) {
        let line = line.map_err(|e| CliError::io(&tokens_path, e))?;
        let bad = || CliError::Data(format!("{} line {}: malformed row", tokens_path.display(), n + 1));
        let mut parts = line.splitn(3, ',');
        let (_, label, toks) = (
            parts.next(),
            parts.next().ok_or_else(bad)?,
            parts.next().ok_or_else(bad)?,
        );
        labels.push(Label::parse(label).ok_or_else(bad)?);
        tokens.push(toks.split_whitespace().map(str::to_owned).collect());
    }

    let manifest = dir.join("split.manifest");
    let f = File::open(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    let split = Split::read_manifest(BufReader::new(f))?;
    if let Some(&i) = split.train.iter().chain(&split.test).find(|&&i| i >= tokens.len()) {
        return Err(CliError::Data(format!(
            "split manifest index {i} exceeds {} records",
            tokens.len()
        )));
    }
    Ok(Prepared {
        summary,
        tokens,
        labels,
        split,
    })
}

// train ---------------------------------------------------------------------

fn write_curve(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_file(path, &s)
}

fn cmd_train(ctx: &Context, kind: ModelKind, validation_fraction: Option<f64>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let prepared = load_prepared(&cfg.out)?;
    let (mut docs, mut labels) = prepared.train_set();
    let log = ctx.log(kind.as_str());
    let mut validation = None;
    if let Some(f) = validation_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!(
                "--validation-fraction must be in (0, 1), got {f}"
            )));
        }
        let inner = stratified_split_labels(&labels, &SplitSpec::new(1.0 - f, cfg.seed)?)?;
        let pick = |idx: &[usize]| -> (Vec<Vec<String>>, Vec<Label>) {
            (
                idx.iter().map(|&i| docs[i].clone()).collect(),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        };
        let (fit, held) = (pick(&inner.train), pick(&inner.test));
        (docs, labels) = fit;
        validation = Some(held);
    }
    create_dir(&ctx.out(&[]))?;
    println!("training {kind} on {} examples", docs.len());

    let mut log_error = None;
    let epochs = cfg.lstm.epochs;
    let outcome: TrainOutcome = train_model_with(kind, &docs, &labels, &cfg.pipeline(), ctx.exec, |rec| {
        println!(
            "epoch {:>3}/{epochs} loss {:.4} ({:.2}s)",
            rec.epoch, rec.mean_loss, rec.seconds
        );
        if log_error.is_none() {
            let fields = [("loss", rec.mean_loss), ("seconds", rec.seconds)];
            log_error = log.append("epoch", Some(rec.epoch), fields).err();
        }
    })?;
    if let Some(e) = log_error {
        return Err(e);
    }

    let (preds, scored) = score_labeled(&outcome.model, &docs, &labels, ctx.exec)?;
    let train_acc = preds.iter().zip(&scored).filter(|(p, s)| **p == s.truth).count() as f64 / docs.len() as f64;
    if let Some((vdocs, vlabels)) = &validation {
        let m = evaluate_model(&outcome.model, vdocs, vlabels, outcome.train_seconds, ctx.exec)?;
        log.append(
            "validation",
            None,
            [
                ("accuracy", m.basic.accuracy),
                ("precision", m.basic.precision.value),
                ("recall", m.basic.recall.value),
                ("f1", m.basic.f1.value),
                ("auc", m.auc),
                ("validation_examples", vdocs.len() as f64),
            ],
        )?;
        println!(
            "validation on {} examples: accuracy {:.4}, f1 {:.4}, auc {:.4}",
            vdocs.len(),
            m.basic.accuracy,
            m.basic.f1.value,
            m.auc
        );
    }

    let curves = ctx.out(&["curves"]);
    if let Some(l) = &outcome.lstm_log {
        write_curve(
            &curves.join("lstm_loss.csv"),
            "epoch,mean_loss,seconds",
            l.epochs
                .iter()
                .map(|e| format!("{},{},{}", e.epoch, e.mean_loss, e.seconds)),
        )?;
    }
    if !outcome.word2vec_losses.is_empty() {
        write_curve(
            &curves.join(format!("{kind}_word2vec_loss.csv")),
            "epoch,loss",
            outcome
                .word2vec_losses
                .iter()
                .enumerate()
                .map(|(i, l)| format!("{},{l}", i + 1)),
        )?;
    }
    if !outcome.svm_objective.is_empty() {
        write_curve(
            &curves.join("svm_objective.csv"),
            "epoch,objective",
            outcome
                .svm_objective
                .iter()
                .enumerate()
                .map(|(i, o)| format!("{},{o}", i + 1)),
        )?;
    }

    let models = ctx.out(&["models"]);
    create_dir(&models)?;
    if let Some(emb) = &outcome.model.embedding {
        let p = models.join(format!("{kind}.vectors.txt"));
        let f = File::create(&p).map_err(|e| CliError::io(&p, e))?;
        emb.write_text(&outcome.model.vocab, BufWriter::new(f))?;
    }
    let mut artifact = ModelArtifact::new(outcome.model, StopwordList::from_words(&prepared.summary.stopwords)?);
    artifact.config = cfg.to_json();
    artifact.dataset_fingerprint = Some(prepared.summary.dataset_fingerprint.clone());
    artifact.train_seconds = outcome.train_seconds;
    let path = ctx.model_path(kind);
    artifact.save(&path)?;

    log.append(
        "train",
        None,
        [
            ("train_seconds", outcome.train_seconds),
            ("feature_seconds", outcome.feature_seconds),
            ("train_accuracy", train_acc),
            ("train_examples", docs.len() as f64),
        ],
    )?;
    println!(
        "trained {kind} in {:.3}s (features {:.3}s), train accuracy {train_acc:.4}",
        outcome.train_seconds, outcome.feature_seconds
    );
    println!("wrote {}", path.display());
    Ok(())
}

// evaluate / compare --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_kind: ModelKind,
    pub artifact: String,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub test_size: usize,
    pub metrics: MetricsReport,
    pub config: serde_json::Value,
}

fn load_artifact(path: &Path) -> Result<ModelArtifact, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!(
            "no model artifact at {}; run `surat train` first",
            path.display()
        )));
    }
    Ok(ModelArtifact::load(path)?)
}

fn evaluate_artifact(
    ctx: &Context,
    prepared: &Prepared,
    path: &Path,
) -> Result<(EvaluationReport, Vec<(f64, f64)>), CliError> {
    let artifact = load_artifact(path)?;
    if let Some(fp) = &artifact.dataset_fingerprint {
        if fp != &prepared.summary.dataset_fingerprint {
            return Err(CliError::Data(format!(
                "{} was trained on different prepared data (fingerprint {}, current {})",
                path.display(),
                &fp[..12.min(fp.len())],
                &prepared.summary.dataset_fingerprint[..12.min(prepared.summary.dataset_fingerprint.len())]
            )));
        }
    }
    let (docs, labels) = prepared.test_set();
    if docs.is_empty() {
        return Err(CliError::Data("test split is empty".into()));
    }
    let (preds, scored) = score_labeled(&artifact.model, &docs, &labels, ctx.exec)?;
    let metrics = surat_core::eval::evaluate(&preds, &scored, artifact.train_seconds)?;
    let roc = roc_curve(&scored)?;
    let report = EvaluationReport {
        model_kind: artifact.kind(),
        artifact: path.display().to_string(),
        seed: ctx.config.seed,
        dataset_fingerprint: prepared.summary.dataset_fingerprint.clone(),
        test_size: docs.len(),
        metrics,
        config: artifact.config.clone(),
    };
    Ok((report, roc))
}

fn save_report(ctx: &Context, stem: &str, report: &EvaluationReport, roc: &[(f64, f64)]) -> Result<(), CliError> {
    let dir = ctx.out(&["reports"]);
    write_json(&dir.join(format!("{stem}.json")), report)?;
    write_file(&dir.join(format!("{stem}.txt")), &report.metrics.render())?;
    write_curve(
        &dir.join(format!("{stem}_roc.csv")),
        "fpr,tpr",
        roc.iter().map(|(f, t)| format!("{f},{t}")),
    )
}

fn log_report(ctx: &Context, report: &EvaluationReport) -> Result<(), CliError> {
    let m = &report.metrics;
    ctx.log(report.model_kind.as_str()).append(
        "evaluate",
        None,
        [
            ("accuracy", m.basic.accuracy),
            ("precision", m.basic.precision.value),
            ("recall", m.basic.recall.value),
            ("f1", m.basic.f1.value),
            ("auc", m.auc),
            ("kappa", m.kappa),
            ("mcc", m.mcc),
        ],
    )
}

fn cmd_evaluate(ctx: &Context, target: &ModelRef) -> Result<(), CliError> {
    let prepared = load_prepared(&ctx.config.out)?;
    let path = ctx.artifact_path(target);
    let (report, roc) = evaluate_artifact(ctx, &prepared, &path)?;
    let stem = match (&target.artifact, target.model) {
        (None, Some(k)) => k.to_string(),
        _ => path
            .file_stem()
            .map_or("model".into(), |s| s.to_string_lossy().into_owned()),
    };
    save_report(ctx, &stem, &report, &roc)?;
    log_report(ctx, &report)?;
    println!("model {} on {} test examples", report.model_kind, report.test_size);
    print!("{}", report.metrics.render());
    Ok(())
}

fn cmd_compare(ctx: &Context, models: &[ModelKind], artifacts: &[PathBuf]) -> Result<(), CliError> {
    if models.is_empty() && artifacts.is_empty() {
        return Err(CliError::Usage(
            "compare needs at least one --model or --artifact".into(),
        ));
    }
    let prepared = load_prepared(&ctx.config.out)?;
    let paths: Vec<PathBuf> = models
        .iter()
        .map(|&k| ctx.model_path(k))
        .chain(artifacts.iter().cloned())
        .collect();
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for path in &paths {
        let (report, _) = evaluate_artifact(ctx, &prepared, path)?;
        let kind = report.model_kind;
        let mut name = kind.display_name().to_string();
        if results
            .iter()
            .any(|(n, _, _): &(String, String, MetricsReport)| *n == name)
        {
            let stem = path
                .file_stem()
                .map_or(String::new(), |s| s.to_string_lossy().into_owned());
            name = format!("{name} [{stem}]");
        }
        results.push((name, kind.description().to_string(), report.metrics.clone()));
        reports.push(report);
    }
    let table: ComparisonTable = compare_models(&results);
    let dir = ctx.out(&["reports"]);
    write_json(&dir.join("comparison.json"), &table)?;
    let text = table.render();
    write_file(&dir.join("comparison.txt"), &text)?;
    for r in &reports {
        log_report(ctx, r)?;
    }
    print!("{text}");
    Ok(())
}

// predict / synth -----------------------------------------------------------

fn score_kind(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Svm => "margin",
        ModelKind::Gnb => "log_odds",
        ModelKind::Logreg | ModelKind::Lstm => "probability",
    }
}

fn cmd_predict(ctx: &Context, target: &ModelRef, text: &str, json: bool) -> Result<(), CliError> {
    let path = ctx.artifact_path(target);
    let artifact = load_artifact(&path)?;
    let pred = artifact.predict_texts(&[text], ctx.exec)?[0];
    let kind = artifact.kind();
    if json {
        let v = serde_json::json!({
            "model": kind,
            "label": pred.label,
            "score": pred.score,
            "score_kind": score_kind(kind),
        });
        println!("{v}");
    } else {
        println!("{}\t{:.6}\t{}", pred.label, pred.score, score_kind(kind));
    }
    Ok(())
}

fn cmd_synth(ctx: &Context, n_per_class: usize, overlap: f64, output: Option<PathBuf>) -> Result<(), CliError> {
    let spec = SyntheticSpec::new(ctx.config.seed, n_per_class, overlap);
    let corpus = generate_synthetic(&spec)?;
    let path = output.unwrap_or_else(|| ctx.out(&["synthetic.csv"]));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_csv(&corpus, &path)?;
    println!(
        "wrote {} records ({} ham, {} spam) to {}",
        corpus.len(),
        corpus.count(Label::Ham),
        corpus.count(Label::Spam),
        path.display()
    );
    Ok(())
}
