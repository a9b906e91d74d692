//! End-to-end training and scoring for every model kind.
//!
//! Classical models share one Word2Vec feature space (min frequency 1,
//! document vectors by mean pooling). The LSTM builds its own vocabulary
//! with the neural cutoff and learns its embedding jointly.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{
    train_gnb, train_linear_svm, train_logreg, Classifier, GaussianNbModel, LinearSvmModel, LogRegConfig, LogRegModel,
    Prediction, SvmConfig,
};
use crate::corpus::{filter_clean, stratified_split, Corpus, Split, SplitSpec};
use crate::embedding::{
    build_vocabulary, embed_documents, encode_sequence, train_word2vec, EmbeddingMatrix, Vocabulary, Word2VecConfig,
};
use crate::eval::{evaluate, MetricsReport, ScoredPrediction};
use crate::neural::{forward_sequence, train_lstm_with, EpochRecord, LstmParams, LstmTrainConfig, TrainLog};
use crate::par::{self, Execution};
use crate::preprocess::Preprocessor;
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gnb,
    Logreg,
    Svm,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Gnb, ModelKind::Logreg, ModelKind::Svm, ModelKind::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gnb => "gnb",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Lstm => "lstm",
        }
    }

    /// Short table name.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Gnb => "NB",
            ModelKind::Logreg => "LR",
            ModelKind::Svm => "SVM",
            ModelKind::Lstm => "LSTM",
        }
    }

    /// Long description for the comparison table's type column.
    pub fn description(self) -> &'static str {
        match self {
            ModelKind::Gnb => "Naive Bayes",
            ModelKind::Logreg => "Logistic Regression",
            ModelKind::Svm => "SVM - Linear Kernel",
            ModelKind::Lstm => "LSTM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown model kind {s:?} (expected gnb, logreg, svm or lstm)")))
    }
}

/// Every knob that influences a run. Defaults reproduce the reference
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub train_fraction: f64,
    /// Vocabulary cutoff for the Word2Vec feature space.
    pub classical_min_freq: u64,
    pub word2vec: Word2VecConfig,
    pub logreg: LogRegConfig,
    pub svm: SvmConfig,
    pub lstm: LstmTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: crate::corpus::DEFAULT_SEED,
            train_fraction: crate::corpus::DEFAULT_TRAIN_FRACTION,
            classical_min_freq: 1,
            word2vec: Word2VecConfig::default(),
            logreg: LogRegConfig::default(),
            svm: SvmConfig::default(),
            lstm: LstmTrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Push the run seed into every seeded component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.word2vec.seed = seed;
        self.svm.seed = seed;
        self.lstm.seed = seed;
        self
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.train_fraction, self.seed)
    }
}

/// A cleaned corpus with its token lists and split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub corpus: Corpus,
    pub tokens: Vec<Vec<String>>,
    pub split: Split,
    /// Records dropped because cleaning left them empty.
    pub dropped: usize,
}

impl PreparedData {
    pub fn labels(&self) -> Vec<Label> {
        self.corpus.records().iter().map(|r| r.label).collect()
    }

    fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
        idx.iter().map(|&i| items[i].clone()).collect()
    }

    pub fn train_tokens(&self) -> Vec<Vec<String>> {
        Self::pick(&self.tokens, &self.split.train)
    }

    pub fn test_tokens(&self) -> Vec<Vec<String>> {
        Self::pick(&self.tokens, &self.split.test)
    }

    pub fn train_labels(&self) -> Vec<Label> {
        Self::pick(&self.labels(), &self.split.train)
    }

    pub fn test_labels(&self) -> Vec<Label> {
        Self::pick(&self.labels(), &self.split.test)
    }
}

/// Clean, filter empties, tokenize and split.
pub fn prepare(raw: &Corpus, pre: &Preprocessor, spec: &SplitSpec) -> Result<PreparedData> {
    let filtered = filter_clean(raw, pre);
    if filtered.is_empty() {
        return Err(Error::Invalid("no records survive cleaning".into()));
    }
    let tokens: Vec<Vec<String>> = filtered
        .corpus
        .records()
        .iter()
        .map(|r| pre.tokens(&r.message))
        .collect();
    let split = stratified_split(&filtered.corpus, spec)?;
    Ok(PreparedData {
        corpus: filtered.corpus,
        tokens,
        split,
        dropped: filtered.dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gnb(GaussianNbModel),
    Logreg(LogRegModel),
    Svm(LinearSvmModel),
    Lstm(LstmParams),
}

/// A model together with the feature pipeline it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub vocab: Vocabulary,
    /// Word2Vec table for classical models; `None` for the LSTM.
    pub embedding: Option<EmbeddingMatrix>,
    /// Sequence length for the LSTM encoder.
    pub max_len: usize,
    pub model: Model,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            Model::Gnb(_) => ModelKind::Gnb,
            Model::Logreg(_) => ModelKind::Logreg,
            Model::Svm(_) => ModelKind::Svm,
            Model::Lstm(_) => ModelKind::Lstm,
        }
    }

    fn classifier(&self) -> Option<&dyn Classifier> {
        match &self.model {
            Model::Gnb(m) => Some(m),
            Model::Logreg(m) => Some(m),
            Model::Svm(m) => Some(m),
            Model::Lstm(_) => None,
        }
    }

    /// Score token lists. Empty or all-unknown inputs go through the
    /// zero-vector or all-padding path.
    pub fn score_docs(&self, docs: &[Vec<String>], exec: Execution) -> Result<Vec<Prediction>> {
        match (&self.model, self.classifier(), &self.embedding) {
            (Model::Lstm(params), _, _) => {
                let seqs: Vec<Vec<u32>> = docs
                    .iter()
                    .map(|d| encode_sequence(d, &self.vocab, self.max_len))
                    .collect();
                if let Some(bad) = seqs
                    .iter()
                    .flatten()
                    .find(|&&id| id as usize >= params.shape.vocab_size)
                {
                    return Err(Error::Invalid(format!("token id {bad} exceeds the model's vocabulary")));
                }
                Ok(par::map(exec, &seqs, |s| {
                    let p = forward_sequence(params, s).prob;
                    Prediction {
                        label: if p >= 0.5 { Label::Spam } else { Label::Ham },
                        score: p,
                    }
                }))
            }
            (_, Some(clf), Some(emb)) => {
                let xs = embed_documents(docs, &self.vocab, emb, exec);
                clf.predict_batch(&xs, exec)
            }
            _ => Err(Error::Invalid("classical model is missing its embedding table".into())),
        }
    }
}

/// Output of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Wall-clock seconds spent fitting the classifier itself.
    pub train_seconds: f64,
    /// Wall-clock seconds spent on Word2Vec (classical models only).
    pub feature_seconds: f64,
    pub word2vec_losses: Vec<f64>,
    pub lstm_log: Option<TrainLog>,
    /// Per-epoch primal objective (SVM only).
    pub svm_objective: Vec<f64>,
}

/// Word2Vec vocabulary and vectors learned from training tokens.
pub fn build_feature_space(
    train_docs: &[Vec<String>],
    config: &PipelineConfig,
) -> Result<(Vocabulary, EmbeddingMatrix, Vec<f64>)> {
    let vocab = build_vocabulary(train_docs, config.classical_min_freq)?;
    let w2v = train_word2vec(train_docs, &vocab, &config.word2vec)?;
    Ok((vocab, w2v.vectors, w2v.epoch_losses))
}

pub fn train_model(
    kind: ModelKind,
    train_docs: &[Vec<String>],
    train_labels: &[Label],
    config: &PipelineConfig,
    exec: Execution,
) -> Result<TrainOutcome> {
    train_model_with(kind, train_docs, train_labels, config, exec, |_| {})
}

/// Like [`train_model`], reporting each LSTM epoch as it completes.
pub fn train_model_with<F: FnMut(&EpochRecord)>(
    kind: ModelKind,
    train_docs: &[Vec<String>],
    train_labels: &[Label],
    config: &PipelineConfig,
    exec: Execution,
    on_epoch: F,
) -> Result<TrainOutcome> {
    if kind == ModelKind::Lstm {
        let lcfg = &config.lstm;
        let vocab = build_vocabulary(train_docs, lcfg.min_freq)?;
        let seqs: Vec<Vec<u32>> = train_docs
            .iter()
            .map(|d| encode_sequence(d, &vocab, lcfg.max_len))
            .collect();
        let started = Instant::now();
        let (params, log) = train_lstm_with(&seqs, train_labels, vocab.len(), lcfg, exec, on_epoch)?;
        let train_seconds = started.elapsed().as_secs_f64();
        return Ok(TrainOutcome {
            model: TrainedModel {
                vocab,
                embedding: None,
                max_len: lcfg.max_len,
                model: Model::Lstm(params),
            },
            train_seconds,
            feature_seconds: 0.0,
            word2vec_losses: Vec::new(),
            lstm_log: Some(log),
            svm_objective: Vec::new(),
        });
    }

    let started = Instant::now();
    let (vocab, emb, w2v_losses) = build_feature_space(train_docs, config)?;
    let feature_seconds = started.elapsed().as_secs_f64();
    let xs = embed_documents(train_docs, &vocab, &emb, exec);

    let started = Instant::now();
    let mut svm_objective = Vec::new();
    let model = match kind {
        ModelKind::Gnb => Model::Gnb(train_gnb(&xs, train_labels)?),
        ModelKind::Logreg => Model::Logreg(train_logreg(&xs, train_labels, &config.logreg)?),
        ModelKind::Svm => {
            let (m, trace) = train_linear_svm(&xs, train_labels, &config.svm)?;
            svm_objective = trace.epoch_objective;
            Model::Svm(m)
        }
        ModelKind::Lstm => unreachable!("handled above"),
    };
    let train_seconds = started.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        model: TrainedModel {
            vocab,
            embedding: Some(emb),
            max_len: config.lstm.max_len,
            model,
        },
        train_seconds,
        feature_seconds,
        word2vec_losses: w2v_losses,
        lstm_log: None,
        svm_objective,
    })
}

/// Predictions plus the scored pairs that feed ROC analysis.
pub fn score_labeled(
    model: &TrainedModel,
    docs: &[Vec<String>],
    labels: &[Label],
    exec: Execution,
) -> Result<(Vec<Label>, Vec<ScoredPrediction>)> {
    if docs.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} documents but {} labels",
            docs.len(),
            labels.len()
        )));
    }
    let preds = model.score_docs(docs, exec)?;
    let scored = preds
        .iter()
        .zip(labels)
        .map(|(p, &truth)| ScoredPrediction { score: p.score, truth })
        .collect();
    Ok((preds.iter().map(|p| p.label).collect(), scored))
}

pub fn evaluate_model(
    model: &TrainedModel,
    docs: &[Vec<String>],
    labels: &[Label],
    train_seconds: f64,
    exec: Execution,
) -> Result<MetricsReport> {
    let (preds, scored) = score_labeled(model, docs, labels, exec)?;
    evaluate(&preds, &scored, train_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticSpec};

    #[test]
    fn kind_parsing() {
        assert_eq!("SVM".parse::<ModelKind>().unwrap(), ModelKind::Svm);
        assert!("forest".parse::<ModelKind>().is_err());
    }

    #[test]
    fn prepare_shapes() {
        let corpus = generate_synthetic(&SyntheticSpec::new(5, 20, 0.2)).unwrap();
        let data = prepare(&corpus, &Preprocessor::default(), &SplitSpec::default()).unwrap();
        assert_eq!(data.split.train.len(), 32);
        assert_eq!(data.split.test.len(), 8);
        assert_eq!(data.tokens.len(), 40);
        assert_eq!(data.dropped, 0);
    }

    #[test]
    fn empty_inputs_still_score() {
        let corpus = generate_synthetic(&SyntheticSpec::new(5, 20, 0.2)).unwrap();
        let data = prepare(&corpus, &Preprocessor::default(), &SplitSpec::default()).unwrap();
        let cfg = PipelineConfig {
            word2vec: Word2VecConfig {
                dim: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = train_model(
            ModelKind::Gnb,
            &data.train_tokens(),
            &data.train_labels(),
            &cfg,
            Execution::Parallel,
        )
        .unwrap();
        let preds = out
            .model
            .score_docs(&[vec![], vec!["zzz".into()]], Execution::Sequential)
            .unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[0], preds[1]);
    }
}
