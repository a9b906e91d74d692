//! Vocabularies, skip-gram Word2Vec with negative sampling, document
//! pooling and fixed-length index encoding.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};
use crate::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const MAX_SEQ_LEN: usize = 50;
pub const WORD2VEC_DIM: usize = 100;

/// Token to id map. Ids 0 and 1 are reserved for padding and unknown
/// tokens; kept tokens occupy `2..len()` in descending frequency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_freq: u64,
}

impl Vocabulary {
    /// Rebuild from an id-ordered token list (reserved entries included).
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>, min_freq: u64) -> Result<Vocabulary> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Format(
                "vocabulary must start with the reserved <pad> and <unk> entries".into(),
            ));
        }
        if counts.len() != tokens.len() {
            return Err(Error::Format("vocabulary counts and tokens differ in length".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(2) {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            counts,
            index,
            min_freq,
        })
    }

    /// Total number of ids, reserved pair included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when no real tokens were kept.
    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// Frequency-ranked vocabulary from training documents only.
pub fn build_vocabulary(train_docs: &[Vec<String>], min_freq: u64) -> Result<Vocabulary> {
    if train_docs.is_empty() {
        return Err(Error::Invalid(
            "cannot build a vocabulary from an empty training set".into(),
        ));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for doc in train_docs {
        for t in doc {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_freq.max(1)).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = vec![PAD_TOKEN.to_owned(), UNK_TOKEN.to_owned()];
    let mut counts = vec![0, 0];
    for (t, c) in kept {
        tokens.push(t.to_owned());
        counts.push(c);
    }
    Vocabulary::from_parts(tokens, counts, min_freq)
}

/// Dense row-major `rows x dim` table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimMismatch {
                expected: rows * dim,
                got: data.len(),
            });
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Text format: `w2v <rows> <dim>` then `token v1 .. vdim` per row.
    /// Floats use shortest round-trip formatting, so reloads are exact.
    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        if vocab.len() != self.rows {
            return Err(Error::DimMismatch {
                expected: self.rows,
                got: vocab.len(),
            });
        }
        let io = |e| Error::io("<embedding writer>", e);
        writeln!(w, "w2v {} {}", self.rows, self.dim).map_err(io)?;
        for (i, tok) in vocab.tokens().iter().enumerate() {
            write!(w, "{tok}").map_err(io)?;
            for v in self.row(i) {
                write!(w, " {v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        Ok(())
    }

    /// Parse the text format, returning tokens in row order with the matrix.
    pub fn read_text<R: BufRead>(r: R) -> Result<(Vec<String>, EmbeddingMatrix)> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty embedding file".into()))?
            .map_err(|e| Error::io("<embedding reader>", e))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (rows, dim) = match parts.as_slice() {
            ["w2v", r, d] => (
                r.parse::<usize>().map_err(|_| Error::Format("bad row count".into()))?,
                d.parse::<usize>().map_err(|_| Error::Format("bad dimension".into()))?,
            ),
            _ => return Err(Error::Format(format!("bad embedding header {header:?}"))),
        };
        let mut tokens = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for line in lines {
            let line = line.map_err(|e| Error::io("<embedding reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(' ');
            let tok = it.next().unwrap_or_default().to_owned();
            let before = data.len();
            for v in it {
                data.push(
                    v.parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad float {v:?}")))?,
                );
            }
            if data.len() - before != dim {
                return Err(Error::Format(format!(
                    "row for {tok:?} has {} values, expected {dim}",
                    data.len() - before
                )));
            }
            tokens.push(tok);
        }
        if tokens.len() != rows {
            return Err(Error::Format(format!("expected {rows} rows, found {}", tokens.len())));
        }
        Ok((tokens, EmbeddingMatrix { rows, dim, data }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: WORD2VEC_DIM,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            seed: crate::corpus::DEFAULT_SEED,
        }
    }
}

impl Word2VecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0
            || self.window == 0
            || self.negatives == 0
            || self.initial_lr.is_nan()
            || self.initial_lr <= 0.0
        {
            return Err(Error::Invalid(
                "word2vec needs dim >= 1, window >= 1, negatives >= 1 and a positive learning rate".into(),
            ));
        }
        Ok(())
    }
}

/// Trained input vectors plus the mean skip-gram loss of every epoch.
#[derive(Debug, Clone)]
pub struct Word2VecModel {
    pub vectors: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

/// Cumulative unigram^0.75 distribution over real token ids.
struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cdf = (2..vocab.len() as u32)
            .map(|id| {
                acc += (vocab.count(id) as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cdf.last().expect("sampler built over a non-empty vocabulary");
        let u = rng.gen::<f64>() * total;
        let pos = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        pos as u32 + 2
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `-ln sigmoid(x)` without overflow.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Initial input vectors: uniform(-0.5/d, 0.5/d), reserved rows zero.
pub fn init_word2vec(vocab_len: usize, config: &Word2VecConfig) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = 0.5 / config.dim as f64;
    let mut m = EmbeddingMatrix::zeros(vocab_len, config.dim);
    for r in 2..vocab_len {
        for v in m.row_mut(r) {
            *v = rng.gen_range(-half..half);
        }
    }
    m
}

/// Skip-gram with negative sampling over `train_docs`, single-threaded and
/// deterministic given `config.seed`. Rows follow `vocab` ids.
pub fn train_word2vec(
    train_docs: &[Vec<String>],
    vocab: &Vocabulary,
    config: &Word2VecConfig,
) -> Result<Word2VecModel> {
    config.validate()?;
    if train_docs.is_empty() || vocab.is_empty() {
        return Err(Error::Invalid("word2vec needs a non-empty training set".into()));
    }
    let docs: Vec<Vec<u32>> = train_docs
        .iter()
        .map(|d| d.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let pairs_per_epoch: usize = docs
        .iter()
        .map(|d| {
            (0..d.len())
                .map(|i| {
                    let lo = i.saturating_sub(config.window);
                    let hi = (i + config.window).min(d.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    if pairs_per_epoch == 0 {
        return Err(Error::Invalid(
            "corpus too small to form any (center, context) pair".into(),
        ));
    }

    let dim = config.dim;
    let mut input = init_word2vec(vocab.len(), config);
    let mut output = EmbeddingMatrix::zeros(vocab.len(), dim);
    let sampler = NegativeSampler::new(vocab);
    // A separate stream from the initializer keeps 0-epoch runs equal to init.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed_5eed_5eed);
    let total = (pairs_per_epoch * config.epochs) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_in = vec![0.0; dim];

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        for doc in &docs {
            for (i, &center) in doc.iter().enumerate() {
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window).min(doc.len() - 1);
                for (j, &context) in doc.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = config.initial_lr * (1.0 - processed as f64 / total).max(1e-4);
                    processed += 1;
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let neg = sampler.sample(&mut rng);
                            if neg == context {
                                continue;
                            }
                            (neg, 0.0)
                        };
                        let v = input.row(center as usize);
                        let u = output.row(target as usize);
                        let score = dot(v, u);
                        loss_sum += if label > 0.0 {
                            neg_log_sigmoid(score)
                        } else {
                            neg_log_sigmoid(-score)
                        };
                        let g = (label - sigmoid(score)) * lr;
                        for (acc, &uj) in grad_in.iter_mut().zip(u) {
                            *acc += g * uj;
                        }
                        for (uj, vj) in output.row_mut(target as usize).iter_mut().zip(v) {
                            *uj += g * vj;
                        }
                    }
                    for (vj, gj) in input.row_mut(center as usize).iter_mut().zip(&grad_in) {
                        *vj += gj;
                    }
                }
            }
        }
        let mean = loss_sum / pairs_per_epoch as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric("word2vec loss became non-finite".into()));
        }
        epoch_losses.push(mean);
    }
    Ok(Word2VecModel {
        vectors: input,
        epoch_losses,
    })
}

/// Mean of the in-vocabulary token vectors; zero vector when none are known.
pub fn embed_document(tokens: &[String], vocab: &Vocabulary, emb: &EmbeddingMatrix) -> Vec<f64> {
    let mut acc = vec![0.0; emb.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(id) = vocab.id(t) {
            for (a, v) in acc.iter_mut().zip(emb.row(id as usize)) {
                *a += v;
            }
            n += 1;
        }
    }
    if n > 0 {
        let inv = n as f64;
        acc.iter_mut().for_each(|a| *a /= inv);
    }
    acc
}

pub fn embed_documents(
    docs: &[Vec<String>],
    vocab: &Vocabulary,
    emb: &EmbeddingMatrix,
    exec: Execution,
) -> Vec<Vec<f64>> {
    par::map(exec, docs, |d| embed_document(d, vocab, emb))
}

/// Head-truncate to `max_len`, map unknown tokens to [`UNK_ID`], pad with
/// [`PAD_ID`].
pub fn encode_sequence(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = tokens.iter().take(max_len).map(|t| vocab.id_or_unk(t)).collect();
    ids.resize(max_len, PAD_ID);
    ids
}
