//! Single-file model container.
//!
//! Layout: one line of compact JSON (the header), a newline, then every
//! array back to back as little-endian `f64`. The header lists array names
//! and shapes in payload order and carries a SHA-256 of the payload.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{GaussianNbModel, LinearSvmModel, LogRegModel, Prediction};
use crate::corpus::to_hex;
use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::neural::{LstmParams, LstmShape};
use crate::par::Execution;
use crate::pipeline::{Model, ModelKind, TrainedModel};
use crate::preprocess::{Preprocessor, StopwordList};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "surat-model";
const MAX_HEADER_BYTES: u64 = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArrayEntry {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabRecord {
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    pub min_freq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub magic: String,
    pub format_version: u32,
    pub model_kind: ModelKind,
    /// Input feature dimension (document vector or token embedding width).
    pub dim: usize,
    pub max_len: usize,
    pub arrays: Vec<ArrayEntry>,
    pub payload_bytes: u64,
    pub checksum: String,
    pub vocabulary: VocabRecord,
    pub stopwords: Vec<String>,
    /// Non-array model fields, e.g. the SVM's C.
    pub scalars: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub dataset_fingerprint: Option<String>,
    pub train_seconds: f64,
}

/// A trained model plus everything needed to score raw text.
#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub model: TrainedModel,
    pub stopwords: StopwordList,
    pub config: serde_json::Value,
    pub dataset_fingerprint: Option<String>,
    pub train_seconds: f64,
}

struct Arrays<'a> {
    entries: Vec<ArrayEntry>,
    data: Vec<&'a [f64]>,
}

impl<'a> Arrays<'a> {
    fn new() -> Self {
        Arrays {
            entries: Vec::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, shape: &[usize], data: &'a [f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push(ArrayEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
        });
        self.data.push(data);
    }
}

fn embedding_arrays<'a>(arrays: &mut Arrays<'a>, emb: &'a EmbeddingMatrix) {
    arrays.push("embedding", &[emb.rows(), emb.dim()], emb.as_slice());
}

impl ModelArtifact {
    pub fn new(model: TrainedModel, stopwords: StopwordList) -> Self {
        ModelArtifact {
            model,
            stopwords,
            config: serde_json::Value::Null,
            dataset_fingerprint: None,
            train_seconds: 0.0,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn preprocessor(&self) -> Preprocessor {
        Preprocessor::new(self.stopwords.clone())
    }

    /// Clean, tokenize and score raw messages.
    pub fn predict_texts<S: AsRef<str>>(&self, texts: &[S], exec: Execution) -> Result<Vec<Prediction>> {
        let pre = self.preprocessor();
        let docs: Vec<Vec<String>> = texts.iter().map(|t| pre.tokens(t.as_ref())).collect();
        self.model.score_docs(&docs, exec)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut scalars = BTreeMap::new();
        let mut arrays = Arrays::new();
        let bias_store;
        let dim;
        match (&self.model.model, &self.model.embedding) {
            (Model::Gnb(m), Some(emb)) => {
                dim = emb.dim();
                embedding_arrays(&mut arrays, emb);
                arrays.push("class_priors", &[2], &m.class_priors);
                arrays.push("means_ham", &[dim], &m.means[0]);
                arrays.push("means_spam", &[dim], &m.means[1]);
                arrays.push("variances_ham", &[dim], &m.variances[0]);
                arrays.push("variances_spam", &[dim], &m.variances[1]);
            }
            (Model::Logreg(m), Some(emb)) => {
                dim = emb.dim();
                embedding_arrays(&mut arrays, emb);
                bias_store = [m.bias];
                arrays.push("weights", &[dim], &m.weights);
                arrays.push("bias", &[1], &bias_store);
                scalars.insert("l2_lambda".into(), m.l2_lambda);
                scalars.insert("max_iter".into(), m.max_iter as f64);
                scalars.insert("iterations".into(), m.iterations as f64);
            }
            (Model::Svm(m), Some(emb)) => {
                dim = emb.dim();
                embedding_arrays(&mut arrays, emb);
                bias_store = [m.bias];
                arrays.push("weights", &[dim], &m.weights);
                arrays.push("bias", &[1], &bias_store);
                scalars.insert("c".into(), m.c);
            }
            (Model::Lstm(p), _) => {
                let LstmShape {
                    vocab_size: v,
                    embed_dim: e,
                    hidden_dim: h,
                } = p.shape;
                dim = e;
                bias_store = [p.out_b];
                arrays.push("embedding", &[v, e], &p.embedding);
                arrays.push("w_x", &[4 * h, e], &p.w_x);
                arrays.push("w_h", &[4 * h, h], &p.w_h);
                arrays.push("b", &[4 * h], &p.b);
                arrays.push("out_w", &[h], &p.out_w);
                arrays.push("out_b", &[1], &bias_store);
            }
            _ => return Err(Error::Invalid("classical model is missing its embedding table".into())),
        }

        let mut payload = Vec::with_capacity(arrays.data.iter().map(|d| d.len() * 8).sum());
        for d in &arrays.data {
            for v in d.iter() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let vocab = &self.model.vocab;
        let header = ArtifactHeader {
            magic: MAGIC.into(),
            format_version: FORMAT_VERSION,
            model_kind: self.kind(),
            dim,
            max_len: self.model.max_len,
            arrays: arrays.entries,
            payload_bytes: payload.len() as u64,
            checksum: format!("sha256:{}", to_hex(&Sha256::digest(&payload))),
            vocabulary: VocabRecord {
                tokens: vocab.tokens().to_vec(),
                counts: vocab.counts().to_vec(),
                min_freq: vocab.min_freq(),
            },
            stopwords: self.stopwords.sorted_words(),
            scalars,
            config: self.config.clone(),
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            train_seconds: self.train_seconds,
        };
        let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
        let io = |e| Error::io("<artifact>", e);
        w.write_all(line.as_bytes()).map_err(io)?;
        w.write_all(b"\n").map_err(io)?;
        w.write_all(&payload).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<ModelArtifact> {
        let io = |e| Error::io("<artifact>", e);
        let mut line = Vec::new();
        (&mut r)
            .take(MAX_HEADER_BYTES)
            .read_until(b'\n', &mut line)
            .map_err(io)?;
        if line.pop() != Some(b'\n') {
            return Err(Error::Format("artifact header is not newline-terminated".into()));
        }
        let header: ArtifactHeader =
            serde_json::from_slice(&line).map_err(|e| Error::Format(format!("artifact header: {e}")))?;
        if header.magic != MAGIC {
            return Err(Error::Format(format!(
                "not a model artifact (magic {:?})",
                header.magic
            )));
        }
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported artifact version {} (this build reads {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let expected: usize = header.arrays.iter().map(ArrayEntry::len).sum();
        if header.payload_bytes != expected as u64 * 8 {
            return Err(Error::Format(format!(
                "payload size {} does not match declared arrays ({} values)",
                header.payload_bytes, expected
            )));
        }
        let mut payload = vec![0u8; expected * 8];
        r.read_exact(&mut payload)
            .map_err(|_| Error::Format("artifact payload is truncated".into()))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(io)? != 0 {
            return Err(Error::Format("trailing bytes after artifact payload".into()));
        }
        let digest = format!("sha256:{}", to_hex(&Sha256::digest(&payload)));
        if digest != header.checksum {
            return Err(Error::Format("artifact checksum mismatch".into()));
        }

        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        let mut named: BTreeMap<&str, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
        for entry in &header.arrays {
            let data: Vec<f64> = values.by_ref().take(entry.len()).collect();
            named.insert(entry.name.as_str(), (entry.shape.clone(), data));
        }
        let lstm_hidden = named.get("out_w").and_then(|(s, _)| s.first().copied());
        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            let (got, data) = named
                .remove(name)
                .ok_or_else(|| Error::Format(format!("artifact is missing array {name:?}")))?;
            if got != shape {
                return Err(Error::Format(format!(
                    "array {name:?} has shape {got:?}, expected {shape:?}"
                )));
            }
            Ok(data)
        };
        let scalar = |name: &str| -> Result<f64> {
            header
                .scalars
                .get(name)
                .copied()
                .ok_or_else(|| Error::Format(format!("artifact is missing scalar {name:?}")))
        };

        let vocab = Vocabulary::from_parts(
            header.vocabulary.tokens.clone(),
            header.vocabulary.counts.clone(),
            header.vocabulary.min_freq,
        )?;
        let v = vocab.len();
        let d = header.dim;

        let (model, embedding) = match header.model_kind {
            ModelKind::Lstm => {
                let h = lstm_hidden.ok_or_else(|| Error::Format("artifact is missing array \"out_w\"".into()))?;
                let shape = LstmShape {
                    vocab_size: v,
                    embed_dim: d,
                    hidden_dim: h,
                };
                let params = LstmParams {
                    shape,
                    embedding: take("embedding", &[v, d])?,
                    w_x: take("w_x", &[4 * h, d])?,
                    w_h: take("w_h", &[4 * h, h])?,
                    b: take("b", &[4 * h])?,
                    out_w: take("out_w", &[h])?,
                    out_b: take("out_b", &[1])?[0],
                };
                (Model::Lstm(params), None)
            }
            kind => {
                let emb = EmbeddingMatrix::from_vec(v, d, take("embedding", &[v, d])?)?;
                let model = match kind {
                    ModelKind::Gnb => {
                        let priors = take("class_priors", &[2])?;
                        Model::Gnb(GaussianNbModel {
                            class_priors: [priors[0], priors[1]],
                            means: [take("means_ham", &[d])?, take("means_spam", &[d])?],
                            variances: [take("variances_ham", &[d])?, take("variances_spam", &[d])?],
                        })
                    }
                    ModelKind::Logreg => Model::Logreg(LogRegModel {
                        weights: take("weights", &[d])?,
                        bias: take("bias", &[1])?[0],
                        l2_lambda: scalar("l2_lambda")?,
                        max_iter: scalar("max_iter")? as usize,
                        iterations: scalar("iterations")? as usize,
                    }),
                    ModelKind::Svm => Model::Svm(LinearSvmModel {
                        weights: take("weights", &[d])?,
                        bias: take("bias", &[1])?[0],
                        c: scalar("c")?,
                    }),
                    ModelKind::Lstm => unreachable!("matched above"),
                };
                (model, Some(emb))
            }
        };
        if let Some(extra) = named.keys().next() {
            return Err(Error::Format(format!(
                "unexpected array {extra:?} for a {} model",
                header.model_kind
            )));
        }

        Ok(ModelArtifact {
            model: TrainedModel {
                vocab,
                embedding,
                max_len: header.max_len,
                model,
            },
            stopwords: StopwordList::from_words(&header.stopwords)?,
            config: header.config,
            dataset_fingerprint: header.dataset_fingerprint,
            train_seconds: header.train_seconds,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelArtifact> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

/// Read only the header line, e.g. to inspect an artifact without loading it.
pub fn read_header<R: BufRead>(mut r: R) -> Result<ArtifactHeader> {
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io("<artifact>", e))?;
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("artifact header: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::LstmParams;

    fn tiny_vocab() -> Vocabulary {
        Vocabulary::from_parts(
            vec!["<pad>".into(), "<unk>".into(), "promo".into(), "rapat".into()],
            vec![0, 0, 3, 2],
            1,
        )
        .unwrap()
    }

    fn lstm_artifact() -> ModelArtifact {
        let shape = LstmShape {
            vocab_size: 4,
            embed_dim: 3,
            hidden_dim: 2,
        };
        let model = TrainedModel {
            vocab: tiny_vocab(),
            embedding: None,
            max_len: 5,
            model: Model::Lstm(LstmParams::seeded(shape, 9)),
        };
        ModelArtifact::new(model, StopwordList::from_words(["dan", "yang"]).unwrap())
    }

    #[test]
    fn lstm_roundtrip_is_exact() {
        let a = lstm_artifact();
        let mut buf = Vec::new();
        a.write(&mut buf).unwrap();
        let b = ModelArtifact::read(&buf[..]).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(b.stopwords.sorted_words(), vec!["dan", "yang"]);
        let texts = ["promo dan rapat", "", "rapat rapat"];
        let pa = a.predict_texts(&texts, Execution::Sequential).unwrap();
        let pb = b.predict_texts(&texts, Execution::Sequential).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_eq!(x.score.to_bits(), y.score.to_bits());
        }
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let mut buf = Vec::new();
        lstm_artifact().write(&mut buf).unwrap();
        let last = buf.len() - 1;
        buf[last] ^= 1;
        assert!(matches!(ModelArtifact::read(&buf[..]), Err(Error::Format(m)) if m.contains("checksum")));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut buf = Vec::new();
        lstm_artifact().write(&mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(ModelArtifact::read(&buf[..]).is_err());
    }

    #[test]
    fn header_is_readable_alone() {
        let mut buf = Vec::new();
        lstm_artifact().write(&mut buf).unwrap();
        let h = read_header(&buf[..]).unwrap();
        assert_eq!(h.model_kind, ModelKind::Lstm);
        assert_eq!(h.arrays.len(), 6);
        assert!(h.checksum.starts_with("sha256:"));
    }
}
