//! Sequential vs. parallel throughput for the batch-shaped hot paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use surat_core::classical::{train_linear_svm, Classifier, SvmConfig};
use surat_core::corpus::{generate_synthetic, SyntheticSpec};
use surat_core::embedding::{build_vocabulary, embed_documents, encode_sequence, init_word2vec, Word2VecConfig};
use surat_core::neural::{lstm_backward, lstm_forward, LstmParams, LstmShape};
use surat_core::par::Execution;
use surat_core::preprocess::Preprocessor;
use surat_core::Label;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn docs_and_labels(n_per_class: usize) -> (Vec<Vec<String>>, Vec<Label>) {
    let corpus = generate_synthetic(&SyntheticSpec::new(7, n_per_class, 0.2)).expect("synthetic corpus");
    let pre = Preprocessor::default();
    let docs = corpus.records().iter().map(|r| pre.tokens(&r.message)).collect();
    let labels = corpus.records().iter().map(|r| r.label).collect();
    (docs, labels)
}

fn bench_embed(c: &mut Criterion) {
    let (docs, _) = docs_and_labels(1000);
    let vocab = build_vocabulary(&docs, 1).unwrap();
    let emb = init_word2vec(vocab.len(), &Word2VecConfig::default());
    let mut group = c.benchmark_group("embed_documents");
    group.throughput(Throughput::Elements(docs.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| embed_documents(black_box(&docs), &vocab, &emb, exec))
        });
    }
    group.finish();
}

fn bench_predict(c: &mut Criterion) {
    let (docs, labels) = docs_and_labels(1000);
    let vocab = build_vocabulary(&docs, 1).unwrap();
    let emb = init_word2vec(vocab.len(), &Word2VecConfig::default());
    let xs = embed_documents(&docs, &vocab, &emb, Execution::Parallel);
    let (svm, _) = train_linear_svm(
        &xs,
        &labels,
        &SvmConfig {
            epochs: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let mut group = c.benchmark_group("svm_predict_batch");
    group.throughput(Throughput::Elements(xs.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| svm.predict_batch(black_box(&xs), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_lstm(c: &mut Criterion) {
    let (docs, labels) = docs_and_labels(64);
    let vocab = build_vocabulary(&docs, 2).unwrap();
    let batch: Vec<Vec<u32>> = docs.iter().take(32).map(|d| encode_sequence(d, &vocab, 50)).collect();
    let targets: Vec<f64> = labels.iter().take(32).map(|l| l.as_target()).collect();
    let params = LstmParams::seeded(
        LstmShape {
            vocab_size: vocab.len(),
            embed_dim: 64,
            hidden_dim: 64,
        },
        42,
    );
    let mut group = c.benchmark_group("lstm_batch_step");
    group.sample_size(20);
    group.throughput(Throughput::Elements(batch.len() as u64));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| lstm_forward(&params, black_box(&batch), exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("forward_backward", name), |b| {
            b.iter(|| {
                let (_, cache) = lstm_forward(&params, black_box(&batch), exec).unwrap();
                lstm_backward(&params, &cache, &targets, exec).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_embed, bench_predict, bench_lstm);
criterion_main!(benches);
