//! Spam/ham email classification built from first principles.
//!
//! The crate covers the full path from raw messages to evaluation tables:
//!
//! * [`corpus`]: CSV loading, cleaning filter, stratified splits, synthetic corpora
//! * [`preprocess`]: five-rule text cleaning and Indonesian stopword removal
//! * [`embedding`]: vocabularies, skip-gram Word2Vec, document pooling, index encoding
//! * [`classical`]: Gaussian naive Bayes, logistic regression, linear SVM
//! * [`neural`]: single-layer LSTM with hand-written BPTT and Adam
//! * [`eval`]: confusion matrices, per-class reports, AUC, kappa, MCC, comparison tables
//! * [`artifact`]: portable model container
//! * [`pipeline`]: glue that trains and scores every model kind on a split
//!
//! Batch work (document pooling, batch prediction, per-example LSTM gradients)
//! runs on rayon when the `parallel` feature is enabled; see [`par`].

pub mod artifact;
pub mod classical;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod neural;
pub mod par;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};

/// Binary class label. Spam is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Ham,
    Spam,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Ham, Label::Spam];

    /// 1 for spam, 0 for ham.
    pub fn as_target(self) -> f64 {
        match self {
            Label::Ham => 0.0,
            Label::Spam => 1.0,
        }
    }

    /// +1 for spam, -1 for ham.
    pub fn as_sign(self) -> f64 {
        match self {
            Label::Ham => -1.0,
            Label::Spam => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::Ham => 0,
            Label::Spam => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ham => "ham",
            Label::Spam => "spam",
        }
    }

    /// Case-insensitive, whitespace-trimmed parse. Anything other than
    /// `ham` or `spam` is rejected.
    pub fn parse(s: &str) -> Option<Label> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("ham") {
            Some(Label::Ham)
        } else if t.eq_ignore_ascii_case("spam") {
            Some(Label::Spam)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
