//! Classical classifiers over dense document vectors.
//!
//! All three share the same convention: spam is the positive class, scores
//! grow with spam-likeness, and a score exactly on the decision threshold
//! predicts spam.

mod gnb;
mod logreg;
mod svm;

pub use gnb::{train_gnb, GaussianNbModel};
pub use logreg::{logreg_loss_and_grad, train_logreg, LogRegConfig, LogRegModel};
pub use svm::{svm_objective, train_linear_svm, LinearSvmModel, SvmConfig, SvmTrace};

use crate::par::{self, Execution};
use crate::{Error, Label, Result};

/// A predicted label with its spam-oriented score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

pub trait Classifier: Sync {
    fn dim(&self) -> usize;

    /// Score one vector. Callers get a dimension check for free via
    /// [`Classifier::predict`].
    fn predict_unchecked(&self, x: &[f64]) -> Prediction;

    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.dim(), x)?;
        Ok(self.predict_unchecked(x))
    }

    /// Order-preserving batch prediction; identical results under either
    /// execution mode.
    fn predict_batch(&self, xs: &[Vec<f64>], exec: Execution) -> Result<Vec<Prediction>> {
        for x in xs {
            check_dim(self.dim(), x)?;
        }
        Ok(par::map(exec, xs, |x| self.predict_unchecked(x)))
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimMismatch { expected, got: x.len() });
    }
    Ok(())
}

/// Validate a training set: equal lengths, shared dimension, both classes.
pub(crate) fn check_training(xs: &[Vec<f64>], ys: &[Label]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(Error::Invalid(format!("{} vectors but {} labels", xs.len(), ys.len())));
    }
    let dim = xs.first().map(Vec::len).ok_or(Error::SingleClass)?;
    for x in xs {
        check_dim(dim, x)?;
    }
    if !ys.contains(&Label::Ham) || !ys.contains(&Label::Spam) {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn label_for(score: f64) -> Label {
    if score >= 0.0 {
        Label::Spam
    } else {
        Label::Ham
    }
}
