use std::f64::consts::PI;

use super::{check_training, label_for, Classifier, Prediction};
use crate::{Label, Result};

const VAR_SMOOTHING: f64 = 1e-9;

/// Per-class diagonal Gaussians. Index 0 is ham, 1 is spam.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNbModel {
    pub class_priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub fn train_gnb(xs: &[Vec<f64>], ys: &[Label]) -> Result<GaussianNbModel> {
    let dim = check_training(xs, ys)?;
    let n = xs.len() as f64;

    // Smoothing floor from the largest per-feature variance of all data.
    let mut pooled_mean = vec![0.0; dim];
    for x in xs {
        pooled_mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
    }
    let max_var = (0..dim)
        .map(|j| xs.iter().map(|x| (x[j] - pooled_mean[j]).powi(2)).sum::<f64>() / n)
        .fold(0.0, f64::max);
    let eps = if max_var > 0.0 {
        VAR_SMOOTHING * max_var
    } else {
        VAR_SMOOTHING
    };

    let mut counts = [0usize; 2];
    let mut means = [vec![0.0; dim], vec![0.0; dim]];
    for (x, y) in xs.iter().zip(ys) {
        let c = y.index();
        counts[c] += 1;
        means[c].iter_mut().zip(x).for_each(|(m, v)| *m += v);
    }
    for c in 0..2 {
        let k = counts[c] as f64;
        means[c].iter_mut().for_each(|m| *m /= k);
    }
    let mut variances = [vec![0.0; dim], vec![0.0; dim]];
    for (x, y) in xs.iter().zip(ys) {
        let c = y.index();
        for j in 0..dim {
            variances[c][j] += (x[j] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        let k = counts[c] as f64;
        variances[c].iter_mut().for_each(|v| *v = *v / k + eps);
    }
    Ok(GaussianNbModel {
        class_priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        variances,
    })
}

impl GaussianNbModel {
    /// Unnormalized log joint `log P(c) + sum_j log N(x_j; mu, var)` per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mut ll = self.class_priors[c].ln();
            for ((xj, m), v) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                ll -= 0.5 * (2.0 * PI * v).ln() + (xj - m).powi(2) / (2.0 * v);
            }
            *o = ll;
        }
        out
    }

    /// Normalized log posteriors `[log P(ham|x), log P(spam|x)]`.
    pub fn log_posterior(&self, x: &[f64]) -> [f64; 2] {
        let jll = self.joint_log_likelihood(x);
        let m = jll[0].max(jll[1]);
        let lse = m + ((jll[0] - m).exp() + (jll[1] - m).exp()).ln();
        [jll[0] - lse, jll[1] - lse]
    }
}

impl Classifier for GaussianNbModel {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Score is the log-posterior margin, spam minus ham.
    fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let jll = self.joint_log_likelihood(x);
        let score = jll[1] - jll[0];
        Prediction {
            label: label_for(score),
            score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_one_dim_boundary() {
        let xs = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let ys = [Label::Ham, Label::Ham, Label::Spam, Label::Spam];
        // Zero within-class variance; smoothing keeps it positive.
        let m = train_gnb(&xs, &ys).unwrap();
        assert!(m.variances.iter().flatten().all(|&v| v > 0.0));
        assert_eq!(m.predict(&[0.0]).unwrap().score, 0.0);
        assert_eq!(m.predict(&[0.0]).unwrap().label, Label::Spam);
        assert_eq!(m.predict(&[-0.01]).unwrap().label, Label::Ham);
        assert_eq!(m.predict(&[0.01]).unwrap().label, Label::Spam);
    }

    #[test]
    fn priors_from_frequency() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let ys = [Label::Spam, Label::Spam, Label::Spam, Label::Ham];
        let m = train_gnb(&xs, &ys).unwrap();
        assert_eq!(m.class_priors, [0.25, 0.75]);
    }

    #[test]
    fn at_spam_mean_predicts_spam() {
        let xs = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![4.0, 4.0], vec![5.0, 5.0]];
        let ys = [Label::Ham, Label::Ham, Label::Spam, Label::Spam];
        let m = train_gnb(&xs, &ys).unwrap();
        assert_eq!(m.predict(&[4.5, 4.5]).unwrap().label, Label::Spam);
    }

    #[test]
    fn single_class_and_dim_errors() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert!(train_gnb(&xs, &[Label::Ham, Label::Ham]).is_err());
        let m = train_gnb(&xs, &[Label::Ham, Label::Spam]).unwrap();
        assert!(m.predict(&[0.0, 1.0]).is_err());
    }
}
