use serde::{Deserialize, Serialize};

use super::{check_training, dot, sigmoid, Classifier, Prediction};
use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub lr: f64,
    pub l2_lambda: f64,
    pub max_iter: usize,
    /// Stop once an iteration improves the loss by less than this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lr: 0.1,
            l2_lambda: 1e-4,
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub max_iter: usize,
    /// Iterations actually run.
    pub iterations: usize,
}

impl LogRegModel {
    pub fn zeros(dim: usize) -> Self {
        LogRegModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            l2_lambda: 0.0,
            max_iter: 0,
            iterations: 0,
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean BCE plus `(lambda/2)|w|^2` and its gradient. The gradient vector
/// holds the weight components followed by the bias component.
pub fn logreg_loss_and_grad(
    weights: &[f64],
    bias: f64,
    xs: &[Vec<f64>],
    ys: &[Label],
    l2_lambda: f64,
) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let dim = weights.len();
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let z = dot(weights, x) + bias;
        let t = y.as_target();
        // -[t log s(z) + (1-t) log(1-s(z))] = softplus(z) - t z
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, xj) in grad[..dim].iter_mut().zip(x) {
            *g += r * xj;
        }
        grad[dim] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2_lambda * dot(weights, weights);
    for (g, w) in grad[..dim].iter_mut().zip(weights) {
        *g += l2_lambda * w;
    }
    (loss, grad)
}

/// Full-batch gradient descent from zero.
pub fn train_logreg(xs: &[Vec<f64>], ys: &[Label], config: &LogRegConfig) -> Result<LogRegModel> {
    let dim = check_training(xs, ys)?;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut loss, mut grad) = logreg_loss_and_grad(&w, b, xs, ys, config.l2_lambda);
    let mut iterations = 0;
    while iterations < config.max_iter {
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= config.lr * g;
        }
        b -= config.lr * grad[dim];
        iterations += 1;
        let (next, next_grad) = logreg_loss_and_grad(&w, b, xs, ys, config.l2_lambda);
        if !next.is_finite() {
            return Err(Error::Numeric(format!(
                "logistic regression loss became non-finite at iteration {iterations}; lower the learning rate"
            )));
        }
        let improvement = loss - next;
        loss = next;
        grad = next_grad;
        if improvement.abs() < config.tol {
            break;
        }
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        l2_lambda: config.l2_lambda,
        max_iter: config.max_iter,
        iterations,
    })
}

impl Classifier for LogRegModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Score is the spam probability; spam iff it reaches 0.5.
    fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let p = self.probability(x);
        Prediction {
            label: if p >= 0.5 { Label::Spam } else { Label::Ham },
            score: p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<Label>) {
        (
            vec![vec![1.0, 2.0], vec![2.0, 1.5], vec![-1.0, -0.5], vec![-2.0, -1.0]],
            vec![Label::Spam, Label::Spam, Label::Ham, Label::Ham],
        )
    }

    #[test]
    fn zero_model_is_half() {
        let m = LogRegModel::zeros(3);
        assert_eq!(m.predict(&[5.0, -2.0, 1.0]).unwrap().score, 0.5);
        assert_eq!(m.predict(&[5.0, -2.0, 1.0]).unwrap().label, Label::Spam);
    }

    #[test]
    fn saturates_for_large_margin() {
        let m = LogRegModel {
            weights: vec![10.0],
            ..LogRegModel::zeros(1)
        };
        assert!(m.predict(&[1.0]).unwrap().score > 0.99);
    }

    #[test]
    fn probability_monotone_in_margin() {
        let m = LogRegModel {
            weights: vec![0.7, -0.3],
            bias: 0.1,
            ..LogRegModel::zeros(2)
        };
        let ps: Vec<f64> = (0..10).map(|i| m.probability(&[i as f64 - 5.0, 0.0])).collect();
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn separable_toy_is_fit() {
        let (xs, ys) = toy();
        let m = train_logreg(&xs, &ys, &LogRegConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.predict(x).unwrap().label, *y);
        }
    }

    #[test]
    fn divergent_lr_is_reported() {
        let xs = vec![vec![1e200], vec![-1e200]];
        let ys = [Label::Spam, Label::Ham];
        let cfg = LogRegConfig {
            lr: 1e200,
            ..Default::default()
        };
        assert!(matches!(train_logreg(&xs, &ys, &cfg), Err(Error::Numeric(_))));
    }
}
