use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, dot, label_for, Classifier, Prediction};
use crate::{Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 100,
            seed: crate::corpus::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
}

/// Primal objective of the averaged iterate after every epoch.
#[derive(Debug, Clone, Default)]
pub struct SvmTrace {
    pub epoch_objective: Vec<f64>,
}

/// `(1/2)|w|^2 + c * sum_i max(0, 1 - y_i (w.x_i + b))`.
pub fn svm_objective(weights: &[f64], bias: f64, c: f64, xs: &[Vec<f64>], ys: &[Label]) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y.as_sign() * (dot(weights, x) + bias)).max(0.0))
        .sum();
    0.5 * dot(weights, weights) + c * hinge
}

/// Pegasos stochastic subgradient descent with step `1/(lambda t)`, where
/// `lambda = 1/(c n)` makes the per-sample objective a rescaling of the
/// primal above. The bias rides along as an unregularized extra weight.
/// Returns the average of all iterates.
pub fn train_linear_svm(xs: &[Vec<f64>], ys: &[Label], config: &SvmConfig) -> Result<(LinearSvmModel, SvmTrace)> {
    let dim = check_training(xs, ys)?;
    let n = xs.len();
    let lambda = 1.0 / (config.c * n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut w_sum = vec![0.0; dim];
    let mut b_sum = 0.0;
    let mut t = 0usize;
    let mut trace = SvmTrace::default();

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = ys[i].as_sign();
            let margin = y * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|wj| *wj *= shrink);
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += eta * y * xj;
                }
                b += eta * y;
            }
            w_sum.iter_mut().zip(&w).for_each(|(s, wj)| *s += wj);
            b_sum += b;
        }
        let inv = 1.0 / t as f64;
        let avg_w: Vec<f64> = w_sum.iter().map(|s| s * inv).collect();
        trace
            .epoch_objective
            .push(svm_objective(&avg_w, b_sum * inv, config.c, xs, ys));
    }

    let inv = if t > 0 { 1.0 / t as f64 } else { 0.0 };
    Ok((
        LinearSvmModel {
            weights: w_sum.iter().map(|s| s * inv).collect(),
            bias: b_sum * inv,
            c: config.c,
        },
        trace,
    ))
}

impl Classifier for LinearSvmModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Score is the signed distance proxy `w.x + b`.
    fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        let score = dot(&self.weights, x) + self.bias;
        Prediction {
            label: label_for(score),
            score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<Label>) {
        let xs = vec![
            vec![2.0, 2.0],
            vec![3.0, 1.0],
            vec![2.5, 3.0],
            vec![1.5, 2.5],
            vec![-2.0, -1.0],
            vec![-1.0, -3.0],
            vec![-2.5, -2.0],
            vec![-1.5, -1.5],
        ];
        let ys = [[Label::Spam; 4], [Label::Ham; 4]].concat();
        (xs, ys)
    }

    #[test]
    fn fits_separable_set_with_positive_margins() {
        let (xs, ys) = separable();
        let (m, _) = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let p = m.predict(x).unwrap();
            assert_eq!(p.label, *y);
            assert!(y.as_sign() * p.score > 0.0);
        }
    }

    #[test]
    fn hyperplane_tie_and_reflection() {
        let m = LinearSvmModel {
            weights: vec![1.0, -2.0],
            bias: 0.5,
            c: 1.0,
        };
        // 1*1.5 - 2*1 + 0.5 = 0
        let on = m.predict(&[1.5, 1.0]).unwrap();
        assert_eq!(on.score, 0.0);
        assert_eq!(on.label, Label::Spam);

        // Reflect x through the hyperplane: x' = x - 2 f(x) w / |w|^2.
        let x = [3.0, -1.0];
        let f = m.predict(&x).unwrap().score;
        let ww = 5.0;
        let xr = [x[0] - 2.0 * f * 1.0 / ww, x[1] - 2.0 * f * -2.0 / ww];
        let fr = m.predict(&xr).unwrap().score;
        assert!((fr + f).abs() < 1e-12);
    }

    #[test]
    fn top_scores_are_spam() {
        let (xs, ys) = separable();
        let (m, _) = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap();
        let mut scored: Vec<(f64, Label)> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (m.predict(x).unwrap().score, *y))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!(scored[..4].iter().all(|(_, y)| *y == Label::Spam));
    }

    #[test]
    fn deterministic() {
        let (xs, ys) = separable();
        let a = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap().0;
        let b = train_linear_svm(&xs, &ys, &SvmConfig::default()).unwrap().0;
        assert_eq!(a, b);
    }
}
