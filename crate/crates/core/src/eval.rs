//! Confusion matrices, per-class reports, ROC AUC, Cohen's kappa, MCC and
//! model comparison tables. Spam is the positive class throughout.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Same predictions scored with ham as the positive class.
    pub fn flipped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    /// Rows are truth (ham, spam); columns are prediction (ham, spam).
    pub fn as_grid(&self) -> [[u64; 2]; 2] {
        [[self.tn, self.fp], [self.fn_, self.tp]]
    }
}

pub fn confusion(preds: &[Label], truths: &[Label]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::Invalid(format!(
            "{} predictions but {} truths",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Invalid("cannot score an empty prediction set".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        match (t, p) {
            (Label::Spam, Label::Spam) => cm.tp += 1,
            (Label::Ham, Label::Spam) => cm.fp += 1,
            (Label::Spam, Label::Ham) => cm.fn_ += 1,
            (Label::Ham, Label::Ham) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// A ratio whose denominator may be zero. Degenerate ratios read as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

impl Ratio {
    pub fn of(num: f64, den: f64) -> Ratio {
        if den == 0.0 {
            Ratio {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Ratio {
                value: num / den,
                degenerate: false,
            }
        }
    }

    fn harmonic(p: Ratio, r: Ratio) -> Ratio {
        if p.degenerate || r.degenerate {
            return Ratio {
                value: 0.0,
                degenerate: true,
            };
        }
        Ratio::of(2.0 * p.value * r.value, p.value + r.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub accuracy: f64,
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

/// Accuracy, precision, recall and F1 for the spam class.
pub fn basic_metrics(cm: &ConfusionMatrix) -> Result<BasicMetrics> {
    if cm.total() == 0 {
        return Err(Error::Invalid("empty confusion matrix".into()));
    }
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let precision = Ratio::of(tp, tp + fp);
    let recall = Ratio::of(tp, tp + fn_);
    Ok(BasicMetrics {
        accuracy: (tp + tn) / (tp + tn + fp + fn_),
        precision,
        recall,
        f1: Ratio::harmonic(precision, recall),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class precision/recall/F1/support with macro and support-weighted
/// averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub ham: ClassMetrics,
    pub spam: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    pub total: u64,
}

fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let (tp, fp, fn_) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64);
    let precision = Ratio::of(tp, tp + fp);
    let recall = Ratio::of(tp, tp + fn_);
    ClassMetrics {
        precision,
        recall,
        f1: Ratio::harmonic(precision, recall),
        support: cm.tp + cm.fn_,
    }
}

pub fn class_report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    let basic = basic_metrics(cm)?;
    let spam = class_metrics(cm);
    let ham = class_metrics(&cm.flipped());
    let total = cm.total();
    let avg = |f: fn(&ClassMetrics) -> f64| (f(&ham) + f(&spam)) / 2.0;
    let wavg =
        |f: fn(&ClassMetrics) -> f64| (f(&ham) * ham.support as f64 + f(&spam) * spam.support as f64) / total as f64;
    let p = |m: &ClassMetrics| m.precision.value;
    let r = |m: &ClassMetrics| m.recall.value;
    let f = |m: &ClassMetrics| m.f1.value;
    Ok(ClassReport {
        ham,
        spam,
        accuracy: basic.accuracy,
        macro_avg: AveragedMetrics {
            precision: avg(p),
            recall: avg(r),
            f1: avg(f),
        },
        weighted_avg: AveragedMetrics {
            precision: wavg(p),
            recall: wavg(r),
            f1: wavg(f),
        },
        total,
    })
}

pub fn per_class_report(preds: &[Label], truths: &[Label]) -> Result<ClassReport> {
    class_report(&confusion(preds, truths)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    /// Higher means more spam-like.
    pub score: f64,
    pub truth: Label,
}

/// Probability that a random spam outranks a random ham, ties counting one
/// half, computed from average ranks in `O(n log n)`.
pub fn roc_auc(scored: &[ScoredPrediction]) -> Result<f64> {
    if scored.iter().any(|s| !s.score.is_finite()) {
        return Err(Error::Numeric("AUC needs finite scores".into()));
    }
    let pos = scored.iter().filter(|s| s.truth == Label::Spam).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].score.total_cmp(&scored[b].score));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].score == scored[order[i]].score {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mean_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| scored[k].truth == Label::Spam).count();
        pos_rank_sum += mean_rank * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, starting at
/// `(0, 0)` and ending at `(1, 1)`. Tied scores form one step.
pub fn roc_curve(scored: &[ScoredPrediction]) -> Result<Vec<(f64, f64)>> {
    let pos = scored.iter().filter(|s| s.truth == Label::Spam).count() as f64;
    let neg = scored.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<&ScoredPrediction> = scored.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    for (k, s) in sorted.iter().enumerate() {
        match s.truth {
            Label::Spam => tp += 1.0,
            Label::Ham => fp += 1.0,
        }
        if k + 1 == sorted.len() || sorted[k + 1].score != s.score {
            points.push((fp / neg, tp / pos));
        }
    }
    Ok(points)
}

/// Cohen's kappa; 0 when chance agreement is total.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> f64 {
    let n = cm.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p_o = (cm.tp + cm.tn) as f64 / n;
    let truth_spam = (cm.tp + cm.fn_) as f64;
    let truth_ham = (cm.tn + cm.fp) as f64;
    let pred_spam = (cm.tp + cm.fp) as f64;
    let pred_ham = (cm.tn + cm.fn_) as f64;
    let p_e = (truth_spam * pred_spam + truth_ham * pred_ham) / (n * n);
    if p_e == 1.0 {
        return 0.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / den.sqrt()
}

/// Everything reported for one model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub basic: BasicMetrics,
    pub classes: ClassReport,
    pub auc: f64,
    pub kappa: f64,
    pub mcc: f64,
    pub train_seconds: f64,
}

pub fn evaluate(preds: &[Label], scored: &[ScoredPrediction], train_seconds: f64) -> Result<MetricsReport> {
    let truths: Vec<Label> = scored.iter().map(|s| s.truth).collect();
    let cm = confusion(preds, &truths)?;
    Ok(MetricsReport {
        confusion: cm,
        basic: basic_metrics(&cm)?,
        classes: class_report(&cm)?,
        auc: roc_auc(scored)?,
        kappa: cohen_kappa(&cm),
        mcc: mcc(&cm),
        train_seconds,
    })
}

/// One row of the model comparison table. Recall/precision/F1 are given
/// both support-weighted and macro-averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub kind: String,
    pub accuracy: f64,
    pub auc: f64,
    pub recall_weighted: f64,
    pub precision_weighted: f64,
    pub f1_weighted: f64,
    pub recall_macro: f64,
    pub precision_macro: f64,
    pub f1_macro: f64,
    pub kappa: f64,
    pub mcc: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Rows sorted by accuracy, highest first; equal accuracies keep name order.
pub fn compare_models(results: &[(String, String, MetricsReport)]) -> ComparisonTable {
    let mut rows: Vec<ComparisonRow> = results
        .iter()
        .map(|(name, kind, r)| ComparisonRow {
            model: name.clone(),
            kind: kind.clone(),
            accuracy: r.basic.accuracy,
            auc: r.auc,
            recall_weighted: r.classes.weighted_avg.recall,
            precision_weighted: r.classes.weighted_avg.precision,
            f1_weighted: r.classes.weighted_avg.f1,
            recall_macro: r.classes.macro_avg.recall,
            precision_macro: r.classes.macro_avg.precision,
            f1_macro: r.classes.macro_avg.f1,
            kappa: r.kappa,
            mcc: r.mcc,
            train_seconds: r.train_seconds,
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.model.cmp(&b.model)));
    ComparisonTable { rows }
}

impl ComparisonTable {
    /// Aligned text with 4-decimal metrics.
    pub fn render(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
        let kind_w = self.rows.iter().map(|r| r.kind.len()).max().unwrap_or(0).max(4);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<name_w$}  {:<kind_w$}  {:>8}  {:>6}  {:>6}  {:>9}  {:>6}  {:>6}  {:>6}  {:>8}  {:>8}  {:>11}  {:>8}",
            "Model",
            "Type",
            "Accuracy",
            "AUC",
            "Recall",
            "Precision",
            "F1",
            "Kappa",
            "MCC",
            "TT (Sec)",
            "Recall-m",
            "Precision-m",
            "F1-m"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<name_w$}  {:<kind_w$}  {:>8.4}  {:>6.4}  {:>6.4}  {:>9.4}  {:>6.4}  {:>6.4}  {:>6.4}  {:>8.3}  {:>8.4}  {:>11.4}  {:>8.4}",
                r.model,
                r.kind,
                r.accuracy,
                r.auc,
                r.recall_weighted,
                r.precision_weighted,
                r.f1_weighted,
                r.kappa,
                r.mcc,
                r.train_seconds,
                r.recall_macro,
                r.precision_macro,
                r.f1_macro
            );
        }
        s.push_str("Recall/Precision/F1 are support-weighted; -m columns are macro averages.\n");
        s
    }
}

impl ClassReport {
    /// Per-class table with 2-decimal cells.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<13} {:>9} {:>7} {:>8} {:>8}",
            "Class", "Precision", "Recall", "F1-score", "Support"
        );
        for (name, m) in [("Ham", &self.ham), ("Spam", &self.spam)] {
            let _ = writeln!(
                s,
                "{:<13} {:>9.2} {:>7.2} {:>8.2} {:>8}",
                name, m.precision.value, m.recall.value, m.f1.value, m.support
            );
        }
        let _ = writeln!(
            s,
            "{:<13} {:>9} {:>7} {:>8.2} {:>8}",
            "Accuracy", "", "", self.accuracy, self.total
        );
        for (name, a) in [("Macro Avg", &self.macro_avg), ("Weighted Avg", &self.weighted_avg)] {
            let _ = writeln!(
                s,
                "{:<13} {:>9.2} {:>7.2} {:>8.2} {:>8}",
                name, a.precision, a.recall, a.f1, self.total
            );
        }
        s
    }
}

impl MetricsReport {
    pub fn render(&self) -> String {
        let cm = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "Confusion matrix (rows = truth, cols = prediction)");
        let _ = writeln!(s, "{:>10} {:>8} {:>8}", "", "ham", "spam");
        let _ = writeln!(s, "{:>10} {:>8} {:>8}", "ham", cm.tn, cm.fp);
        let _ = writeln!(s, "{:>10} {:>8} {:>8}", "spam", cm.fn_, cm.tp);
        let _ = writeln!(s);
        s.push_str(&self.classes.render());
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {:.4}  kappa {:.4}  mcc {:.4}",
            self.basic.accuracy,
            self.basic.precision.value,
            self.basic.recall.value,
            self.basic.f1.value,
            self.auc,
            self.kappa,
            self.mcc
        );
        s
    }
}

/// Round half away from zero to `decimals` places, for display checks.
pub fn round_to(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (x * k).round() / k
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Ham, Spam};

    #[test]
    fn confusion_basic_cases() {
        let truths = [Spam, Spam, Spam, Ham, Ham];
        let cm = confusion(&truths, &truths).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(3, 0, 0, 2));
        let inverted: Vec<Label> = truths.iter().map(|l| if *l == Spam { Ham } else { Spam }).collect();
        let inv = confusion(&inverted, &truths).unwrap();
        assert_eq!((inv.tp, inv.fn_, inv.tn, inv.fp), (cm.fn_, cm.tp, cm.fp, cm.tn));
        assert!(confusion(&[Spam], &[]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = basic_metrics(&ConfusionMatrix::new(0, 0, 5, 5)).unwrap();
        assert!(m.precision.degenerate && m.precision.value == 0.0);
        assert!(!m.recall.degenerate && m.recall.value == 0.0);
        assert!(m.f1.degenerate && m.f1.value == 0.0);
        assert_eq!(m.accuracy, 0.5);
    }

    #[test]
    fn single_class_truths() {
        let r = per_class_report(&[Spam, Spam], &[Spam, Spam]).unwrap();
        assert_eq!(r.spam.recall.value, 1.0);
        assert_eq!(r.ham.support, 0);
    }

    #[test]
    fn auc_cases() {
        let s = |score, truth| ScoredPrediction { score, truth };
        assert_eq!(roc_auc(&[s(0.9, Spam), s(0.8, Spam), s(0.1, Ham)]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[s(0.3, Spam), s(0.3, Ham), s(0.3, Ham)]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[s(0.9, Spam), s(0.8, Ham), s(0.7, Spam), s(0.1, Ham)]).unwrap(),
            0.75
        );
        assert!(roc_auc(&[s(0.3, Spam)]).is_err());
    }

    #[test]
    fn roc_curve_endpoints() {
        let s = |score, truth| ScoredPrediction { score, truth };
        let pts = roc_curve(&[s(0.9, Spam), s(0.8, Ham), s(0.7, Spam), s(0.1, Ham)]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert_eq!(pts.len(), 5);
    }

    #[test]
    fn kappa_mcc_extremes() {
        let perfect = ConfusionMatrix::new(5, 0, 0, 7);
        assert_eq!(cohen_kappa(&perfect), 1.0);
        assert_eq!(mcc(&perfect), 1.0);
        let inverted = ConfusionMatrix::new(0, 7, 5, 0);
        assert_eq!(mcc(&inverted), -1.0);
        // predictions independent of truth
        let indep = ConfusionMatrix::new(20, 20, 30, 30);
        assert!(cohen_kappa(&indep).abs() < 1e-12);
        assert_eq!(mcc(&ConfusionMatrix::new(3, 2, 0, 0)), 0.0);
    }

    #[test]
    fn compare_orders_and_breaks_ties() {
        let report = |acc_tp: u64| {
            let cm = ConfusionMatrix::new(acc_tp, 100 - acc_tp, 0, 100);
            MetricsReport {
                confusion: cm,
                basic: basic_metrics(&cm).unwrap(),
                classes: class_report(&cm).unwrap(),
                auc: 0.5,
                kappa: cohen_kappa(&cm),
                mcc: mcc(&cm),
                train_seconds: 1.0,
            }
        };
        let t = compare_models(&[
            ("NB".into(), "gnb".into(), report(88)),
            ("SVM".into(), "svm".into(), report(96)),
            ("LR".into(), "logreg".into(), report(94)),
            ("AA".into(), "logreg".into(), report(94)),
        ]);
        let names: Vec<&str> = t.rows.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["SVM", "AA", "LR", "NB"]);
        assert!(t.render().contains("TT (Sec)"));
        let single = compare_models(&[("only".into(), "svm".into(), report(50))]);
        assert_eq!(single.rows.len(), 1);
    }
}
