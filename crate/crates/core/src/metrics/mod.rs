//! Classification metrics with the minor class as positive, and the
//! repeated-split experiment harness.

mod experiment;

pub use experiment::{
    evaluate, run_experiment, ExperimentConfig, ExperimentReport, Method, MethodResult, RepeatOutcome,
};

use crate::data::Label;
use crate::error::{Error, Result};

/// Minor-class scores with their true labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPredictions {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
}

impl ScoredPredictions {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("prediction score".into()));
        }
        Ok(Self { scores, labels })
    }

    fn counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == Label::Minor).count();
        (pos, self.labels.len() - pos)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Score `>= threshold` predicts the minor class.
pub fn confusion_at(preds: &ScoredPredictions, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &l) in preds.scores.iter().zip(&preds.labels) {
        match (s >= threshold, l == Label::Minor) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(c: Confusion) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: Confusion) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn specificity(c: Confusion) -> f64 {
    ratio(c.tn, c.tn + c.fp)
}

pub fn f1(c: Confusion) -> f64 {
    let (p, r) = (precision(c), recall(c));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn gmean(c: Confusion) -> f64 {
    (recall(c) * specificity(c)).sqrt()
}

/// Mann-Whitney form: positive-negative pairs ranked correctly, ties count half.
pub fn roc_auc(preds: &ScoredPredictions) -> Result<f64> {
    let (n_pos, n_neg) = preds.counts();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..preds.scores.len()).collect();
    order.sort_by(|&a, &b| preds.scores[a].total_cmp(&preds.scores[b]));
    // midranks over tie blocks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && preds.scores[order[j + 1]] == preds.scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if preds.labels[k] == Label::Minor {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision: `sum_k (R_k - R_{k-1}) P_k` over descending distinct
/// score thresholds, each tie block entering at once.
pub fn auprc(preds: &ScoredPredictions) -> Result<f64> {
    let (n_pos, _) = preds.counts();
    if n_pos == 0 {
        return Err(Error::SingleClass("AUPRC needs at least one minor row".into()));
    }
    let mut order: Vec<usize> = (0..preds.scores.len()).collect();
    order.sort_by(|&a, &b| preds.scores[b].total_cmp(&preds.scores[a]));
    let (mut tp, mut fp, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = preds.scores[order[i]];
        while i < order.len() && preds.scores[order[i]] == s {
            if preds.labels[order[i]] == Label::Minor {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let r = tp as f64 / n_pos as f64;
        ap += (r - prev_recall) * (tp as f64 / (tp + fp) as f64);
        prev_recall = r;
    }
    Ok(ap)
}

/// One evaluation of a fitted classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub auprc: f64,
    pub auc: f64,
    pub f1: f64,
    pub gmean: f64,
}

impl Scores {
    pub const NAMES: [&'static str; 4] = ["auprc", "auc", "f1", "gmean"];

    pub fn compute(preds: &ScoredPredictions, threshold: f64) -> Result<Self> {
        let c = confusion_at(preds, threshold);
        Ok(Self {
            auprc: auprc(preds)?,
            auc: roc_auc(preds)?,
            f1: f1(c),
            gmean: gmean(c),
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.auprc, self.auc, self.f1, self.gmean]
    }
}

/// Mean and standard error (sample deviation over `sqrt(n)`; zero for one value).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        };
        Some(Self { mean, stderr, n })
    }
}

/// Mean and standard error for every metric.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_repeat: Vec<Scores>,
    pub summary: [Summary; 4],
}

impl MetricsReport {
    pub fn from_repeats(per_repeat: Vec<Scores>) -> Option<Self> {
        let col = |k: usize| per_repeat.iter().map(|s| s.values()[k]).collect::<Vec<_>>();
        let summary = [
            Summary::of(&col(0))?,
            Summary::of(&col(1))?,
            Summary::of(&col(2))?,
            Summary::of(&col(3))?,
        ];
        Some(Self { per_repeat, summary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Major as N, Minor as P};

    fn preds(scores: &[f64], labels: &[Label]) -> ScoredPredictions {
        ScoredPredictions::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn confusion_basics() {
        let p = preds(&[1.0, 1.0, 1.0], &[P, P, P]);
        assert_eq!(
            confusion_at(&p, 0.5),
            Confusion {
                tp: 3,
                fp: 0,
                fn_: 0,
                tn: 0
            }
        );
        let q = preds(&[0.1, 0.7, 0.0], &[P, N, N]);
        let c = confusion_at(&q, 0.0);
        assert_eq!((c.fn_, c.tn), (0, 0));
    }

    #[test]
    fn hand_formulas() {
        let c = Confusion {
            tp: 3,
            fp: 1,
            fn_: 2,
            tn: 4,
        };
        assert!((f1(c) - 2.0 / 3.0).abs() < 1e-15);
        assert!((gmean(c) - (0.6f64 * 0.8).sqrt()).abs() < 1e-15);
        let zero = Confusion {
            tp: 0,
            fp: 3,
            fn_: 2,
            tn: 1,
        };
        assert_eq!((f1(zero), gmean(zero)), (0.0, 0.0));
        let perfect = Confusion {
            tp: 2,
            fp: 0,
            fn_: 0,
            tn: 5,
        };
        assert_eq!((f1(perfect), gmean(perfect)), (1.0, 1.0));
        assert_eq!(f1(Confusion::default()), 0.0);
    }

    #[test]
    fn auc_edges() {
        assert_eq!(roc_auc(&preds(&[0.9, 0.8, 0.1], &[P, P, N])).unwrap(), 1.0);
        assert_eq!(roc_auc(&preds(&[0.5; 4], &[P, N, P, N])).unwrap(), 0.5);
        assert!(roc_auc(&preds(&[0.5, 0.2], &[P, P])).is_err());
    }

    #[test]
    fn ap_edges() {
        assert_eq!(auprc(&preds(&[0.9, 0.5, 0.1], &[P, N, N])).unwrap(), 1.0);
        let n = 8;
        let s: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 / 10.0).collect();
        let mut l = vec![N; n];
        l[n - 1] = P;
        assert!((auprc(&preds(&s, &l)).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        assert!(auprc(&preds(&[0.1], &[N])).is_err());
    }

    #[test]
    fn summary_stderr() {
        let s = Summary::of(&[0.5]).unwrap();
        assert_eq!(s.stderr, 0.0);
        let s = Summary::of(&[1.0, 2.0, 3.0]).unwrap();
        assert!((s.stderr - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
