//! Binary classification metrics with corn as the positive class.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
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

    /// `(tp + tn) / total`; zero for an empty matrix.
    pub fn overall_accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / total as f64
    }

    /// `2·tp / (2·tp + fp + fn)`, defined as 0 when there are no positives
    /// in either the prediction or the truth.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return 0.0;
        }
        (2 * self.tp) as f64 / denom as f64
    }

    /// Cohen's kappa, defined as 0 when chance agreement is certain.
    pub fn kappa(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let po = (tp + tn) / n;
        let pe = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
        if pe == 1.0 {
            return 0.0;
        }
        (po - pe) / (1.0 - pe)
    }
}

/// Counts agreement between predicted and true labels (nonzero = corn).
pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::usage(format!(
            "{} predictions for {} reference labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::usage("cannot score an empty prediction"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// OA, F1 and kappa of one prediction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub overall_accuracy: f64,
    pub f1: f64,
    pub kappa: f64,
}

impl From<ConfusionMatrix> for Scores {
    fn from(cm: ConfusionMatrix) -> Self {
        Scores {
            overall_accuracy: cm.overall_accuracy(),
            f1: cm.f1(),
            kappa: cm.kappa(),
        }
    }
}

pub fn score(pred: &[u8], truth: &[u8]) -> Result<Scores> {
    confusion(pred, truth).map(Scores::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let cm = ConfusionMatrix::new(45, 10, 5, 40);
        assert!((cm.overall_accuracy() - 0.85).abs() < 1e-15);
        assert!((cm.f1() - 90.0 / 105.0).abs() < 1e-15);
        assert!((cm.kappa() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_inverted() {
        let truth: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let cm = confusion(&truth, &truth).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(10, 0, 0, 10));
        assert_eq!(cm.kappa(), 1.0);
        let inv: Vec<u8> = truth.iter().map(|&t| 1 - t).collect();
        let cm = confusion(&inv, &truth).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
    }

    #[test]
    fn degenerate_conventions() {
        let cm = ConfusionMatrix::new(0, 0, 0, 7);
        assert_eq!(cm.f1(), 0.0);
        assert_eq!(cm.kappa(), 0.0);
        assert_eq!(cm.overall_accuracy(), 1.0);
    }

    #[test]
    fn length_mismatch_is_usage_error() {
        assert!(matches!(confusion(&[1, 0], &[1]), Err(Error::Usage(_))));
    }
}
