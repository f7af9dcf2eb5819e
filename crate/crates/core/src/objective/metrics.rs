//! Binary classification metrics, majority voting and model selection.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::recording::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_predictions(pred: &[Label], truth: &[Label]) -> Result<Self> {
        if pred.is_empty() || pred.len() != truth.len() {
            return Err(Error::incompatible(format!(
                "{} predictions for {} ground-truth labels",
                pred.len(),
                truth.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p.is_positive(), t.is_positive()) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    Fragment,
    Subject,
}

impl fmt::Display for EvalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalLevel::Fragment => "fragment",
            EvalLevel::Subject => "subject",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub level: EvalLevel,
    pub acc: f64,
    pub uar: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub f1_pos: f64,
    pub f1_neg: f64,
    pub mcc: f64,
    pub confusion: Confusion,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    /// Metrics of a confusion table; undefined ratios (empty denominators)
    /// are reported as 0.
    pub fn from_confusion(c: Confusion, level: EvalLevel) -> Self {
        let Confusion { tp, tn, fp, fn_ } = c;
        let tpr = ratio(tp, tp + fn_);
        let tnr = ratio(tn, tn + fp);
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        let mcc = if factors.contains(&0) {
            0.0
        } else {
            let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
            num / factors.iter().map(|&f| f as f64).product::<f64>().sqrt()
        };
        Self {
            level,
            acc: ratio(tp + tn, c.total()),
            uar: (tpr + tnr) / 2.0,
            tpr,
            tnr,
            f1_pos: ratio(2 * tp, 2 * tp + fp + fn_),
            f1_neg: ratio(2 * tn, 2 * tn + fn_ + fp),
            mcc,
            confusion: c,
        }
    }

    /// Key/value text using the column names of the results table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "level {}", self.level);
        for (k, v) in [
            ("Acc", self.acc),
            ("UAR", self.uar),
            ("TPR", self.tpr),
            ("TNR", self.tnr),
            ("F1+", self.f1_pos),
            ("F1-", self.f1_neg),
            ("MCC", self.mcc),
        ] {
            let _ = writeln!(out, "{k} {v:.6}");
        }
        let c = self.confusion;
        let _ = writeln!(out, "TP {}\nTN {}\nFP {}\nFN {}", c.tp, c.tn, c.fp, c.fn_);
        out
    }
}

/// Fragment- or subject-level metrics with CAD as the positive class.
pub fn confusion_metrics(pred: &[Label], truth: &[Label], level: EvalLevel) -> Result<EvalReport> {
    Confusion::from_predictions(pred, truth).map(|c| EvalReport::from_confusion(c, level))
}

/// Modal label per subject; an exact tie goes to CAD.
pub fn majority_vote(preds: &BTreeMap<String, Vec<Label>>) -> Result<BTreeMap<String, Label>> {
    if preds.is_empty() {
        return Err(Error::degenerate("no subjects to vote on"));
    }
    preds
        .iter()
        .map(|(subject, labels)| {
            if labels.is_empty() {
                return Err(Error::degenerate(format!("subject {subject} has no predictions")));
            }
            let cad = labels.iter().filter(|l| l.is_positive()).count();
            let vote = if 2 * cad >= labels.len() { Label::Cad } else { Label::Nor };
            Ok((subject.clone(), vote))
        })
        .collect()
}

/// Checkpoint selection score weighting validation MCC 0.9 and training
/// MCC 0.1.
pub fn selection_score(train_mcc: f64, val_mcc: f64) -> f64 {
    0.9 * val_mcc + 0.1 * train_mcc
}
