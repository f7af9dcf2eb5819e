//! Fragment- and subject-level evaluation of prediction files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{read_text, write_text};
use crate::error::{Error, Result};
use crate::objective::{confusion_metrics, majority_vote, EvalLevel, EvalReport};
use crate::recording::Label;

/// `(subject_id, fragment_index)`.
pub type FragmentKey = (String, usize);

/// Parses `subject_id fragment_index label` rows (whitespace separated,
/// extra columns ignored, `#` comments skipped). Both prediction files and
/// feature index files have this layout.
fn read_labelled(path: &Path) -> Result<BTreeMap<FragmentKey, Label>> {
    let text = read_text(path)?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::format(format!("{}:{}: expected `subject fragment label`", path.display(), n + 1));
        if f.len() < 3 {
            return Err(bad());
        }
        let index: usize = f[1].parse().map_err(|_| bad())?;
        let label: Label = f[2].parse()?;
        if out.insert((f[0].to_string(), index), label).is_some() {
            return Err(Error::format(format!(
                "{}: duplicate fragment {} {index}",
                path.display(),
                f[0]
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::degenerate(format!("{} lists no fragments", path.display())));
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<BTreeMap<FragmentKey, Label>> {
    read_labelled(path)
}

pub fn read_truth(path: &Path) -> Result<BTreeMap<FragmentKey, Label>> {
    read_labelled(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutput {
    pub fragment: EvalReport,
    pub subject: EvalReport,
}

/// Scores predictions against ground truth at fragment level, then at
/// subject level after a majority vote over each subject's fragments.
/// Every truth fragment needs exactly one prediction and vice versa.
/// Reports go to `fragment_report.txt` and `subject_report.txt` under `out`.
pub fn cmd_evaluate(pred: &Path, truth: &Path, out: &Path) -> Result<EvaluateOutput> {
    let pred = read_predictions(pred)?;
    let truth = read_truth(truth)?;
    if let Some((s, i)) = truth.keys().find(|k| !pred.contains_key(*k)) {
        return Err(Error::format(format!("no prediction for fragment {s} {i}")));
    }
    if let Some((s, i)) = pred.keys().find(|k| !truth.contains_key(*k)) {
        return Err(Error::format(format!("prediction for unknown fragment {s} {i}")));
    }
    let (p, t): (Vec<Label>, Vec<Label>) = truth.iter().map(|(k, &t)| (pred[k], t)).unzip();
    let fragment = confusion_metrics(&p, &t, EvalLevel::Fragment)?;

    let mut votes: BTreeMap<String, Vec<Label>> = BTreeMap::new();
    let mut subject_truth: BTreeMap<String, Label> = BTreeMap::new();
    for (key, &t) in &truth {
        let s = &key.0;
        votes.entry(s.clone()).or_default().push(pred[key]);
        if let Some(prev) = subject_truth.insert(s.clone(), t) {
            if prev != t {
                return Err(Error::format(format!("subject {s} has fragments of both classes")));
            }
        }
    }
    let voted = majority_vote(&votes)?;
    let (sp, st): (Vec<Label>, Vec<Label>) = subject_truth.iter().map(|(s, &t)| (voted[s], t)).unzip();
    let subject = confusion_metrics(&sp, &st, EvalLevel::Subject)?;

    fs::create_dir_all(out)?;
    write_text(&out.join("fragment_report.txt"), &fragment.to_text())?;
    write_text(&out.join("subject_report.txt"), &subject.to_text())?;
    Ok(EvaluateOutput { fragment, subject })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn fragment_and_subject_levels() {
        let dir = tempfile::tempdir().unwrap();
        let truth = write(
            dir.path(),
            "truth.idx",
            "# subject_id\tfragment_index\tlabel\tstart\toffset\n\
             A\t0\tCAD\t0\t0\nA\t1\tCAD\t10\t5\nA\t2\tCAD\t20\t9\n\
             B\t0\tNOR\t0\t14\nB\t1\tNOR\t10\t20\n",
        );
        let pred = write(dir.path(), "pred.txt", "A 0 CAD\nA 1 NOR\nA 2 CAD\nB 0 CAD\nB 1 NOR\n");
        let out = cmd_evaluate(&pred, &truth, &dir.path().join("eval")).unwrap();
        assert_eq!(out.fragment.confusion.total(), 5);
        assert!((out.fragment.acc - 0.6).abs() < 1e-15);
        // A votes CAD 2:1; B ties 1:1 and goes to CAD
        assert_eq!(out.subject.confusion.tp, 1);
        assert_eq!(out.subject.confusion.fp, 1);
        assert!(dir.path().join("eval/subject_report.txt").exists());
    }

    #[test]
    fn mismatched_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let truth = write(dir.path(), "t", "A 0 CAD\nA 1 CAD\n");
        let short = write(dir.path(), "p1", "A 0 CAD\n");
        let extra = write(dir.path(), "p2", "A 0 CAD\nA 1 CAD\nZ 0 NOR\n");
        let dup = write(dir.path(), "p3", "A 0 CAD\nA 0 NOR\nA 1 CAD\n");
        let out = dir.path().join("o");
        assert!(matches!(cmd_evaluate(&short, &truth, &out), Err(Error::Format(_))));
        assert!(matches!(cmd_evaluate(&extra, &truth, &out), Err(Error::Format(_))));
        assert!(matches!(cmd_evaluate(&dup, &truth, &out), Err(Error::Format(_))));
    }
}
