//! Subject-level stratified cross-validation splits.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::recording::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMember {
    pub subject_id: String,
    pub label: Label,
    pub fold: usize,
    pub split: Split,
}

/// Stratified fold of every subject: each class is shuffled with its own
/// seeded stream and dealt round-robin over the folds. Subjects keep their
/// input order in the result.
pub fn assign_folds(subjects: &[(String, Label)], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds == 0 {
        return Err(Error::config("fold count must be positive"));
    }
    let mut out = vec![0; subjects.len()];
    for label in [Label::Nor, Label::Cad] {
        let mut members: Vec<usize> = (0..subjects.len()).filter(|&i| subjects[i].1 == label).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label.index() as u64 + 1);
        members.shuffle(&mut rng);
        for (pos, i) in members.into_iter().enumerate() {
            out[i] = pos % folds;
        }
    }
    Ok(out)
}

/// Fold `test_fold` is the test split, the next fold cyclically is
/// validation and the rest is training.
pub fn assign_splits(
    subjects: &[(String, Label)],
    folds: usize,
    test_fold: usize,
    seed: u64,
) -> Result<Vec<SplitMember>> {
    if folds < 3 || test_fold >= folds {
        return Err(Error::config(format!("fold {test_fold} of {folds} is not a valid split")));
    }
    let fold_of = assign_folds(subjects, folds, seed)?;
    let val_fold = (test_fold + 1) % folds;
    let members: Vec<SplitMember> = subjects
        .iter()
        .zip(fold_of)
        .map(|((id, label), fold)| SplitMember {
            subject_id: id.clone(),
            label: *label,
            fold,
            split: if fold == test_fold {
                Split::Test
            } else if fold == val_fold {
                Split::Val
            } else {
                Split::Train
            },
        })
        .collect();
    assert_subject_disjoint(&members)?;
    for split in Split::ALL {
        if !members.iter().any(|m| m.split == split) {
            return Err(Error::degenerate(format!(
                "{split} split is empty; {} subjects cannot fill {folds} folds",
                subjects.len()
            )));
        }
    }
    Ok(members)
}

/// No subject may appear in more than one split.
pub fn assert_subject_disjoint(members: &[SplitMember]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in members {
        if !seen.insert(m.subject_id.as_str()) {
            return Err(Error::Invariant(format!(
                "subject {} assigned to more than one split",
                m.subject_id
            )));
        }
    }
    Ok(())
}
