//! Batch pipeline stages. Each stage reads only on-disk artifacts of the
//! previous one, so any stage can be re-run on its own; identical inputs,
//! config and seed give byte-identical outputs.

mod condition;
pub mod config;
mod evaluate;
mod featurize;
mod generate;
pub mod splits;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use condition::{cmd_condition, ConditionEntry, ConditionSummary, SUMMARY_FILE};
pub use config::{PipelineConfig, SCHEMA_VERSION};
pub use evaluate::{cmd_evaluate, read_predictions, read_truth, EvaluateOutput, FragmentKey};
pub use featurize::{cmd_featurize, FeaturizeSummary, SplitCount};
pub use generate::{cmd_synth, SynthSummary, MANIFEST_FILE};
pub use splits::{assert_subject_disjoint, assign_folds, assign_splits, Split, SplitMember};

use crate::error::{Error, Result};
use crate::recording::{ChannelKind, MicKind};

/// Outcome of one subject in a batch stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectStatus {
    Ok,
    /// Processed, but nothing usable came out of it.
    Skipped,
    Failed,
}

impl SubjectStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectStatus::Ok => "ok",
            SubjectStatus::Skipped => "skipped",
            SubjectStatus::Failed => "failed",
        }
    }
}

impl fmt::Display for SubjectStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubjectStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(SubjectStatus::Ok),
            "skipped" => Ok(SubjectStatus::Skipped),
            "failed" => Ok(SubjectStatus::Failed),
            other => Err(Error::format(format!("unknown subject status `{other}`"))),
        }
    }
}

/// File name of a channel's audio, e.g. `HM1.wav`.
pub fn channel_file(kind: ChannelKind) -> String {
    let prefix = match kind.kind {
        MicKind::Hm => "HM",
        MicKind::Nm => "NM",
    };
    format!("{prefix}{}.wav", kind.stethoscope)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// `key=value` lines; `#` comments and blank lines are ignored.
fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::format(format!("expected key=value, got `{l}`")))
        })
        .collect()
}

fn required<'a>(map: &'a BTreeMap<String, String>, key: &str, what: &Path) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::format(format!("{}: missing `{key}`", what.display())))
}
