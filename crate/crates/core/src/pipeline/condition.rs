//! Noise gating and per-channel conditioning of every manifest subject.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use super::{channel_file, parse_key_values, read_text, required, write_text, PipelineConfig, SubjectStatus};
use crate::error::{Error, Result};
use crate::manifest::{load_subject, SubjectEntry, SubjectManifest};
use crate::noise_gate::gate_recording;
use crate::preprocess::condition_channel;
use crate::recording::{ChannelKind, Label};
use crate::wav::{write_wav, WavEncoding};

pub const SUMMARY_FILE: &str = "summary.tsv";
const SUMMARY_HEADER: &str = "# subject_id\tlabel\tstatus\trejected_fraction\tclean_seconds\tdetail";

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub subject_id: String,
    pub label: Label,
    pub status: SubjectStatus,
    /// Fraction of samples flagged noisy (1.0 for failed subjects).
    pub rejected_fraction: f64,
    pub clean_seconds: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub config_hash: String,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionSummary {
    pub fn to_text(&self) -> String {
        let mut out = format!("# config={}\n{SUMMARY_HEADER}\n", self.config_hash);
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.4}\t{}",
                e.subject_id,
                e.label,
                e.status,
                e.rejected_fraction,
                e.clean_seconds,
                e.detail.replace(['\t', '\n'], " ")
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut config_hash = String::new();
        let mut entries = Vec::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("# config=") {
                config_hash = h.trim().to_string();
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 5 {
                return Err(Error::format(format!("bad summary line `{line}`")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(format!("bad number `{s}` in summary")))
            };
            entries.push(ConditionEntry {
                subject_id: f[0].to_string(),
                label: f[1].parse::<Label>()?,
                status: f[2].parse::<SubjectStatus>()?,
                rejected_fraction: num(f[3])?,
                clean_seconds: num(f[4])?,
                detail: f.get(5).unwrap_or(&"").to_string(),
            });
        }
        Ok(Self {
            config_hash,
            entries,
        })
    }

    pub fn ok_subjects(&self) -> impl Iterator<Item = &ConditionEntry> {
        self.entries.iter().filter(|e| e.status == SubjectStatus::Ok)
    }
}

/// Per-subject metadata written next to the conditioned audio.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SubjectMeta {
    pub subject_id: String,
    pub label: Label,
    pub fs: u32,
    pub samples: usize,
    pub channels: Vec<ChannelKind>,
}

impl SubjectMeta {
    pub(crate) fn load(path: &Path) -> Result<Self> {
        let map = parse_key_values(&read_text(path)?)?;
        let parse_num = |key: &str| -> Result<u64> {
            required(&map, key, path)?
                .parse()
                .map_err(|_| Error::format(format!("{}: bad `{key}`", path.display())))
        };
        let channels = required(&map, "channels", path)?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<ChannelKind>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            subject_id: required(&map, "subject_id", path)?.to_string(),
            label: required(&map, "label", path)?.parse()?,
            fs: parse_num("fs")? as u32,
            samples: parse_num("samples")? as usize,
            channels,
        })
    }
}

/// Gates every subject on its raw signals, then conditions every channel
/// over its full length.
///
/// Writes `<out>/<subject>/clean.txt`, `meta.txt` and one float WAV per
/// conditioned channel, plus `<out>/summary.tsv`. A subject that cannot be
/// loaded or gated gets a `failed` entry; a subject with no clean sample is
/// `skipped`. Configuration and internal errors abort the stage.
pub fn cmd_condition(manifest: &Path, cfg: &PipelineConfig, out: &Path) -> Result<ConditionSummary> {
    cfg.validate()?;
    let manifest = SubjectManifest::load(manifest)?;
    fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let entries = manifest
        .entries
        .par_iter()
        .map(|entry| match condition_subject(entry, cfg, &hash, out) {
            Ok(e) => Ok(e),
            Err(err @ (Error::Config(_) | Error::Invariant(_))) => Err(err),
            Err(err) => {
                warn!("subject {} failed: {err}", entry.subject_id);
                Ok(ConditionEntry {
                    subject_id: entry.subject_id.clone(),
                    label: entry.label,
                    status: SubjectStatus::Failed,
                    rejected_fraction: 1.0,
                    clean_seconds: 0.0,
                    detail: err.to_string(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ConditionSummary {
        config_hash: hash,
        entries,
    };
    write_text(&out.join(SUMMARY_FILE), &summary.to_text())?;
    let ok = summary.ok_subjects().count();
    info!("conditioned {ok} of {} subjects", summary.entries.len());
    Ok(summary)
}

fn condition_subject(entry: &SubjectEntry, cfg: &PipelineConfig, hash: &str, out: &Path) -> Result<ConditionEntry> {
    let rec = load_subject(entry)?;
    let pre = cfg.preprocess();
    pre.validate(rec.fs())?;
    let gate = gate_recording(&rec, &cfg.gate())?;
    let dir = out.join(rec.subject_id());
    fs::create_dir_all(&dir)?;
    write_text(&dir.join("clean.txt"), &gate.clean.to_text(rec.subject_id(), rec.fs()))?;

    let clean_seconds = gate.clean.covered() as f64 / rec.fs() as f64;
    let mut meta = String::new();
    let _ = writeln!(meta, "subject_id={}", rec.subject_id());
    let _ = writeln!(meta, "label={}", rec.label());
    let _ = writeln!(meta, "fs={}", rec.fs());
    let _ = writeln!(meta, "samples={}", rec.len());
    let joins: Vec<String> = rec.join_markers().iter().map(usize::to_string).collect();
    let _ = writeln!(meta, "joins={}", joins.join(","));
    let _ = writeln!(meta, "config={hash}");
    let _ = writeln!(meta, "rejected_fraction={:.6}", gate.rejected_fraction());
    for (kind, set) in &gate.per_channel {
        let _ = writeln!(meta, "flagged_{}={}", channel_file(*kind).trim_end_matches(".wav"), set.covered());
    }

    if gate.clean.is_empty() {
        let _ = writeln!(meta, "channels=");
        write_text(&dir.join("meta.txt"), &meta)?;
        return Ok(ConditionEntry {
            subject_id: rec.subject_id().to_string(),
            label: rec.label(),
            status: SubjectStatus::Skipped,
            rejected_fraction: gate.rejected_fraction(),
            clean_seconds,
            detail: "every sample flagged noisy".into(),
        });
    }

    let conditioned = rec
        .channels()
        .par_iter()
        .map(|c| condition_channel(&c.samples, rec.fs(), &pre).map(|out| (c.kind, out)))
        .collect::<Result<Vec<_>>>()?;
    let kinds: Vec<String> = conditioned.iter().map(|(k, _)| k.to_string()).collect();
    let _ = writeln!(meta, "channels={}", kinds.join(","));
    for (kind, c) in &conditioned {
        write_wav(dir.join(channel_file(*kind)), rec.fs(), &c.samples, WavEncoding::Float32)?;
        let stem = channel_file(*kind);
        let stem = stem.trim_end_matches(".wav");
        let _ = writeln!(meta, "spikes_removed_{stem}={}", c.spikes_removed);
        let _ = writeln!(meta, "normalized_{stem}={}", c.normalized);
    }
    write_text(&dir.join("meta.txt"), &meta)?;
    Ok(ConditionEntry {
        subject_id: rec.subject_id().to_string(),
        label: rec.label(),
        status: SubjectStatus::Ok,
        rejected_fraction: gate.rejected_fraction(),
        clean_seconds,
        detail: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let s = ConditionSummary {
            config_hash: "abc".into(),
            entries: vec![
                ConditionEntry {
                    subject_id: "S1".into(),
                    label: Label::Cad,
                    status: SubjectStatus::Ok,
                    rejected_fraction: 0.25,
                    clean_seconds: 45.0,
                    detail: String::new(),
                },
                ConditionEntry {
                    subject_id: "S2".into(),
                    label: Label::Nor,
                    status: SubjectStatus::Failed,
                    rejected_fraction: 1.0,
                    clean_seconds: 0.0,
                    detail: "i/o error: missing\tfile".into(),
                },
            ],
        };
        let back = ConditionSummary::from_text(&s.to_text()).unwrap();
        assert_eq!(back.entries[0], s.entries[0]);
        assert_eq!(back.entries[1].detail, "i/o error: missing file");
        assert_eq!(back.config_hash, "abc");
        assert_eq!(back.ok_subjects().count(), 1);
    }
}
