//! Tab-separated subject manifest.
//!
//! One record per line:
//! `subject_id<TAB>label<TAB>take_index<TAB>KIND:steth<TAB>path`.
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::recording::{concatenate_takes, Channel, ChannelKind, Label, Recording};
use crate::wav::load_wav;

#[derive(Debug, Clone, PartialEq)]
pub struct Take {
    pub index: u32,
    /// Channel files, sorted by channel kind.
    pub channels: Vec<(ChannelKind, PathBuf)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub label: Label,
    /// Takes in ascending take index.
    pub takes: Vec<Take>,
}

impl SubjectEntry {
    pub fn channel_kinds(&self) -> Vec<ChannelKind> {
        self.takes[0].channels.iter().map(|(k, _)| *k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectManifest {
    pub entries: Vec<SubjectEntry>,
}

impl SubjectManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        // subject -> (label, take -> channel -> path); BTreeMaps keep order stable.
        type Takes = BTreeMap<u32, BTreeMap<ChannelKind, PathBuf>>;
        let mut subjects: BTreeMap<String, (Label, Takes)> = BTreeMap::new();
        let mut order: Vec<String> = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: &str| Error::format(format!("manifest line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(at(&format!("expected 5 tab-separated fields, got {}", fields.len())));
            }
            let subject = fields[0].trim();
            if subject.is_empty() {
                return Err(at("empty subject id"));
            }
            let label = fields[1].parse::<Label>().map_err(|e| at(&e.to_string()))?;
            let take: u32 = fields[2].trim().parse().map_err(|_| at("bad take index"))?;
            let kind = fields[3].parse::<ChannelKind>().map_err(|e| at(&e.to_string()))?;
            let file = fields[4].trim();
            if file.is_empty() {
                return Err(at("missing file path"));
            }
            let file = if Path::new(file).is_absolute() {
                PathBuf::from(file)
            } else {
                base.join(file)
            };

            let entry = subjects.entry(subject.to_string()).or_insert_with(|| {
                order.push(subject.to_string());
                (label, BTreeMap::new())
            });
            if entry.0 != label {
                return Err(at(&format!("subject {subject} has conflicting labels")));
            }
            if entry.1.entry(take).or_default().insert(kind, file).is_some() {
                return Err(at(&format!("duplicate channel {kind} for take {take}")));
            }
        }

        let mut reference: Option<Vec<ChannelKind>> = None;
        let mut entries = Vec::with_capacity(order.len());
        for subject in order {
            let (label, takes) = subjects.remove(&subject).expect("subject recorded in order");
            let takes: Vec<Take> = takes
                .into_iter()
                .map(|(index, chans)| Take {
                    index,
                    channels: chans.into_iter().collect(),
                })
                .collect();
            for take in &takes {
                let kinds: Vec<ChannelKind> = take.channels.iter().map(|(k, _)| *k).collect();
                match &reference {
                    None => reference = Some(kinds),
                    Some(r) if *r != kinds => {
                        return Err(Error::format(format!(
                            "subject {subject} take {} lists {} channels, expected {}",
                            take.index,
                            kinds.len(),
                            r.len()
                        )))
                    }
                    Some(_) => {}
                }
            }
            entries.push(SubjectEntry {
                subject_id: subject,
                label,
                takes,
            });
        }
        Ok(Self { entries })
    }

    /// Renders the manifest with paths relative to `base` where possible.
    pub fn to_text(&self, base: &Path) -> String {
        let mut out = String::new();
        for e in &self.entries {
            for t in &e.takes {
                for (kind, path) in &t.channels {
                    let shown = path.strip_prefix(base).unwrap_or(path);
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}",
                        e.subject_id,
                        e.label,
                        t.index,
                        kind,
                        shown.display()
                    );
                }
            }
        }
        out
    }
}

/// Loads every take of a subject and concatenates them in take order.
pub fn load_subject(entry: &SubjectEntry) -> Result<Recording> {
    let takes = entry
        .takes
        .iter()
        .map(|take| {
            let mut fs = None;
            let mut channels = Vec::with_capacity(take.channels.len());
            for (kind, path) in &take.channels {
                let (rate, samples) = load_wav(path)?;
                match fs {
                    None => fs = Some(rate),
                    Some(f) if f != rate => {
                        return Err(Error::incompatible(format!(
                            "{}: sample rate {rate} differs from {f}",
                            path.display()
                        )))
                    }
                    Some(_) => {}
                }
                channels.push(Channel {
                    kind: *kind,
                    samples,
                });
            }
            Recording::new(
                entry.subject_id.clone(),
                entry.label,
                fs.unwrap_or(0),
                channels,
                vec![],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    concatenate_takes(&takes)
}
