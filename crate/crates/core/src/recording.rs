//! Domain model for multichannel subject recordings.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Diagnostic class. CAD is the positive class throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Nor,
    Cad,
}

impl Label {
    /// Class index used for logits and centers: NOR = 0, CAD = 1.
    pub fn index(self) -> usize {
        match self {
            Label::Nor => 0,
            Label::Cad => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Nor),
            1 => Some(Label::Cad),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Cad
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nor => "NOR",
            Label::Cad => "CAD",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Case-insensitive; `0`/`1` are accepted as NOR/CAD.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CAD" | "1" => Ok(Label::Cad),
            "NOR" | "0" => Ok(Label::Nor),
            other => Err(Error::format(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MicKind {
    /// Heart microphone under the diaphragm.
    Hm,
    /// Rear-facing noise-reference microphone.
    Nm,
}

/// Identifies one microphone of one stethoscope on the vest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelKind {
    pub kind: MicKind,
    pub stethoscope: u8,
}

impl ChannelKind {
    pub const MAX_STETHOSCOPE: u8 = 7;

    pub fn new(kind: MicKind, stethoscope: u8) -> Result<Self> {
        if !(1..=Self::MAX_STETHOSCOPE).contains(&stethoscope) {
            return Err(Error::format(format!(
                "stethoscope index {stethoscope} outside 1..=7"
            )));
        }
        Ok(Self { kind, stethoscope })
    }

    pub fn hm(stethoscope: u8) -> Self {
        Self::new(MicKind::Hm, stethoscope).expect("valid stethoscope index")
    }

    pub fn nm(stethoscope: u8) -> Self {
        Self::new(MicKind::Nm, stethoscope).expect("valid stethoscope index")
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            MicKind::Hm => "HM",
            MicKind::Nm => "NM",
        };
        write!(f, "{kind}:{}", self.stethoscope)
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    /// Parses `HM:2` / `nm:4`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, index) = s
            .split_once(':')
            .ok_or_else(|| Error::format(format!("channel `{s}` is not KIND:INDEX")))?;
        let kind = match kind.trim().to_ascii_uppercase().as_str() {
            "HM" => MicKind::Hm,
            "NM" => MicKind::Nm,
            other => return Err(Error::format(format!("unknown channel kind `{other}`"))),
        };
        let index: u8 = index
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("bad stethoscope index in `{s}`")))?;
        ChannelKind::new(kind, index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub samples: Vec<f64>,
}

/// Synchronised multichannel recording of one subject.
///
/// All channel buffers share one length; `join_markers` hold the sample
/// indices at which separately acquired takes were concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    subject_id: String,
    label: Label,
    fs: u32,
    channels: Vec<Channel>,
    join_markers: Vec<usize>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        label: Label,
        fs: u32,
        channels: Vec<Channel>,
        join_markers: Vec<usize>,
    ) -> Result<Self> {
        if fs == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if channels.is_empty() {
            return Err(Error::degenerate("recording has no channels"));
        }
        let len = channels[0].samples.len();
        if let Some(ch) = channels.iter().find(|c| c.samples.len() != len) {
            return Err(Error::incompatible(format!(
                "channel {} has {} samples, expected {len}",
                ch.kind,
                ch.samples.len()
            )));
        }
        for (i, a) in channels.iter().enumerate() {
            if channels[i + 1..].iter().any(|b| b.kind == a.kind) {
                return Err(Error::incompatible(format!("duplicate channel {}", a.kind)));
            }
        }
        if join_markers.windows(2).any(|w| w[0] >= w[1])
            || join_markers.last().is_some_and(|&m| m >= len)
        {
            return Err(Error::Invariant(
                "join markers must be strictly increasing and inside the recording".into(),
            ));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            label,
            fs,
            channels,
            join_markers,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn join_markers(&self) -> &[usize] {
        &self.join_markers
    }

    pub fn len(&self) -> usize {
        self.channels[0].samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / f64::from(self.fs)
    }

    pub fn channel(&self, kind: ChannelKind) -> Option<&Channel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    pub fn channel_kinds(&self) -> Vec<ChannelKind> {
        self.channels.iter().map(|c| c.kind).collect()
    }

    /// Returns a copy with every channel replaced by `f(channel)`.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Recording>
    where
        F: FnMut(&Channel) -> Result<Vec<f64>>,
    {
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Ok(Channel {
                    kind: c.kind,
                    samples: f(c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Recording::new(
            self.subject_id.clone(),
            self.label,
            self.fs,
            channels,
            self.join_markers.clone(),
        )
    }
}

/// Joins the takes of one subject end to end, in the given order.
///
/// Every boundary between consecutive takes is recorded as a join marker,
/// and markers already present inside a take are shifted along.
pub fn concatenate_takes(takes: &[Recording]) -> Result<Recording> {
    let first = takes
        .first()
        .ok_or_else(|| Error::degenerate("no takes to concatenate"))?;
    let kinds = first.channel_kinds();
    for take in &takes[1..] {
        if take.fs != first.fs {
            return Err(Error::incompatible(format!(
                "take sample rates differ: {} vs {}",
                first.fs, take.fs
            )));
        }
        if take.channel_kinds() != kinds {
            return Err(Error::incompatible("takes have different channel sets"));
        }
        if take.subject_id != first.subject_id || take.label != first.label {
            return Err(Error::incompatible("takes belong to different subjects"));
        }
    }

    let total: usize = takes.iter().map(Recording::len).sum();
    let mut channels: Vec<Channel> = kinds
        .iter()
        .map(|&kind| Channel {
            kind,
            samples: Vec::with_capacity(total),
        })
        .collect();
    let mut joins = Vec::new();
    let mut offset = 0;
    for (i, take) in takes.iter().enumerate() {
        if i > 0 && offset < total {
            joins.push(offset);
        }
        joins.extend(take.join_markers.iter().map(|m| m + offset));
        for (out, ch) in channels.iter_mut().zip(&take.channels) {
            out.samples.extend_from_slice(&ch.samples);
        }
        offset += take.len();
    }
    joins.dedup();
    Recording::new(first.subject_id.clone(), first.label, first.fs, channels, joins)
}
