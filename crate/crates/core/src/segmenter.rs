//! Clean-segment selection, class-balanced fragment budgets, proportional
//! allocation across segments, and evenly spaced fragment extraction.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::recording::{Channel, Label, Recording};
use crate::stats::seconds_to_samples;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Fragment length, seconds.
    pub frag_len: f64,
    /// Shortest usable clean segment, seconds.
    pub min_segment: f64,
    /// Base per-subject fragment count for the majority class.
    pub f_base: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            frag_len: 4.0,
            min_segment: 4.0,
            f_base: 61,
        }
    }
}

/// Clean intervals at least `min_len` seconds long, in order.
pub fn clean_segments(clean: &IntervalSet, fs: u32, min_len: f64) -> Vec<Interval> {
    let min = seconds_to_samples(min_len, fs);
    clean
        .intervals()
        .iter()
        .copied()
        .filter(|iv| iv.len() >= min)
        .collect()
}

/// Per-subject fragment budgets for each class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassTargets {
    pub cad: usize,
    pub nor: usize,
}

impl ClassTargets {
    /// The same budget for both classes (validation and test splits).
    pub fn fixed(count: usize) -> Self {
        Self {
            cad: count,
            nor: count,
        }
    }

    pub fn for_label(&self, label: Label) -> usize {
        match label {
            Label::Cad => self.cad,
            Label::Nor => self.nor,
        }
    }
}

/// The larger class keeps `f_base` fragments per subject; each subject of
/// the smaller class gets `f_base` scaled by the subject-count ratio,
/// rounded half up, so the class totals balance.
pub fn class_targets(n_cad: usize, n_nor: usize, f_base: usize) -> Result<ClassTargets> {
    if n_cad == 0 || n_nor == 0 || f_base == 0 {
        return Err(Error::config(format!(
            "class targets need positive counts (CAD {n_cad}, NOR {n_nor}, base {f_base})"
        )));
    }
    let scaled = |big: usize, small: usize| (2 * big * f_base + small) / (2 * small);
    Ok(if n_cad >= n_nor {
        ClassTargets {
            cad: f_base,
            nor: scaled(n_cad, n_nor),
        }
    } else {
        ClassTargets {
            cad: scaled(n_nor, n_cad),
            nor: f_base,
        }
    })
}

/// Splits `total` fragments across segments in proportion to their
/// lengths (floored); the remainder goes one each to the longest segments,
/// earlier segments first on ties.
pub fn allocate_fragments(lengths: &[usize], total: usize) -> Result<Vec<usize>> {
    if lengths.is_empty() {
        return Err(Error::degenerate("no segments to allocate fragments to"));
    }
    if lengths.contains(&0) {
        return Err(Error::Contract("segment lengths must be positive".into()));
    }
    let sum: u128 = lengths.iter().map(|&l| l as u128).sum();
    let mut counts: Vec<usize> = lengths
        .iter()
        .map(|&l| (total as u128 * l as u128 / sum) as usize)
        .collect();
    let remainder = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]).then(a.cmp(&b)));
    for &i in order.iter().take(remainder) {
        counts[i] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), total);
    Ok(counts)
}

/// Offsets of `count` windows of `window` samples spread evenly over a
/// segment of `len` samples, first at 0 and last flush with the end.
pub fn fragment_starts(len: usize, count: usize, window: usize) -> Result<Vec<usize>> {
    if window == 0 || len < window {
        return Err(Error::Contract(format!(
            "segment of {len} samples cannot hold a {window}-sample fragment"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if count == 1 {
        return Ok(vec![0]);
    }
    let span = (len - window) as u128;
    let steps = (count - 1) as u128;
    Ok((0..count as u128)
        .map(|j| ((2 * j * span + steps) / (2 * steps)) as usize)
        .collect())
}

/// Fixed-length multichannel window cut from a clean segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub subject_id: String,
    pub label: Label,
    /// Absolute sample index of the first sample.
    pub start: usize,
    pub channels: Vec<Channel>,
}

impl Fragment {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cuts `count` evenly spaced fragments of `frag_len` seconds from
/// `segment` of `rec`.
pub fn extract_fragments(
    rec: &Recording,
    segment: Interval,
    count: usize,
    frag_len: f64,
) -> Result<Vec<Fragment>> {
    if segment.end >= rec.len() {
        return Err(Error::Contract("segment lies outside the recording".into()));
    }
    let window = seconds_to_samples(frag_len, rec.fs());
    let starts = fragment_starts(segment.len(), count, window)?;
    Ok(starts
        .into_iter()
        .map(|offset| {
            let start = segment.start + offset;
            Fragment {
                subject_id: rec.subject_id().to_string(),
                label: rec.label(),
                start,
                channels: rec
                    .channels()
                    .iter()
                    .map(|c| Channel {
                        kind: c.kind,
                        samples: c.samples[start..start + window].to_vec(),
                    })
                    .collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedSegment {
    pub interval: Interval,
    pub fragments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    pub subject_id: String,
    pub label: Label,
    pub segments: Vec<PlannedSegment>,
    /// Total fragments for this subject.
    pub total: usize,
    /// Fragment length in samples.
    pub frag_samples: usize,
}

impl SegmentPlan {
    /// One `subject start end count` line per segment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                self.subject_id, s.interval.start, s.interval.end, s.fragments
            );
        }
        out
    }
}

/// Usable clean segments of a subject with their fragment allocations.
/// Fails with [`Error::Degenerate`] when no segment is long enough.
pub fn plan_subject(
    rec: &Recording,
    clean: &IntervalSet,
    total: usize,
    cfg: &SegmentConfig,
) -> Result<SegmentPlan> {
    if clean.domain_len() != rec.len() {
        return Err(Error::incompatible("clean set does not match the recording length"));
    }
    let min_len = cfg.min_segment.max(cfg.frag_len);
    let segments = clean_segments(clean, rec.fs(), min_len);
    if segments.is_empty() {
        return Err(Error::degenerate(format!(
            "subject {} has no clean segment of at least {min_len} s",
            rec.subject_id()
        )));
    }
    let lengths: Vec<usize> = segments.iter().map(Interval::len).collect();
    let counts = allocate_fragments(&lengths, total)?;
    Ok(SegmentPlan {
        subject_id: rec.subject_id().to_string(),
        label: rec.label(),
        segments: segments
            .into_iter()
            .zip(counts)
            .map(|(interval, fragments)| PlannedSegment {
                interval,
                fragments,
            })
            .collect(),
        total,
        frag_samples: seconds_to_samples(cfg.frag_len, rec.fs()),
    })
}

/// All fragments of a plan, segment by segment.
pub fn extract_plan(rec: &Recording, plan: &SegmentPlan, cfg: &SegmentConfig) -> Result<Vec<Fragment>> {
    let mut out = Vec::with_capacity(plan.total);
    for seg in &plan.segments {
        out.extend(extract_fragments(rec, seg.interval, seg.fragments, cfg.frag_len)?);
    }
    Ok(out)
}
