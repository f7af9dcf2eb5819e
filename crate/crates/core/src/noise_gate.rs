//! Energy/median noisy-frame gating.
//!
//! Each heart-mic channel and the reference noise-mic channel is cut into
//! fixed frames; a frame is flagged when its energy exceeds `threshold`
//! times the median frame energy (first and last frames excluded from the
//! median). The flagged ranges of all channels, plus the seconds around the
//! recording edges and every take join, form the noisy set. Its complement
//! is applied to every channel alike.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::recording::{ChannelKind, MicKind, Recording};
use crate::stats::{median, seconds_to_samples};

#[derive(Debug, Clone, PartialEq)]
pub struct GateConfig {
    /// Heart-mic frame length in seconds.
    pub frame_len_hm: f64,
    /// Noise-mic frame length in seconds.
    pub frame_len_nm: f64,
    /// Multiplier on the median frame energy.
    pub threshold: f64,
    /// Stethoscope whose noise mic is used for detection.
    pub nm_channel: u8,
    /// Seconds flagged at each recording edge and on both sides of each join.
    pub boundary_flag: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            frame_len_hm: 2.5,
            frame_len_nm: 0.25,
            threshold: 2.5,
            nm_channel: 4,
            boundary_flag: 1.0,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.frame_len_hm) || !positive(self.frame_len_nm) {
            return Err(Error::config("gate frame lengths must be positive"));
        }
        if !positive(self.threshold) {
            return Err(Error::config("gate threshold must be positive"));
        }
        if !positive(self.boundary_flag) {
            return Err(Error::config("boundary flag duration must be positive"));
        }
        ChannelKind::new(MicKind::Nm, self.nm_channel).map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

/// Sum of squares of each full frame of `frame` samples; the trailing
/// partial frame is ignored.
pub fn frame_energies(x: &[f64], frame: usize) -> Vec<f64> {
    if frame == 0 {
        return Vec::new();
    }
    x.chunks_exact(frame)
        .map(|chunk| chunk.iter().fold(0.0, |acc, &v| acc + v * v))
        .collect()
}

/// Flags frames of `frame` samples whose energy exceeds `threshold` times
/// the median energy of the interior frames.
pub fn flag_noisy_frames_samples(x: &[f64], frame: usize, threshold: f64) -> Result<IntervalSet> {
    if frame == 0 {
        return Err(Error::config("frame length rounds to zero samples"));
    }
    let energies = frame_energies(x, frame);
    let n = energies.len();
    if n < 3 {
        return Err(Error::degenerate(format!(
            "{n} full frames of {frame} samples; at least 3 are needed"
        )));
    }
    let m = median(&energies[1..n - 1]).expect("at least one interior frame");
    let limit = threshold * m;
    let flagged = energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > limit)
        .map(|(i, _)| Interval::new(i * frame, (i + 1) * frame - 1));
    IntervalSet::from_intervals(x.len(), flagged)
}

/// Frame-energy gate with the frame length given in seconds.
pub fn flag_noisy_frames(
    x: &[f64],
    fs: u32,
    frame_secs: f64,
    threshold: f64,
) -> Result<IntervalSet> {
    if !(threshold > 0.0) {
        return Err(Error::config("gate threshold must be positive"));
    }
    flag_noisy_frames_samples(x, seconds_to_samples(frame_secs, fs), threshold)
}

/// The first and last `boundary_flag` seconds, plus that many seconds on
/// either side of every join marker. Recordings no longer than twice the
/// flag span are flagged entirely.
pub fn flag_boundaries(rec: &Recording, cfg: &GateConfig) -> IntervalSet {
    let len = rec.len();
    let span = seconds_to_samples(cfg.boundary_flag, rec.fs()).max(1);
    if len <= 2 * span {
        return IntervalSet::full(len);
    }
    let mut ivs = vec![Interval::new(0, span - 1), Interval::new(len - span, len - 1)];
    for &join in rec.join_markers() {
        ivs.push(Interval::new(join.saturating_sub(span), join + span - 1));
    }
    IntervalSet::from_clipped(len, ivs)
}

/// Per-channel breakdown of one gating pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub per_channel: Vec<(ChannelKind, IntervalSet)>,
    pub boundaries: IntervalSet,
    pub noisy: IntervalSet,
    pub clean: IntervalSet,
}

impl GateOutcome {
    pub fn rejected_fraction(&self) -> f64 {
        let len = self.noisy.domain_len();
        if len == 0 {
            return 1.0;
        }
        self.noisy.covered() as f64 / len as f64
    }
}

/// Runs the gate over every heart-mic channel and the configured noise-mic
/// channel and returns the full breakdown.
pub fn gate_recording(rec: &Recording, cfg: &GateConfig) -> Result<GateOutcome> {
    cfg.validate()?;
    let nm = ChannelKind::nm(cfg.nm_channel);
    if rec.channel(nm).is_none() {
        return Err(Error::config(format!(
            "recording {} has no {nm} channel",
            rec.subject_id()
        )));
    }
    let targets: Vec<_> = rec
        .channels()
        .iter()
        .filter(|c| c.kind.kind == MicKind::Hm || c.kind == nm)
        .collect();
    if !targets.iter().any(|c| c.kind.kind == MicKind::Hm) {
        return Err(Error::config(format!(
            "recording {} has no heart-mic channel",
            rec.subject_id()
        )));
    }

    let per_channel = targets
        .par_iter()
        .map(|c| {
            let secs = match c.kind.kind {
                MicKind::Hm => cfg.frame_len_hm,
                MicKind::Nm => cfg.frame_len_nm,
            };
            flag_noisy_frames(&c.samples, rec.fs(), secs, cfg.threshold).map(|s| (c.kind, s))
        })
        .collect::<Result<Vec<_>>>()?;

    let boundaries = flag_boundaries(rec, cfg);
    let mut sets: Vec<IntervalSet> = per_channel.iter().map(|(_, s)| s.clone()).collect();
    sets.push(boundaries.clone());
    let noisy = IntervalSet::union(&sets)?;
    let clean = noisy.complement();
    Ok(GateOutcome {
        per_channel,
        boundaries,
        noisy,
        clean,
    })
}

/// Clean (noise-free) sample intervals shared by all channels.
pub fn detect_clean_intervals(rec: &Recording, cfg: &GateConfig) -> Result<IntervalSet> {
    gate_recording(rec, cfg).map(|o| o.clean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{Channel, Label};
    use proptest::prelude::*;

    #[test]
    fn energies_of_ones() {
        assert_eq!(frame_energies(&[1.0; 10], 5), vec![5.0, 5.0]);
        assert_eq!(frame_energies(&[1.0; 12], 5), vec![5.0, 5.0]);
        assert_eq!(frame_energies(&[0.0; 9], 3), vec![0.0; 3]);
        assert!(frame_energies(&[], 3).is_empty());
    }

    #[test]
    fn energies_match_double_loop() {
        let x: Vec<f64> = (0..1003).map(|i| ((i * 7919) % 113) as f64 / 50.0 - 1.0).collect();
        let frame = 17;
        let got = frame_energies(&x, frame);
        let n = x.len() / frame;
        assert_eq!(got.len(), n);
        for i in 0..n {
            let mut e = 0.0;
            for k in i * frame..(i + 1) * frame {
                e += x[k] * x[k];
            }
            assert_eq!(got[i], e);
        }
    }

    #[test]
    fn constant_signal_flags_nothing() {
        let out = flag_noisy_frames(&[0.3; 40_000], 4000, 0.25, 2.5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn single_hot_frame() {
        // ten frames of 4 samples each with unit energy; frame 5 at energy 10
        let mut x = vec![0.5; 40];
        for v in &mut x[20..24] {
            *v = (10.0f64 / 4.0).sqrt();
        }
        let out = flag_noisy_frames_samples(&x, 4, 2.5).unwrap();
        assert_eq!(out.intervals(), &[Interval::new(20, 23)]);
    }

    #[test]
    fn adjacent_hot_frames_merge() {
        let mut x = vec![0.5; 40];
        for v in &mut x[12..20] {
            *v = 3.0;
        }
        let out = flag_noisy_frames_samples(&x, 4, 2.5).unwrap();
        assert_eq!(out.intervals(), &[Interval::new(12, 19)]);
    }

    #[test]
    fn edge_frames_can_be_flagged() {
        let mut x = vec![0.5; 40];
        x[0] = 5.0;
        x[39] = 5.0;
        let out = flag_noisy_frames_samples(&x, 4, 2.5).unwrap();
        assert_eq!(out.intervals(), &[Interval::new(0, 3), Interval::new(36, 39)]);
    }

    #[test]
    fn too_few_frames_is_degenerate() {
        assert!(matches!(
            flag_noisy_frames_samples(&[1.0; 11], 4, 2.5),
            Err(Error::Degenerate(_))
        ));
    }

    fn recording(len: usize, joins: Vec<usize>) -> Recording {
        Recording::new(
            "S",
            Label::Nor,
            4000,
            vec![
                Channel {
                    kind: ChannelKind::hm(1),
                    samples: vec![0.1; len],
                },
                Channel {
                    kind: ChannelKind::nm(4),
                    samples: vec![0.01; len],
                },
            ],
            joins,
        )
        .unwrap()
    }

    #[test]
    fn boundary_seconds_of_a_minute() {
        let fs = 4000;
        let b = flag_boundaries(&recording(60 * fs, vec![]), &GateConfig::default());
        assert_eq!(
            b.intervals(),
            &[Interval::new(0, fs - 1), Interval::new(59 * fs, 60 * fs - 1)]
        );
    }

    #[test]
    fn join_gets_a_second_each_side() {
        let b = flag_boundaries(&recording(80_000, vec![20_000]), &GateConfig::default());
        assert!(b.intervals().contains(&Interval::new(16_000, 23_999)));
        // join at 8000 touches the leading second and merges with it
        let b = flag_boundaries(&recording(80_000, vec![8000]), &GateConfig::default());
        assert!(b.covers(Interval::new(4000, 11_999)));
        assert!(!b.contains(12_000));
    }

    #[test]
    fn short_recording_is_all_boundary() {
        let b = flag_boundaries(&recording(6000, vec![]), &GateConfig::default());
        assert_eq!(b, IntervalSet::full(6000));
    }

    #[test]
    fn clean_constant_recording_loses_only_boundaries() {
        let rec = recording(60 * 4000, vec![]);
        let clean = detect_clean_intervals(&rec, &GateConfig::default()).unwrap();
        assert_eq!(clean.intervals(), &[Interval::new(4000, 59 * 4000 - 1)]);
    }

    #[test]
    fn missing_nm_channel_is_config_error() {
        let rec = recording(60 * 4000, vec![]);
        let cfg = GateConfig {
            nm_channel: 3,
            ..GateConfig::default()
        };
        assert!(matches!(detect_clean_intervals(&rec, &cfg), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn scale_invariance(
            seed in prop::collection::vec(-1.0f64..1.0, 64..400),
            frame in 4usize..20,
            c in prop::sample::select(vec![1e-3, -2.0, 1e3]),
        ) {
            let base = flag_noisy_frames_samples(&seed, frame, 2.5);
            let scaled: Vec<f64> = seed.iter().map(|v| v * c).collect();
            let other = flag_noisy_frames_samples(&scaled, frame, 2.5);
            match (base, other) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "scale changed success"),
            }
        }
    }
}
