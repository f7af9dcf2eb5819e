//! Seeded synthetic multichannel heart-sound recordings with ground-truth
//! noise injection.
//!
//! Heart sounds are damped sinusoids placed on a fixed beat schedule. Four
//! heart-mic channels carry amplitude-jittered copies of the same beat
//! train plus their own white noise floor; the noise mic carries only a
//! much weaker noise floor. Injected events are scaled relative to the RMS
//! of the channel they land on, so a `gain` of 5 means five times the
//! channel RMS.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::preprocess::butter_bandpass;
use crate::recording::{Channel, ChannelKind, Label, MicKind, Recording};

/// Identifier of the generator behind every seeded stream, written into
/// generated artifacts.
pub const RNG_ALGORITHM: &str = "ChaCha8";

pub const HM_CHANNELS: u8 = 4;
pub const NM_STETHOSCOPE: u8 = 4;

/// White noise floor on heart-mic channels, relative to the channel peak
/// (-30 dB).
pub const HM_NOISE_REL: f64 = 0.031_622_776_601_683_79;
/// Absolute noise-mic floor standard deviation.
pub const NM_NOISE_STD: f64 = 0.002;

const FIRST_ONSET: f64 = 0.1;
const RAMP_SECS: f64 = 0.005;
const FRICTION_TAPER_SECS: f64 = 0.05;

/// Class-conditioned spectral shape of the synthetic heart sounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthProfile {
    pub s1_hz: f64,
    pub s2_hz: f64,
    /// Systolic murmur level relative to the S1 peak; 0 disables it.
    pub murmur_gain: f64,
    pub murmur_band: (f64, f64),
}

impl SynthProfile {
    /// CAD subjects get higher-pitched sounds and a faint high-band systolic
    /// murmur.
    pub fn for_label(label: Label) -> Self {
        match label {
            Label::Nor => Self {
                s1_hz: 45.0,
                s2_hz: 70.0,
                murmur_gain: 0.0,
                murmur_band: (150.0, 400.0),
            },
            Label::Cad => Self {
                s1_hz: 70.0,
                s2_hz: 110.0,
                murmur_gain: 0.08,
                murmur_band: (150.0, 400.0),
            },
        }
    }
}

/// S1 onset times in seconds: one every `60 / heart_rate` seconds from a
/// fixed 0.1 s lead-in.
pub fn s1_onsets(duration: f64, heart_rate: f64) -> Vec<f64> {
    let period = 60.0 / heart_rate;
    (0..)
        .map(|k| FIRST_ONSET + k as f64 * period)
        .take_while(|&t| t < duration)
        .collect()
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn add_damped(out: &mut [f64], fs: f64, onset: f64, freq: f64, amp: f64, decay: f64) {
    let start = (onset * fs).round() as usize;
    let n = (6.0 * decay * fs).ceil() as usize;
    for (i, slot) in out.iter_mut().skip(start).take(n).enumerate() {
        let t = i as f64 / fs;
        let attack = 1.0 - (-t / 0.003).exp();
        *slot += amp * attack * (-t / decay).exp() * (2.0 * PI * freq * t).sin();
    }
}

fn validate_synth(fs: u32, duration: f64, heart_rate: f64) -> Result<()> {
    if fs < 1000 {
        return Err(Error::config(format!("synthetic sample rate {fs} Hz is below 1000 Hz")));
    }
    if !(duration >= 10.0) || !duration.is_finite() {
        return Err(Error::config("synthetic recordings must last at least 10 s"));
    }
    if !(20.0..=240.0).contains(&heart_rate) {
        return Err(Error::config(format!("heart rate {heart_rate} bpm out of range")));
    }
    Ok(())
}

/// Clean heart-sound beat train normalised to unit peak.
fn beat_train(
    fs: u32,
    duration: f64,
    heart_rate: f64,
    profile: &SynthProfile,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let fsf = fs as f64;
    let n = (duration * fsf).round() as usize;
    let mut h = vec![0.0; n];
    let s1_hz = profile.s1_hz * rng.random_range(0.85..1.15);
    let s2_hz = profile.s2_hz * rng.random_range(0.85..1.15);
    let period = 60.0 / heart_rate;
    let systole = 0.3 * period.sqrt();
    let onsets = s1_onsets(duration, heart_rate);
    for &t in &onsets {
        let a1 = rng.random_range(0.9..1.1);
        let a2 = rng.random_range(0.5..0.7);
        add_damped(&mut h, fsf, t, s1_hz, a1, 0.025);
        add_damped(&mut h, fsf, t + systole, s2_hz, a2, 0.02);
    }
    if profile.murmur_gain > 0.0 {
        let (lo, hi) = profile.murmur_band;
        let sos = butter_bandpass(2, lo, hi, fsf)?;
        let mut m = sos.filtfilt(&gaussian(rng, n));
        let scale = profile.murmur_gain / rms(&m).max(f64::MIN_POSITIVE);
        let (open, close) = (((0.08 * fsf) as usize), ((systole - 0.02) * fsf) as usize);
        let mut envelope = vec![0.0; n];
        for &t in &onsets {
            let s = (t * fsf).round() as usize;
            for i in open..close.max(open) {
                if let Some(e) = envelope.get_mut(s + i) {
                    let u = (i - open) as f64 / (close - open).max(1) as f64;
                    *e = (PI * u).sin();
                }
            }
        }
        for ((v, mv), e) in h.iter_mut().zip(m.iter_mut()).zip(&envelope) {
            *v += *mv * scale * e;
        }
    }
    let peak = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        h.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(h)
}

/// Synthetic normal-class recording, subject id `synth`.
pub fn synth_pcg(fs: u32, duration: f64, heart_rate: f64, seed: u64) -> Result<Recording> {
    synth_subject("synth", Label::Nor, fs, duration, heart_rate, seed)
}

/// Synthetic recording with four heart-mic channels and one noise-mic
/// channel, shaped by the class profile of `label`.
pub fn synth_subject(
    subject_id: &str,
    label: Label,
    fs: u32,
    duration: f64,
    heart_rate: f64,
    seed: u64,
) -> Result<Recording> {
    validate_synth(fs, duration, heart_rate)?;
    let profile = SynthProfile::for_label(label);
    let h = beat_train(fs, duration, heart_rate, &profile, &mut stream(seed, 0))?;
    let mut channels = Vec::with_capacity(HM_CHANNELS as usize + 1);
    for s in 1..=HM_CHANNELS {
        let mut rng = stream(seed, s as u64);
        let gain = rng.random_range(0.7..1.3);
        let noise = gaussian(&mut rng, h.len());
        let samples = h
            .iter()
            .zip(&noise)
            .map(|(v, w)| gain * (v + HM_NOISE_REL * w))
            .collect();
        channels.push(Channel {
            kind: ChannelKind::hm(s),
            samples,
        });
    }
    let mut rng = stream(seed, 100);
    channels.push(Channel {
        kind: ChannelKind::nm(NM_STETHOSCOPE),
        samples: gaussian(&mut rng, h.len()).into_iter().map(|w| NM_NOISE_STD * w).collect(),
    });
    Recording::new(subject_id, label, fs, channels, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventTarget {
    /// Every heart-mic channel.
    HmAll,
    /// One heart-mic channel by stethoscope index.
    Hm(u8),
    /// The noise mic used by the gate.
    Nm,
}

impl EventTarget {
    pub fn matches(&self, kind: ChannelKind) -> bool {
        match (self, kind.kind) {
            (EventTarget::HmAll, MicKind::Hm) => true,
            (EventTarget::Hm(i), MicKind::Hm) => *i == kind.stethoscope,
            (EventTarget::Nm, MicKind::Nm) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Broadband burst with short ramps (voices, door slams).
    Burst,
    /// 20-200 Hz noise under a slowly varying envelope (skin friction).
    Friction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEvent {
    pub target: EventTarget,
    /// Seconds from the recording start.
    pub onset: f64,
    /// Seconds.
    pub duration: f64,
    /// Event RMS as a multiple of the target channel's RMS.
    pub gain: f64,
    pub kind: EventKind,
}

impl NoiseEvent {
    /// Inclusive sample support inside a recording of `len` samples.
    pub fn support(&self, fs: u32, len: usize) -> Result<Interval> {
        if !(self.onset >= 0.0) || !(self.duration > 0.0) || !(self.gain > 0.0) {
            return Err(Error::config(format!("invalid noise event {self:?}")));
        }
        let start = (self.onset * fs as f64).round() as usize;
        let end = ((self.onset + self.duration) * fs as f64).round() as usize;
        if end > len || end <= start {
            return Err(Error::Contract(format!(
                "noise event at {:.3} s lasting {:.3} s does not fit in {len} samples",
                self.onset, self.duration
            )));
        }
        Ok(Interval::new(start, end - 1))
    }
}

fn burst(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let ramp = ((RAMP_SECS * fs) as usize).max(1);
    gaussian(rng, n)
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let edge = i.min(n - 1 - i);
            w * (edge as f64 / ramp as f64).min(1.0)
        })
        .collect()
}

fn friction(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Result<Vec<f64>> {
    let sos = butter_bandpass(2, 20.0, 200.0_f64.min(0.45 * fs), fs)?;
    let band = sos.filtfilt(&gaussian(rng, n));
    let scale = rms(&band).max(f64::MIN_POSITIVE);
    let rate = rng.random_range(0.3..1.0);
    let phase = rng.random_range(0.0..PI);
    let taper = ((FRICTION_TAPER_SECS * fs) as usize).max(1);
    Ok(band
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / fs;
            let slow = 0.6 + 0.4 * (2.0 * PI * rate * t + phase).sin().abs();
            let edge = i.min(n - 1 - i) as f64 / taper as f64;
            let fade = if edge >= 1.0 { 1.0 } else { 0.5 - 0.5 * (PI * edge).cos() };
            v / scale * slow * fade
        })
        .collect())
}

/// Adds `events` to `rec` and returns the noisy copy with the union of the
/// event supports. Event waveforms depend only on `seed` and the event's
/// position in the list.
pub fn inject_noise(
    rec: &Recording,
    events: &[NoiseEvent],
    seed: u64,
) -> Result<(Recording, IntervalSet)> {
    let len = rec.len();
    let fs = rec.fs() as f64;
    let supports = events
        .iter()
        .map(|e| e.support(rec.fs(), len))
        .collect::<Result<Vec<_>>>()?;
    for e in events {
        if !rec.channels().iter().any(|c| e.target.matches(c.kind)) {
            return Err(Error::incompatible(format!(
                "no channel of {} matches event target {:?}",
                rec.subject_id(),
                e.target
            )));
        }
    }
    let reference: Vec<f64> = rec.channels().iter().map(|c| rms(&c.samples)).collect();
    let mut channels = rec.channels().to_vec();
    for (ei, (e, iv)) in events.iter().zip(&supports).enumerate() {
        for (ci, ch) in channels.iter_mut().enumerate() {
            if !e.target.matches(ch.kind) {
                continue;
            }
            let mut rng = stream(seed, ((ei as u64 + 1) << 16) | ci as u64);
            let shape = match e.kind {
                EventKind::Burst => burst(&mut rng, iv.len(), fs),
                EventKind::Friction => friction(&mut rng, iv.len(), fs)?,
            };
            let amp = e.gain * reference[ci] / rms(&shape).max(f64::MIN_POSITIVE);
            for (x, s) in ch.samples[iv.start..=iv.end].iter_mut().zip(&shape) {
                *x += amp * s;
            }
        }
    }
    let truth = IntervalSet::from_intervals(len, supports)?;
    let noisy = Recording::new(
        rec.subject_id(),
        rec.label(),
        rec.fs(),
        channels,
        rec.join_markers().to_vec(),
    )?;
    Ok((noisy, truth))
}

/// Union of the supports of the events landing on channel `kind`.
pub fn channel_truth(events: &[NoiseEvent], kind: ChannelKind, fs: u32, len: usize) -> Result<IntervalSet> {
    let ivs = events
        .iter()
        .filter(|e| e.target.matches(kind))
        .map(|e| e.support(fs, len))
        .collect::<Result<Vec<_>>>()?;
    IntervalSet::from_intervals(len, ivs)
}

/// Random gate-detectable events, alternating burst and friction: 5-20x
/// bursts of 0.5-3 s on the noise mic or all heart mics, and 5-20x friction
/// of 3-8 s on one heart mic. Events stay at least 1.5 s clear of both
/// recording edges.
pub fn random_events(rng: &mut impl Rng, duration: f64, count: usize) -> Vec<NoiseEvent> {
    (0..count)
        .map(|k| {
            let kind = if k % 2 == 0 { EventKind::Burst } else { EventKind::Friction };
            let (target, length) = match kind {
                EventKind::Burst => {
                    let t = if rng.random::<bool>() { EventTarget::Nm } else { EventTarget::HmAll };
                    (t, rng.random_range(0.5..3.0))
                }
                EventKind::Friction => (
                    EventTarget::Hm(rng.random_range(1..=HM_CHANNELS)),
                    rng.random_range(3.0..8.0),
                ),
            };
            let length = f64::min(length, duration - 3.5);
            NoiseEvent {
                target,
                onset: rng.random_range(1.5..(duration - 1.5 - length).max(1.5 + 1e-9)),
                duration: length,
                gain: rng.random_range(5.0..20.0),
                kind,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_gate::{gate_recording, GateConfig};

    #[test]
    fn deterministic_in_seed() {
        let a = synth_pcg(4000, 12.0, 72.0, 9).unwrap();
        let b = synth_pcg(4000, 12.0, 72.0, 9).unwrap();
        let c = synth_pcg(4000, 12.0, 72.0, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn onset_schedule() {
        let n = s1_onsets(60.0, 72.0).len();
        assert!((71..=73).contains(&n), "{n}");
        assert_eq!(s1_onsets(10.0, 60.0).len(), 10);
    }

    #[test]
    fn layout_and_levels() {
        let rec = synth_subject("s", Label::Cad, 4000, 20.0, 80.0, 3).unwrap();
        assert_eq!(rec.channels().len(), 5);
        assert_eq!(rec.len(), 80_000);
        let nm = rms(&rec.channel(ChannelKind::nm(4)).unwrap().samples);
        for s in 1..=4 {
            let hm = rms(&rec.channel(ChannelKind::hm(s)).unwrap().samples);
            assert!(nm < 0.05 * hm, "nm {nm} hm {hm}");
        }
    }

    #[test]
    fn preconditions() {
        assert!(synth_pcg(800, 20.0, 72.0, 0).is_err());
        assert!(synth_pcg(4000, 5.0, 72.0, 0).is_err());
    }

    #[test]
    fn no_events_is_identity() {
        let rec = synth_pcg(2000, 10.0, 72.0, 1).unwrap();
        let (out, truth) = inject_noise(&rec, &[], 5).unwrap();
        assert_eq!(out, rec);
        assert!(truth.is_empty());
    }

    #[test]
    fn overlapping_events_merge() {
        let rec = synth_pcg(2000, 10.0, 72.0, 1).unwrap();
        let ev = |onset| NoiseEvent {
            target: EventTarget::Nm,
            onset,
            duration: 1.0,
            gain: 5.0,
            kind: EventKind::Burst,
        };
        let (_, truth) = inject_noise(&rec, &[ev(2.0), ev(2.5)], 5).unwrap();
        assert_eq!(truth.intervals(), &[Interval::new(4000, 6999)]);
    }

    #[test]
    fn out_of_bounds_event_fails() {
        let rec = synth_pcg(2000, 10.0, 72.0, 1).unwrap();
        let e = NoiseEvent {
            target: EventTarget::Hm(2),
            onset: 9.5,
            duration: 1.0,
            gain: 5.0,
            kind: EventKind::Friction,
        };
        assert!(inject_noise(&rec, &[e], 0).is_err());
    }

    #[test]
    fn gated_burst_on_noise_mic() {
        let rec = synth_pcg(4000, 60.0, 72.0, 21).unwrap();
        let e = NoiseEvent {
            target: EventTarget::Nm,
            onset: 30.0,
            duration: 0.5,
            gain: 10.0,
            kind: EventKind::Burst,
        };
        let (noisy, truth) = inject_noise(&rec, &[e], 4).unwrap();
        let out = gate_recording(&noisy, &GateConfig::default()).unwrap();
        assert!(out.noisy.covers(truth.intervals()[0]));
    }

    #[test]
    fn friction_is_removed_from_every_channel() {
        let rec = synth_pcg(4000, 60.0, 72.0, 22).unwrap();
        let e = NoiseEvent {
            target: EventTarget::Hm(2),
            onset: 20.0,
            duration: 3.0,
            gain: 5.0,
            kind: EventKind::Friction,
        };
        let (noisy, _) = inject_noise(&rec, &[e], 4).unwrap();
        let out = gate_recording(&noisy, &GateConfig::default()).unwrap();
        // frames fully inside the event on the 2.5 s grid: [20, 22.5)
        assert!(out.noisy.covers(Interval::new(80_000, 89_999)));
        assert!(!out.clean.intersects(Interval::new(80_000, 89_999)));
    }
}
