//! MFCC features per channel and early fusion across channels.
//!
//! Frames are Hann-windowed with no centring or padding, so a buffer of
//! `n` samples yields `1 + (n - win_len) / hop` frames. Mel energies use the
//! HTK mel scale with unit-peak triangles, and cepstra are the orthonormal
//! DCT-II of the natural log of the floored mel energies.

mod format;
mod normalize;

pub use format::{FeatureIndexEntry, FeatureReader, FeatureRecord, FeatureWriter, INDEX_HEADER};
pub use normalize::{BlockAccumulator, BlockStandardizer};

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::recording::ChannelKind;

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub n_mfcc: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub win_len: usize,
    pub hop: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_mfcc: 128,
            n_mels: 128,
            f_min: 25.0,
            f_max: 450.0,
            win_len: 512,
            hop: 160,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self, fs: u32) -> Result<()> {
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::config("need 1 <= n_mfcc <= n_mels"));
        }
        if self.win_len < 2 || self.hop == 0 || self.hop > self.win_len {
            return Err(Error::config("need win_len >= 2 and 1 <= hop <= win_len"));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= f64::from(fs) / 2.0) {
            return Err(Error::config(format!(
                "mel band {}-{} Hz invalid for fs = {fs} Hz",
                self.f_min, self.f_max
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::config("log floor must be positive"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.win_len / 2 + 1
    }

    /// Frame count for a buffer of `len` samples (0 if shorter than a window).
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.win_len {
            0
        } else {
            1 + (len - self.win_len) / self.hop
        }
    }
}

/// Where a feature matrix came from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub subject_id: String,
    pub start: usize,
    pub channels: Vec<ChannelKind>,
}

/// Row-major `frames x dims` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: usize,
    pub dims: usize,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl FeatureMatrix {
    pub fn zeros(frames: usize, dims: usize) -> Self {
        Self {
            frames,
            dims,
            values: vec![0.0; frames * dims],
            provenance: Provenance::default(),
        }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.dims + f]
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels x n_bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Triangles with centres uniform in mel between `f_min` and `f_max`.
/// A filter narrower than the FFT bin spacing gets weight 1 at the bin
/// nearest its centre.
pub fn mel_filterbank(cfg: &MfccConfig, fs: u32) -> Result<MelFilterbank> {
    cfg.validate(fs)?;
    let fs = f64::from(fs);
    let n_bins = cfg.n_bins();
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * fs / cfg.win_len as f64;

    let mut weights = Vec::with_capacity(cfg.n_mels);
    let mut centers = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = bin_hz(k);
                let up = (f - left) / (centre - left);
                let down = (right - f) / (right - centre);
                up.min(down).max(0.0)
            })
            .collect();
        if row.iter().all(|&w| w == 0.0) {
            let nearest = ((centre * cfg.win_len as f64 / fs).round() as usize).min(n_bins - 1);
            row[nearest] = 1.0;
        }
        weights.push(row);
        centers.push(centre);
    }
    Ok(MelFilterbank {
        weights,
        centers_hz: centers,
    })
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                .collect()
        })
        .collect()
}

/// Reusable MFCC pipeline for one sample rate and configuration.
pub struct MfccExtractor {
    cfg: MfccConfig,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    dct: Vec<Vec<f64>>,
}

impl std::fmt::Debug for MfccExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MfccExtractor").field("cfg", &self.cfg).finish()
    }
}

impl MfccExtractor {
    pub fn new(cfg: &MfccConfig, fs: u32) -> Result<Self> {
        let filterbank = mel_filterbank(cfg, fs)?;
        Ok(Self {
            cfg: cfg.clone(),
            fft: FftPlanner::new().plan_fft_forward(cfg.win_len),
            window: hann(cfg.win_len),
            filterbank,
            dct: dct_matrix(cfg.n_mfcc, cfg.n_mels),
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// `frames x (win_len/2 + 1)` power spectrogram.
    pub fn stft_power(&self, x: &[f64]) -> Result<FeatureMatrix> {
        let frames = self.cfg.frame_count(x.len());
        if frames == 0 {
            return Err(Error::degenerate(format!(
                "{} samples is shorter than one {}-sample window",
                x.len(),
                self.cfg.win_len
            )));
        }
        let n_bins = self.cfg.n_bins();
        let mut out = FeatureMatrix::zeros(frames, n_bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.cfg.win_len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for t in 0..frames {
            let frame = &x[t * self.cfg.hop..t * self.cfg.hop + self.cfg.win_len];
            for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *b = Complex64::new(s * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (o, c) in out.row_mut(t).iter_mut().zip(&buf[..n_bins]) {
                *o = c.norm_sqr();
            }
        }
        Ok(out)
    }

    /// Cepstra of one power-spectrum row.
    pub fn cepstrum(&self, power: &[f64]) -> Vec<f64> {
        let log_mel: Vec<f64> = self
            .filterbank
            .apply(power)
            .into_iter()
            .map(|e| e.max(self.cfg.log_floor).ln())
            .collect();
        self.dct
            .iter()
            .map(|basis| basis.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `frames x n_mfcc` cepstral matrix of a single channel.
    pub fn mfcc(&self, x: &[f64]) -> Result<FeatureMatrix> {
        let power = self.stft_power(x)?;
        let mut out = FeatureMatrix::zeros(power.frames, self.cfg.n_mfcc);
        for t in 0..power.frames {
            let c = self.cepstrum(power.row(t));
            out.row_mut(t).copy_from_slice(&c);
        }
        Ok(out)
    }
}

pub fn stft_power(x: &[f64], fs: u32, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(cfg, fs)?.stft_power(x)
}

pub fn mfcc(x: &[f64], fs: u32, cfg: &MfccConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(cfg, fs)?.mfcc(x)
}

/// Concatenates per-channel matrices along the feature axis, in order.
pub fn fuse_channels(mats: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = mats
        .first()
        .ok_or_else(|| Error::degenerate("no channel features to fuse"))?;
    if let Some(m) = mats.iter().find(|m| m.frames != first.frames) {
        return Err(Error::incompatible(format!(
            "channel frame counts differ: {} vs {}",
            first.frames, m.frames
        )));
    }
    let dims: usize = mats.iter().map(|m| m.dims).sum();
    let mut values = Vec::with_capacity(first.frames * dims);
    for t in 0..first.frames {
        for m in mats {
            values.extend_from_slice(m.row(t));
        }
    }
    let mut provenance = first.provenance.clone();
    provenance.channels = mats.iter().flat_map(|m| m.provenance.channels.iter().copied()).collect();
    Ok(FeatureMatrix {
        frames: first.frames,
        dims,
        values,
        provenance,
    })
}

/// Per-channel MFCCs of a fragment, fused in channel order.
pub fn fragment_features(
    extractor: &MfccExtractor,
    fragment: &crate::segmenter::Fragment,
) -> Result<FeatureMatrix> {
    let mats = fragment
        .channels
        .iter()
        .map(|c| {
            let mut m = extractor.mfcc(&c.samples)?;
            m.provenance.channels = vec![c.kind];
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fused = fuse_channels(&mats)?;
    fused.provenance.subject_id = fragment.subject_id.clone();
    fused.provenance.start = fragment.start;
    Ok(fused)
}
