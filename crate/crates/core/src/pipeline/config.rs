//! Flat TOML pipeline configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::MfccConfig;
use crate::noise_gate::GateConfig;
use crate::objective::{LossWeights, SelfTerm};
use crate::preprocess::PreprocessConfig;
use crate::segmenter::SegmentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Every tunable of every stage in one flat table. Missing keys take their
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub seed: u64,

    pub synth_subjects: usize,
    /// Fraction of synthetic subjects labelled CAD.
    pub synth_cad_fraction: f64,
    pub synth_fs: u32,
    /// Seconds per take.
    pub synth_duration: f64,
    pub synth_takes: usize,
    pub synth_hr_min: f64,
    pub synth_hr_max: f64,
    /// Noise events injected per take.
    pub synth_events: usize,

    pub gate_frame_len_hm: f64,
    pub gate_frame_len_nm: f64,
    pub gate_threshold: f64,
    pub gate_nm_channel: u8,
    pub gate_boundary: f64,

    pub band_low: f64,
    pub band_high: f64,
    pub filter_order: usize,
    pub spike_window: f64,
    pub spike_ratio: f64,
    pub k_peaks: usize,
    pub peak_min_separation: f64,

    pub frag_len: f64,
    pub min_segment: f64,
    pub f_base: usize,

    pub n_mfcc: usize,
    pub n_mels: usize,
    pub mel_f_min: f64,
    pub mel_f_max: f64,
    pub win_len: usize,
    pub hop: usize,
    pub log_floor: f64,

    pub loss_alpha: f64,
    pub loss_beta: f64,
    pub loss_lambda_c: f64,
    pub loss_temperature: f64,
    /// Drop the anchor from the contrastive denominator.
    pub loss_exclude_self: bool,

    pub folds: usize,
    /// Test fold; the next fold (cyclically) is validation.
    pub fold: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let gate = GateConfig::default();
        let pre = PreprocessConfig::default();
        let seg = SegmentConfig::default();
        let mfcc = MfccConfig::default();
        let loss = LossWeights::default();
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            synth_subjects: 20,
            synth_cad_fraction: 0.5,
            synth_fs: 4000,
            synth_duration: 60.0,
            synth_takes: 1,
            synth_hr_min: 60.0,
            synth_hr_max: 90.0,
            synth_events: 1,
            gate_frame_len_hm: gate.frame_len_hm,
            gate_frame_len_nm: gate.frame_len_nm,
            gate_threshold: gate.threshold,
            gate_nm_channel: gate.nm_channel,
            gate_boundary: gate.boundary_flag,
            band_low: pre.band_low,
            band_high: pre.band_high,
            filter_order: pre.filter_order,
            spike_window: pre.spike_window,
            spike_ratio: pre.spike_ratio,
            k_peaks: pre.k_peaks,
            peak_min_separation: pre.peak_min_separation,
            frag_len: seg.frag_len,
            min_segment: seg.min_segment,
            f_base: seg.f_base,
            n_mfcc: mfcc.n_mfcc,
            n_mels: mfcc.n_mels,
            mel_f_min: mfcc.f_min,
            mel_f_max: mfcc.f_max,
            win_len: mfcc.win_len,
            hop: mfcc.hop,
            log_floor: mfcc.log_floor,
            loss_alpha: loss.alpha,
            loss_beta: loss.beta,
            loss_lambda_c: loss.lambda_c,
            loss_temperature: loss.temperature,
            loss_exclude_self: false,
            folds: 5,
            fold: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Checks everything that does not depend on a recording's sample rate.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.gate().validate()?;
        self.loss_weights().validate()?;
        if self.folds < 3 {
            return Err(Error::config("need at least 3 folds (train, validation, test)"));
        }
        if self.fold >= self.folds {
            return Err(Error::config(format!("fold {} outside 0..{}", self.fold, self.folds)));
        }
        if self.f_base == 0 {
            return Err(Error::config("f_base must be at least 1"));
        }
        if !(self.frag_len > 0.0 && self.min_segment > 0.0) {
            return Err(Error::config("fragment and segment lengths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.synth_cad_fraction) {
            return Err(Error::config("synth_cad_fraction must lie in [0, 1]"));
        }
        if self.synth_takes == 0 {
            return Err(Error::config("synth_takes must be at least 1"));
        }
        if !(self.synth_hr_min > 0.0 && self.synth_hr_min <= self.synth_hr_max) {
            return Err(Error::config("need 0 < synth_hr_min <= synth_hr_max"));
        }
        Ok(())
    }

    pub fn gate(&self) -> GateConfig {
        GateConfig {
            frame_len_hm: self.gate_frame_len_hm,
            frame_len_nm: self.gate_frame_len_nm,
            threshold: self.gate_threshold,
            nm_channel: self.gate_nm_channel,
            boundary_flag: self.gate_boundary,
        }
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            band_low: self.band_low,
            band_high: self.band_high,
            filter_order: self.filter_order,
            spike_window: self.spike_window,
            spike_ratio: self.spike_ratio,
            k_peaks: self.k_peaks,
            peak_min_separation: self.peak_min_separation,
        }
    }

    pub fn segment(&self) -> SegmentConfig {
        SegmentConfig {
            frag_len: self.frag_len,
            min_segment: self.min_segment,
            f_base: self.f_base,
        }
    }

    pub fn mfcc(&self) -> MfccConfig {
        MfccConfig {
            n_mfcc: self.n_mfcc,
            n_mels: self.n_mels,
            f_min: self.mel_f_min,
            f_max: self.mel_f_max,
            win_len: self.win_len,
            hop: self.hop,
            log_floor: self.log_floor,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.loss_alpha,
            beta: self.loss_beta,
            lambda_c: self.loss_lambda_c,
            temperature: self.loss_temperature,
        }
    }

    pub fn self_term(&self) -> SelfTerm {
        if self.loss_exclude_self {
            SelfTerm::Exclude
        } else {
            SelfTerm::Include
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn partial_file_takes_defaults() {
        let cfg = PipelineConfig::from_toml("schema_version = 1\nseed = 9\nf_base = 10\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.f_base, 10);
        assert_eq!(cfg.gate(), GateConfig::default());
        assert_ne!(cfg.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "schema_version = 2",
            "no_such_key = 1",
            "gate_threshold = -1.0",
            "fold = 5",
            "seed = \"x\"",
        ] {
            assert!(matches!(PipelineConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
