//! Per-channel conditioning: spike removal, zero-phase Butterworth bandpass,
//! and k-peak mean normalisation, applied in that order.

mod butterworth;
mod kpeak;
mod spikes;

pub use butterworth::{butter_bandpass, Biquad, Sos};
pub use kpeak::{kpeak_normalize, select_peaks, KPeakOutput};
pub use spikes::{remove_spikes, Despiked};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub band_low: f64,
    pub band_high: f64,
    /// Poles of the lowpass prototype; the bandpass has twice as many.
    pub filter_order: usize,
    /// Spike-detection frame, seconds.
    pub spike_window: f64,
    pub spike_ratio: f64,
    pub k_peaks: usize,
    /// Minimum spacing between selected peaks, seconds.
    pub peak_min_separation: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            band_low: 25.0,
            band_high: 450.0,
            filter_order: 2,
            spike_window: 0.5,
            spike_ratio: 3.0,
            k_peaks: 10,
            peak_min_separation: 0.25,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, fs: u32) -> Result<()> {
        let nyquist = f64::from(fs) / 2.0;
        if !(self.band_low > 0.0 && self.band_low < self.band_high && self.band_high < nyquist) {
            return Err(Error::config(format!(
                "band {}-{} Hz invalid for fs = {fs} Hz",
                self.band_low, self.band_high
            )));
        }
        if self.filter_order == 0 || self.k_peaks == 0 {
            return Err(Error::config("filter order and k must be at least 1"));
        }
        if !(self.spike_window > 0.0 && self.spike_ratio > 0.0 && self.peak_min_separation >= 0.0) {
            return Err(Error::config("spike window, ratio and peak separation must be positive"));
        }
        Ok(())
    }

    pub fn design_filter(&self, fs: u32) -> Result<Sos> {
        self.validate(fs)?;
        butter_bandpass(self.filter_order, self.band_low, self.band_high, f64::from(fs))
    }
}

/// Zero-phase bandpass of `x`.
pub fn bandpass(x: &[f64], fs: u32, cfg: &PreprocessConfig) -> Result<Vec<f64>> {
    Ok(cfg.design_filter(fs)?.filtfilt(x))
}

/// Outcome of conditioning one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub samples: Vec<f64>,
    pub spikes_removed: usize,
    /// False when the channel was silent after filtering and left unscaled.
    pub normalized: bool,
}

/// Full chain for one channel.
pub fn condition_channel(x: &[f64], fs: u32, cfg: &PreprocessConfig) -> Result<Conditioned> {
    let sos = cfg.design_filter(fs)?;
    let despiked = remove_spikes(x, fs, cfg);
    let filtered = sos.filtfilt(&despiked.samples);
    let norm = kpeak_normalize(&filtered, fs, cfg);
    Ok(Conditioned {
        samples: norm.samples,
        spikes_removed: despiked.removed,
        normalized: norm.peak_mean.is_some(),
    })
}
