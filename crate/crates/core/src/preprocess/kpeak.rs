//! k-peak mean amplitude normalisation.

use super::PreprocessConfig;
use crate::stats::seconds_to_samples;

#[derive(Debug, Clone, PartialEq)]
pub struct KPeakOutput {
    pub samples: Vec<f64>,
    /// Mean magnitude of the selected peaks; `None` for an all-zero signal,
    /// which is returned unchanged.
    pub peak_mean: Option<f64>,
}

/// Indices of up to `k` largest local maxima of `|x|` that are pairwise at
/// least `min_sep` samples apart, chosen greedily from the tallest down.
pub fn select_peaks(x: &[f64], k: usize, min_sep: usize) -> Vec<usize> {
    let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let n = a.len();
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            a[i] > 0.0 && (i == 0 || a[i] > a[i - 1]) && (i + 1 == n || a[i] >= a[i + 1])
        })
        .collect();
    candidates.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for c in candidates {
        if chosen.len() == k {
            break;
        }
        if chosen.iter().all(|&p| p.abs_diff(c) >= min_sep) {
            chosen.push(c);
        }
    }
    chosen
}

/// Divides `x` by the mean magnitude of its `k_peaks` largest
/// well-separated peaks (or all of them, if fewer exist).
pub fn kpeak_normalize(x: &[f64], fs: u32, cfg: &PreprocessConfig) -> KPeakOutput {
    let min_sep = seconds_to_samples(cfg.peak_min_separation, fs).max(1);
    let peaks = select_peaks(x, cfg.k_peaks.max(1), min_sep);
    if peaks.is_empty() {
        return KPeakOutput {
            samples: x.to_vec(),
            peak_mean: None,
        };
    }
    let mean = peaks.iter().map(|&i| x[i].abs()).sum::<f64>() / peaks.len() as f64;
    KPeakOutput {
        samples: x.iter().map(|v| v / mean).collect(),
        peak_mean: Some(mean),
    }
}
