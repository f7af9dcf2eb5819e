//! Max-absolute-amplitude spike removal.

use super::PreprocessConfig;
use crate::stats::{median, seconds_to_samples};

const MAX_ITERATIONS: usize = 100;

/// Result of [`remove_spikes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Despiked {
    pub samples: Vec<f64>,
    /// Number of spikes zeroed.
    pub removed: usize,
    /// True when the loop stopped at the iteration cap.
    pub capped: bool,
}

fn frame_maa(x: &[f64], frame: usize) -> Vec<f64> {
    x.chunks(frame)
        .map(|c| c.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .collect()
}

/// Repeatedly zeroes the loudest spike while some frame's max absolute
/// amplitude exceeds `spike_ratio` times the median over frames.
///
/// The zeroed span is the run of same-signed samples around the frame's
/// peak, bounded by the nearest zero crossings inside that frame.
pub fn remove_spikes(x: &[f64], fs: u32, cfg: &PreprocessConfig) -> Despiked {
    let mut y = x.to_vec();
    let frame = seconds_to_samples(cfg.spike_window, fs).max(1);
    let mut removed = 0;
    if y.is_empty() {
        return Despiked {
            samples: y,
            removed,
            capped: false,
        };
    }
    for _ in 0..MAX_ITERATIONS {
        let maa = frame_maa(&y, frame);
        let med = median(&maa).expect("non-empty");
        let (worst, &worst_maa) = maa
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(worst_maa > cfg.spike_ratio * med) {
            return Despiked {
                samples: y,
                removed,
                capped: false,
            };
        }
        let lo = worst * frame;
        let hi = ((worst + 1) * frame).min(y.len());
        let peak = (lo..hi)
            .fold(lo, |best, i| if y[i].abs() > y[best].abs() { i } else { best });
        let sign = y[peak].signum();
        let same = |v: f64| v != 0.0 && v.signum() == sign;
        let mut start = peak;
        while start > lo && same(y[start - 1]) {
            start -= 1;
        }
        let mut end = peak;
        while end + 1 < hi && same(y[end + 1]) {
            end += 1;
        }
        y[start..=end].fill(0.0);
        removed += 1;
    }
    let maa = frame_maa(&y, frame);
    let med = median(&maa).expect("non-empty");
    let capped = maa.iter().any(|&m| m > cfg.spike_ratio * med);
    Despiked {
        samples: y,
        removed,
        capped,
    }
}
