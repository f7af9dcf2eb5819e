//! Small order-statistics helpers shared by the gate and the spike remover.

/// Median of `values`; an even count averages the two middle elements.
/// Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some((sorted[mid - 1] + sorted[mid]) / 2.0)
    }
}

/// Converts a duration in seconds to a whole number of samples (nearest).
pub fn seconds_to_samples(seconds: f64, fs: u32) -> usize {
    (seconds * f64::from(fs)).round().max(0.0) as usize
}
