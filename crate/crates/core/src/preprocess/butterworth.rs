//! Butterworth bandpass design (bilinear transform with pre-warped band
//! edges) as cascaded second-order sections, and zero-phase application.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = self.a[0] + z_inv * (self.a[1] + z_inv * self.a[2]);
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form II state that a unit step settles into.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * y;
        let z1 = self.b[1] - self.a[1] * y + z2;
        [z1, z2]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex frequency response of one pass at `freq` Hz.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude of the forward-backward (zero-phase) response, `|H|^2`.
    pub fn zero_phase_gain(&self, freq: f64, fs: f64) -> f64 {
        self.response(freq, fs).norm_sqr()
    }

    /// Causal filtering with the given initial per-section states.
    pub fn filter_with_state(&self, x: &[f64], state: &mut [[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in &mut y {
                let input = *v;
                let out = s.b[0] * input + z[0];
                z[0] = s.b[1] * input - s.a[1] * out + z[1];
                z[1] = s.b[2] * input - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut state = vec![[0.0; 2]; self.sections.len()];
        self.filter_with_state(x, &mut state)
    }

    /// Per-section steady-state for a unit step at the cascade input.
    pub fn step_states(&self) -> Vec<[f64; 2]> {
        let mut gain = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let scaled = [z1 * gain, z2 * gain];
                gain *= s.dc_gain();
                scaled
            })
            .collect()
    }

    /// Forward-backward filtering with odd-reflection padding and
    /// step-response initial conditions. Output length equals input length.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(x.len() - 1);
        let mut ext = Vec::with_capacity(x.len() + 2 * pad);
        let (first, last) = (x[0], x[x.len() - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[x.len() - 1 - i]));

        let zi = self.step_states();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let mut state = scaled(ext[0]);
        let mut y = self.filter_with_state(&ext, &mut state);
        y.reverse();
        let mut state = scaled(y[0]);
        let mut y = self.filter_with_state(&y, &mut state);
        y.reverse();
        y[pad..pad + x.len()].to_vec()
    }

    /// Coefficient dump, one section per line: `b0 b1 b2 a0 a1 a2`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            let _ = writeln!(
                out,
                "{:e} {:e} {:e} {:e} {:e} {:e}",
                s.b[0], s.b[1], s.b[2], s.a[0], s.a[1], s.a[2]
            );
        }
        out
    }
}

/// Designs a Butterworth bandpass whose lowpass prototype has `order`
/// poles, giving `order` second-order sections.
pub fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::config("filter order must be at least 1"));
    }
    if !(low > 0.0 && low < high && high < fs / 2.0) {
        return Err(Error::config(format!(
            "band {low}-{high} Hz invalid for fs = {fs} Hz"
        )));
    }
    let n = order as f64;
    let fs2 = 2.0 * fs;
    let w_low = fs2 * (PI * low / fs).tan();
    let w_high = fs2 * (PI * high / fs).tan();
    let bw = w_high - w_low;
    let w0_sq = w_low * w_high;

    // analog lowpass prototype poles on the left unit semicircle
    let proto = (0..order).map(|k| {
        let m = -(n - 1.0) + 2.0 * k as f64;
        -Complex64::from_polar(1.0, PI * m / (2.0 * n))
    });

    // lowpass -> bandpass: each prototype pole splits into two
    let mut analog = Vec::with_capacity(2 * order);
    for p in proto {
        let half = p * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        analog.push(half + root);
        analog.push(half - root);
    }

    // bilinear map; the `order` zeros at s = 0 land on z = 1 and the
    // `order` zeros at infinity on z = -1
    let mut gain = Complex64::new((bw * fs2).powi(order as i32), 0.0);
    let mut digital = Vec::with_capacity(analog.len());
    for &p in &analog {
        gain /= fs2 - p;
        digital.push((fs2 + p) / (fs2 - p));
    }
    let gain = gain.re;

    let sections = pair_poles(&digital)?
        .into_iter()
        .enumerate()
        .map(|(i, a)| Biquad {
            b: if i == 0 {
                [gain, 0.0, -gain]
            } else {
                [1.0, 0.0, -1.0]
            },
            a,
        })
        .collect();
    Ok(Sos { sections })
}

/// Groups poles into real-coefficient quadratics `[1, a1, a2]`.
fn pair_poles(poles: &[Complex64]) -> Result<Vec<[f64; 3]>> {
    let tol = 1e-9;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    let conj_count = poles.iter().filter(|p| p.im < -tol).count();
    if conj_count != complex.len() || real.len() % 2 != 0 {
        return Err(Error::Invariant("poles do not form conjugate pairs".into()));
    }
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);
    let mut out: Vec<[f64; 3]> = real
        .chunks_exact(2)
        .map(|r| [1.0, -(r[0] + r[1]), r[0] * r[1]])
        .collect();
    out.extend(complex.iter().map(|p| [1.0, -2.0 * p.re, p.norm_sqr()]));
    Ok(out)
}
