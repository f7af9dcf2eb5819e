use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use stethogate::features::{mfcc, MfccConfig};
use stethogate::noise_gate::{flag_noisy_frames, gate_recording, GateConfig};
use stethogate::objective::{supervised_contrastive_loss, EmbeddingBatch};
use stethogate::preprocess::{bandpass, PreprocessConfig};
use stethogate::synth::synth_subject;
use stethogate::Label;

const FS: u32 = 4000;

fn gate(c: &mut Criterion) {
    let rec = synth_subject("B", Label::Cad, FS, 60.0, 72.0, 7).unwrap();
    let x = rec.channels()[0].samples.clone();
    c.bench_function("flag_noisy_frames 60 s", |b| {
        b.iter(|| flag_noisy_frames(black_box(&x), FS, 2.5, 2.5).unwrap())
    });
    let cfg = GateConfig::default();
    c.bench_function("gate_recording 5 ch x 60 s", |b| {
        b.iter(|| gate_recording(black_box(&rec), &cfg).unwrap())
    });
}

fn filter(c: &mut Criterion) {
    let rec = synth_subject("B", Label::Nor, FS, 60.0, 72.0, 8).unwrap();
    let x = rec.channels()[0].samples.clone();
    let cfg = PreprocessConfig::default();
    c.bench_function("bandpass filtfilt 60 s", |b| b.iter(|| bandpass(black_box(&x), FS, &cfg).unwrap()));
}

fn features(c: &mut Criterion) {
    let rec = synth_subject("B", Label::Nor, FS, 10.0, 72.0, 9).unwrap();
    let x = rec.channels()[0].samples[..4 * FS as usize].to_vec();
    let cfg = MfccConfig::default();
    c.bench_function("mfcc 4 s fragment", |b| b.iter(|| mfcc(black_box(&x), FS, &cfg).unwrap()));
}

fn loss(c: &mut Criterion) {
    let n = 64;
    let d = 128;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..d).map(|k| ((i * 31 + k * 7) % 17) as f64 - 8.0 + 0.01 * i as f64).collect())
        .collect();
    let labels = (0..n).map(|i| if i % 2 == 0 { Label::Cad } else { Label::Nor }).collect();
    let batch = EmbeddingBatch::new(rows, labels).unwrap();
    c.bench_function("contrastive loss 64 x 128", |b| {
        b.iter(|| supervised_contrastive_loss(black_box(&batch), 0.805).unwrap())
    });
}

criterion_group!(kernels, gate, filter, features, loss);
criterion_main!(kernels);
