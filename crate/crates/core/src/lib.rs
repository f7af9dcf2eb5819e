//! Multichannel phonocardiogram noise gating, conditioning and feature
//! extraction.
//!
//! The crate turns per-subject multichannel stethoscope recordings into
//! class-balanced MFCC fragments:
//!
//! 1. [`noise_gate`] flags noisy frames by energy on the heart mics and the
//!    reference noise mic and keeps the complement as the clean set.
//! 2. [`preprocess`] removes spikes, bandpasses and k-peak normalises every
//!    channel.
//! 3. [`segmenter`] cuts fixed-length fragments out of clean segments with
//!    per-class budgets.
//! 4. [`features`] computes per-channel MFCCs and fuses them.
//!
//! [`objective`] holds the training loss and evaluation metrics shared with
//! the training side, [`synth`] generates seeded test cohorts, and
//! [`pipeline`] wires everything into restartable batch stages.

pub mod error;
pub mod features;
pub mod intervals;
pub mod manifest;
pub mod noise_gate;
pub mod objective;
pub mod pipeline;
pub mod preprocess;
pub mod recording;
pub mod segmenter;
pub mod stats;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use features::{FeatureMatrix, MfccConfig};
pub use intervals::{Interval, IntervalSet};
pub use manifest::SubjectManifest;
pub use noise_gate::GateConfig;
pub use objective::{EmbeddingBatch, EvalReport, LossWeights};
pub use pipeline::PipelineConfig;
pub use preprocess::PreprocessConfig;
pub use recording::{Channel, ChannelKind, Label, MicKind, Recording};
pub use segmenter::{Fragment, SegmentConfig, SegmentPlan};
