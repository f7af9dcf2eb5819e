//! Synthetic cohort generation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{channel_file, write_text, PipelineConfig};
use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::manifest::{SubjectEntry, SubjectManifest, Take};
use crate::recording::Label;
use crate::synth::{inject_noise, random_events, synth_subject, EventKind, EventTarget, RNG_ALGORITHM};
use crate::wav::{write_wav, WavEncoding};

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub subjects: usize,
    pub cad: usize,
    pub manifest: PathBuf,
}

struct SubjectSpec {
    id: String,
    label: Label,
    seed: u64,
    heart_rate: f64,
}

/// Generates `synth_subjects` subjects under `out` and writes the manifest.
///
/// Per subject directory: one float WAV per take and channel, `events.tsv`
/// listing the injected events, and `truth.txt` with their union over the
/// concatenated takes.
pub fn cmd_synth(cfg: &PipelineConfig, out: &Path) -> Result<SynthSummary> {
    cfg.validate()?;
    if cfg.synth_subjects == 0 {
        return Err(Error::config("synth_subjects must be at least 1"));
    }
    fs::create_dir_all(out)?;
    let hash = cfg.hash();
    let n = cfg.synth_subjects;
    let n_cad = (n as f64 * cfg.synth_cad_fraction).round() as usize;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let specs: Vec<SubjectSpec> = (0..n)
        .map(|i| SubjectSpec {
            id: format!("S{:03}", i + 1),
            label: if i < n_cad { Label::Cad } else { Label::Nor },
            seed: master.random(),
            heart_rate: master.random_range(cfg.synth_hr_min..=cfg.synth_hr_max),
        })
        .collect();

    let entries = specs
        .par_iter()
        .map(|s| synth_one(s, cfg, &hash, out))
        .collect::<Result<Vec<_>>>()?;

    let manifest = SubjectManifest { entries };
    let path = out.join(MANIFEST_FILE);
    let text = format!(
        "# generator={RNG_ALGORITHM} seed={} config={hash}\n{}",
        cfg.seed,
        manifest.to_text(out)
    );
    write_text(&path, &text)?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    info!("synthesised {n} subjects ({n_cad} CAD) into {}", out.display());
    Ok(SynthSummary {
        subjects: n,
        cad: n_cad,
        manifest: path,
    })
}

fn synth_one(s: &SubjectSpec, cfg: &PipelineConfig, hash: &str, out: &Path) -> Result<SubjectEntry> {
    let dir = out.join(&s.id);
    fs::create_dir_all(&dir)?;
    let mut events_text = format!(
        "# generator={RNG_ALGORITHM} seed={} config={hash}\n# take\tonset\tduration\tgain\tkind\ttarget\n",
        s.seed
    );
    let mut takes = Vec::with_capacity(cfg.synth_takes);
    let mut truth = Vec::new();
    let mut offset = 0usize;
    for t in 1..=cfg.synth_takes {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(t as u64);
        let take_seed: u64 = rng.random();
        let rec = synth_subject(&s.id, s.label, cfg.synth_fs, cfg.synth_duration, s.heart_rate, take_seed)?;
        let events = random_events(&mut rng, cfg.synth_duration, cfg.synth_events);
        let (noisy, take_truth) = inject_noise(&rec, &events, take_seed)?;
        for e in &events {
            let kind = match e.kind {
                EventKind::Burst => "burst",
                EventKind::Friction => "friction",
            };
            let target = match e.target {
                EventTarget::HmAll => "HM_all".to_string(),
                EventTarget::Hm(i) => format!("HM:{i}"),
                EventTarget::Nm => "NM".to_string(),
            };
            let _ = writeln!(
                events_text,
                "{t}\t{:.6}\t{:.6}\t{:.4}\t{kind}\t{target}",
                e.onset, e.duration, e.gain
            );
        }
        truth.extend(
            take_truth
                .intervals()
                .iter()
                .map(|iv| Interval::new(iv.start + offset, iv.end + offset)),
        );
        offset += noisy.len();
        let mut channels = Vec::with_capacity(noisy.channels().len());
        for ch in noisy.channels() {
            let path = dir.join(format!("t{t}_{}", channel_file(ch.kind)));
            write_wav(&path, cfg.synth_fs, &ch.samples, WavEncoding::Float32)?;
            channels.push((ch.kind, path));
        }
        takes.push(Take {
            index: t as u32,
            channels,
        });
    }
    write_text(&dir.join("events.tsv"), &events_text)?;
    let truth = IntervalSet::from_intervals(offset, truth)?;
    write_text(&dir.join("truth.txt"), &truth.to_text(&s.id, cfg.synth_fs))?;
    Ok(SubjectEntry {
        subject_id: s.id.clone(),
        label: s.label,
        takes,
    })
}
