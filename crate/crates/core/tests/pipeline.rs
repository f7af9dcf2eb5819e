use std::fs;
use std::path::{Path, PathBuf};

use stethogate::features::{FeatureReader, INDEX_HEADER};
use stethogate::intervals::{Interval, IntervalSet};
use stethogate::pipeline::{
    channel_file, cmd_condition, cmd_evaluate, cmd_featurize, cmd_synth, PipelineConfig, Split,
    SubjectStatus, MANIFEST_FILE,
};
use stethogate::synth::{inject_noise, synth_subject, EventKind, EventTarget, NoiseEvent};
use stethogate::wav::{write_wav, WavEncoding};
use stethogate::{Label, Recording};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        seed: 11,
        synth_subjects: 10,
        synth_duration: 20.0,
        synth_events: 1,
        f_base: 10,
        ..PipelineConfig::default()
    }
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Writes `recs` as single-take subjects plus a manifest in `dir`.
fn write_cohort(dir: &Path, recs: &[Recording]) -> PathBuf {
    let mut manifest = String::new();
    for rec in recs {
        let sdir = dir.join(rec.subject_id());
        fs::create_dir_all(&sdir).unwrap();
        for ch in rec.channels() {
            let name = channel_file(ch.kind);
            write_wav(sdir.join(&name), rec.fs(), &ch.samples, WavEncoding::Float32).unwrap();
            manifest += &format!("{}\t{}\t1\t{}\t{}/{name}\n", rec.subject_id(), rec.label(), ch.kind, rec.subject_id());
        }
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

#[test]
fn synth_writes_subjects_and_is_reproducible() {
    let cfg = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summary = cmd_synth(&cfg, a.path()).unwrap();
    cmd_synth(&cfg, b.path()).unwrap();
    assert_eq!(summary.subjects, 10);
    assert_eq!(summary.cad, 5);
    let dirs = fs::read_dir(a.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 10);
    assert!(a.path().join(MANIFEST_FILE).exists());
    assert_eq!(tree_bytes(a.path()), tree_bytes(b.path()));
}

#[test]
fn synth_into_a_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    assert!(matches!(cmd_synth(&small_config(), &file.join("sub")), Err(stethogate::Error::Io(_))));
}

#[test]
fn condition_reports_rejection_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let clean = synth_subject("CLEAN", Label::Nor, 4000, 60.0, 72.0, 1).unwrap();
    let base = synth_subject("NOISY", Label::Cad, 4000, 60.0, 72.0, 2).unwrap();
    let friction = NoiseEvent {
        target: EventTarget::Hm(2),
        onset: 25.0,
        duration: 10.0,
        gain: 6.0,
        kind: EventKind::Friction,
    };
    let (noisy, _) = inject_noise(&base, &[friction], 3).unwrap();
    let missing = synth_subject("MISSING", Label::Nor, 4000, 20.0, 72.0, 4).unwrap();
    let manifest = write_cohort(dir.path(), &[clean, noisy, missing]);
    fs::remove_file(dir.path().join("MISSING/HM3.wav")).unwrap();

    let out = dir.path().join("cond");
    let summary = cmd_condition(&manifest, &PipelineConfig::default(), &out).unwrap();
    let get = |id: &str| summary.entries.iter().find(|e| e.subject_id == id).unwrap();

    let c = get("CLEAN");
    assert_eq!(c.status, SubjectStatus::Ok);
    assert!(c.rejected_fraction >= 2.0 / 60.0 - 1e-12);
    assert!(c.rejected_fraction < 2.0 / 60.0 + 0.02, "{}", c.rejected_fraction);

    let n = get("NOISY");
    assert_eq!(n.status, SubjectStatus::Ok);
    assert!(n.rejected_fraction >= 10.0 / 60.0, "{}", n.rejected_fraction);

    let m = get("MISSING");
    assert_eq!(m.status, SubjectStatus::Failed);
    assert!(m.detail.contains("HM3.wav"), "{}", m.detail);

    for name in ["clean.txt", "meta.txt", "HM1.wav", "NM4.wav"] {
        assert!(out.join("CLEAN").join(name).exists(), "{name}");
    }
    assert!(out.join("summary.tsv").exists());
}

#[test]
fn all_noise_subject_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    // five 2 s takes: the join and edge seconds cover everything
    let rec = synth_subject("JOINED", Label::Cad, 4000, 10.0, 72.0, 5).unwrap();
    let joined = Recording::new("JOINED", Label::Cad, 4000, rec.channels().to_vec(), vec![8000, 16000, 24000, 32000])
        .unwrap();
    let mut manifest = String::new();
    let sdir = dir.path().join("JOINED");
    fs::create_dir_all(&sdir).unwrap();
    for take in 0..5 {
        for ch in joined.channels() {
            let name = format!("t{take}_{}", channel_file(ch.kind));
            let part = &ch.samples[take * 8000..(take + 1) * 8000];
            write_wav(sdir.join(&name), 4000, part, WavEncoding::Float32).unwrap();
            manifest += &format!("JOINED\tCAD\t{take}\t{}\tJOINED/{name}\n", ch.kind);
        }
    }
    fs::write(dir.path().join("m.tsv"), manifest).unwrap();
    let summary = cmd_condition(&dir.path().join("m.tsv"), &PipelineConfig::default(), &dir.path().join("c")).unwrap();
    assert_eq!(summary.entries[0].status, SubjectStatus::Skipped);
    assert_eq!(summary.entries[0].rejected_fraction, 1.0);
}

#[test]
fn featurize_balances_classes_and_excludes_short_subjects() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    let cond = dir.path().join("cond");
    let feat = dir.path().join("feat");
    cmd_synth(&cfg, &raw).unwrap();
    let summary = cmd_condition(&raw.join(MANIFEST_FILE), &cfg, &cond).unwrap();
    assert!(summary.entries.iter().all(|e| e.status == SubjectStatus::Ok));

    let out = cmd_featurize(&cond, &cfg, &feat).unwrap();
    assert!(out.excluded.is_empty());
    let train_cad = out.count(Split::Train, Label::Cad).fragments as f64;
    let train_nor = out.count(Split::Train, Label::Nor).fragments as f64;
    assert!((train_cad - train_nor).abs() <= 0.01 * train_cad.max(train_nor));
    for split in [Split::Val, Split::Test] {
        for label in [Label::Cad, Label::Nor] {
            let c = out.count(split, label);
            assert_eq!(c.fragments, c.subjects * cfg.f_base);
        }
    }

    let idx = fs::read_to_string(feat.join("train.idx")).unwrap();
    assert_eq!(idx.lines().next().unwrap(), INDEX_HEADER);
    let mut reader = FeatureReader::open(feat.join("train.feat")).unwrap();
    let first = reader.read_next().unwrap().unwrap();
    assert_eq!(first.matrix.frames, 97);
    assert_eq!(first.matrix.dims, 512);
    assert_eq!(first.config_hash, cfg.hash());

    // a subject whose clean set has no 4 s run is excluded on re-run
    let victim = &summary.entries[0].subject_id;
    let clean_path = cond.join(victim).join("clean.txt");
    let text = fs::read_to_string(&clean_path).unwrap();
    let (_, fs_hz, set) = IntervalSet::from_text(text.as_bytes()).unwrap();
    let short = IntervalSet::from_intervals(set.domain_len(), [Interval::new(8000, 15999), Interval::new(40000, 47999)]).unwrap();
    fs::write(&clean_path, short.to_text(victim, fs_hz)).unwrap();
    let out = cmd_featurize(&cond, &cfg, &dir.path().join("feat2")).unwrap();
    assert_eq!(out.excluded.len(), 1);
    assert_eq!(&out.excluded[0].0, victim);
    assert!(out.members.iter().all(|m| &m.subject_id != victim));
}

#[test]
fn evaluate_accepts_index_files_as_truth() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    cmd_synth(&cfg, &dir.path().join("raw")).unwrap();
    cmd_condition(&dir.path().join("raw").join(MANIFEST_FILE), &cfg, &dir.path().join("cond")).unwrap();
    cmd_featurize(&dir.path().join("cond"), &cfg, &dir.path().join("feat")).unwrap();
    let idx = dir.path().join("feat/test.idx");
    let preds: String = fs::read_to_string(&idx)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            format!("{} {} {}\n", f[0], f[1], f[2])
        })
        .collect();
    fs::write(dir.path().join("pred.txt"), preds).unwrap();
    let out = cmd_evaluate(&dir.path().join("pred.txt"), &idx, &dir.path().join("eval")).unwrap();
    assert_eq!(out.fragment.acc, 1.0);
    assert_eq!(out.subject.mcc, 1.0);
}
