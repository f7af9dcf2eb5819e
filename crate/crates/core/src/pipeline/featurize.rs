//! Fragment planning, MFCC extraction and per-split feature files.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use super::condition::{ConditionSummary, SubjectMeta, SUMMARY_FILE};
use super::splits::{assign_splits, Split, SplitMember};
use super::{channel_file, read_text, write_text, PipelineConfig};
use crate::error::{Error, Result};
use crate::features::{
    fragment_features, BlockAccumulator, BlockStandardizer, FeatureMatrix, FeatureRecord,
    FeatureWriter, MfccExtractor,
};
use crate::intervals::IntervalSet;
use crate::recording::{Channel, Label, MicKind, Recording};
use crate::segmenter::{class_targets, clean_segments, extract_plan, plan_subject, ClassTargets, SegmentPlan};
use crate::wav::load_wav;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCount {
    pub split: Split,
    pub label: Label,
    pub subjects: usize,
    pub fragments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeSummary {
    pub config_hash: String,
    pub members: Vec<SplitMember>,
    /// Subjects left out, with the reason.
    pub excluded: Vec<(String, String)>,
    /// Per-subject fragment budgets of the training split.
    pub train_targets: ClassTargets,
    pub counts: Vec<SplitCount>,
    pub standardizer: BlockStandardizer,
}

impl FeaturizeSummary {
    pub fn count(&self, split: Split, label: Label) -> &SplitCount {
        self.counts
            .iter()
            .find(|c| c.split == split && c.label == label)
            .expect("every split and class is counted")
    }
}

struct Subject {
    member: SplitMember,
    dir: PathBuf,
    meta: SubjectMeta,
    clean: IntervalSet,
}

impl Subject {
    /// Heart-mic channels only; the noise mic is a gating reference and is
    /// not part of the fused features.
    fn recording(&self) -> Result<Recording> {
        let channels = self
            .meta
            .channels
            .iter()
            .filter(|k| k.kind == MicKind::Hm)
            .map(|&kind| {
                let (fs, samples) = load_wav(self.dir.join(channel_file(kind)))?;
                if fs != self.meta.fs || samples.len() != self.meta.samples {
                    return Err(Error::format(format!(
                        "{}: conditioned channel {kind} does not match meta.txt",
                        self.meta.subject_id
                    )));
                }
                Ok(Channel { kind, samples })
            })
            .collect::<Result<Vec<_>>>()?;
        if channels.is_empty() {
            return Err(Error::format(format!(
                "{}: no conditioned heart-mic channel",
                self.meta.subject_id
            )));
        }
        Recording::new(self.meta.subject_id.clone(), self.meta.label, self.meta.fs, channels, Vec::new())
    }

    fn features(
        &self,
        total: usize,
        cfg: &PipelineConfig,
        extractor: &MfccExtractor,
    ) -> Result<(SegmentPlan, Vec<FeatureMatrix>)> {
        let rec = self.recording()?;
        let seg = cfg.segment();
        let plan = plan_subject(&rec, &self.clean, total, &seg)?;
        let feats = extract_plan(&rec, &plan, &seg)?
            .iter()
            .map(|f| fragment_features(extractor, f))
            .collect::<Result<Vec<_>>>()?;
        Ok((plan, feats))
    }
}

/// Plans, extracts and standardises fragment features for the configured
/// fold.
///
/// Training subjects get class-balanced budgets from the training class
/// counts; validation and test subjects all get `f_base` fragments.
/// Standardisation statistics come from the training split only. Writes
/// `<split>.feat` / `<split>.idx` for train, val and test, plus
/// `norm_stats.txt`, `splits.tsv`, `plans.tsv` and `featurize_summary.tsv`.
pub fn cmd_featurize(conditioned: &Path, cfg: &PipelineConfig, out: &Path) -> Result<FeaturizeSummary> {
    cfg.validate()?;
    let summary = ConditionSummary::from_text(&read_text(&conditioned.join(SUMMARY_FILE))?)?;
    let hash = cfg.hash();
    let seg = cfg.segment();
    let min_len = seg.min_segment.max(seg.frag_len);

    let mut excluded = Vec::new();
    let mut eligible = Vec::new();
    for e in &summary.entries {
        if e.status != super::SubjectStatus::Ok {
            excluded.push((e.subject_id.clone(), format!("conditioning {}", e.status)));
            continue;
        }
        let dir = conditioned.join(&e.subject_id);
        let meta = SubjectMeta::load(&dir.join("meta.txt"))?;
        let clean_path = dir.join("clean.txt");
        let file = fs::File::open(&clean_path).map_err(|err| {
            Error::Io(std::io::Error::new(err.kind(), format!("{}: {err}", clean_path.display())))
        })?;
        let (sid, fs_clean, clean) = IntervalSet::from_text(BufReader::new(file))?;
        if sid != meta.subject_id || fs_clean != meta.fs || clean.domain_len() != meta.samples {
            return Err(Error::format(format!("{}: clean.txt does not match meta.txt", e.subject_id)));
        }
        if clean_segments(&clean, meta.fs, min_len).is_empty() {
            warn!("subject {} excluded: no clean run of {min_len} s", e.subject_id);
            excluded.push((e.subject_id.clone(), format!("no clean run of {min_len} s")));
            continue;
        }
        eligible.push((dir, meta, clean));
    }
    let fs = match eligible.first() {
        Some((_, m, _)) => m.fs,
        None => return Err(Error::degenerate("no subject has a usable clean segment")),
    };
    if eligible.iter().any(|(_, m, _)| m.fs != fs) {
        return Err(Error::incompatible("conditioned subjects differ in sample rate"));
    }

    let ids: Vec<(String, Label)> = eligible
        .iter()
        .map(|(_, m, _)| (m.subject_id.clone(), m.label))
        .collect();
    let members = assign_splits(&ids, cfg.folds, cfg.fold, cfg.seed)?;
    let subjects: Vec<Subject> = members
        .iter()
        .cloned()
        .zip(eligible)
        .map(|(member, (dir, meta, clean))| Subject {
            member,
            dir,
            meta,
            clean,
        })
        .collect();

    let n_train = |label| {
        subjects
            .iter()
            .filter(|s| s.member.split == Split::Train && s.member.label == label)
            .count()
    };
    let (n_cad, n_nor) = (n_train(Label::Cad), n_train(Label::Nor));
    if n_cad == 0 || n_nor == 0 {
        return Err(Error::degenerate(format!(
            "training split needs both classes (CAD {n_cad}, NOR {n_nor})"
        )));
    }
    let train_targets = class_targets(n_cad, n_nor, cfg.f_base)?;
    let budget = |s: &Subject| match s.member.split {
        Split::Train => train_targets.for_label(s.member.label),
        Split::Val | Split::Test => cfg.f_base,
    };

    let mfcc_cfg = cfg.mfcc();
    let extractor = MfccExtractor::new(&mfcc_cfg, fs)?;
    fs::create_dir_all(out)?;

    // First pass: training statistics, merged in subject order.
    let partials = subjects
        .par_iter()
        .filter(|s| s.member.split == Split::Train)
        .map(|s| {
            let (_, feats) = s.features(budget(s), cfg, &extractor)?;
            let mut acc = BlockAccumulator::new(mfcc_cfg.n_mfcc)?;
            for f in &feats {
                acc.add(f)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = BlockAccumulator::new(mfcc_cfg.n_mfcc)?;
    for p in &partials {
        acc.merge(p)?;
    }
    let standardizer = acc.finish()?;
    write_text(&out.join("norm_stats.txt"), &standardizer.to_text())?;

    // Second pass: standardised features, written split by split in
    // subject order, a worker-sized chunk at a time.
    let chunk = rayon::current_num_threads().max(1);
    let mut counts = Vec::new();
    let mut plans_text = format!("# config={hash}\n# subject_id\tstart\tend\tfragments\n");
    for split in Split::ALL {
        let mut writer = FeatureWriter::create(
            out.join(format!("{split}.feat")),
            out.join(format!("{split}.idx")),
        )?;
        let mut per_label = [(0usize, 0usize); 2];
        let members: Vec<&Subject> = subjects.iter().filter(|s| s.member.split == split).collect();
        for group in members.chunks(chunk) {
            let done = group
                .par_iter()
                .map(|s| {
                    let (plan, feats) = s.features(budget(s), cfg, &extractor)?;
                    let records = feats
                        .into_iter()
                        .enumerate()
                        .map(|(i, m)| {
                            Ok(FeatureRecord {
                                subject_id: s.member.subject_id.clone(),
                                label: s.member.label,
                                start: m.provenance.start,
                                fragment_index: i,
                                fs,
                                config_hash: hash.clone(),
                                matrix: standardizer.apply(&m)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((plan, records))
                })
                .collect::<Result<Vec<_>>>()?;
            for (plan, records) in done {
                let slot = &mut per_label[plan.label.index()];
                slot.0 += 1;
                slot.1 += records.len();
                for line in plan.to_text().lines() {
                    let _ = writeln!(plans_text, "{}", line.replace(' ', "\t"));
                }
                for r in &records {
                    writer.write(r)?;
                }
            }
        }
        writer.finish()?;
        for label in [Label::Cad, Label::Nor] {
            let (subjects, fragments) = per_label[label.index()];
            info!("{split} {label}: {subjects} subjects, {fragments} fragments");
            counts.push(SplitCount {
                split,
                label,
                subjects,
                fragments,
            });
        }
    }
    write_text(&out.join("plans.tsv"), &plans_text)?;

    let mut splits_text = format!("# config={hash}\n# subject_id\tlabel\tfold\tsplit\n");
    for m in &members {
        let _ = writeln!(splits_text, "{}\t{}\t{}\t{}", m.subject_id, m.label, m.fold, m.split);
    }
    write_text(&out.join("splits.tsv"), &splits_text)?;

    let mut report = format!(
        "# config={hash}\n# train targets: CAD {} NOR {}\n# split\tlabel\tsubjects\tfragments\n",
        train_targets.cad, train_targets.nor
    );
    for c in &counts {
        let _ = writeln!(report, "{}\t{}\t{}\t{}", c.split, c.label, c.subjects, c.fragments);
    }
    for (id, why) in &excluded {
        let _ = writeln!(report, "# excluded {id}: {why}");
    }
    write_text(&out.join("featurize_summary.tsv"), &report)?;

    Ok(FeaturizeSummary {
        config_hash: hash,
        members,
        excluded,
        train_targets,
        counts,
        standardizer,
    })
}
