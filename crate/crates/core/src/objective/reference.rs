//! Direct double-loop evaluations of the objective, written straight from
//! the formulas without shared helpers, plus a seeded self-check that
//! compares them against the optimised implementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::loss::{self, ClassCenters, EmbeddingBatch, SelfTerm};
use super::metrics::{Confusion, EvalLevel, EvalReport};
use crate::error::Result;
use crate::recording::Label;

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in 0..a.len() {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub fn naive_contrastive(z: &[Vec<f64>], y: &[Label], tau: f64, self_term: SelfTerm) -> f64 {
    let n = z.len();
    let mut outer = 0.0;
    for i in 0..n {
        let mut denom = 0.0;
        for k in 0..n {
            if k == i && self_term == SelfTerm::Exclude {
                continue;
            }
            denom += (naive_cosine(&z[i], &z[k]) / tau).exp();
        }
        let mut inner = 0.0;
        let mut count = 0.0;
        for j in 0..n {
            if j != i && y[j] == y[i] {
                inner += ((naive_cosine(&z[i], &z[j]) / tau).exp() / denom).ln();
                count += 1.0;
            }
        }
        outer += inner / count;
    }
    -outer / n as f64
}

pub fn naive_center(z: &[Vec<f64>], y: &[Label], c: &ClassCenters) -> f64 {
    let mut sum = 0.0;
    for i in 0..z.len() {
        let center = c.get(y[i]);
        for k in 0..z[i].len() {
            sum += (z[i][k] - center[k]).powi(2);
        }
    }
    sum / z.len() as f64
}

pub fn naive_cross_entropy(logits: &[[f64; 2]], y: &[Label]) -> f64 {
    let mut sum = 0.0;
    for i in 0..logits.len() {
        let e0 = logits[i][0].exp();
        let e1 = logits[i][1].exp();
        sum -= (logits[i][y[i].index()].exp() / (e0 + e1)).ln();
    }
    sum / logits.len() as f64
}

/// Metrics computed from the four counts with the textbook formulas.
pub fn naive_metrics(tp: f64, tn: f64, fp: f64, fn_: f64) -> [f64; 7] {
    let safe = |n: f64, d: f64| if d == 0.0 { 0.0 } else { n / d };
    let tpr = safe(tp, tp + fn_);
    let tnr = safe(tn, tn + fp);
    let prec = safe(tp, tp + fp);
    let npv = safe(tn, tn + fn_);
    let f1p = safe(2.0 * prec * tpr, prec + tpr);
    let f1n = safe(2.0 * npv * tnr, npv + tnr);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = safe(tp * tn - fp * fn_, den.sqrt());
    [safe(tp + tn, tp + tn + fp + fn_), (tpr + tnr) / 2.0, tpr, tnr, f1p, f1n, mcc]
}

/// Random batch with both classes holding at least two samples.
pub fn random_batch(rng: &mut ChaCha8Rng, max_n: usize, max_d: usize) -> EmbeddingBatch {
    let n = rng.random_range(4..=max_n.max(4));
    let d = rng.random_range(1..=max_d.max(1));
    let mut labels: Vec<Label> = (0..n)
        .map(|_| if rng.random::<bool>() { Label::Cad } else { Label::Nor })
        .collect();
    labels[0] = Label::Cad;
    labels[1] = Label::Cad;
    labels[2] = Label::Nor;
    labels[3] = Label::Nor;
    let rows = (0..n)
        .map(|_| loop {
            let r: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            if r.iter().any(|v: &f64| v.abs() > 1e-3) {
                break r;
            }
        })
        .collect();
    EmbeddingBatch::new(rows, labels).expect("valid random batch")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub cases: usize,
    pub max_abs_err: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_abs_err <= self.tolerance
    }
}

/// Compare every loss and metric against its naive form on seeded random
/// inputs.
pub fn run_oracle_suite(seed: u64, batches: usize) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errs = [0.0f64; 5];
    for _ in 0..batches {
        let b = random_batch(&mut rng, 64, 32);
        let tau = rng.random_range(0.05..2.0);
        let d = b.dim();
        let centers = ClassCenters::new(
            (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
            (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
        );
        let logits: Vec<[f64; 2]> = (0..b.len())
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let s = loss::cosine_similarity_matrix(&b)?;
        for i in 0..b.len() {
            for j in 0..b.len() {
                let e = (s[i][j] - naive_cosine(&b.rows()[i], &b.rows()[j])).abs();
                errs[0] = errs[0].max(e);
            }
        }
        for (slot, term) in [(1, SelfTerm::Include), (2, SelfTerm::Exclude)] {
            let fast = loss::supervised_contrastive_loss_with(&b, tau, term)?;
            let slow = naive_contrastive(b.rows(), b.labels(), tau, term);
            errs[slot] = errs[slot].max((fast - slow).abs());
        }
        let e = loss::center_loss(&b, &centers)? - naive_center(b.rows(), b.labels(), &centers);
        errs[3] = errs[3].max(e.abs());
        let e = loss::cross_entropy(&logits, b.labels())? - naive_cross_entropy(&logits, b.labels());
        errs[4] = errs[4].max(e.abs());
    }
    let mut metric_err = 0.0f64;
    for _ in 0..batches * 10 {
        let c = Confusion {
            tp: rng.random_range(0..500),
            tn: rng.random_range(0..500),
            fp: rng.random_range(0..500),
            fn_: rng.random_range(0..500),
        };
        if c.total() == 0 {
            continue;
        }
        let r = EvalReport::from_confusion(c, EvalLevel::Fragment);
        let fast = [r.acc, r.uar, r.tpr, r.tnr, r.f1_pos, r.f1_neg, r.mcc];
        let slow = naive_metrics(c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
        for (a, b) in fast.iter().zip(slow) {
            metric_err = metric_err.max((a - b).abs());
        }
    }
    let names = ["cosine", "contrastive", "contrastive_exclude_self", "center", "cross_entropy"];
    let mut out: Vec<OracleCheck> = names
        .iter()
        .zip(errs)
        .map(|(&name, max_abs_err)| OracleCheck {
            name,
            cases: batches,
            max_abs_err,
            tolerance: 1e-12,
        })
        .collect();
    out.push(OracleCheck {
        name: "metrics",
        cases: batches * 10,
        max_abs_err: metric_err,
        tolerance: 1e-12,
    });
    Ok(out)
}
