//! Hybrid-contrastive training objective.

use crate::error::{Error, Result};
use crate::recording::Label;

/// Embeddings `z_i` (rows) with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    rows: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl EmbeddingBatch {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Contract("a batch needs at least two embeddings".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::incompatible(format!(
                "{} embeddings but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::incompatible("embeddings must share a positive dimension"));
        }
        Ok(Self { rows, labels })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Copy with one coordinate replaced; used for finite differences.
    pub fn with_value(&self, i: usize, k: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.rows[i][k] = value;
        out
    }
}

/// Weights of the three objective terms plus the contrastive temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Cross-entropy weight.
    pub alpha: f64,
    /// Contrastive weight.
    pub beta: f64,
    /// Center-loss weight.
    pub lambda_c: f64,
    pub temperature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.7235,
            beta: 0.9807,
            lambda_c: 0.00281,
            temperature: 0.8050,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::config("temperature must be positive"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.lambda_c < 0.0 {
            return Err(Error::config("loss weights must be non-negative"));
        }
        Ok(())
    }
}

/// One center per class, indexed by [`Label::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCenters {
    pub centers: [Vec<f64>; 2],
}

impl ClassCenters {
    pub fn new(nor: Vec<f64>, cad: Vec<f64>) -> Self {
        Self { centers: [nor, cad] }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![0.0; dim])
    }

    pub fn get(&self, label: Label) -> &[f64] {
        &self.centers[label.index()]
    }
}

/// Whether the anchor itself appears in the contrastive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfTerm {
    /// Denominator sums over every sample of the batch, anchor included.
    #[default]
    Include,
    /// Denominator skips the anchor.
    Exclude,
}

/// Cosine similarity matrix of the L2-normalised rows.
pub fn cosine_similarity_matrix(batch: &EmbeddingBatch) -> Result<Vec<Vec<f64>>> {
    let unit = batch
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::degenerate(format!("embedding {i} has zero or non-finite norm")));
            }
            Ok(r.iter().map(|v| v / norm).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let n = unit.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let dot = if i == j {
                1.0
            } else {
                unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum()
            };
            s[i][j] = dot;
            s[j][i] = dot;
        }
    }
    Ok(s)
}

/// Supervised contrastive loss with the anchor kept in the denominator.
pub fn supervised_contrastive_loss(batch: &EmbeddingBatch, temperature: f64) -> Result<f64> {
    supervised_contrastive_loss_with(batch, temperature, SelfTerm::Include)
}

/// Mean over anchors of the mean negative log-probability of each positive
/// partner, with probabilities from a softmax over `S_ik / temperature`.
pub fn supervised_contrastive_loss_with(
    batch: &EmbeddingBatch,
    temperature: f64,
    self_term: SelfTerm,
) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::config("temperature must be positive"));
    }
    let labels = batch.labels();
    let n = batch.len();
    for (i, &y) in labels.iter().enumerate() {
        if !labels.iter().enumerate().any(|(j, &l)| j != i && l == y) {
            return Err(Error::Contract(format!(
                "sample {i} ({y}) has no positive partner in the batch"
            )));
        }
    }
    let s = cosine_similarity_matrix(batch)?;
    let mut total = 0.0;
    for i in 0..n {
        let logits: Vec<f64> = s[i].iter().map(|v| v / temperature).collect();
        let in_denominator = |k: usize| self_term == SelfTerm::Include || k != i;
        let max = (0..n)
            .filter(|&k| in_denominator(k))
            .map(|k| logits[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let log_denominator = max
            + (0..n)
                .filter(|&k| in_denominator(k))
                .map(|k| (logits[k] - max).exp())
                .sum::<f64>()
                .ln();
        let (sum, count) = (0..n)
            .filter(|&j| j != i && labels[j] == labels[i])
            .fold((0.0, 0usize), |(acc, c), j| (acc + logits[j] - log_denominator, c + 1));
        total += sum / count as f64;
    }
    Ok(-total / n as f64)
}

/// Mean squared Euclidean distance of each embedding to its class center.
pub fn center_loss(batch: &EmbeddingBatch, centers: &ClassCenters) -> Result<f64> {
    let d = batch.dim();
    if centers.centers.iter().any(|c| c.len() != d) {
        return Err(Error::incompatible(format!(
            "center dimension does not match embedding dimension {d}"
        )));
    }
    let sum: f64 = batch
        .rows()
        .iter()
        .zip(batch.labels())
        .map(|(z, &y)| {
            z.iter()
                .zip(centers.get(y))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / batch.len() as f64)
}

/// Analytic gradient of [`center_loss`] with respect to the embeddings.
pub fn center_loss_gradient(batch: &EmbeddingBatch, centers: &ClassCenters) -> Vec<Vec<f64>> {
    let scale = 2.0 / batch.len() as f64;
    batch
        .rows()
        .iter()
        .zip(batch.labels())
        .map(|(z, &y)| {
            z.iter()
                .zip(centers.get(y))
                .map(|(a, b)| scale * (a - b))
                .collect()
        })
        .collect()
}

/// Mean negative log-softmax probability of the true class.
pub fn cross_entropy(logits: &[[f64; 2]], labels: &[Label]) -> Result<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::incompatible(format!(
            "{} logit rows for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Contract("logits must be finite".into()));
    }
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(row, &y)| {
            let (hi, lo) = if row[0] >= row[1] { (row[0], row[1]) } else { (row[1], row[0]) };
            let lse = hi + (lo - hi).exp().ln_1p();
            lse - row[y.index()]
        })
        .sum();
    Ok(sum / logits.len() as f64)
}

/// Weighted components of the hybrid objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub contrastive: f64,
    pub cross_entropy: f64,
    pub center: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `beta * contrastive + alpha * ce + lambda_c * center`.
    pub fn combine(contrastive: f64, cross_entropy: f64, center: f64, w: &LossWeights) -> Self {
        Self {
            contrastive,
            cross_entropy,
            center,
            total: w.beta * contrastive + w.alpha * cross_entropy + w.lambda_c * center,
        }
    }
}

pub fn hybrid_loss(
    batch: &EmbeddingBatch,
    logits: &[[f64; 2]],
    centers: &ClassCenters,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    if logits.len() != batch.len() {
        return Err(Error::incompatible("logits and embeddings differ in batch size"));
    }
    let contrastive = supervised_contrastive_loss(batch, weights.temperature)?;
    let ce = cross_entropy(logits, batch.labels())?;
    let center = center_loss(batch, centers)?;
    Ok(LossBreakdown::combine(contrastive, ce, center, weights))
}

/// Central-difference gradient of `f` with respect to every embedding
/// coordinate.
pub fn central_difference_gradient<F>(batch: &EmbeddingBatch, step: f64, f: F) -> Vec<Vec<f64>>
where
    F: Fn(&EmbeddingBatch) -> f64,
{
    (0..batch.len())
        .map(|i| {
            (0..batch.dim())
                .map(|k| {
                    let x = batch.rows()[i][k];
                    let up = f(&batch.with_value(i, k, x + step));
                    let down = f(&batch.with_value(i, k, x - step));
                    (up - down) / (2.0 * step)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: Vec<Vec<f64>>, labels: &[usize]) -> EmbeddingBatch {
        EmbeddingBatch::new(rows, labels.iter().map(|&l| Label::from_index(l).unwrap()).collect())
            .unwrap()
    }

    #[test]
    fn orthogonal_rows_give_identity() {
        let b = batch(vec![vec![2.0, 0.0], vec![0.0, 3.0]], &[0, 1]);
        assert_eq!(cosine_similarity_matrix(&b).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn equal_rows_give_ones() {
        let b = batch(vec![vec![1.0, 2.0]; 3], &[0, 0, 1]);
        for row in cosine_similarity_matrix(&b).unwrap() {
            for v in row {
                assert!((v - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_row_is_degenerate() {
        let b = batch(vec![vec![0.0, 0.0], vec![1.0, 0.0]], &[0, 0]);
        assert!(matches!(cosine_similarity_matrix(&b), Err(Error::Degenerate(_))));
    }

    #[test]
    fn identical_embeddings_give_log_n() {
        for n in [2usize, 5, 16] {
            let b = batch(vec![vec![0.3, -0.4, 1.2]; n], &vec![1; n]);
            let l = supervised_contrastive_loss(&b, 0.805).unwrap();
            assert!((l - (n as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_positive_is_a_contract_error() {
        let b = batch(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[0, 0, 1]);
        assert!(matches!(supervised_contrastive_loss(&b, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn excluding_self_lowers_the_loss() {
        let b = batch(
            vec![vec![1.0, 0.1], vec![0.9, 0.2], vec![-1.0, 0.3], vec![-0.8, -0.1]],
            &[0, 0, 1, 1],
        );
        let with = supervised_contrastive_loss_with(&b, 0.5, SelfTerm::Include).unwrap();
        let without = supervised_contrastive_loss_with(&b, 0.5, SelfTerm::Exclude).unwrap();
        assert!(without < with);
    }

    #[test]
    fn center_loss_examples() {
        let b = batch(vec![vec![1.0, 2.0], vec![3.0, 4.0]], &[0, 1]);
        let c = ClassCenters::new(vec![1.0, 2.0], vec![3.0, 4.0]);
        assert_eq!(center_loss(&b, &c).unwrap(), 0.0);
        // one sample at distance 2 from its center (the other sits on its own)
        let b = batch(vec![vec![1.0, 4.0], vec![3.0, 4.0]], &[0, 1]);
        assert_eq!(center_loss(&b, &c).unwrap() * 2.0, 4.0);
        assert!(center_loss(&b, &ClassCenters::zeros(3)).is_err());
    }

    #[test]
    fn cross_entropy_limits() {
        let ce = cross_entropy(&[[0.3, 0.3], [-2.0, -2.0]], &[Label::Cad, Label::Nor]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        let ce = cross_entropy(&[[0.0, 50.0]], &[Label::Cad]).unwrap();
        assert!(ce < 1e-20);
        assert!(cross_entropy(&[[f64::NAN, 0.0]], &[Label::Cad]).is_err());
    }

    #[test]
    fn published_weights_sum() {
        let total = LossBreakdown::combine(1.0, 1.0, 1.0, &LossWeights::default()).total;
        assert!((total - 1.70701).abs() < 1e-12);
        let zero = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            lambda_c: 0.0,
            temperature: 1.0,
        };
        assert_eq!(LossBreakdown::combine(3.0, 2.0, 5.0, &zero).total, 0.0);
    }

    #[test]
    fn center_gradient_matches_central_differences() {
        let b = batch(
            vec![vec![0.3, -1.2, 0.5], vec![1.1, 0.4, -0.7], vec![-0.2, 0.9, 0.1]],
            &[0, 1, 1],
        );
        let c = ClassCenters::new(vec![0.1, 0.2, 0.3], vec![-0.5, 0.0, 0.5]);
        let analytic = center_loss_gradient(&b, &c);
        let numeric = central_difference_gradient(&b, 1e-5, |x| center_loss(x, &c).unwrap());
        for (ra, rn) in analytic.iter().zip(&numeric) {
            for (a, n) in ra.iter().zip(rn) {
                assert!((a - n).abs() <= 1e-4 * a.abs().max(1e-8));
            }
        }
    }
}
