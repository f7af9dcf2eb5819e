use std::fmt::Write as _;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Per channel-block standardisation: one mean and standard deviation per
/// block of `block` consecutive feature columns, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStandardizer {
    pub block: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Running per-block sums; merge partial accumulators in a fixed order to
/// keep results reproducible under parallel evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAccumulator {
    block: usize,
    dims: Option<usize>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
}

impl BlockAccumulator {
    pub fn new(block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::config("block width must be positive"));
        }
        Ok(Self {
            block,
            dims: None,
            sum: Vec::new(),
            sum_sq: Vec::new(),
            count: 0,
        })
    }

    fn check_dims(&mut self, dims: usize) -> Result<()> {
        let d = *self.dims.get_or_insert(dims);
        if dims != d || d % self.block != 0 {
            return Err(Error::incompatible(format!(
                "feature width {dims} is not {d} or not a multiple of {}",
                self.block
            )));
        }
        if self.sum.is_empty() {
            self.sum = vec![0.0; d / self.block];
            self.sum_sq = vec![0.0; d / self.block];
        }
        Ok(())
    }

    pub fn add(&mut self, m: &FeatureMatrix) -> Result<()> {
        self.check_dims(m.dims)?;
        for t in 0..m.frames {
            for (b, chunk) in m.row(t).chunks_exact(self.block).enumerate() {
                for &v in chunk {
                    self.sum[b] += v;
                    self.sum_sq[b] += v * v;
                }
            }
        }
        self.count += m.frames * self.block;
        Ok(())
    }

    pub fn merge(&mut self, other: &BlockAccumulator) -> Result<()> {
        if other.block != self.block {
            return Err(Error::incompatible("accumulators use different block widths"));
        }
        let Some(d) = other.dims else {
            return Ok(());
        };
        self.check_dims(d)?;
        for b in 0..self.sum.len() {
            self.sum[b] += other.sum[b];
            self.sum_sq[b] += other.sum_sq[b];
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(&self) -> Result<BlockStandardizer> {
        if self.count == 0 {
            return Err(Error::degenerate("no training features to fit statistics on"));
        }
        let n = self.count as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let std = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / n - m * m).max(0.0);
                if var > 0.0 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Ok(BlockStandardizer {
            block: self.block,
            mean,
            std,
        })
    }
}

impl BlockStandardizer {
    pub fn fit<'a>(mats: impl IntoIterator<Item = &'a FeatureMatrix>, block: usize) -> Result<Self> {
        let mut acc = BlockAccumulator::new(block)?;
        for m in mats {
            acc.add(m)?;
        }
        acc.finish()
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.dims != self.block * self.mean.len() {
            return Err(Error::incompatible("feature width does not match fitted statistics"));
        }
        let mut out = m.clone();
        for t in 0..out.frames {
            for (b, chunk) in out.row_mut(t).chunks_exact_mut(self.block).enumerate() {
                for v in chunk {
                    *v = (*v - self.mean[b]) / self.std[b];
                }
            }
        }
        Ok(out)
    }

    /// `block <width>` then one `mean std` line per channel block.
    pub fn to_text(&self) -> String {
        let mut out = format!("block {}\n", self.block);
        for (m, s) in self.mean.iter().zip(&self.std) {
            let _ = writeln!(out, "{m:e} {s:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let block = lines
            .next()
            .and_then(|l| l.strip_prefix("block "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::format("standardizer text lacks `block` line"))?;
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace().map(str::parse::<f64>);
            match (parts.next(), parts.next()) {
                (Some(Ok(m)), Some(Ok(s))) => {
                    mean.push(m);
                    std.push(s);
                }
                _ => return Err(Error::format(format!("bad standardizer line `{line}`"))),
            }
        }
        Ok(Self { block, mean, std })
    }
}
