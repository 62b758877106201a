use serde::{Deserialize, Serialize};

use super::sweep::{auprc, fpr_at_95tpr, max_f1, ConfusionSweep, IGNORE, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};

/// Streaming per-class score histogram with uniform bins over
/// `[score_min, score_max]`. Scores outside the range land in the edge bins.
/// Accumulators with the same binning merge by elementwise addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramAccumulator {
    pub n_bins: usize,
    pub score_min: f64,
    pub score_max: f64,
    pub pos_counts: Vec<u64>,
    pub neg_counts: Vec<u64>,
    pub ignored: u64,
}

impl HistogramAccumulator {
    pub fn new(n_bins: usize, score_min: f64, score_max: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if !score_min.is_finite() || !score_max.is_finite() || score_max <= score_min {
            return Err(Error::Config(format!(
                "histogram range [{score_min}, {score_max}] is empty or not finite"
            )));
        }
        Ok(Self {
            n_bins,
            score_min,
            score_max,
            pos_counts: vec![0; n_bins],
            neg_counts: vec![0; n_bins],
            ignored: 0,
        })
    }

    pub fn bin_of(&self, score: f64) -> usize {
        let t = (score - self.score_min) / (self.score_max - self.score_min);
        let b = (t * self.n_bins as f64).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.n_bins - 1)
        }
    }

    /// Lower edge of bin `b`.
    pub fn lower_edge(&self, b: usize) -> f64 {
        self.score_min + (self.score_max - self.score_min) * b as f64 / self.n_bins as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.score_min + (self.score_max - self.score_min) * (b as f64 + 0.5) / self.n_bins as f64
    }

    pub fn add(&mut self, scores: &[f64], labels: &[u8]) -> Result<()> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        for (&s, &l) in scores.iter().zip(labels) {
            if l == IGNORE {
                self.ignored += 1;
                continue;
            }
            if s.is_nan() {
                return Err(Error::ScoreMap("NaN anomaly score".into()));
            }
            let b = self.bin_of(s);
            match l {
                POSITIVE => self.pos_counts[b] += 1,
                NEGATIVE => self.neg_counts[b] += 1,
                other => {
                    return Err(Error::LabelValue(format!(
                        "anomaly label {other} is neither 0, 1 nor {IGNORE}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &HistogramAccumulator) -> Result<()> {
        if self.n_bins != other.n_bins
            || self.score_min != other.score_min
            || self.score_max != other.score_max
        {
            return Err(Error::Shape(
                "merging histograms with different binning".into(),
            ));
        }
        for (a, b) in self.pos_counts.iter_mut().zip(&other.pos_counts) {
            *a += b;
        }
        for (a, b) in self.neg_counts.iter_mut().zip(&other.neg_counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    pub fn total_pos(&self) -> u64 {
        self.pos_counts.iter().sum()
    }

    pub fn total_neg(&self) -> u64 {
        self.neg_counts.iter().sum()
    }

    /// Sweep with every non-empty bin acting as one tied score, thresholded
    /// at its lower edge.
    pub fn to_sweep(&self) -> Result<ConfusionSweep> {
        let (total_pos, total_neg) = (self.total_pos(), self.total_neg());
        ConfusionSweep::check_nondegenerate(total_pos, total_neg)?;
        let mut out = ConfusionSweep {
            thresholds: Vec::new(),
            tp: Vec::new(),
            fp: Vec::new(),
            total_pos,
            total_neg,
        };
        let (mut tp, mut fp) = (0, 0);
        for b in (0..self.n_bins).rev() {
            if self.pos_counts[b] == 0 && self.neg_counts[b] == 0 {
                continue;
            }
            tp += self.pos_counts[b];
            fp += self.neg_counts[b];
            out.thresholds.push(self.lower_edge(b));
            out.tp.push(tp);
            out.fp.push(fp);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramMetrics {
    pub auprc: f64,
    pub fpr_at_95tpr: f64,
    pub max_f1: f64,
}

/// The exact-sweep formulas evaluated at bin boundaries.
pub fn histogram_metrics(acc: &HistogramAccumulator) -> Result<HistogramMetrics> {
    let s = acc.to_sweep()?;
    Ok(HistogramMetrics {
        auprc: auprc(&s),
        fpr_at_95tpr: fpr_at_95tpr(&s),
        max_f1: max_f1(&s),
    })
}
