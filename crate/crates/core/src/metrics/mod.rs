//! Pixel-level anomaly-segmentation metrics (max-F1, AuPRC, FPR at 95% TPR),
//! closed-set mIoU and score distribution summaries.

pub mod boxplot;
pub mod histogram;
pub mod miou;
pub mod sweep;

use serde::{Deserialize, Serialize};

pub use boxplot::{five_number, score_boxplots, FiveNumber};
pub use histogram::{histogram_metrics, HistogramAccumulator, HistogramMetrics};
pub use miou::{miou, MiouReport};
pub use sweep::{auprc, fpr_at_95tpr, max_f1, sweep, ConfusionSweep, IGNORE, NEGATIVE, POSITIVE};

use crate::error::Result;
use crate::provenance::Provenance;

/// Upper bound on stored PR-curve points.
pub const PR_CURVE_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub provenance: Provenance,
    pub dataset: String,
    pub method: String,
    pub max_f1: f64,
    pub auprc: f64,
    pub fpr_at_95tpr: f64,
    pub n_ood_pixels: u64,
    pub n_id_pixels: u64,
    pub n_ignored: u64,
    pub boxplot_id: FiveNumber,
    pub boxplot_ood: FiveNumber,
    /// `(recall, precision)` pairs, thinned to at most [`PR_CURVE_POINTS`].
    pub pr_curve: Vec<(f64, f64)>,
}

fn thin(curve: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if curve.len() <= PR_CURVE_POINTS {
        return curve;
    }
    let last = curve.len() - 1;
    (0..PR_CURVE_POINTS)
        .map(|k| curve[k * last / (PR_CURVE_POINTS - 1)])
        .collect()
}

/// Pools every pixel and evaluates with the exact sweep, or with a
/// histogram of `n_bins` bins spanning the observed score range when
/// `n_bins > 0`.
pub fn anomaly_report(
    scores: &[f64],
    labels: &[u8],
    n_bins: usize,
    dataset: &str,
    method: &str,
    provenance: Provenance,
) -> Result<AnomalyReport> {
    let exact = sweep(scores, labels)?;
    let (boxplot_id, boxplot_ood) = score_boxplots(scores, labels)?;
    let n_ignored = labels.iter().filter(|&&l| l == IGNORE).count() as u64;
    let used = if n_bins > 0 {
        let lo = exact.thresholds[exact.len() - 1];
        let hi = exact.thresholds[0];
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let mut acc = HistogramAccumulator::new(n_bins, lo, hi)?;
        acc.add(scores, labels)?;
        acc.to_sweep()?
    } else {
        exact
    };
    Ok(AnomalyReport {
        provenance,
        dataset: dataset.to_string(),
        method: method.to_string(),
        max_f1: max_f1(&used),
        auprc: auprc(&used),
        fpr_at_95tpr: fpr_at_95tpr(&used),
        n_ood_pixels: used.total_pos,
        n_id_pixels: used.total_neg,
        n_ignored,
        boxplot_id,
        boxplot_ood,
        pr_curve: thin(used.pr_curve()),
    })
}
