use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelConvention;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouReport {
    /// IoU of every class present in the ground truth.
    pub per_class: BTreeMap<u16, f64>,
    pub mean: f64,
}

/// Closed-set mean IoU. Pixels whose ground truth is the ignore id are
/// skipped; the mean runs over classes that occur in the ground truth.
pub fn miou(pred: &[u16], gt: &[u16], convention: &LabelConvention) -> Result<MiouReport> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            gt.len()
        )));
    }
    // class -> (tp, fp, fn)
    let mut counts: BTreeMap<u16, (u64, u64, u64)> = BTreeMap::new();
    let mut any = false;
    for (&p, &g) in pred.iter().zip(gt) {
        if g == convention.ignore_id {
            continue;
        }
        any = true;
        if p == g {
            counts.entry(g).or_default().0 += 1;
        } else {
            counts.entry(p).or_default().1 += 1;
            counts.entry(g).or_default().2 += 1;
        }
    }
    if !any {
        return Err(Error::DegenerateLabels(
            "every ground-truth pixel is ignored".into(),
        ));
    }
    let per_class: BTreeMap<u16, f64> = counts
        .into_iter()
        .filter(|(_, (tp, _, fn_))| tp + fn_ > 0)
        .map(|(c, (tp, fp, fn_))| (c, tp as f64 / (tp + fp + fn_) as f64))
        .collect();
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(MiouReport { per_class, mean })
}
