use serde::{Deserialize, Serialize};

use super::sweep::{IGNORE, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `q * (n - 1)`.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn five_number(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::DegenerateLabels("empty score population".into()));
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// Summaries of the in-distribution and OOD score populations.
pub fn score_boxplots(scores: &[f64], labels: &[u8]) -> Result<(FiveNumber, FiveNumber)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pick = |class: u8| -> Vec<f64> {
        scores
            .iter()
            .zip(labels)
            .filter(|&(_, &l)| l == class && l != IGNORE)
            .map(|(&s, _)| s)
            .collect()
    };
    Ok((five_number(&pick(NEGATIVE))?, five_number(&pick(POSITIVE))?))
}
