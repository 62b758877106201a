use crate::error::{Error, Result};

/// Pixel labels for the anomaly metrics. OOD is the positive class.
pub const NEGATIVE: u8 = 0;
pub const POSITIVE: u8 = 1;
pub const IGNORE: u8 = 255;

/// Cumulative confusion counts at every distinct score, highest first.
/// Entry `i` describes the prediction "positive iff score >= thresholds[i]".
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionSweep {
    pub thresholds: Vec<f64>,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub total_pos: u64,
    pub total_neg: u64,
}

impl ConfusionSweep {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn fn_at(&self, i: usize) -> u64 {
        self.total_pos - self.tp[i]
    }

    pub fn tn_at(&self, i: usize) -> u64 {
        self.total_neg - self.fp[i]
    }

    pub fn recall_at(&self, i: usize) -> f64 {
        self.tp[i] as f64 / self.total_pos as f64
    }

    pub fn precision_at(&self, i: usize) -> f64 {
        self.tp[i] as f64 / (self.tp[i] + self.fp[i]) as f64
    }

    /// `(recall, precision)` at every threshold.
    pub fn pr_curve(&self) -> Vec<(f64, f64)> {
        (0..self.len())
            .map(|i| (self.recall_at(i), self.precision_at(i)))
            .collect()
    }

    pub(crate) fn check_nondegenerate(total_pos: u64, total_neg: u64) -> Result<()> {
        match (total_pos, total_neg) {
            (0, 0) => Err(Error::DegenerateLabels("no labelled pixels".into())),
            (0, _) => Err(Error::DegenerateLabels("no positive (OOD) pixels".into())),
            (_, 0) => Err(Error::DegenerateLabels("no negative (ID) pixels".into())),
            _ => Ok(()),
        }
    }
}

/// Exact threshold sweep. Pixels labelled [`IGNORE`] are dropped; tied
/// scores share one threshold.
pub fn sweep(scores: &[f64], labels: &[u8]) -> Result<ConfusionSweep> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut pairs = Vec::with_capacity(scores.len());
    for (&s, &l) in scores.iter().zip(labels) {
        match l {
            IGNORE => continue,
            POSITIVE | NEGATIVE => {}
            other => {
                return Err(Error::LabelValue(format!(
                    "anomaly label {other} is neither 0, 1 nor {IGNORE}"
                )))
            }
        }
        if s.is_nan() {
            return Err(Error::ScoreMap("NaN anomaly score".into()));
        }
        pairs.push((s, l == POSITIVE));
    }
    let total_pos = pairs.iter().filter(|p| p.1).count() as u64;
    let total_neg = pairs.len() as u64 - total_pos;
    ConfusionSweep::check_nondegenerate(total_pos, total_neg)?;

    pairs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = ConfusionSweep {
        thresholds: Vec::new(),
        tp: Vec::new(),
        fp: Vec::new(),
        total_pos,
        total_neg,
    };
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.thresholds.push(t);
        out.tp.push(tp);
        out.fp.push(fp);
    }
    Ok(out)
}

/// Step-wise average precision, `sum_n (R_n - R_{n-1}) P_n` with `R_0 = 0`.
pub fn auprc(sweep: &ConfusionSweep) -> f64 {
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for i in 0..sweep.len() {
        let r = sweep.recall_at(i);
        ap += (r - prev_recall) * sweep.precision_at(i);
        prev_recall = r;
    }
    ap
}

/// False-positive rate at the highest threshold reaching 95% recall.
pub fn fpr_at_95tpr(sweep: &ConfusionSweep) -> f64 {
    let i = (0..sweep.len())
        .find(|&i| 100 * sweep.tp[i] >= 95 * sweep.total_pos)
        .expect("the lowest threshold always reaches full recall");
    sweep.fp[i] as f64 / sweep.total_neg as f64
}

/// Best F1 over all thresholds; F1 is 0 where precision and recall are both 0.
pub fn max_f1(sweep: &ConfusionSweep) -> f64 {
    (0..sweep.len())
        .map(|i| {
            let tp = sweep.tp[i] as f64;
            let denom = 2.0 * tp + sweep.fp[i] as f64 + sweep.fn_at(i) as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .fold(0.0, f64::max)
}
