//! Dataset-level evaluation from score maps and ground-truth label maps on
//! disk, paired by file stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::codec::{read_label_map, ScoreMap};
use crate::error::{Error, Result};
use crate::labels::LabelConvention;
use crate::metrics::{anomaly_report, AnomalyReport, IGNORE, NEGATIVE, POSITIVE};
use crate::provenance::Provenance;
use crate::raster::LabelMap;

#[derive(Debug, Clone)]
pub struct EvalRequest<'a> {
    pub scores_dir: &'a Path,
    pub labels_dir: &'a Path,
    pub convention: &'a LabelConvention,
    pub n_bins: usize,
    pub dataset: &'a str,
    pub method: &'a str,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: AnomalyReport,
    pub pairs: usize,
    /// Files present on only one side.
    pub unpaired: Vec<PathBuf>,
    /// Paired files that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Maps a ground-truth label map onto positive / negative / ignore.
pub fn anomaly_labels(map: &LabelMap, convention: &LabelConvention) -> Result<Vec<u8>> {
    map.labels()
        .iter()
        .map(|&v| {
            if v == convention.ood_id {
                Ok(POSITIVE)
            } else if v == convention.ignore_id {
                Ok(IGNORE)
            } else if convention.id_class_ids.contains(&v) {
                Ok(NEGATIVE)
            } else {
                Err(Error::LabelValue(format!(
                    "ground-truth label {v} is not in the convention"
                )))
            }
        })
        .collect()
}

fn files_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if stem.starts_with('.') {
            continue;
        }
        out.insert(stem.to_string(), path);
    }
    Ok(out)
}

fn load_pair(
    score_path: &Path,
    label_path: &Path,
    convention: &LabelConvention,
) -> Result<(Vec<f64>, Vec<u8>)> {
    let scores = ScoreMap::read(score_path)?;
    let labels = read_label_map(label_path)?;
    if (scores.width, scores.height) != labels.dims() {
        return Err(Error::Shape(format!(
            "score map {}x{} vs label map {}x{}",
            scores.width,
            scores.height,
            labels.width(),
            labels.height()
        )));
    }
    Ok((
        scores.scores.iter().map(|&s| s as f64).collect(),
        anomaly_labels(&labels, convention)?,
    ))
}

/// Pools all pixels of all pairs, then evaluates once.
pub fn evaluate_dirs(req: EvalRequest<'_>) -> Result<EvalOutcome> {
    let scores = files_by_stem(req.scores_dir)?;
    let labels = files_by_stem(req.labels_dir)?;
    let mut unpaired: Vec<PathBuf> = scores
        .iter()
        .filter(|(k, _)| !labels.contains_key(*k))
        .chain(labels.iter().filter(|(k, _)| !scores.contains_key(*k)))
        .map(|(_, p)| p.clone())
        .collect();
    unpaired.sort();
    for p in &unpaired {
        log::warn!("skipping unpaired file {}", p.display());
    }

    let mut all_scores = Vec::new();
    let mut all_labels = Vec::new();
    let mut skipped = Vec::new();
    let mut pairs = 0;
    for (stem, score_path) in &scores {
        let Some(label_path) = labels.get(stem) else {
            continue;
        };
        match load_pair(score_path, label_path, req.convention) {
            Ok((s, l)) => {
                all_scores.extend(s);
                all_labels.extend(l);
                pairs += 1;
            }
            Err(e) => {
                log::warn!("skipping {stem}: {e}");
                skipped.push((score_path.clone(), e.to_string()));
            }
        }
    }
    if pairs == 0 {
        return Err(Error::EmptyInput(format!(
            "no readable score/label pairs in {} and {}",
            req.scores_dir.display(),
            req.labels_dir.display()
        )));
    }
    let report = anomaly_report(
        &all_scores,
        &all_labels,
        req.n_bins,
        req.dataset,
        req.method,
        req.provenance,
    )?;
    Ok(EvalOutcome {
        report,
        pairs,
        unpaired,
        skipped,
    })
}
