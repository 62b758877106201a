//! TOML run configuration. Every section rejects unknown keys; values given
//! on the command line take precedence over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use poc_core::backend::http::HttpConfig;
use poc_core::backend::retry::RetryPolicy;
use poc_core::backend::{DEFAULT_DETECTION_THRESHOLD, DEFAULT_GUIDANCE, DEFAULT_STEPS};
use poc_core::blend::BlendConfig;
use poc_core::dataset::{CatalogSpec, GenerationJob, Mode};
use poc_core::labels::LabelConvention;
use poc_core::region::PlacementConfig;
use serde::Deserialize;

pub const BACKEND_URL_ENV: &str = "POC_BACKEND_URL";

/// A configuration problem; maps to exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub log_level: Option<String>,
    pub job: JobSection,
    pub labels: LabelsSection,
    pub backends: BackendsSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobSection {
    pub mode: Option<Mode>,
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub catalogs: Option<Vec<CatalogSpec>>,
    pub augmentations_per_image: Option<u32>,
    pub global_seed: Option<u64>,
    pub compose: Option<bool>,
    pub id_mix_ratio: Option<u32>,
    pub overwrite: Option<bool>,
    pub resume: Option<bool>,
    pub placement: Option<PlacementConfig>,
    pub blend: Option<BlendConfig>,
}

/// Base label convention of the input label maps.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelsSection {
    pub preset: String,
    pub id_class_ids: Option<Vec<u16>>,
    pub ood_id: Option<u16>,
    pub ignore_id: Option<u16>,
}

impl Default for LabelsSection {
    fn default() -> Self {
        Self {
            preset: "cityscapes".into(),
            id_class_ids: None,
            ood_id: None,
            ignore_id: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsSection {
    pub mock: bool,
    pub url: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub steps: u32,
    pub guidance: f64,
    pub detection_threshold: f64,
    pub concurrency: usize,
}

impl Default for BackendsSection {
    fn default() -> Self {
        let http = HttpConfig::default();
        Self {
            mock: false,
            url: http.base_url,
            timeout_secs: http.timeout_secs,
            retry: http.retry,
            steps: DEFAULT_STEPS,
            guidance: DEFAULT_GUIDANCE,
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub scores_dir: Option<PathBuf>,
    pub labels_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub bins: Option<usize>,
    pub dataset: Option<String>,
    pub method: Option<String>,
    /// `anomaly` (0 / 1 / 255) or `cityscapes` (train ids, 254 OOD).
    pub convention: Option<String>,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct GenerateOverrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub mock: bool,
    pub input_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub augmentations: Option<u32>,
    pub compose: bool,
    pub overwrite: bool,
    pub resume: bool,
}

impl AppConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).map_err(|e| invalid(format!("invalid config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load_optional(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Endpoint after applying the environment override.
    pub fn http_config(&self) -> HttpConfig {
        let base_url = std::env::var(BACKEND_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .unwrap_or_else(|| self.backends.url.clone());
        HttpConfig {
            base_url,
            timeout_secs: self.backends.timeout_secs,
            retry: self.backends.retry.clone(),
        }
    }

    pub fn base_labels(&self) -> anyhow::Result<LabelConvention> {
        let l = &self.labels;
        let mut conv = named_convention(&l.preset).ok_or_else(|| {
            invalid(format!(
                "labels.preset: unknown preset `{}` (expected `cityscapes` or `anomaly`)",
                l.preset
            ))
        })?;
        if let Some(ids) = &l.id_class_ids {
            conv.id_class_ids = ids.iter().copied().collect();
        }
        if let Some(v) = l.ood_id {
            conv.ood_id = v;
        }
        if let Some(v) = l.ignore_id {
            conv.ignore_id = v;
        }
        conv.validate()
            .map_err(|e| invalid(format!("labels: {e}")))?;
        Ok(conv)
    }

    /// The generation job with overrides applied, fully validated.
    pub fn generation_job(&self, ov: &GenerateOverrides) -> anyhow::Result<GenerationJob> {
        let j = &self.job;
        let mode = ov
            .mode
            .or(j.mode)
            .ok_or_else(|| invalid("job.mode: missing (set it in the config or pass --mode)"))?;
        let input_dir = ov
            .input_dir
            .clone()
            .or_else(|| j.input_dir.clone())
            .ok_or_else(|| {
                invalid("job.input_dir: missing (set it in the config or pass --input-dir)")
            })?;
        let output_dir = ov
            .output_dir
            .clone()
            .or_else(|| j.output_dir.clone())
            .ok_or_else(|| {
                invalid("job.output_dir: missing (set it in the config or pass --output-dir)")
            })?;
        if !input_dir.is_dir() {
            return Err(invalid(format!(
                "job.input_dir: {} is not a directory",
                input_dir.display()
            )));
        }

        let mut job = GenerationJob::new(mode, input_dir, output_dir);
        if let Some(c) = &j.catalogs {
            job.catalogs = c.clone();
        }
        if let Some(v) = ov.augmentations.or(j.augmentations_per_image) {
            job.augmentations_per_image = v;
        }
        if let Some(v) = ov.seed.or(j.global_seed) {
            job.global_seed = v;
        }
        job.compose = ov.compose || j.compose.unwrap_or(false);
        job.overwrite = ov.overwrite || j.overwrite.unwrap_or(false);
        job.resume = ov.resume || j.resume.unwrap_or(false);
        if job.overwrite && job.resume {
            return Err(invalid(
                "job.overwrite and job.resume are mutually exclusive",
            ));
        }
        if let Some(v) = j.id_mix_ratio {
            job.id_mix_ratio = v;
        }
        if let Some(p) = &j.placement {
            job.placement = p.clone();
        }
        if let Some(b) = &j.blend {
            job.blend = b.clone();
        }
        job.base_labels = self.base_labels()?;
        let b = &self.backends;
        job.steps = b.steps;
        job.guidance = b.guidance;
        job.detection_threshold = b.detection_threshold;
        job.concurrency = ov.concurrency.unwrap_or(b.concurrency);
        job.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(job)
    }

    pub fn use_mock(&self, ov: &GenerateOverrides) -> bool {
        ov.mock || self.backends.mock
    }
}

pub fn named_convention(name: &str) -> Option<LabelConvention> {
    match name {
        "cityscapes" => Some(LabelConvention::cityscapes()),
        "anomaly" => Some(LabelConvention::anomaly()),
        _ => None,
    }
}
