//! Dataset generation runs: prompt sampling, the per-sample insertion
//! pipeline, persistence and the provenance manifest.

pub mod manifest;
pub mod run;

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{DEFAULT_DETECTION_THRESHOLD, DEFAULT_GUIDANCE, DEFAULT_STEPS};
use crate::blend::BlendConfig;
use crate::catalog::{catalog, CatalogName, CITYSCAPES_ID_6, CITYSCAPES_ID_6_TRAIN_IDS};
use crate::error::{Error, Result};
use crate::labels::LabelConvention;
use crate::prompt::{build_prompt, ClassRole, PromptSet};
use crate::region::PlacementConfig;
use crate::seed::{SampleKey, Stream};

pub use manifest::{Manifest, ManifestEntry, ManifestHeader, SampleStatus};
pub use run::{run, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Anomaly test sets: binary ground truth, OOD objects mixed with
    /// synthetic in-distribution objects.
    AnomalyTest,
    /// OOD fine-tuning sets: base train ids kept, objects get the OOD id.
    OodFinetune,
    /// New classes appended after the base train ids.
    Extend,
}

impl Mode {
    pub fn default_catalogs(self) -> Vec<CatalogSpec> {
        match self {
            Mode::AnomalyTest => vec![
                CatalogSpec::new(CatalogName::PocAlt25, ClassRole::Ood),
                CatalogSpec::new(CatalogName::CityscapesId6, ClassRole::IdSynthetic),
            ],
            Mode::OodFinetune => vec![CatalogSpec::new(CatalogName::Coco80, ClassRole::Ood)],
            Mode::Extend => vec![CatalogSpec::new(
                CatalogName::PascalAnimals6,
                ClassRole::NewClass,
            )],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub name: CatalogName,
    pub role: ClassRole,
}

impl CatalogSpec {
    pub fn new(name: CatalogName, role: ClassRole) -> Self {
        Self { name, role }
    }
}

/// Everything that determines the output of a generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub mode: Mode,
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub catalogs: Vec<CatalogSpec>,
    pub augmentations_per_image: u32,
    pub global_seed: u64,
    pub placement: PlacementConfig,
    pub blend: BlendConfig,
    /// Worker threads, which bounds the number of in-flight backend requests.
    pub concurrency: usize,
    /// Apply all augmentations of an image sequentially to one output image.
    pub compose: bool,
    /// OOD draws per in-distribution draw in anomaly-test mode; 0 samples
    /// uniformly over the union of all catalogs.
    pub id_mix_ratio: u32,
    /// Label convention of the input label maps.
    pub base_labels: LabelConvention,
    pub steps: u32,
    pub guidance: f64,
    pub detection_threshold: f64,
    pub overwrite: bool,
    pub resume: bool,
}

impl GenerationJob {
    pub fn new(mode: Mode, input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            catalogs: mode.default_catalogs(),
            augmentations_per_image: 3,
            global_seed: 0,
            placement: PlacementConfig::default(),
            blend: BlendConfig::default(),
            concurrency: 4,
            compose: false,
            id_mix_ratio: 5,
            base_labels: LabelConvention::cityscapes(),
            steps: DEFAULT_STEPS,
            guidance: DEFAULT_GUIDANCE,
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            overwrite: false,
            resume: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.augmentations_per_image == 0 {
            return Err(Error::Config(
                "job.augmentations_per_image must be at least 1".into(),
            ));
        }
        if self.catalogs.is_empty() {
            return Err(Error::Config("job.catalogs must not be empty".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("job.concurrency must be at least 1".into()));
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold < 1.0) {
            return Err(Error::Config(format!(
                "backends.detection_threshold must lie in (0, 1), got {}",
                self.detection_threshold
            )));
        }
        self.placement.validate()?;
        self.blend.validate()?;
        self.base_labels.validate()?;
        self.prompt_pool()?;
        Ok(())
    }

    /// Label convention of the written label maps.
    pub fn output_labels(&self) -> Result<LabelConvention> {
        match self.mode {
            Mode::AnomalyTest => Ok(LabelConvention::anomaly()),
            Mode::OodFinetune => Ok(self.base_labels.clone()),
            Mode::Extend => {
                let mut names = Vec::new();
                for spec in self
                    .catalogs
                    .iter()
                    .filter(|c| c.role == ClassRole::NewClass)
                {
                    for n in catalog(spec.name).class_names() {
                        if !names.contains(&n.to_string()) {
                            names.push(n.to_string());
                        }
                    }
                }
                LabelConvention::extended(&self.base_labels, &names)
            }
        }
    }

    fn class_id(&self, role: ClassRole, class_name: &str, out: &LabelConvention) -> Result<u16> {
        match role {
            ClassRole::Ood => Ok(out.ood_id),
            ClassRole::IdSynthetic => {
                if self.mode == Mode::AnomalyTest {
                    return Ok(*out
                        .id_class_ids
                        .iter()
                        .next()
                        .expect("anomaly convention has an ID class"));
                }
                CITYSCAPES_ID_6
                    .iter()
                    .position(|&c| c == class_name)
                    .map(|i| CITYSCAPES_ID_6_TRAIN_IDS[i])
                    .filter(|id| out.id_class_ids.contains(id))
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "no in-distribution train id for class `{class_name}`"
                        ))
                    })
            }
            ClassRole::NewClass => out
                .new_class_id(class_name)
                .ok_or_else(|| Error::Config(format!("class `{class_name}` has no new-class id"))),
        }
    }

    /// Every prompt the job can draw, in catalog order.
    pub fn prompt_pool(&self) -> Result<Vec<PromptSet>> {
        let out = self.output_labels()?;
        let mut pool = Vec::new();
        for spec in &self.catalogs {
            for entry in catalog(spec.name).entries {
                let id = self.class_id(spec.role, &entry.class_name, &out)?;
                pool.push(build_prompt(
                    &entry.prompt,
                    &entry.class_name,
                    id,
                    spec.role,
                )?);
            }
        }
        Ok(pool)
    }
}

/// Draws one prompt. When mixing applies, the in-distribution pool is picked
/// with probability `1 / (ratio + 1)`; otherwise the draw is uniform over the
/// whole pool.
fn draw_prompt<R: Rng>(pool: &[PromptSet], mix_ratio: u32, rng: &mut R) -> PromptSet {
    let (id, other): (Vec<&PromptSet>, Vec<&PromptSet>) = pool
        .iter()
        .partition(|p| p.class_role == ClassRole::IdSynthetic);
    if mix_ratio > 0 && !id.is_empty() && !other.is_empty() {
        let side = if rng.gen_range(0..=mix_ratio) == 0 {
            &id
        } else {
            &other
        };
        return side[rng.gen_range(0..side.len())].clone();
    }
    pool[rng.gen_range(0..pool.len())].clone()
}

/// One prompt per augmentation; draw `k` depends only on
/// `(global_seed, image_id, k)`.
pub fn sample_prompts(job: &GenerationJob, image_id: &str) -> Result<Vec<PromptSet>> {
    let pool = job.prompt_pool()?;
    let ratio = if job.mode == Mode::AnomalyTest {
        job.id_mix_ratio
    } else {
        0
    };
    Ok((0..job.augmentations_per_image)
        .map(|k| {
            let mut rng = SampleKey {
                global_seed: job.global_seed,
                image_id,
                augmentation: k,
                attempt: 0,
            }
            .rng(Stream::Prompt);
            draw_prompt(&pool, ratio, &mut rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(mode: Mode) -> GenerationJob {
        GenerationJob::new(mode, "in", "out")
    }

    #[test]
    fn anomaly_pool_labels() {
        let pool = job(Mode::AnomalyTest).prompt_pool().unwrap();
        assert_eq!(pool.len(), 31);
        assert!(pool
            .iter()
            .filter(|p| p.class_role == ClassRole::Ood)
            .all(|p| p.class_id == 1));
        assert!(pool
            .iter()
            .filter(|p| p.class_role == ClassRole::IdSynthetic)
            .all(|p| p.class_id == 0));
        let bird = pool
            .iter()
            .find(|p| p.object_prompt == "bird flying")
            .unwrap();
        assert_eq!(bird.location_prompt, "unconstrained");
    }

    #[test]
    fn extend_pool_uses_new_ids() {
        let pool = job(Mode::Extend).prompt_pool().unwrap();
        let ids: Vec<u16> = pool.iter().map(|p| p.class_id).collect();
        assert_eq!(ids, vec![19, 20, 21, 22, 23, 24]);
    }

    #[test]
    fn finetune_id_objects_keep_train_ids() {
        let mut j = job(Mode::OodFinetune);
        j.catalogs.push(CatalogSpec::new(
            CatalogName::CityscapesId6,
            ClassRole::IdSynthetic,
        ));
        let pool = j.prompt_pool().unwrap();
        let car = pool
            .iter()
            .find(|p| p.class_role == ClassRole::IdSynthetic && p.class_name == "car")
            .unwrap();
        assert_eq!(car.class_id, 13);
        assert!(pool
            .iter()
            .filter(|p| p.class_role == ClassRole::Ood)
            .all(|p| p.class_id == 254));
    }

    #[test]
    fn single_entry_and_determinism() {
        let mut j = job(Mode::Extend);
        j.catalogs = vec![CatalogSpec::new(
            CatalogName::PascalAnimals6,
            ClassRole::NewClass,
        )];
        let a = sample_prompts(&j, "img").unwrap();
        assert_eq!(a, sample_prompts(&j, "img").unwrap());
        assert_eq!(a.len(), 3);

        let pool = j.prompt_pool().unwrap();
        let single = vec![pool[2].clone()];
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        for _ in 0..3 {
            assert_eq!(draw_prompt(&single, 0, &mut rng), pool[2]);
        }
    }

    #[test]
    fn validation_catches_bad_jobs() {
        let mut j = job(Mode::AnomalyTest);
        j.augmentations_per_image = 0;
        assert!(j.validate().is_err());
        let mut j = job(Mode::AnomalyTest);
        j.catalogs.clear();
        assert!(j.validate().is_err());
        job(Mode::AnomalyTest).validate().unwrap();
    }
}
