use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::manifest::{Manifest, ManifestEntry, ManifestHeader, SampleStatus, MANIFEST_FILE};
use super::{sample_prompts, GenerationJob, Mode};
use crate::backend::{InpaintBackend, InpaintRequest, SegmentBackend};
use crate::blend::{annotate, blend, feather, paste_and_label, AugmentedSample};
use crate::codec::{read_label_map, read_png, write_label_map, write_png};
use crate::error::{Error, Result};
use crate::labels::LabelConvention;
use crate::prompt::PromptSet;
use crate::provenance::Provenance;
use crate::raster::{BinaryMask, ImageBuffer, LabelMap};
use crate::region::{valid_area, RegionSampler};
use crate::seed::{SampleKey, Stream};

pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub output_images: usize,
    pub elapsed: Duration,
}

impl RunSummary {
    pub fn accepted(&self) -> usize {
        self.manifest.accepted()
    }

    pub fn rejected(&self) -> usize {
        self.manifest.rejected()
    }

    pub fn samples_per_sec(&self) -> f64 {
        self.manifest.entries.len() as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Settings that determine the output; hashed into the provenance block.
/// Paths, concurrency and restart flags are left out on purpose.
fn output_relevant(job: &GenerationJob) -> serde_json::Value {
    let mut v = serde_json::to_value(job).expect("job serializes");
    if let Some(obj) = v.as_object_mut() {
        for k in [
            "input_dir",
            "output_dir",
            "concurrency",
            "overwrite",
            "resume",
        ] {
            obj.remove(k);
        }
    }
    v
}

pub fn provenance(job: &GenerationJob) -> Provenance {
    Provenance::for_config(&output_relevant(job), Some(job.global_seed))
}

struct Input {
    stem: String,
    image: PathBuf,
    labels: PathBuf,
}

fn discover(input_dir: &Path) -> Result<Vec<Input>> {
    let images_dir = input_dir.join(IMAGES_DIR);
    let labels_dir = input_dir.join(LABELS_DIR);
    if !images_dir.is_dir() {
        return Err(Error::EmptyInput(format!(
            "{} is not a directory",
            images_dir.display()
        )));
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&images_dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        out.push(Input {
            stem: stem.to_string(),
            labels: labels_dir.join(format!("{stem}.png")),
            image: path.clone(),
        });
    }
    out.sort_by(|a, b| a.stem.cmp(&b.stem));
    Ok(out)
}

fn prepare_output(job: &GenerationJob) -> Result<()> {
    let out = &job.output_dir;
    let non_empty = out.is_dir() && std::fs::read_dir(out)?.next().is_some();
    if non_empty && !job.resume {
        if !job.overwrite {
            return Err(Error::OutputExists(out.clone()));
        }
        for d in [IMAGES_DIR, LABELS_DIR] {
            let p = out.join(d);
            if p.exists() {
                std::fs::remove_dir_all(p)?;
            }
        }
        let m = out.join(MANIFEST_FILE);
        if m.exists() {
            std::fs::remove_file(m)?;
        }
    }
    std::fs::create_dir_all(out.join(IMAGES_DIR))?;
    std::fs::create_dir_all(out.join(LABELS_DIR))?;
    Ok(())
}

struct Ctx<'a> {
    job: &'a GenerationJob,
    out_labels: LabelConvention,
    inpainter: &'a dyn InpaintBackend,
    segmenter: &'a dyn SegmentBackend,
}

/// Base labels expressed in the output convention.
fn convert_base_labels(ctx: &Ctx<'_>, labels: &LabelMap) -> Result<LabelMap> {
    let base = &ctx.job.base_labels;
    if let Some(bad) = labels.labels().iter().find(|&&v| !base.contains(v)) {
        return Err(Error::LabelValue(format!(
            "input label {bad} is not in the base convention"
        )));
    }
    Ok(match ctx.job.mode {
        Mode::AnomalyTest => {
            let id = *ctx.out_labels.id_class_ids.iter().next().expect("ID class");
            let ignore = ctx.out_labels.ignore_id;
            labels.map(|v| if v == base.ignore_id { ignore } else { id })
        }
        Mode::OodFinetune | Mode::Extend => labels.clone(),
    })
}

enum Outcome {
    Accepted(Box<AugmentedSample>, u32),
    Rejected(String, u32),
}

/// Runs the insertion pipeline for one prompt on one image, retrying with a
/// fresh region after rejected generations until the attempt budget is
/// spent.
fn insert_object(
    ctx: &Ctx<'_>,
    image: &ImageBuffer,
    labels: &LabelMap,
    image_id: &str,
    augmentation: u32,
    prompt: &PromptSet,
) -> Outcome {
    let job = ctx.job;
    let key = |attempt| SampleKey {
        global_seed: job.global_seed,
        image_id,
        augmentation,
        attempt,
    };
    let valid = match valid_area(
        image,
        &prompt.location_prompt,
        job.placement.placement_mode,
        ctx.segmenter,
        job.detection_threshold,
    ) {
        Ok(v) => v,
        Err(e) => return Outcome::Rejected(format!("valid area: {e}"), 0),
    };
    let sampler = RegionSampler::new(&valid, &job.placement);
    let budget = job.placement.max_attempts;
    let mut used = 0;
    let mut last_reason = String::from("no attempt made");
    while used < budget {
        let placement = match sampler.sample(&mut key(used).rng(Stream::Placement), budget - used) {
            Ok(p) => p,
            Err(e) => return Outcome::Rejected(e.to_string(), budget),
        };
        let seed = key(used).seed(Stream::Backend);
        used += placement.attempts_used;
        match generate(ctx, image, labels, prompt, &placement, seed) {
            Ok(sample) => return Outcome::Accepted(Box::new(sample), used),
            Err(e @ Error::GenerationRejected(_)) => {
                log::debug!("{image_id} aug {augmentation}: {e}");
                last_reason = e.to_string();
            }
            Err(e) => {
                log::warn!("{image_id} aug {augmentation}: {e}");
                return Outcome::Rejected(e.to_string(), used);
            }
        }
    }
    Outcome::Rejected(
        format!("attempt budget exhausted; last: {last_reason}"),
        used,
    )
}

fn generate(
    ctx: &Ctx<'_>,
    image: &ImageBuffer,
    labels: &LabelMap,
    prompt: &PromptSet,
    placement: &crate::region::PlacementOutcome,
    seed: u64,
) -> Result<AugmentedSample> {
    let job = ctx.job;
    let crop_img = image.crop(&placement.crop)?;
    let region_in_crop = placement.region.relative_to(&placement.crop);
    let edited = ctx.inpainter.inpaint(&InpaintRequest {
        mask: BinaryMask::from_region(crop_img.width(), crop_img.height(), &region_in_crop)?,
        crop: crop_img.clone(),
        prompt: prompt.inpaint_prompt.clone(),
        seed,
        steps: job.steps,
        guidance: job.guidance,
    })?;
    if edited.dims() != crop_img.dims() {
        return Err(Error::fatal("inpainted crop changed size"));
    }
    let object = annotate(
        &edited,
        prompt,
        &region_in_crop,
        ctx.segmenter,
        &job.blend,
        job.detection_threshold,
    )?;
    let soft = feather(&object, &job.blend)?;
    let blended = blend(&crop_img, &edited, &soft)?;
    let (image, labels, object_mask) = paste_and_label(
        image,
        labels,
        &placement.crop,
        &blended,
        &object,
        prompt.class_id,
        &ctx.out_labels,
    )?;
    Ok(AugmentedSample {
        image,
        labels,
        object_mask,
        prompt: prompt.clone(),
        region: placement.region,
        crop: placement.crop,
        seed,
    })
}

fn rel(dir: &str, name: &str) -> String {
    format!("{dir}/{name}")
}

fn rejected_entry(
    source: &str,
    aug: u32,
    prompt: &PromptSet,
    reason: String,
    attempts: u32,
) -> ManifestEntry {
    ManifestEntry {
        source_image: source.to_string(),
        augmentation: aug,
        output_image: None,
        output_labels: None,
        prompt: prompt.clone(),
        region: None,
        crop: None,
        seed: None,
        status: SampleStatus::Rejected,
        reject_reason: Some(reason),
        attempts,
        object_pixels: 0,
    }
}

fn accepted_entry(
    source: &str,
    aug: u32,
    name: &str,
    s: &AugmentedSample,
    attempts: u32,
) -> ManifestEntry {
    ManifestEntry {
        source_image: source.to_string(),
        augmentation: aug,
        output_image: Some(rel(IMAGES_DIR, name)),
        output_labels: Some(rel(LABELS_DIR, name)),
        prompt: s.prompt.clone(),
        region: Some(s.region),
        crop: Some(s.crop),
        seed: Some(s.seed),
        status: SampleStatus::Accepted,
        reject_reason: None,
        attempts,
        object_pixels: s.object_mask.count() as u64,
    }
}

/// A unit of scheduled work: one augmentation, or all augmentations of an
/// image when composing.
struct Unit<'a> {
    input: &'a Input,
    augs: Vec<u32>,
}

fn output_name(stem: &str, aug: u32) -> String {
    format!("{stem}_aug{aug}.png")
}

fn process_unit(ctx: &Ctx<'_>, unit: &Unit<'_>) -> Vec<ManifestEntry> {
    let job = ctx.job;
    let stem = &unit.input.stem;
    let source = rel(IMAGES_DIR, &format!("{stem}.png"));
    let prompts = match sample_prompts(job, stem) {
        Ok(p) => p,
        Err(e) => unreachable!("prompt pool validated before the run: {e}"),
    };
    let loaded = read_png(&unit.input.image).and_then(|img| {
        let labels = read_label_map(&unit.input.labels)?;
        if labels.dims() != img.dims() {
            return Err(Error::Shape(format!(
                "image {:?} vs labels {:?}",
                img.dims(),
                labels.dims()
            )));
        }
        Ok((img, convert_base_labels(ctx, &labels)?))
    });
    let (image, labels) = match loaded {
        Ok(v) => v,
        Err(e) => {
            log::warn!("unreadable input {stem}: {e}");
            return unit
                .augs
                .iter()
                .map(|&k| {
                    rejected_entry(
                        &source,
                        k,
                        &prompts[k as usize],
                        format!("unreadable input: {e}"),
                        0,
                    )
                })
                .collect();
        }
    };

    let write = |name: &str, s: &AugmentedSample| -> Result<()> {
        write_png(&job.output_dir.join(IMAGES_DIR).join(name), &s.image)?;
        write_label_map(
            &job.output_dir.join(LABELS_DIR).join(name),
            &s.labels,
            &ctx.out_labels,
        )
    };

    let mut entries = Vec::with_capacity(unit.augs.len());
    if job.compose {
        let name = output_name(stem, 0);
        let mut current: Option<AugmentedSample> = None;
        for &k in &unit.augs {
            let (img, lab) = match &current {
                Some(s) => (&s.image, &s.labels),
                None => (&image, &labels),
            };
            match insert_object(ctx, img, lab, stem, k, &prompts[k as usize]) {
                Outcome::Accepted(s, attempts) => {
                    entries.push(accepted_entry(&source, k, &name, &s, attempts));
                    current = Some(*s);
                }
                Outcome::Rejected(reason, attempts) => entries.push(rejected_entry(
                    &source,
                    k,
                    &prompts[k as usize],
                    reason,
                    attempts,
                )),
            }
        }
        if let Some(s) = current {
            if let Err(e) = write(&name, &s) {
                return fail_writes(entries, e);
            }
        }
    } else {
        for &k in &unit.augs {
            let entry = match insert_object(ctx, &image, &labels, stem, k, &prompts[k as usize]) {
                Outcome::Accepted(s, attempts) => {
                    let name = output_name(stem, k);
                    match write(&name, &s) {
                        Ok(()) => accepted_entry(&source, k, &name, &s, attempts),
                        Err(e) => rejected_entry(
                            &source,
                            k,
                            &s.prompt,
                            format!("write failed: {e}"),
                            attempts,
                        ),
                    }
                }
                Outcome::Rejected(reason, attempts) => {
                    rejected_entry(&source, k, &prompts[k as usize], reason, attempts)
                }
            };
            entries.push(entry);
        }
    }
    entries
}

fn fail_writes(entries: Vec<ManifestEntry>, e: Error) -> Vec<ManifestEntry> {
    entries
        .into_iter()
        .map(|mut entry| {
            if entry.is_accepted() {
                entry.status = SampleStatus::Rejected;
                entry.reject_reason = Some(format!("write failed: {e}"));
                entry.output_image = None;
                entry.output_labels = None;
            }
            entry
        })
        .collect()
}

/// Entries from a previous run that can be kept as they are.
fn resumable(job: &GenerationJob) -> Result<Vec<ManifestEntry>> {
    let path = job.output_dir.join(MANIFEST_FILE);
    if !job.resume || !path.exists() {
        return Ok(Vec::new());
    }
    let previous = Manifest::read(&path)?;
    if previous.header.provenance.config_hash != provenance(job).config_hash {
        return Err(Error::Config(
            "cannot resume: existing manifest was produced with different settings".into(),
        ));
    }
    let exists = |p: &Option<String>| p.as_ref().is_some_and(|p| job.output_dir.join(p).is_file());
    Ok(previous
        .entries
        .into_iter()
        .filter(|e| e.is_accepted() && exists(&e.output_image) && exists(&e.output_labels))
        .collect())
}

/// Generates the dataset described by `job` and writes images, labels and
/// `manifest.jsonl` under `job.output_dir`.
pub fn run(
    job: &GenerationJob,
    inpainter: &dyn InpaintBackend,
    segmenter: &dyn SegmentBackend,
) -> Result<RunSummary> {
    let start = Instant::now();
    job.validate()?;
    let inputs = discover(&job.input_dir)?;
    prepare_output(job)?;
    let kept = resumable(job)?;
    let ctx = Ctx {
        job,
        out_labels: job.output_labels()?,
        inpainter,
        segmenter,
    };

    let mut done: HashMap<&str, Vec<u32>> = HashMap::new();
    for e in &kept {
        done.entry(e.source_image.as_str())
            .or_default()
            .push(e.augmentation);
    }
    let all_augs: Vec<u32> = (0..job.augmentations_per_image).collect();
    let mut units = Vec::new();
    for input in &inputs {
        let source = rel(IMAGES_DIR, &format!("{}.png", input.stem));
        let finished = done.get(source.as_str()).cloned().unwrap_or_default();
        if job.compose {
            // A composed image is rebuilt from scratch unless it is complete.
            if all_augs.iter().any(|k| !finished.contains(k)) {
                units.push(Unit {
                    input,
                    augs: all_augs.clone(),
                });
            }
        } else {
            units.extend(
                all_augs
                    .iter()
                    .filter(|k| !finished.contains(k))
                    .map(|&k| Unit {
                        input,
                        augs: vec![k],
                    }),
            );
        }
    }
    let rebuilt: Vec<&str> = if job.compose {
        units.iter().map(|u| u.input.stem.as_str()).collect()
    } else {
        Vec::new()
    };
    let kept: Vec<ManifestEntry> = kept
        .into_iter()
        .filter(|e| {
            !rebuilt
                .iter()
                .any(|s| e.source_image == rel(IMAGES_DIR, &format!("{s}.png")))
        })
        .collect();

    let header = ManifestHeader {
        provenance: provenance(job),
        mode: job.mode,
        augmentations_per_image: job.augmentations_per_image,
        compose: job.compose,
    };
    let manifest_path = job.output_dir.join(MANIFEST_FILE);
    // Streamed in completion order for crash safety; rewritten sorted below.
    let journal = {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest_path)?;
        if f.metadata()?.len() == 0 {
            writeln!(f, "{}", Manifest::header_line(&header)?)?;
        }
        Mutex::new(f)
    };
    log::info!(
        "generating {} unit(s) from {} input image(s) with {} worker(s)",
        units.len(),
        inputs.len(),
        job.concurrency
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(job.concurrency)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let fresh: Vec<ManifestEntry> = pool.install(|| {
        units
            .par_iter()
            .flat_map_iter(|unit| {
                let entries = process_unit(&ctx, unit);
                let mut f = journal.lock().unwrap();
                for e in &entries {
                    if let Ok(line) = Manifest::entry_line(e) {
                        let _ = writeln!(f, "{line}");
                    }
                }
                entries
            })
            .collect()
    });
    drop(journal);

    let mut manifest = Manifest {
        header,
        entries: kept.into_iter().chain(fresh).collect(),
    };
    manifest.sort();
    manifest.write_atomic(&manifest_path)?;

    let mut outputs: Vec<&str> = manifest
        .entries
        .iter()
        .filter_map(|e| e.output_image.as_deref())
        .collect();
    outputs.sort_unstable();
    outputs.dedup();
    let output_images = outputs.len();

    Ok(RunSummary {
        manifest,
        output_images,
        elapsed: start.elapsed(),
    })
}
