//! `manifest.jsonl`: a header line followed by one JSON object per sample.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{Error, Result};
use crate::prompt::PromptSet;
use crate::provenance::Provenance;
use crate::raster::Region;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub provenance: Provenance,
    pub mode: Mode,
    pub augmentations_per_image: u32,
    pub compose: bool,
}

/// Paths are relative to the input and output directories so that manifests
/// of identical runs compare equal wherever they were written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_image: String,
    pub augmentation: u32,
    pub output_image: Option<String>,
    pub output_labels: Option<String>,
    pub prompt: PromptSet,
    pub region: Option<Region>,
    pub crop: Option<Region>,
    pub seed: Option<u64>,
    pub status: SampleStatus,
    pub reject_reason: Option<String>,
    /// Region proposals consumed, including rejected generations.
    pub attempts: u32,
    pub object_pixels: u64,
}

impl ManifestEntry {
    pub fn is_accepted(&self) -> bool {
        self.status == SampleStatus::Accepted
    }

    fn sort_key(&self) -> (&str, u32) {
        (&self.source_image, self.augmentation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Line {
    Header { header: ManifestHeader },
    Entry(Box<ManifestEntry>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn accepted(&self) -> usize {
        self.entries.iter().filter(|e| e.is_accepted()).count()
    }

    pub fn rejected(&self) -> usize {
        self.entries.len() - self.accepted()
    }

    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn header_line(header: &ManifestHeader) -> Result<String> {
        Ok(serde_json::to_string(&Line::Header {
            header: header.clone(),
        })?)
    }

    pub fn entry_line(entry: &ManifestEntry) -> Result<String> {
        Ok(serde_json::to_string(entry)?)
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            writeln!(f, "{}", Self::header_line(&self.header)?)?;
            for e in &self.entries {
                writeln!(f, "{}", Self::entry_line(e)?)?;
            }
            f.flush()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    /// Reads a manifest, tolerating a torn final line left by a crash.
    pub fn read(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut header = None;
        let mut entries = Vec::new();
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let n = lines.len();
        for (i, line) in lines.into_iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line) {
                Ok(Line::Header { header: h }) => header = Some(h),
                Ok(Line::Entry(e)) => entries.push(*e),
                Err(e) if i + 1 == n => log::warn!("ignoring torn last manifest line: {e}"),
                Err(e) => return Err(e.into()),
            }
        }
        let header = header.ok_or_else(|| {
            Error::Config(format!("manifest {} has no header line", path.display()))
        })?;
        Ok(Self { header, entries })
    }
}
