//! Built-in object prompt lists.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Street anomalies used for the POC evaluation sets and the "alt" fine-tuning
/// set. Spelling is kept verbatim, including "matress".
pub const POC_ALT_25: [&str; 25] = [
    "stroller",
    "trolley",
    "garbage bag",
    "wheelie bin",
    "suitcase",
    "skateboard",
    "chair dumped on the street",
    "sofa dumped on the street",
    "furniture dumped on the street",
    "matress dumped on the street",
    "garbage dumped on the street",
    "clothes dumped on the street",
    "cement mixer on the street",
    "cat",
    "dog",
    "bird flying",
    "horse",
    "skunk",
    "sheep",
    "crocodile",
    "alligator",
    "bear",
    "llama",
    "tiger",
    "monkey",
];

/// Cityscapes classes inserted alongside anomalies so that detectors cannot
/// get away with spotting synthetic content.
pub const CITYSCAPES_ID_6: [&str; 6] = ["rider", "bicycle", "motorcycle", "bus", "person", "car"];

/// The animal classes of PASCAL VOC.
pub const PASCAL_ANIMALS_6: [&str; 6] = ["bird", "cat", "cow", "dog", "horse", "sheep"];

/// The 80 COCO detection class names, in the canonical category order.
pub const COCO_80: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
    "bottle",
    "wine glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted plant",
    "bed",
    "dining table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy bear",
    "hair drier",
    "toothbrush",
];

/// Cityscapes train id of each entry of [`CITYSCAPES_ID_6`].
pub const CITYSCAPES_ID_6_TRAIN_IDS: [u16; 6] = [12, 18, 17, 15, 11, 13];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogName {
    #[serde(rename = "poc-alt-25")]
    PocAlt25,
    #[serde(rename = "cityscapes-id-6")]
    CityscapesId6,
    #[serde(rename = "pascal-animals-6")]
    PascalAnimals6,
    #[serde(rename = "coco-80")]
    Coco80,
}

impl CatalogName {
    pub const ALL: [CatalogName; 4] = [
        CatalogName::PocAlt25,
        CatalogName::CityscapesId6,
        CatalogName::PascalAnimals6,
        CatalogName::Coco80,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogName::PocAlt25 => "poc-alt-25",
            CatalogName::CityscapesId6 => "cityscapes-id-6",
            CatalogName::PascalAnimals6 => "pascal-animals-6",
            CatalogName::Coco80 => "coco-80",
        }
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CatalogName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::CatalogNotFound(s.to_string()))
    }
}

/// One prompt and the dataset class it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub prompt: String,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectCatalog {
    pub name: CatalogName,
    pub entries: Vec<CatalogEntry>,
}

impl ObjectCatalog {
    pub fn prompts(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.prompt.as_str())
    }

    /// Distinct class names in first-appearance order.
    pub fn class_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.class_name.as_str()) {
                out.push(&e.class_name);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Class a prompt is filed under. Only "bird flying" differs from its prompt.
fn class_of(prompt: &str) -> &str {
    match prompt {
        "bird flying" => "bird",
        other => other,
    }
}

pub fn load_catalog(name: &str) -> Result<ObjectCatalog> {
    let name: CatalogName = name.parse()?;
    Ok(catalog(name))
}

pub fn catalog(name: CatalogName) -> ObjectCatalog {
    let prompts: &[&str] = match name {
        CatalogName::PocAlt25 => &POC_ALT_25,
        CatalogName::CityscapesId6 => &CITYSCAPES_ID_6,
        CatalogName::PascalAnimals6 => &PASCAL_ANIMALS_6,
        CatalogName::Coco80 => &COCO_80,
    };
    ObjectCatalog {
        name,
        entries: prompts
            .iter()
            .map(|p| CatalogEntry {
                prompt: p.to_string(),
                class_name: class_of(p).to_string(),
            })
            .collect(),
    }
}
