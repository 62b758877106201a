use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CITYSCAPES_NUM_TRAIN_IDS: u16 = 19;
pub const DEFAULT_IGNORE_ID: u16 = 255;
/// OOD id used by fine-tuning label maps that keep the base train ids.
pub const DEFAULT_FINETUNE_OOD_ID: u16 = 254;

/// Which label ids mean what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelConvention {
    pub id_class_ids: BTreeSet<u16>,
    pub ood_id: u16,
    pub ignore_id: u16,
    /// Name to id, in class order.
    #[serde(default)]
    pub new_class_ids: Vec<(String, u16)>,
}

impl LabelConvention {
    pub fn new(
        id_class_ids: BTreeSet<u16>,
        ood_id: u16,
        ignore_id: u16,
        new_class_ids: Vec<(String, u16)>,
    ) -> Result<Self> {
        let conv = Self {
            id_class_ids,
            ood_id,
            ignore_id,
            new_class_ids,
        };
        conv.validate()?;
        Ok(conv)
    }

    /// Binary anomaly ground truth: 0 in-distribution, 1 OOD, 255 ignore.
    pub fn anomaly() -> Self {
        Self {
            id_class_ids: BTreeSet::from([0]),
            ood_id: 1,
            ignore_id: DEFAULT_IGNORE_ID,
            new_class_ids: Vec::new(),
        }
    }

    /// Cityscapes train ids 0..=18 with 255 as ignore.
    pub fn cityscapes() -> Self {
        Self {
            id_class_ids: (0..CITYSCAPES_NUM_TRAIN_IDS).collect(),
            ood_id: DEFAULT_FINETUNE_OOD_ID,
            ignore_id: DEFAULT_IGNORE_ID,
            new_class_ids: Vec::new(),
        }
    }

    /// Base convention extended with new classes numbered consecutively after
    /// the largest base id.
    pub fn extended<S: AsRef<str>>(base: &LabelConvention, names: &[S]) -> Result<Self> {
        let mut next = base.id_class_ids.iter().next_back().map_or(0, |m| m + 1);
        let mut conv = base.clone();
        for name in names {
            if conv.new_class_id(name.as_ref()).is_some() {
                continue;
            }
            conv.new_class_ids.push((name.as_ref().to_string(), next));
            next += 1;
        }
        conv.validate()?;
        Ok(conv)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id_class_ids.contains(&self.ood_id) {
            return Err(Error::LabelValue(format!(
                "ood id {} collides with an in-distribution id",
                self.ood_id
            )));
        }
        if self.ignore_id == self.ood_id || self.id_class_ids.contains(&self.ignore_id) {
            return Err(Error::LabelValue(format!(
                "ignore id {} collides with another id",
                self.ignore_id
            )));
        }
        let mut seen = BTreeSet::new();
        for (name, id) in &self.new_class_ids {
            if self.id_class_ids.contains(id) || *id == self.ood_id || *id == self.ignore_id {
                return Err(Error::LabelValue(format!(
                    "new class `{name}` id {id} collides with a reserved id"
                )));
            }
            if !seen.insert(*id) {
                return Err(Error::LabelValue(format!("duplicate new class id {id}")));
            }
        }
        Ok(())
    }

    pub fn new_class_id(&self, name: &str) -> Option<u16> {
        self.new_class_ids
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, id)| id)
    }

    /// True for any id the convention knows about, including ignore.
    pub fn contains(&self, v: u16) -> bool {
        v == self.ignore_id || self.is_assignable(v)
    }

    /// True for ids an inserted object may carry (everything but ignore).
    pub fn is_assignable(&self, v: u16) -> bool {
        self.id_class_ids.contains(&v)
            || v == self.ood_id
            || self.new_class_ids.iter().any(|&(_, id)| id == v)
    }

    pub fn check_assignable(&self, v: u16) -> Result<()> {
        if v == self.ignore_id {
            return Err(Error::LabelValue(format!("class id {v} is the ignore id")));
        }
        if !self.is_assignable(v) {
            return Err(Error::LabelValue(format!(
                "class id {v} is not part of the label convention"
            )));
        }
        Ok(())
    }
}
