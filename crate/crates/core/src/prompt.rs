use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::UNCONSTRAINED;

pub const INPAINT_TEMPLATE_PREFIX: &str = "A good photo of ";
pub const DEFAULT_LOCATION: &str = "the road";
/// Classes placed anywhere instead of on the road.
pub const UNCONSTRAINED_CLASSES: [&str; 1] = ["bird"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassRole {
    /// Anomaly, labelled with the OOD id.
    Ood,
    /// Known class inserted synthetically, labelled as in-distribution.
    IdSynthetic,
    /// Class added to the label set.
    NewClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub object_prompt: String,
    pub location_prompt: String,
    pub inpaint_prompt: String,
    pub class_name: String,
    pub class_id: u16,
    pub class_role: ClassRole,
}

pub fn build_prompt(
    object_prompt: &str,
    class_name: &str,
    class_id: u16,
    class_role: ClassRole,
) -> Result<PromptSet> {
    if object_prompt.trim().is_empty() {
        return Err(Error::Prompt("object prompt is empty".into()));
    }
    let location = if UNCONSTRAINED_CLASSES.contains(&class_name) {
        UNCONSTRAINED
    } else {
        DEFAULT_LOCATION
    };
    Ok(PromptSet {
        object_prompt: object_prompt.to_string(),
        location_prompt: location.to_string(),
        inpaint_prompt: format!("{INPAINT_TEMPLATE_PREFIX}{object_prompt}"),
        class_name: class_name.to_string(),
        class_id,
        class_role,
    })
}
