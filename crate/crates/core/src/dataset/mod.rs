//! Image metadata: ingestion of the two source schemas, training-class
//! derivation and validation stage groups.

mod grouping;
mod metadata;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grouping::{
    assign_all, assign_group, matching_groups, GroupAssignment, GroupingMode, StageGroup,
    Unassignable,
};
pub use metadata::{
    parse_metadata, parse_metadata_file, read_records_jsonl, write_metadata, write_records_jsonl,
    write_rejects_csv, MetadataSchema, ParsedMetadata, Reject,
};

/// Yes / no / not recorded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    Yes,
    No,
    #[default]
    Unknown,
}

impl TriState {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" | "true" | "1" => Some(TriState::Yes),
            "n" | "no" | "false" | "0" => Some(TriState::No),
            "" | "na" | "n/a" | "nan" | "unknown" | "?" => Some(TriState::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TriState::Yes => "yes",
            TriState::No => "no",
            TriState::Unknown => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub patient_id: String,
    pub file: String,
    /// Days since hospital admission.
    pub day: Option<i64>,
    pub icu_admit_day: Option<i64>,
    pub icu_release_day: Option<i64>,
    pub went_icu: TriState,
    pub in_icu_at_capture: TriState,
}

impl ImageRecord {
    /// Checks the record-level invariants, returning the violated rule.
    pub fn check(&self) -> std::result::Result<(), String> {
        if let (Some(admit), Some(release)) = (self.icu_admit_day, self.icu_release_day) {
            if release < admit {
                return Err(format!(
                    "icu_release_day {release} precedes icu_admit_day {admit}"
                ));
            }
        }
        if self.icu_release_day.is_some() && self.icu_admit_day.is_none() {
            return Err("icu_release_day given without icu_admit_day".into());
        }
        if self.icu_admit_day.is_some() && self.went_icu != TriState::Yes {
            return Err("icu_admit_day given but went_icu is not yes".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainingLabel {
    /// Imaged before an eventual ICU admission.
    FutureIcu,
    /// Recovered without intensive care.
    NotIcu,
}

impl TrainingLabel {
    /// Positive class for the severity model.
    pub fn is_positive(self) -> bool {
        self == TrainingLabel::FutureIcu
    }
}

impl fmt::Display for TrainingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingLabel::FutureIcu => "future icu",
            TrainingLabel::NotIcu => "not icu",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelDerivation {
    pub labeled: Vec<(ImageRecord, TrainingLabel)>,
    pub excluded: Vec<String>,
}

impl LabelDerivation {
    pub fn count(&self, label: TrainingLabel) -> usize {
        self.labeled.iter().filter(|(_, l)| *l == label).count()
    }
}

/// `FutureIcu` iff the patient went to the ICU and was not there when
/// imaged; `NotIcu` iff the patient never went. Everything else is excluded.
pub fn derive_training_labels(records: &[ImageRecord]) -> LabelDerivation {
    let mut out = LabelDerivation::default();
    for r in records {
        let label = match (r.went_icu, r.in_icu_at_capture) {
            (TriState::Yes, TriState::No) => Some(TrainingLabel::FutureIcu),
            (TriState::No, _) => Some(TrainingLabel::NotIcu),
            _ => None,
        };
        match label {
            Some(l) => out.labeled.push((r.clone(), l)),
            None => out.excluded.push(r.image_id.clone()),
        }
    }
    out
}

/// Reads an include list: one image id or file name per line, `#` comments.
pub fn load_include_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Keeps records whose image id or file name is listed.
pub fn filter_included(records: Vec<ImageRecord>, include: &BTreeSet<String>) -> Vec<ImageRecord> {
    records
        .into_iter()
        .filter(|r| include.contains(&r.image_id) || include.contains(&r.file))
        .collect()
}
