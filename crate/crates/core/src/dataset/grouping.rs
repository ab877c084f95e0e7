use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ImageRecord, TriState};

/// Disease-stage cohort of a validation image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageGroup {
    /// Patient never admitted to the ICU.
    G1,
    /// Within one day of ICU admission.
    G2,
    /// Inside the ICU stay, away from both ends.
    G3,
    /// Within one day of ICU release.
    G4,
}

impl StageGroup {
    pub const ALL: [StageGroup; 4] = [StageGroup::G1, StageGroup::G2, StageGroup::G3, StageGroup::G4];

    pub fn description(self) -> &'static str {
        match self {
            StageGroup::G1 => "not admitted to ICU",
            StageGroup::G2 => "near ICU admission",
            StageGroup::G3 => "in ICU",
            StageGroup::G4 => "near ICU release",
        }
    }
}

impl fmt::Display for StageGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupingMode {
    /// At most one group, precedence G1 > G2 > G4 > G3.
    #[default]
    Exclusive,
    /// Every group whose rule matches.
    Overlapping,
}

impl std::str::FromStr for GroupingMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "exclusive" => Ok(GroupingMode::Exclusive),
            "overlapping" => Ok(GroupingMode::Overlapping),
            _ => Err(crate::Error::invalid(format!(
                "grouping mode must be exclusive or overlapping, got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingMode::Exclusive => "exclusive",
            GroupingMode::Overlapping => "overlapping",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unassignable {
    MissingDay,
    /// ICU admission recorded as yes but without a day offset.
    IcuWithoutAdmitDay,
}

impl fmt::Display for Unassignable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unassignable::MissingDay => "missing day offset",
            Unassignable::IcuWithoutAdmitDay => "ICU admission without admission day",
        })
    }
}

/// Every group whose rule matches the record.
///
/// * G1: no ICU admission
/// * G2: `|day - admit| <= 1`
/// * G3: `admit + 1 <= day <= release - 1` (open-ended while release is unknown)
/// * G4: `|day - release| <= 1`
pub fn matching_groups(r: &ImageRecord) -> Result<BTreeSet<StageGroup>, Unassignable> {
    let day = r.day.ok_or(Unassignable::MissingDay)?;
    let mut groups = BTreeSet::new();
    let Some(admit) = r.icu_admit_day else {
        if r.went_icu == TriState::Yes {
            return Err(Unassignable::IcuWithoutAdmitDay);
        }
        groups.insert(StageGroup::G1);
        return Ok(groups);
    };
    if (day - admit).abs() <= 1 {
        groups.insert(StageGroup::G2);
    }
    let in_stay = day >= admit + 1 && r.icu_release_day.is_none_or(|rel| day <= rel - 1);
    if in_stay {
        groups.insert(StageGroup::G3);
    }
    if let Some(rel) = r.icu_release_day {
        if (day - rel).abs() <= 1 {
            groups.insert(StageGroup::G4);
        }
    }
    Ok(groups)
}

/// Exclusive assignment with precedence G1 > G2 > G4 > G3; `None` when the
/// image falls in no group (e.g. days before an ICU admission).
pub fn assign_group(r: &ImageRecord) -> Result<Option<StageGroup>, Unassignable> {
    let groups = matching_groups(r)?;
    Ok([StageGroup::G1, StageGroup::G2, StageGroup::G4, StageGroup::G3]
        .into_iter()
        .find(|g| groups.contains(g)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub mode: GroupingMode,
    /// image id -> groups (exactly one in exclusive mode)
    pub groups: BTreeMap<String, Vec<StageGroup>>,
    /// Images with a day offset that match no group.
    pub ungrouped: Vec<String>,
    pub unassignable: Vec<(String, Unassignable)>,
}

impl GroupAssignment {
    pub fn counts(&self) -> BTreeMap<StageGroup, usize> {
        let mut counts: BTreeMap<StageGroup, usize> = StageGroup::ALL.iter().map(|&g| (g, 0)).collect();
        for gs in self.groups.values() {
            for g in gs {
                *counts.entry(*g).or_default() += 1;
            }
        }
        counts
    }
}

pub fn assign_all(records: &[ImageRecord], mode: GroupingMode) -> GroupAssignment {
    let mut out = GroupAssignment {
        mode,
        ..Default::default()
    };
    for r in records {
        let groups = match mode {
            GroupingMode::Exclusive => assign_group(r).map(|g| g.into_iter().collect::<Vec<_>>()),
            GroupingMode::Overlapping => matching_groups(r).map(|s| s.into_iter().collect()),
        };
        match groups {
            Ok(gs) if gs.is_empty() => out.ungrouped.push(r.image_id.clone()),
            Ok(gs) => {
                out.groups.insert(r.image_id.clone(), gs);
            }
            Err(why) => out.unassignable.push((r.image_id.clone(), why)),
        }
    }
    out
}
