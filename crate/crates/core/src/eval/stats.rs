use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::StageGroup;
use crate::error::{Error, Result};

/// Five-number summary with Tukey whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    /// Points beyond the whiskers, ascending.
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: StageGroup,
    #[serde(flatten)]
    pub stats: BoxStats,
}

/// Quantile `p` of ascending data, interpolating linearly at index `p (n-1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn box_stats(scores: &[f64]) -> Result<BoxStats> {
    if scores.is_empty() {
        return Err(Error::invalid("box statistics need at least one score"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("scores contain non-finite values"));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&s, 0.25);
    let median = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside = s.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
    // a whisker never reaches inside the box
    let whisker_low = inside.clone().next().map_or(q1, |v| v.min(q1));
    let whisker_high = inside.last().map_or(q3, |v| v.max(q3));
    Ok(BoxStats {
        n: s.len(),
        min: s[0],
        q1,
        median,
        q3,
        max: s[s.len() - 1],
        iqr,
        whisker_low,
        whisker_high,
        outliers: s.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedScores {
    /// One block per non-empty group, in group order.
    pub stats: Vec<GroupStats>,
    pub counts: BTreeMap<StageGroup, usize>,
    pub empty_groups: Vec<StageGroup>,
    /// Scored images without a group assignment.
    pub unassigned: Vec<String>,
    /// Assigned images without a score.
    pub unscored: Vec<String>,
}

impl GroupedScores {
    pub fn get(&self, g: StageGroup) -> Option<&BoxStats> {
        self.stats.iter().find(|s| s.group == g).map(|s| &s.stats)
    }
}

/// Box statistics of the scores in each stage group. An image listed under
/// several groups (overlapping mode) contributes to each of them.
pub fn group_scores(
    assignments: &BTreeMap<String, Vec<StageGroup>>,
    scores: &BTreeMap<String, f64>,
) -> Result<GroupedScores> {
    let mut per_group: BTreeMap<StageGroup, Vec<f64>> = StageGroup::ALL.iter().map(|&g| (g, vec![])).collect();
    let mut unscored = Vec::new();
    for (id, groups) in assignments {
        match scores.get(id) {
            Some(&s) => {
                for g in groups {
                    per_group.entry(*g).or_default().push(s);
                }
            }
            None => unscored.push(id.clone()),
        }
    }
    let unassigned = scores.keys().filter(|id| !assignments.contains_key(*id)).cloned().collect();
    let mut stats = Vec::new();
    let mut empty_groups = Vec::new();
    for (g, values) in &per_group {
        if values.is_empty() {
            empty_groups.push(*g);
        } else {
            stats.push(GroupStats {
                group: *g,
                stats: box_stats(values)?,
            });
        }
    }
    Ok(GroupedScores {
        stats,
        counts: per_group.iter().map(|(g, v)| (*g, v.len())).collect(),
        empty_groups,
        unassigned,
        unscored,
    })
}
