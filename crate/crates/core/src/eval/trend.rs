use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BoxStats, GroupStats};
use crate::dataset::StageGroup::{self, G1, G2, G3, G4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredicateId {
    P1,
    P2,
    P3,
    P4,
}

impl fmt::Display for PredicateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which default predicates to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendConfig {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub p4: bool,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self {
            p1: true,
            p2: true,
            p3: true,
            p4: true,
        }
    }
}

impl TrendConfig {
    fn enabled(&self, id: PredicateId) -> bool {
        match id {
            PredicateId::P1 => self.p1,
            PredicateId::P2 => self.p2,
            PredicateId::P3 => self.p3,
            PredicateId::P4 => self.p4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateStatus {
    Pass,
    Fail,
    NotEvaluable,
}

/// One observed comparison `lhs relation rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: String,
    pub lhs_value: f64,
    pub relation: String,
    pub rhs: String,
    pub rhs_value: f64,
    pub holds: bool,
}

/// Outcome of P1 under one reading of the compared statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub statistic: String,
    pub comparisons: Vec<Comparison>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateResult {
    pub id: PredicateId,
    pub expected: String,
    pub interpretation: String,
    pub comparisons: Vec<Comparison>,
    /// Groups the predicate needs that have no scores.
    pub missing_groups: Vec<StageGroup>,
    pub status: PredicateStatus,
    /// Alternative readings of the compared statistic (P1 only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternative_readings: Vec<Reading>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub passed: usize,
    pub failed: usize,
    pub not_evaluable: usize,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub predicates: Vec<PredicateResult>,
    pub summary: TrendSummary,
}

impl TrendReport {
    pub fn get(&self, id: PredicateId) -> Option<&PredicateResult> {
        self.predicates.iter().find(|p| p.id == id)
    }
}

#[derive(Clone, Copy)]
enum Rel {
    Lt,
    Le,
    Ge,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Ge => ">=",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Ge => a >= b,
        }
    }
}

fn statistic(s: &BoxStats, name: &str) -> f64 {
    match name {
        "q1" => s.q1,
        "median" => s.median,
        "q3" => s.q3,
        _ => unreachable!("unknown statistic {name}"),
    }
}

fn compare(
    stats: &[GroupStats],
    lhs: (StageGroup, &str),
    rel: Rel,
    rhs: (StageGroup, &str),
) -> Option<Comparison> {
    let find = |g| stats.iter().find(|s| s.group == g).map(|s| &s.stats);
    let a = statistic(find(lhs.0)?, lhs.1);
    let b = statistic(find(rhs.0)?, rhs.1);
    Some(Comparison {
        lhs: format!("{}({})", lhs.1, lhs.0),
        lhs_value: a,
        relation: rel.symbol().into(),
        rhs: format!("{}({})", rhs.1, rhs.0),
        rhs_value: b,
        holds: rel.holds(a, b),
    })
}

struct Spec {
    id: PredicateId,
    expected: &'static str,
    interpretation: &'static str,
    checks: Vec<((StageGroup, &'static str), Rel, (StageGroup, &'static str))>,
}

fn specs() -> Vec<Spec> {
    vec![
        Spec {
            id: PredicateId::P1,
            expected: "q3(G1) < q1(Gk) for k in {G2, G3, G4}",
            interpretation: "the non-ICU upper quartile lies below the lower quartile of every other group; \
                             readings against the other groups' median and q3 are listed as alternatives",
            checks: [G2, G3, G4].map(|g| ((G1, "q3"), Rel::Lt, (g, "q1"))).into(),
        },
        Spec {
            id: PredicateId::P2,
            expected: "median(G2) >= median(G4)",
            interpretation: "scores near ICU admission are at least as high as near ICU release",
            checks: vec![((G2, "median"), Rel::Ge, (G4, "median"))],
        },
        Spec {
            id: PredicateId::P3,
            expected: "median(G1) < median(Gk) for k in {G2, G3, G4}",
            interpretation: "the non-ICU group has the lowest median",
            checks: [G2, G3, G4].map(|g| ((G1, "median"), Rel::Lt, (g, "median"))).into(),
        },
        Spec {
            id: PredicateId::P4,
            expected: "median(G4) <= median(G3)",
            interpretation: "scores near ICU release do not exceed scores inside the ICU stay",
            checks: vec![((G4, "median"), Rel::Le, (G3, "median"))],
        },
    ]
}

/// Evaluates the enabled default predicates. Predicates touching a group
/// without scores are reported as not evaluable.
pub fn trend_check(stats: &[GroupStats], config: &TrendConfig) -> TrendReport {
    let present = |g: StageGroup| stats.iter().any(|s| s.group == g);
    let mut predicates = Vec::new();
    for spec in specs().into_iter().filter(|s| config.enabled(s.id)) {
        let mut missing: Vec<StageGroup> = spec
            .checks
            .iter()
            .flat_map(|(l, _, r)| [l.0, r.0])
            .filter(|g| !present(*g))
            .collect();
        missing.sort();
        missing.dedup();
        let comparisons: Vec<Comparison> = spec
            .checks
            .iter()
            .filter_map(|&(l, rel, r)| compare(stats, l, rel, r))
            .collect();
        let status = if !missing.is_empty() {
            PredicateStatus::NotEvaluable
        } else if comparisons.iter().all(|c| c.holds) {
            PredicateStatus::Pass
        } else {
            PredicateStatus::Fail
        };
        let alternative_readings = if spec.id == PredicateId::P1 {
            ["q1", "median", "q3"]
                .into_iter()
                .map(|stat| {
                    let comparisons: Vec<Comparison> = [G2, G3, G4]
                        .into_iter()
                        .filter_map(|g| compare(stats, (G1, "q3"), Rel::Lt, (g, stat)))
                        .collect();
                    Reading {
                        statistic: stat.into(),
                        holds: missing.is_empty() && comparisons.iter().all(|c| c.holds),
                        comparisons,
                    }
                })
                .collect()
        } else {
            Vec::new()
        };
        predicates.push(PredicateResult {
            id: spec.id,
            expected: spec.expected.into(),
            interpretation: spec.interpretation.into(),
            comparisons,
            missing_groups: missing,
            status,
            alternative_readings,
        });
    }
    let count = |st| predicates.iter().filter(|p| p.status == st).count();
    let summary = TrendSummary {
        passed: count(PredicateStatus::Pass),
        failed: count(PredicateStatus::Fail),
        not_evaluable: count(PredicateStatus::NotEvaluable),
        all_pass: predicates.iter().all(|p| p.status == PredicateStatus::Pass),
    };
    TrendReport { predicates, summary }
}
