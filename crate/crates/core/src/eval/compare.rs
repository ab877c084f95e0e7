use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{group_scores, trend_check, GroupedScores, TrendConfig, TrendReport};
use crate::dataset::StageGroup;
use crate::error::{Error, Result};

/// Scores produced by another method, with its declared output range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScoreSet {
    pub method: String,
    pub range: (f64, f64),
    pub scores: BTreeMap<String, f64>,
}

impl ExternalScoreSet {
    pub fn new(method: impl Into<String>, range: (f64, f64), scores: BTreeMap<String, f64>) -> Result<Self> {
        let set = Self {
            method: method.into(),
            range,
            scores,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validation(format!(
                "method '{}': invalid range [{lo}, {hi}]",
                self.method
            )));
        }
        for (id, &s) in &self.scores {
            if !(lo..=hi).contains(&s) {
                return Err(Error::Validation(format!(
                    "method '{}': score {s} for image '{id}' outside declared range [{lo}, {hi}]",
                    self.method
                )));
            }
        }
        Ok(())
    }

    /// Reads `image_id,score` CSV (header required, extra columns ignored).
    pub fn from_csv_reader(method: &str, range: (f64, f64), reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.eq_ignore_ascii_case(name)).ok_or_else(|| {
                Error::Schema(format!("method '{method}': score file lacks column '{name}'"))
            })
        };
        let (id_col, score_col) = (col("image_id")?, col("score")?);
        let mut scores = BTreeMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let id = row.get(id_col).unwrap_or("").to_string();
            let raw = row.get(score_col).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| {
                Error::Validation(format!("method '{method}': line {line}: bad score '{raw}' for '{id}'"))
            })?;
            if id.is_empty() {
                return Err(Error::Validation(format!("method '{method}': line {line}: empty image_id")));
            }
            if scores.insert(id.clone(), value).is_some() {
                return Err(Error::Validation(format!("method '{method}': duplicate image_id '{id}'")));
            }
        }
        Self::new(method, range, scores)
    }

    pub fn from_csv(method: &str, range: (f64, f64), path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(method, range, file)
    }
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when fewer
/// than two pairs or either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSection {
    pub name: String,
    pub range: (f64, f64),
    pub grouped: GroupedScores,
    pub trend: TrendReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanEntry {
    pub a: String,
    pub b: String,
    pub n_common: usize,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scorers: Vec<ScorerSection>,
    pub spearman: Vec<SpearmanEntry>,
}

/// Applies the same grouping to the native scores and every external set,
/// and correlates every pair of scorers over their common images.
pub fn compare_methods(
    native: &ExternalScoreSet,
    externals: &[ExternalScoreSet],
    assignments: &BTreeMap<String, Vec<StageGroup>>,
    trend: &TrendConfig,
) -> Result<Comparison> {
    let all: Vec<&ExternalScoreSet> = std::iter::once(native).chain(externals).collect();
    let mut scorers = Vec::with_capacity(all.len());
    for set in &all {
        set.validate()?;
        let grouped = group_scores(assignments, &set.scores)?;
        let trend = trend_check(&grouped.stats, trend);
        scorers.push(ScorerSection {
            name: set.method.clone(),
            range: set.range,
            grouped,
            trend,
        });
    }
    let mut pairs = Vec::new();
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            let (xa, xb): (Vec<f64>, Vec<f64>) = a
                .scores
                .iter()
                .filter_map(|(id, &s)| b.scores.get(id).map(|&t| (s, t)))
                .unzip();
            pairs.push(SpearmanEntry {
                a: a.method.clone(),
                b: b.method.clone(),
                n_common: xa.len(),
                rho: spearman(&xa, &xb),
            });
        }
    }
    Ok(Comparison {
        scorers,
        spearman: pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(name: &str, range: (f64, f64), v: &[(&str, f64)]) -> ExternalScoreSet {
        ExternalScoreSet::new(name, range, v.iter().map(|(k, s)| (k.to_string(), *s)).collect()).unwrap()
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(average_ranks(&[5.0, 1.0, 5.0, 3.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn out_of_range_is_named() {
        let err = ExternalScoreSet::new("brixia", (0.0, 18.0), [("img7".to_string(), 19.0)].into()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("img7") && msg.contains("brixia"), "{msg}");
    }

    #[test]
    fn csv_ingest() {
        let text = "image_id,score\na,3\nb,0.5\n";
        let s = ExternalScoreSet::from_csv_reader("opacity", (0.0, 6.0), text.as_bytes()).unwrap();
        assert_eq!(s.scores["a"], 3.0);
        assert!(ExternalScoreSet::from_csv_reader("opacity", (0.0, 6.0), "image_id,score\na,7\n".as_bytes()).is_err());
        assert!(ExternalScoreSet::from_csv_reader("opacity", (0.0, 6.0), "id,score\na,1\n".as_bytes()).is_err());
        assert!(ExternalScoreSet::from_csv_reader("o", (0.0, 6.0), "image_id,score\na,1\na,2\n".as_bytes()).is_err());
    }

    #[test]
    fn comparison_against_self_and_inverse() {
        let v = [("a", 0.1), ("b", 0.4), ("c", 0.35), ("d", 0.9)];
        let native = set("native", (0.0, 1.0), &v);
        let copy = set("copy", (0.0, 1.0), &v);
        let inv: Vec<(&str, f64)> = v.iter().map(|(k, s)| (*k, 1.0 - s)).collect();
        let inverse = set("inverse", (0.0, 1.0), &inv);
        let assignments: BTreeMap<String, Vec<StageGroup>> = [
            ("a".to_string(), vec![StageGroup::G1]),
            ("b".to_string(), vec![StageGroup::G2]),
            ("c".to_string(), vec![StageGroup::G2]),
            ("d".to_string(), vec![StageGroup::G3]),
        ]
        .into();
        let c = compare_methods(&native, &[copy, inverse], &assignments, &TrendConfig::default()).unwrap();
        assert_eq!(c.scorers.len(), 3);
        assert_eq!(c.scorers[0].grouped, c.scorers[1].grouped);
        assert_eq!(c.spearman[0].rho, Some(1.0));
        assert_eq!(c.spearman[1].rho, Some(-1.0));
        assert_eq!(c.spearman[0].n_common, 4);
    }

    proptest! {
        #[test]
        fn spearman_identities(v in prop::collection::hash_set(-1000i32..1000, 2..60)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            prop_assert_eq!(spearman(&v, &v), Some(1.0));
            let dec: Vec<f64> = v.iter().map(|x| -3.0 * x + 1.0).collect();
            prop_assert_eq!(spearman(&v, &dec), Some(-1.0));
        }
    }
}
