//! CSV tables exchanged between commands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use cxr_severity::model_runtime::PathologyFeatures;

/// `image_id,<label 1>,...,<label n>`; rows keep their order.
pub fn write_features(path: &Path, labels: &[String], rows: &[PathologyFeatures]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(std::iter::once("image_id").chain(labels.iter().map(String::as_str)))?;
    for f in rows {
        ensure!(f.names == labels, "features of '{}' do not follow the label order", f.image_id);
        w.write_record(std::iter::once(f.image_id.clone()).chain(f.values.iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

pub struct FeatureTable {
    pub labels: Vec<String>,
    pub rows: BTreeMap<String, PathologyFeatures>,
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    ensure!(
        headers.get(0) == Some("image_id"),
        "{}: first column must be image_id",
        path.display()
    );
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    ensure!(!labels.is_empty(), "{}: no feature columns", path.display());
    let mut rows = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: line {}: bad number", path.display(), i + 2))?;
        let f = PathologyFeatures::new(id.clone(), labels.clone(), values)?;
        if rows.insert(id.clone(), f).is_some() {
            bail!("{}: duplicate image_id '{id}'", path.display());
        }
    }
    Ok(FeatureTable { labels, rows })
}

pub fn write_scores(path: &Path, scores: &BTreeMap<String, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["image_id", "score"])?;
    for (id, s) in scores {
        w.write_record([id.as_str(), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_string();
        let score: f64 = rec.get(1).unwrap_or("").parse().with_context(|| format!("score of '{id}'"))?;
        out.insert(id, score);
    }
    Ok(out)
}
