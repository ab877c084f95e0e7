use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Comparison, ScorerSection};
use crate::dataset::{ImageRecord, StageGroup};
use crate::error::{Error, Result};

pub const QUANTILE_CONVENTION: &str = "linear interpolation between order statistics at index p*(n-1)";
pub const WHISKER_RULE: &str = "most extreme data point within 1.5*IQR of the quartiles; points beyond are outliers";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub image_id: String,
    /// Days from hospital admission.
    pub day: i64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTimeline {
    pub patient_id: String,
    pub points: Vec<TimelinePoint>,
}

/// Per-patient score series ordered by day; images without a day or a score
/// are left out.
pub fn build_timelines(records: &[ImageRecord], scores: &BTreeMap<String, f64>) -> Vec<PatientTimeline> {
    let mut by_patient: BTreeMap<&str, Vec<TimelinePoint>> = BTreeMap::new();
    for r in records {
        if let (Some(day), Some(&score)) = (r.day, scores.get(&r.image_id)) {
            by_patient.entry(&r.patient_id).or_default().push(TimelinePoint {
                image_id: r.image_id.clone(),
                day,
                score,
            });
        }
    }
    by_patient
        .into_iter()
        .map(|(p, mut points)| {
            points.sort_by(|a, b| a.day.cmp(&b.day).then_with(|| a.image_id.cmp(&b.image_id)));
            PatientTimeline {
                patient_id: p.to_string(),
                points,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub quantiles: String,
    pub whiskers: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            quantiles: QUANTILE_CONVENTION.into(),
            whiskers: WHISKER_RULE.into(),
        }
    }
}

/// Everything that goes into `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub conventions: Conventions,
    /// Run provenance (config hash, model fingerprints, grouping mode, ...).
    pub meta: BTreeMap<String, String>,
    pub comparison: Comparison,
    pub timelines: Vec<PatientTimeline>,
}

impl Report {
    pub fn new(meta: BTreeMap<String, String>, comparison: Comparison, timelines: Vec<PatientTimeline>) -> Self {
        Self {
            conventions: Conventions::default(),
            meta,
            comparison,
            timelines,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub dir: PathBuf,
    /// File names relative to `dir`, in write order.
    pub files: Vec<String>,
}

/// Lowercase ASCII alphanumerics, everything else folded to `_`.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if s.is_empty() {
        "_".into()
    } else {
        s
    }
}

fn unique_name(prefix: &str, name: &str, taken: &mut BTreeSet<String>) -> String {
    let base = format!("{prefix}_{}", slug(name));
    let mut candidate = format!("{base}.svg");
    let mut k = 2;
    while !taken.insert(candidate.clone()) {
        candidate = format!("{base}_{k}.svg");
        k += 1;
    }
    candidate
}

/// Writes `report.json`, one box plot per scorer and one timeline per patient.
pub fn emit_report(dir: impl AsRef<Path>, report: &Report) -> Result<ReportBundle> {
    let dir = dir.as_ref();
    if report.comparison.scorers.iter().all(|s| s.grouped.stats.is_empty()) {
        return Err(Error::invalid("report needs at least one non-empty group"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))
    };
    let mut files = Vec::new();
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write("report.json", &json)?;
    files.push("report.json".to_string());

    let mut taken = BTreeSet::new();
    for scorer in &report.comparison.scorers {
        let name = unique_name("boxplot", &scorer.name, &mut taken);
        write(&name, &render_boxplot_svg(scorer))?;
        files.push(name);
    }
    for t in &report.timelines {
        let name = unique_name("timeline", &t.patient_id, &mut taken);
        write(&name, &render_timeline_svg(t))?;
        files.push(name);
    }
    Ok(ReportBundle {
        dir: dir.to_path_buf(),
        files,
    })
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Fixed two-decimal coordinates keep the output byte-stable.
fn c(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = W,
        h = H
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        c(W / 2.0),
        esc(title)
    );
}

fn y_axis(out: &mut String, lo: f64, hi: f64, y: &dyn Fn(f64) -> f64) {
    let _ = writeln!(
        out,
        r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = c(LEFT),
        t = c(TOP),
        b = c(H - BOTTOM)
    );
    for k in 0..=5 {
        let v = lo + (hi - lo) * k as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{yy}" x2="{}" y2="{yy}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            c(LEFT - 5.0),
            c(LEFT),
            c(LEFT - 8.0),
            c(y(v) + 4.0),
            esc(&format!("{v:.3}")),
            yy = c(y(v)),
        );
    }
}

/// Box plot of one scorer over the four stage groups; each non-empty group
/// is drawn as a single `rect` with class `box`.
pub fn render_boxplot_svg(scorer: &ScorerSection) -> String {
    let (mut lo, mut hi) = scorer.range;
    for g in &scorer.grouped.stats {
        lo = lo.min(g.stats.min);
        hi = hi.max(g.stats.max);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let y = |v: f64| H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM);
    let slot = (W - LEFT - RIGHT) / StageGroup::ALL.len() as f64;
    let mut out = String::new();
    svg_open(&mut out, &format!("{} by stage group", scorer.name));
    y_axis(&mut out, lo, hi, &y);
    for (i, g) in StageGroup::ALL.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let n = scorer.grouped.counts.get(g).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{g} (n={n})</text>"#,
            c(cx),
            c(H - BOTTOM + 20.0)
        );
        let Some(s) = scorer.grouped.get(*g) else {
            continue;
        };
        let half = slot * 0.25;
        let _ = writeln!(out, r#"<g class="group" data-group="{g}">"#);
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            c(y(s.whisker_low)),
            c(y(s.q1)),
            x = c(cx)
        );
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            c(y(s.q3)),
            c(y(s.whisker_high)),
            x = c(cx)
        );
        for w in [s.whisker_low, s.whisker_high] {
            let _ = writeln!(
                out,
                r#"<line class="cap" x1="{}" y1="{yy}" x2="{}" y2="{yy}" stroke="black"/>"#,
                c(cx - half / 2.0),
                c(cx + half / 2.0),
                yy = c(y(w))
            );
        }
        let _ = writeln!(
            out,
            r##"<rect class="box" x="{}" y="{}" width="{}" height="{}" fill="#9ecae1" stroke="black"/>"##,
            c(cx - half),
            c(y(s.q3)),
            c(2.0 * half),
            c(y(s.q1) - y(s.q3))
        );
        let _ = writeln!(
            out,
            r#"<line class="median" x1="{}" y1="{yy}" x2="{}" y2="{yy}" stroke="black" stroke-width="2"/>"#,
            c(cx - half),
            c(cx + half),
            yy = c(y(s.median))
        );
        for o in &s.outliers {
            let _ = writeln!(
                out,
                r#"<circle class="outlier" cx="{}" cy="{}" r="3" fill="none" stroke="black"/>"#,
                c(cx),
                c(y(*o))
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Score against days from hospital admission with a dashed line through
/// the points.
pub fn render_timeline_svg(t: &PatientTimeline) -> String {
    let (dmin, dmax) = t
        .points
        .iter()
        .fold((i64::MAX, i64::MIN), |(a, b), p| (a.min(p.day), b.max(p.day)));
    let (dmin, dmax) = if t.points.is_empty() {
        (0, 1)
    } else if dmin == dmax {
        (dmin - 1, dmax + 1)
    } else {
        (dmin, dmax)
    };
    let lo = t.points.iter().map(|p| p.score).fold(0.0, f64::min);
    let hi = t.points.iter().map(|p| p.score).fold(1.0, f64::max);
    let x = |d: i64| LEFT + (d - dmin) as f64 / (dmax - dmin) as f64 * (W - LEFT - RIGHT);
    let y = |v: f64| H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM);
    let mut out = String::new();
    svg_open(&mut out, &format!("patient {}", t.patient_id));
    y_axis(&mut out, lo, hi, &y);
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{b}" x2="{}" y2="{b}" stroke="black"/>"#,
        c(LEFT),
        c(W - RIGHT),
        b = c(H - BOTTOM)
    );
    let step = ((dmax - dmin) / 10).max(1);
    let mut d = dmin;
    while d <= dmax {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{d}</text>"#,
            c(x(d)),
            c(H - BOTTOM + 18.0)
        );
        d += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">days from hospital admission</text>"#,
        c((LEFT + W - RIGHT) / 2.0),
        c(H - 15.0)
    );
    let pts: Vec<String> = t.points.iter().map(|p| format!("{},{}", c(x(p.day)), c(y(p.score)))).collect();
    let _ = writeln!(
        out,
        r##"<polyline class="trend" points="{}" fill="none" stroke="#d62728" stroke-dasharray="6 4"/>"##,
        pts.join(" ")
    );
    for p in &t.points {
        let _ = writeln!(
            out,
            r##"<circle class="point" cx="{}" cy="{}" r="4" fill="#1f77b4"><title>{} day {}: {:.4}</title></circle>"##,
            c(x(p.day)),
            c(y(p.score)),
            esc(&p.image_id),
            p.day,
            p.score
        );
    }
    out.push_str("</svg>\n");
    out
}
