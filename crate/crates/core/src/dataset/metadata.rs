use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ImageRecord, TriState};
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "pgm", "pnm", "ppm"];

/// Column layout of a metadata table.
///
/// * `cohen`: `patient_id`, image `file`, `went_icu`, `in_icu` (optional
///   `image_id`, `day`)
/// * `hanno`: `patient_id`, image `file`, `day`, `icu_admit_day`,
///   `icu_release_day` (optional `image_id`, `went_icu`)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataSchema {
    Cohen,
    Hanno,
}

impl std::str::FromStr for MetadataSchema {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cohen" => Ok(MetadataSchema::Cohen),
            "hanno" => Ok(MetadataSchema::Hanno),
            _ => Err(Error::invalid(format!("unknown metadata schema '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line in the source table (the header is line 1).
    pub line: usize,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedMetadata {
    pub records: Vec<ImageRecord>,
    pub rejects: Vec<Reject>,
}

struct Columns {
    patient_id: usize,
    file: usize,
    image_id: Option<usize>,
    day: Option<usize>,
    icu_admit_day: Option<usize>,
    icu_release_day: Option<usize>,
    went_icu: Option<usize>,
    in_icu: Option<usize>,
}

fn find(headers: &[String], aliases: &[&str]) -> Option<usize> {
    aliases
        .iter()
        .find_map(|a| headers.iter().position(|h| h == a))
}

fn require(headers: &[String], aliases: &[&str]) -> Result<usize> {
    find(headers, aliases).ok_or_else(|| {
        Error::Schema(format!("missing required column '{}'", aliases[0]))
    })
}

impl Columns {
    fn resolve(headers: &[String], schema: MetadataSchema) -> Result<Self> {
        let patient_id = require(headers, &["patient_id", "patientid"])?;
        let file = require(headers, &["file", "filename", "image_file"])?;
        let image_id = find(headers, &["image_id"]);
        Ok(match schema {
            MetadataSchema::Cohen => Columns {
                patient_id,
                file,
                image_id,
                day: find(headers, &["day", "offset"]),
                icu_admit_day: None,
                icu_release_day: None,
                went_icu: Some(require(headers, &["went_icu"])?),
                in_icu: Some(require(headers, &["in_icu", "in_icu_at_capture"])?),
            },
            MetadataSchema::Hanno => Columns {
                patient_id,
                file,
                image_id,
                day: Some(require(headers, &["day"])?),
                icu_admit_day: Some(require(headers, &["icu_admit_day"])?),
                icu_release_day: Some(require(headers, &["icu_release_day"])?),
                went_icu: find(headers, &["went_icu"]),
                in_icu: None,
            },
        })
    }
}

fn parse_day(raw: &str, column: &str) -> std::result::Result<Option<i64>, String> {
    let raw = raw.trim();
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(Some(v));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 => Ok(Some(v as i64)),
        _ => Err(format!("{column} '{raw}' is not an integer day offset")),
    }
}

fn image_stem(file: &str) -> Option<(String, String)> {
    let path = Path::new(file);
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let stem = path.file_stem()?.to_str()?.to_string();
    Some((stem, ext))
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &Columns,
    schema: MetadataSchema,
) -> std::result::Result<ImageRecord, String> {
    let get = |i: usize| row.get(i).unwrap_or("").trim();
    let get_opt = |i: Option<usize>| i.map(get).unwrap_or("");

    let patient_id = get(cols.patient_id);
    if patient_id.is_empty() {
        return Err("empty patient_id".into());
    }
    let file = get(cols.file);
    let (stem, ext) = image_stem(file).ok_or_else(|| format!("'{file}' is not an image file name"))?;
    if !IMAGE_EXTENSIONS.contains(&ext.as_str()) {
        return Err(format!("unrecognized image file type '{file}'"));
    }
    let image_id = match get_opt(cols.image_id) {
        "" => stem,
        id => id.to_string(),
    };
    let tri = |i: Option<usize>, name: &str| {
        TriState::parse(get_opt(i)).ok_or_else(|| format!("{name} '{}' is not yes/no", get_opt(i)))
    };
    let day = cols.day.map(|i| parse_day(get(i), "day")).transpose()?.flatten();
    let icu_admit_day = cols
        .icu_admit_day
        .map(|i| parse_day(get(i), "icu_admit_day"))
        .transpose()?
        .flatten();
    let icu_release_day = cols
        .icu_release_day
        .map(|i| parse_day(get(i), "icu_release_day"))
        .transpose()?
        .flatten();

    let (went_icu, in_icu_at_capture) = match schema {
        MetadataSchema::Cohen => (tri(cols.went_icu, "went_icu")?, tri(cols.in_icu, "in_icu")?),
        MetadataSchema::Hanno => {
            let declared = tri(cols.went_icu, "went_icu")?;
            let went = match (icu_admit_day, declared) {
                (Some(_), TriState::No) => {
                    return Err("icu_admit_day given but went_icu is no".into())
                }
                (Some(_), _) => TriState::Yes,
                (None, TriState::Unknown) => TriState::No,
                (None, d) => d,
            };
            let in_icu = match (day, icu_admit_day) {
                (None, _) => TriState::Unknown,
                (Some(_), None) => TriState::No,
                (Some(d), Some(a)) => {
                    let inside = d >= a && icu_release_day.is_none_or(|r| d <= r);
                    if inside {
                        TriState::Yes
                    } else {
                        TriState::No
                    }
                }
            };
            (went, in_icu)
        }
    };
    let record = ImageRecord {
        image_id,
        patient_id: patient_id.to_string(),
        file: file.to_string(),
        day,
        icu_admit_day,
        icu_release_day,
        went_icu,
        in_icu_at_capture,
    };
    record.check()?;
    Ok(record)
}

/// Parses a metadata table. Rows that break the schema or a record invariant
/// land in `rejects`; a missing required column fails the whole table.
pub fn parse_metadata<R: Read>(reader: R, schema: MetadataSchema) -> Result<ParsedMetadata> {
    let mut csv = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = csv
        .headers()?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase())
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(Error::Schema("header row is missing".into()));
    }
    let cols = Columns::resolve(&headers, schema)?;
    let mut out = ParsedMetadata::default();
    let mut seen = HashSet::new();
    for (i, row) in csv.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(Reject {
                    line,
                    reason: format!("unreadable row: {e}"),
                    raw: String::new(),
                });
                continue;
            }
        };
        let raw = row.iter().collect::<Vec<_>>().join(",");
        match parse_row(&row, &cols, schema) {
            Ok(rec) if !seen.insert(rec.image_id.clone()) => out.rejects.push(Reject {
                line,
                reason: format!("duplicate image_id '{}'", rec.image_id),
                raw,
            }),
            Ok(rec) => out.records.push(rec),
            Err(reason) => out.rejects.push(Reject { line, reason, raw }),
        }
    }
    Ok(out)
}

pub fn parse_metadata_file(path: impl AsRef<Path>, schema: MetadataSchema) -> Result<ParsedMetadata> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(file, schema)
}

fn day_str(d: Option<i64>) -> String {
    d.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes records back in the canonical column layout of `schema`.
pub fn write_metadata<W: Write>(records: &[ImageRecord], schema: MetadataSchema, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    match schema {
        MetadataSchema::Cohen => {
            csv.write_record(["image_id", "patient_id", "file", "day", "went_icu", "in_icu"])?;
            for r in records {
                csv.write_record([
                    r.image_id.as_str(),
                    &r.patient_id,
                    &r.file,
                    &day_str(r.day),
                    r.went_icu.as_str(),
                    r.in_icu_at_capture.as_str(),
                ])?;
            }
        }
        MetadataSchema::Hanno => {
            csv.write_record([
                "image_id",
                "patient_id",
                "file",
                "day",
                "icu_admit_day",
                "icu_release_day",
                "went_icu",
            ])?;
            for r in records {
                csv.write_record([
                    r.image_id.as_str(),
                    &r.patient_id,
                    &r.file,
                    &day_str(r.day),
                    &day_str(r.icu_admit_day),
                    &day_str(r.icu_release_day),
                    r.went_icu.as_str(),
                ])?;
            }
        }
    }
    csv.flush().map_err(|e| Error::io("<metadata writer>", e))?;
    Ok(())
}

pub fn write_records_jsonl(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn write_rejects_csv(rejects: &[Reject], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record(["line", "reason", "raw"])?;
    for r in rejects {
        csv.write_record([r.line.to_string().as_str(), &r.reason, &r.raw])?;
    }
    csv.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
