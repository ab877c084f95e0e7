use std::path::{Path, PathBuf};

use cxr_severity::dataset::{write_metadata, ImageRecord, MetadataSchema, StageGroup, TriState};
use cxr_severity::imgproc::GrayImage;
use rand::Rng;

/// Paths of a synthetic corpus written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub images_dir: PathBuf,
    /// Cohen-layout table with the two training classes.
    pub training_metadata: PathBuf,
    /// Hanno-layout table with day offsets covering all four stage groups.
    pub validation_metadata: PathBuf,
    pub training: Vec<ImageRecord>,
    pub validation: Vec<ImageRecord>,
}

/// Smooth radiograph-like 8-bit image: darker mediastinum, two brighter
/// lung fields with per-image texture.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = crate::rng(seed);
    let noise: Vec<u8> = (0..width * height).map(|_| rng.gen_range(0..24)).collect();
    let opacity = rng.gen_range(0..60) as f64;
    GrayImage::from_fn(width, height, |x, y| {
        let u = x as f64 / width as f64 - 0.5;
        let v = y as f64 / height as f64 - 0.5;
        let lung = |cx: f64| ((u - cx) / 0.2).powi(2) + (v / 0.35).powi(2) < 1.0;
        let base = if lung(-0.23) || lung(0.23) { 60.0 + opacity * (v + 0.5) } else { 170.0 };
        (base + noise[y * width + x] as f64).min(255.0) as u8
    })
    .expect("positive dimensions")
}

fn record(i: usize) -> ImageRecord {
    ImageRecord {
        image_id: format!("img{i:03}"),
        patient_id: format!("p{:02}", i / 2),
        file: format!("img{i:03}.png"),
        day: None,
        icu_admit_day: None,
        icu_release_day: None,
        went_icu: TriState::No,
        in_icu_at_capture: TriState::No,
    }
}

/// Training record `i`: even indices are future-ICU, odd never-ICU.
pub fn training_record(i: usize) -> ImageRecord {
    let mut r = record(i);
    r.day = Some(i as i64 % 5);
    if i % 2 == 0 {
        r.went_icu = TriState::Yes;
    }
    r
}

/// Validation record `i`, placed in stage group `i % 4`.
pub fn validation_record(i: usize) -> ImageRecord {
    let mut r = record(i);
    let day = 3 + i as i64;
    r.day = Some(day);
    let (admit, release) = match StageGroup::ALL[i % 4] {
        StageGroup::G1 => (None, None),
        StageGroup::G2 => (Some(day), Some(day + 8)),
        StageGroup::G3 => (Some(day - 4), Some(day + 4)),
        StageGroup::G4 => (Some(day - 8), Some(day)),
    };
    r.icu_admit_day = admit;
    r.icu_release_day = release;
    if admit.is_some() {
        r.went_icu = TriState::Yes;
        r.in_icu_at_capture = TriState::Yes;
    }
    r
}

/// Writes `n` PNG images plus training and validation tables under `root`.
pub fn write_corpus(root: &Path, n: usize, width: usize, height: usize) -> std::io::Result<Corpus> {
    let images_dir = root.join("images");
    std::fs::create_dir_all(&images_dir)?;
    for i in 0..n {
        synthetic_image(width, height, 1000 + i as u64)
            .save_png(images_dir.join(format!("img{i:03}.png")))
            .map_err(std::io::Error::other)?;
    }
    let training: Vec<ImageRecord> = (0..n).map(training_record).collect();
    let validation: Vec<ImageRecord> = (0..n).map(validation_record).collect();
    let training_metadata = root.join("training.csv");
    let validation_metadata = root.join("validation.csv");
    write_metadata(&training, MetadataSchema::Cohen, std::fs::File::create(&training_metadata)?)
        .map_err(std::io::Error::other)?;
    write_metadata(&validation, MetadataSchema::Hanno, std::fs::File::create(&validation_metadata)?)
        .map_err(std::io::Error::other)?;
    Ok(Corpus {
        root: root.to_path_buf(),
        images_dir,
        training_metadata,
        validation_metadata,
        training,
        validation,
    })
}
