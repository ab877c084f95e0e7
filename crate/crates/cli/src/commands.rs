use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use cxr_severity::dataset::{
    assign_all, derive_training_labels, filter_included, load_include_list, parse_metadata_file,
    write_rejects_csv, ImageRecord, MetadataSchema, TrainingLabel,
};
use cxr_severity::eval::{build_timelines, compare_methods, emit_report, ExternalScoreSet, Report};
use cxr_severity::imgproc::{
    apply_mask_and_crop, clahe, dice, equalize_hist, fill_holes, keep_largest_components, morph_close,
    threshold_mask, GrayImage, LungMask,
};
use cxr_severity::learn::{
    confusion, leave_two_out_cv, ConfusionMatrix, CvResult, SeverityModel, TreeFitter, TreeModel, TreeParams,
    TreeReport, MIN_CV_SAMPLES,
};
use cxr_severity::model_runtime::{
    load_model, mock_pathology, mock_segmenter, run_pathology_features, run_segmentation, ModelHandle, ModelSpec,
    DEFAULT_PATHOLOGY_LABELS,
};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::manifest::Manifest;
use crate::tables;

/// Order of the mask clean-up steps, recorded in the manifest.
pub const MASK_PIPELINE: [&str; 8] = [
    "equalize",
    "segment",
    "threshold",
    "close",
    "fill",
    "keep-largest",
    "mask-and-crop",
    "clahe",
];

pub const NATIVE_SCORER: &str = "severity";

pub struct Context {
    pub run: Resolved,
    pub config_hash: String,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(run: Resolved) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(run.config.jobs)
            .build()
            .context("building worker pool")?;
        let config_hash = run.config.hash();
        Ok(Self {
            run,
            config_hash,
            pool,
        })
    }

    pub fn out(&self) -> PathBuf {
        self.run.out()
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, &self.config_hash)
    }

    fn records(&self, table: &Option<PathBuf>, schema: MetadataSchema, role: &str, m: &mut Manifest) -> Result<Vec<ImageRecord>> {
        let Some(path) = table else {
            return Ok(Vec::new());
        };
        let parsed = parse_metadata_file(self.run.path(path), schema)?;
        if !parsed.rejects.is_empty() {
            std::fs::create_dir_all(self.out())?;
            write_rejects_csv(&parsed.rejects, self.out().join(format!("rejects_{role}.csv")))?;
            for r in &parsed.rejects {
                m.fail(format!("{role}:line {}", r.line), &r.reason);
            }
        }
        let mut records = parsed.records;
        if let Some(list) = &self.run.config.paths.include_list {
            records = filter_included(records, &load_include_list(self.run.path(list))?);
        }
        Ok(records)
    }

    fn training_records(&self, m: &mut Manifest) -> Result<Vec<ImageRecord>> {
        let p = &self.run.config.paths;
        self.records(&p.training_metadata, p.training_schema, "training", m)
    }

    fn validation_records(&self, m: &mut Manifest) -> Result<Vec<ImageRecord>> {
        let p = &self.run.config.paths;
        self.records(&p.validation_metadata, p.validation_schema, "validation", m)
    }

    /// Every image referenced by either table, by id. An id mapped to two
    /// different files is a failure.
    fn all_images(&self, m: &mut Manifest) -> Result<BTreeMap<String, String>> {
        let mut records = self.training_records(m)?;
        records.extend(self.validation_records(m)?);
        if self.run.config.paths.training_metadata.is_none() && self.run.config.paths.validation_metadata.is_none() {
            bail!("no metadata table configured");
        }
        let mut files: BTreeMap<String, String> = BTreeMap::new();
        let mut conflicts = BTreeSet::new();
        for r in records {
            match files.get(&r.image_id) {
                Some(f) if *f != r.file => {
                    conflicts.insert(r.image_id.clone());
                }
                _ => {
                    files.insert(r.image_id.clone(), r.file.clone());
                }
            }
        }
        for id in conflicts {
            files.remove(&id);
            m.fail(id, "image id refers to different files in the metadata tables");
        }
        let unsafe_ids: Vec<String> = files.keys().filter(|id| !is_safe_id(id)).cloned().collect();
        for id in unsafe_ids {
            files.remove(&id);
            m.fail(id, "image id cannot be used as a file name");
        }
        Ok(files)
    }

    fn segmenter(&self) -> Result<ModelHandle> {
        let c = &self.run.config;
        if c.mock_models {
            return Ok(mock_segmenter(c.mock.segmentation));
        }
        let path = c.paths.segmentation_model.as_ref().expect("validated");
        Ok(load_model(&ModelSpec::from_file(self.run.path(path))?)?)
    }

    fn pathology(&self) -> Result<ModelHandle> {
        let c = &self.run.config;
        if c.mock_models {
            let labels: Vec<String> = DEFAULT_PATHOLOGY_LABELS.iter().map(|s| s.to_string()).collect();
            return Ok(mock_pathology(c.mock.pathology, &labels)?);
        }
        let path = c.paths.pathology_model.as_ref().expect("validated");
        Ok(load_model(&ModelSpec::from_file(self.run.path(path))?)?)
    }
}

/// Ids become output file names, so no separators or dot-only names.
fn is_safe_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0'])
}

fn preprocess_one(ctx: &Context, seg: &ModelHandle, file: &Path) -> Result<(GrayImage, LungMask)> {
    let p = &ctx.run.config.imgproc;
    let img = GrayImage::load(file)?;
    let eq = equalize_hist(&img);
    let prob = run_segmentation(seg, &eq)?;
    let mask = threshold_mask(&prob, p.mask_threshold)?;
    let mask = morph_close(&mask, p.closing_radius)?;
    let mask = fill_holes(&mask);
    let mask = keep_largest_components(&mask, p.components);
    let cropped = apply_mask_and_crop(&eq, &mask, p.crop_margin)?;
    Ok((clahe(&cropped, &p.clahe)?, mask))
}

/// Equalize, segment, clean the mask, crop the lungs and apply CLAHE for
/// every image in the metadata tables.
pub fn preprocess(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("preprocess");
    let images = ctx.all_images(&mut m)?;
    let seg = ctx.segmenter()?;
    m.models.insert("segmentation".into(), seg.fingerprint().to_string());
    m.setting("pipeline", MASK_PIPELINE);
    m.setting("imgproc", &ctx.run.config.imgproc);
    let out = ctx.out();
    let (pre_dir, mask_dir) = (out.join("preprocessed"), out.join("masks"));
    std::fs::create_dir_all(&pre_dir)?;
    std::fs::create_dir_all(&mask_dir)?;
    let images_dir = ctx.run.path(&ctx.run.config.paths.images_dir);
    let jobs: Vec<(&String, &String)> = images.iter().collect();
    let results: Vec<Result<()>> = ctx.pool.install(|| {
        jobs.par_iter()
            .map(|(id, file)| {
                let (img, mask) = preprocess_one(ctx, &seg, &images_dir.join(file))?;
                img.save_png(pre_dir.join(format!("{id}.png")))?;
                mask.save_png(mask_dir.join(format!("{id}.png")))?;
                Ok(())
            })
            .collect()
    });
    for ((id, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(()) => m.ok(*id),
            Err(e) => {
                for stale in [pre_dir.join(format!("{id}.png")), mask_dir.join(format!("{id}.png"))] {
                    let _ = std::fs::remove_file(stale);
                }
                m.fail(*id, format!("{e:#}"))
            }
        }
    }
    m.write(&out)?;
    Ok(m)
}

/// Runs the pathology network over the preprocessed images.
pub fn extract(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("extract");
    let images = ctx.all_images(&mut m)?;
    let model = ctx.pathology()?;
    m.models.insert("pathology".into(), model.fingerprint().to_string());
    m.setting("labels", model.labels());
    let out = ctx.out();
    let pre_dir = out.join("preprocessed");
    let ids: Vec<&String> = images.keys().collect();
    let results: Vec<_> = ctx.pool.install(|| {
        ids.par_iter()
            .map(|id| {
                let path = pre_dir.join(format!("{id}.png"));
                if !path.exists() {
                    bail!("preprocessed image {} missing", path.display());
                }
                Ok(run_pathology_features(&model, id, &GrayImage::load(&path)?)?)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(f) => {
                rows.push(f);
                m.ok(*id);
            }
            Err(e) => m.fail(*id, format!("{e:#}")),
        }
    }
    std::fs::create_dir_all(&out)?;
    tables::write_features(&out.join("features.csv"), model.labels(), &rows)?;
    m.write(&out)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSummary {
    pub threshold: f64,
    pub train_confusion: ConfusionMatrix,
    pub train_accuracy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub params: TreeParams,
    pub report: TreeReport,
    pub used_feature_names: Vec<String>,
    pub train_confusion: ConfusionMatrix,
    pub train_accuracy: f64,
    pub tree: TreeModel,
}

/// Separability study written next to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub config_hash: String,
    pub n_samples: usize,
    pub n_positive: usize,
    pub positive_class: String,
    pub logistic: LogisticSummary,
    pub tree: Option<TreeSummary>,
    pub tree_skipped: Option<String>,
    pub cross_validation: Option<CvResult>,
    pub cross_validation_skipped: Option<String>,
}

/// Fits the severity model and runs the tree separability study.
pub fn train(ctx: &Context) -> Result<(Manifest, Separability)> {
    let mut m = ctx.manifest("train");
    let out = ctx.out();
    let table = tables::read_features(&out.join("features.csv"))?;
    if ctx.run.config.paths.training_metadata.is_none() {
        bail!("train needs paths.training_metadata");
    }
    let records = ctx.training_records(&mut m)?;
    let derived = derive_training_labels(&records);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (r, label) in &derived.labeled {
        match table.rows.get(&r.image_id) {
            Some(f) => {
                rows.push(f.values.clone());
                y.push(label.is_positive());
                m.ok(&r.image_id);
            }
            None => m.fail(&r.image_id, "no features for training image"),
        }
    }
    m.setting("excluded_without_class", &derived.excluded);
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == y.len() {
        bail!(
            "training data must contain both classes; got {n_pos} '{}' and {} '{}' images",
            TrainingLabel::FutureIcu,
            y.len() - n_pos,
            TrainingLabel::NotIcu
        );
    }
    let d = table.labels.len();
    let x = Array2::from_shape_vec((rows.len(), d), rows.concat())?;
    let learn = &ctx.run.config.learn;
    let mut model = SeverityModel::fit(table.labels.clone(), x.view(), &y, &learn.logistic())?;
    model.manifest.provenance.insert("config_hash".into(), ctx.config_hash.clone());
    if let Ok(extract) = Manifest::read(&out, "extract") {
        model.manifest.provenance.extend(extract.models);
    }
    model.save(out.join("model.json"))?;
    m.models.insert("severity".into(), model.manifest.dataset_hash.clone());

    let yhat: Vec<bool> = x
        .rows()
        .into_iter()
        .map(|r| model.score_row(&r.to_vec()) > learn.threshold)
        .collect();
    let cm = confusion(&yhat, &y)?;
    let logistic = LogisticSummary {
        threshold: learn.threshold,
        train_confusion: cm,
        train_accuracy: cm.accuracy(),
        converged: model.manifest.converged,
        iterations: model.manifest.iterations,
        final_gradient_norm: model.manifest.final_gradient_norm,
    };

    let n = y.len();
    let (tree, tree_skipped) = if n >= 2 * learn.tree.min_leaf {
        let t = cxr_severity::learn::fit_tree(x.view(), &y, &learn.tree)?;
        let cm = confusion(&t.predict(x.view()), &y)?;
        let report = t.report();
        (
            Some(TreeSummary {
                params: learn.tree,
                used_feature_names: report.used_features.iter().map(|&j| table.labels[j].clone()).collect(),
                report,
                train_confusion: cm,
                train_accuracy: cm.accuracy(),
                tree: t,
            }),
            None,
        )
    } else {
        (None, Some(format!("{n} samples; the tree needs at least {}", 2 * learn.tree.min_leaf)))
    };
    let (cv, cv_skipped) = if n >= MIN_CV_SAMPLES {
        (Some(leave_two_out_cv(x.view(), &y, &TreeFitter(learn.tree))?), None)
    } else {
        (None, Some(format!("{n} samples; leave-two-out needs at least {MIN_CV_SAMPLES}")))
    };
    let sep = Separability {
        config_hash: ctx.config_hash.clone(),
        n_samples: n,
        n_positive: n_pos,
        positive_class: TrainingLabel::FutureIcu.to_string(),
        logistic,
        tree,
        tree_skipped,
        cross_validation: cv,
        cross_validation_skipped: cv_skipped,
    };
    let mut text = serde_json::to_string_pretty(&sep)?;
    text.push('\n');
    std::fs::write(out.join("separability.json"), text)?;
    m.write(&out)?;
    Ok((m, sep))
}

/// Scores the validation images (or every featurized image when no
/// validation table is configured).
pub fn score(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("score");
    let out = ctx.out();
    let model = SeverityModel::load(out.join("model.json"))?;
    m.models.insert("severity".into(), model.manifest.dataset_hash.clone());
    let table = tables::read_features(&out.join("features.csv"))?;
    let ids: Vec<String> = if ctx.run.config.paths.validation_metadata.is_some() {
        ctx.validation_records(&mut m)?.into_iter().map(|r| r.image_id).collect()
    } else {
        table.rows.keys().cloned().collect()
    };
    let mut scores = BTreeMap::new();
    for id in ids {
        let result = table
            .rows
            .get(&id)
            .context("no features for image")
            .and_then(|f| Ok(model.score(f)?));
        match result {
            Ok(s) => {
                scores.insert(id.clone(), s);
                m.ok(id);
            }
            Err(e) => m.fail(id, format!("{e:#}")),
        }
    }
    tables::write_scores(&out.join("scores.csv"), &scores)?;
    m.write(&out)?;
    Ok(m)
}

/// Groups the scored images, checks the trend predicates, compares against
/// external scorers and writes the report bundle.
pub fn evaluate(ctx: &Context) -> Result<(Manifest, Report)> {
    let mut m = ctx.manifest("evaluate");
    let out = ctx.out();
    let c = &ctx.run.config;
    if c.paths.validation_metadata.is_none() {
        bail!("evaluate needs paths.validation_metadata");
    }
    let records = ctx.validation_records(&mut m)?;
    let scores = tables::read_scores(&out.join("scores.csv"))?;
    let assignment = assign_all(&records, c.grouping);
    let mut text = serde_json::to_string_pretty(&assignment)?;
    text.push('\n');
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("groups.json"), text)?;

    let native = ExternalScoreSet::new(NATIVE_SCORER, (0.0, 1.0), scores.clone())?;
    let externals = c
        .externals
        .iter()
        .map(|e| Ok(ExternalScoreSet::from_csv(&e.name, (e.min, e.max), ctx.run.path(&e.path))?))
        .collect::<Result<Vec<_>>>()?;
    let comparison = compare_methods(&native, &externals, &assignment.groups, &c.trend)?;

    let mut meta = BTreeMap::new();
    meta.insert("config_hash".to_string(), ctx.config_hash.clone());
    meta.insert("grouping".to_string(), c.grouping.to_string());
    meta.insert("ungrouped_images".to_string(), assignment.ungrouped.len().to_string());
    meta.insert("unassignable_images".to_string(), assignment.unassignable.len().to_string());
    for command in ["preprocess", "extract"] {
        if let Ok(prev) = Manifest::read(&out, command) {
            for (role, fp) in prev.models {
                meta.insert(format!("model.{role}"), fp);
            }
        }
    }
    if let Ok(model) = SeverityModel::load(out.join("model.json")) {
        meta.insert("model.severity".to_string(), model.manifest.dataset_hash);
    }
    let report = Report::new(meta, comparison, build_timelines(&records, &scores));
    let bundle = emit_report(out.join("report"), &report)?;
    for f in &bundle.files {
        m.ok(f);
    }
    m.setting("grouping", c.grouping);
    m.write(&out)?;
    Ok((m, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceRow {
    pub image_id: String,
    pub dice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceSummary {
    pub rows: Vec<DiceRow>,
    pub mean: Option<f64>,
    pub unpaired: Vec<String>,
    pub failures: Vec<(String, String)>,
}

fn mask_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm" | "pbm" | "bmp")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Per-image Dice between predicted and reference masks paired by file stem.
pub fn dice_dirs(pred: &Path, gold: &Path) -> Result<DiceSummary> {
    let (p, g) = (mask_files(pred)?, mask_files(gold)?);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (id, pp) in &p {
        let Some(gp) = g.get(id) else { continue };
        let r = LungMask::load(pp).and_then(|a| dice(&a, &LungMask::load(gp)?));
        match r {
            Ok(d) => rows.push(DiceRow {
                image_id: id.clone(),
                dice: d,
            }),
            Err(e) => failures.push((id.clone(), e.to_string())),
        }
    }
    let unpaired = p
        .keys()
        .filter(|k| !g.contains_key(*k))
        .chain(g.keys().filter(|k| !p.contains_key(*k)))
        .cloned()
        .collect();
    let mean = (!rows.is_empty()).then(|| rows.iter().map(|r| r.dice).sum::<f64>() / rows.len() as f64);
    Ok(DiceSummary {
        rows,
        mean,
        unpaired,
        failures,
    })
}

/// Writes per-image rows to `path` and the full summary next to it as JSON.
pub fn write_dice_csv(path: &Path, s: &DiceSummary) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["image_id", "dice"])?;
    for r in &s.rows {
        w.write_record([r.image_id.as_str(), &r.dice.to_string()])?;
    }
    w.flush()?;
    let mut text = serde_json::to_string_pretty(s)?;
    text.push('\n');
    std::fs::write(path.with_extension("json"), text)?;
    Ok(())
}
