use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use cxr_severity::dataset::{GroupingMode, MetadataSchema};
use cxr_severity::eval::TrendConfig;
use cxr_severity::imgproc::ClaheParams;
use cxr_severity::learn::{LogisticParams, TreeParams};
use cxr_severity::model_runtime::MockMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub images_dir: PathBuf,
    /// Table with the training classes.
    pub training_metadata: Option<PathBuf>,
    #[serde(default = "cohen")]
    pub training_schema: MetadataSchema,
    /// Table with day offsets for stage grouping.
    pub validation_metadata: Option<PathBuf>,
    #[serde(default = "hanno")]
    pub validation_schema: MetadataSchema,
    pub include_list: Option<PathBuf>,
    pub segmentation_model: Option<PathBuf>,
    pub pathology_model: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn cohen() -> MetadataSchema {
    MetadataSchema::Cohen
}

fn hanno() -> MetadataSchema {
    MetadataSchema::Hanno
}

fn default_output() -> PathBuf {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImgprocConfig {
    pub mask_threshold: f32,
    pub closing_radius: usize,
    pub components: usize,
    pub crop_margin: usize,
    pub clahe: ClaheParams,
}

impl Default for ImgprocConfig {
    fn default() -> Self {
        Self {
            mask_threshold: 0.5,
            closing_radius: 5,
            components: 2,
            crop_margin: 0,
            clahe: ClaheParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Score above which an image counts as the positive class in metrics.
    pub threshold: f64,
    pub tree: TreeParams,
}

impl Default for LearnConfig {
    fn default() -> Self {
        let p = LogisticParams::default();
        Self {
            lambda: p.lambda,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            threshold: 0.5,
            tree: TreeParams::default(),
        }
    }
}

impl LearnConfig {
    pub fn logistic(&self) -> LogisticParams {
        LogisticParams {
            lambda: self.lambda,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    pub segmentation: MockMode,
    pub pathology: MockMode,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            segmentation: MockMode::HalfPlane,
            pathology: MockMode::MeanPixel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub name: String,
    pub path: PathBuf,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default)]
    pub imgproc: ImgprocConfig,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub grouping: GroupingMode,
    #[serde(default)]
    pub trend: TrendConfig,
    #[serde(default)]
    pub mock: MockConfig,
    /// Use the mock runners instead of model files.
    #[serde(default)]
    pub mock_models: bool,
    /// Worker threads for per-image stages; 0 = one per core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub externals: Vec<ExternalConfig>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Loads a config; relative paths are taken against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config = Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(config)
    }

    /// SHA-256 of the result-affecting settings in their canonical JSON
    /// form. `jobs` does not change outputs and is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.jobs = 0;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Checks parameter ranges and that every configured input path exists.
    pub fn validate(&self, base: &Path) -> Result<()> {
        let p = &self.paths;
        let must_exist = |what: &str, path: &Path| -> Result<()> {
            let full = base.join(path);
            ensure!(full.exists(), "{what} {} does not exist", full.display());
            Ok(())
        };
        must_exist("images_dir", &p.images_dir)?;
        for (what, path) in [
            ("training_metadata", &p.training_metadata),
            ("validation_metadata", &p.validation_metadata),
            ("include_list", &p.include_list),
        ] {
            if let Some(path) = path {
                must_exist(what, path)?;
            }
        }
        if !self.mock_models {
            for (what, path) in [
                ("segmentation_model", &p.segmentation_model),
                ("pathology_model", &p.pathology_model),
            ] {
                match path {
                    Some(path) => must_exist(what, path)?,
                    None => bail!("{what} is required unless mock models are enabled"),
                }
            }
        }
        for e in &self.externals {
            must_exist(&format!("external scores '{}'", e.name), &e.path)?;
            ensure!(e.min < e.max, "external '{}': min must be below max", e.name);
        }
        let i = &self.imgproc;
        ensure!(
            (0.0..=1.0).contains(&i.mask_threshold),
            "imgproc.mask_threshold must be in [0, 1]"
        );
        ensure!(i.closing_radius >= 1, "imgproc.closing_radius must be >= 1");
        ensure!(i.components >= 1, "imgproc.components must be >= 1");
        i.clahe.validate()?;
        let l = &self.learn;
        ensure!(l.lambda >= 0.0 && l.lambda.is_finite(), "learn.lambda must be >= 0");
        ensure!(l.tolerance > 0.0, "learn.tolerance must be > 0");
        ensure!(l.max_iterations >= 1, "learn.max_iterations must be >= 1");
        ensure!((0.0..1.0).contains(&l.threshold) && l.threshold > 0.0, "learn.threshold must be in (0, 1)");
        ensure!(l.tree.max_depth >= 1 && l.tree.min_leaf >= 1, "learn.tree limits must be >= 1");
        Ok(())
    }
}

/// A validated config with its directory, for resolving paths.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub base: PathBuf,
}

impl Resolved {
    pub fn new(config: PipelineConfig, base: PathBuf) -> Result<Self> {
        config.validate(&base)?;
        Ok(Self { config, base })
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        self.base.join(p)
    }

    pub fn out(&self) -> PathBuf {
        self.path(&self.config.paths.output_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mock_models = true

[paths]
images_dir = "images"
"#;

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.imgproc.closing_radius, 5);
        assert_eq!(c.imgproc.components, 2);
        assert_eq!(c.learn.lambda, 1.0);
        assert_eq!(c.learn.tree.max_depth, 3);
        assert_eq!(c.grouping, GroupingMode::Exclusive);
        assert_eq!(c.mock.segmentation, MockMode::HalfPlane);
        assert_eq!(c.paths.training_schema, MetadataSchema::Cohen);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let text = format!(
            "{MINIMAL}\n[imgproc.clahe]\ntile_grid = [4, 4]\nclip_factor = 3.0\n[trend]\np2 = false\n[mock]\npathology = \"constant:0.1\"\n"
        );
        let c = PipelineConfig::from_toml(&text).unwrap();
        assert_eq!(c.imgproc.clahe.tile_grid, (4, 4));
        assert!(!c.trend.p2);
        assert_eq!(c.mock.pathology, MockMode::Constant(0.1));
        assert!(PipelineConfig::from_toml(&format!("{MINIMAL}\n[imgproc]\nradius = 3\n")).is_err());
    }

    #[test]
    fn hash_ignores_jobs() {
        let a = PipelineConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.jobs = 7;
        assert_eq!(a.hash(), b.hash());
        b.imgproc.closing_radius = 4;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_checks_paths_and_ranges() {
        let dir = tempfile::tempdir().unwrap();
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert!(c.validate(dir.path()).is_err());
        std::fs::create_dir(dir.path().join("images")).unwrap();
        c.validate(dir.path()).unwrap();
        let mut bad = c.clone();
        bad.imgproc.closing_radius = 0;
        assert!(bad.validate(dir.path()).is_err());
        let mut real = c.clone();
        real.mock_models = false;
        assert!(real.validate(dir.path()).is_err());
    }
}
