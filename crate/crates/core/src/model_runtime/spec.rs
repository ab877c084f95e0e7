use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labels every pathology model must expose; the shallow tree draws on them.
pub const REQUIRED_PATHOLOGY_LABELS: [&str; 5] = [
    "Effusion",
    "Consolidation",
    "Pneumonia",
    "Fracture",
    "Pleural Thickening",
];

/// Label set used by the mock pathology runner when none is configured.
pub const DEFAULT_PATHOLOGY_LABELS: [&str; 18] = [
    "Atelectasis",
    "Consolidation",
    "Infiltration",
    "Pneumothorax",
    "Edema",
    "Emphysema",
    "Fibrosis",
    "Effusion",
    "Pneumonia",
    "Pleural Thickening",
    "Cardiomegaly",
    "Nodule",
    "Mass",
    "Hernia",
    "Lung Lesion",
    "Fracture",
    "Lung Opacity",
    "Enlarged Cardiomediastinum",
];

pub const DEFAULT_SEGMENTATION_INPUT: (usize, usize) = (256, 256);
pub const DEFAULT_PATHOLOGY_INPUT: (usize, usize) = (224, 224);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    PerPixelMap,
    LabelVector,
}

/// How 8-bit intensities become network input values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Normalization {
    /// Linear map of [0, 255] onto [min, max].
    ValueRange { min: f32, max: f32 },
    /// `(v / 255 - mean) / std`.
    MeanStd { mean: f32, std: f32 },
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::ValueRange { min: 0.0, max: 1.0 }
    }
}

impl Normalization {
    #[inline]
    pub fn apply(&self, v: u8) -> f32 {
        let unit = v as f32 / 255.0;
        match *self {
            Normalization::ValueRange { min, max } => min + unit * (max - min),
            Normalization::MeanStd { mean, std } => (unit - mean) / std,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    None,
    Sigmoid,
}

/// Sidecar description of a serialized network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model_path: PathBuf,
    pub input_name: String,
    /// (height, width); defaults depend on `output_kind`.
    #[serde(default)]
    pub input_size: Option<(usize, usize)>,
    /// Grayscale is replicated across this many input channels.
    #[serde(default = "one")]
    pub channels: usize,
    #[serde(default)]
    pub normalization: Normalization,
    pub output_name: String,
    pub output_kind: OutputKind,
    #[serde(default)]
    pub output_activation: Activation,
    #[serde(default)]
    pub labels: Vec<String>,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    /// Reads a TOML spec; a relative `model_path` resolves against the spec's
    /// directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: ModelSpec = toml::from_str(&text)?;
        if spec.model_path.is_relative() {
            if let Some(dir) = path.parent() {
                spec.model_path = dir.join(&spec.model_path);
            }
        }
        Ok(spec)
    }

    pub fn input_hw(&self) -> (usize, usize) {
        self.input_size.unwrap_or(match self.output_kind {
            OutputKind::PerPixelMap => DEFAULT_SEGMENTATION_INPUT,
            OutputKind::LabelVector => DEFAULT_PATHOLOGY_INPUT,
        })
    }

    /// Checks everything that can be checked without touching the model file.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.input_hw();
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!("input_size must be positive, got {h}x{w}")));
        }
        if self.channels == 0 {
            return Err(Error::invalid("channels must be >= 1"));
        }
        if let Normalization::MeanStd { std, .. } = self.normalization {
            if !(std.is_finite() && std > 0.0) {
                return Err(Error::invalid(format!("normalization std must be > 0, got {std}")));
            }
        }
        if self.output_kind == OutputKind::LabelVector {
            check_pathology_labels(&self.model_path, &self.labels)?;
        }
        Ok(())
    }
}

pub(crate) fn check_pathology_labels(path: &Path, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::ModelLoad {
            path: path.to_path_buf(),
            message: "label-vector model declares no labels".into(),
        });
    }
    let missing: Vec<String> = REQUIRED_PATHOLOGY_LABELS
        .iter()
        .filter(|req| !labels.iter().any(|l| l == *req))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLabels {
            path: path.to_path_buf(),
            missing,
        });
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(Error::ModelLoad {
            path: path.to_path_buf(),
            message: format!("duplicate label '{dup}'"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sidecar_and_resolves_path() {
        let dir = tempfile::tempdir().unwrap();
        let spec_path = dir.path().join("seg.toml");
        std::fs::write(
            &spec_path,
            r#"
model_path = "seg.onnx"
input_name = "input"
output_name = "mask"
output_kind = "per-pixel-map"
output_activation = "sigmoid"

[normalization]
kind = "mean-std"
mean = 0.5
std = 0.25
"#,
        )
        .unwrap();
        let spec = ModelSpec::from_file(&spec_path).unwrap();
        assert_eq!(spec.model_path, dir.path().join("seg.onnx"));
        assert_eq!(spec.input_hw(), (256, 256));
        assert_eq!(spec.output_activation, Activation::Sigmoid);
        assert_eq!(spec.normalization.apply(255), 2.0);
        spec.validate().unwrap();
    }

    #[test]
    fn missing_required_labels_are_listed() {
        let spec = ModelSpec {
            model_path: "p.onnx".into(),
            input_name: "x".into(),
            input_size: None,
            channels: 1,
            normalization: Normalization::default(),
            output_name: "y".into(),
            output_kind: OutputKind::LabelVector,
            output_activation: Activation::None,
            labels: vec!["Consolidation".into(), "Pneumonia".into(), "Fracture".into()],
        };
        assert_eq!(spec.input_hw(), (224, 224));
        match spec.validate() {
            Err(Error::MissingLabels { missing, .. }) => {
                assert_eq!(missing, vec!["Effusion", "Pleural Thickening"])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_label_set_is_complete() {
        let labels: Vec<String> = DEFAULT_PATHOLOGY_LABELS.iter().map(|s| s.to_string()).collect();
        check_pathology_labels(Path::new("mock"), &labels).unwrap();
    }
}
