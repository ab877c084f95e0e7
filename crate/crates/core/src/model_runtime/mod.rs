//! Uniform inference contract over the two pretrained networks: the lung
//! segmenter (per-pixel map) and the pathology feature extractor (label
//! vector). Real models are ONNX files described by a TOML sidecar; a mock
//! runner stands in for them in tests and `--mock-models` runs.

#[cfg(feature = "onnx")]
mod onnx;
mod spec;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imgproc::{resize_bilinear, GrayImage, ProbabilityMap};

pub use spec::{
    Activation, ModelSpec, Normalization, OutputKind, DEFAULT_PATHOLOGY_INPUT,
    DEFAULT_PATHOLOGY_LABELS, DEFAULT_SEGMENTATION_INPUT, REQUIRED_PATHOLOGY_LABELS,
};

/// Behaviour of the built-in mock runner.
///
/// | mode         | per-pixel map                  | label vector                       |
/// |--------------|--------------------------------|------------------------------------|
/// | `constant:v` | `v` everywhere                 | `v` for every label                |
/// | `half-plane` | 1 for `x < width/2`, else 0    | 1 for the first ceil(n/2) labels   |
/// | `mean-pixel` | mean intensity / 255           | mean intensity / 255 for every label |
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MockMode {
    Constant(f32),
    HalfPlane,
    MeanPixel,
}

impl FromStr for MockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "half-plane" => Ok(MockMode::HalfPlane),
            "mean-pixel" => Ok(MockMode::MeanPixel),
            "constant" => Ok(MockMode::Constant(1.0)),
            _ => {
                let value = s
                    .strip_prefix("constant:")
                    .and_then(|v| v.trim().parse::<f32>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "unknown mock mode '{s}' (expected constant:<v>, half-plane or mean-pixel)"
                        ))
                    })?;
                Ok(MockMode::Constant(value))
            }
        }
    }
}

impl fmt::Display for MockMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockMode::Constant(v) => write!(f, "constant:{v}"),
            MockMode::HalfPlane => f.write_str("half-plane"),
            MockMode::MeanPixel => f.write_str("mean-pixel"),
        }
    }
}

impl TryFrom<String> for MockMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MockMode> for String {
    fn from(m: MockMode) -> String {
        m.to_string()
    }
}

enum Backend {
    Mock(MockMode),
    #[cfg(feature = "onnx")]
    Onnx(onnx::OnnxRunner),
}

/// A loaded, immutable model. Safe to share across threads.
pub struct ModelHandle {
    kind: OutputKind,
    labels: Vec<String>,
    spec: Option<ModelSpec>,
    fingerprint: String,
    backend: Backend,
}

impl fmt::Debug for ModelHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelHandle")
            .field("kind", &self.kind)
            .field("labels", &self.labels.len())
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

/// Scores emitted by the pathology network for one image, in label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyFeatures {
    pub image_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl PathologyFeatures {
    pub fn new(image_id: impl Into<String>, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} feature names but {} values",
                names.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "feature '{}' is not finite ({})",
                names[i], values[i]
            )));
        }
        Ok(Self {
            image_id: image_id.into(),
            names,
            values,
        })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads the network described by `spec` and validates its interface.
pub fn load_model(spec: &ModelSpec) -> Result<ModelHandle> {
    spec.validate()?;
    if !spec.model_path.is_file() {
        return Err(Error::ModelNotFound(spec.model_path.clone()));
    }
    #[cfg(feature = "onnx")]
    {
        let bytes = std::fs::read(&spec.model_path).map_err(|e| Error::io(&spec.model_path, e))?;
        let runner = onnx::OnnxRunner::load(spec, &bytes)?;
        let spec_json = serde_json::to_vec(spec)?;
        let fingerprint = sha256_hex(&[sha256_hex(&bytes).as_bytes(), &spec_json].concat());
        Ok(ModelHandle {
            kind: spec.output_kind,
            labels: spec.labels.clone(),
            spec: Some(spec.clone()),
            fingerprint,
            backend: Backend::Onnx(runner),
        })
    }
    #[cfg(not(feature = "onnx"))]
    {
        Err(Error::ModelLoad {
            path: spec.model_path.clone(),
            message: "built without the `onnx` feature".into(),
        })
    }
}

/// A mock segmentation runner.
pub fn mock_segmenter(mode: MockMode) -> ModelHandle {
    ModelHandle {
        kind: OutputKind::PerPixelMap,
        labels: Vec::new(),
        spec: None,
        fingerprint: sha256_hex(format!("mock:per-pixel-map:{mode}").as_bytes()),
        backend: Backend::Mock(mode),
    }
}

/// A mock pathology runner over `labels` (which must include the required
/// five).
pub fn mock_pathology(mode: MockMode, labels: &[String]) -> Result<ModelHandle> {
    spec::check_pathology_labels(std::path::Path::new("<mock>"), labels)?;
    Ok(ModelHandle {
        kind: OutputKind::LabelVector,
        labels: labels.to_vec(),
        spec: None,
        fingerprint: sha256_hex(format!("mock:label-vector:{mode}:{}", labels.join("\u{1f}")).as_bytes()),
        backend: Backend::Mock(mode),
    })
}

impl ModelHandle {
    pub fn kind(&self) -> OutputKind {
        self.kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn is_mock(&self) -> bool {
        matches!(self.backend, Backend::Mock(_))
    }

    /// SHA-256 over the model bytes and its spec (or the mock configuration).
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn path_for_errors(&self) -> std::path::PathBuf {
        self.spec
            .as_ref()
            .map(|s| s.model_path.clone())
            .unwrap_or_else(|| "<mock>".into())
    }

    /// Resizes, normalizes and lays out the image as a `[1, C, H, W]` tensor.
    #[cfg_attr(not(feature = "onnx"), allow(dead_code))]
    fn input_tensor(&self, img: &GrayImage) -> Result<Vec<f32>> {
        let spec = self.spec.as_ref().expect("real models carry a spec");
        let (h, w) = spec.input_hw();
        let resized = resize_bilinear(img, w, h)?;
        let plane: Vec<f32> = resized
            .pixels()
            .iter()
            .map(|&p| spec.normalization.apply(p))
            .collect();
        Ok(plane.repeat(spec.channels))
    }
}

/// Runs the segmenter and returns a probability map at the image's own size.
pub fn run_segmentation(handle: &ModelHandle, img: &GrayImage) -> Result<ProbabilityMap> {
    if handle.kind != OutputKind::PerPixelMap {
        return Err(Error::invalid("model does not produce a per-pixel map"));
    }
    let (w, h) = (img.width(), img.height());
    match &handle.backend {
        Backend::Mock(mode) => {
            let values = match *mode {
                MockMode::Constant(v) => vec![v.clamp(0.0, 1.0); w * h],
                MockMode::HalfPlane => (0..h)
                    .flat_map(|_| (0..w).map(|x| if x < w / 2 { 1.0 } else { 0.0 }))
                    .collect(),
                MockMode::MeanPixel => vec![(img.mean_intensity() / 255.0) as f32; w * h],
            };
            ProbabilityMap::new(w, h, values)
        }
        #[cfg(feature = "onnx")]
        Backend::Onnx(runner) => {
            let spec = handle.spec.as_ref().expect("onnx handle has a spec");
            let (ih, iw) = spec.input_hw();
            let input = handle.input_tensor(img)?;
            let mut out = runner.run(input).map_err(|message| Error::Inference {
                path: handle.path_for_errors(),
                message,
            })?;
            if spec.output_activation == Activation::Sigmoid {
                out.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
            }
            if let Some(bad) = out.iter().find(|v| v.is_nan()) {
                return Err(Error::Inference {
                    path: handle.path_for_errors(),
                    message: format!("network produced {bad}"),
                });
            }
            let small = ProbabilityMap::new(iw, ih, out)?;
            let mut full = crate::imgproc::resize_map_bilinear(&small, w, h)?;
            full.values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            Ok(full)
        }
    }
}

/// Runs the pathology network; one finite score per declared label.
pub fn run_pathology_features(
    handle: &ModelHandle,
    image_id: &str,
    img: &GrayImage,
) -> Result<PathologyFeatures> {
    if handle.kind != OutputKind::LabelVector {
        return Err(Error::invalid("model does not produce a label vector"));
    }
    let n = handle.labels.len();
    let values: Vec<f64> = match &handle.backend {
        Backend::Mock(mode) => match *mode {
            MockMode::Constant(v) => vec![v as f64; n],
            MockMode::HalfPlane => (0..n).map(|i| if i < n.div_ceil(2) { 1.0 } else { 0.0 }).collect(),
            MockMode::MeanPixel => vec![img.mean_intensity() / 255.0; n],
        },
        #[cfg(feature = "onnx")]
        Backend::Onnx(runner) => {
            let input = handle.input_tensor(img)?;
            let mut out = runner.run(input).map_err(|message| Error::Inference {
                path: handle.path_for_errors(),
                message,
            })?;
            if handle.spec.as_ref().map(|s| s.output_activation) == Some(Activation::Sigmoid) {
                out.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
            }
            out.into_iter().map(f64::from).collect()
        }
    };
    PathologyFeatures::new(image_id, handle.labels.clone(), values).map_err(|e| Error::Inference {
        path: handle.path_for_errors(),
        message: e.to_string(),
    })
}
