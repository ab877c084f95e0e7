#![cfg(feature = "onnx")]

use std::path::{Path, PathBuf};

use cxr_severity::imgproc::GrayImage;
use cxr_severity::model_runtime::{
    load_model, run_pathology_features, run_segmentation, Activation, ModelSpec, Normalization,
    OutputKind, DEFAULT_PATHOLOGY_LABELS,
};
use cxr_severity::Error;
use prost::Message;
use tract_onnx::pb;

const FLOAT: i32 = 1;

fn value_info(name: &str, dims: &[i64]) -> pb::ValueInfoProto {
    use pb::tensor_shape_proto::{dimension::Value, Dimension};
    pb::ValueInfoProto {
        name: name.into(),
        r#type: Some(pb::TypeProto {
            denotation: String::new(),
            value: Some(pb::type_proto::Value::TensorType(pb::type_proto::Tensor {
                elem_type: FLOAT,
                shape: Some(pb::TensorShapeProto {
                    dim: dims
                        .iter()
                        .map(|&d| Dimension {
                            denotation: String::new(),
                            value: Some(Value::DimValue(d)),
                        })
                        .collect(),
                }),
            })),
        }),
        doc_string: String::new(),
    }
}

fn node(op: &str, inputs: &[&str], output: &str, attribute: Vec<pb::AttributeProto>) -> pb::NodeProto {
    pb::NodeProto {
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.into()],
        name: format!("{op}_{output}"),
        op_type: op.into(),
        attribute,
        ..Default::default()
    }
}

fn write_model(dir: &Path, file: &str, graph: pb::GraphProto) -> PathBuf {
    let model = pb::ModelProto {
        ir_version: 7,
        opset_import: vec![pb::OperatorSetIdProto {
            domain: String::new(),
            version: 13,
        }],
        producer_name: "fixture".into(),
        graph: Some(graph),
        ..Default::default()
    };
    let path = dir.join(file);
    std::fs::write(&path, model.encode_to_vec()).unwrap();
    path
}

/// Identity network: the probability map is the normalized input.
fn identity_segmenter(dir: &Path, size: i64) -> PathBuf {
    let graph = pb::GraphProto {
        name: "seg".into(),
        node: vec![node("Identity", &["image"], "mask", vec![])],
        input: vec![value_info("image", &[1, 1, size, size])],
        output: vec![value_info("mask", &[1, 1, size, size])],
        ..Default::default()
    };
    write_model(dir, "seg.onnx", graph)
}

/// Global mean followed by a 1xL projection with weights 1..=L.
fn mean_projection(dir: &Path, size: i64, labels: usize) -> PathBuf {
    let weights = pb::TensorProto {
        dims: vec![1, labels as i64],
        data_type: FLOAT,
        float_data: (1..=labels).map(|j| j as f32).collect(),
        name: "w".into(),
        ..Default::default()
    };
    let axes = pb::AttributeProto {
        name: "axes".into(),
        r#type: pb::attribute_proto::AttributeType::Ints as i32,
        ints: vec![2, 3],
        ..Default::default()
    };
    let keepdims = pb::AttributeProto {
        name: "keepdims".into(),
        r#type: pb::attribute_proto::AttributeType::Int as i32,
        i: 0,
        ..Default::default()
    };
    let graph = pb::GraphProto {
        name: "pathology".into(),
        node: vec![
            node("ReduceMean", &["image"], "pooled", vec![axes, keepdims]),
            node("MatMul", &["pooled", "w"], "scores", vec![]),
        ],
        initializer: vec![weights],
        input: vec![value_info("image", &[1, 1, size, size])],
        output: vec![value_info("scores", &[1, labels as i64])],
        ..Default::default()
    };
    write_model(dir, "pathology.onnx", graph)
}

fn seg_spec(path: PathBuf, size: usize) -> ModelSpec {
    ModelSpec {
        model_path: path,
        input_name: "image".into(),
        input_size: Some((size, size)),
        channels: 1,
        normalization: Normalization::ValueRange { min: 0.0, max: 1.0 },
        output_name: "mask".into(),
        output_kind: OutputKind::PerPixelMap,
        output_activation: Activation::None,
        labels: vec![],
    }
}

fn labels() -> Vec<String> {
    DEFAULT_PATHOLOGY_LABELS.iter().map(|s| s.to_string()).collect()
}

fn pathology_spec(path: PathBuf, size: usize) -> ModelSpec {
    ModelSpec {
        model_path: path,
        input_name: "image".into(),
        input_size: Some((size, size)),
        channels: 1,
        normalization: Normalization::ValueRange { min: 0.0, max: 1.0 },
        output_name: "scores".into(),
        output_kind: OutputKind::LabelVector,
        output_activation: Activation::None,
        labels: labels(),
    }
}

#[test]
fn segmentation_model_loads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = seg_spec(identity_segmenter(dir.path(), 8), 8);
    let handle = load_model(&spec).unwrap();
    assert_eq!(handle.kind(), OutputKind::PerPixelMap);
    assert!(!handle.is_mock());

    let img = GrayImage::from_fn(8, 8, |x, y| (x * 30 + y) as u8).unwrap();
    let map = run_segmentation(&handle, &img).unwrap();
    for y in 0..8 {
        for x in 0..8 {
            assert!((map.get(x, y) - img.get(x, y) as f32 / 255.0).abs() < 1e-6);
        }
    }

    // other sizes come back at the caller's resolution
    let big = GrayImage::filled(20, 13, 255).unwrap();
    let map = run_segmentation(&handle, &big).unwrap();
    assert_eq!((map.width, map.height), (20, 13));
    assert!(map.values.iter().all(|&v| (v - 1.0).abs() < 1e-6));
    assert_eq!(map, run_segmentation(&handle, &big).unwrap());
}

#[test]
fn sigmoid_activation_and_clamping() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = seg_spec(identity_segmenter(dir.path(), 4), 4);
    spec.normalization = Normalization::ValueRange { min: -50.0, max: 50.0 };
    spec.output_activation = Activation::Sigmoid;
    let handle = load_model(&spec).unwrap();
    let img = GrayImage::new(4, 1, vec![0, 0, 255, 255]).unwrap();
    let map = run_segmentation(&handle, &img).unwrap();
    assert!(map.values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(map.values[0] < 1e-6 && map.values[3] > 1.0 - 1e-6);
}

#[test]
fn pathology_model_loads_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = pathology_spec(mean_projection(dir.path(), 6, 18), 6);
    let handle = load_model(&spec).unwrap();
    let img = GrayImage::filled(6, 6, 51).unwrap();
    let f = run_pathology_features(&handle, "img-1", &img).unwrap();
    assert_eq!(f.names, labels());
    for (j, v) in f.values.iter().enumerate() {
        assert!((v - 0.2 * (j + 1) as f64).abs() < 1e-5, "label {j}: {v}");
    }
    assert_eq!(f, run_pathology_features(&handle, "img-1", &img).unwrap());
}

#[test]
fn unknown_output_name_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = seg_spec(identity_segmenter(dir.path(), 8), 8);
    spec.output_name = "logits".into();
    let err = load_model(&spec).unwrap_err();
    assert!(matches!(err, Error::ModelLoad { .. }));
    assert!(err.to_string().contains("'logits'"), "{err}");
}

#[test]
fn unknown_input_name_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = seg_spec(identity_segmenter(dir.path(), 8), 8);
    spec.input_name = "pixels".into();
    let err = load_model(&spec).unwrap_err();
    assert!(err.to_string().contains("'pixels'"), "{err}");
}

#[test]
fn incompatible_shapes_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    // projection emits 18 scores but the spec declares 19 labels
    let mut spec = pathology_spec(mean_projection(dir.path(), 6, 18), 6);
    spec.labels.push("Extra".into());
    let err = load_model(&spec).unwrap_err();
    assert!(err.to_string().contains("expected 19"), "{err}");

    // declared input size disagrees with the graph's fixed input
    let spec = seg_spec(identity_segmenter(dir.path(), 8), 5);
    assert!(matches!(load_model(&spec), Err(Error::ModelLoad { .. })));
}

#[test]
fn missing_labels_fail_before_loading() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = pathology_spec(mean_projection(dir.path(), 6, 17), 6);
    spec.labels.retain(|l| l != "Effusion");
    match load_model(&spec) {
        Err(Error::MissingLabels { missing, .. }) => assert_eq!(missing, vec!["Effusion"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn garbage_file_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.onnx");
    std::fs::write(&path, b"definitely not protobuf \xff\xff").unwrap();
    assert!(matches!(load_model(&seg_spec(path, 8)), Err(Error::ModelLoad { .. })));
}

#[test]
fn fingerprint_tracks_model_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ha = load_model(&pathology_spec(mean_projection(a.path(), 6, 18), 6)).unwrap();
    let hb = load_model(&pathology_spec(mean_projection(b.path(), 6, 18), 6)).unwrap();
    let seg = load_model(&seg_spec(identity_segmenter(a.path(), 6), 6)).unwrap();
    // same bytes, different directory: spec path differs, so fingerprints differ
    assert_ne!(ha.fingerprint(), hb.fingerprint());
    assert_ne!(ha.fingerprint(), seg.fingerprint());
    assert_eq!(ha.fingerprint().len(), 64);
}
