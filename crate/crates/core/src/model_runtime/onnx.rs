use std::sync::Arc;

use tract_onnx::prelude::*;

use super::{ModelSpec, OutputKind};
use crate::error::{Error, Result};

pub(super) struct OnnxRunner {
    plan: Arc<TypedRunnableModel>,
    shape: (usize, usize, usize),
}

impl OnnxRunner {
    pub(super) fn load(spec: &ModelSpec, bytes: &[u8]) -> Result<Self> {
        let fail = |message: String| Error::ModelLoad {
            path: spec.model_path.clone(),
            message,
        };
        let mut model = tract_onnx::onnx()
            .model_for_read(&mut &bytes[..])
            .map_err(|e| fail(format!("not a readable ONNX network: {e}")))?;

        let inputs: Vec<String> = model
            .input_outlets()
            .map_err(|e| fail(e.to_string()))?
            .iter()
            .map(|o| model.node(o.node).name.clone())
            .collect();
        if !inputs.iter().any(|n| n == &spec.input_name) {
            return Err(fail(format!(
                "input tensor '{}' not found (model inputs: {inputs:?})",
                spec.input_name
            )));
        }
        model
            .set_input_names([spec.input_name.as_str()])
            .map_err(|e| fail(e.to_string()))?;
        model
            .select_outputs_by_name([spec.output_name.as_str()])
            .map_err(|_| fail(format!("output tensor '{}' not found", spec.output_name)))?;

        let (h, w) = spec.input_hw();
        let c = spec.channels;
        let declared = model
            .input_fact(0)
            .ok()
            .and_then(|f| f.shape.as_concrete_finite().ok().flatten());
        if let Some(declared) = declared {
            if declared.as_slice() != [1, c, h, w] {
                return Err(fail(format!(
                    "input '{}' is declared as {declared:?}, spec expects [1, {c}, {h}, {w}]",
                    spec.input_name
                )));
            }
        }
        model
            .set_input_fact(0, InferenceFact::dt_shape(f32::datum_type(), tvec!(1, c, h, w)))
            .map_err(|e| fail(e.to_string()))?;
        let plan = model
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(|e| {
                fail(format!(
                    "input '{}' is incompatible with shape [1, {c}, {h}, {w}]: {e:#}",
                    spec.input_name
                ))
            })?;

        let runner = OnnxRunner {
            plan,
            shape: (c, h, w),
        };
        let expected = match spec.output_kind {
            OutputKind::PerPixelMap => h * w,
            OutputKind::LabelVector => spec.labels.len(),
        };
        let probe = runner.run(vec![0.0; c * h * w]).map_err(fail)?;
        if probe.len() != expected {
            return Err(fail(format!(
                "output '{}' has {} values, expected {expected}",
                spec.output_name,
                probe.len()
            )));
        }
        Ok(runner)
    }

    pub(super) fn run(&self, input: Vec<f32>) -> std::result::Result<Vec<f32>, String> {
        let (c, h, w) = self.shape;
        let tensor = tract_ndarray::Array4::from_shape_vec((1, c, h, w), input)
            .map_err(|e| e.to_string())?
            .into_tensor();
        let outputs = self
            .plan
            .run(tvec!(tensor.into()))
            .map_err(|e| format!("{e:#}"))?;
        let out = outputs[0].cast_to::<f32>().map_err(|e| e.to_string())?;
        let view = out.to_plain_array_view::<f32>().map_err(|e| e.to_string())?;
        Ok(view.iter().copied().collect())
    }
}
