use std::path::Path;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::model_runtime::PathologyFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the weights; the bias is not penalized.
    pub lambda: f64,
    /// Convergence threshold on the max-norm of the gradient.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            tolerance: 1e-8,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic function, kept strictly inside (0, 1).
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn linear(row: ArrayView1<'_, f64>, weights: &[f64], bias: f64) -> f64 {
    row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias
}

/// `sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] - lambda/2 * |w|^2`
pub fn penalized_log_likelihood(
    x: ArrayView2<'_, f64>,
    y: &[bool],
    weights: &[f64],
    bias: f64,
    lambda: f64,
) -> f64 {
    let data: f64 = x
        .axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &yi)| {
            let z = linear(row, weights, bias);
            if yi {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum();
    data - 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`penalized_log_likelihood`]: `(d/dw, d/db)`.
pub fn penalized_gradient(
    x: ArrayView2<'_, f64>,
    y: &[bool],
    weights: &[f64],
    bias: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    let mut gw: Vec<f64> = weights.iter().map(|w| -lambda * w).collect();
    let mut gb = 0.0;
    for (row, &yi) in x.axis_iter(Axis(0)).zip(y) {
        let r = yi as u8 as f64 - sigmoid(linear(row, weights, bias));
        for (g, xv) in gw.iter_mut().zip(row.iter()) {
            *g += r * xv;
        }
        gb += r;
    }
    (gw, gb)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major, n x n).
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// Maximizes the L2-penalized log-likelihood by iteratively reweighted least
/// squares (Newton's method) from the zero vector, halving the step whenever
/// it fails to improve the objective.
pub fn fit_logistic(x: ArrayView2<'_, f64>, y: &[bool], params: &LogisticParams) -> Result<LogisticFit> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(Error::invalid("logistic fit needs both classes"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature matrix contains non-finite values"));
    }
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {}", params.lambda)));
    }

    let lambda = params.lambda;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut objective = penalized_log_likelihood(x, y, &w, b, lambda);
    let mut iterations = 0;
    let dim = d + 1;

    loop {
        let (gw, gb) = penalized_gradient(x, y, &w, b, lambda);
        let gnorm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gnorm < params.tolerance || iterations >= params.max_iterations {
            let converged = gnorm < params.tolerance;
            if !converged {
                log::warn!(
                    "logistic fit stopped after {iterations} iterations, gradient max-norm {gnorm:.3e}"
                );
            }
            return Ok(LogisticFit {
                weights: w,
                bias: b,
                iterations,
                gradient_norm: gnorm,
                converged,
            });
        }
        iterations += 1;

        // Negative Hessian: X'WX + lambda*I on the weight block; bias last.
        let mut h = vec![0.0; dim * dim];
        for row in x.axis_iter(Axis(0)) {
            let p = sigmoid(linear(row, &w, b));
            let wt = p * (1.0 - p);
            for i in 0..dim {
                let xi = if i < d { row[i] } else { 1.0 };
                if xi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    let xj = if j < d { row[j] } else { 1.0 };
                    h[i * dim + j] += wt * xi * xj;
                }
            }
        }
        for i in 0..d {
            h[i * dim + i] += lambda;
        }
        for i in 0..dim {
            for j in 0..i {
                h[j * dim + i] = h[i * dim + j];
            }
        }
        let mut g = gw.clone();
        g.push(gb);
        let step = cholesky_solve(&h, &g, dim).or_else(|| {
            let trace: f64 = (0..dim).map(|i| h[i * dim + i]).sum();
            let jitter = 1e-10 * trace.max(1.0);
            let mut hj = h.clone();
            for i in 0..dim {
                hj[i * dim + i] += jitter;
            }
            cholesky_solve(&hj, &g, dim)
        });
        let Some(step) = step else {
            log::warn!("logistic fit: singular curvature after {iterations} iterations");
            return Ok(LogisticFit {
                weights: w,
                bias: b,
                iterations,
                gradient_norm: gnorm,
                converged: false,
            });
        };

        let mut scale = 1.0;
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&step).map(|(wi, s)| wi + scale * s).collect();
            let cand_b = b + scale * step[d];
            let cand = penalized_log_likelihood(x, y, &cand_w, cand_b, lambda);
            if cand >= objective || scale < 1e-10 {
                w = cand_w;
                b = cand_b;
                objective = cand;
                break;
            }
            scale *= 0.5;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    /// SHA-256 of the training features and labels.
    pub dataset_hash: String,
    pub n_samples: usize,
    pub n_positive: usize,
    pub positive_class: String,
    pub params: LogisticParams,
    pub iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
    /// Caller-supplied provenance (config hash, model fingerprints, ...).
    #[serde(default)]
    pub provenance: std::collections::BTreeMap<String, String>,
}

/// Standardization plus logistic weights: the severity score model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityModel {
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub manifest: TrainingManifest,
}

impl SeverityModel {
    /// Fits the standardizer on raw features, then the logistic model on the
    /// standardized matrix. `y` is true for the positive (future ICU) class.
    pub fn fit(
        feature_names: Vec<String>,
        x: ArrayView2<'_, f64>,
        y: &[bool],
        params: &LogisticParams,
    ) -> Result<Self> {
        if feature_names.len() != x.ncols() {
            return Err(Error::invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        let standardizer = Standardizer::fit(x)?;
        let z = standardizer.transform(x);
        let fit = fit_logistic(z.view(), y, params)?;
        Ok(Self {
            feature_names,
            standardizer,
            weights: fit.weights,
            bias: fit.bias,
            manifest: TrainingManifest {
                dataset_hash: super::dataset_hash(x, y),
                n_samples: y.len(),
                n_positive: y.iter().filter(|&&v| v).count(),
                positive_class: "future icu".into(),
                params: *params,
                iterations: fit.iterations,
                converged: fit.converged,
                final_gradient_norm: fit.gradient_norm,
                provenance: Default::default(),
            },
        })
    }

    /// Score for a raw feature row in model feature order.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(row);
        sigmoid(z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
    }

    /// Severity score of one image; feature names must match the model's set.
    pub fn score(&self, features: &PathologyFeatures) -> Result<f64> {
        let extra: Vec<&String> = features
            .names
            .iter()
            .filter(|n| !self.feature_names.contains(n))
            .collect();
        let missing: Vec<&String> = self
            .feature_names
            .iter()
            .filter(|n| !features.names.contains(n))
            .collect();
        if !extra.is_empty() || !missing.is_empty() || features.names.len() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "feature mismatch for '{}': missing {missing:?}, unexpected {extra:?}",
                features.image_id
            )));
        }
        let row: Vec<f64> = self
            .feature_names
            .iter()
            .map(|n| features.get(n).expect("checked above"))
            .collect();
        Ok(self.score_row(&row))
    }

    /// The model with every weight and the bias negated: it scores the
    /// opposite class.
    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w = -*w);
        m.bias = -m.bias;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SeverityModel = serde_json::from_str(text)?;
        if m.weights.len() != m.feature_names.len()
            || m.standardizer.n_features() != m.feature_names.len()
            || m.standardizer.std.len() != m.feature_names.len()
        {
            return Err(Error::Schema("model JSON has inconsistent feature counts".into()));
        }
        if !m.weights.iter().chain([&m.bias]).all(|v| v.is_finite()) {
            return Err(Error::Schema("model JSON has non-finite weights".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
