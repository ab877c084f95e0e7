//! Severity-score learning: standardization, penalized logistic regression,
//! a constrained CART tree for the separability study and leave-two-out CV.

mod cv;
mod logistic;
mod standardize;
mod tree;

use ndarray::ArrayView2;
use sha2::{Digest, Sha256};

pub use cv::{
    confusion, leave_two_out_cv, ConfusionMatrix, CvResult, Fitter, LogisticFitter, MajorityFitter,
    MajorityModel, Predictor, TreeFitter, MIN_CV_SAMPLES,
};
pub use logistic::{
    fit_logistic, penalized_gradient, penalized_log_likelihood, sigmoid, LogisticFit, LogisticParams,
    SeverityModel, TrainingManifest,
};
pub use standardize::{Standardizer, STD_FLOOR};
pub use tree::{fit_tree, Node, TreeModel, TreeParams, TreeReport};

/// SHA-256 over the shape, the feature bits and the labels.
pub fn dataset_hash(x: ArrayView2<'_, f64>, y: &[bool]) -> String {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(y.iter().map(|&b| b as u8).collect::<Vec<_>>());
    hex::encode(h.finalize())
}
