use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_tree, LogisticParams, SeverityModel, TreeModel, TreeParams};
use crate::error::{Error, Result};

pub const MIN_CV_SAMPLES: usize = 22;

pub trait Predictor {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> bool;
}

pub trait Fitter: Sync {
    type Model: Predictor;
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[bool]) -> Result<Self::Model>;
}

impl Predictor for TreeModel {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> bool {
        TreeModel::predict_row(self, row)
    }
}

/// Classifies at score > 0.5.
impl Predictor for SeverityModel {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> bool {
        self.score_row(&row.to_vec()) > 0.5
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TreeFitter(pub TreeParams);

impl Fitter for TreeFitter {
    type Model = TreeModel;
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[bool]) -> Result<TreeModel> {
        fit_tree(x, y, &self.0)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticFitter(pub LogisticParams);

impl Fitter for LogisticFitter {
    type Model = SeverityModel;
    fn fit(&self, x: ArrayView2<'_, f64>, y: &[bool]) -> Result<SeverityModel> {
        let names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        SeverityModel::fit(names, x, y, &self.0)
    }
}

/// Predicts the training majority class; ties go to the negative class.
#[derive(Debug, Clone, Copy, Default)]
pub struct MajorityFitter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityModel(pub bool);

impl Predictor for MajorityModel {
    fn predict_row(&self, _row: ArrayView1<'_, f64>) -> bool {
        self.0
    }
}

impl Fitter for MajorityFitter {
    type Model = MajorityModel;
    fn fit(&self, _x: ArrayView2<'_, f64>, y: &[bool]) -> Result<MajorityModel> {
        let pos = y.iter().filter(|&&v| v).count();
        Ok(MajorityModel(2 * pos > y.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// `correct / (2 * folds_total)`; skipped folds count as wrong.
    pub accuracy: f64,
    /// `correct / evaluated` over the folds that ran.
    pub accuracy_evaluated: f64,
    pub folds_total: usize,
    pub folds_run: usize,
    pub folds_skipped: usize,
    pub correct: usize,
    pub evaluated: usize,
}

/// Exhaustive leave-two-out cross-validation: every unordered pair is held
/// out once, the fitter trains on the remaining `n - 2` samples and the pair
/// is predicted. Folds whose fit fails are skipped and counted.
pub fn leave_two_out_cv<F: Fitter>(x: ArrayView2<'_, f64>, y: &[bool], fitter: &F) -> Result<CvResult> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if n < MIN_CV_SAMPLES {
        return Err(Error::invalid(format!(
            "leave-two-out needs >= {MIN_CV_SAMPLES} samples, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let outcomes: Vec<Option<usize>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let keep: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
            let xt: Array2<f64> = x.select(Axis(0), &keep);
            let yt: Vec<bool> = keep.iter().map(|&k| y[k]).collect();
            let model = fitter.fit(xt.view(), &yt).ok()?;
            Some(
                [i, j]
                    .into_iter()
                    .filter(|&k| model.predict_row(x.row(k)) == y[k])
                    .count(),
            )
        })
        .collect();
    let folds_total = pairs.len();
    let folds_run = outcomes.iter().flatten().count();
    let correct: usize = outcomes.iter().flatten().sum();
    let evaluated = 2 * folds_run;
    Ok(CvResult {
        accuracy: correct as f64 / (2 * folds_total) as f64,
        accuracy_evaluated: if evaluated == 0 {
            0.0
        } else {
            correct as f64 / evaluated as f64
        },
        folds_total,
        folds_run,
        folds_skipped: folds_total - folds_run,
        correct,
        evaluated,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => (self.tp + self.tn) as f64 / t as f64,
        }
    }
}

pub fn confusion(yhat: &[bool], y: &[bool]) -> Result<ConfusionMatrix> {
    if yhat.len() != y.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            yhat.len(),
            y.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in yhat.iter().zip(y) {
        match (p, t) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}
