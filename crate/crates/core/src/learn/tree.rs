use std::cmp::Ordering;
use std::collections::BTreeSet;

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 3,
            min_leaf: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        /// `[negatives, positives]`
        counts: [usize; 2],
        prediction: bool,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub n_features: usize,
    pub root: Node,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeReport {
    pub depth: usize,
    pub internal_nodes: usize,
    pub leaves: usize,
    pub leaf_sizes: Vec<usize>,
    /// Distinct feature indices used by splits, ascending.
    pub used_features: Vec<usize>,
}

/// Split quality as the exact rational `num / den` where
/// `num / den = (l0^2 + l1^2) / nl + (r0^2 + r1^2) / nr`.
/// Larger is better: weighted Gini impurity of the children is `n - num/den`.
#[derive(Debug, Clone, Copy)]
struct Quality {
    num: u128,
    den: u128,
}

impl Quality {
    fn parent(c: [usize; 2]) -> Self {
        let (a, b) = (c[0] as u128, c[1] as u128);
        Quality {
            num: a * a + b * b,
            den: a + b,
        }
    }

    fn split(l: [usize; 2], r: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] as u128).pow(2) + (c[1] as u128).pow(2);
        let nl = (l[0] + l[1]) as u128;
        let nr = (r[0] + r[1]) as u128;
        Quality {
            num: sq(l) * nr + sq(r) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Quality) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn leaf(counts: [usize; 2]) -> Node {
    Node::Leaf {
        counts,
        // ties go to the negative class
        prediction: counts[1] > counts[0],
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

struct Builder<'a, 'b> {
    x: ArrayView2<'a, f64>,
    y: &'b [bool],
    params: TreeParams,
}

impl Builder<'_, '_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        [idx.len() - pos, pos]
    }

    fn best_split(&self, idx: &[usize], counts: [usize; 2]) -> Option<(usize, f64)> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(Quality, usize, f64)> = None;
        let parent = Quality::parent(counts);
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            let col = self.x.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left = [0usize; 2];
            for k in 1..n {
                left[self.y[order[k - 1]] as usize] += 1;
                let (a, b) = (col[order[k - 1]], col[order[k]]);
                if a == b || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let q = Quality::split(left, right);
                if q.cmp(&parent) != Ordering::Greater {
                    continue;
                }
                if best.as_ref().is_none_or(|(bq, _, _)| q.cmp(bq) == Ordering::Greater) {
                    best = Some((q, f, midpoint(a, b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&self, idx: Vec<usize>, depth: usize) -> Node {
        let counts = self.counts(&idx);
        if depth >= self.params.max_depth
            || counts[0] == 0
            || counts[1] == 0
            || idx.len() < 2 * self.params.min_leaf
        {
            return leaf(counts);
        }
        let Some((feature, threshold)) = self.best_split(&idx, counts) else {
            return leaf(counts);
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[[i, feature]] <= threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }
}

/// CART with Gini impurity. Candidate thresholds are midpoints between
/// consecutive distinct values; the best split maximizes the impurity
/// decrease with ties going to the lower feature index, then the lower
/// threshold. Splits leaving fewer than `min_leaf` samples on a side are
/// never considered.
pub fn fit_tree(x: ArrayView2<'_, f64>, y: &[bool], params: &TreeParams) -> Result<TreeModel> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::invalid(format!("{n} rows but {} labels", y.len())));
    }
    if params.min_leaf < 1 {
        return Err(Error::invalid("min_leaf must be >= 1"));
    }
    if n < 2 * params.min_leaf {
        return Err(Error::invalid(format!(
            "tree needs >= {} samples, got {n}",
            2 * params.min_leaf
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("feature matrix contains non-finite values"));
    }
    let builder = Builder { x, y, params: *params };
    Ok(TreeModel {
        params: *params,
        n_features: x.ncols(),
        root: builder.grow((0..n).collect(), 0),
    })
}

impl TreeModel {
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { prediction, .. } => return *prediction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { &**left } else { &**right },
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<bool> {
        x.axis_iter(Axis(0)).map(|r| self.predict_row(r)).collect()
    }

    pub fn report(&self) -> TreeReport {
        fn walk(n: &Node, depth: usize, r: &mut TreeReport, used: &mut BTreeSet<usize>) {
            r.depth = r.depth.max(depth);
            match n {
                Node::Leaf { counts, .. } => {
                    r.leaves += 1;
                    r.leaf_sizes.push(counts[0] + counts[1]);
                }
                Node::Split {
                    feature, left, right, ..
                } => {
                    r.internal_nodes += 1;
                    used.insert(*feature);
                    walk(left, depth + 1, r, used);
                    walk(right, depth + 1, r, used);
                }
            }
        }
        let mut r = TreeReport {
            depth: 0,
            internal_nodes: 0,
            leaves: 0,
            leaf_sizes: Vec::new(),
            used_features: Vec::new(),
        };
        let mut used = BTreeSet::new();
        walk(&self.root, 0, &mut r, &mut used);
        r.used_features = used.into_iter().collect();
        r
    }
}
