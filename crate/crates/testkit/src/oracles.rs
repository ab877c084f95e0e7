use num_rational::Ratio;

/// Quantile by sorting and interpolating at `p (n - 1)`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let t = h - lo as f64;
    (1.0 - t) * s[lo] + t * s[hi]
}

/// Central finite-difference gradient of `f` at `at`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut x = at.to_vec();
    (0..at.len())
        .map(|i| {
            x[i] = at[i] + h;
            let up = f(&x);
            x[i] = at[i] - h;
            let down = f(&x);
            x[i] = at[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Number of correct held-out predictions of the training-majority
/// predictor (ties predict negative) over all leave-two-out folds, and the
/// number of folds.
pub fn majority_leave_two_out(n_pos: usize, n_neg: usize) -> (usize, usize) {
    let n = n_pos + n_neg;
    let pairs = |k: usize| k * k.saturating_sub(1) / 2;
    let predicts_pos = |pos: usize| 2 * pos > n - 2;
    let mut correct = 0;
    if n_pos >= 2 && predicts_pos(n_pos - 2) {
        correct += 2 * pairs(n_pos);
    }
    if !predicts_pos(n_pos) {
        correct += 2 * pairs(n_neg);
    }
    correct += n_pos * n_neg;
    (correct, pairs(n))
}

/// Reference CART tree over plain row vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    Leaf(bool),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

impl OracleTree {
    pub fn predict(&self, row: &[f64]) -> bool {
        match self {
            OracleTree::Leaf(p) => *p,
            OracleTree::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            OracleTree::Leaf(_) => 0,
            OracleTree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

type Q = Ratio<i128>;

fn gini(rows: &[usize], y: &[bool]) -> Q {
    let n = rows.len() as i128;
    let pos = rows.iter().filter(|&&i| y[i]).count() as i128;
    let p = Q::new(pos, n);
    let q = Q::new(n - pos, n);
    Q::from_integer(1) - p * p - q * q
}

/// Exhaustive CART: at every node try every feature and every midpoint
/// between consecutive distinct values, recomputing child impurities from
/// scratch with exact rationals.
pub fn brute_cart(x: &[Vec<f64>], y: &[bool], max_depth: usize, min_leaf: usize) -> OracleTree {
    fn grow(x: &[Vec<f64>], y: &[bool], rows: Vec<usize>, depth: usize, max_depth: usize, min_leaf: usize) -> OracleTree {
        let pos = rows.iter().filter(|&&i| y[i]).count();
        let leaf = OracleTree::Leaf(2 * pos > rows.len());
        if depth == max_depth || pos == 0 || pos == rows.len() {
            return leaf;
        }
        let n = rows.len() as i128;
        let parent = gini(&rows, y);
        let mut best: Option<(Q, usize, f64)> = None;
        for f in 0..x[0].len() {
            let mut values: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for w in values.windows(2) {
                let mut t = (w[0] + w[1]) / 2.0;
                if t >= w[1] || t < w[0] {
                    t = w[0];
                }
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let child = Q::new(l.len() as i128, n) * gini(&l, y) + Q::new(r.len() as i128, n) * gini(&r, y);
                let gain = parent - child;
                if gain <= Q::from_integer(0) {
                    continue;
                }
                if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                    best = Some((gain, f, t));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return leaf;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[i][feature] <= threshold);
        OracleTree::Split {
            feature,
            threshold,
            left: Box::new(grow(x, y, l, depth + 1, max_depth, min_leaf)),
            right: Box::new(grow(x, y, r, depth + 1, max_depth, min_leaf)),
        }
    }
    grow(x, y, (0..y.len()).collect(), 0, max_depth, min_leaf)
}
