use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::nn::Tensor;
use crate::rng::derived;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub holdout: f64,
    pub poly_degree_1d: usize,
    pub poly_degree_nd: usize,
    /// Interior knots per axis for one-dimensional inputs.
    pub spline_knots_1d: usize,
    /// Interior knots per axis for tensor-product splines.
    pub spline_knots_nd: usize,
    pub trees: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            holdout: 0.2,
            poly_degree_1d: 9,
            poly_degree_nd: 5,
            spline_knots_1d: 64,
            spline_knots_nd: 10,
            trees: 500,
            min_leaf: 5,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Report {
    pub polynomial: f64,
    pub spline: f64,
    pub forest: f64,
    /// Best held-out R² across families.
    pub best: f64,
}

// inputs rescaled to [-1, 1] per column using training ranges
struct Scaler {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Scaler {
    fn fit(x: &Tensor) -> Self {
        let lo = (0..x.cols())
            .map(|c| x.column(c).into_iter().fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..x.cols())
            .map(|c| x.column(c).into_iter().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Self { lo, hi }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let w = self.hi[j] - self.lo[j];
                if w > 0.0 {
                    2.0 * (v - self.lo[j]) / w - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn monomials(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for p in 0..=left {
            cur.push(p);
            rec(d, left - p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, degree, &mut Vec::new(), &mut out);
    out
}

fn legendre(t: f64, n: usize) -> Vec<f64> {
    let mut p = vec![1.0, t];
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * t * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(next);
    }
    p.truncate(n + 1);
    p
}

fn poly_features(x: &[f64], terms: &[Vec<usize>], degree: usize) -> Vec<f64> {
    let basis: Vec<Vec<f64>> = x.iter().map(|&t| legendre(t, degree)).collect();
    terms
        .iter()
        .map(|powers| powers.iter().enumerate().map(|(j, &p)| basis[j][p]).product())
        .collect()
}

/// Cubic B-spline basis on `[-1, 1]` with `m` equally spaced interior knots
/// (`m + 4` functions).
fn bspline_basis(t: f64, m: usize) -> Vec<f64> {
    let t = t.clamp(-1.0, 1.0);
    let h = 2.0 / (m + 1) as f64;
    let knots: Vec<f64> = (-3..=(m as i64 + 4)).map(|i| -1.0 + i as f64 * h).collect();
    let nb = m + 4;
    // degree-0 basis on the extended knot vector, then Cox–de Boor
    let span = (((t + 1.0) / h).floor() as usize).min(m) + 3;
    let mut b = vec![0.0; knots.len() - 1];
    b[span] = 1.0;
    for deg in 1..=3 {
        let mut next = vec![0.0; b.len() - 1];
        for i in 0..next.len() {
            let left = (t - knots[i]) / (knots[i + deg] - knots[i]) * b[i];
            let right = (knots[i + deg + 1] - t) / (knots[i + deg + 1] - knots[i + 1]) * b[i + 1];
            next[i] = left + right;
        }
        b = next;
    }
    b.truncate(nb);
    b
}

fn spline_features(x: &[f64], m: usize) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = x.iter().map(|&t| bspline_basis(t, m)).collect();
    if x.len() <= 2 {
        let mut out = vec![1.0];
        for axis in &per_axis {
            out = out.iter().flat_map(|a| axis.iter().map(move |b| a * b)).collect();
        }
        out
    } else {
        // additive model beyond two inputs
        let mut out = vec![1.0];
        for axis in &per_axis {
            out.extend(axis);
        }
        out
    }
}

/// Ridge is relative to the mean squared row norm of the design.
fn fit_predict_linear(train: &Tensor, y: &[f64], test: &Tensor, ridge: f64) -> Option<Vec<f64>> {
    let scale = train.as_slice().iter().map(|v| v * v).sum::<f64>() / train.rows().max(1) as f64;
    let w = least_squares(train, y, ridge * scale.max(1e-300))?;
    Some(
        test.iter_rows()
            .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum())
            .collect(),
    )
}

fn design(rows: &[Vec<f64>], f: impl Fn(&[f64]) -> Vec<f64>) -> Tensor {
    let feats: Vec<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
    Tensor::from_rows(&feats).expect("rectangular design")
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

fn grow(x: &[Vec<f64>], y: &[f64], idx: &mut [usize], min_leaf: usize) -> Node {
    let n = idx.len();
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    if n < 2 * min_leaf {
        return Node::Leaf(mean);
    }
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x[0].len() {
        idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_sum = 0.0;
        for s in 0..n - 1 {
            left_sum += y[idx[s]];
            let nl = s + 1;
            if nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let (a, b) = (x[idx[s]][f], x[idx[s + 1]][f]);
            if a == b {
                continue;
            }
            // maximizing between-group sum of squares
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, 0.5 * (a + b)));
            }
        }
    }
    let Some((gain, feature, threshold)) = best else {
        return Node::Leaf(mean);
    };
    if gain <= total * total / n as f64 + 1e-12 * total.abs().max(1.0) {
        return Node::Leaf(mean);
    }
    idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
    let cut = idx.partition_point(|&i| x[i][feature] <= threshold);
    let (l, r) = idx.split_at_mut(cut);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(x, y, l, min_leaf)),
        right: Box::new(grow(x, y, r, min_leaf)),
    }
}

/// Bagged regression trees averaged over `trees` bootstrap fits.
fn forest_predict(x: &[Vec<f64>], y: &[f64], test: &[Vec<f64>], trees: usize, min_leaf: usize, seed: u64) -> Vec<f64> {
    let n = x.len();
    let forest: Vec<Node> = (0..trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived(seed, 1000 + t as u64);
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow(x, y, &mut idx, min_leaf)
        })
        .collect();
    test.iter()
        .map(|r| forest.iter().map(|t| t.predict(r)).sum::<f64>() / trees as f64)
        .collect()
}

/// Held-out R² of `u` (single column) regressed on `z` by each family.
fn r2_column(z: &Tensor, u: &[f64], cfg: &RegressionConfig) -> Result<R2Report> {
    let n = z.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived(cfg.seed, 0x5e1));
    let n_test = ((n as f64 * cfg.holdout).round() as usize).clamp(1, n - 1);
    let (test_idx, train_idx) = order.split_at(n_test);
    let scaler = Scaler::fit(&z.select_rows(train_idx));
    let rows = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&i| scaler.apply(z.row(i))).collect() };
    let (xtr, xte) = (rows(train_idx), rows(test_idx));
    let ytr: Vec<f64> = train_idx.iter().map(|&i| u[i]).collect();
    let yte: Vec<f64> = test_idx.iter().map(|&i| u[i]).collect();
    let score = |pred: Option<Vec<f64>>| pred.map_or(f64::NEG_INFINITY, |p| stats::r_squared(&yte, &p));

    let d = z.cols();
    let degree = if d == 1 { cfg.poly_degree_1d } else { cfg.poly_degree_nd };
    let terms = monomials(d, degree);
    let pf = |r: &[f64]| poly_features(r, &terms, degree);
    let polynomial = score(fit_predict_linear(&design(&xtr, pf), &ytr, &design(&xte, pf), 1e-10));

    let knots = if d == 1 {
        cfg.spline_knots_1d
    } else {
        cfg.spline_knots_nd
    };
    let sf = |r: &[f64]| spline_features(r, knots);
    // splines get a firmer ridge: knots in data-free regions are otherwise unconstrained
    let spline = score(fit_predict_linear(&design(&xtr, sf), &ytr, &design(&xte, sf), 1e-3));

    let forest = score(Some(forest_predict(
        &xtr,
        &ytr,
        &xte,
        cfg.trees.max(1),
        cfg.min_leaf.max(1),
        cfg.seed,
    )));
    Ok(R2Report {
        polynomial,
        spline,
        forest,
        best: polynomial.max(spline).max(forest),
    })
}

/// Nonlinear-regression R² of `U` on `Z` on a held-out split; with several
/// `U` columns the per-column reports are averaged. Constant `U` scores 1.
pub fn regress_r2(u: &Tensor, z: &Tensor, cfg: &RegressionConfig) -> Result<R2Report> {
    if u.rows() != z.rows() {
        return Err(Error::Dimension("U and Z need equal row counts".into()));
    }
    if u.rows() < 50 {
        return Err(Error::Config(format!("regression needs N >= 50, got {}", u.rows())));
    }
    let mut reports = Vec::new();
    for c in 0..u.cols() {
        let col = u.column(c);
        let spread =
            col.iter().copied().fold(f64::NEG_INFINITY, f64::max) - col.iter().copied().fold(f64::INFINITY, f64::min);
        if spread == 0.0 {
            reports.push(R2Report {
                polynomial: 1.0,
                spline: 1.0,
                forest: 1.0,
                best: 1.0,
            });
            continue;
        }
        reports.push(r2_column(z, &col, cfg)?);
    }
    let avg = |f: fn(&R2Report) -> f64| reports.iter().map(f).sum::<f64>() / reports.len() as f64;
    Ok(R2Report {
        polynomial: avg(|r| r.polynomial),
        spline: avg(|r| r.spline),
        forest: avg(|r| r.forest),
        best: avg(|r| r.best),
    })
}
