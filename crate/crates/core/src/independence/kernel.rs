use crate::nn::Tensor;
use crate::stats;

/// Pairwise Euclidean distance between rows `i` and `j`.
pub(crate) fn row_distance(x: &Tensor, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Median pairwise distance over at most 1000 evenly strided rows, falling
/// back to the mean distance when the median is zero.
pub(crate) fn median_distance(x: &Tensor) -> f64 {
    let n = x.rows();
    let stride = n.div_ceil(1000).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d = Vec::with_capacity(idx.len() * idx.len() / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            d.push(row_distance(x, i, j));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let med = stats::percentile_sorted(&d, 50.0);
    if med > 0.0 {
        return med;
    }
    let mean = stats::mean(&d);
    if mean > 0.0 {
        mean
    } else {
        1.0
    }
}

/// Gaussian kernel matrix `exp(−‖xᵢ − xⱼ‖² / (2σ²))`.
pub(crate) fn rbf_gram(x: &Tensor, sigma: f64) -> Tensor {
    let n = x.rows();
    let mut k = Tensor::zeros(n, n);
    let c = -0.5 / (sigma * sigma);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in i + 1..n {
            let d = row_distance(x, i, j);
            let v = (c * d * d).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross kernel between the rows of `a` and `b`.
pub(crate) fn rbf_cross(a: &Tensor, b: &Tensor, sigma: f64) -> Tensor {
    let c = -0.5 / (sigma * sigma);
    let mut k = Tensor::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            let d2: f64 = a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum();
            k[(i, j)] = (c * d2).exp();
        }
    }
    k
}

/// Double-centres a symmetric matrix in place: `H K H`.
pub(crate) fn double_centre(k: &mut Tensor) {
    let n = k.rows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        let ri = row_means[i];
        for (j, v) in k.row_mut(i).iter_mut().enumerate() {
            *v += grand - ri - row_means[j];
        }
    }
}
