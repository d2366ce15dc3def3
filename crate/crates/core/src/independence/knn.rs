use kdtree::KdTree;
use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;

use crate::nn::Tensor;
use crate::rng::derived;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Metric {
    Euclidean,
    Chebyshev,
}

impl Metric {
    pub(crate) fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Chebyshev => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        }
    }
}

pub(crate) struct Cloud {
    rows: Vec<Vec<f64>>,
    tree: KdTree<f64, usize, Vec<f64>>,
}

impl Cloud {
    pub(crate) fn new(points: &Tensor) -> Self {
        let rows: Vec<Vec<f64>> = points.iter_rows().map(|r| r.to_vec()).collect();
        let mut tree = KdTree::with_capacity(points.cols().max(1), 16);
        for (i, r) in rows.iter().enumerate() {
            tree.add(r.clone(), i).expect("finite point");
        }
        Self { rows, tree }
    }

    /// Distances from point `i` to its `k` nearest other points, ascending.
    pub(crate) fn neighbours(&self, i: usize, k: usize, metric: Metric) -> Vec<f64> {
        let d = |a: &[f64], b: &[f64]| metric.distance(a, b);
        let found = self.tree.nearest(&self.rows[i], k + 1, &d).expect("finite query");
        let mut out: Vec<f64> = Vec::with_capacity(k);
        let mut skipped_self = false;
        for (dist, &j) in found {
            if j == i && !skipped_self {
                skipped_self = true;
                continue;
            }
            if out.len() < k {
                out.push(dist);
            }
        }
        out
    }
}

/// `k`-th neighbour distances (all `k` of them per point). Exact ties at
/// distance zero trigger a tiny Gaussian jitter of scale 1e-12; the flag
/// reports whether that happened.
pub(crate) fn knn_distances(points: &Tensor, k: usize, metric: Metric, seed: u64) -> (Vec<Vec<f64>>, bool) {
    let cloud = Cloud::new(points);
    let dists: Vec<Vec<f64>> = (0..points.rows()).map(|i| cloud.neighbours(i, k, metric)).collect();
    if dists.iter().all(|d| d.iter().all(|&v| v > 0.0)) {
        return (dists, false);
    }
    let jittered = jitter(points, seed);
    let cloud = Cloud::new(&jittered);
    (
        (0..points.rows()).map(|i| cloud.neighbours(i, k, metric)).collect(),
        true,
    )
}

pub(crate) fn jitter(points: &Tensor, seed: u64) -> Tensor {
    let mut rng = derived(seed, 0x717);
    let mut out = points.clone();
    for v in out.as_mut_slice() {
        *v += 1e-12 * rng.sample::<f64, _>(Normal01);
    }
    out
}

pub(crate) fn has_duplicates(points: &Tensor) -> bool {
    let mut rows: Vec<&[f64]> = points.iter_rows().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.windows(2).any(|w| w[0] == w[1])
}
