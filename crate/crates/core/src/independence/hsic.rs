use rand::seq::SliceRandom;

use super::kernel::{double_centre, median_distance, rbf_gram};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::derived;

/// Centred Gaussian Gram matrix with the median-distance bandwidth.
pub(crate) fn centred_gram(x: &Tensor) -> Tensor {
    let mut k = rbf_gram(x, median_distance(x));
    double_centre(&mut k);
    k
}

/// `tr(K H L H) / N²` from one centred and one raw-or-centred Gram matrix.
pub(crate) fn hsic_from_grams(kc: &Tensor, l: &Tensor) -> f64 {
    let n = kc.rows() as f64;
    kc.as_slice().iter().zip(l.as_slice()).map(|(a, b)| a * b).sum::<f64>() / (n * n)
}

fn check(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(Error::Dimension(format!(
            "HSIC needs equal row counts, got {} and {}",
            a.rows(),
            b.rows()
        )));
    }
    if a.rows() < 20 {
        return Err(Error::Config(format!("HSIC needs N >= 20, got {}", a.rows())));
    }
    Ok(())
}

/// Biased HSIC V-statistic with Gaussian kernels, bandwidth set to the
/// median pairwise distance of each argument.
pub fn hsic(a: &Tensor, b: &Tensor) -> Result<f64> {
    check(a, b)?;
    Ok(hsic_from_grams(&centred_gram(a), &centred_gram(b)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermutationTest {
    pub statistic: f64,
    pub null: Vec<f64>,
    pub p_value: f64,
}

/// HSIC with a permutation null: rows of `b` are shuffled `n_perm` times
/// and `p = (1 + #{null ≥ observed}) / (n_perm + 1)`.
pub fn hsic_permutation_test(a: &Tensor, b: &Tensor, n_perm: usize, seed: u64) -> Result<PermutationTest> {
    check(a, b)?;
    let kc = centred_gram(a);
    let l = centred_gram(b);
    let statistic = hsic_from_grams(&kc, &l);
    let n = a.rows();
    let mut rng = derived(seed, 0x45c);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut lp = Tensor::zeros(n, n);
    let null: Vec<f64> = (0..n_perm)
        .map(|_| {
            perm.shuffle(&mut rng);
            for i in 0..n {
                let src = l.row(perm[i]);
                for (j, v) in lp.row_mut(i).iter_mut().enumerate() {
                    *v = src[perm[j]];
                }
            }
            hsic_from_grams(&kc, &lp)
        })
        .collect();
    let exceed = null.iter().filter(|&&v| v >= statistic).count();
    Ok(PermutationTest {
        statistic,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        null,
    })
}
