use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;

use crate::nn::Tensor;
use crate::rng::seeded;

/// A distribution with closed-form log-density and score.
///
/// `log_density` may be unnormalized; diagnostics only use ratios of
/// densities and the score.
pub trait AnalyticDistribution: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, y: &[f64]) -> f64;

    /// `∇_y log P(y)`.
    fn score(&self, y: &[f64]) -> Vec<f64>;

    fn sample(&self, n: usize, seed: u64) -> Tensor;

    fn density(&self, y: &[f64]) -> f64 {
        self.log_density(y).exp()
    }

    fn name(&self) -> &str;
}

#[derive(Clone, Debug)]
pub struct StandardNormal {
    pub dim: usize,
}

impl AnalyticDistribution for StandardNormal {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        let sq: f64 = y.iter().map(|v| v * v).sum();
        -0.5 * sq - 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn score(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| -v).collect()
    }

    fn sample(&self, n: usize, seed: u64) -> Tensor {
        let mut rng = seeded(seed);
        let data = (0..n * self.dim).map(|_| rng.sample(Normal01)).collect();
        Tensor::from_vec(n, self.dim, data).expect("n×dim")
    }

    fn name(&self) -> &str {
        "standard_normal"
    }
}

/// Isotropic Gaussian mixture with a shared standard deviation.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sigma: f64,
}

impl GaussianMixture {
    /// Equal-weight three-component mixture in the plane.
    pub fn trimodal() -> Self {
        Self {
            means: vec![vec![-1.1, -1.1], vec![1.1, -0.9], vec![-0.33, 1.0]],
            weights: vec![1.0 / 3.0; 3],
            sigma: 0.66,
        }
    }

    fn component_log_terms(&self, y: &[f64]) -> Vec<f64> {
        let d = y.len() as f64;
        let s2 = self.sigma * self.sigma;
        let norm = -0.5 * d * (2.0 * std::f64::consts::PI * s2).ln();
        self.means
            .iter()
            .zip(&self.weights)
            .map(|(mu, w)| {
                let sq: f64 = y.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum();
                w.ln() + norm - 0.5 * sq / s2
            })
            .collect()
    }

    /// Posterior component probabilities at `y`.
    pub fn responsibilities(&self, y: &[f64]) -> Vec<f64> {
        let t = self.component_log_terms(y);
        let lse = crate::nn::log_sum_exp(&t);
        t.iter().map(|v| (v - lse).exp()).collect()
    }
}

impl AnalyticDistribution for GaussianMixture {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn log_density(&self, y: &[f64]) -> f64 {
        crate::nn::log_sum_exp(&self.component_log_terms(y))
    }

    fn score(&self, y: &[f64]) -> Vec<f64> {
        let r = self.responsibilities(y);
        let s2 = self.sigma * self.sigma;
        let mut s = vec![0.0; y.len()];
        for (mu, w) in self.means.iter().zip(&r) {
            for (j, sj) in s.iter_mut().enumerate() {
                *sj += w * (mu[j] - y[j]) / s2;
            }
        }
        s
    }

    fn sample(&self, n: usize, seed: u64) -> Tensor {
        let mut rng = seeded(seed);
        let d = self.dim();
        let total: f64 = self.weights.iter().sum();
        let mut out = Tensor::zeros(n, d);
        for i in 0..n {
            let mut u: f64 = rng.random::<f64>() * total;
            let mut c = self.weights.len() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                if u < *w {
                    c = j;
                    break;
                }
                u -= w;
            }
            for j in 0..d {
                let z: f64 = rng.sample(Normal01);
                out[(i, j)] = self.means[c][j] + self.sigma * z;
            }
        }
        out
    }

    fn name(&self) -> &str {
        "trimodal_mixture"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_score(dist: &dyn AnalyticDistribution, y: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..y.len())
            .map(|j| {
                let mut a = y.to_vec();
                let mut b = y.to_vec();
                a[j] += h;
                b[j] -= h;
                (dist.log_density(&a) - dist.log_density(&b)) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).fold(0.0, f64::max)
    }

    #[test]
    fn standard_normal_score_examples() {
        let d = StandardNormal { dim: 2 };
        assert_eq!(d.score(&[0.0, 0.0]), vec![-0.0, -0.0]);
        assert_eq!(d.score(&[1.0, 2.0]), vec![-1.0, -2.0]);
    }

    #[test]
    fn standard_normal_sample_mean_within_clt_bound() {
        let n = 100_000;
        let x = StandardNormal { dim: 3 }.sample(n, 11);
        for m in x.column_means() {
            assert!(m.abs() < 3.0 / (n as f64).sqrt(), "mean {m}");
        }
    }

    #[test]
    fn scores_match_finite_differences_on_grid() {
        let dists: Vec<Box<dyn AnalyticDistribution>> = vec![
            Box::new(StandardNormal { dim: 2 }),
            Box::new(GaussianMixture::trimodal()),
        ];
        for d in &dists {
            let mut worst = 0.0_f64;
            for i in 0..20 {
                for j in 0..20 {
                    let y = [-3.0 + 6.0 * i as f64 / 19.0, -3.0 + 6.0 * j as f64 / 19.0];
                    worst = worst.max(max_rel_err(&d.score(&y), &fd_score(d.as_ref(), &y)));
                }
            }
            assert!(worst < 1e-4, "{}: {worst}", d.name());
        }
    }

    #[test]
    fn mixture_score_at_means_matches_finite_differences() {
        let g = GaussianMixture::trimodal();
        for mu in &g.means {
            let s = g.score(mu);
            let f = fd_score(&g, mu);
            for (a, b) in s.iter().zip(&f) {
                assert!((a - b).abs() < 1e-5);
            }
            // the pull at a mode points away from the mode itself
            assert!(s.iter().any(|v| v.abs() > 1e-3));
        }
    }

    #[test]
    fn mixture_density_integrates_to_one() {
        let g = GaussianMixture::trimodal();
        let (lo, hi, n) = (-7.0, 7.0, 700);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let y = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                total += g.density(&y) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn far_mode_does_not_affect_midpoint_score() {
        let g = GaussianMixture {
            means: vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 40.0]],
            weights: vec![1.0 / 3.0; 3],
            sigma: 0.5,
        };
        let s = g.score(&[0.0, 0.0]);
        assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
    }
}
