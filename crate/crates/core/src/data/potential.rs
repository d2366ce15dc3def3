use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;

use super::analytic::AnalyticDistribution;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::derived;

/// Smooth potential energy surface.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// The four-term Müller–Brown surface with the standard literature constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MuellerBrown {
    pub amp: [f64; 4],
    pub a: [f64; 4],
    pub b: [f64; 4],
    pub c: [f64; 4],
    pub x0: [f64; 4],
    pub y0: [f64; 4],
}

impl Default for MuellerBrown {
    fn default() -> Self {
        Self {
            amp: [-200.0, -100.0, -170.0, 15.0],
            a: [-1.0, -1.0, -6.5, 0.7],
            b: [0.0, 0.0, 11.0, 0.6],
            c: [-10.0, -10.0, -6.5, 0.7],
            x0: [1.0, 0.0, -0.5, -1.0],
            y0: [0.0, 0.5, 1.5, 1.0],
        }
    }
}

impl MuellerBrown {
    /// Approximate locations of the three minima: upper-left, middle, lower-right.
    pub const MINIMA_GUESS: [[f64; 2]; 3] = [[-0.558, 1.442], [-0.050, 0.467], [0.623, 0.028]];
}

impl Potential for MuellerBrown {
    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, p: &[f64]) -> f64 {
        (0..4)
            .map(|i| {
                let dx = p[0] - self.x0[i];
                let dy = p[1] - self.y0[i];
                self.amp[i] * (self.a[i] * dx * dx + self.b[i] * dx * dy + self.c[i] * dy * dy).exp()
            })
            .sum()
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; 2];
        for i in 0..4 {
            let dx = p[0] - self.x0[i];
            let dy = p[1] - self.y0[i];
            let e = self.amp[i] * (self.a[i] * dx * dx + self.b[i] * dx * dy + self.c[i] * dy * dy).exp();
            g[0] += e * (2.0 * self.a[i] * dx + self.b[i] * dy);
            g[1] += e * (self.b[i] * dx + 2.0 * self.c[i] * dy);
        }
        g
    }
}

/// Isotropic quadratic bowl `U = ½ k ‖x − center‖²`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub stiffness: f64,
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn energy(&self, x: &[f64]) -> f64 {
        0.5 * self.stiffness * x.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(a, b)| self.stiffness * (a - b))
            .collect()
    }
}

/// Separable double well `U = (x² − 1)² + y²` with minima at `(±1, 0)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct DoubleWell;

impl Potential for DoubleWell {
    fn dim(&self) -> usize {
        2
    }
    fn energy(&self, p: &[f64]) -> f64 {
        (p[0] * p[0] - 1.0).powi(2) + p[1] * p[1]
    }
    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        vec![4.0 * p[0] * (p[0] * p[0] - 1.0), 2.0 * p[1]]
    }
}

/// Gradient descent with Armijo backtracking from `start`, polished with
/// Newton steps on a finite-difference Hessian once the gradient is small.
pub fn local_minimum(potential: &dyn Potential, start: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut x = start.to_vec();
    let mut step = 1e-3;
    for _ in 0..max_iter {
        let g = potential.gradient(&x);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < tol {
            return Ok(x);
        }
        if gn2.sqrt() < 1e-2 {
            if let Some(next) = newton_step(potential, &x, &g) {
                let gn_next: f64 = potential.gradient(&next).iter().map(|v| v * v).sum();
                if gn_next < gn2 {
                    x = next;
                    continue;
                }
            }
        }
        let e0 = potential.energy(&x);
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            if potential.energy(&trial) <= e0 - 1e-4 * step * gn2 {
                x = trial;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-16 {
                return Ok(x);
            }
        }
    }
    let g = potential.gradient(&x);
    Err(Error::NoConvergence {
        what: "local minimization",
        iterations: max_iter,
        residual: g.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

fn newton_step(potential: &dyn Potential, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let d = x.len();
    let h = 1e-6;
    let mut hess = vec![vec![0.0; d]; d];
    for j in 0..d {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += h;
        b[j] -= h;
        let (ga, gb) = (potential.gradient(&a), potential.gradient(&b));
        for i in 0..d {
            hess[i][j] = (ga[i] - gb[i]) / (2.0 * h);
        }
    }
    let delta = crate::linalg::solve(&hess, g)?;
    Some(x.iter().zip(&delta).map(|(a, b)| a - b).collect())
}

/// Multi-start minimization over a regular grid of starting points; returns
/// the distinct minima found, sorted by energy.
pub fn find_minima(potential: &dyn Potential, lo: [f64; 2], hi: [f64; 2], starts_per_axis: usize) -> Vec<Vec<f64>> {
    let mut found: Vec<Vec<f64>> = Vec::new();
    let n = starts_per_axis.max(2);
    for i in 0..n {
        for j in 0..n {
            let s = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64,
            ];
            let Ok(m) = local_minimum(potential, &s, 1e-8, 200_000) else {
                continue;
            };
            let inside = m[0] >= lo[0] && m[0] <= hi[0] && m[1] >= lo[1] && m[1] <= hi[1];
            let dup = found
                .iter()
                .any(|f| f.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 1e-6);
            if inside && !dup {
                found.push(m);
            }
        }
    }
    found.sort_by(|a, b| potential.energy(a).total_cmp(&potential.energy(b)));
    found
}

/// Overdamped Langevin integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangevinConfig {
    pub dt: f64,
    pub kt: f64,
    pub burn_in: usize,
    pub thin: usize,
    /// Trajectories leaving the ball `|x| <= bound` are reported as diverged.
    pub bound: f64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            kt: 15.0,
            burn_in: 1000,
            thin: 10,
            bound: 100.0,
        }
    }
}

/// Euler–Maruyama integration of `dx = −∇U dt + √(2 kT) dW`, returning one
/// state every `thin` steps after `burn_in` steps, `n_steps` post-burn-in
/// steps in total.
pub fn langevin_sample(
    potential: &dyn Potential,
    n_steps: usize,
    config: &LangevinConfig,
    seed: u64,
    init: &[f64],
) -> Result<Tensor> {
    if !(config.dt > 0.0) || config.thin == 0 {
        return Err(Error::Config("langevin needs dt > 0 and thin >= 1".into()));
    }
    let d = potential.dim();
    if init.len() != d {
        return Err(Error::Dimension(format!(
            "init has {} coordinates, potential {d}",
            init.len()
        )));
    }
    let mut rng = derived(seed, 0x1a9e);
    let noise = (2.0 * config.kt * config.dt).sqrt();
    let mut x = init.to_vec();
    let mut kept = Vec::with_capacity(n_steps / config.thin * d);
    for step in 0..config.burn_in + n_steps {
        let g = potential.gradient(&x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            let xi_noise: f64 = rng.sample(Normal01);
            *xi += -gi * config.dt + noise * xi_noise;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if !(r2.sqrt() <= config.bound) {
            return Err(Error::StepSize {
                bound: config.bound,
                step,
            });
        }
        if step >= config.burn_in && (step - config.burn_in + 1).is_multiple_of(config.thin) {
            kept.extend_from_slice(&x);
        }
    }
    let rows = kept.len() / d;
    Tensor::from_vec(rows, d, kept)
}

/// Boltzmann distribution `∝ exp(−U/kT)` of a potential, sampled by
/// independent Langevin chains started at `inits`.
pub struct Boltzmann<P: Potential> {
    pub potential: P,
    pub langevin: LangevinConfig,
    pub inits: Vec<Vec<f64>>,
    pub label: String,
}

impl Boltzmann<MuellerBrown> {
    pub fn mueller_brown(kt: f64) -> Self {
        Self {
            potential: MuellerBrown::default(),
            langevin: LangevinConfig {
                kt,
                ..LangevinConfig::default()
            },
            inits: MuellerBrown::MINIMA_GUESS.iter().map(|m| m.to_vec()).collect(),
            label: "mueller_brown".into(),
        }
    }
}

impl<P: Potential> Boltzmann<P> {
    /// Draws `n` states, split evenly across the chains.
    pub fn try_sample(&self, n: usize, seed: u64) -> Result<Tensor> {
        let chains = self.inits.len().max(1);
        let per = n.div_ceil(chains);
        let mut parts = Vec::with_capacity(chains);
        for (c, init) in self.inits.iter().enumerate() {
            let cfg = self.langevin;
            let s = langevin_sample(
                &self.potential,
                per * cfg.thin,
                &cfg,
                seed.wrapping_add(c as u64 * 7919),
                init,
            )?;
            parts.push(s);
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        let all = Tensor::vcat(&refs)?;
        let idx: Vec<usize> = (0..n.min(all.rows())).collect();
        Ok(all.select_rows(&idx))
    }
}

impl<P: Potential> AnalyticDistribution for Boltzmann<P> {
    fn dim(&self) -> usize {
        self.potential.dim()
    }
    fn log_density(&self, y: &[f64]) -> f64 {
        -self.potential.energy(y) / self.langevin.kt
    }
    fn score(&self, y: &[f64]) -> Vec<f64> {
        self.potential
            .gradient(y)
            .iter()
            .map(|g| -g / self.langevin.kt)
            .collect()
    }
    fn sample(&self, n: usize, seed: u64) -> Tensor {
        self.try_sample(n, seed).expect("langevin sampler diverged; lower dt")
    }
    fn name(&self) -> &str {
        &self.label
    }
}
