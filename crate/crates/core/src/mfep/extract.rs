use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::path::Path;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::nn::Tensor;
use crate::stats::r_squared;

/// Cubic-polynomial R² of each latent component against MFEP arc length.
pub fn component_r2(encoder: &dyn Encoder, mfep: &Path) -> Result<Vec<f64>> {
    let pts = Tensor::from_vec(mfep.len(), 2, mfep.points().iter().flatten().copied().collect())?;
    let z = encoder.encode(&pts)?;
    let total = mfep.length().max(f64::MIN_POSITIVE);
    let s: Vec<f64> = mfep.arc_lengths().iter().map(|a| a / total).collect();
    let design = Tensor::from_rows(&s.iter().map(|&t| vec![1.0, t, t * t, t * t * t]).collect::<Vec<_>>())?;
    Ok((0..encoder.latent_dim())
        .map(|c| {
            let y = z.column(c);
            let spread =
                y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
            if !(spread > 1e-12) {
                return 0.0;
            }
            match least_squares(&design, &y, 0.0) {
                Some(w) => {
                    let pred: Vec<f64> = design
                        .iter_rows()
                        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum())
                        .collect();
                    r_squared(&y, &pred)
                }
                None => 0.0,
            }
        })
        .collect())
}

/// The latent component whose values along the MFEP are best explained by
/// arc length, with its R².
pub fn best_parameterizing_component(encoder: &dyn Encoder, mfep: &Path) -> Result<(usize, f64)> {
    let r2 = component_r2(encoder, mfep)?;
    r2.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, &r)| (i, r))
        .ok_or_else(|| Error::Dimension("encoder has no latents".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractMethod {
    /// Bracketed 1-D root solve along the previous point's gradient.
    RootFind,
    /// Predictor step along the normalized gradient, then the same root solve.
    GradientFollow,
}

impl FromStr for ExtractMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root_find" => Ok(Self::RootFind),
            "gradient_follow" => Ok(Self::GradientFollow),
            other => Err(Error::Config(format!("unknown extraction method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedPath {
    pub path: Path,
    /// Set when a root solve failed and the march stopped early.
    pub truncated: bool,
    pub component: usize,
}

struct Probe<'a> {
    encoder: &'a dyn Encoder,
    component: usize,
}

impl Probe<'_> {
    fn value(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.encoder.encode_point(&x)?[self.component])
    }

    fn gradient(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let t = Tensor::from_vec(1, 2, x.to_vec())?;
        let g = self.encoder.component_gradient(&t, self.component)?;
        Ok([g[(0, 0)], g[(0, 1)]])
    }

    /// Finds `x + t·u` with `e(x + t·u) = target`, `u` the unit gradient at
    /// `x`. Bisection on an expanding bracket, damped Newton as fallback.
    fn solve(&self, x: [f64; 2], target: f64, tol: f64) -> Result<Option<[f64; 2]>> {
        let g = self.gradient(x)?;
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if !(gn > 1e-12) {
            return Ok(None);
        }
        let u = [g[0] / gn, g[1] / gn];
        let at = |t: f64| [x[0] + t * u[0], x[1] + t * u[1]];
        let f = |t: f64| -> Result<f64> { Ok(self.value(at(t))? - target) };
        let f0 = f(0.0)?;
        if f0.abs() <= tol {
            return Ok(Some(x));
        }
        let guess = -f0 / gn;
        let mut hi = if guess != 0.0 { 1.5 * guess } else { 1e-3 };
        let mut fhi = f(hi)?;
        let mut tries = 0;
        while fhi.signum() == f0.signum() && tries < 12 {
            hi *= 2.0;
            fhi = f(hi)?;
            tries += 1;
        }
        if fhi.signum() != f0.signum() {
            let (mut a, mut b, mut fa) = (0.0, hi, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = f(m)?;
                if fm.abs() <= tol || (b - a).abs() < 1e-15 {
                    return Ok(Some(at(m)));
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return Ok(Some(at(0.5 * (a + b))));
        }
        // damped Newton along the same line
        let mut t = 0.0;
        for _ in 0..50 {
            let p = at(t);
            let r = self.value(p)? - target;
            if r.abs() <= tol {
                return Ok(Some(p));
            }
            let gp = self.gradient(p)?;
            let slope = gp[0] * u[0] + gp[1] * u[1];
            if slope.abs() < 1e-12 {
                break;
            }
            t -= 0.5 * r / slope;
        }
        Ok(None)
    }
}

/// Traces the curve where `e_component` sweeps `z_range`, starting from
/// `start`. Levels are spaced `step` apart in latent units.
pub fn extract_path(
    encoder: &dyn Encoder,
    component: usize,
    z_range: (f64, f64),
    start: [f64; 2],
    method: ExtractMethod,
    step: f64,
) -> Result<ExtractedPath> {
    if encoder.input_dim() != 2 {
        return Err(Error::Dimension("path extraction needs a planar encoder".into()));
    }
    if component >= encoder.latent_dim() {
        return Err(Error::Dimension(format!("component {component} out of range")));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let probe = Probe { encoder, component };
    let tol = 1e-8;
    let (z0, z1) = z_range;
    let n = ((z1 - z0).abs() / step).ceil().max(1.0) as usize;
    let dz = (z1 - z0) / n as f64;
    let mut x = match probe.solve(start, z0, tol)? {
        Some(p) => p,
        None => start,
    };
    let mut pts = vec![x];
    let mut truncated = false;
    for j in 1..=n {
        let target = z0 + dz * j as f64;
        let from = match method {
            ExtractMethod::RootFind => x,
            ExtractMethod::GradientFollow => {
                let g = probe.gradient(x)?;
                let g2 = g[0] * g[0] + g[1] * g[1];
                if !(g2 > 1e-24) {
                    truncated = true;
                    break;
                }
                let dv = target - probe.value(x)?;
                [x[0] + dv * g[0] / g2, x[1] + dv * g[1] / g2]
            }
        };
        match probe.solve(from, target, tol)? {
            Some(p) => {
                x = p;
                pts.push(p);
            }
            None => {
                truncated = true;
                break;
            }
        }
    }
    if pts.len() < 2 {
        pts.push(x);
        truncated = true;
    }
    Ok(ExtractedPath {
        path: Path::new(pts)?,
        truncated,
        component,
    })
}
