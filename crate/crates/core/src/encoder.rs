//! The encoder abstraction shared by trained models and analytic test maps.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// A differentiable map from data space to latent space.
pub trait Encoder: Send + Sync {
    fn input_dim(&self) -> usize;

    fn latent_dim(&self) -> usize;

    /// Encodes a `batch×input_dim` matrix.
    fn encode(&self, x: &Tensor) -> Result<Tensor>;

    /// `result[j]` is the `batch×input_dim` matrix of `∂e_j/∂x`, one row per
    /// input row.
    fn jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>>;

    /// Gradient of a single component; defaults to slicing the Jacobian.
    fn component_gradient(&self, x: &Tensor, component: usize) -> Result<Tensor> {
        let mut jac = self.jacobian(x)?;
        if component >= jac.len() {
            return Err(Error::Dimension(format!(
                "component {component} out of range for {} latents",
                jac.len()
            )));
        }
        Ok(jac.swap_remove(component))
    }

    fn encode_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = Tensor::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.encode(&t)?.into_vec())
    }
}

impl<E: Encoder + ?Sized> Encoder for Arc<E> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        (**self).encode(x)
    }
    fn jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        (**self).jacobian(x)
    }
    fn component_gradient(&self, x: &Tensor, component: usize) -> Result<Tensor> {
        (**self).component_gradient(x, component)
    }
}

type ValueFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync;

/// Encoder given by closed-form component functions and their gradients.
pub struct AnalyticEncoder {
    input_dim: usize,
    latent_dim: usize,
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl AnalyticEncoder {
    /// `grad(x)[j]` must be `∇e_j(x)`.
    pub fn new(
        input_dim: usize,
        latent_dim: usize,
        value: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            input_dim,
            latent_dim,
            value: Box::new(value),
            grad: Box::new(grad),
        }
    }

    /// `e(x) = A·x` with one row of `A` per latent.
    pub fn linear(rows: Vec<Vec<f64>>) -> Self {
        let d = rows[0].len();
        let k = rows.len();
        let a = rows.clone();
        Self::new(
            d,
            k,
            move |x| a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect(),
            move |_| rows.clone(),
        )
    }

    /// `e(x) = ‖x − center‖`; the gradient at the center is taken as zero.
    pub fn radial(center: Vec<f64>) -> Self {
        let c = center.clone();
        Self::new(
            center.len(),
            1,
            move |x| vec![x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()],
            move |x| {
                let d: Vec<f64> = x.iter().zip(&center).map(|(a, b)| a - b).collect();
                let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                vec![if r > 0.0 {
                    d.iter().map(|v| v / r).collect()
                } else {
                    vec![0.0; d.len()]
                }]
            },
        )
    }

    /// Radius and polar angle about the origin in the plane.
    pub fn polar() -> Self {
        Self::new(
            2,
            2,
            |x| vec![(x[0] * x[0] + x[1] * x[1]).sqrt(), x[1].atan2(x[0])],
            |x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let r = r2.sqrt();
                if r == 0.0 {
                    return vec![vec![0.0, 0.0], vec![0.0, 0.0]];
                }
                vec![vec![x[0] / r, x[1] / r], vec![-x[1] / r2, x[0] / r2]]
            },
        )
    }
}

impl Encoder for AnalyticEncoder {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn encode(&self, x: &Tensor) -> Result<Tensor> {
        check_cols(x, self.input_dim)?;
        let data = x.iter_rows().flat_map(|r| (self.value)(r)).collect();
        Tensor::from_vec(x.rows(), self.latent_dim, data)
    }

    fn jacobian(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        check_cols(x, self.input_dim)?;
        let mut out = vec![Tensor::zeros(x.rows(), self.input_dim); self.latent_dim];
        for (i, r) in x.iter_rows().enumerate() {
            for (j, g) in (self.grad)(r).into_iter().enumerate() {
                out[j].row_mut(i).copy_from_slice(&g);
            }
        }
        Ok(out)
    }
}

fn check_cols(x: &Tensor, d: usize) -> Result<()> {
    if x.cols() != d {
        return Err(Error::Dimension(format!(
            "encoder expects {d} columns, got {}",
            x.cols()
        )));
    }
    Ok(())
}
