use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Affine map `x·W + b` with `W: in×out` and `b: 1×out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Multi-layer perceptron with ELU activations between layers and optional
/// residual connections `h + elu(h·W + b)` between equal-width hidden layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Linear>,
    residual: bool,
}

/// Graph handles for one binding of an [`Mlp`]'s parameters.
#[derive(Clone, Debug)]
pub struct MlpVars {
    vars: Vec<Var>,
}

impl MlpVars {
    pub fn as_slice(&self) -> &[Var] {
        &self.vars
    }
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], residual: bool, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(widths, residual)?;
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.weight.rows() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for w in layer.weight.as_mut_slice() {
                *w = dist.sample(rng);
            }
            for b in layer.bias.as_mut_slice() {
                *b = dist.sample(rng);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(widths: &[usize], residual: bool) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!(
                "mlp widths must list at least two positive sizes, got {widths:?}"
            )));
        }
        let layers = widths
            .windows(2)
            .map(|w| Linear {
                weight: Tensor::zeros(w[0], w[1]),
                bias: Tensor::zeros(1, w[1]),
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            residual,
        })
    }

    pub fn from_layers(layers: Vec<Linear>, residual: bool) -> Result<Self> {
        let mut widths = Vec::with_capacity(layers.len() + 1);
        for (i, l) in layers.iter().enumerate() {
            if l.bias.shape() != [1, l.weight.cols()] {
                return Err(Error::Dimension(format!("layer {i}: bias shape")));
            }
            if i == 0 {
                widths.push(l.weight.rows());
            } else if widths[i] != l.weight.rows() {
                return Err(Error::Dimension(format!(
                    "layer {i} expects {} inputs, previous layer yields {}",
                    l.weight.rows(),
                    widths[i]
                )));
            }
            widths.push(l.weight.cols());
        }
        if layers.is_empty() {
            return Err(Error::Config("mlp needs at least one layer".into()));
        }
        Ok(Self {
            widths,
            layers,
            residual,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn in_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|i| [format!("{prefix}.{i}.weight"), format!("{prefix}.{i}.bias")])
            .collect()
    }

    /// Places every parameter on `g` as a leaf.
    pub fn bind(&self, g: &mut Graph) -> MlpVars {
        MlpVars {
            vars: self.params().into_iter().map(|p| g.leaf(p.clone())).collect(),
        }
    }

    /// Records the forward pass of `x` on `g` using previously bound parameters.
    pub fn forward_graph(&self, g: &mut Graph, vars: &MlpVars, x: Var) -> Var {
        let n = self.layers.len();
        let mut h = x;
        for (i, pair) in vars.vars.chunks_exact(2).enumerate() {
            let lin = g.matmul(h, pair[0]);
            let lin = g.add_row(lin, pair[1]);
            if i + 1 == n {
                h = lin;
            } else {
                let act = g.elu(lin);
                let equal = self.widths[i] == self.widths[i + 1];
                h = if self.residual && i > 0 && equal {
                    g.add(h, act)
                } else {
                    act
                };
            }
        }
        h
    }

    /// Plain forward pass; output is `batch×out`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g);
        let xv = g.leaf(x.clone());
        let out = self.forward_graph(&mut g, &vars, xv);
        Ok(g.value(out).clone())
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.in_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} input columns, got {}",
                self.in_dim(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// Row-wise Jacobian of a batched map built by `build`. Entry `[j]` of the
/// result is a `batch×in` matrix holding `∂out_j/∂x` for every row, computed
/// by one backward pass per output component.
pub fn batch_jacobian<F>(x: &Tensor, out_dim: usize, build: F) -> Result<Vec<Tensor>>
where
    F: Fn(&mut Graph, Var) -> Var,
{
    let mut rows = Vec::with_capacity(out_dim);
    for j in 0..out_dim {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let out = build(&mut g, xv);
        let [_, cols] = g.shape(out);
        if j >= cols {
            return Err(Error::Dimension(format!(
                "jacobian row {j} requested from a {cols}-column output"
            )));
        }
        let col = g.slice_cols(out, j, j + 1);
        let s = g.sum(col);
        let grads = g.backward(s)?;
        rows.push(grads.wrt_or_zeros(xv, x));
    }
    Ok(rows)
}
