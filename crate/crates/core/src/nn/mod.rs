//! Dense-tensor autodiff, MLP layers and the Adam optimizer.

mod adam;
pub mod checkpoint;
mod graph;
mod mlp;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use mlp::{batch_jacobian, Linear, Mlp, MlpVars};
pub use tensor::Tensor;

pub(crate) use graph::log_sum_exp;

/// Anything with a flat, ordered list of trainable tensors.
pub trait Parameterized {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
    fn param_names(&self) -> Vec<String>;
}

impl Parameterized for Mlp {
    fn params(&self) -> Vec<&Tensor> {
        Mlp::params(self)
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Mlp::params_mut(self)
    }
    fn param_names(&self) -> Vec<String> {
        Mlp::param_names(self, "mlp")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    // Scalar-by-scalar forward pass written independently of the tape.
    fn reference_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
        let n = mlp.layers().len();
        let mut h = x.to_vec();
        for (i, l) in mlp.layers().iter().enumerate() {
            let mut out = vec![0.0; l.weight.cols()];
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = l.bias[(0, j)];
                for (k, hk) in h.iter().enumerate() {
                    acc += hk * l.weight[(k, j)];
                }
                *o = acc;
            }
            if i + 1 < n {
                for o in out.iter_mut() {
                    *o = if *o > 0.0 { *o } else { o.exp() - 1.0 };
                }
                if mlp.residual() && i > 0 && h.len() == out.len() {
                    for (o, hk) in out.iter_mut().zip(&h) {
                        *o += hk;
                    }
                }
            }
            h = out;
        }
        h
    }

    #[test]
    fn zero_weight_network_broadcasts_bias() {
        let mut mlp = Mlp::zeros(&[3, 2], false).unwrap();
        mlp.layers_mut()[0].bias = Tensor::row_vector(&[1.5, -2.0]);
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![-4.0, 0.0, 9.0]]).unwrap();
        let y = mlp.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[1.5, -2.0, 1.5, -2.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let lin = Linear {
            weight: Tensor::identity(3),
            bias: Tensor::zeros(1, 3),
        };
        let mlp = Mlp::from_layers(vec![lin], false).unwrap();
        let x = Tensor::from_rows(&[vec![0.1, -0.2, 5.0]]).unwrap();
        assert_eq!(mlp.forward(&x).unwrap(), x);
    }

    #[test]
    fn two_layer_elu_matches_scalar_reference() {
        for residual in [false, true] {
            let mut rng = seeded(7);
            let mlp = Mlp::new(&[3, 5, 5, 2], residual, &mut rng).unwrap();
            let x = Tensor::from_rows(&[vec![0.3, -1.2, 2.0], vec![-0.7, 0.1, 0.0]]).unwrap();
            let y = mlp.forward(&x).unwrap();
            for i in 0..2 {
                let r = reference_forward(&mlp, x.row(i));
                for (a, b) in y.row(i).iter().zip(&r) {
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mlp = Mlp::zeros(&[3, 2], false).unwrap();
        assert!(matches!(
            mlp.forward(&Tensor::zeros(4, 2)),
            Err(crate::Error::Dimension(_))
        ));
    }

    #[test]
    fn sum_of_linear_map_gradient_is_outer_product() {
        // loss = sum(x·W) with x a 1×3 row -> dW[k][j] = x_k
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(&[1.0, -2.0, 0.5]));
        let w = g.leaf(Tensor::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let y = g.matmul(x, w);
        let loss = g.sum(y);
        let grads = g.backward(loss).unwrap();
        let gw = grads.wrt(w).unwrap();
        assert_eq!(gw.as_slice(), &[1.0, 1.0, -2.0, -2.0, 0.5, 0.5]);
    }

    #[test]
    fn quadratic_loss_gradient_matches_hand_derivation() {
        // loss = ‖x·W‖², dW = 2 xᵀ (x·W)
        let xv = [0.5, -1.0];
        let wv = [1.0, 2.0, -0.5, 3.0, 0.25, -1.0];
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row_vector(&xv));
        let w = g.leaf(Tensor::from_vec(2, 3, wv.to_vec()).unwrap());
        let y = g.matmul(x, w);
        let yy = g.mul(y, y);
        let loss = g.sum(yy);
        let grads = g.backward(loss).unwrap();
        let yv: Vec<f64> = (0..3).map(|j| xv[0] * wv[j] + xv[1] * wv[3 + j]).collect();
        let gw = grads.wrt(w).unwrap();
        for k in 0..2 {
            for j in 0..3 {
                assert!((gw[(k, j)] - 2.0 * xv[k] * yv[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn backward_twice_is_usage_error() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let y = g.mul(x, x);
        g.backward(y).unwrap();
        assert!(matches!(g.backward(y), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(2, 2));
        assert!(matches!(g.backward(x), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn checkpoint_round_trip_and_header_checks() {
        let mut rng = seeded(3);
        let mlp = Mlp::new(&[2, 4, 1], true, &mut rng).unwrap();
        let text = checkpoint::to_string("mlp", &mlp).unwrap();
        let back: Mlp = checkpoint::from_str("mlp", &text).unwrap();
        assert_eq!(back, mlp);
        assert!(checkpoint::from_str::<Mlp>("dpa", &text).is_err());
        let bumped = text.replace("\"version\":1", "\"version\":99");
        assert!(checkpoint::from_str::<Mlp>("mlp", &bumped).is_err());
    }
}
