use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Moment buffers for one parameter list, in the order the parameters are
/// passed to [`AdamState::step`].
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros = |p: &&Tensor| Tensor::zeros(p.rows(), p.cols());
        Self {
            config,
            first: params.iter().map(zeros).collect(),
            second: params.iter().map(zeros).collect(),
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Changes the step size without touching the moment buffers.
    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update. Nothing is modified if any gradient entry
    /// is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[String]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Dimension(format!(
                "adam tracks {} parameters, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(Error::Dimension(format!(
                    "gradient {i} has shape {:?}, parameter {:?}",
                    g.shape(),
                    p.shape()
                )));
            }
            if !g.is_finite() {
                let param = names.get(i).cloned().unwrap_or_else(|| format!("param[{i}]"));
                return Err(Error::NonFiniteGradient { param });
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            for (((w, &g), m), v) in p.as_mut_slice().iter_mut().zip(grads[i].as_slice()).zip(m).zip(v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Tensor::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(AdamConfig::default(), &[&p]);
        for _ in 0..5 {
            st.step(&mut [&mut p], &[Tensor::zeros(1, 3)], &names(1)).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let g = [0.3, -2.0, 1e-3, 0.0];
        let mut p = Tensor::zeros(1, 4);
        let cfg = AdamConfig::with_lr(1e-2);
        let mut st = AdamState::new(cfg, &[&p]);
        st.step(&mut [&mut p], &[Tensor::row_vector(&g)], &names(1)).unwrap();
        for (w, g) in p.as_slice().iter().zip(g) {
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((w - expected).abs() < 1e-15, "{w} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_descends() {
        let mut p = Tensor::scalar(0.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]);
        for _ in 0..200 {
            st.step(&mut [&mut p], &[Tensor::scalar(0.7)], &names(1)).unwrap();
        }
        assert!(p.item() < -0.1);
        assert_eq!(st.steps_taken(), 200);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut a = Tensor::scalar(1.0);
        let mut b = Tensor::scalar(1.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&a, &b]);
        let err = st
            .step(
                &mut [&mut a, &mut b],
                &[Tensor::scalar(0.1), Tensor::scalar(f64::NAN)],
                &["enc.0.weight".into(), "enc.0.bias".into()],
            )
            .unwrap_err();
        match err {
            Error::NonFiniteGradient { param } => assert_eq!(param, "enc.0.bias"),
            other => panic!("unexpected {other}"),
        }
        assert_eq!(a.item(), 1.0);
        assert_eq!(st.steps_taken(), 0);
    }
}
