use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};

/// Monte-Carlo estimate of one energy-score term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyScoreEstimate {
    /// Mean of `‖x − Y‖^β` over inputs and draws.
    pub reconstruction: f64,
    /// Mean of `‖Y − Y′‖^β` over the `m(m−1)` ordered pairs of distinct draws.
    pub pairwise: f64,
    /// `reconstruction − ½·pairwise`.
    pub loss: f64,
    pub m: usize,
}

/// Energy-score estimate from `m = draws.len()` decoder samples per input.
/// Every draw is a matrix shaped like `x`.
pub fn energy_score_terms(x: &Tensor, draws: &[Tensor], beta: f64) -> Result<EnergyScoreEstimate> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::Config(format!(
            "energy score needs at least 2 draws per input, got {m}"
        )));
    }
    if draws.iter().any(|d| d.shape() != x.shape()) {
        return Err(Error::Dimension("decoder draws must match the input shape".into()));
    }
    let n = x.rows().max(1) as f64;
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        if beta == 2.0 {
            sq
        } else {
            sq.sqrt().powf(beta)
        }
    };
    let mut recon = 0.0;
    for d in draws {
        for (xr, yr) in x.iter_rows().zip(d.iter_rows()) {
            recon += dist(xr, yr);
        }
    }
    recon /= n * m as f64;
    let mut pair = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            for (ya, yb) in draws[a].iter_rows().zip(draws[b].iter_rows()) {
                pair += 2.0 * dist(ya, yb);
            }
        }
    }
    pair /= n * (m * (m - 1)) as f64;
    Ok(EnergyScoreEstimate {
        reconstruction: recon,
        pairwise: pair,
        loss: recon - 0.5 * pair,
        m,
    })
}

/// Records the same estimator on a graph. `draws` are `batch×p` nodes and
/// `x` is a constant node of the same shape. Returns `(loss, recon, pair)`.
pub(crate) fn energy_score_graph(g: &mut Graph, x: Var, draws: &[Var], beta: f64) -> (Var, Var, Var) {
    let m = draws.len();
    let n = g.shape(x)[0].max(1) as f64;
    let mut recon_terms = Vec::with_capacity(m);
    for &d in draws {
        let diff = g.sub(x, d);
        let norms = g.row_norm_pow(diff, beta);
        recon_terms.push(g.sum(norms));
    }
    let recon = sum_all(g, &recon_terms);
    let recon = g.scale(recon, 1.0 / (n * m as f64));
    let mut pair_terms = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let diff = g.sub(draws[a], draws[b]);
            let norms = g.row_norm_pow(diff, beta);
            pair_terms.push(g.sum(norms));
        }
    }
    let pair = sum_all(g, &pair_terms);
    let pair = g.scale(pair, 2.0 / (n * (m * (m - 1)) as f64));
    let half = g.scale(pair, -0.5);
    let loss = g.add(recon, half);
    (loss, recon, pair)
}

fn sum_all(g: &mut Graph, terms: &[Var]) -> Var {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decoder_gives_zero_loss() {
        let x = Tensor::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.5]]).unwrap();
        for beta in [1.0, 1.5, 2.0] {
            let e = energy_score_terms(&x, &[x.clone(), x.clone(), x.clone()], beta).unwrap();
            assert_eq!(e.loss, 0.0);
            assert_eq!(e.reconstruction, 0.0);
        }
    }

    // x = 0 with decoder uniform on {−1, +1}: enumerate all draws (Y, Y′).
    fn enumerated(beta: f64) -> (f64, f64) {
        let support = [-1.0_f64, 1.0];
        let recon: f64 = support.iter().map(|y| y.abs().powf(beta)).sum::<f64>() / 2.0;
        let mut pair = 0.0;
        for a in support {
            for b in support {
                pair += (a - b).abs().powf(beta) / 4.0;
            }
        }
        (recon, pair)
    }

    #[test]
    fn two_point_decoder_matches_enumeration() {
        // pairs of draws with each ordered outcome equally represented
        let x = Tensor::zeros(4, 1);
        let d1 = Tensor::from_vec(4, 1, vec![-1.0, -1.0, 1.0, 1.0]).unwrap();
        let d2 = Tensor::from_vec(4, 1, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        for (beta, want_recon, want_pair, want_loss) in [(2.0, 1.0, 2.0, 0.0), (1.0, 1.0, 1.0, 0.5)] {
            let (er, ep) = enumerated(beta);
            assert_eq!((er, ep), (want_recon, want_pair));
            let e = energy_score_terms(&x, &[d1.clone(), d2.clone()], beta).unwrap();
            assert!((e.reconstruction - want_recon).abs() < 1e-15);
            assert!((e.pairwise - want_pair).abs() < 1e-15);
            assert!((e.loss - want_loss).abs() < 1e-15);
        }
    }

    #[test]
    fn single_draw_is_rejected() {
        let x = Tensor::zeros(2, 1);
        assert!(matches!(
            energy_score_terms(&x, std::slice::from_ref(&x), 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn graph_estimator_matches_plain_estimator() {
        let x = Tensor::from_rows(&[vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.2, 0.0]]).unwrap();
        let draws: Vec<Tensor> = (0..3)
            .map(|j| x.map(|v| v * (1.0 + 0.1 * j as f64) - 0.2 * j as f64))
            .collect();
        for beta in [1.0, 2.0] {
            let plain = energy_score_terms(&x, &draws, beta).unwrap();
            let mut g = Graph::new();
            let xv = g.leaf(x.clone());
            let dv: Vec<Var> = draws.iter().map(|d| g.leaf(d.clone())).collect();
            let (loss, recon, pair) = energy_score_graph(&mut g, xv, &dv, beta);
            assert!((g.value(loss).item() - plain.loss).abs() < 1e-12);
            assert!((g.value(recon).item() - plain.reconstruction).abs() < 1e-12);
            assert!((g.value(pair).item() - plain.pairwise).abs() < 1e-12);
        }
    }

    // Four-point toy: X uniform on {0,1,2,3}, code z = X mod 2. The true
    // conditional given z is uniform on {z, z+2}. Expected scores are
    // enumerated exactly over (X, Y, Y′).
    fn expected_score(cond: &dyn Fn(usize) -> Vec<(f64, f64)>, beta: f64) -> f64 {
        let mut total = 0.0;
        for x in 0..4usize {
            let law = cond(x % 2);
            let xf = x as f64;
            let mut recon = 0.0;
            let mut pair = 0.0;
            for &(y, p) in &law {
                recon += p * (xf - y).abs().powf(beta);
                for &(y2, q) in &law {
                    pair += p * q * (y - y2).abs().powf(beta);
                }
            }
            total += 0.25 * (recon - 0.5 * pair);
        }
        total
    }

    #[test]
    fn true_conditional_never_loses_to_alternatives() {
        let truth = |z: usize| vec![(z as f64, 0.5), (z as f64 + 2.0, 0.5)];
        type Conditional = Box<dyn Fn(usize) -> Vec<(f64, f64)>>;
        let alternatives: Vec<Conditional> = vec![
            Box::new(|z: usize| vec![(z as f64 + 1.0, 1.0)]),
            Box::new(|z: usize| vec![(z as f64, 0.8), (z as f64 + 2.0, 0.2)]),
            Box::new(|_| vec![(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]),
            Box::new(|z: usize| vec![(z as f64 - 0.5, 0.5), (z as f64 + 2.5, 0.5)]),
        ];
        for beta in [0.5, 1.0, 1.5, 2.0] {
            let best = expected_score(&truth, beta);
            for alt in &alternatives {
                assert!(expected_score(alt.as_ref(), beta) >= best - 1e-12, "beta {beta}");
            }
        }
    }
}
