use dpa_core::data::StandardNormal;
use dpa_core::dpa::{DpaConfig, DpaModel};
use dpa_core::independence::{hsic, kl_entropy, ks_uniform};
use dpa_core::levelset::{score_alignment, AlignmentConfig, Grid, GridField};
use dpa_core::mfep::{path_metrics, Path};
use dpa_core::nn::{batch_jacobian, AdamConfig, AdamState, Graph, Mlp};
use dpa_core::rng::seeded;
use dpa_core::Tensor;
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal as Normal01;

fn random_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = seeded(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.sample(Normal01)).collect()).unwrap()
}

fn widths_strategy() -> impl Strategy<Value = Vec<usize>> {
    (1usize..4, 1usize..4, 1usize..8, 1usize..4).prop_map(|(input, depth, hidden, out)| {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(hidden, depth));
        w.push(out);
        w
    })
}

/// Scalar test loss: `Σ c ⊙ f(x) + ½ Σ‖f(x)‖^1.5` over the batch.
fn loss_value(mlp: &Mlp, x: &Tensor, c: &Tensor) -> f64 {
    let mut g = Graph::new();
    let vars = mlp.bind(&mut g);
    let xv = g.leaf(x.clone());
    let out = mlp.forward_graph(&mut g, &vars, xv);
    let cv = g.leaf(c.clone());
    let lin = g.mul(out, cv);
    let lin = g.sum(lin);
    let norm = g.row_norm_pow(out, 1.5);
    let norm = g.sum(norm);
    let norm = g.scale(norm, 0.5);
    let total = g.add(lin, norm);
    g.value(total).item()
}

fn loss_gradients(mlp: &Mlp, x: &Tensor, c: &Tensor) -> Vec<Tensor> {
    let mut g = Graph::new();
    let vars = mlp.bind(&mut g);
    let xv = g.leaf(x.clone());
    let out = mlp.forward_graph(&mut g, &vars, xv);
    let cv = g.leaf(c.clone());
    let lin = g.mul(out, cv);
    let lin = g.sum(lin);
    let norm = g.row_norm_pow(out, 1.5);
    let norm = g.sum(norm);
    let norm = g.scale(norm, 0.5);
    let total = g.add(lin, norm);
    let grads = g.backward(total).unwrap();
    vars.as_slice()
        .iter()
        .zip(mlp.params())
        .map(|(&v, p)| grads.wrt_or_zeros(v, p))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn autodiff_matches_central_differences(widths in widths_strategy(), residual in any::<bool>(), seed in 0u64..10_000) {
        let mlp = Mlp::new(&widths, residual, &mut seeded(seed)).unwrap();
        let x = random_tensor(3, widths[0], seed + 1);
        let c = random_tensor(3, *widths.last().unwrap(), seed + 2);
        let grads = loss_gradients(&mlp, &x, &c);
        let h = 1e-6;
        for (p, grad) in grads.iter().enumerate() {
            for idx in 0..grad.len() {
                let mut plus = mlp.clone();
                plus.params_mut()[p].as_mut_slice()[idx] += h;
                let mut minus = mlp.clone();
                minus.params_mut()[p].as_mut_slice()[idx] -= h;
                let fd = (loss_value(&plus, &x, &c) - loss_value(&minus, &x, &c)) / (2.0 * h);
                let an = grad.as_slice()[idx];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-2);
                prop_assert!(rel < 1e-4, "param {p}[{idx}]: autodiff {an}, fd {fd}");
            }
        }
    }

    #[test]
    fn input_jacobian_matches_central_differences(widths in widths_strategy(), residual in any::<bool>(), seed in 0u64..10_000) {
        let mlp = Mlp::new(&widths, residual, &mut seeded(seed)).unwrap();
        let x = random_tensor(2, widths[0], seed + 3);
        let out_dim = *widths.last().unwrap();
        let jac = batch_jacobian(&x, out_dim, |g, xv| {
            let vars = mlp.bind(g);
            mlp.forward_graph(g, &vars, xv)
        }).unwrap();
        let h = 1e-6;
        for r in 0..x.rows() {
            for i in 0..x.cols() {
                let mut xp = x.clone();
                xp[(r, i)] += h;
                let mut xm = x.clone();
                xm[(r, i)] -= h;
                let (fp, fm) = (mlp.forward(&xp).unwrap(), mlp.forward(&xm).unwrap());
                for (j, jj) in jac.iter().enumerate() {
                    let fd = (fp[(r, j)] - fm[(r, j)]) / (2.0 * h);
                    prop_assert!((fd - jj[(r, i)]).abs() <= 1e-6 * fd.abs().max(1.0));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_adam_step_moves_by_lr_times_sign(grads in prop::collection::vec(-10.0f64..10.0, 1..12), lr in 1e-4f64..1e-1) {
        let n = grads.len();
        let mut p = Tensor::zeros(1, n);
        let g = Tensor::from_vec(1, n, grads.clone()).unwrap();
        let mut adam = AdamState::new(AdamConfig::with_lr(lr), &[&p]);
        adam.step(&mut [&mut p], &[g], &["w".to_string()]).unwrap();
        for (w, gi) in p.as_slice().iter().zip(&grads) {
            // bias correction makes m̂ = g and v̂ = g², so the step is lr·g/(|g| + ε)
            let expected = -lr * gi / (gi.abs() + 1e-8);
            prop_assert!((w - expected).abs() <= 1e-12 * lr.max(1.0) + 1e-15);
        }
    }

    #[test]
    fn path_metrics_are_symmetric_and_ordered(a in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20),
                                              b in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..20)) {
        let a: Vec<[f64; 2]> = a.into_iter().map(|(x, y)| [x, y]).collect();
        let b: Vec<[f64; 2]> = b.into_iter().map(|(x, y)| [x, y]).collect();
        let ab = path_metrics(&a, &b).unwrap();
        let ba = path_metrics(&b, &a).unwrap();
        prop_assert!((ab.chamfer - ba.chamfer).abs() < 1e-12);
        prop_assert!((ab.hausdorff - ba.hausdorff).abs() < 1e-12);
        prop_assert!(ab.chamfer >= 0.0 && ab.chamfer <= ab.hausdorff + 1e-12);
        prop_assert!(ab.p95 <= ab.hausdorff + 1e-12);
        let aa = path_metrics(&a, &a).unwrap();
        prop_assert!(aa.hausdorff < 1e-12);
    }

    #[test]
    fn resampling_keeps_endpoints(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..15), n in 2usize..50) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        prop_assume!(pts.windows(2).all(|w| w[0] != w[1]));
        let p = Path::new(pts).unwrap();
        let r = p.resample(n);
        prop_assert_eq!(r.len(), n);
        prop_assert_eq!(r.first(), p.first());
        prop_assert!((r.last()[0] - p.last()[0]).abs() < 1e-9 && (r.last()[1] - p.last()[1]).abs() < 1e-9);
        prop_assert!(r.length() <= p.length() + 1e-9);
    }

    #[test]
    fn bilinear_interpolation_is_exact_on_bilinear_fields(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0,
                                                          x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let grid = Grid::square(-2.0, 2.0, 9).unwrap();
        let f = |p: [f64; 2]| a + b * p[0] + c * p[1] + d * p[0] * p[1];
        let field = GridField::from_fn(grid, f);
        prop_assert!((field.interpolate([x, y]) - f([x, y])).abs() < 1e-10);
    }

    #[test]
    fn ks_statistic_and_p_value_are_in_range(xs in prop::collection::vec(0.0f64..1.0, 1..100)) {
        let (d, p) = ks_uniform(&xs);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kl_entropy_scaling_law(a in 0.05f64..20.0, d in 1usize..4, seed in 0u64..1000) {
        let u = random_tensor(2000, d, seed);
        let h = kl_entropy(&u, 5).unwrap();
        let ha = kl_entropy(&u.map(|v| a * v), 5).unwrap();
        prop_assert!((ha - h - d as f64 * a.ln()).abs() < 0.05);
    }

    #[test]
    fn hsic_is_nonnegative_and_symmetric(seed in 0u64..1000, n in 20usize..60) {
        let a = random_tensor(n, 2, seed);
        let b = random_tensor(n, 1, seed + 7).map(|v| v.abs());
        let ab = hsic(&a, &b).unwrap();
        prop_assert!(ab >= -1e-15);
        prop_assert!((ab - hsic(&b, &a).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn absolute_cosines_lie_in_unit_interval(seed in 0u64..1000) {
        let model = DpaModel::new(DpaConfig { hidden: 8, latent_dim: 2, ..DpaConfig::default() }, 2, seed).unwrap();
        let cfg = AlignmentConfig { grid: Grid::square(-4.0, 4.0, 24).unwrap(), ..AlignmentConfig::default() };
        let report = score_alignment(&model, &StandardNormal { dim: 2 }, &cfg).unwrap();
        prop_assert!(!report.records.is_empty());
        for r in &report.records {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.cos_abs));
        }
        for s in &report.summaries {
            prop_assert!((0.0..=1.0).contains(&s.mean) && (0.0..=1.0).contains(&s.p95));
        }
    }
}
