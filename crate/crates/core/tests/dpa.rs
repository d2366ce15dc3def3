use dpa_core::data;
use dpa_core::dpa::{train_dpa, DpaConfig, DpaModel, TrainConfig};
use dpa_core::encoder::Encoder;
use dpa_core::{Error, Tensor};

fn small_config() -> DpaConfig {
    DpaConfig {
        latent_dim: 2,
        hidden: 16,
        depth: 3,
        ..DpaConfig::default()
    }
}

#[test]
fn decode_rejects_too_wide_prefix() {
    let model = DpaModel::new(small_config(), 2, 1).unwrap();
    let z = Tensor::zeros(3, 3);
    assert!(matches!(model.decode(&z, 0), Err(Error::Dimension(_))));
    assert_eq!(model.decode(&Tensor::zeros(3, 2), 0).unwrap().shape(), [3, 2]);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small_config();
    c.beta = 2.5;
    assert!(matches!(DpaModel::new(c, 2, 0), Err(Error::Config(_))));
    let mut c = small_config();
    c.weights = Some(vec![1.0, 1.0]);
    assert!(matches!(DpaModel::new(c, 2, 0), Err(Error::Config(_))));
    let model = DpaModel::new(small_config(), 2, 0).unwrap();
    let data = Tensor::zeros(10, 2);
    let cfg = TrainConfig {
        draws: 1,
        ..TrainConfig::default()
    };
    assert!(matches!(train_dpa(model, &data, &cfg), Err(Error::Config(_))));
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let data = data::standard_normal(2, 400, 3).samples;
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 100,
        lr: 3e-3,
        draws: 2,
        seed: 9,
        lr_final: None,
    };
    let a = train_dpa(DpaModel::new(small_config(), 2, 5).unwrap(), &data, &cfg).unwrap();
    let b = train_dpa(DpaModel::new(small_config(), 2, 5).unwrap(), &data, &cfg).unwrap();
    assert_eq!(a.curves, b.curves);
    assert_eq!(a.model, b.model);
    let first: Vec<f64> = a
        .curves
        .records
        .iter()
        .filter(|r| r.epoch == 0)
        .map(|r| r.loss)
        .collect();
    let last = a.curves.final_losses();
    assert_eq!(last.len(), 3);
    // the full-code term must improve clearly
    assert!(last[2] < first[2], "{first:?} -> {last:?}");
}

#[test]
fn losses_decrease_with_latent_width_after_training() {
    let data = data::standard_normal(2, 1000, 4).samples;
    let cfg = TrainConfig {
        epochs: 60,
        batch_size: 100,
        lr: 3e-3,
        draws: 2,
        seed: 1,
        lr_final: None,
    };
    let out = train_dpa(DpaModel::new(small_config(), 2, 2).unwrap(), &data, &cfg).unwrap();
    let l = out.curves.final_losses();
    assert!(l[0] > l[1] && l[1] > l[2], "{l:?}");
}

#[test]
fn checkpoint_round_trip_preserves_encoding() {
    let data = data::standard_normal(2, 200, 3).samples;
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 50,
        ..TrainConfig::default()
    };
    let model = train_dpa(DpaModel::new(small_config(), 2, 5).unwrap(), &data, &cfg)
        .unwrap()
        .model;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = DpaModel::load(&path).unwrap();
    assert_eq!(model.encode(&data).unwrap(), back.encode(&data).unwrap());
}

#[test]
fn model_jacobian_matches_finite_differences() {
    let model = DpaModel::new(small_config(), 2, 11).unwrap();
    let x = Tensor::from_rows(&[vec![0.3, -0.7], vec![1.2, 0.4]]).unwrap();
    let jac = model.jacobian(&x).unwrap();
    let h = 1e-6;
    for i in 0..2 {
        for d in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[(i, d)] += h;
            xm[(i, d)] -= h;
            let ep = model.encode(&xp).unwrap();
            let em = model.encode(&xm).unwrap();
            for j in 0..2 {
                let fd = (ep[(i, j)] - em[(i, j)]) / (2.0 * h);
                assert!((fd - jac[j][(i, d)]).abs() < 1e-6);
            }
        }
    }
    let g1 = model.component_gradient(&x, 1).unwrap();
    assert_eq!(g1, jac[1]);
}
