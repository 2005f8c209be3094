use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numeric::{finite_diff_grad, GradCheckReport};

fn grid(k: usize) -> TimeGrid<f64> {
    TimeGrid::new((1..=k).map(|i| i as f64).collect()).unwrap()
}

fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn tiny_cfg(hidden: usize) -> TrainConfig {
    TrainConfig {
        hidden_sizes: vec![hidden],
        sparsity_enabled: true,
        parallel: false,
        ..TrainConfig::default()
    }
}

fn random_dataset(n: usize, p: usize, t_max: f64, rng: &mut ChaCha8Rng) -> SurvivalDataset<f64> {
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let time: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..t_max)).collect();
    let event: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    SurvivalDataset::new(x, p, time, event, names(p)).unwrap()
}

#[test]
fn closed_gates_give_zero_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut m = DySModel::new(names(3), grid(4), HeadMode::Rps, &tiny_cfg(5), &mut rng).unwrap();
    for e in m.effects_mut() {
        e.gate = Gate::closed(1.0);
    }
    assert_eq!(m.logits(&[0.3, -1.0, 2.0]).unwrap(), vec![0.0; 4]);
    assert!(m.active_features().is_empty());
}

#[test]
fn open_gate_passes_raw_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut m = DySModel::new(names(1), grid(3), HeadMode::Rps, &tiny_cfg(5), &mut rng).unwrap();
    m.main_effects[0].gate = Gate::open(1.0);
    let x = [0.7];
    assert_eq!(m.logits(&x).unwrap(), m.main_effects[0].net.forward(&x).unwrap());
}

#[test]
fn half_open_gates_average_raw_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = DySModel::new(names(2), grid(3), HeadMode::Rps, &tiny_cfg(6), &mut rng).unwrap();
    for e in m.effects_mut() {
        e.gate.mu = 0.0;
    }
    let x = [0.4, -1.3];
    let a = m.main_effects[0].net.forward(&[x[0]]).unwrap();
    let b = m.main_effects[1].net.forward(&[x[1]]).unwrap();
    let got = m.logits(&x).unwrap();
    for k in 0..3 {
        assert!((got[k] - 0.5 * (a[k] + b[k])).abs() < 1e-15);
    }
}

#[test]
fn pmf_and_survival_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..50 {
        let p = 1 + trial % 4;
        let k = 2 + trial % 7;
        let mut m = DySModel::new(names(p), grid(k), HeadMode::Rps, &tiny_cfg(8), &mut rng).unwrap();
        for e in m.effects_mut() {
            e.net.scale(rng.random_range(0.5..20.0));
            e.gate.mu = rng.random_range(-1.0..1.0);
        }
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-5.0..5.0)).collect();
        let pmf = m.predict_pmf(&x).unwrap();
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let s = m.predict_survival(&x).unwrap();
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        assert!(s[k - 1].abs() < 1e-12);
    }
}

#[test]
fn head_mode_mismatch_is_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = DySModel::new(names(2), grid(3), HeadMode::Cox, &tiny_cfg(4), &mut rng).unwrap();
    assert!(matches!(
        m.predict_survival(&[0.0, 0.0]),
        Err(DysError::HeadMode { .. })
    ));
    assert_eq!(m.output_dim(), 1);
    assert!(m.predict_risk(&[0.0, 0.0]).is_ok());
}

#[test]
fn active_features_follow_gate_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut m = DySModel::new(names(3), grid(3), HeadMode::Rps, &tiny_cfg(4), &mut rng).unwrap();
    for (e, mu) in m.main_effects.iter_mut().zip([-1.0, 0.0, 1.0]) {
        e.gate.mu = mu;
    }
    assert_eq!(m.active_features(), vec![1, 2]);
    for e in m.effects_mut() {
        e.gate.mu = -0.5;
    }
    assert!(m.active_features().is_empty());
    assert_eq!(sparsity_loss(&m, 1.0, 1.0), 0.0);
}

#[test]
fn regularizer_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cfg = tiny_cfg(3);
    cfg.sparsity_enabled = false;
    let m = DySModel::new(names(5), grid(3), HeadMode::Rps, &cfg, &mut rng).unwrap();
    assert!((sparsity_loss(&m, 0.1, 1.0) - 0.5).abs() < 1e-15);
    assert_eq!(entropy_loss(&m, 1.0), 0.0);

    let mut m = DySModel::new(names(2), grid(3), HeadMode::Rps, &tiny_cfg(3), &mut rng).unwrap();
    m.add_interactions(&[(0, 1)], &tiny_cfg(3), &mut rng).unwrap();
    m.main_effects[0].gate.mu = 0.0;
    m.main_effects[1].gate.mu = 0.0;
    m.interactions[0].gate = Gate::open(1.0);
    assert!((sparsity_loss(&m, 1.0, 2.0) - 3.0).abs() < 1e-15);

    let mut m = DySModel::new(names(1), grid(3), HeadMode::Rps, &tiny_cfg(3), &mut rng).unwrap();
    m.main_effects[0].gate.mu = 0.0;
    assert!((entropy_loss(&m, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    // s(mu) = 0.25 where -2mu^3 + 1.5mu + 0.25 = 0; solve by bisection
    let (mut lo, mut hi) = (-0.5f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (Gate { mu: mid, gamma: 1.0 }).value() < 0.25 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    m.main_effects[0].gate.mu = 0.5 * (lo + hi);
    let direct = 2.0 * (-0.25 * 0.25f64.ln() - 0.75 * 0.75f64.ln());
    assert!((entropy_loss(&m, 2.0) - direct).abs() < 1e-12);
    assert!((direct - 1.1246).abs() < 1e-4);
}

/// Smallest |pre-activation| of the first layer over every effect and row;
/// finite differences are unreliable if a step can cross a ReLU kink.
fn kink_margin(m: &DySModel<f64>, ds: &SurvivalDataset<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    let mut buf = [0.0; 2];
    for e in m.effects() {
        let layer = &e.net.layers[0];
        for x in ds.rows() {
            let k = e.gather(x, &mut buf);
            for r in 0..layer.out_dim {
                let z: f64 = layer.bias[r] + (0..k).map(|c| layer.weight(r, c) * buf[c]).sum::<f64>();
                margin = margin.min(z.abs());
            }
        }
    }
    margin
}

fn reference_objective(m: &DySModel<f64>, ds: &SurvivalDataset<f64>, cfg: &TrainConfig) -> f64 {
    let data: f64 = (0..ds.n_samples())
        .map(|i| {
            rps_loss(
                &m.predict_survival(ds.row(i)).unwrap(),
                ds.time[i],
                ds.event[i],
                &m.grid,
            )
            .unwrap()
        })
        .sum::<f64>()
        / ds.n_samples() as f64;
    data + sparsity_loss(m, cfg.lambda, cfg.alpha) + entropy_loss(m, cfg.tau)
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = TrainConfig {
        lambda: 0.3,
        alpha: 1.5,
        tau: 0.05,
        ..tiny_cfg(4)
    };
    let mut checked = 0;
    while checked < 5 {
        let ds = random_dataset(6, 2, 3.5, &mut rng);
        let mut m = DySModel::new(names(2), grid(3), HeadMode::Rps, &cfg, &mut rng).unwrap();
        m.add_interactions(&[(0, 1)], &cfg, &mut rng).unwrap();
        for e in m.effects_mut() {
            e.gate.mu = rng.random_range(-0.4..0.4);
        }
        if kink_margin(&m, &ds) < 1e-3 {
            continue;
        }
        let (loss, analytic) = objective_gradient(&m, &ds, &cfg).unwrap();
        assert!((loss - reference_objective(&m, &ds, &cfg)).abs() < 1e-12);
        let params = m.flat_params();
        let mut probe = m.clone();
        let numeric = finite_diff_grad(
            |theta: &[f64]| {
                probe.set_flat_params(theta).unwrap();
                reference_objective(&probe, &ds, &cfg)
            },
            &params,
            1e-6,
        );
        let report = GradCheckReport::compare(&analytic, &numeric, 1e-4);
        assert!(report.max_relative_error <= 1e-5, "{report:?}");
        checked += 1;
    }
}

#[test]
fn cox_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = TrainConfig {
        lambda: 0.1,
        ..tiny_cfg(3)
    };
    let ds = random_dataset(7, 2, 5.0, &mut rng);
    let mut m = DySModel::new(names(2), grid(3), HeadMode::Cox, &cfg, &mut rng).unwrap();
    for e in m.effects_mut() {
        e.gate.mu = rng.random_range(-0.4..0.4);
    }
    assert!(kink_margin(&m, &ds) > 1e-3);
    let (_, analytic) = objective_gradient(&m, &ds, &cfg).unwrap();
    let mut probe = m.clone();
    let numeric = finite_diff_grad(
        |theta: &[f64]| {
            probe.set_flat_params(theta).unwrap();
            mean_cox_loss(&probe, &ds).unwrap()
                + sparsity_loss(&probe, cfg.lambda, cfg.alpha)
                + entropy_loss(&probe, cfg.tau)
        },
        &m.flat_params(),
        1e-6,
    );
    let report = GradCheckReport::compare(&analytic, &numeric, 1e-4);
    assert!(report.max_relative_error <= 1e-5, "{report:?}");
}

#[test]
fn saturated_gates_have_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = TrainConfig {
        lambda: 0.5,
        ..tiny_cfg(4)
    };
    let ds = random_dataset(10, 3, 3.5, &mut rng);
    let mut m = DySModel::new(names(3), grid(3), HeadMode::Rps, &cfg, &mut rng).unwrap();
    for (e, mu) in m.main_effects.iter_mut().zip([-0.5, 0.5, 2.0]) {
        e.gate.mu = mu;
    }
    let (_, g) = objective_gradient(&m, &ds, &cfg).unwrap();
    assert_eq!(&g[g.len() - 3..], &[0.0, 0.0, 0.0]);
}

#[test]
fn pruned_feature_changes_no_prediction_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = tiny_cfg(8);
    let mut m = DySModel::new(names(4), grid(5), HeadMode::Rps, &cfg, &mut rng).unwrap();
    m.add_interactions(&[(0, 1), (1, 3), (2, 3)], &cfg, &mut rng).unwrap();
    m.main_effects[1].gate = Gate::closed(1.0);
    m.interactions[0].gate = Gate::closed(1.0);
    m.interactions[1].gate = Gate { mu: -0.5, gamma: 1.0 };
    for _ in 0..100 {
        let mut x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let before = m.predict_survival(&x).unwrap();
        x[1] = rng.random_range(-1e6..1e6);
        let after = m.predict_survival(&x).unwrap();
        assert!(before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn json_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = tiny_cfg(5);
    let mut m = DySModel::new(names(3), grid(4), HeadMode::Rps, &cfg, &mut rng).unwrap();
    m.add_interactions(&[(0, 2)], &cfg, &mut rng).unwrap();
    m.main_effects[1].gate.mu = 0.1 + 0.2;
    let back = DySModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    assert!(m
        .flat_params()
        .iter()
        .zip(back.flat_params())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.content_hash().unwrap(), m.content_hash().unwrap());
}

#[test]
fn unknown_format_version_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut m = DySModel::new(names(1), grid(2), HeadMode::Rps, &tiny_cfg(2), &mut rng).unwrap();
    m.format_version = 99;
    let json = serde_json::to_string(&m).unwrap();
    assert!(matches!(DySModel::<f64>::from_json(&json), Err(DysError::Schema(_))));
}

#[test]
fn invalid_interactions_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cfg = tiny_cfg(2);
    let mut m = DySModel::new(names(3), grid(2), HeadMode::Rps, &cfg, &mut rng).unwrap();
    assert!(m.add_interactions(&[(1, 1)], &cfg, &mut rng).is_err());
    assert!(m.add_interactions(&[(2, 1)], &cfg, &mut rng).is_err());
    assert!(m.add_interactions(&[(0, 3)], &cfg, &mut rng).is_err());
    m.add_interactions(&[(0, 1)], &cfg, &mut rng).unwrap();
    assert!(m.add_interactions(&[(0, 1)], &cfg, &mut rng).is_err());
}

fn linear_risk_data(n: usize, p: usize, seed: u64) -> SurvivalDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let time: Vec<f64> = (0..n)
        .map(|i| {
            let u: f64 = rng.random_range(1e-9..1.0);
            -u.ln() / (1.5 * x[i * p]).exp()
        })
        .collect();
    SurvivalDataset::new(x, p, time, vec![true; n], names(p)).unwrap()
}

#[test]
fn training_loss_decreases_on_linear_risk() {
    let train_ds = linear_risk_data(400, 1, 15);
    let val_ds = linear_risk_data(100, 1, 16);
    let g = crate::data::build_time_grid(&train_ds, 8).unwrap();
    let cfg = TrainConfig {
        max_epochs: 10,
        patience: 10,
        learning_rate: 1e-3,
        parallel: false,
        ..TrainConfig::default()
    };
    let (_, log) = fit_main_effects(&train_ds, &val_ds, g, HeadMode::Rps, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 10);
    assert!(log.epochs[9].train_loss < log.epochs[0].train_loss);
}

#[test]
fn parallel_and_sequential_training_agree() {
    let train_ds = linear_risk_data(200, 3, 17);
    let val_ds = linear_risk_data(60, 3, 18);
    let g = crate::data::build_time_grid(&train_ds, 5).unwrap();
    let cfg = TrainConfig {
        max_epochs: 3,
        sparsity_enabled: true,
        lambda: 0.01,
        hidden_sizes: vec![6],
        ..TrainConfig::default()
    };
    let (a, _) = fit_one_stage(
        &train_ds,
        &val_ds,
        g.clone(),
        HeadMode::Rps,
        &TrainConfig {
            parallel: true,
            ..cfg.clone()
        },
    )
    .unwrap();
    let (b, _) = fit_one_stage(
        &train_ds,
        &val_ds,
        g,
        HeadMode::Rps,
        &TrainConfig { parallel: false, ..cfg },
    )
    .unwrap();
    assert!(a
        .flat_params()
        .iter()
        .zip(b.flat_params())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn huge_lambda_closes_every_gate() {
    let train_ds = linear_risk_data(300, 3, 19);
    let val_ds = linear_risk_data(100, 3, 20);
    let g = crate::data::build_time_grid(&train_ds, 5).unwrap();
    let cfg = TrainConfig {
        max_epochs: 30,
        patience: 30,
        sparsity_enabled: true,
        lambda: 1e3,
        gate_learning_rate: Some(0.05),
        hidden_sizes: vec![4],
        parallel: false,
        ..TrainConfig::default()
    };
    let (m, log) = fit_main_effects(&train_ds, &val_ds, g, HeadMode::Rps, &cfg).unwrap();
    assert!(m.active_features().is_empty(), "{:?}", log.epochs.last());
    let pmf = m.predict_pmf(&[0.5, -0.2, 0.9]).unwrap();
    assert!(pmf.iter().all(|&v| (v - 0.2).abs() < 1e-15));
}

#[test]
fn stage_two_freezes_mains_and_pairs_active_features() {
    let train_ds = linear_risk_data(200, 4, 21);
    let val_ds = linear_risk_data(60, 4, 22);
    let g = crate::data::build_time_grid(&train_ds, 4).unwrap();
    let cfg = TrainConfig {
        max_epochs: 3,
        hidden_sizes: vec![5],
        sparsity_enabled: true,
        parallel: false,
        ..TrainConfig::default()
    };
    let (mut m, _) = fit_main_effects(&train_ds, &val_ds, g, HeadMode::Rps, &cfg).unwrap();
    m.main_effects[2].gate = Gate::closed(1.0);
    let mains_before = m.main_effects.clone();
    let probe = [0.1, -0.4, 0.7, 0.3];
    let outs_before: Vec<Vec<f64>> = m.main_effects.iter().map(|e| e.raw_output(&probe).unwrap()).collect();

    let (_, pairs, before_cap) = fit_stage_two(&mut m, &train_ds, &val_ds, &cfg).unwrap();
    assert_eq!(pairs, vec![(0, 1), (0, 3), (1, 3)]);
    assert_eq!(before_cap, 3);
    assert_eq!(m.interactions.len(), 3);
    assert!(m.frozen_main);
    assert_eq!(m.main_effects, mains_before);
    let outs_after: Vec<Vec<f64>> = m.main_effects.iter().map(|e| e.raw_output(&probe).unwrap()).collect();
    assert_eq!(outs_before, outs_after);
}

#[test]
fn stage_two_without_active_features_is_error() {
    let train_ds = linear_risk_data(100, 2, 23);
    let g = crate::data::build_time_grid(&train_ds, 3).unwrap();
    let cfg = tiny_cfg(3);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut m = DySModel::new(names(2), g, HeadMode::Rps, &cfg, &mut rng).unwrap();
    for e in m.effects_mut() {
        e.gate = Gate::closed(1.0);
    }
    assert!(matches!(
        fit_stage_two(&mut m, &train_ds, &train_ds, &cfg),
        Err(DysError::NoActiveFeatures { .. })
    ));
}

#[test]
fn interaction_cap_keeps_most_important_pairs() {
    let train_ds = linear_risk_data(120, 4, 25);
    let g = crate::data::build_time_grid(&train_ds, 3).unwrap();
    let cfg = TrainConfig {
        max_epochs: 1,
        max_interactions: 1,
        hidden_sizes: vec![3],
        parallel: false,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut m = DySModel::new(names(4), g, HeadMode::Rps, &cfg, &mut rng).unwrap();
    // features 1 and 3 get the largest outputs
    m.main_effects[1].net.scale(50.0);
    m.main_effects[3].net.scale(20.0);
    let (_, pairs, before_cap) = fit_stage_two(&mut m, &train_ds, &train_ds, &cfg).unwrap();
    assert_eq!(before_cap, 6);
    assert_eq!(pairs, vec![(1, 3)]);
}

#[test]
fn single_precision_model_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let g = TimeGrid::<f32>::new(vec![1.0, 2.0, 3.0]).unwrap();
    let m = DySModel::<f32>::new(names(2), g, HeadMode::Rps, &tiny_cfg(4), &mut rng).unwrap();
    let s = m.predict_survival(&[0.5, -0.5]).unwrap();
    assert_eq!(s.len(), 3);
    assert!(s[2].abs() < 1e-6);
}
