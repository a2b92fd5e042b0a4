use ensemblefuse::losses::{compute_prevalence, LossConfig};
use ensemblefuse::metrics::evaluate;
use ensemblefuse::synthlab::{
    generate, simulate_models, split, train_toy, Optimizer, SplitFractions, SynthConfig,
    ToyTrainConfig, CHEST_XRAY_PREVALENCES,
};

fn small(n: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_samples: n,
        class_names: vec!["a".into(), "b".into(), "c".into()],
        prevalences: vec![0.4, 0.2, 0.1],
        n_features: 6,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn default_prevalences_give_exact_positive_counts() {
    let cfg = SynthConfig {
        n_samples: 20_000,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    let labels = &data.labels;
    assert_eq!(labels.n_classes(), 14);
    for (j, (name, rho)) in CHEST_XRAY_PREVALENCES.iter().enumerate() {
        let positives: usize = labels.column(j).iter().map(|&y| y as usize).sum();
        assert_eq!(positives, (20_000.0 * rho).round() as usize, "{name}");
        if *name == "Hernia" {
            assert_eq!(positives, 88);
        }
    }
}

#[test]
fn small_counts_warn() {
    let cfg = SynthConfig {
        n_samples: 200,
        ..SynthConfig::default()
    };
    let data = generate(&cfg).unwrap();
    assert!(!data.warnings.is_empty());
    let quiet = generate(&small(500, 1)).unwrap();
    assert!(quiet.warnings.is_empty());
}

#[test]
fn model_noise_controls_auc() {
    let base = SynthConfig {
        n_samples: 5000,
        model_noise: vec![0.0, 50.0],
        ..SynthConfig::default()
    };
    let data = generate(&base).unwrap();
    let models = simulate_models(&data, &base).unwrap();
    let clean = evaluate(&models[0], &data.labels).unwrap();
    assert_eq!(clean.mean, 1.0);
    let noisy = evaluate(&models[1], &data.labels).unwrap().mean;
    assert!(noisy > 0.4 && noisy < 0.6, "{noisy}");
}

#[test]
fn generation_is_deterministic() {
    let cfg = small(300, 17);
    let a = generate(&cfg).unwrap();
    let b = generate(&cfg).unwrap();
    assert_eq!(a.features, b.features);
    assert_eq!(a.labels, b.labels);
    assert_eq!(
        simulate_models(&a, &cfg).unwrap(),
        simulate_models(&b, &cfg).unwrap()
    );
    let other = generate(&small(300, 18)).unwrap();
    assert_ne!(a.features, other.features);
}

#[test]
fn split_sizes_and_coverage() {
    let s = split(1000, &SplitFractions::default(), 3).unwrap();
    assert_eq!((s.train.len(), s.test.len(), s.val.len()), (700, 200, 100));
    let mut all: Vec<usize> = s
        .train
        .iter()
        .chain(&s.test)
        .chain(&s.val)
        .copied()
        .collect();
    all.sort_unstable();
    assert_eq!(all, (0..1000).collect::<Vec<_>>());
    assert_eq!(s, split(1000, &SplitFractions::default(), 3).unwrap());

    let s = split(10, &SplitFractions::default(), 0).unwrap();
    assert_eq!((s.train.len(), s.test.len(), s.val.len()), (7, 2, 1));
    assert!(split(3, &SplitFractions::default(), 0).is_err());
}

fn gd_config() -> ToyTrainConfig {
    ToyTrainConfig {
        optimizer: Optimizer::GradientDescent,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        batch_size: usize::MAX,
        max_epochs: 50,
        patience: 1000,
        ..ToyTrainConfig::default()
    }
}

#[test]
fn full_batch_descent_never_increases_loss() {
    let data = generate(&small(800, 4)).unwrap();
    for loss in [LossConfig::default(), LossConfig::bce()] {
        let out = train_toy(&data.features, &data.labels, &loss, &gd_config()).unwrap();
        assert_eq!(out.history.len(), 50);
        for w in out.history.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss + 1e-9, "{:?}", w);
        }
    }
}

#[test]
fn early_stopping_follows_patience() {
    let data = generate(&small(600, 8)).unwrap();
    let mut stopped = 0;
    for patience in [1, 3, 7] {
        let cfg = ToyTrainConfig {
            patience,
            max_epochs: 200,
            learning_rate: 0.05,
            ..ToyTrainConfig::default()
        };
        let out = train_toy(&data.features, &data.labels, &LossConfig::default(), &cfg).unwrap();
        // replay the rule over the recorded history
        let mut best = f64::NEG_INFINITY;
        let mut best_epoch = 0;
        let mut since = 0;
        let mut stop = None;
        for r in &out.history {
            if r.val_mean_auc > best {
                best = r.val_mean_auc;
                best_epoch = r.epoch;
                since = 0;
            } else {
                since += 1;
                if since >= patience {
                    stop = Some(r.epoch);
                    break;
                }
            }
        }
        assert_eq!(out.best_epoch, best_epoch);
        let last = out.history.last().unwrap().epoch;
        assert_eq!(stop.unwrap_or(cfg.max_epochs), last);
        if stop.is_some() {
            assert_eq!(last, best_epoch + patience);
            stopped += 1;
        }
    }
    assert!(stopped > 0);
}

#[test]
fn prevalence_uses_training_rows_only() {
    let data = generate(&small(500, 2)).unwrap();
    let cfg = ToyTrainConfig {
        max_epochs: 2,
        ..ToyTrainConfig::default()
    };
    let out = train_toy(&data.features, &data.labels, &LossConfig::default(), &cfg).unwrap();
    let train_labels = data.labels.select_rows(&out.split.train).unwrap();
    assert_eq!(out.prevalence, compute_prevalence(&train_labels));
}
