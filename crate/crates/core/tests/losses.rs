mod common;

use common::oracles::{central_difference, reference_bce, reference_bce_grad, relative_error};
use ensemblefuse::losses::{
    asl_loss, combined_loss, combined_loss_grad, compute_prevalence, sample_class_weight,
    wbce_loss, ClassPrevalence, LossConfig,
};
use ensemblefuse::model_io::{ClassList, LabelMatrix, PredictionMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn classes(c: usize) -> ClassList {
    ClassList::new((0..c).map(|i| format!("c{i}"))).unwrap()
}

struct Instance {
    preds: PredictionMatrix,
    labels: LabelMatrix,
    prevalence: ClassPrevalence,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..20);
    let c = rng.random_range(1..6);
    let probs: Vec<f64> = (0..n * c)
        .map(|_| match rng.random_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random::<f64>(),
        })
        .collect();
    let labels: Vec<u8> = (0..n * c).map(|_| rng.random_range(0..2)).collect();
    let labels = LabelMatrix::from_flat(classes(c), labels).unwrap();
    Instance {
        preds: PredictionMatrix::from_flat(classes(c), probs).unwrap(),
        prevalence: compute_prevalence(&labels),
        labels,
    }
}

fn single(p: f64, y: u8) -> (PredictionMatrix, LabelMatrix) {
    (
        PredictionMatrix::from_flat(classes(1), vec![p]).unwrap(),
        LabelMatrix::from_flat(classes(1), vec![y]).unwrap(),
    )
}

#[test]
fn combined_reduces_to_wbce_and_bce() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let zero = LossConfig {
        gamma_pos: 0.0,
        gamma_neg: 0.0,
        margin: 0.0,
        ..LossConfig::default()
    };
    let unweighted = LossConfig {
        use_class_weights: false,
        ..zero
    };
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let combined = combined_loss(&inst.preds, &inst.labels, &inst.prevalence, &zero).unwrap();
        let wbce = wbce_loss(&inst.preds, &inst.labels, &inst.prevalence, &zero).unwrap();
        assert!((combined - wbce).abs() <= 1e-12, "{combined} vs {wbce}");

        let bce = reference_bce(
            inst.preds.values(),
            inst.labels.values(),
            inst.labels.n_classes(),
            1e-7,
        );
        let plain = wbce_loss(&inst.preds, &inst.labels, &inst.prevalence, &unweighted).unwrap();
        let asl = asl_loss(&inst.preds, &inst.labels, &zero).unwrap();
        let comb_plain =
            combined_loss(&inst.preds, &inst.labels, &inst.prevalence, &unweighted).unwrap();
        for v in [plain, asl, comb_plain] {
            assert!((v - bce).abs() <= 1e-12, "{v} vs oracle {bce}");
        }
    }
}

#[test]
fn bce_gradient_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (n, c) = (rng.random_range(1..8), rng.random_range(1..5));
        let probs: Vec<f64> = (0..n * c).map(|_| rng.random_range(0.01..0.99)).collect();
        let labels: Vec<u8> = (0..n * c).map(|_| rng.random_range(0..2)).collect();
        let preds = PredictionMatrix::from_flat(classes(c), probs.clone()).unwrap();
        let labels_m = LabelMatrix::from_flat(classes(c), labels.clone()).unwrap();
        let rho = compute_prevalence(&labels_m);
        let g = combined_loss_grad(&preds, &labels_m, &rho, &LossConfig::bce()).unwrap();
        let oracle = reference_bce_grad(&probs, &labels, c);
        for (a, b) in g.iter().zip(&oracle) {
            assert!(relative_error(*a, *b) < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn gradient_matches_finite_differences_in_a_matrix() {
    // Multi-entry check of the row/column layout and the 1/N factor.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = LossConfig::default();
    let (n, c) = (4, 3);
    let mut probs: Vec<f64> = (0..n * c).map(|_| rng.random_range(0.1..0.9)).collect();
    for p in &mut probs {
        if (*p - cfg.margin).abs() < 1e-3 {
            *p += 0.01;
        }
    }
    let labels =
        LabelMatrix::from_flat(classes(c), vec![1, 0, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1]).unwrap();
    let rho = compute_prevalence(&labels);
    let preds = PredictionMatrix::from_flat(classes(c), probs.clone()).unwrap();
    let grad = combined_loss_grad(&preds, &labels, &rho, &cfg).unwrap();
    for idx in 0..n * c {
        let loss_at = |x: f64| {
            let mut v = probs.clone();
            v[idx] = x;
            let m = PredictionMatrix::from_flat(classes(c), v).unwrap();
            combined_loss(&m, &labels, &rho, &cfg).unwrap()
        };
        let numeric = central_difference(loss_at, probs[idx], 1e-6);
        assert!(
            (grad[idx] - numeric).abs() < 1e-8,
            "entry {idx}: {} vs {numeric}",
            grad[idx]
        );
    }
}

#[test]
fn weight_examples() {
    assert_eq!(sample_class_weight(1, 1.0), 1.0);
    assert_eq!(sample_class_weight(0, 0.0), 1.0);
    assert!((sample_class_weight(1, 0.0044) - 2.706_347_662_831_986).abs() < 1e-14);
    assert!(sample_class_weight(1, 0.0044) > sample_class_weight(1, 0.3844));
}

#[test]
fn positive_loss_strictly_decreasing_and_negative_flat_below_margin() {
    let cfg = LossConfig::default();
    let rho = ClassPrevalence { rho: vec![0.1] };
    let loss = |p: f64, y: u8| {
        let (pm, ym) = single(p, y);
        combined_loss(&pm, &ym, &rho, &cfg).unwrap()
    };
    let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    for w in grid.windows(2) {
        assert!(
            loss(w[1], 1) < loss(w[0], 1),
            "positive not decreasing at {}",
            w[0]
        );
        assert!(
            loss(w[1], 0) >= loss(w[0], 0),
            "negative decreasing at {}",
            w[0]
        );
    }
    for p in [1e-9, 0.01, 0.03, 0.049, 0.05] {
        assert_eq!(loss(p, 0), 0.0);
        let (pm, ym) = single(p, 0);
        assert_eq!(combined_loss_grad(&pm, &ym, &rho, &cfg).unwrap(), [0.0]);
    }
}

#[test]
fn prevalence_example() {
    let labels = LabelMatrix::from_flat(classes(2), vec![1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
    assert_eq!(compute_prevalence(&labels).rho, [0.25, 0.0]);
}

proptest! {
    #[test]
    fn losses_are_nonnegative(
        entries in prop::collection::vec((0.0f64..=1.0, 0u8..2), 1..60),
        gamma_pos in 0.0f64..5.0,
        gamma_neg in 0.0f64..5.0,
        margin in 0.0f64..0.5,
        rho in 0.0f64..=1.0,
    ) {
        let probs: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let labels: Vec<u8> = entries.iter().map(|e| e.1).collect();
        let n = probs.len();
        let preds = PredictionMatrix::from_flat(classes(1), probs).unwrap();
        let labels = LabelMatrix::from_flat(classes(1), labels).unwrap();
        let prevalence = ClassPrevalence { rho: vec![rho] };
        let cfg = LossConfig { gamma_pos, gamma_neg, margin, ..LossConfig::default() };
        prop_assert!(wbce_loss(&preds, &labels, &prevalence, &cfg).unwrap() >= 0.0);
        prop_assert!(asl_loss(&preds, &labels, &cfg).unwrap() >= 0.0);
        prop_assert!(combined_loss(&preds, &labels, &prevalence, &cfg).unwrap() >= 0.0);
        prop_assert_eq!(combined_loss_grad(&preds, &labels, &prevalence, &cfg).unwrap().len(), n);
    }

    #[test]
    fn positive_weight_decreases_with_prevalence(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assume!(a < b);
        prop_assert!(sample_class_weight(1, a) > sample_class_weight(1, b));
    }
}
