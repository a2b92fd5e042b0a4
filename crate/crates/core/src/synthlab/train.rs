use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, sigmoid, split, SplitFractions, SplitIndices, STREAM_BATCHES};
use crate::error::{Error, Result};
use crate::losses::{
    combined_loss_grad_raw, combined_loss_raw, compute_prevalence, ClassPrevalence, LossConfig,
};
use crate::metrics::evaluate;
use crate::model_io::{ClassList, FeatureMatrix, LabelMatrix, PredictionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Adaptive moments with decoupled weight decay.
    AdamW,
    /// `theta -= lr * (grad + weight_decay * theta)`.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Mini-batch size; anything at least the training size means full batch.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub split: SplitFractions,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::AdamW,
            learning_rate: 1e-2,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            split: SplitFractions::default(),
            seed: 42,
        }
    }
}

impl ToyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!(
                "learning_rate must be nonnegative, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad(format!(
                "adam_epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        Ok(())
    }
}

/// `sigmoid(x . weight + bias)` per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub n_features: usize,
    /// Row-major n_features x C.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: &ClassList, n_features: usize) -> Self {
        Self {
            classes: classes.names().to_vec(),
            n_features,
            weight: vec![0.0; n_features * classes.len()],
            bias: vec![0.0; classes.len()],
        }
    }

    fn n_classes(&self) -> usize {
        self.bias.len()
    }

    fn probabilities(&self, features: &FeatureMatrix) -> Vec<f64> {
        let c = self.n_classes();
        let mut out = Vec::with_capacity(features.n_samples() * c);
        for i in 0..features.n_samples() {
            let x = features.row(i);
            for j in 0..c {
                let z: f64 = self.bias[j]
                    + x.iter()
                        .enumerate()
                        .map(|(f, xf)| xf * self.weight[f * c + j])
                        .sum::<f64>();
                out.push(sigmoid(z));
            }
        }
        out
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<PredictionMatrix> {
        if features.n_features() != self.n_features {
            return Err(Error::Shape {
                expected_rows: features.n_samples(),
                expected_cols: self.n_features,
                found_rows: features.n_samples(),
                found_cols: features.n_features(),
            });
        }
        let classes = ClassList::new(self.classes.iter().cloned())?;
        PredictionMatrix::from_flat(classes, self.probabilities(features))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: LinearModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub split: SplitIndices,
    /// Positive ratios of the training partition, as used by the loss.
    pub prevalence: ClassPrevalence,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

fn apply_update(
    params: &mut [f64],
    grad: &[f64],
    decay: f64,
    state: &mut AdamState,
    cfg: &ToyTrainConfig,
) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::GradientDescent => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * (g + decay * *p);
            }
        }
        Optimizer::AdamW => {
            state.step += 1;
            let bc1 = 1.0 - cfg.beta1.powi(state.step);
            let bc2 = 1.0 - cfg.beta2.powi(state.step);
            for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
                state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                *p -= lr * decay * *p;
                *p -= lr * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

/// Fits a [`LinearModel`] by minimizing the combined loss on the training
/// partition, early-stopping on validation mean AUC.
///
/// The data is split with `train_cfg.split` and `train_cfg.seed`; class
/// prevalence is taken from the training rows only. Weight decay applies to
/// the weight matrix, not the bias. Training stops once `patience` epochs
/// pass without a strict improvement in validation mean AUC, and the best
/// epoch's parameters are returned.
pub fn train_toy(
    features: &FeatureMatrix,
    labels: &LabelMatrix,
    loss_cfg: &LossConfig,
    train_cfg: &ToyTrainConfig,
) -> Result<TrainOutcome> {
    loss_cfg.validate()?;
    train_cfg.validate()?;
    if features.n_samples() != labels.n_samples() {
        return Err(Error::SampleCount {
            input: 1,
            expected: labels.n_samples(),
            found: features.n_samples(),
        });
    }
    let split = split(labels.n_samples(), &train_cfg.split, train_cfg.seed)?;
    let x_train = features.select_rows(&split.train)?;
    let y_train = labels.select_rows(&split.train)?;
    let x_val = features.select_rows(&split.val)?;
    let y_val = labels.select_rows(&split.val)?;

    let prevalence = compute_prevalence(&y_train);
    let rho = loss_cfg
        .use_class_weights
        .then_some(prevalence.rho.as_slice());
    let (d, c) = (features.n_features(), labels.n_classes());

    let mut model = LinearModel::zeros(labels.classes(), d);
    let mut best_model = model.clone();
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();

    let mut weight_state = AdamState::new(d * c);
    let mut bias_state = AdamState::new(c);
    let mut rng = seeded_rng(train_cfg.seed, STREAM_BATCHES);
    let mut order: Vec<usize> = (0..x_train.n_samples()).collect();

    for epoch in 1..=train_cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(train_cfg.batch_size) {
            let xb = x_train.select_rows(batch)?;
            let yb = y_train.select_rows(batch)?;
            let probs = model.probabilities(&xb);
            let dp = combined_loss_grad_raw(&probs, yb.values(), c, rho, loss_cfg);

            // chain through the sigmoid: dL/dz = dL/dp * p (1 - p)
            let dz: Vec<f64> = dp
                .iter()
                .zip(&probs)
                .map(|(g, p)| g * p * (1.0 - p))
                .collect();
            let mut grad_w = vec![0.0; d * c];
            let mut grad_b = vec![0.0; c];
            for (r, dz_row) in dz.chunks(c).enumerate() {
                let x = xb.row(r);
                for (f, xf) in x.iter().enumerate() {
                    for j in 0..c {
                        grad_w[f * c + j] += xf * dz_row[j];
                    }
                }
                for j in 0..c {
                    grad_b[j] += dz_row[j];
                }
            }
            apply_update(
                &mut model.weight,
                &grad_w,
                train_cfg.weight_decay,
                &mut weight_state,
                train_cfg,
            );
            apply_update(&mut model.bias, &grad_b, 0.0, &mut bias_state, train_cfg);
        }

        let train_loss = combined_loss_raw(
            &model.probabilities(&x_train),
            y_train.values(),
            c,
            rho,
            loss_cfg,
        );
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                value: train_loss,
            });
        }
        let val_mean_auc = evaluate(&model.predict(&x_val)?, &y_val)?.mean;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_mean_auc,
        });

        if val_mean_auc > best_auc {
            best_auc = val_mean_auc;
            best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train_cfg.patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        split,
        prevalence,
    })
}
