//! Imbalance-aware multi-label losses with analytic gradients.
//!
//! Three losses are provided, all reduced as a mean over samples of a sum
//! over classes:
//!
//! * weighted binary cross-entropy, `-w (y ln p + (1-y) ln(1-p))`;
//! * asymmetric focal loss, `-((1-p)^g+ y ln p + pm^g- (1-y) ln(1-pm))`
//!   with the shifted probability `pm = max(p - m, 0)`;
//! * the combined loss, the asymmetric loss scaled by the class weight.
//!
//! The class weight is `e^(1-rho)` for a positive entry and `e^rho` for a
//! negative one, where `rho` is the class's positive ratio. Probabilities
//! are clamped to `[eps, 1-eps]` before every logarithm, so exact 0 and 1
//! inputs are legal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{check_classes, LabelMatrix, PredictionMatrix};

/// Per-class positive ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrevalence {
    pub rho: Vec<f64>,
}

impl ClassPrevalence {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Focusing exponent on positive entries.
    pub gamma_pos: f64,
    /// Focusing exponent on negative entries.
    pub gamma_neg: f64,
    /// Probability shift applied to negative entries.
    pub margin: f64,
    pub use_class_weights: bool,
    pub prob_clamp_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma_pos: 1.0,
            gamma_neg: 4.0,
            margin: 0.05,
            use_class_weights: true,
            prob_clamp_epsilon: 1e-7,
        }
    }
}

impl LossConfig {
    /// Plain binary cross-entropy: no focusing, no margin, no class weights.
    pub fn bce() -> Self {
        Self {
            gamma_pos: 0.0,
            gamma_neg: 0.0,
            margin: 0.0,
            use_class_weights: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_pos.is_finite() && self.gamma_pos >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma_pos must be a nonnegative number, got {}",
                self.gamma_pos
            )));
        }
        if !(self.gamma_neg.is_finite() && self.gamma_neg >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma_neg must be a nonnegative number, got {}",
                self.gamma_neg
            )));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(Error::InvalidConfig(format!(
                "margin must lie in [0, 1), got {}",
                self.margin
            )));
        }
        if !(self.prob_clamp_epsilon > 0.0 && self.prob_clamp_epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "prob_clamp_epsilon must lie in (0, 0.5), got {}",
                self.prob_clamp_epsilon
            )));
        }
        Ok(())
    }
}

/// Exact per-class mean of each binary label column.
pub fn compute_prevalence(labels: &LabelMatrix) -> ClassPrevalence {
    let c = labels.n_classes();
    let mut counts = vec![0usize; c];
    for row in labels.values().chunks(c) {
        for (count, &y) in counts.iter_mut().zip(row) {
            *count += y as usize;
        }
    }
    let n = labels.n_samples() as f64;
    ClassPrevalence {
        rho: counts.into_iter().map(|k| k as f64 / n).collect(),
    }
}

/// `e^(1-rho)` for a positive entry, `e^rho` for a negative one.
pub fn sample_class_weight(y: u8, rho: f64) -> f64 {
    if y == 1 {
        (1.0 - rho).exp()
    } else {
        rho.exp()
    }
}

// Unweighted per-entry loss and its derivative in p, before the 1/N reduction.
#[derive(Debug, Clone, Copy)]
struct Entry {
    gamma_pos: f64,
    gamma_neg: f64,
    margin: f64,
    eps: f64,
}

impl Entry {
    fn from_config(cfg: &LossConfig) -> Self {
        Self {
            gamma_pos: cfg.gamma_pos,
            gamma_neg: cfg.gamma_neg,
            margin: cfg.margin,
            eps: cfg.prob_clamp_epsilon,
        }
    }

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.eps, 1.0 - self.eps)
    }

    fn loss(&self, p: f64, y: u8) -> f64 {
        let p = self.clamp(p);
        if y == 1 {
            -(1.0 - p).powf(self.gamma_pos) * p.ln()
        } else {
            let pm = (p - self.margin).max(0.0);
            // 0^0 == 1 under powf, which keeps the gamma_neg = 0 case equal to BCE.
            -pm.powf(self.gamma_neg) * (1.0 - pm).ln()
        }
    }

    fn grad(&self, p: f64, y: u8) -> f64 {
        if p < self.eps || p > 1.0 - self.eps {
            return 0.0;
        }
        if y == 1 {
            let q = 1.0 - p;
            let focus = q.powf(self.gamma_pos);
            let dfocus = if self.gamma_pos == 0.0 {
                0.0
            } else {
                -self.gamma_pos * q.powf(self.gamma_pos - 1.0)
            };
            -(dfocus * p.ln() + focus / p)
        } else {
            let pm = p - self.margin;
            if pm <= 0.0 {
                return 0.0;
            }
            let focus = pm.powf(self.gamma_neg);
            let dfocus = if self.gamma_neg == 0.0 {
                0.0
            } else {
                self.gamma_neg * pm.powf(self.gamma_neg - 1.0)
            };
            -(dfocus * (1.0 - pm).ln() - focus / (1.0 - pm))
        }
    }
}

fn check_shapes(preds: &PredictionMatrix, labels: &LabelMatrix) -> Result<()> {
    if preds.n_samples() != labels.n_samples() || preds.n_classes() != labels.n_classes() {
        return Err(Error::Shape {
            expected_rows: labels.n_samples(),
            expected_cols: labels.n_classes(),
            found_rows: preds.n_samples(),
            found_cols: preds.n_classes(),
        });
    }
    check_classes(1, labels.classes(), preds.classes())
}

fn check_prevalence(prevalence: &ClassPrevalence, c: usize) -> Result<()> {
    if prevalence.len() != c {
        return Err(Error::Shape {
            expected_rows: 1,
            expected_cols: c,
            found_rows: 1,
            found_cols: prevalence.len(),
        });
    }
    Ok(())
}

/// Row-major loss kernel shared with the trainer. Sums in fixed row order.
pub(crate) fn combined_loss_raw(
    probs: &[f64],
    labels: &[u8],
    c: usize,
    rho: Option<&[f64]>,
    cfg: &LossConfig,
) -> f64 {
    let entry = Entry::from_config(cfg);
    let n = probs.len() / c;
    let mut total = 0.0;
    for (prow, yrow) in probs.chunks(c).zip(labels.chunks(c)) {
        let mut row_sum = 0.0;
        for j in 0..c {
            let w = rho.map_or(1.0, |r| sample_class_weight(yrow[j], r[j]));
            row_sum += w * entry.loss(prow[j], yrow[j]);
        }
        total += row_sum;
    }
    total / n as f64
}

pub(crate) fn combined_loss_grad_raw(
    probs: &[f64],
    labels: &[u8],
    c: usize,
    rho: Option<&[f64]>,
    cfg: &LossConfig,
) -> Vec<f64> {
    let entry = Entry::from_config(cfg);
    let inv_n = 1.0 / (probs.len() / c) as f64;
    probs
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(idx, (&p, &y))| {
            let w = rho.map_or(1.0, |r| sample_class_weight(y, r[idx % c]));
            w * entry.grad(p, y) * inv_n
        })
        .collect()
}

fn weights_for<'a>(prevalence: &'a ClassPrevalence, cfg: &LossConfig) -> Option<&'a [f64]> {
    cfg.use_class_weights.then_some(prevalence.rho.as_slice())
}

/// Weighted binary cross-entropy. Only `use_class_weights` and
/// `prob_clamp_epsilon` are read from `cfg`.
pub fn wbce_loss(
    preds: &PredictionMatrix,
    labels: &LabelMatrix,
    prevalence: &ClassPrevalence,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(preds, labels)?;
    check_prevalence(prevalence, labels.n_classes())?;
    let bce = LossConfig {
        gamma_pos: 0.0,
        gamma_neg: 0.0,
        margin: 0.0,
        ..*cfg
    };
    Ok(combined_loss_raw(
        preds.values(),
        labels.values(),
        labels.n_classes(),
        weights_for(prevalence, cfg),
        &bce,
    ))
}

/// Unweighted asymmetric loss; `use_class_weights` is ignored.
pub fn asl_loss(preds: &PredictionMatrix, labels: &LabelMatrix, cfg: &LossConfig) -> Result<f64> {
    check_shapes(preds, labels)?;
    cfg.validate()?;
    Ok(combined_loss_raw(
        preds.values(),
        labels.values(),
        labels.n_classes(),
        None,
        cfg,
    ))
}

/// Class-weighted asymmetric loss (weights skipped when `use_class_weights` is off).
pub fn combined_loss(
    preds: &PredictionMatrix,
    labels: &LabelMatrix,
    prevalence: &ClassPrevalence,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(preds, labels)?;
    check_prevalence(prevalence, labels.n_classes())?;
    cfg.validate()?;
    Ok(combined_loss_raw(
        preds.values(),
        labels.values(),
        labels.n_classes(),
        weights_for(prevalence, cfg),
        cfg,
    ))
}

/// Derivative of [`combined_loss`] with respect to each probability, row-major N x C.
///
/// Entries outside `[eps, 1-eps]` get 0 (the clamp is flat there), as do
/// negative entries with `p <= margin`.
pub fn combined_loss_grad(
    preds: &PredictionMatrix,
    labels: &LabelMatrix,
    prevalence: &ClassPrevalence,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    check_shapes(preds, labels)?;
    check_prevalence(prevalence, labels.n_classes())?;
    cfg.validate()?;
    Ok(combined_loss_grad_raw(
        preds.values(),
        labels.values(),
        labels.n_classes(),
        weights_for(prevalence, cfg),
        cfg,
    ))
}
