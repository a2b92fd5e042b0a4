//! Synthetic long-tail multi-label data, simulated model outputs, seeded
//! splits and a small linear trainer.
//!
//! Labels come from latent class scores thresholded at their empirical
//! quantile, so every class ends up with exactly `round(N * prevalence)`
//! positives. The defaults mirror the 14-pathology chest X-ray prevalence
//! profile, from Infiltration at 38.44% down to Hernia at 0.44%.

mod train;

pub use train::{train_toy, EpochRecord, LinearModel, Optimizer, ToyTrainConfig, TrainOutcome};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_io::{ClassList, FeatureMatrix, LabelMatrix, PredictionMatrix};

/// Chest X-ray pathology names and positive ratios used as default targets.
pub const CHEST_XRAY_PREVALENCES: [(&str, f64); 14] = [
    ("Atelectasis", 0.2233),
    ("Consolidation", 0.0902),
    ("Infiltration", 0.3844),
    ("Pneumothorax", 0.1024),
    ("Edema", 0.0445),
    ("Emphysema", 0.0486),
    ("Fibrosis", 0.0326),
    ("Effusion", 0.2573),
    ("Pneumonia", 0.0276),
    ("Pleural Thickening", 0.0654),
    ("Cardiomegaly", 0.0536),
    ("Nodule", 0.1223),
    ("Mass", 0.1117),
    ("Hernia", 0.0044),
];

// Std-dev of the class-specific noise added to the feature projection.
const LATENT_NOISE: f64 = 1.0;

// Independent random streams carved out of the single config seed.
const STREAM_GENERATE: u64 = 0;
const STREAM_MODELS: u64 = 1;
const STREAM_SPLIT: u64 = 2;
pub(crate) const STREAM_BATCHES: u64 = 3;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub class_names: Vec<String>,
    /// Target positive ratio per class, each in (0, 1).
    pub prevalences: Vec<f64>,
    pub n_features: usize,
    /// Noise std-dev of each simulated model; one entry per model.
    pub model_noise: Vec<f64>,
    /// Correlation between the noise of different simulated models.
    pub model_correlation: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 5000,
            class_names: CHEST_XRAY_PREVALENCES
                .iter()
                .map(|(name, _)| name.to_string())
                .collect(),
            prevalences: CHEST_XRAY_PREVALENCES.iter().map(|(_, p)| *p).collect(),
            n_features: 16,
            model_noise: vec![0.5, 0.8],
            model_correlation: 0.6,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<ClassList> {
        let classes = ClassList::new(self.class_names.iter().cloned())?;
        if self.prevalences.len() != classes.len() {
            return Err(Error::InvalidConfig(format!(
                "{} class names but {} prevalences",
                classes.len(),
                self.prevalences.len()
            )));
        }
        if let Some(p) = self.prevalences.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "prevalence {p} outside (0, 1)"
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be positive".into()));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidConfig("n_features must be positive".into()));
        }
        if self
            .model_noise
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::InvalidConfig(
                "model_noise entries must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.model_correlation) {
            return Err(Error::InvalidConfig(format!(
                "model_correlation {} outside [0, 1]",
                self.model_correlation
            )));
        }
        Ok(classes)
    }

    /// Realized positive count for each class.
    pub fn positive_counts(&self) -> Vec<usize> {
        self.prevalences
            .iter()
            .map(|p| (self.n_samples as f64 * p).round() as usize)
            .collect()
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub features: FeatureMatrix,
    pub labels: LabelMatrix,
    /// Standardized latent class scores, row-major N x C. Labels are the
    /// top `round(N * prevalence)` entries of each column.
    pub oracle_scores: Vec<f64>,
    pub warnings: Vec<String>,
}

fn standard_normals(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    (0..count).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws features and latent scores and thresholds them into labels.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    let classes = cfg.validate()?;
    let (n, d, c) = (cfg.n_samples, cfg.n_features, classes.len());
    let mut rng = seeded_rng(cfg.seed, STREAM_GENERATE);

    let features = standard_normals(&mut rng, n * d);
    let scale = 1.0 / (d as f64).sqrt();
    let loadings: Vec<f64> = standard_normals(&mut rng, d * c)
        .into_iter()
        .map(|x| x * scale)
        .collect();
    let noise = standard_normals(&mut rng, n * c);

    let mut latent = vec![0.0; n * c];
    for i in 0..n {
        let x = &features[i * d..(i + 1) * d];
        for j in 0..c {
            let proj: f64 = x
                .iter()
                .enumerate()
                .map(|(f, xf)| xf * loadings[f * c + j])
                .sum();
            latent[i * c + j] = proj + LATENT_NOISE * noise[i * c + j];
        }
    }
    standardize_columns(&mut latent, c);

    let mut warnings = Vec::new();
    let min_prevalence = cfg
        .prevalences
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if (n as f64) * min_prevalence < 5.0 {
        warnings.push(format!(
            "n_samples * min(prevalence) = {:.3} < 5; tail classes will have very few positives",
            n as f64 * min_prevalence
        ));
    }

    let counts = cfg.positive_counts();
    let mut labels = vec![0u8; n * c];
    for (j, &k) in counts.iter().enumerate() {
        if k == 0 {
            warnings.push(format!(
                "class {:?} rounds to 0 positives at n_samples = {n}",
                classes.names()[j]
            ));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            latent[b * c + j]
                .total_cmp(&latent[a * c + j])
                .then(a.cmp(&b))
        });
        for &i in order.iter().take(k) {
            labels[i * c + j] = 1;
        }
    }

    Ok(SynthData {
        features: FeatureMatrix::from_flat(FeatureMatrix::default_columns(d)?, features)?,
        labels: LabelMatrix::from_flat(classes, labels)?,
        oracle_scores: latent,
        warnings,
    })
}

fn standardize_columns(values: &mut [f64], c: usize) {
    let n = values.len() / c;
    for j in 0..c {
        let mean = values.iter().skip(j).step_by(c).sum::<f64>() / n as f64;
        let var = values
            .iter()
            .skip(j)
            .step_by(c)
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in values.iter_mut().skip(j).step_by(c) {
            *v = (*v - mean) / sd;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Noisy copies of the latent scores, one prediction matrix per entry of
/// `cfg.model_noise`.
///
/// Model `k` scores `sigmoid(z + s_k (sqrt(r) u + sqrt(1 - r) e_k))` where `u`
/// is noise shared by all models, `e_k` is private to model `k` and `r` is
/// `cfg.model_correlation`.
pub fn simulate_models(data: &SynthData, cfg: &SynthConfig) -> Result<Vec<PredictionMatrix>> {
    let classes = data.labels.classes().clone();
    let len = data.oracle_scores.len();
    let mut rng = seeded_rng(cfg.seed, STREAM_MODELS);
    let shared = standard_normals(&mut rng, len);
    let (a, b) = (
        cfg.model_correlation.sqrt(),
        (1.0 - cfg.model_correlation).sqrt(),
    );
    cfg.model_noise
        .iter()
        .map(|&sd| {
            let own = standard_normals(&mut rng, len);
            let values = data
                .oracle_scores
                .iter()
                .zip(&shared)
                .zip(&own)
                .map(|((z, u), e)| sigmoid(z + sd * (a * u + b * e)))
                .collect();
            PredictionMatrix::from_flat(classes.clone(), values)
        })
        .collect()
}

/// Train / test / validation fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub test: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            test: 0.2,
            val: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.val];
        if parts.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

/// Row indices of each partition, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub val: Vec<usize>,
}

/// Seeded shuffle of `0..n` cut into train, test and validation runs.
///
/// Test and validation take `round(n * f)` rows each; train gets the rest.
pub fn split(n: usize, fractions: &SplitFractions, seed: u64) -> Result<SplitIndices> {
    fractions.validate()?;
    let n_test = (n as f64 * fractions.test).round() as usize;
    let n_val = (n as f64 * fractions.val).round() as usize;
    let n_train = n.saturating_sub(n_test + n_val);
    for (size, which) in [(n_train, "train"), (n_test, "test"), (n_val, "validation")] {
        if size == 0 {
            return Err(Error::EmptyPartition { which });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed, STREAM_SPLIT));
    let val = order.split_off(n_train + n_test);
    let test = order.split_off(n_train);
    Ok(SplitIndices {
        train: order,
        test,
        val,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::evaluate;

    fn small(n: usize, prevalences: Vec<f64>) -> SynthConfig {
        SynthConfig {
            n_samples: n,
            class_names: (0..prevalences.len()).map(|i| format!("c{i}")).collect(),
            prevalences,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn uniform_half_prevalence() {
        let data = generate(&small(1000, vec![0.5; 4])).unwrap();
        for j in 0..4 {
            assert_eq!(
                data.labels
                    .column(j)
                    .iter()
                    .map(|&y| y as usize)
                    .sum::<usize>(),
                500
            );
        }
    }

    #[test]
    fn deterministic() {
        let cfg = small(300, vec![0.3, 0.1]);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig {
            seed: 7,
            ..cfg.clone()
        };
        assert_ne!(
            generate(&cfg).unwrap().features,
            generate(&other).unwrap().features
        );
    }

    #[test]
    fn warns_on_tiny_tail() {
        let data = generate(&small(100, vec![0.3, 0.004])).unwrap();
        assert_eq!(data.warnings.len(), 2);
        assert_eq!(data.labels.column(1).iter().filter(|&&y| y == 1).count(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(small(10, vec![0.0]).validate().is_err());
        assert!(small(10, vec![1.0]).validate().is_err());
        let mut cfg = SynthConfig::default();
        cfg.prevalences.pop();
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig {
            model_correlation: 1.5,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noiseless_model_is_perfect() {
        let cfg = SynthConfig {
            model_noise: vec![0.0],
            ..small(400, vec![0.2, 0.05, 0.5])
        };
        let data = generate(&cfg).unwrap();
        let models = simulate_models(&data, &cfg).unwrap();
        let report = evaluate(&models[0], &data.labels).unwrap();
        assert!(report.per_class.iter().all(|v| *v == Some(1.0)));
    }

    #[test]
    fn split_sizes() {
        let s = split(100, &SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.val.len()), (70, 20, 10));
        let s = split(10, &SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.val.len()), (7, 2, 1));
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.test)
            .chain(&s.val)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(s, split(10, &SplitFractions::default(), 1).unwrap());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split(3, &SplitFractions::default(), 0),
            Err(Error::EmptyPartition { .. })
        ));
        let bad = SplitFractions {
            train: 0.7,
            test: 0.2,
            val: 0.2,
        };
        assert!(split(100, &bad, 0).is_err());
    }
}
