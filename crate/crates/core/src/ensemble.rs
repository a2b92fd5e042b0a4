//! Weighted-average fusion of model predictions, with the weights chosen by
//! differential evolution over the probability simplex.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::model_io::{align, check_classes, LabelMatrix, PredictionMatrix};

const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Nonnegative model weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EnsembleWeights(Vec<f64>);

impl EnsembleWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidWeights(format!(
                "weight {bad} is negative or not finite"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn unit(k: usize, index: usize) -> Self {
        let mut w = vec![0.0; k];
        w[index] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Clips negatives to zero and rescales to unit sum; falls back to the
/// uniform vector when nothing positive remains.
///
/// NaN entries count as zero. If any entry is `+inf`, the mass is split
/// evenly among the infinite entries.
///
/// Panics on an empty input.
pub fn project_to_simplex(v: &[f64]) -> EnsembleWeights {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let k = v.len();
    let infinite = v.iter().filter(|x| **x == f64::INFINITY).count();
    if infinite > 0 {
        let share = 1.0 / infinite as f64;
        return EnsembleWeights(
            v.iter()
                .map(|&x| if x == f64::INFINITY { share } else { 0.0 })
                .collect(),
        );
    }
    let mut clipped: Vec<f64> = v.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let mut sum: f64 = clipped.iter().sum();
    if sum == 0.0 {
        return EnsembleWeights::uniform(k);
    }
    if sum.is_infinite() {
        // finite entries near f64::MAX overflow the sum; rescale first
        let max = clipped.iter().copied().fold(0.0, f64::max);
        clipped.iter_mut().for_each(|x| *x /= max);
        sum = clipped.iter().sum();
    }
    EnsembleWeights(clipped.into_iter().map(|x| x / sum).collect())
}

/// True when `v` is already a simplex point, so projection would not move it
/// beyond rounding.
pub fn is_on_simplex(v: &[f64]) -> bool {
    EnsembleWeights::new(v.to_vec()).is_ok()
}

/// Parses a comma-separated weight list such as `0.6,0.4`.
pub fn parse_weight_list(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|field| {
            let field = field.trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::InvalidWeights(format!("{field:?} is not a finite number")))
        })
        .collect::<Result<_>>()?;
    Ok(values)
}

/// Entry-wise convex combination of aligned prediction matrices.
pub fn fuse(preds: &[PredictionMatrix], weights: &EnsembleWeights) -> Result<PredictionMatrix> {
    let first = preds.first().ok_or(Error::NoPredictions)?;
    if weights.len() != preds.len() {
        return Err(Error::WeightArity {
            expected: preds.len(),
            found: weights.len(),
        });
    }
    for (i, p) in preds.iter().enumerate().skip(1) {
        check_classes(i + 1, first.classes(), p.classes())?;
        if p.n_samples() != first.n_samples() {
            return Err(Error::SampleCount {
                input: i + 1,
                expected: first.n_samples(),
                found: p.n_samples(),
            });
        }
    }
    let mut out = vec![0.0; first.values().len()];
    for (p, &w) in preds.iter().zip(weights.as_slice()) {
        for (acc, &x) in out.iter_mut().zip(p.values()) {
            *acc += w * x;
        }
    }
    // rounding can push a full-weight sum a hair past 1
    for x in &mut out {
        *x = x.clamp(0.0, 1.0);
    }
    PredictionMatrix::from_flat(first.classes().clone(), out)
}

/// Differential evolution settings (strategy rand/1/bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DEConfig {
    pub population_size: usize,
    /// Mutation scale F.
    pub mutation: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub max_generations: usize,
    pub stall_generations: usize,
    pub seed: u64,
}

impl DEConfig {
    /// Defaults for `k` models: population `max(10k, 16)`, F 0.5, CR 0.9,
    /// 200 generations, stop after 30 without improvement.
    pub fn for_models(k: usize, seed: u64) -> Self {
        Self {
            population_size: (10 * k).max(16),
            mutation: 0.5,
            crossover: 0.9,
            max_generations: 200,
            stall_generations: 30,
            seed,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.population_size < 4 || self.population_size < k + 1 {
            return Err(Error::InvalidConfig(format!(
                "population size must be at least max(4, K + 1) = {}, got {}",
                (k + 1).max(4),
                self.population_size
            )));
        }
        if !(self.mutation > 0.0 && self.mutation <= 2.0) {
            return Err(Error::InvalidConfig(format!(
                "mutation factor F must lie in (0, 2], got {}",
                self.mutation
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidConfig(format!(
                "crossover rate CR must lie in [0, 1], got {}",
                self.crossover
            )));
        }
        Ok(())
    }
}

/// Outcome of a simplex search.
#[derive(Debug, Clone, PartialEq)]
pub struct DEResult {
    pub weights: EnsembleWeights,
    /// Best objective value; for [`de_optimize`] the mean AUC of the fused predictions.
    pub objective: f64,
    pub generations_run: usize,
    /// Best objective after each generation.
    pub history: Vec<f64>,
}

impl Serialize for DEResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("weights", &self.weights)?;
        map.serialize_entry("objective", &self.objective)?;
        map.serialize_entry("generations", &self.generations_run)?;
        map.serialize_entry("history", &self.history)?;
        map.end()
    }
}

fn random_simplex_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / sum).collect()
}

struct CachedObjective<F> {
    objective: F,
    cache: HashMap<Vec<u64>, f64>,
}

impl<F: FnMut(&EnsembleWeights) -> Result<f64>> CachedObjective<F> {
    fn eval(&mut self, w: &EnsembleWeights) -> Result<f64> {
        let key: Vec<u64> = w.as_slice().iter().map(|x| x.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = (self.objective)(w)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Maximizes `objective` over the `k`-simplex with DE/rand/1/bin.
///
/// The initial population holds the `k` unit vectors and the uniform
/// vector; the rest is drawn uniformly from the simplex. Trial vectors are
/// projected back onto the simplex and replace their parent when they score
/// at least as well. The search stops after `max_generations`, or once the
/// best value has not improved by more than 1e-12 for `stall_generations`
/// consecutive generations.
pub fn optimize_simplex<F>(k: usize, cfg: &DEConfig, objective: F) -> Result<DEResult>
where
    F: FnMut(&EnsembleWeights) -> Result<f64>,
{
    if k == 0 {
        return Err(Error::InvalidConfig(
            "simplex dimension must be positive".into(),
        ));
    }
    cfg.validate(k)?;
    let mut objective = CachedObjective {
        objective,
        cache: HashMap::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let np = cfg.population_size;

    let mut population: Vec<EnsembleWeights> =
        (0..k).map(|i| EnsembleWeights::unit(k, i)).collect();
    population.push(EnsembleWeights::uniform(k));
    while population.len() < np {
        population.push(project_to_simplex(&random_simplex_point(&mut rng, k)));
    }
    let mut fitness = population
        .iter()
        .map(|w| objective.eval(w))
        .collect::<Result<Vec<f64>>>()?;

    let start = argmax(&fitness);
    let mut best_weights = population[start].clone();
    let mut best = fitness[start];
    let mut history = Vec::new();
    let mut stall = 0;

    for _ in 0..cfg.max_generations {
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let (r1, r2, r3) = distinct_triple(&mut rng, np, i);
            let (a, b, c) = (
                population[r1].as_slice(),
                population[r2].as_slice(),
                population[r3].as_slice(),
            );
            let forced = rng.random_range(0..k);
            let parent = population[i].as_slice();
            let trial: Vec<f64> = (0..k)
                .map(|j| {
                    if j == forced || rng.random::<f64>() < cfg.crossover {
                        a[j] + cfg.mutation * (b[j] - c[j])
                    } else {
                        parent[j]
                    }
                })
                .collect();
            trials.push(project_to_simplex(&trial));
        }

        for (i, trial) in trials.into_iter().enumerate() {
            let f = objective.eval(&trial)?;
            if f >= fitness[i] {
                population[i] = trial;
                fitness[i] = f;
            }
        }

        let gen_best = argmax(&fitness);
        if fitness[gen_best] > best + 1e-12 {
            stall = 0;
        } else {
            stall += 1;
        }
        if fitness[gen_best] > best {
            best = fitness[gen_best];
            best_weights = population[gen_best].clone();
        }
        history.push(best);
        if stall >= cfg.stall_generations {
            break;
        }
    }

    Ok(DEResult {
        weights: best_weights,
        objective: best,
        generations_run: history.len(),
        history,
    })
}

fn distinct_triple(rng: &mut ChaCha8Rng, np: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let r = rng.random_range(0..np);
        if r != exclude && !taken.contains(&r) {
            return r;
        }
    };
    let r1 = pick(&[]);
    let r2 = pick(&[r1]);
    let r3 = pick(&[r1, r2]);
    (r1, r2, r3)
}

/// Searches fusion weights that maximize the mean AUC of the fused
/// predictions against `labels`.
pub fn de_optimize(
    preds: &[PredictionMatrix],
    labels: &LabelMatrix,
    cfg: &DEConfig,
) -> Result<DEResult> {
    if preds.len() < 2 {
        return Err(Error::TooFewModels {
            required: 2,
            found: preds.len(),
        });
    }
    let set = align(preds, labels)?;
    // Which classes have a defined AUC depends on the labels alone.
    evaluate(&set.predictions[0], labels)?;
    optimize_simplex(preds.len(), cfg, |w| {
        Ok(evaluate(&fuse(set.predictions, w)?, labels)?.mean)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::ClassList;

    fn constant(classes: &ClassList, n: usize, v: f64) -> PredictionMatrix {
        PredictionMatrix::from_flat(classes.clone(), vec![v; n * classes.len()]).unwrap()
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_to_simplex(&[0.6, 0.4]).as_slice(), [0.6, 0.4]);
        assert_eq!(project_to_simplex(&[-1.0, -2.0]).as_slice(), [0.5, 0.5]);
        assert_eq!(project_to_simplex(&[2.0, 2.0]).as_slice(), [0.5, 0.5]);
        assert_eq!(
            project_to_simplex(&[3.0, -1.0, 1.0]).as_slice(),
            [0.75, 0.0, 0.25]
        );
        assert_eq!(project_to_simplex(&[f64::NAN, 1.0]).as_slice(), [0.0, 1.0]);
        assert_eq!(
            project_to_simplex(&[f64::INFINITY, 1.0]).as_slice(),
            [1.0, 0.0]
        );
        assert_eq!(
            project_to_simplex(&[1e308, 1e308, 0.0]).as_slice(),
            [0.5, 0.5, 0.0]
        );
    }

    #[test]
    fn weights_validation() {
        assert!(EnsembleWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(EnsembleWeights::new(vec![0.5, 0.6]).is_err());
        assert!(EnsembleWeights::new(vec![1.5, -0.5]).is_err());
        assert!(EnsembleWeights::new(vec![]).is_err());
        assert!(is_on_simplex(&[0.6, 0.4]));
        assert!(!is_on_simplex(&[2.0, 2.0]));
    }

    #[test]
    fn parse_weights() {
        assert_eq!(parse_weight_list("0.6, 0.4").unwrap(), [0.6, 0.4]);
        assert!(parse_weight_list("0.6,x").is_err());
        assert!(parse_weight_list("").is_err());
        assert!(parse_weight_list("nan,1").is_err());
    }

    #[test]
    fn fuse_identity_and_average() {
        let c = ClassList::new(["A", "B"]).unwrap();
        let lo = constant(&c, 3, 0.2);
        let hi = constant(&c, 3, 0.8);
        let preds = [lo.clone(), hi];
        assert_eq!(fuse(&preds, &EnsembleWeights::unit(2, 0)).unwrap(), lo);
        let avg = fuse(&preds, &EnsembleWeights::uniform(2)).unwrap();
        assert!(avg.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn fuse_errors() {
        let c = ClassList::new(["A"]).unwrap();
        let a = constant(&c, 3, 0.2);
        let b = constant(&c, 4, 0.2);
        assert!(matches!(
            fuse(&[a.clone(), b], &EnsembleWeights::uniform(2)),
            Err(Error::SampleCount { .. })
        ));
        assert!(matches!(
            fuse(&[a.clone(), a], &EnsembleWeights::uniform(3)),
            Err(Error::WeightArity {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn config_bounds() {
        let mut cfg = DEConfig::for_models(2, 0);
        assert_eq!(cfg.population_size, 20);
        assert_eq!(DEConfig::for_models(1, 0).population_size, 16);
        cfg.mutation = 0.0;
        assert!(cfg.validate(2).is_err());
        cfg.mutation = 0.5;
        cfg.crossover = 1.5;
        assert!(cfg.validate(2).is_err());
        cfg.crossover = 0.9;
        cfg.population_size = 3;
        assert!(cfg.validate(2).is_err());
    }

    #[test]
    fn de_needs_two_models() {
        let c = ClassList::new(["A"]).unwrap();
        let labels = LabelMatrix::from_rows(c.clone(), &[vec![0], vec![1]]).unwrap();
        let p = constant(&c, 2, 0.5);
        assert!(matches!(
            de_optimize(&[p], &labels, &DEConfig::for_models(1, 0)),
            Err(Error::TooFewModels { .. })
        ));
    }

    #[test]
    fn de_rejects_all_undefined() {
        let c = ClassList::new(["A"]).unwrap();
        let labels = LabelMatrix::from_rows(c.clone(), &[vec![0], vec![0]]).unwrap();
        let p = constant(&c, 2, 0.5);
        assert!(matches!(
            de_optimize(&[p.clone(), p], &labels, &DEConfig::for_models(2, 0)),
            Err(Error::AllClassesUndefined)
        ));
    }

    #[test]
    fn result_json_layout() {
        let r = DEResult {
            weights: EnsembleWeights::uniform(2),
            objective: 0.75,
            generations_run: 1,
            history: vec![0.75],
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"weights":[0.5,0.5],"objective":0.75,"generations":1,"history":[0.75]}"#
        );
    }
}
