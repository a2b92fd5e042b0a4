//! ROC curves and tie-corrected AUC.
//!
//! AUC is computed from the Mann-Whitney rank sum with average ranks for
//! tied scores, so a tied positive/negative pair is credited one half.

use std::io::Write;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model_io::{check_classes, format_f64, ClassList, LabelMatrix, PredictionMatrix};

/// Indices of `scores` in ascending order; equal scores keep input order.
fn ascending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// Tie-corrected area under the ROC curve, or `None` when `labels` has no
/// positives or no negatives.
///
/// Panics if the slices differ in length.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    assert_eq!(
        scores.len(),
        labels.len(),
        "scores and labels differ in length"
    );
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }

    let order = ascending_order(scores);
    // Sum of 1-based average ranks of the positives, kept doubled so it stays an integer.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, average (start + 1 + end) / 2
        let doubled_avg = (start + 1 + end) as u128;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count() as u128;
        doubled_rank_sum += doubled_avg * pos_in_group;
        start = end;
    }

    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Some(doubled_u as f64 / (2.0 * positives as f64 * negatives as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Points ordered from threshold +inf at (0, 0) down to the lowest score at (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
            .sum()
    }

    /// CSV with columns `threshold,fpr,tpr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "threshold,fpr,tpr")?;
        for pt in &self.points {
            writeln!(
                out,
                "{},{},{}",
                format_f64(pt.threshold),
                format_f64(pt.fpr),
                format_f64(pt.tpr)
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// ROC curve with one point per distinct score, highest first.
pub fn roc_curve(scores: &[f64], labels: &[u8], class: &str) -> Result<RocCurve> {
    assert_eq!(
        scores.len(),
        labels.len(),
        "scores and labels differ in length"
    );
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateClass {
            class: class.to_string(),
            positives,
            negatives,
        });
    }

    let mut order = ascending_order(scores);
    order.reverse();
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold,
        });
    }
    Ok(RocCurve { points })
}

/// Per-class AUC plus the unweighted mean over classes where it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    pub classes: ClassList,
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
    pub defined_count: usize,
}

impl AucReport {
    /// Names of classes whose AUC is undefined.
    pub fn undefined(&self) -> Vec<&str> {
        self.classes
            .iter()
            .zip(&self.per_class)
            .filter(|(_, v)| v.is_none())
            .map(|(name, _)| name)
            .collect()
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.classes.position(class).and_then(|j| self.per_class[j])
    }
}

impl Serialize for AucReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct PerClass<'a>(&'a AucReport);
        impl Serialize for PerClass<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.per_class.len()))?;
                for (name, value) in self.0.classes.iter().zip(&self.0.per_class) {
                    map.serialize_entry(name, value)?;
                }
                map.end()
            }
        }

        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("per_class", &PerClass(self))?;
        map.serialize_entry("mean", &self.mean)?;
        map.serialize_entry("defined_count", &self.defined_count)?;
        map.end()
    }
}

/// Column-wise AUC of `preds` against `labels`.
pub fn evaluate(preds: &PredictionMatrix, labels: &LabelMatrix) -> Result<AucReport> {
    check_classes(1, labels.classes(), preds.classes())?;
    if preds.n_samples() != labels.n_samples() {
        return Err(Error::SampleCount {
            input: 1,
            expected: labels.n_samples(),
            found: preds.n_samples(),
        });
    }
    let per_class: Vec<Option<f64>> = (0..labels.n_classes())
        .map(|j| auc(&preds.column(j), &labels.column(j)))
        .collect();
    report_from(labels.classes().clone(), per_class)
}

pub(crate) fn report_from(classes: ClassList, per_class: Vec<Option<f64>>) -> Result<AucReport> {
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::AllClassesUndefined);
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(AucReport {
        classes,
        per_class,
        mean,
        defined_count: defined.len(),
    })
}
