//! Perturbation-based faithfulness metrics: deletion curves (pixel flipping)
//! and single-feature ablation. No retraining happens after a deletion.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attrib::{magnitude_ranking, Attribution};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{column_means, Matrix};
use crate::models::{accuracy, accuracy_on, LinearModel};
use crate::scalar::Scalar;

/// How a deleted feature column is overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Replacement {
    /// Column mean of the data being evaluated.
    #[default]
    Mean,
    Zero,
    /// Seeded random permutation of the column.
    Resample {
        seed: u64,
    },
}

impl Replacement {
    pub fn name(&self) -> String {
        match self {
            Replacement::Mean => "mean".into(),
            Replacement::Zero => "zero".into(),
            Replacement::Resample { seed } => format!("resample(seed={seed})"),
        }
    }
}

fn replace_column<T: Scalar>(features: &mut Matrix<T>, j: usize, replacement: Replacement, means: &[T]) {
    match replacement {
        Replacement::Mean => features.fill_column(j, means[j]),
        Replacement::Zero => features.fill_column(j, T::zero()),
        Replacement::Resample { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut col = features.column(j);
            col.shuffle(&mut rng);
            features.set_column(j, &col);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DeletionCurve<T> {
    /// Features in deletion order, most relevant first.
    pub order: Vec<usize>,
    /// Accuracy after 0, 1, .., d deletions.
    pub accuracies: Vec<T>,
    pub replacement: Replacement,
}

impl<T: Scalar> DeletionCurve<T> {
    /// `step,removed_feature,accuracy`; features are 1-based to match `x1..xd`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,removed_feature,accuracy")?;
        for (step, acc) in self.accuracies.iter().enumerate() {
            match step.checked_sub(1).map(|k| self.order[k] + 1) {
                Some(feature) => writeln!(out, "{step},{feature},{acc}")?,
                None => writeln!(out, "{step},,{acc}")?,
            }
        }
        Ok(())
    }
}

/// Deletes features one by one in order of descending attribution magnitude
/// and records the accuracy of the fixed model after each deletion.
pub fn deletion_curve<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    attribution: &Attribution<T>,
    replacement: Replacement,
) -> Result<DeletionCurve<T>> {
    if attribution.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: attribution.dim(),
        });
    }
    let order = magnitude_ranking(&attribution.scores);
    deletion_curve_in_order(model, data, order, replacement)
}

/// Deletion curve for an explicit feature order.
pub fn deletion_curve_in_order<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    order: Vec<usize>,
    replacement: Replacement,
) -> Result<DeletionCurve<T>> {
    let d = data.dim();
    let mut seen = vec![false; d];
    for &j in &order {
        if j >= d || std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(
                "deletion order is not a permutation of the features",
            ));
        }
    }
    if order.len() != d {
        return Err(Error::invalid(
            "deletion order is not a permutation of the features",
        ));
    }
    let means = column_means(data.features());
    let mut features = data.features().clone();
    let mut accuracies = Vec::with_capacity(d + 1);
    accuracies.push(accuracy(model, data)?);
    for &j in &order {
        replace_column(&mut features, j, replacement, &means);
        accuracies.push(accuracy_on(model, &features, data.labels())?);
    }
    Ok(DeletionCurve {
        order,
        accuracies,
        replacement,
    })
}

/// Accuracy lost when only `feature` is replaced.
pub fn ablation_drop<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    feature: usize,
    replacement: Replacement,
) -> Result<T> {
    if feature >= data.dim() {
        return Err(Error::invalid(format!(
            "feature {feature} out of range for d = {}",
            data.dim()
        )));
    }
    let intact = accuracy(model, data)?;
    let means = column_means(data.features());
    let mut features = data.features().clone();
    replace_column(&mut features, feature, replacement, &means);
    Ok(intact - accuracy_on(model, &features, data.labels())?)
}

/// Area over the perturbation curve: mean of `acc[0] − acc[k]` for `k = 1..d`.
pub fn aopc<T: Scalar>(curve: &DeletionCurve<T>) -> T {
    let steps = curve.accuracies.len().saturating_sub(1);
    if steps == 0 {
        return T::zero();
    }
    let first = curve.accuracies[0];
    let total: T = curve.accuracies[1..].iter().map(|&a| first - a).sum();
    total / T::from_count(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrib::Method;
    use crate::datagen::{oracle, sample, GeneratorSpec};

    #[test]
    fn curve_structure_and_csv() {
        let spec = GeneratorSpec::<f64>::reference_a(0.8);
        let ds = sample(&spec, 2000, 1).unwrap();
        let model = oracle(&spec).unwrap().model();
        let attr = Attribution::global(Method::Gradient, model.weights().to_vec());
        let curve = deletion_curve(&model, &ds, &attr, Replacement::Mean).unwrap();
        assert_eq!(curve.order, vec![1, 0]);
        assert_eq!(curve.accuracies.len(), 3);
        assert_eq!(curve.accuracies[0], accuracy(&model, &ds).unwrap());
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step,removed_feature,accuracy");
        assert!(lines[1].starts_with("0,,"));
        assert!(lines[2].starts_with("1,2,"));
        assert!(lines[3].starts_with("2,1,"));
    }

    #[test]
    fn rescaling_scores_keeps_curve() {
        let spec = GeneratorSpec::<f64>::reference_a(0.5);
        let ds = sample(&spec, 1000, 2).unwrap();
        let model = oracle(&spec).unwrap().model();
        let a = Attribution::global(Method::Lime, vec![0.2, -0.9]);
        let b = Attribution::global(Method::Lime, vec![2.0, -9.0]);
        assert_eq!(
            deletion_curve(&model, &ds, &a, Replacement::Zero).unwrap(),
            deletion_curve(&model, &ds, &b, Replacement::Zero).unwrap()
        );
    }

    #[test]
    fn resample_is_deterministic() {
        let spec = GeneratorSpec::<f64>::reference_a(0.8);
        let ds = sample(&spec, 1000, 2).unwrap();
        let model = oracle(&spec).unwrap().model();
        let r = Replacement::Resample { seed: 4 };
        assert_eq!(
            ablation_drop(&model, &ds, 1, r).unwrap(),
            ablation_drop(&model, &ds, 1, r).unwrap()
        );
    }

    #[test]
    fn dimension_checks() {
        let spec = GeneratorSpec::<f64>::reference_a(0.8);
        let ds = sample(&spec, 10, 2).unwrap();
        let model = oracle(&spec).unwrap().model();
        let bad = Attribution::global(Method::Gradient, vec![1.0, 2.0, 3.0]);
        assert!(deletion_curve(&model, &ds, &bad, Replacement::Mean).is_err());
        assert!(ablation_drop(&model, &ds, 2, Replacement::Mean).is_err());
        assert!(deletion_curve_in_order(&model, &ds, vec![0, 0], Replacement::Mean).is_err());
    }

    #[test]
    fn aopc_of_flat_curve_is_zero() {
        let c = DeletionCurve {
            order: vec![0, 1],
            accuracies: vec![0.9, 0.9, 0.9],
            replacement: Replacement::Mean,
        };
        assert_eq!(aopc(&c), 0.0);
        let c = DeletionCurve {
            order: vec![0, 1],
            accuracies: vec![1.0, 0.75, 0.5],
            replacement: Replacement::Mean,
        };
        assert_eq!(aopc(&c), 0.375);
    }

    #[test]
    fn replacement_json() {
        assert_eq!(serde_json::to_string(&Replacement::Mean).unwrap(), "\"mean\"");
        let r: Replacement = serde_json::from_str(r#"{"resample": {"seed": 3}}"#).unwrap();
        assert_eq!(r, Replacement::Resample { seed: 3 });
    }
}
