//! Exact Shapley values by enumerating all `2^d` coalitions.

use crate::attrib::{check_point, Attribution, Background, Method};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::LinearModel;
use crate::scalar::Scalar;

pub const MAX_SHAPLEY_FEATURES: usize = 20;

/// How absent features are filled in when valuing a coalition `S`.
#[derive(Debug, Clone, Copy)]
pub enum ValueFunction<'a, T> {
    /// `v(S) = mean_r f(x_S, r_S̄)` over the empirical reference points.
    Marginal(&'a Background<T>),
    /// `v(S) = f(x_S, E[X_S̄ | X_S = x_S])` under the background's Gaussian moments.
    ConditionalGaussian(&'a Background<T>),
}

impl<T> ValueFunction<'_, T> {
    fn method(&self) -> Method {
        match self {
            ValueFunction::Marginal(_) => Method::ShapleyMarginal,
            ValueFunction::ConditionalGaussian(_) => Method::ShapleyConditional,
        }
    }
}

fn members(mask: usize, d: usize) -> (Vec<usize>, Vec<usize>) {
    (0..d).partition(|&j| mask & (1 << j) != 0)
}

fn marginal_values<T: Scalar>(model: &LinearModel<T>, x: &[T], refs: &Matrix<T>) -> Vec<T> {
    let d = x.len();
    let m = T::from_count(refs.rows());
    let mut z = vec![T::zero(); d];
    (0..1usize << d)
        .map(|mask| {
            let total = refs.iter_rows().fold(T::zero(), |acc, r| {
                for j in 0..d {
                    z[j] = if mask & (1 << j) != 0 { x[j] } else { r[j] };
                }
                acc + model.score_unchecked(&z)
            });
            total / m
        })
        .collect()
}

fn conditional_values<T: Scalar>(
    model: &LinearModel<T>,
    x: &[T],
    mean: &[T],
    cov: &Matrix<T>,
) -> Result<Vec<T>> {
    let d = x.len();
    let mut z = vec![T::zero(); d];
    (0..1usize << d)
        .map(|mask| {
            let (inside, outside) = members(mask, d);
            if inside.is_empty() {
                return Ok(model.score_unchecked(mean));
            }
            z.copy_from_slice(mean);
            for &j in &inside {
                z[j] = x[j];
            }
            if !outside.is_empty() {
                let sub = cov.select(&inside, &inside);
                let chol = sub.cholesky().map_err(|_| Error::SingularCovariance {
                    what: format!("conditioning covariance on features {inside:?}"),
                    condition_number: f64::INFINITY,
                })?;
                let dev: Vec<T> = inside.iter().map(|&j| x[j] - mean[j]).collect();
                let coef = chol.solve(&dev);
                let cross = cov.select(&outside, &inside);
                for (k, &j) in outside.iter().enumerate() {
                    z[j] = mean[j] + crate::scalar::dot(cross.row(k), &coef);
                }
            }
            Ok(model.score_unchecked(&z))
        })
        .collect()
}

/// `1 / (d · C(d−1, s))` = `s!(d−s−1)!/d!`.
fn coalition_weights<T: Scalar>(d: usize) -> Vec<T> {
    let mut binom = 1.0f64;
    (0..d)
        .map(|s| {
            if s > 0 {
                binom = binom * (d - s) as f64 / s as f64;
            }
            T::lit(1.0 / (d as f64 * binom))
        })
        .collect()
}

pub(crate) fn shapley_from_values<T: Scalar>(values: &[T], d: usize) -> Vec<T> {
    let weights = coalition_weights::<T>(d);
    (0..d)
        .map(|i| {
            let bit = 1usize << i;
            (0..values.len())
                .filter(|mask| mask & bit == 0)
                .fold(T::zero(), |acc, mask| {
                    let s = mask.count_ones() as usize;
                    acc + weights[s] * (values[mask | bit] - values[mask])
                })
        })
        .collect()
}

pub fn shapley_exact<T: Scalar>(
    model: &LinearModel<T>,
    x: &[T],
    value_fn: ValueFunction<'_, T>,
) -> Result<Attribution<T>> {
    check_point(model, x)?;
    let d = x.len();
    if d > MAX_SHAPLEY_FEATURES {
        return Err(Error::TooManyFeatures {
            d,
            max: MAX_SHAPLEY_FEATURES,
        });
    }
    let (values, info) = match value_fn {
        ValueFunction::Marginal(bg) => {
            let refs = bg
                .reference_points()
                .ok_or_else(|| Error::invalid("marginal value function needs reference points"))?;
            model.check_dim(refs.cols())?;
            (
                marginal_values(model, x, refs),
                format!("marginal over {} reference points", refs.rows()),
            )
        }
        ValueFunction::ConditionalGaussian(bg) => {
            let g = bg
                .gaussian_moments()
                .ok_or_else(|| Error::invalid("conditional value function needs Gaussian moments"))?;
            model.check_dim(g.mean.len())?;
            (
                conditional_values(model, x, &g.mean, &g.covariance)?,
                "conditional Gaussian expectation".to_string(),
            )
        }
    };
    let mut attr = Attribution::local(value_fn.method(), x, shapley_from_values(&values, d));
    attr.baseline_info = Some(info);
    Ok(attr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_over_coalitions() {
        // Σ_s C(d−1, s) · weight(s) = 1
        for d in 1..=12usize {
            let w = coalition_weights::<f64>(d);
            let mut binom = 1.0;
            let mut total = 0.0;
            for (s, ws) in w.iter().enumerate() {
                if s > 0 {
                    binom *= (d - s) as f64 / s as f64;
                }
                total += binom * ws;
            }
            assert!((total - 1.0).abs() < 1e-12, "d={d}: {total}");
        }
    }

    #[test]
    fn glove_game() {
        // players 0,1 hold left gloves, 2 holds a right glove; v = #pairs
        let v: Vec<f64> = (0..8usize)
            .map(|m| {
                let left = (m & 1 != 0) as u8 + (m & 2 != 0) as u8;
                let right = (m & 4 != 0) as u8;
                left.min(right) as f64
            })
            .collect();
        let phi = shapley_from_values(&v, 3);
        assert!((phi[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((phi[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((phi[2] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_features() {
        let model = LinearModel::new(vec![1.0f64; 21], 0.0).unwrap();
        let bg = Background::empirical(Matrix::zeros(1, 21)).unwrap();
        assert!(matches!(
            shapley_exact(&model, &[0.0; 21], ValueFunction::Marginal(&bg)),
            Err(Error::TooManyFeatures { d: 21, .. })
        ));
    }

    #[test]
    fn conditional_needs_invertible_subcovariance() {
        let model = LinearModel::new(vec![1.0f64, 1.0], 0.0).unwrap();
        let cov = Matrix::from_rows(vec![vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let bg = Background::gaussian(vec![0.0, 0.0], cov).unwrap();
        assert!(matches!(
            shapley_exact(&model, &[1.0, 1.0], ValueFunction::ConditionalGaussian(&bg)),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn missing_background_parts() {
        let model = LinearModel::new(vec![1.0f64, 1.0], 0.0).unwrap();
        let emp = Background::empirical(Matrix::zeros(2, 2)).unwrap();
        assert!(shapley_exact(&model, &[1.0, 1.0], ValueFunction::ConditionalGaussian(&emp)).is_err());
        let gauss = Background::gaussian(vec![0.0, 0.0], Matrix::identity(2)).unwrap();
        assert!(shapley_exact(&model, &[1.0, 1.0], ValueFunction::Marginal(&gauss)).is_err());
    }
}
