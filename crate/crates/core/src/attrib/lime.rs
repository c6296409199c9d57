//! LIME: weighted ridge regression of model scores on Gaussian perturbations
//! around the explained point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::attrib::{check_point, Attribution, Method};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{column_means, Matrix};
use crate::models::LinearModel;
use crate::scalar::Scalar;

/// Perturbations are `z = x + σ ∘ g` with `g ~ N(0, I)`. Distances for the
/// kernel are measured in units of `σ`, so `kernel_width` is dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeParams<T> {
    pub n_perturb: usize,
    pub perturbation_std: Vec<T>,
    pub kernel_width: T,
    pub ridge: T,
    pub seed: u64,
}

impl<T: Scalar> LimeParams<T> {
    /// Per-feature sample std of `data`, kernel width `0.75·√d`, ridge `1e-6`.
    pub fn from_data(data: &Dataset<T>, n_perturb: usize, seed: u64) -> Self {
        let means = column_means(data.features());
        let denom = T::from_count(data.len().saturating_sub(1).max(1));
        let perturbation_std = (0..data.dim())
            .map(|j| {
                let ss = data
                    .features()
                    .iter_rows()
                    .fold(T::zero(), |acc, r| acc + (r[j] - means[j]).powi(2));
                (ss / denom).sqrt()
            })
            .collect();
        Self {
            n_perturb,
            perturbation_std,
            kernel_width: T::lit(0.75) * T::from_count(data.dim()).sqrt(),
            ridge: T::lit(1e-6),
            seed,
        }
    }

    /// Unit perturbation scale in every feature.
    pub fn isotropic(d: usize, n_perturb: usize, seed: u64) -> Self {
        Self {
            n_perturb,
            perturbation_std: vec![T::one(); d],
            kernel_width: T::lit(0.75) * T::from_count(d).sqrt(),
            ridge: T::lit(1e-6),
            seed,
        }
    }
}

pub fn lime<T: Scalar>(model: &LinearModel<T>, x: &[T], params: &LimeParams<T>) -> Result<Attribution<T>> {
    check_point(model, x)?;
    let d = x.len();
    if params.perturbation_std.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: params.perturbation_std.len(),
        });
    }
    if params.n_perturb < d + 1 {
        return Err(Error::invalid(format!(
            "LIME needs at least d + 1 = {} perturbations, got {}",
            d + 1,
            params.n_perturb
        )));
    }
    if !(params.kernel_width > T::zero()) || !(params.ridge >= T::zero()) {
        return Err(Error::invalid(
            "kernel_width must be positive and ridge non-negative",
        ));
    }
    if params
        .perturbation_std
        .iter()
        .any(|s| !(*s > T::zero()) || !s.is_finite())
    {
        return Err(Error::Estimation(
            "degenerate LIME design: a feature has zero perturbation scale".into(),
        ));
    }

    // Design row u = (1, z − x); normal equations accumulated in order.
    let p = d + 1;
    let mut gram: Matrix<T> = Matrix::zeros(p, p);
    let mut rhs = vec![T::zero(); p];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut u = vec![T::zero(); p];
    let mut z = vec![T::zero(); d];
    let kw2 = params.kernel_width * params.kernel_width;
    u[0] = T::one();
    for _ in 0..params.n_perturb {
        let mut dist2 = T::zero();
        for j in 0..d {
            let g = T::lit(rng.sample::<f64, _>(StandardNormal));
            let step = params.perturbation_std[j] * g;
            z[j] = x[j] + step;
            u[j + 1] = step;
            dist2 = dist2 + g * g;
        }
        let weight = (-dist2 / kw2).exp();
        let y = model.score_unchecked(&z);
        for a in 0..p {
            rhs[a] = rhs[a] + weight * u[a] * y;
            for b in 0..=a {
                gram[(a, b)] = gram[(a, b)] + weight * u[a] * u[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    let rank_deficient =
        || Error::Estimation("degenerate LIME design: weighted design matrix has rank < d".into());
    let unregularized = gram.cholesky().map_err(|_| rank_deficient())?;
    if unregularized.condition_estimate().as_f64() > 1e-2 / T::epsilon().as_f64() {
        return Err(rank_deficient());
    }
    for a in 1..p {
        gram[(a, a)] = gram[(a, a)] + params.ridge;
    }
    let beta = gram.cholesky()?.solve(&rhs);
    let mut attr = Attribution::local(Method::Lime, x, beta[1..].to_vec());
    attr.baseline_info = Some(format!(
        "{} Gaussian perturbations, kernel width {}",
        params.n_perturb, params.kernel_width
    ));
    Ok(attr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cosine;

    #[test]
    fn recovers_linear_slopes() {
        let model = LinearModel::new(vec![0.3, -1.2, 0.8], 0.4).unwrap();
        let params = LimeParams::isotropic(3, 10_000, 5);
        let a = lime(&model, &[0.5, 1.0, -2.0], &params).unwrap();
        assert!(cosine(&a.scores, model.weights()) >= 0.999);
    }

    #[test]
    fn constant_model_gives_zero() {
        let model = LinearModel::new(vec![0.0f64, 0.0], 0.7).unwrap();
        let a = lime(&model, &[1.0, 2.0], &LimeParams::isotropic(2, 500, 1)).unwrap();
        assert!(a.scores.iter().all(|s| s.abs() < 1e-6));
    }

    #[test]
    fn too_few_perturbations() {
        let model = LinearModel::new(vec![1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            lime(&model, &[0.0, 0.0], &LimeParams::isotropic(2, 2, 1)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_scale_is_degenerate() {
        let model = LinearModel::new(vec![1.0, 1.0], 0.0).unwrap();
        let mut params = LimeParams::isotropic(2, 100, 1);
        params.perturbation_std[1] = 0.0;
        assert!(matches!(
            lime(&model, &[0.0, 0.0], &params),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn seeded() {
        let model = LinearModel::new(vec![1.0, -1.0], 0.0).unwrap();
        let p = LimeParams::isotropic(2, 200, 9);
        assert_eq!(
            lime(&model, &[1.0, 1.0], &p).unwrap(),
            lime(&model, &[1.0, 1.0], &p).unwrap()
        );
    }
}
