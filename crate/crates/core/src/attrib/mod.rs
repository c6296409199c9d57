//! Feature attribution methods for linear models.
//!
//! Every method returns an [`Attribution`]: one score per feature plus the
//! method identity and whether the scores explain the model as a whole
//! (global) or a single input (local).

mod lime;
mod shapley;

pub use lime::{lime, LimeParams};
pub use shapley::{shapley_exact, ValueFunction, MAX_SHAPLEY_FEATURES};

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{column_means, sample_covariance, Matrix};
use crate::models::{accuracy, accuracy_on, LinearModel};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gradient,
    LrpLinear,
    IntegratedGradients,
    Lime,
    ShapleyMarginal,
    ShapleyConditional,
    Counterfactual,
    PermutationImportance,
    PartialDependence,
    Pattern,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Gradient,
        Method::LrpLinear,
        Method::IntegratedGradients,
        Method::Lime,
        Method::ShapleyMarginal,
        Method::ShapleyConditional,
        Method::Counterfactual,
        Method::PermutationImportance,
        Method::PartialDependence,
        Method::Pattern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gradient => "gradient",
            Method::LrpLinear => "lrp_linear",
            Method::IntegratedGradients => "integrated_gradients",
            Method::Lime => "lime",
            Method::ShapleyMarginal => "shapley_marginal",
            Method::ShapleyConditional => "shapley_conditional",
            Method::Counterfactual => "counterfactual",
            Method::PermutationImportance => "permutation_importance",
            Method::PartialDependence => "partial_dependence",
            Method::Pattern => "pattern",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Gradient => "Gradient",
            Method::LrpLinear => "LRP/DTD (linear)",
            Method::IntegratedGradients => "Integrated Gradients",
            Method::Lime => "LIME",
            Method::ShapleyMarginal => "SHAP (marginal expectation)",
            Method::ShapleyConditional => "SHAP (conditional expectation)",
            Method::Counterfactual => "Counterfactuals",
            Method::PermutationImportance => "Permutation Feature Importance",
            Method::PartialDependence => "Partial Dependence Plot",
            Method::Pattern => "PATTERN",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Methods that explain a single input and need an evaluation point.
    pub fn is_local(self) -> bool {
        matches!(
            self,
            Method::LrpLinear
                | Method::IntegratedGradients
                | Method::Lime
                | Method::ShapleyMarginal
                | Method::ShapleyConditional
                | Method::Counterfactual
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    rename_all = "snake_case",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub enum Scope<T> {
    Global,
    Local(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Attribution<T> {
    pub method: Method,
    pub scope: Scope<T>,
    pub scores: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_info: Option<String>,
}

impl<T: Scalar> Attribution<T> {
    pub fn global(method: Method, scores: Vec<T>) -> Self {
        Self {
            method,
            scope: Scope::Global,
            scores,
            baseline_info: None,
        }
    }

    pub fn local(method: Method, x: &[T], scores: Vec<T>) -> Self {
        Self {
            method,
            scope: Scope::Local(x.to_vec()),
            scores,
            baseline_info: None,
        }
    }

    fn with_baseline(mut self, info: impl Into<String>) -> Self {
        self.baseline_info = Some(info.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.scores.len()
    }

    /// `|scores| / Σ|scores|`, or `None` when every score is zero.
    pub fn normalized_magnitudes(&self) -> Option<Vec<T>> {
        let total: T = self.scores.iter().map(|s| s.abs()).sum();
        (total > T::zero()).then(|| self.scores.iter().map(|s| s.abs() / total).collect())
    }

    /// Feature indices by descending magnitude; ties keep ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        magnitude_ranking(&self.scores)
    }
}

pub fn magnitude_ranking<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps index order among equal magnitudes
    idx.sort_by(|&a, &b| {
        scores[b]
            .abs()
            .partial_cmp(&scores[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments<T> {
    pub mean: Vec<T>,
    pub covariance: Matrix<T>,
}

/// Reference distribution for value functions and baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct Background<T> {
    reference_points: Option<Matrix<T>>,
    gaussian: Option<GaussianMoments<T>>,
}

impl<T: Scalar> Background<T> {
    pub fn empirical(reference_points: Matrix<T>) -> Result<Self> {
        if reference_points.rows() == 0 {
            return Err(Error::invalid("empirical background needs at least one point"));
        }
        Ok(Self {
            reference_points: Some(reference_points),
            gaussian: None,
        })
    }

    pub fn gaussian(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        let d = mean.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.rows(),
            });
        }
        let scale = (0..d).fold(T::zero(), |m, i| m.max(covariance[(i, i)].abs()));
        if !covariance.is_symmetric(T::epsilon().sqrt() * scale.max(T::one())) {
            return Err(Error::invalid("background covariance is not symmetric"));
        }
        // PSD check: a small diagonal jitter must make it factorizable.
        let mut jittered = covariance.clone();
        let jitter = T::epsilon().sqrt() * scale.max(T::min_positive_value());
        for i in 0..d {
            jittered[(i, i)] = jittered[(i, i)] + jitter;
        }
        if jittered.cholesky().is_err() {
            return Err(Error::NotPositiveDefinite {
                what: "background covariance (not PSD)".into(),
            });
        }
        Ok(Self {
            reference_points: None,
            gaussian: Some(GaussianMoments { mean, covariance }),
        })
    }

    /// Adds Gaussian moments to an existing background.
    pub fn with_gaussian(mut self, mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        self.gaussian = Background::gaussian(mean, covariance)?.gaussian;
        Ok(self)
    }

    /// First `max_points` rows as the empirical sample, with the sample mean
    /// and covariance of the whole dataset as Gaussian moments.
    pub fn from_dataset(data: &Dataset<T>, max_points: usize) -> Result<Self> {
        let m = max_points.clamp(1, data.len());
        let d = data.dim();
        let rows = Matrix::from_row_major(m, d, data.features().as_slice()[..m * d].to_vec())?;
        Self::empirical(rows)?
            .with_gaussian(column_means(data.features()), sample_covariance(data.features()))
    }

    pub fn reference_points(&self) -> Option<&Matrix<T>> {
        self.reference_points.as_ref()
    }

    pub fn gaussian_moments(&self) -> Option<&GaussianMoments<T>> {
        self.gaussian.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.reference_points
            .as_ref()
            .map(Matrix::cols)
            .or_else(|| self.gaussian.as_ref().map(|g| g.mean.len()))
            .unwrap_or(0)
    }

    /// Mean of the empirical sample if present, else the Gaussian mean.
    pub fn mean(&self) -> Vec<T> {
        match (&self.reference_points, &self.gaussian) {
            (Some(r), _) => column_means(r),
            (None, Some(g)) => g.mean.clone(),
            (None, None) => Vec::new(),
        }
    }
}

fn check_point<T: Scalar>(model: &LinearModel<T>, x: &[T]) -> Result<()> {
    model.check_dim(x.len())
}

/// Input gradient of a linear model: the weight vector.
pub fn gradient<T: Scalar>(model: &LinearModel<T>) -> Attribution<T> {
    Attribution::global(Method::Gradient, model.weights().to_vec())
}

/// Input-times-weight decomposition `w_i x_i`; sums to `f(x) − b`.
pub fn lrp_linear<T: Scalar>(model: &LinearModel<T>, x: &[T]) -> Result<Attribution<T>> {
    check_point(model, x)?;
    let scores = model.weights().iter().zip(x).map(|(&w, &v)| w * v).collect();
    Ok(Attribution::local(Method::LrpLinear, x, scores))
}

/// Integrated gradients along the straight path from `baseline` to `x`,
/// midpoint Riemann sum with `steps` intervals.
pub fn integrated_gradients<T: Scalar>(
    model: &LinearModel<T>,
    x: &[T],
    baseline: &[T],
    steps: usize,
) -> Result<Attribution<T>> {
    check_point(model, x)?;
    check_point(model, baseline)?;
    if steps == 0 {
        return Err(Error::invalid("integrated gradients needs at least one step"));
    }
    let d = x.len();
    let delta: Vec<T> = x.iter().zip(baseline).map(|(&a, &b)| a - b).collect();
    let mut grad_sum = vec![T::zero(); d];
    let mut point = vec![T::zero(); d];
    let n = T::from_count(steps);
    for k in 0..steps {
        let t = (T::from_count(k) + T::lit(0.5)) / n;
        for ((p, &b), &dl) in point.iter_mut().zip(baseline).zip(&delta) {
            *p = b + t * dl;
        }
        // the input gradient of f is constant: w
        for (g, &w) in grad_sum.iter_mut().zip(model_gradient_at(model, &point)) {
            *g = *g + w;
        }
    }
    let scores = grad_sum
        .iter()
        .zip(&delta)
        .map(|(&g, &dl)| dl * (g / n))
        .collect();
    Ok(Attribution::local(Method::IntegratedGradients, x, scores)
        .with_baseline(format!("straight path from {baseline:?}, {steps} steps")))
}

fn model_gradient_at<'a, T: Scalar>(model: &'a LinearModel<T>, _x: &[T]) -> &'a [T] {
    model.weights()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual<T> {
    pub x_cf: Vec<T>,
    pub delta: Vec<T>,
}

impl<T: Scalar> Counterfactual<T> {
    pub fn attribution(&self, x: &[T]) -> Attribution<T> {
        Attribution::local(Method::Counterfactual, x, self.delta.clone())
    }
}

/// Minimal-L2 change to `x` that puts the score exactly at `target_score`:
/// the orthogonal projection onto the level set `f = target_score`.
pub fn counterfactual<T: Scalar>(
    model: &LinearModel<T>,
    x: &[T],
    target_score: T,
) -> Result<Counterfactual<T>> {
    check_point(model, x)?;
    let w = model.weights();
    let wsq = dot(w, w);
    if wsq == T::zero() {
        return Err(Error::NoCounterfactual);
    }
    let step = (model.score_unchecked(x) - target_score) / wsq;
    let delta: Vec<T> = w.iter().map(|&wi| -step * wi).collect();
    let x_cf = x.iter().zip(&delta).map(|(&a, &b)| a + b).collect();
    Ok(Counterfactual { x_cf, delta })
}

/// Mean accuracy drop when each column is randomly permuted.
pub fn permutation_importance<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    n_repeats: usize,
    seed: u64,
) -> Result<Attribution<T>> {
    if data.len() < 2 {
        return Err(Error::invalid(
            "permutation importance needs at least two samples",
        ));
    }
    if n_repeats == 0 {
        return Err(Error::invalid("n_repeats must be at least 1"));
    }
    let base = accuracy(model, data)?;
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = vec![T::zero(); d];
    let mut shuffled = data.features().clone();
    for _ in 0..n_repeats {
        for (j, score) in scores.iter_mut().enumerate() {
            let mut col = data.features().column(j);
            col.shuffle(&mut rng);
            shuffled.set_column(j, &col);
            let acc = accuracy_on(model, &shuffled, data.labels())?;
            *score = *score + (base - acc);
            shuffled.set_column(j, &data.features().column(j));
        }
    }
    let r = T::from_count(n_repeats);
    Ok(Attribution::global(
        Method::PermutationImportance,
        scores.into_iter().map(|s| s / r).collect(),
    )
    .with_baseline(format!("{n_repeats} seeded permutations")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialDependence<T> {
    pub feature: usize,
    pub grid: Vec<T>,
    pub curve: Vec<T>,
    /// `max(curve) − min(curve)`.
    pub importance: T,
}

/// Average model score with `feature` clamped to each point of an
/// equispaced grid over its observed range.
pub fn partial_dependence<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    feature: usize,
    grid_size: usize,
) -> Result<PartialDependence<T>> {
    model.check_dim(data.dim())?;
    if feature >= data.dim() {
        return Err(Error::invalid(format!(
            "feature {feature} out of range for d = {}",
            data.dim()
        )));
    }
    if grid_size < 2 {
        return Err(Error::invalid("grid_size must be at least 2"));
    }
    let col = data.features().column(feature);
    let lo = col.iter().copied().fold(T::infinity(), T::min);
    let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    let steps = T::from_count(grid_size - 1);
    let grid: Vec<T> = (0..grid_size)
        .map(|k| lo + span * T::from_count(k) / steps)
        .collect();
    let n = T::from_count(data.len());
    let mut row = vec![T::zero(); data.dim()];
    let curve: Vec<T> = grid
        .iter()
        .map(|&v| {
            let total = data.features().iter_rows().fold(T::zero(), |acc, r| {
                row.copy_from_slice(r);
                row[feature] = v;
                acc + model.score_unchecked(&row)
            });
            total / n
        })
        .collect();
    let cmax = curve.iter().copied().fold(T::neg_infinity(), T::max);
    let cmin = curve.iter().copied().fold(T::infinity(), T::min);
    Ok(PartialDependence {
        feature,
        grid,
        curve,
        importance: cmax - cmin,
    })
}

/// Partial dependence importance of every feature as one global attribution.
pub fn partial_dependence_attribution<T: Scalar>(
    model: &LinearModel<T>,
    data: &Dataset<T>,
    grid_size: usize,
) -> Result<Attribution<T>> {
    let scores = (0..data.dim())
        .map(|j| partial_dependence(model, data, j, grid_size).map(|p| p.importance))
        .collect::<Result<Vec<_>>>()?;
    Ok(Attribution::global(Method::PartialDependence, scores)
        .with_baseline(format!("curve range over a {grid_size}-point grid")))
}

/// Activation pattern `Σ_x w / (wᵀ Σ_x w)` from the sample covariance.
pub fn pattern<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>) -> Result<Attribution<T>> {
    if data.len() < 2 {
        return Err(Error::invalid("pattern needs at least two samples"));
    }
    model.check_dim(data.dim())?;
    pattern_from_covariance(model, &sample_covariance(data.features()))
        .map(|a| a.with_baseline("sample covariance"))
}

/// Activation pattern from a known feature covariance.
pub fn pattern_from_covariance<T: Scalar>(model: &LinearModel<T>, cov: &Matrix<T>) -> Result<Attribution<T>> {
    model.check_dim(cov.rows())?;
    let cw = cov.mul_vec(model.weights());
    let var = dot(model.weights(), &cw);
    if !(var > T::zero()) {
        return Err(Error::UndefinedPattern);
    }
    Ok(Attribution::global(
        Method::Pattern,
        cw.into_iter().map(|v| v / var).collect(),
    ))
}
