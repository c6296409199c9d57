//! Linear classifiers `f(x) = wᵀx + b` on ±1 labels.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct LinearModel<T> {
    weights: Vec<T>,
    bias: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(weights: Vec<T>, bias: T) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("linear model needs at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::invalid("linear model parameters must be finite"));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `(λw, λb)`.
    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            weights: self.weights.iter().map(|&w| w * lambda).collect(),
            bias: self.bias * lambda,
        }
    }

    /// Rescales so that `‖w‖₂ = 1`; a zero weight vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = norm(&self.weights);
        if n == T::zero() {
            self.clone()
        } else {
            self.scaled(T::one() / n)
        }
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            })
        }
    }

    /// Score without a dimension check; callers guarantee `x.len() == d`.
    pub(crate) fn score_unchecked(&self, x: &[T]) -> T {
        dot(&self.weights, x) + self.bias
    }
}

pub fn decision_score<T: Scalar>(model: &LinearModel<T>, x: &[T]) -> Result<T> {
    model.check_dim(x.len())?;
    Ok(model.score_unchecked(x))
}

/// Predicted label; a zero score is classified as +1.
pub fn predict<T: Scalar>(score: T) -> i8 {
    if score >= T::zero() {
        1
    } else {
        -1
    }
}

/// Fraction of rows whose predicted sign matches the label (sign(0) = +1).
pub fn accuracy<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>) -> Result<T> {
    accuracy_on(model, data.features(), data.labels())
}

pub(crate) fn accuracy_on<T: Scalar>(
    model: &LinearModel<T>,
    features: &Matrix<T>,
    labels: &[i8],
) -> Result<T> {
    model.check_dim(features.cols())?;
    let hits = features
        .iter_rows()
        .zip(labels)
        .filter(|(row, &y)| predict(model.score_unchecked(row)) == y)
        .count();
    Ok(T::from_count(hits) / T::from_count(labels.len()))
}

/// Plug-in linear discriminant: `w ∝ Σ̂⁻¹(μ̂₊ − μ̂₋)` with pooled within-class
/// covariance, normalized to unit length, and `b = −wᵀ(μ̂₊ + μ̂₋)/2`.
pub fn fit_lda<T: Scalar>(data: &Dataset<T>) -> Result<LinearModel<T>> {
    let d = data.dim();
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    let mut mu_pos = vec![T::zero(); d];
    let mut mu_neg = vec![T::zero(); d];
    for (row, &y) in data.features().iter_rows().zip(data.labels()) {
        let (mu, cnt) = if y > 0 {
            (&mut mu_pos, &mut n_pos)
        } else {
            (&mut mu_neg, &mut n_neg)
        };
        *cnt += 1;
        for (m, &v) in mu.iter_mut().zip(row) {
            *m = *m + v;
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Estimation("LDA needs samples from both classes".into()));
    }
    if n_pos + n_neg < d + 2 {
        return Err(Error::Estimation(format!(
            "LDA needs at least {} samples for {d} features",
            d + 2
        )));
    }
    mu_pos.iter_mut().for_each(|m| *m = *m / T::from_count(n_pos));
    mu_neg.iter_mut().for_each(|m| *m = *m / T::from_count(n_neg));

    let mut scatter: Matrix<T> = Matrix::zeros(d, d);
    let mut centered = vec![T::zero(); d];
    for (row, &y) in data.features().iter_rows().zip(data.labels()) {
        let mu = if y > 0 { &mu_pos } else { &mu_neg };
        for (c, (&v, &m)) in centered.iter_mut().zip(row.iter().zip(mu)) {
            *c = v - m;
        }
        for i in 0..d {
            for j in 0..=i {
                scatter[(i, j)] = scatter[(i, j)] + centered[i] * centered[j];
            }
        }
    }
    let dof = T::from_count(n_pos + n_neg - 2);
    for i in 0..d {
        for j in 0..=i {
            let v = scatter[(i, j)] / dof;
            scatter[(i, j)] = v;
            scatter[(j, i)] = v;
        }
    }

    let singular = |cond: f64| Error::SingularCovariance {
        what: "pooled class-conditional covariance".into(),
        condition_number: cond,
    };
    let chol = scatter.cholesky().map_err(|_| singular(f64::INFINITY))?;
    let cond = chol.condition_estimate();
    if cond.as_f64() > 1e-3 / T::epsilon().as_f64() {
        return Err(singular(cond.as_f64()));
    }
    let diff: Vec<T> = mu_pos.iter().zip(&mu_neg).map(|(&p, &n)| p - n).collect();
    let raw = chol.solve(&diff);
    let n = norm(&raw);
    if !(n > T::zero()) {
        return Err(Error::Estimation(
            "class means coincide; LDA direction undefined".into(),
        ));
    }
    let w: Vec<T> = raw.iter().map(|&v| v / n).collect();
    let mid: Vec<T> = mu_pos.iter().zip(&mu_neg).map(|(&p, &q)| p + q).collect();
    let b = -dot(&w, &mid) / T::lit(2.0);
    LinearModel::new(w, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    deny_unknown_fields,
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct LogisticConfig<T> {
    #[serde(default = "default_lr")]
    pub learning_rate: T,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_l2")]
    pub l2: T,
}

fn default_lr<T: Scalar>() -> T {
    T::lit(0.1)
}
fn default_iterations() -> usize {
    5000
}
fn default_l2<T: Scalar>() -> T {
    T::lit(1e-4)
}

impl<T: Scalar> Default for LogisticConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            iterations: default_iterations(),
            l2: default_l2(),
        }
    }
}

/// Number of consecutive loss increases treated as divergence.
pub const DIVERGENCE_STREAK: usize = 10;

fn softplus<T: Scalar>(t: T) -> T {
    // log(1 + e^t) without overflow
    if t > T::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// Mean logistic loss on ±1 labels plus `l2/2 ‖w‖²` (bias unpenalized).
pub fn logistic_loss<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>, l2: T) -> T {
    let n = T::from_count(data.len());
    let total = data
        .features()
        .iter_rows()
        .zip(data.labels())
        .fold(T::zero(), |acc, (row, &y)| {
            let margin = T::from(y).unwrap() * model.score_unchecked(row);
            acc + softplus(-margin)
        });
    total / n + l2 * dot(&model.weights, &model.weights) / T::lit(2.0)
}

/// Gradient of [`logistic_loss`] as `(∂w, ∂b)`.
pub fn logistic_gradient<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>, l2: T) -> (Vec<T>, T) {
    let (_, gw, gb) = loss_and_gradient(model, data, l2);
    (gw, gb)
}

fn loss_and_gradient<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>, l2: T) -> (T, Vec<T>, T) {
    let d = data.dim();
    let mut gw = vec![T::zero(); d];
    let mut gb = T::zero();
    let mut total = T::zero();
    for (row, &y) in data.features().iter_rows().zip(data.labels()) {
        let yf = T::from(y).unwrap();
        let margin = yf * model.score_unchecked(row);
        total = total + softplus(-margin);
        let coef = -yf * sigmoid(-margin);
        for (g, &v) in gw.iter_mut().zip(row) {
            *g = *g + coef * v;
        }
        gb = gb + coef;
    }
    let n = T::from_count(data.len());
    for (g, &w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    let loss = total / n + l2 * dot(&model.weights, &model.weights) / T::lit(2.0);
    (loss, gw, gb / n)
}

/// Full-batch gradient descent on the regularized logistic loss, starting
/// from zero. Returns the final iterate.
pub fn fit_logistic<T: Scalar>(data: &Dataset<T>, config: &LogisticConfig<T>) -> Result<LinearModel<T>> {
    fit_logistic_traced(data, config).map(|(m, _)| m)
}

/// Like [`fit_logistic`] but also returns the loss after every iteration
/// (index 0 is the initial loss).
pub fn fit_logistic_traced<T: Scalar>(
    data: &Dataset<T>,
    config: &LogisticConfig<T>,
) -> Result<(LinearModel<T>, Vec<T>)> {
    let LogisticConfig {
        learning_rate,
        iterations,
        l2,
    } = *config;
    if !learning_rate.is_finite() || learning_rate <= T::zero() {
        return Err(Error::invalid("learning_rate must be positive and finite"));
    }
    if !l2.is_finite() || l2 < T::zero() {
        return Err(Error::invalid("l2 must be finite and non-negative"));
    }
    let mut model = LinearModel {
        weights: vec![T::zero(); data.dim()],
        bias: T::zero(),
    };
    let mut losses = Vec::with_capacity(iterations + 1);
    let (mut loss, mut gw, mut gb) = loss_and_gradient(&model, data, l2);
    losses.push(loss);
    let mut streak = 0;
    for it in 1..=iterations {
        for (w, &g) in model.weights.iter_mut().zip(&gw) {
            *w = *w - learning_rate * g;
        }
        model.bias = model.bias - learning_rate * gb;
        let prev = loss;
        (loss, gw, gb) = loss_and_gradient(&model, data, l2);
        if !loss.is_finite() {
            return Err(Error::Convergence {
                iteration: it,
                streak,
                loss: loss.as_f64(),
            });
        }
        streak = if loss > prev { streak + 1 } else { 0 };
        if streak >= DIVERGENCE_STREAK {
            return Err(Error::Convergence {
                iteration: it,
                streak,
                loss: loss.as_f64(),
            });
        }
        losses.push(loss);
    }
    Ok((model, losses))
}
