//! Synthetic classification problems with a known suppressor variable, plus
//! closed-form ground truth for them.
//!
//! Example A: `x = a z + h`, `y = z`, `a = (1, 0)`, `h ~ N(0, Σ)` with
//! `Σ = [[s1², c s1 s2], [c s1 s2, s2²]]`. Feature 2 is independent of `y` but
//! lets a linear model cancel the noise it shares with feature 1.
//!
//! Example B: `x1 = y - x2` with `x2 ~ N(0, x2_std²)` independent of `y`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{normal_cdf, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "variant",
    rename_all = "snake_case",
    deny_unknown_fields,
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub enum GeneratorSpec<T> {
    /// Two features; `s1_sq`, `s2_sq` are noise variances, `c` the noise correlation.
    ExampleA { s1_sq: T, s2_sq: T, c: T },
    ExampleB {
        #[serde(default = "one")]
        x2_std: T,
    },
    /// `x = signal_pattern * z + h`, `h ~ N(0, noise_cov)`.
    Extended {
        signal_pattern: Vec<T>,
        noise_cov: Matrix<T>,
    },
}

fn one<T: Scalar>() -> T {
    T::one()
}

impl<T: Scalar> GeneratorSpec<T> {
    pub fn example_a(s1_sq: T, s2_sq: T, c: T) -> Result<Self> {
        let spec = GeneratorSpec::ExampleA { s1_sq, s2_sq, c };
        spec.validate()?;
        Ok(spec)
    }

    /// Example A with the variances used for the suppressor illustrations
    /// (`s1² = 0.8`, `s2² = 0.5`).
    pub fn reference_a(c: T) -> Self {
        GeneratorSpec::ExampleA {
            s1_sq: T::lit(0.8),
            s2_sq: T::lit(0.5),
            c,
        }
    }

    pub fn example_b(x2_std: T) -> Result<Self> {
        let spec = GeneratorSpec::ExampleB { x2_std };
        spec.validate()?;
        Ok(spec)
    }

    pub fn extended(signal_pattern: Vec<T>, noise_cov: Matrix<T>) -> Result<Self> {
        let spec = GeneratorSpec::Extended {
            signal_pattern,
            noise_cov,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            GeneratorSpec::ExampleA { .. } => "example_a",
            GeneratorSpec::ExampleB { .. } => "example_b",
            GeneratorSpec::Extended { .. } => "extended",
        }
    }

    /// Short human-readable label, e.g. `example_a(s1²=0.8, s2²=0.5, c=0.8)`.
    pub fn label(&self) -> String {
        match self {
            GeneratorSpec::ExampleA { s1_sq, s2_sq, c } => {
                format!("example_a(s1²={s1_sq}, s2²={s2_sq}, c={c})")
            }
            GeneratorSpec::ExampleB { x2_std } => format!("example_b(x2_std={x2_std})"),
            GeneratorSpec::Extended { signal_pattern, .. } => {
                format!("extended(d={})", signal_pattern.len())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::ExampleA { .. } | GeneratorSpec::ExampleB { .. } => 2,
            GeneratorSpec::Extended { signal_pattern, .. } => signal_pattern.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: T, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be finite")))
            }
        };
        match *self {
            GeneratorSpec::ExampleA { s1_sq, s2_sq, c } => {
                finite(s1_sq, "s1_sq")?;
                finite(s2_sq, "s2_sq")?;
                finite(c, "c")?;
                if s1_sq <= T::zero() || s2_sq <= T::zero() {
                    return Err(Error::InvalidSpec("noise variances must be positive".into()));
                }
                if c.abs() > T::one() {
                    return Err(Error::InvalidSpec(format!("correlation c = {c} outside [-1, 1]")));
                }
                Ok(())
            }
            GeneratorSpec::ExampleB { x2_std } => {
                finite(x2_std, "x2_std")?;
                if x2_std <= T::zero() {
                    return Err(Error::InvalidSpec("x2_std must be positive".into()));
                }
                Ok(())
            }
            GeneratorSpec::Extended {
                ref signal_pattern,
                ref noise_cov,
            } => {
                let d = signal_pattern.len();
                if d < 2 {
                    return Err(Error::InvalidSpec(format!("need at least 2 features, got {d}")));
                }
                if signal_pattern.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("signal_pattern must be finite".into()));
                }
                if noise_cov.rows() != d || noise_cov.cols() != d {
                    return Err(Error::InvalidSpec(format!(
                        "noise_cov is {}x{}, expected {d}x{d}",
                        noise_cov.rows(),
                        noise_cov.cols()
                    )));
                }
                if !noise_cov.is_symmetric(T::lit(1e-12).max(T::epsilon())) {
                    return Err(Error::InvalidSpec("noise_cov is not symmetric".into()));
                }
                noise_cov.cholesky().map_err(|_| Error::NotPositiveDefinite {
                    what: "noise_cov".into(),
                })?;
                Ok(())
            }
        }
    }

    /// Target loading `a` of each feature.
    pub fn signal_pattern(&self) -> Vec<T> {
        match self {
            GeneratorSpec::ExampleA { .. } | GeneratorSpec::ExampleB { .. } => {
                vec![T::one(), T::zero()]
            }
            GeneratorSpec::Extended { signal_pattern, .. } => signal_pattern.clone(),
        }
    }

    /// Exact covariance of `x` under the generative model (`a aᵀ + Σ`; for
    /// Example B the structural equation gives `[[1 + v, -v], [-v, v]]`).
    pub fn feature_covariance(&self) -> Matrix<T> {
        let (a, noise) = match self {
            GeneratorSpec::ExampleA { .. } => (self.signal_pattern(), self.noise_covariance()),
            GeneratorSpec::ExampleB { x2_std } => {
                let v = *x2_std * *x2_std;
                return Matrix::from_rows(vec![vec![T::one() + v, -v], vec![-v, v]]).expect("2x2");
            }
            GeneratorSpec::Extended {
                signal_pattern,
                noise_cov,
            } => (signal_pattern.clone(), noise_cov.clone()),
        };
        let mut cov = noise;
        for i in 0..a.len() {
            for j in 0..a.len() {
                cov[(i, j)] = cov[(i, j)] + a[i] * a[j];
            }
        }
        cov
    }

    /// Covariance of the additive noise `h` (Example A and Extended).
    fn noise_covariance(&self) -> Matrix<T> {
        match *self {
            GeneratorSpec::ExampleA { s1_sq, s2_sq, c } => {
                let off = c * s1_sq.sqrt() * s2_sq.sqrt();
                Matrix::from_rows(vec![vec![s1_sq, off], vec![off, s2_sq]]).expect("2x2")
            }
            GeneratorSpec::Extended { ref noise_cov, .. } => noise_cov.clone(),
            GeneratorSpec::ExampleB { .. } => unreachable!("example B has no additive noise"),
        }
    }
}

/// Features statistically associated with `y` under the generative model.
pub fn ground_truth_mask<T: Scalar>(spec: &GeneratorSpec<T>) -> Vec<bool> {
    match spec {
        GeneratorSpec::ExampleA { .. } | GeneratorSpec::ExampleB { .. } => vec![true, false],
        GeneratorSpec::Extended { signal_pattern, .. } => {
            signal_pattern.iter().map(|&a| a != T::zero()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<i8>,
    mask: Vec<bool>,
    spec: Option<GeneratorSpec<T>>,
    seed: Option<u64>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from raw parts. Labels must be ±1.
    pub fn from_parts(features: Matrix<T>, labels: Vec<i8>, mask: Vec<bool>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("dataset needs at least one sample"));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if mask.len() != features.cols() {
            return Err(Error::DimensionMismatch {
                expected: features.cols(),
                found: mask.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::invalid(format!("label {bad} is not ±1")));
        }
        Ok(Self {
            features,
            labels,
            mask,
            spec: None,
            seed: None,
        })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn spec(&self) -> Option<&GeneratorSpec<T>> {
        self.spec.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Same labels and provenance with a replaced feature matrix.
    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        if features.rows() != self.len() || features.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.dim(),
                found: features.rows() * features.cols(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Writes `x1,..,xd,y` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for (row, label) in self.features.iter_rows().zip(&self.labels) {
            for v in row {
                write!(out, "{v},")?;
            }
            writeln!(out, "{label}")?;
        }
        Ok(())
    }

    pub fn metadata(&self) -> DatasetMeta<T> {
        DatasetMeta {
            spec: self.spec.clone(),
            seed: self.seed,
            n: self.len(),
            mask: self.mask.clone(),
        }
    }
}

/// Sidecar description written next to an exported dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DatasetMeta<T> {
    pub spec: Option<GeneratorSpec<T>>,
    pub seed: Option<u64>,
    pub n: usize,
    pub mask: Vec<bool>,
}

fn rademacher(rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

fn std_normal<T: Scalar>(rng: &mut ChaCha8Rng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Draws `n` i.i.d. samples; deterministic in `(spec, n, seed)`.
pub fn sample<T: Scalar>(spec: &GeneratorSpec<T>, n: usize, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(Error::invalid("sample size n must be at least 1"));
    }
    spec.validate()?;
    let d = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);

    match *spec {
        GeneratorSpec::ExampleA { s1_sq, s2_sq, c } => {
            // Closed-form 2x2 Cholesky factor; also valid at |c| = 1.
            let (s1, s2) = (s1_sq.sqrt(), s2_sq.sqrt());
            let resid = (T::one() - c * c).max(T::zero()).sqrt();
            for _ in 0..n {
                let z = rademacher(&mut rng);
                let (g1, g2) = (std_normal::<T>(&mut rng), std_normal::<T>(&mut rng));
                let h1 = s1 * g1;
                let h2 = s2 * (c * g1 + resid * g2);
                data.push(T::from(z).unwrap() + h1);
                data.push(h2);
                labels.push(z);
            }
        }
        GeneratorSpec::ExampleB { x2_std } => {
            for _ in 0..n {
                let y = rademacher(&mut rng);
                let x2 = x2_std * std_normal::<T>(&mut rng);
                data.push(T::from(y).unwrap() - x2);
                data.push(x2);
                labels.push(y);
            }
        }
        GeneratorSpec::Extended {
            ref signal_pattern,
            ref noise_cov,
        } => {
            let chol = noise_cov.cholesky()?;
            let mut g = vec![T::zero(); d];
            for _ in 0..n {
                let z = rademacher(&mut rng);
                for gi in g.iter_mut() {
                    *gi = std_normal(&mut rng);
                }
                let h = chol.mul_lower(&g);
                let zf = T::from(z).unwrap();
                data.extend(signal_pattern.iter().zip(&h).map(|(&a, &hi)| a * zf + hi));
                labels.push(z);
            }
        }
    }

    let features = Matrix::from_row_major(n, d, data)?;
    let mut ds = Dataset::from_parts(features, labels, ground_truth_mask(spec))?;
    ds.spec = Some(spec.clone());
    ds.seed = Some(seed);
    Ok(ds)
}

/// Closed-form Bayes-optimal linear model and subset accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthOracle<T> {
    pub bayes_weights: Vec<T>,
    pub bayes_bias: T,
    /// Accuracy of the Bayes-optimal weights when the features outside the
    /// (sorted, 0-based) subset are replaced by their mean.
    pub subset_accuracy: BTreeMap<Vec<usize>, T>,
}

impl<T: Scalar> GroundTruthOracle<T> {
    pub fn accuracy_of(&self, subset: &[usize]) -> Option<T> {
        let mut key = subset.to_vec();
        key.sort_unstable();
        key.dedup();
        self.subset_accuracy.get(&key).copied()
    }

    pub fn model(&self) -> crate::models::LinearModel<T> {
        crate::models::LinearModel::new(self.bayes_weights.clone(), self.bayes_bias)
            .expect("oracle weights are finite")
    }
}

pub fn oracle<T: Scalar>(spec: &GeneratorSpec<T>) -> Result<GroundTruthOracle<T>> {
    spec.validate()?;
    let half = T::lit(0.5);
    let mut acc = BTreeMap::new();
    acc.insert(vec![], half);
    acc.insert(vec![1], half);
    let weights = match *spec {
        GeneratorSpec::ExampleA { s1_sq, s2_sq, c } => {
            let (s1, s2) = (s1_sq.sqrt(), s2_sq.sqrt());
            let ratio = c * s1 / s2;
            let alpha = (T::one() + ratio * ratio).powf(-half);
            let resid = (T::one() - c * c).sqrt();
            // Full model: Φ(sqrt(aᵀΣ⁻¹a)); feature 1 alone: Φ(1/s1).
            acc.insert(vec![0, 1], normal_cdf(T::one() / (s1 * resid)));
            acc.insert(vec![0], normal_cdf(T::one() / s1));
            vec![alpha, -alpha * ratio]
        }
        GeneratorSpec::ExampleB { x2_std } => {
            let w = T::one() / T::lit(2.0).sqrt();
            acc.insert(vec![0, 1], T::one());
            acc.insert(vec![0], normal_cdf(T::one() / x2_std));
            vec![w, w]
        }
        GeneratorSpec::Extended { .. } => return Err(Error::UnsupportedOracle("extended")),
    };
    Ok(GroundTruthOracle {
        bayes_weights: weights,
        bayes_bias: T::zero(),
        subset_accuracy: acc,
    })
}
