//! Linear-regression layer: ordinary least squares, residual noise-variance
//! estimation, and the weighted data-pooling estimator that fuses a source
//! dataset observing only the first `d_S` features with a target dataset
//! observing all `d_T > d_S` features.
//!
//! The pooled loss is
//!
//! ```text
//! R_a(theta) = a_S ||y_S - x_S P^T theta||^2 + a_T ||y_T - x_T theta||^2
//! ```
//!
//! where `P` is the `d_T x d_S` zero-padding map. Its unique minimizer solves
//! `M theta = a_S P x_S^T y_S + a_T x_T^T y_T` with
//! `M = a_S P x_S^T x_S P^T + a_T x_T^T x_T`. With inverse-variance weights
//! `a_S = 1/sigma_S^2`, `a_T = 1/sigma^2` this matches the negative
//! log-likelihood of both label vectors up to constants, and the estimator's
//! generalization error never exceeds that of target-only least squares.
//!
//! Before pooling, the new target columns (`j >= d_S`) are centred so that the
//! zero-fill of the missing source entries is unbiased; the applied shift is
//! stored in the fitted model and re-applied at prediction time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Variance estimates below this are clamped before inversion into weights.
pub const MIN_VARIANCE: f64 = 1e-12;

/// A design matrix with labels and a count of historical features.
///
/// The first `d_hist` columns are the ones observable in the source domain.
/// For a source dataset `d_hist == d`; for a target dataset `d_hist < d`
/// names how many leading columns the source shares.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    d_hist: usize,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, d_hist: usize) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "label vector length",
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if d_hist == 0 || d_hist > x.ncols() {
            return Err(Error::InvalidSpec(format!(
                "d_hist must satisfy 1 <= d_hist <= d, got d_hist = {d_hist}, d = {}",
                x.ncols()
            )));
        }
        Ok(Self { x, y, d_hist })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn d_hist(&self) -> usize {
        self.d_hist
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Gram matrix `x^T x`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.transpose() * &self.x
    }

    /// Row `i` as an owned vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Columns `0..d_hist`.
    pub fn hist_block(&self) -> DMatrix<f64> {
        self.x.columns(0, self.d_hist).into_owned()
    }

    /// Columns `d_hist..d`.
    pub fn new_block(&self) -> DMatrix<f64> {
        self.x.columns(self.d_hist, self.d() - self.d_hist).into_owned()
    }
}

/// The pair of pooling weights together with the variance estimates (or known
/// values) they were derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolingWeights {
    pub alpha_source: f64,
    pub alpha_target: f64,
    pub sigma2_source: f64,
    pub sigma2_target: f64,
}

impl PoolingWeights {
    /// Explicit weights; the stored variances are their reciprocals.
    pub fn new(alpha_source: f64, alpha_target: f64) -> Result<Self> {
        if !(alpha_source > 0.0 && alpha_source.is_finite())
            || !(alpha_target > 0.0 && alpha_target.is_finite())
        {
            return Err(Error::InvalidSpec(format!(
                "pooling weights must be positive and finite, got ({alpha_source}, {alpha_target})"
            )));
        }
        Ok(Self {
            alpha_source,
            alpha_target,
            sigma2_source: 1.0 / alpha_source,
            sigma2_target: 1.0 / alpha_target,
        })
    }

    /// Inverse-variance weights. Variances are floored at [`MIN_VARIANCE`] so
    /// exact interpolation (zero residuals) still yields finite weights.
    pub fn from_variances(sigma2_source: f64, sigma2_target: f64) -> Self {
        let s2s = sigma2_source.max(MIN_VARIANCE);
        let s2t = sigma2_target.max(MIN_VARIANCE);
        Self {
            alpha_source: 1.0 / s2s,
            alpha_target: 1.0 / s2t,
            sigma2_source: s2s,
            sigma2_target: s2t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ols,
    DataPooling,
    DsftLinear,
    DsftKernel,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Ols => "ols",
            ModelKind::DataPooling => "dp",
            ModelKind::DsftLinear => "dsft",
            ModelKind::DsftKernel => "dsft-nl",
        };
        f.write_str(s)
    }
}

/// A fitted linear model: coefficients plus the column shift that was applied
/// to the training design and must be re-applied to every prediction input.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub theta: DVector<f64>,
    pub shift: DVector<f64>,
    pub kind: ModelKind,
}

impl FittedModel {
    /// `(x - shift) . theta` for a single row.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                what: "prediction input width",
                expected: self.theta.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.shift.iter())
            .zip(self.theta.iter())
            .map(|((xi, si), ti)| (xi - si) * ti)
            .sum())
    }

    /// Predictions for every row of `x`.
    pub fn predict_all(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                what: "prediction input width",
                expected: self.theta.len(),
                actual: x.ncols(),
            });
        }
        let offset = self.shift.dot(&self.theta);
        Ok(x * &self.theta - DVector::from_element(x.nrows(), offset))
    }
}

/// The `d_T x d_S` map that embeds source quantities into target coordinates
/// by appending zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddingMap {
    d_source: usize,
    d_target: usize,
}

impl PaddingMap {
    pub fn new(d_source: usize, d_target: usize) -> Result<Self> {
        if d_source == 0 || d_source > d_target {
            return Err(Error::DimensionMismatch {
                what: "padding map widths (need 1 <= d_S <= d_T)",
                expected: d_target,
                actual: d_source,
            });
        }
        Ok(Self { d_source, d_target })
    }

    /// `P g P^T`: the source Gram placed in the top-left block of a
    /// `d_T x d_T` zero matrix.
    pub fn embed_gram(&self, gram: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d_target, self.d_target);
        out.view_mut((0, 0), (self.d_source, self.d_source))
            .copy_from(gram);
        out
    }

    /// `P v`: append `d_T - d_S` zeros.
    pub fn pad_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.d_target);
        out.rows_mut(0, self.d_source).copy_from(v);
        out
    }

    /// `P^T v`: the first `d_S` coordinates.
    pub fn truncate(&self, v: &DVector<f64>) -> DVector<f64> {
        v.rows(0, self.d_source).into_owned()
    }
}

/// Ordinary least squares on a single dataset.
///
/// The Gram matrix is factorized rather than inverted; a rank-deficient design
/// (smallest pivot below `1e-10` of the largest) is rejected.
pub fn fit_ols(data: &Dataset) -> Result<FittedModel> {
    let gram = data.gram();
    let rhs = data.x().transpose() * data.y();
    let theta = linalg::solve_spd(gram, &rhs, "least-squares Gram matrix")?;
    Ok(FittedModel {
        theta,
        shift: DVector::zeros(data.d()),
        kind: ModelKind::Ols,
    })
}

/// Residual sum of squares divided by `n - d`.
pub fn estimate_noise_variance(data: &Dataset, model: &FittedModel) -> Result<f64> {
    if data.n() <= data.d() {
        return Err(Error::DegenerateDof {
            n: data.n(),
            d: data.d(),
        });
    }
    let residuals = data.y() - model.predict_all(data.x())?;
    Ok(residuals.norm_squared() / (data.n() - data.d()) as f64)
}

/// Sample mean of the new target columns (`j >= d_source`), zero elsewhere.
fn sample_mean_shift(target: &Dataset, d_source: usize) -> DVector<f64> {
    let mut shift = DVector::zeros(target.d());
    for j in d_source..target.d() {
        shift[j] = target.x().column(j).mean();
    }
    shift
}

fn shifted_design(x: &DMatrix<f64>, shift: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row -= shift.transpose();
    }
    out
}

/// The data-pooling estimator.
///
/// Centres the new target columns by their sample mean, estimates
/// inverse-variance weights from per-dataset least-squares residuals when none
/// are supplied, and solves the pooled normal equations. Both the weights
/// actually used and the stored shift are returned with the model.
pub fn fit_data_pooling(
    source: &Dataset,
    target: &Dataset,
    weights: Option<PoolingWeights>,
) -> Result<(FittedModel, PoolingWeights)> {
    if source.d() >= target.d() {
        return Err(Error::DimensionMismatch {
            what: "source width (need d_S < d_T)",
            expected: target.d(),
            actual: source.d(),
        });
    }
    if target.d_hist() != source.d() {
        return Err(Error::DimensionMismatch {
            what: "target d_hist (must equal the source width)",
            expected: source.d(),
            actual: target.d_hist(),
        });
    }
    let shift = sample_mean_shift(target, source.d());
    fit_pooled(source, target, weights, &shift)
}

/// Data pooling with a caller-chosen shift vector (zeros on the historical
/// coordinates). A zero shift fits the raw designs; passing the true mean of
/// the new features isolates the cost of estimating it. Unlike
/// [`fit_data_pooling`] this accepts `d_S == d_T`, in which case the padding
/// map is the identity and the new-column shift is empty.
pub fn fit_data_pooling_with_shift(
    source: &Dataset,
    target: &Dataset,
    weights: Option<PoolingWeights>,
    shift: &DVector<f64>,
) -> Result<(FittedModel, PoolingWeights)> {
    if source.d() > target.d() {
        return Err(Error::DimensionMismatch {
            what: "source width (need d_S <= d_T)",
            expected: target.d(),
            actual: source.d(),
        });
    }
    if shift.len() != target.d() {
        return Err(Error::DimensionMismatch {
            what: "shift vector length",
            expected: target.d(),
            actual: shift.len(),
        });
    }
    if shift.rows(0, source.d()).iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidSpec(
            "shift must be zero on the historical coordinates".into(),
        ));
    }
    fit_pooled(source, target, weights, shift)
}

fn fit_pooled(
    source: &Dataset,
    target: &Dataset,
    weights: Option<PoolingWeights>,
    shift: &DVector<f64>,
) -> Result<(FittedModel, PoolingWeights)> {
    let xt = shifted_design(target.x(), shift);
    let weights = match weights {
        Some(w) => {
            PoolingWeights::new(w.alpha_source, w.alpha_target)?;
            w
        }
        None => {
            let source_fit = fit_ols(source)?;
            let s2_source = estimate_noise_variance(source, &source_fit)?;
            let shifted_target = Dataset::new(xt.clone(), target.y().clone(), target.d_hist())?;
            let target_fit = fit_ols(&shifted_target)?;
            let s2_target = estimate_noise_variance(&shifted_target, &target_fit)?;
            PoolingWeights::from_variances(s2_source, s2_target)
        }
    };
    let pad = PaddingMap::new(source.d(), target.d())?;
    let m = pad.embed_gram(&source.gram()) * weights.alpha_source
        + xt.transpose() * &xt * weights.alpha_target;
    let rhs = pad.pad_vector(&(source.x().transpose() * source.y())) * weights.alpha_source
        + xt.transpose() * target.y() * weights.alpha_target;
    let theta = linalg::solve_spd(m, &rhs, "pooled Gram matrix")?;
    Ok((
        FittedModel {
            theta,
            shift: shift.clone(),
            kind: ModelKind::DataPooling,
        },
        weights,
    ))
}

/// Covariance of the pooled estimator for fixed designs:
/// `M^-1 (a_S^2 s_S^2 P G_S P^T + a_T^2 s^2 G_T) M^-1`.
pub fn analytic_variance_dp(
    source_gram: &DMatrix<f64>,
    target_gram: &DMatrix<f64>,
    weights: &PoolingWeights,
    sigma2: f64,
    sigma2_source: f64,
) -> Result<DMatrix<f64>> {
    let pad = PaddingMap::new(source_gram.nrows(), target_gram.nrows())?;
    let padded = pad.embed_gram(source_gram);
    let m = &padded * weights.alpha_source + target_gram * weights.alpha_target;
    let inner = padded * (weights.alpha_source * weights.alpha_source * sigma2_source)
        + target_gram * (weights.alpha_target * weights.alpha_target * sigma2);
    linalg::sandwich_inverse(m, &inner, "pooled Gram matrix")
}

/// The pooled objective evaluated at an arbitrary coefficient vector, with the
/// given shift applied to the target design.
pub fn pooling_loss(
    source: &Dataset,
    target: &Dataset,
    weights: &PoolingWeights,
    shift: &DVector<f64>,
    theta: &DVector<f64>,
) -> f64 {
    let theta_hist = theta.rows(0, source.d()).into_owned();
    let source_res = source.y() - source.x() * theta_hist;
    let xt = shifted_design(target.x(), shift);
    let target_res = target.y() - xt * theta;
    weights.alpha_source * source_res.norm_squared()
        + weights.alpha_target * target_res.norm_squared()
}

/// Mean squared prediction error on a dataset.
pub fn mse(model: &FittedModel, data: &Dataset) -> Result<f64> {
    let residuals = data.y() - model.predict_all(data.x())?;
    Ok(residuals.norm_squared() / data.n() as f64)
}

/// Root mean squared prediction error.
pub fn rmse(model: &FittedModel, data: &Dataset) -> Result<f64> {
    Ok(mse(model, data)?.sqrt())
}
