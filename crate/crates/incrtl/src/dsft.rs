//! Domain-specific feature transfer baselines.
//!
//! DSFT imputes the new feature columns of the source dataset from the
//! historical ones before a pooled least-squares fit. The mapping `W`
//! minimizes
//!
//! ```text
//! ||f(x_T_hist, W) - x_T_new||^2 + alpha * ||mean(f(x_S, W)) - mean(x_T_new)||^2
//!   + beta * ||W||^2
//! ```
//!
//! with `f` linear in the historical features (or in RBF features of them for
//! the kernel variant). The distribution-matching term is the squared
//! distance between empirical mean embeddings under a linear embedding, which
//! keeps the whole objective quadratic in `W` and solvable by one regularized
//! normal system.
//!
//! Historical features are standardized (per-column mean and scale over the
//! pooled source and target rows) inside the mapping only; the large
//! distribution weight makes the objective scale-sensitive otherwise. The
//! final stacked least-squares fit sees the original unstandardized columns.
//! Set `standardize: false` to disable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{fit_ols, Dataset, FittedModel, ModelKind};
use crate::linalg::SpdFactor;

/// Recommended weights for the distribution and ridge terms.
pub const DEFAULT_ALPHA: f64 = 1e5;
pub const DEFAULT_BETA: f64 = 1.0;

/// Cap on RBF centers; pooled rows beyond this are stride-subsampled so the
/// kernel variant stays usable on large source datasets.
const MAX_RBF_CENTERS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance over the pooled historical rows.
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    None,
    Rbf { bandwidth: Bandwidth },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsftConfig {
    /// Weight of the mean-embedding distance term.
    pub alpha: f64,
    /// Weight of the L2 penalty on `W`.
    pub beta: f64,
    pub kernel: KernelSpec,
    pub standardize: bool,
}

impl DsftConfig {
    /// Linear variant with the recommended `alpha = 1e5`, `beta = 1`.
    pub fn linear() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            kernel: KernelSpec::None,
            standardize: true,
        }
    }

    /// RBF-kernel variant with the median-heuristic bandwidth.
    pub fn rbf() -> Self {
        Self {
            kernel: KernelSpec::Rbf {
                bandwidth: Bandwidth::MedianHeuristic,
            },
            ..Self::linear()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "dsft weights must be non-negative, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if let KernelSpec::Rbf {
            bandwidth: Bandwidth::Fixed(h),
        } = self.kernel
        {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "rbf bandwidth must be positive, got {h}"
                )));
            }
        }
        Ok(())
    }
}

/// Feature transform applied to the historical block before the linear map.
#[derive(Debug, Clone, PartialEq)]
enum FeatureMap {
    Linear {
        means: DVector<f64>,
        scales: DVector<f64>,
    },
    Rbf {
        means: DVector<f64>,
        scales: DVector<f64>,
        centers: DMatrix<f64>,
        bandwidth: f64,
    },
}

impl FeatureMap {
    fn standardized(&self, hist: &DMatrix<f64>) -> DMatrix<f64> {
        let (means, scales) = match self {
            FeatureMap::Linear { means, scales } => (means, scales),
            FeatureMap::Rbf { means, scales, .. } => (means, scales),
        };
        let mut out = hist.clone();
        for j in 0..out.ncols() {
            let mut col = out.column_mut(j);
            for v in col.iter_mut() {
                *v = (*v - means[j]) / scales[j];
            }
        }
        out
    }

    fn apply(&self, hist: &DMatrix<f64>) -> DMatrix<f64> {
        let std = self.standardized(hist);
        match self {
            FeatureMap::Linear { .. } => std,
            FeatureMap::Rbf {
                centers, bandwidth, ..
            } => {
                let denom = 2.0 * bandwidth * bandwidth;
                DMatrix::from_fn(std.nrows(), centers.nrows(), |i, k| {
                    let mut dist2 = 0.0;
                    for j in 0..std.ncols() {
                        let diff = std[(i, j)] - centers[(k, j)];
                        dist2 += diff * diff;
                    }
                    (-dist2 / denom).exp()
                })
            }
        }
    }
}

/// A fitted feature-imputation mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct DsftMapping {
    features: FeatureMap,
    weights: DMatrix<f64>,
    cfg: DsftConfig,
    d_hist: usize,
}

impl DsftMapping {
    /// Mapping coefficients in feature space (`p x n_new`).
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Predicted new-feature columns for rows of historical features.
    pub fn impute(&self, hist: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if hist.ncols() != self.d_hist {
            return Err(Error::DimensionMismatch {
                what: "historical block width",
                expected: self.d_hist,
                actual: hist.ncols(),
            });
        }
        Ok(self.features.apply(hist) * &self.weights)
    }

    /// The objective value at the fitted coefficients.
    pub fn objective(&self, source: &Dataset, target: &Dataset) -> f64 {
        self.objective_at(source, target, &self.weights)
    }

    /// The objective value at arbitrary coefficients (same feature transform).
    pub fn objective_at(&self, source: &Dataset, target: &Dataset, w: &DMatrix<f64>) -> f64 {
        let phi_t = self.features.apply(&target.hist_block());
        let x_new = target.new_block();
        let fit = &phi_t * w - x_new.clone();
        let phi_s_mean = column_means(&self.features.apply(source.x()));
        let new_mean = column_means(&x_new);
        let mmd = w.transpose() * phi_s_mean - new_mean;
        fit.norm_squared() + self.cfg.alpha * mmd.norm_squared() + self.cfg.beta * w.norm_squared()
    }
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.ncols(), |j, _| m.column(j).mean())
}

fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape())
        .copy_from(bottom);
    out
}

fn build_feature_map(
    source: &Dataset,
    target: &Dataset,
    cfg: &DsftConfig,
) -> Result<FeatureMap> {
    let pooled = vstack(source.x(), &target.hist_block());
    let d = pooled.ncols();
    let (means, scales) = if cfg.standardize {
        let mut means = DVector::zeros(d);
        let mut scales = DVector::from_element(d, 1.0);
        for j in 0..d {
            let col = pooled.column(j);
            let m = col.mean();
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                / (col.len().max(2) - 1) as f64;
            let sd = var.sqrt();
            // Constant columns (the intercept) pass through unchanged so the
            // mapping keeps its affine part.
            if sd > 1e-12 {
                means[j] = m;
                scales[j] = sd;
            }
        }
        (means, scales)
    } else {
        (DVector::zeros(d), DVector::from_element(d, 1.0))
    };
    match cfg.kernel {
        KernelSpec::None => Ok(FeatureMap::Linear { means, scales }),
        KernelSpec::Rbf { bandwidth } => {
            let linear = FeatureMap::Linear {
                means: means.clone(),
                scales: scales.clone(),
            };
            let std_pooled = linear.standardized(&pooled);
            let n = std_pooled.nrows();
            let centers = if n > MAX_RBF_CENTERS {
                let mut c = DMatrix::zeros(MAX_RBF_CENTERS, d);
                for i in 0..MAX_RBF_CENTERS {
                    c.row_mut(i).copy_from(&std_pooled.row(i * n / MAX_RBF_CENTERS));
                }
                c
            } else {
                std_pooled
            };
            let h = match bandwidth {
                Bandwidth::Fixed(h) => h,
                Bandwidth::MedianHeuristic => median_pairwise_distance(&centers),
            };
            Ok(FeatureMap::Rbf {
                means,
                scales,
                centers,
                bandwidth: h,
            })
        }
    }
}

fn median_pairwise_distance(rows: &DMatrix<f64>) -> f64 {
    let n = rows.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in (i + 1)..n {
            let mut d2 = 0.0;
            for j in 0..rows.ncols() {
                let diff = rows[(i, j)] - rows[(k, j)];
                d2 += diff * diff;
            }
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = dists[dists.len() / 2];
    if med > 1e-12 {
        med
    } else {
        1.0
    }
}

fn validate_pair(source: &Dataset, target: &Dataset) -> Result<()> {
    if target.d_hist() != source.d() {
        return Err(Error::DimensionMismatch {
            what: "target d_hist (must equal the source width)",
            expected: source.d(),
            actual: target.d_hist(),
        });
    }
    if target.d() <= target.d_hist() {
        return Err(Error::DimensionMismatch {
            what: "target width (need at least one new column)",
            expected: target.d_hist() + 1,
            actual: target.d(),
        });
    }
    Ok(())
}

/// Fit the imputation mapping by solving the regularized normal system
/// `(Phi_T^T Phi_T + alpha m_S m_S^T + beta I) W = Phi_T^T X_new + alpha m_S mu^T`.
pub fn fit_dsft_mapping(
    source: &Dataset,
    target: &Dataset,
    cfg: &DsftConfig,
) -> Result<DsftMapping> {
    cfg.validate()?;
    validate_pair(source, target)?;
    let features = build_feature_map(source, target, cfg)?;
    let phi_t = features.apply(&target.hist_block());
    let x_new = target.new_block();
    let phi_s_mean = column_means(&features.apply(source.x()));
    let new_mean = column_means(&x_new);
    let p = phi_t.ncols();
    let a = phi_t.transpose() * &phi_t
        + &phi_s_mean * phi_s_mean.transpose() * cfg.alpha
        + DMatrix::identity(p, p) * cfg.beta;
    let b = phi_t.transpose() * &x_new + phi_s_mean * new_mean.transpose() * cfg.alpha;
    let factor = SpdFactor::new(a, "dsft normal system")?;
    let weights = factor.solve_mat(&b);
    Ok(DsftMapping {
        features,
        weights,
        cfg: *cfg,
        d_hist: source.d(),
    })
}

/// Impute the missing source columns, stack with the target, and fit plain
/// least squares on the combined data.
pub fn fit_dsft_pipeline(
    source: &Dataset,
    target: &Dataset,
    cfg: &DsftConfig,
) -> Result<FittedModel> {
    let mapping = fit_dsft_mapping(source, target, cfg)?;
    let imputed = mapping.impute(source.x())?;
    if imputed.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(
            "imputed source columns contain non-finite values".into(),
        ));
    }
    let mut stacked_x = DMatrix::zeros(source.n() + target.n(), target.d());
    stacked_x
        .view_mut((0, 0), (source.n(), source.d()))
        .copy_from(source.x());
    stacked_x
        .view_mut((0, source.d()), (source.n(), target.d() - source.d()))
        .copy_from(&imputed);
    stacked_x
        .view_mut((source.n(), 0), (target.n(), target.d()))
        .copy_from(target.x());
    let stacked_y = DVector::from_iterator(
        source.n() + target.n(),
        source.y().iter().chain(target.y().iter()).copied(),
    );
    let stacked = Dataset::new(stacked_x, stacked_y, target.d_hist())?;
    let mut model = fit_ols(&stacked)?;
    model.kind = match cfg.kernel {
        KernelSpec::None => ModelKind::DsftLinear,
        KernelSpec::Rbf { .. } => ModelKind::DsftKernel,
    };
    Ok(model)
}
