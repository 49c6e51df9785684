//! Transfer gain of the pooled estimator over target-only least squares.
//!
//! For an input row `x` the gain is the difference of generalization errors,
//! which for two unbiased estimators reduces to a quadratic form
//! `G(x) = x (Var(theta_T) - Var(theta_a)) x^T`. With inverse-variance
//! weights the difference matrix simplifies to `H = sigma^2 G_T^-1 - M^-1`,
//! which is positive semidefinite — pooling cannot lose in expectation. The
//! certificate below checks that numerically through the smallest eigenvalue
//! of `H`.
//!
//! The empirical counterpart re-samples training data `N` times, fits both
//! estimators, and averages the difference of mean squared residuals on one
//! fixed held-out test set.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    analytic_variance_dp, fit_data_pooling, fit_data_pooling_with_shift, fit_ols, mse, Dataset,
    PaddingMap, PoolingWeights,
};
use crate::linalg::{self, SpdFactor};
use crate::simgen::{self, GeneratorSpec};

/// How the pooled estimator is computed inside a gain replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMode {
    /// Known noise variances, raw (unshifted) designs.
    AnalyticWeights,
    /// Weights estimated from per-dataset residuals, raw designs.
    EstimatedWeights,
    /// Estimated weights, new columns shifted by their population mean.
    TrueMeanShift,
    /// Estimated weights, new columns shifted by the target sample mean.
    SampleMeanShift,
}

impl std::fmt::Display for GainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GainMode::AnalyticWeights => "analytic-weights",
            GainMode::EstimatedWeights => "estimated-weights",
            GainMode::TrueMeanShift => "true-mean-shift",
            GainMode::SampleMeanShift => "sample-mean-shift",
        };
        f.write_str(s)
    }
}

/// Replicate-level empirical transfer gains and their summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub mean_gain: f64,
    pub std_gain: f64,
    pub per_replicate: Vec<f64>,
    pub n_target: usize,
    pub mode: GainMode,
    pub seed: u64,
}

impl GainReport {
    pub fn standard_error(&self) -> f64 {
        self.std_gain / (self.per_replicate.len() as f64).sqrt()
    }
}

/// The variance-difference matrix `H` and its smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCertificate {
    pub h: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl GainCertificate {
    /// Non-negativity at tolerance `-1e-8`, scaled by the magnitude of `H`
    /// when its largest entry exceeds one.
    pub fn is_non_negative(&self) -> bool {
        let scale = linalg::max_abs_entry(&self.h).max(1.0);
        self.min_eigenvalue >= -1e-8 * scale
    }
}

/// The quadratic form `x [sigma^2 G_T^-1 - Var(theta_a)] x^T` for arbitrary
/// positive weights.
pub fn analytic_gain(
    x: &DVector<f64>,
    source_gram: &DMatrix<f64>,
    target_gram: &DMatrix<f64>,
    weights: &PoolingWeights,
    sigma2: f64,
    sigma2_source: f64,
) -> Result<f64> {
    if x.len() != target_gram.nrows() {
        return Err(Error::DimensionMismatch {
            what: "gain input width",
            expected: target_gram.nrows(),
            actual: x.len(),
        });
    }
    let target_factor = SpdFactor::new(target_gram.clone(), "target Gram matrix")?;
    let ols_term = sigma2 * x.dot(&target_factor.solve_vec(x));
    let var = analytic_variance_dp(source_gram, target_gram, weights, sigma2, sigma2_source)?;
    Ok(ols_term - x.dot(&(&var * x)))
}

/// `H = sigma^2 G_T^-1 - M^-1` under inverse-variance weights, plus its
/// smallest eigenvalue. `H` is positive semidefinite in exact arithmetic.
pub fn gain_certificate(
    source_gram: &DMatrix<f64>,
    target_gram: &DMatrix<f64>,
    sigma2: f64,
    sigma2_source: f64,
) -> Result<GainCertificate> {
    if !(sigma2 > 0.0 && sigma2.is_finite() && sigma2_source > 0.0 && sigma2_source.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "noise variances must be positive, got sigma2 = {sigma2}, sigma2_source = {sigma2_source}"
        )));
    }
    let pad = PaddingMap::new(source_gram.nrows(), target_gram.nrows())?;
    let m = pad.embed_gram(source_gram) / sigma2_source + target_gram / sigma2;
    let target_inv = SpdFactor::new(target_gram.clone(), "target Gram matrix")?.inverse();
    let m_inv = SpdFactor::new(m, "pooled Gram matrix")?.inverse();
    let h = linalg::symmetrize(&(target_inv * sigma2 - m_inv));
    let min_eigenvalue = linalg::min_eigenvalue(&h);
    Ok(GainCertificate { h, min_eigenvalue })
}

/// Configuration of one empirical-gain experiment: the training-data
/// generator, the number of replicates, and how the pooled estimator is
/// computed in each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGainSpec {
    pub generator: GeneratorSpec,
    pub replicates: usize,
    pub mode: GainMode,
    pub seed: u64,
}

// Namespace for replicate seed derivation, away from the generator roles.
const REPLICATE_STREAM: u64 = 0xE9;

fn replicate_seed(seed: u64, replicate: usize, attempt: u64) -> u64 {
    simgen::derive_seed(
        simgen::derive_seed(seed, REPLICATE_STREAM),
        (replicate as u64) * 2 + attempt,
    )
}

fn run_replicate(spec: &EmpiricalGainSpec, test: &Dataset, seed: u64) -> Result<f64> {
    let mut generator = spec.generator.clone();
    generator.seed = seed;
    let (source, target, _) = simgen::generate(&generator)?;
    let baseline = fit_ols(&target)?;
    let zero_shift = DVector::zeros(target.d());
    let pooled = match spec.mode {
        GainMode::AnalyticWeights => {
            fit_data_pooling_with_shift(&source, &target, Some(generator.true_weights()), &zero_shift)?.0
        }
        GainMode::EstimatedWeights => {
            fit_data_pooling_with_shift(&source, &target, None, &zero_shift)?.0
        }
        GainMode::TrueMeanShift => {
            fit_data_pooling_with_shift(&source, &target, None, &generator.new_feature_means())?.0
        }
        GainMode::SampleMeanShift => fit_data_pooling(&source, &target, None)?.0,
    };
    Ok(mse(&baseline, test)? - mse(&pooled, test)?)
}

/// Run `N` replicates of the empirical transfer gain against a fixed test set.
///
/// Each replicate draws fresh source and target data from an independent
/// seeded stream, so the result is deterministic regardless of execution
/// order and replicates may run in parallel. A replicate whose draw cannot be
/// fitted (rank-deficient design) is retried once with a fresh sample; more
/// than 1% failed first attempts abort the experiment.
pub fn empirical_gain(spec: &EmpiricalGainSpec, test: &Dataset) -> Result<GainReport> {
    if spec.replicates == 0 {
        return Err(Error::InvalidSpec("need at least one replicate".into()));
    }
    if test.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    spec.generator.validate()?;
    if test.d() != spec.generator.d_target() {
        return Err(Error::DimensionMismatch {
            what: "test set width",
            expected: spec.generator.d_target(),
            actual: test.d(),
        });
    }
    let outcomes: Vec<(f64, bool)> = (0..spec.replicates)
        .into_par_iter()
        .map(|replicate| {
            match run_replicate(spec, test, replicate_seed(spec.seed, replicate, 0)) {
                Ok(g) => Ok((g, false)),
                Err(_) => match run_replicate(spec, test, replicate_seed(spec.seed, replicate, 1))
                {
                    Ok(g) => Ok((g, true)),
                    Err(e) => Err(Error::ReplicateFailed {
                        replicate,
                        source: Box::new(e),
                    }),
                },
            }
        })
        .collect::<Result<_>>()?;
    let failures = outcomes.iter().filter(|(_, retried)| *retried).count();
    if failures as f64 > 0.01 * spec.replicates as f64 {
        return Err(Error::TooManyReplicateFailures {
            failed: failures,
            total: spec.replicates,
        });
    }
    let per_replicate: Vec<f64> = outcomes.into_iter().map(|(g, _)| g).collect();
    let mean_gain = per_replicate.iter().sum::<f64>() / per_replicate.len() as f64;
    let std_gain = if per_replicate.len() > 1 {
        (per_replicate
            .iter()
            .map(|g| (g - mean_gain) * (g - mean_gain))
            .sum::<f64>()
            / (per_replicate.len() - 1) as f64)
            .sqrt()
    } else {
        0.0
    };
    Ok(GainReport {
        mean_gain,
        std_gain,
        per_replicate,
        n_target: spec.generator.n_target,
        mode: spec.mode,
        seed: spec.seed,
    })
}

/// Write gain reports as `n_T,mode,mean_gain,std_gain,n_replicates,seed` rows.
pub fn write_gain_csv(path: &Path, reports: &[GainReport]) -> Result<()> {
    let mut out = String::from("n_T,mode,mean_gain,std_gain,n_replicates,seed\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n_target,
            r.mode,
            r.mean_gain,
            r.std_gain,
            r.per_replicate.len(),
            r.seed
        ));
    }
    crate::bench::csv::write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::GeneratorKind;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_gram(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
        let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.transpose() * x
    }

    #[test]
    fn gain_at_zero_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gs = random_gram(&mut rng, 30, 2);
        let gt = random_gram(&mut rng, 20, 4);
        let w = PoolingWeights::from_variances(3.0, 1.0);
        let g = analytic_gain(&DVector::zeros(4), &gs, &gt, &w, 1.0, 3.0).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn gain_orthogonal_designs_closed_form() {
        let (d_s, d_t) = (3, 5);
        let (sigma2, sigma2_s) = (1.3, 4.2);
        let w = PoolingWeights::from_variances(sigma2_s, sigma2);
        let gs = DMatrix::identity(d_s, d_s);
        let gt = DMatrix::identity(d_t, d_t);
        for i in 0..d_t {
            let mut e = DVector::zeros(d_t);
            e[i] = 1.0;
            let g = analytic_gain(&e, &gs, &gt, &w, sigma2, sigma2_s).unwrap();
            let expected = if i < d_s {
                sigma2 * sigma2 / (sigma2 + sigma2_s)
            } else {
                0.0
            };
            assert!(
                (g - expected).abs() < 1e-12,
                "coordinate {i}: got {g}, expected {expected}"
            );
        }
    }

    #[test]
    fn certificate_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let gs = random_gram(&mut rng, 50, 3);
        let gt = random_gram(&mut rng, 10, 5);
        let cert = gain_certificate(&gs, &gt, 1.0, 5.0).unwrap();
        assert!(cert.is_non_negative(), "min eig {}", cert.min_eigenvalue);
    }

    #[test]
    fn certificate_orthogonal_designs_diagonal() {
        let (d_s, d_t) = (2, 4);
        let (sigma2, sigma2_s) = (0.9, 2.5);
        let cert = gain_certificate(
            &DMatrix::identity(d_s, d_s),
            &DMatrix::identity(d_t, d_t),
            sigma2,
            sigma2_s,
        )
        .unwrap();
        let expected = sigma2 * sigma2 / (sigma2 + sigma2_s);
        for i in 0..d_t {
            for j in 0..d_t {
                let want = if i == j && i < d_s {
                    expected
                } else if i == j {
                    0.0
                } else {
                    0.0
                };
                assert!((cert.h[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn certificate_matches_low_rank_update_identity() {
        // Independent route: H = A^-1 P (C^-1 + P^T A^-1 P)^-1 P^T A^-1 with
        // A = G_T / sigma^2, C = G_S / sigma_S^2 and P the padding map,
        // computed here with plain explicit inverses.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let (d_s, d_t) = (3, 5);
            let gs = random_gram(&mut rng, 40, d_s);
            let gt = random_gram(&mut rng, 12, d_t);
            let sigma2 = 0.5 + rng.random::<f64>();
            let sigma2_s = sigma2 + rng.random::<f64>() * 3.0;
            let cert = gain_certificate(&gs, &gt, sigma2, sigma2_s).unwrap();

            let a = &gt / sigma2;
            let c = &gs / sigma2_s;
            let a_inv = a.try_inverse().unwrap();
            let c_inv = c.try_inverse().unwrap();
            let mut p = DMatrix::zeros(d_t, d_s);
            for i in 0..d_s {
                p[(i, i)] = 1.0;
            }
            let middle = (c_inv + p.transpose() * &a_inv * &p).try_inverse().unwrap();
            let woodbury = &a_inv * &p * middle * p.transpose() * &a_inv;
            assert!((&cert.h - woodbury).amax() < 1e-9);
        }
    }

    #[test]
    fn variance_identity_links_certificate_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gs = random_gram(&mut rng, 60, 3);
        let gt = random_gram(&mut rng, 15, 5);
        let (sigma2, sigma2_s) = (1.1, 3.7);
        let w = PoolingWeights::from_variances(sigma2_s, sigma2);
        let var = analytic_variance_dp(&gs, &gt, &w, sigma2, sigma2_s).unwrap();
        let cert = gain_certificate(&gs, &gt, sigma2, sigma2_s).unwrap();
        let ols_var = gt.try_inverse().unwrap() * sigma2;
        assert!((ols_var - cert.h - var).amax() < 1e-10);
    }

    #[test]
    fn empirical_gain_is_deterministic() {
        let generator = GeneratorSpec::new(GeneratorKind::BaselineLinear, 50, 8, 200, 7);
        let (_, _, test) = simgen::generate(&generator).unwrap();
        let spec = EmpiricalGainSpec {
            generator,
            replicates: 25,
            mode: GainMode::EstimatedWeights,
            seed: 11,
        };
        let a = empirical_gain(&spec, &test).unwrap();
        let b = empirical_gain(&spec, &test).unwrap();
        assert_eq!(a.per_replicate, b.per_replicate);
        let mean = a.per_replicate.iter().sum::<f64>() / a.per_replicate.len() as f64;
        assert!((a.mean_gain - mean).abs() < 1e-12);
    }

    #[test]
    fn empirical_gain_positive_for_small_target() {
        let generator = GeneratorSpec::new(GeneratorKind::BaselineLinear, 100, 5, 1000, 3);
        let (_, _, test) = simgen::generate(&generator).unwrap();
        let spec = EmpiricalGainSpec {
            generator,
            replicates: 200,
            mode: GainMode::EstimatedWeights,
            seed: 5,
        };
        let report = empirical_gain(&spec, &test).unwrap();
        assert!(report.mean_gain > 0.0, "mean gain {}", report.mean_gain);
    }

    #[test]
    fn empirical_gain_true_weights_not_negative() {
        let base = GeneratorSpec::new(GeneratorKind::BaselineLinear, 100, 5, 1000, 17);
        let (_, _, test) = simgen::generate(&base).unwrap();
        for n_t in [5usize, 15, 30] {
            let mut generator = base.clone();
            generator.n_target = n_t;
            let spec = EmpiricalGainSpec {
                generator,
                replicates: 200,
                mode: GainMode::AnalyticWeights,
                seed: 23,
            };
            let report = empirical_gain(&spec, &test).unwrap();
            assert!(
                report.mean_gain >= -2.0 * report.standard_error(),
                "n_T = {n_t}: mean {} se {}",
                report.mean_gain,
                report.standard_error()
            );
        }
    }
}
