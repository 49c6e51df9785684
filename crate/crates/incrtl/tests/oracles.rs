//! Monte Carlo oracles for the estimator moments.
//!
//! The covariance formula and the gain formula describe fixed designs, so
//! these tests draw the design matrices once and re-sample only the labels
//! (including the unobserved new-feature values entering the source labels).

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use incrtl::estimators::{
    analytic_variance_dp, fit_data_pooling_with_shift, fit_ols, Dataset, PoolingWeights,
};
use incrtl::gain::analytic_gain;
use incrtl::simgen::{self, GeneratorKind, GeneratorSpec};

fn randn(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn randn_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

#[test]
fn noise_variance_estimate_concentrates() {
    // sigma^2 = 1 and ten thousand rows: the residual variance estimate must
    // land within 5% of the truth.
    let spec = GeneratorSpec::new(GeneratorKind::BaselineLinear, 10, 10000, 10, 2024);
    let (_, target, _) = simgen::generate(&spec).unwrap();
    let model = fit_ols(&target).unwrap();
    let est = incrtl::estimators::estimate_noise_variance(&target, &model).unwrap();
    assert!((0.95..=1.05).contains(&est), "estimate {est}");
}

/// Designs drawn once; labels re-sampled per replicate. Returns the pooled
/// and baseline coefficient draws.
struct FixedDesignStudy {
    source_x: DMatrix<f64>,
    target_x: DMatrix<f64>,
    theta: DVector<f64>,
    theta_new: f64,
    sigma: f64,
    weights: PoolingWeights,
}

impl FixedDesignStudy {
    fn sample(&self, seed: u64) -> (DVector<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_s, d_s) = self.source_x.shape();
        let (n_t, d_t) = self.target_x.shape();
        let theta_hist = self.theta.rows(0, d_s).into_owned();
        let hidden = randn_vec(&mut rng, n_s);
        let ys = &self.source_x * theta_hist
            + hidden * self.theta_new
            + randn_vec(&mut rng, n_s) * self.sigma;
        let yt = &self.target_x * &self.theta + randn_vec(&mut rng, n_t) * self.sigma;
        let source = Dataset::new(self.source_x.clone(), ys, d_s).unwrap();
        let target = Dataset::new(self.target_x.clone(), yt, d_s).unwrap();
        let baseline = fit_ols(&target).unwrap();
        let (pooled, _) = fit_data_pooling_with_shift(
            &source,
            &target,
            Some(self.weights),
            &DVector::zeros(d_t),
        )
        .unwrap();
        (baseline.theta, pooled.theta)
    }
}

#[test]
fn pooled_estimator_moments_match_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(314159);
    let (n_s, n_t) = (100, 10);
    let sigma = 1.0;
    let theta = DVector::from_column_slice(&[2.0, 2.0, -2.0]);
    let theta_new = theta[2];
    let sigma2_s = sigma * sigma + theta_new * theta_new;
    // Intercept column plus one Gaussian regressor for the source, one more
    // new column for the target.
    let mut source_x = randn(&mut rng, n_s, 2);
    let mut target_x = randn(&mut rng, n_t, 3);
    for i in 0..n_s {
        source_x[(i, 0)] = 1.0;
    }
    for i in 0..n_t {
        target_x[(i, 0)] = 1.0;
    }
    let weights = PoolingWeights::from_variances(sigma2_s, sigma * sigma);
    let study = FixedDesignStudy {
        source_x: source_x.clone(),
        target_x: target_x.clone(),
        theta: theta.clone(),
        theta_new,
        sigma,
        weights,
    };

    let n_rep = 20000usize;
    let draws: Vec<(DVector<f64>, DVector<f64>)> = (0..n_rep)
        .into_par_iter()
        .map(|r| study.sample(simgen::derive_seed(8899, r as u64)))
        .collect();

    let gram_s = source_x.transpose() * &source_x;
    let gram_t = target_x.transpose() * &target_x;
    let expected =
        analytic_variance_dp(&gram_s, &gram_t, &weights, sigma * sigma, sigma2_s).unwrap();

    // Unbiasedness: each coordinate within 4 standard errors of the truth.
    let mean = draws
        .iter()
        .fold(DVector::zeros(3), |acc, (_, p)| acc + p)
        / n_rep as f64;
    for i in 0..3 {
        let se = (expected[(i, i)] / n_rep as f64).sqrt();
        assert!(
            (mean[i] - theta[i]).abs() < 4.0 * se,
            "coordinate {i}: mean {} vs {} (se {se})",
            mean[i],
            theta[i]
        );
    }

    // Covariance: entrywise within 5% of the natural per-entry scale.
    let mut cov = DMatrix::zeros(3, 3);
    for (_, p) in &draws {
        let d = p - &mean;
        cov += &d * d.transpose();
    }
    cov /= (n_rep - 1) as f64;
    for i in 0..3 {
        for j in 0..3 {
            let scale = (expected[(i, i)] * expected[(j, j)]).sqrt();
            assert!(
                (cov[(i, j)] - expected[(i, j)]).abs() < 0.05 * scale,
                "entry ({i},{j}): mc {} analytic {}",
                cov[(i, j)],
                expected[(i, j)]
            );
        }
    }

    // Gain formula: Monte Carlo generalization-error difference at ten fixed
    // inputs against the quadratic form, within 4 Monte Carlo standard errors.
    let mut xrng = ChaCha8Rng::seed_from_u64(4242);
    for _ in 0..10 {
        let mut x = randn_vec(&mut xrng, 3);
        x[0] = 1.0;
        let analytic =
            analytic_gain(&x, &gram_s, &gram_t, &weights, sigma * sigma, sigma2_s).unwrap();
        let diffs: Vec<f64> = draws
            .iter()
            .map(|(b, p)| {
                let eb = x.dot(&(&theta - b));
                let ep = x.dot(&(&theta - p));
                eb * eb - ep * ep
            })
            .collect();
        let mc = diffs.iter().sum::<f64>() / n_rep as f64;
        let var = diffs.iter().map(|d| (d - mc) * (d - mc)).sum::<f64>() / (n_rep - 1) as f64;
        let se = (var / n_rep as f64).sqrt();
        assert!(
            (mc - analytic).abs() < 4.0 * se,
            "x = {x:?}: mc {mc} analytic {analytic} se {se}"
        );
    }
}

#[test]
fn orthonormal_design_variances() {
    // Designs with orthonormal columns make the covariance diagonal with the
    // harmonic-mean entry on the shared coordinates.
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    let (n_s, d_s) = (50, 2);
    let (n_t, d_t) = (10, 3);
    let source_x = randn(&mut rng, n_s, d_s).qr().q();
    let target_x = randn(&mut rng, n_t, d_t).qr().q();
    let sigma = 1.0;
    let theta = DVector::from_column_slice(&[1.0, -1.0, 2.0]);
    let theta_new = theta[2];
    let sigma2_s = sigma * sigma + theta_new * theta_new;
    let weights = PoolingWeights::from_variances(sigma2_s, sigma * sigma);
    let study = FixedDesignStudy {
        source_x,
        target_x,
        theta,
        theta_new,
        sigma,
        weights,
    };
    let n_rep = 20000usize;
    let draws: Vec<DVector<f64>> = (0..n_rep)
        .into_par_iter()
        .map(|r| study.sample(simgen::derive_seed(5150, r as u64)).1)
        .collect();
    let mean = draws.iter().fold(DVector::zeros(d_t), |acc, p| acc + p) / n_rep as f64;
    let pooled_var = sigma * sigma * sigma2_s / (sigma * sigma + sigma2_s);
    for i in 0..d_t {
        let mc: f64 = draws
            .iter()
            .map(|p| (p[i] - mean[i]) * (p[i] - mean[i]))
            .sum::<f64>()
            / (n_rep - 1) as f64;
        let expected = if i < d_s { pooled_var } else { sigma * sigma };
        assert!(
            (mc - expected).abs() < 0.03 * expected,
            "coordinate {i}: mc {mc} expected {expected}"
        );
    }
}

#[test]
fn homogeneous_source_cross_check() {
    // With a zero coefficient on the new feature and equal noise the source
    // is simply more data for the shared coordinates; the empirical gain must
    // agree with the averaged quadratic form.
    let mut rng = ChaCha8Rng::seed_from_u64(985);
    let (n_s, n_t, n_test) = (60, 12, 500);
    let sigma = 1.0;
    let theta = DVector::from_column_slice(&[2.0, 2.0, 0.0]);
    let mut source_x = randn(&mut rng, n_s, 2);
    let mut target_x = randn(&mut rng, n_t, 3);
    let mut test_x = randn(&mut rng, n_test, 3);
    for i in 0..n_s {
        source_x[(i, 0)] = 1.0;
    }
    for i in 0..n_t {
        target_x[(i, 0)] = 1.0;
    }
    for i in 0..n_test {
        test_x[(i, 0)] = 1.0;
    }
    let weights = PoolingWeights::from_variances(sigma * sigma, sigma * sigma);
    let study = FixedDesignStudy {
        source_x: source_x.clone(),
        target_x: target_x.clone(),
        theta: theta.clone(),
        theta_new: 0.0,
        sigma,
        weights,
    };
    let n_rep = 4000usize;
    let gains: Vec<f64> = (0..n_rep)
        .into_par_iter()
        .map(|r| {
            let (b, p) = study.sample(simgen::derive_seed(31337, r as u64));
            let mut total = 0.0;
            for i in 0..n_test {
                let x = test_x.row(i).transpose();
                let eb = x.dot(&(&theta - &b));
                let ep = x.dot(&(&theta - &p));
                total += eb * eb - ep * ep;
            }
            total / n_test as f64
        })
        .collect();
    let mc = gains.iter().sum::<f64>() / n_rep as f64;
    let var = gains.iter().map(|g| (g - mc) * (g - mc)).sum::<f64>() / (n_rep - 1) as f64;
    let se = (var / n_rep as f64).sqrt();

    let gram_s = source_x.transpose() * &source_x;
    let gram_t = target_x.transpose() * &target_x;
    let mut analytic_total = 0.0;
    for i in 0..n_test {
        let x = test_x.row(i).transpose();
        analytic_total +=
            analytic_gain(&x, &gram_s, &gram_t, &weights, sigma * sigma, sigma * sigma).unwrap();
    }
    let analytic = analytic_total / n_test as f64;
    assert!(
        (mc - analytic).abs() < 3.0 * se,
        "mc {mc} analytic {analytic} se {se}"
    );
    assert!(analytic > 0.0);
}
