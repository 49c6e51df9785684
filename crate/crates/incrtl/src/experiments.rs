//! Drivers for the bundled simulation studies.
//!
//! Each driver fixes one held-out test set, re-samples training data over
//! many replicates, and records either the empirical transfer gain (weight
//! estimation and mean-shift studies) or per-method test MSE (correlation,
//! distribution-shift and interaction studies). All replicate streams are
//! seeded, so results are reproducible bit for bit.

use std::path::Path;

use rayon::prelude::*;

use crate::bench::{csv::write_atomic, Method};
use crate::dsft::{fit_dsft_pipeline, DsftConfig};
use crate::error::{Error, Result};
use crate::estimators::{fit_data_pooling, fit_ols, mse, Dataset};
use crate::gain::{empirical_gain, EmpiricalGainSpec, GainMode, GainReport};
use crate::simgen::{self, derive_seed, GeneratorKind, GeneratorSpec};

const TEST_STREAM: u64 = 0x7E57;
const POINT_STREAM: u64 = 0xA0;
const REPLICATE_STREAM: u64 = 0xB0;

/// Shared knobs of the gain experiments (weight estimation, mean shift).
#[derive(Debug, Clone)]
pub struct GainExperimentParams {
    pub n_source: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub n_target_grid: Vec<usize>,
    pub seed: u64,
}

impl GainExperimentParams {
    pub fn defaults(seed: u64) -> Self {
        Self {
            n_source: 100,
            n_test: 1000,
            replicates: 200,
            n_target_grid: vec![5, 10, 15, 20, 25, 30],
            seed,
        }
    }
}

fn gain_sweep(
    kind: GeneratorKind,
    modes: &[GainMode],
    params: &GainExperimentParams,
) -> Result<Vec<GainReport>> {
    let base = GeneratorSpec::new(kind, params.n_source, 5, params.n_test, 0);
    let mut test_spec = base.clone();
    test_spec.seed = derive_seed(params.seed, TEST_STREAM);
    let (_, _, test) = simgen::generate(&test_spec)?;
    let mut reports = Vec::new();
    for (point, &n_target) in params.n_target_grid.iter().enumerate() {
        // One seed per grid point, shared by all modes so they see the same
        // replicate draws.
        let point_seed = derive_seed(params.seed, POINT_STREAM + point as u64);
        for &mode in modes {
            let mut generator = base.clone();
            generator.n_target = n_target;
            let spec = EmpiricalGainSpec {
                generator,
                replicates: params.replicates,
                mode,
                seed: point_seed,
            };
            reports.push(empirical_gain(&spec, &test)?);
        }
    }
    Ok(reports)
}

/// Gain with known versus estimated noise variances, swept over the target
/// size. New inputs are centred at zero here, so no shift is applied.
pub fn weight_estimation_experiment(params: &GainExperimentParams) -> Result<Vec<GainReport>> {
    gain_sweep(
        GeneratorKind::BaselineLinear,
        &[GainMode::AnalyticWeights, GainMode::EstimatedWeights],
        params,
    )
}

/// Gain with the new input centred by its true mean versus the target sample
/// mean, on data where that input is not zero-centred.
pub fn mean_shift_experiment(params: &GainExperimentParams) -> Result<Vec<GainReport>> {
    gain_sweep(
        GeneratorKind::ShiftedNewFeature,
        &[GainMode::TrueMeanShift, GainMode::SampleMeanShift],
        params,
    )
}

/// One point of a per-method error sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodErrorPoint {
    /// The swept value (correlation, shift size, or target size).
    pub x: f64,
    pub method: Method,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub per_replicate: Vec<f64>,
}

impl MethodErrorPoint {
    pub fn standard_error(&self) -> f64 {
        self.std_mse / (self.per_replicate.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SweepExperimentParams {
    pub n_source: usize,
    pub n_target: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub grid: Vec<f64>,
    pub seed: u64,
}

fn fit_and_score(
    methods: &[Method],
    source: &Dataset,
    target: &Dataset,
    test: &Dataset,
) -> Result<Vec<f64>> {
    methods
        .iter()
        .map(|&m| {
            let model = match m {
                Method::Ols => fit_ols(target)?,
                Method::Dp => fit_data_pooling(source, target, None)?.0,
                Method::DsftLinear => fit_dsft_pipeline(source, target, &DsftConfig::linear())?,
                Method::DsftKernel => fit_dsft_pipeline(source, target, &DsftConfig::rbf())?,
            };
            mse(&model, test)
        })
        .collect()
}

/// Fixed test set per sweep point; fresh source/target per replicate; every
/// method scored on the same draws. Failed draws are retried once; more than
/// 1% failures abort.
fn method_error_sweep(
    base: &GeneratorSpec,
    param: &str,
    values: &[f64],
    methods: &[Method],
    replicates: usize,
) -> Result<Vec<MethodErrorPoint>> {
    let specs = simgen::sweep(base, param, values)?;
    let mut points = Vec::new();
    for (spec, &value) in specs.iter().zip(values) {
        let (_, _, test) = simgen::generate(spec)?;
        let rows: Vec<(Vec<f64>, bool)> = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let attempt = |a: u64| {
                    let mut s = spec.clone();
                    s.seed = derive_seed(spec.seed, REPLICATE_STREAM + 2 * rep as u64 + a);
                    let (source, target, _) = simgen::generate(&s)?;
                    fit_and_score(methods, &source, &target, &test)
                };
                match attempt(0) {
                    Ok(v) => Ok((v, false)),
                    Err(_) => match attempt(1) {
                        Ok(v) => Ok((v, true)),
                        Err(e) => Err(Error::ReplicateFailed {
                            replicate: rep,
                            source: Box::new(e),
                        }),
                    },
                }
            })
            .collect::<Result<_>>()?;
        let failures = rows.iter().filter(|(_, retried)| *retried).count();
        if failures as f64 > 0.01 * replicates as f64 {
            return Err(Error::TooManyReplicateFailures {
                failed: failures,
                total: replicates,
            });
        }
        for (j, &method) in methods.iter().enumerate() {
            let per_replicate: Vec<f64> = rows.iter().map(|(v, _)| v[j]).collect();
            let mean = per_replicate.iter().sum::<f64>() / per_replicate.len() as f64;
            let std = if per_replicate.len() > 1 {
                (per_replicate
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .sum::<f64>()
                    / (per_replicate.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            points.push(MethodErrorPoint {
                x: value,
                method,
                mean_mse: mean,
                std_mse: std,
                per_replicate,
            });
        }
    }
    Ok(points)
}

/// Test error of every method as the correlation between the historical and
/// the new input grows.
pub fn correlation_experiment(params: &SweepExperimentParams) -> Result<Vec<MethodErrorPoint>> {
    let mut base = GeneratorSpec::new(
        GeneratorKind::CorrelatedInputs { c: 0.0 },
        params.n_source,
        params.n_target,
        params.n_test,
        params.seed,
    );
    base.seed = params.seed;
    method_error_sweep(&base, "c", &params.grid, &params.methods, params.replicates)
}

impl SweepExperimentParams {
    pub fn correlation_defaults(seed: u64) -> Self {
        Self {
            n_source: 100,
            n_target: 8,
            n_test: 1000,
            replicates: 200,
            methods: Method::ALL.to_vec(),
            grid: (0..10).map(|i| i as f64 / 10.0).collect(),
            seed,
        }
    }

    pub fn distribution_shift_defaults(seed: u64) -> Self {
        Self {
            n_source: 200,
            n_target: 15,
            n_test: 1000,
            replicates: 200,
            methods: Method::ALL.to_vec(),
            grid: vec![0.0, 0.5, 1.0, 2.0],
            seed,
        }
    }

    pub fn interaction_defaults(seed: u64) -> Self {
        Self {
            n_source: 200,
            n_target: 20,
            n_test: 1000,
            replicates: 200,
            methods: Method::ALL.to_vec(),
            grid: vec![10.0, 15.0, 20.0, 30.0, 50.0],
            seed,
        }
    }
}

/// Mean of the new input fixed in the source domain, swept in the target
/// domain; `grid` holds the shift sizes added to the source mean.
pub fn distribution_shift_experiment(
    params: &SweepExperimentParams,
) -> Result<Vec<MethodErrorPoint>> {
    let mu_source = 1.0;
    let base = GeneratorSpec::new(
        GeneratorKind::DistributionShift {
            mu_source,
            mu_target: mu_source,
        },
        params.n_source,
        params.n_target,
        params.n_test,
        params.seed,
    );
    let mu_targets: Vec<f64> = params.grid.iter().map(|s| mu_source + s).collect();
    let mut points = method_error_sweep(
        &base,
        "mu_target",
        &mu_targets,
        &params.methods,
        params.replicates,
    )?;
    // Report the shift size rather than the raw target mean.
    for p in &mut points {
        p.x -= mu_source;
    }
    Ok(points)
}

/// Interaction-term scenario swept over the target size.
pub fn interaction_experiment(params: &SweepExperimentParams) -> Result<Vec<MethodErrorPoint>> {
    let base = GeneratorSpec::new(
        GeneratorKind::NonAdditive,
        params.n_source,
        params.n_target,
        params.n_test,
        params.seed,
    );
    method_error_sweep(&base, "n_T", &params.grid, &params.methods, params.replicates)
}

/// Plot-ready CSV: one row per (x, method) with mean, dispersion and size.
pub fn write_method_error_csv(
    path: &Path,
    x_column: &str,
    points: &[MethodErrorPoint],
    seed: u64,
) -> Result<()> {
    let mut out = format!("{x_column},method,mean_mse,std_mse,n_replicates,seed\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.x,
            p.method,
            p.mean_mse,
            p.std_mse,
            p.per_replicate.len(),
            seed
        ));
    }
    write_atomic(path, out.as_bytes())
}
