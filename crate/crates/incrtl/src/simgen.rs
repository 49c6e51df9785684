//! Seeded synthetic data generators for the simulation studies.
//!
//! Every generator draws from the two-input linear model
//! `y = t0 + t1*x1 + t2*x2 + sigma*w` (defaults `theta = (2, 2, -2)`,
//! `sigma = 1`), emits an explicit leading 1-column, and omits `x2` (and the
//! interaction column, where present) from the source dataset. Datasets are a
//! pure function of the spec: the source, target and test sets are drawn from
//! independent ChaCha8 streams whose seeds are derived with SplitMix64 as
//! `splitmix64(seed ^ splitmix64(role))`, role being 1, 2, 3 respectively.
//! That derivation is part of the on-disk reproducibility contract and must
//! not change.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimators::{Dataset, PoolingWeights};

/// Which simulation scenario to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    /// `x1, x2 ~ N(0,1)` independent.
    BaselineLinear,
    /// Like the baseline but `x2 ~ N(1,1)`, so the new input is not centred.
    ShiftedNewFeature,
    /// `(x1, x2)` jointly Gaussian with mean `(0,1)`, unit variances and
    /// correlation `c` in `[0,1)`.
    CorrelatedInputs { c: f64 },
    /// `x2 ~ N(mu_source,1)` in source draws, `N(mu_target,1)` in target and
    /// test draws.
    DistributionShift { mu_source: f64, mu_target: f64 },
    /// `x2 ~ N(1,1)` plus an `x1*x2` interaction column (appended last, unit
    /// coefficient added to the label) that only the target observes.
    NonAdditive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    /// Coefficients for (intercept, x1, x2).
    pub theta: DVector<f64>,
    pub sigma: f64,
    pub n_source: usize,
    pub n_target: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Coefficient of the interaction column in the non-additive scenario.
pub const INTERACTION_COEFFICIENT: f64 = 1.0;

const ROLE_SOURCE: u64 = 1;
const ROLE_TARGET: u64 = 2;
const ROLE_TEST: u64 = 3;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable derivation of independent sub-seeds (replicates, sweep points,
/// dataset roles) from one base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

impl GeneratorSpec {
    /// Spec with the default coefficients `(2, 2, -2)` and `sigma = 1`.
    pub fn new(
        kind: GeneratorKind,
        n_source: usize,
        n_target: usize,
        n_test: usize,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            theta: DVector::from_column_slice(&[2.0, 2.0, -2.0]),
            sigma: 1.0,
            n_source,
            n_target,
            n_test,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_source == 0 || self.n_target == 0 || self.n_test == 0 {
            return Err(Error::InvalidSpec("sample counts must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.theta.len() != 3 || self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSpec(
                "theta must hold 3 finite coefficients (intercept, x1, x2)".into(),
            ));
        }
        match self.kind {
            GeneratorKind::CorrelatedInputs { c } => {
                if !(0.0..1.0).contains(&c) {
                    return Err(Error::InvalidSpec(format!(
                        "correlation must lie in [0,1), got {c}"
                    )));
                }
            }
            GeneratorKind::DistributionShift {
                mu_source,
                mu_target,
            } => {
                if !mu_source.is_finite() || !mu_target.is_finite() {
                    return Err(Error::InvalidSpec("shift means must be finite".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Source width (intercept + x1).
    pub fn d_source(&self) -> usize {
        2
    }

    /// Target width; the non-additive scenario appends the interaction column.
    pub fn d_target(&self) -> usize {
        match self.kind {
            GeneratorKind::NonAdditive => 4,
            _ => 3,
        }
    }

    pub fn true_sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Effective source label noise `sigma^2 + ||theta''||^2`, the variance
    /// inflation caused by the unobserved new features.
    pub fn true_sigma2_source(&self) -> f64 {
        let t2 = self.theta[2];
        let mut extra = t2 * t2;
        if matches!(self.kind, GeneratorKind::NonAdditive) {
            extra += INTERACTION_COEFFICIENT * INTERACTION_COEFFICIENT;
        }
        self.true_sigma2() + extra
    }

    pub fn true_weights(&self) -> PoolingWeights {
        PoolingWeights::from_variances(self.true_sigma2_source(), self.true_sigma2())
    }

    /// Population means of the target columns on the new coordinates, zero on
    /// the historical ones — directly usable as a true-mean shift vector.
    pub fn new_feature_means(&self) -> DVector<f64> {
        let mut shift = DVector::zeros(self.d_target());
        shift[2] = match self.kind {
            GeneratorKind::BaselineLinear => 0.0,
            GeneratorKind::ShiftedNewFeature | GeneratorKind::NonAdditive => 1.0,
            GeneratorKind::CorrelatedInputs { .. } => 1.0,
            GeneratorKind::DistributionShift { mu_target, .. } => mu_target,
        };
        if matches!(self.kind, GeneratorKind::NonAdditive) {
            // E[x1 * x2] = E[x1] E[x2] = 0 for independent draws.
            shift[3] = 0.0;
        }
        shift
    }
}

#[derive(Clone, Copy)]
enum Domain {
    Source,
    Target,
}

struct Draw {
    x1: f64,
    x2: f64,
}

fn draw_inputs(kind: &GeneratorKind, domain: Domain, rng: &mut ChaCha8Rng) -> Draw {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    match *kind {
        GeneratorKind::BaselineLinear => Draw { x1: z1, x2: z2 },
        GeneratorKind::ShiftedNewFeature | GeneratorKind::NonAdditive => Draw {
            x1: z1,
            x2: 1.0 + z2,
        },
        GeneratorKind::CorrelatedInputs { c } => Draw {
            x1: z1,
            x2: 1.0 + c * z1 + (1.0 - c * c).sqrt() * z2,
        },
        GeneratorKind::DistributionShift {
            mu_source,
            mu_target,
        } => {
            let mu = match domain {
                Domain::Source => mu_source,
                Domain::Target => mu_target,
            };
            Draw { x1: z1, x2: mu + z2 }
        }
    }
}

fn sample_block(
    spec: &GeneratorSpec,
    domain: Domain,
    n: usize,
    seed: u64,
    observe_new: bool,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let non_additive = matches!(spec.kind, GeneratorKind::NonAdditive);
    let d = if observe_new { spec.d_target() } else { spec.d_source() };
    let mut x = DMatrix::zeros(n, d);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let draw = draw_inputs(&spec.kind, domain, &mut rng);
        let noise: f64 = rng.sample(StandardNormal);
        let mut label = spec.theta[0] + spec.theta[1] * draw.x1 + spec.theta[2] * draw.x2
            + spec.sigma * noise;
        if non_additive {
            label += INTERACTION_COEFFICIENT * draw.x1 * draw.x2;
        }
        x[(i, 0)] = 1.0;
        x[(i, 1)] = draw.x1;
        if observe_new {
            x[(i, 2)] = draw.x2;
            if non_additive {
                x[(i, 3)] = draw.x1 * draw.x2;
            }
        }
        y[i] = label;
    }
    Dataset::new(x, y, spec.d_source())
}

/// Draw the source, target and test datasets described by the spec.
///
/// The source observes only (intercept, x1); its labels still depend on the
/// unobserved inputs. Deterministic given the seed.
pub fn generate(spec: &GeneratorSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let source = sample_block(
        spec,
        Domain::Source,
        spec.n_source,
        derive_seed(spec.seed, ROLE_SOURCE),
        false,
    )?;
    let target = sample_block(
        spec,
        Domain::Target,
        spec.n_target,
        derive_seed(spec.seed, ROLE_TARGET),
        true,
    )?;
    let test = sample_block(
        spec,
        Domain::Target,
        spec.n_test,
        derive_seed(spec.seed, ROLE_TEST),
        true,
    )?;
    Ok((source, target, test))
}

/// Specs differing only in one swept parameter, with per-point derived seeds.
///
/// `param` is one of `n_T`, `c` (correlated-inputs scenario only) and
/// `mu_target` (distribution-shift scenario only).
pub fn sweep(spec: &GeneratorSpec, param: &str, values: &[f64]) -> Result<Vec<GeneratorSpec>> {
    let mut out = Vec::with_capacity(values.len());
    for (index, &value) in values.iter().enumerate() {
        let mut next = spec.clone();
        match param {
            "n_T" => {
                if !(value.is_finite() && value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "n_T sweep values must be positive integers, got {value}"
                    )));
                }
                next.n_target = value as usize;
            }
            "c" => match next.kind {
                GeneratorKind::CorrelatedInputs { .. } => {
                    next.kind = GeneratorKind::CorrelatedInputs { c: value };
                }
                _ => {
                    return Err(Error::InvalidSpec(
                        "sweeping c requires the correlated-inputs scenario".into(),
                    ))
                }
            },
            "mu_target" => match next.kind {
                GeneratorKind::DistributionShift { mu_source, .. } => {
                    next.kind = GeneratorKind::DistributionShift {
                        mu_source,
                        mu_target: value,
                    };
                }
                _ => {
                    return Err(Error::InvalidSpec(
                        "sweeping mu_target requires the distribution-shift scenario".into(),
                    ))
                }
            },
            other => return Err(Error::UnknownParam(other.to_string())),
        }
        next.seed = derive_seed(spec.seed, index as u64 + 1);
        next.validate()?;
        out.push(next);
    }
    Ok(out)
}
