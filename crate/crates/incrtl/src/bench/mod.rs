//! Benchmark harness: split protocols, feature removal, method comparison
//! with RMSE, and significance testing between methods.
//!
//! An experiment takes a full dataset (CSV or generated), removes the `k`
//! features most correlated with the label from the source portion to emulate
//! newly added inputs, fits the requested methods on each run's
//! source/target split, and reports per-run test RMSE plus pairwise Wilcoxon
//! tests with a family-wise correction.

pub mod config;
pub mod csv;
mod wilcoxon;

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use wilcoxon::{significance_flags, wilcoxon_signed_rank, Correction};

use crate::dsft::{fit_dsft_pipeline, DsftConfig};
use crate::error::{Error, Result};
use crate::estimators::{fit_data_pooling, fit_ols, rmse, Dataset, FittedModel};
use crate::simgen::{self, derive_seed, GeneratorKind, GeneratorSpec};

/// Seed streams, kept disjoint from the generator's internal role streams.
const SMALL_SPLIT_STREAM: u64 = 0x51;
const LARGE_SPLIT_STREAM: u64 = 0x52;
const GENERATOR_TEST_STREAM: u64 = 0x53;
const GENERATOR_RUN_STREAM: u64 = 0x54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    Dp,
    DsftLinear,
    DsftKernel,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Ols,
        Method::Dp,
        Method::DsftLinear,
        Method::DsftKernel,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ols" => Ok(Method::Ols),
            "dp" => Ok(Method::Dp),
            "dsft" => Ok(Method::DsftLinear),
            "dsft-nl" => Ok(Method::DsftKernel),
            other => Err(Error::InvalidSpec(format!(
                "unknown method `{other}` (expected ols, dp, dsft or dsft-nl)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ols => "ols",
            Method::Dp => "dp",
            Method::DsftLinear => "dsft",
            Method::DsftKernel => "dsft-nl",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label_column: String },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Protocol {
    /// Source and test rows are drawn once; each run gets a fresh target
    /// sample disjoint from every other run's.
    SmallData {
        n_source: usize,
        n_target: usize,
        n_test: usize,
        runs: usize,
    },
    /// Every run re-draws the test fraction and the target; the remainder is
    /// the source.
    LargeData {
        test_fraction: f64,
        n_target: usize,
        runs: usize,
    },
}

impl Protocol {
    pub fn runs(&self) -> usize {
        match self {
            Protocol::SmallData { runs, .. } | Protocol::LargeData { runs, .. } => *runs,
        }
    }
}

/// Declarative description of one benchmark experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub source_of_data: DataSource,
    pub protocol: Protocol,
    /// How many of the most label-correlated features the source loses.
    pub n_new_features: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub correction: Correction,
    /// Prepend a constant-1 column to CSV data (generators already emit one).
    pub intercept: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.protocol.runs() == 0 {
            return Err(Error::InvalidSpec("runs must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("at least one method required".into()));
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return Err(Error::InvalidSpec(format!("method `{m}` listed twice")));
            }
            seen.push(*m);
        }
        match (&self.source_of_data, &self.protocol) {
            (DataSource::Csv { .. }, _) => {
                if self.n_new_features == 0 {
                    return Err(Error::InvalidSpec(
                        "n_new_features must be at least 1".into(),
                    ));
                }
            }
            (DataSource::Generator(g), Protocol::SmallData { .. }) => g.validate()?,
            (DataSource::Generator(_), Protocol::LargeData { .. }) => {
                return Err(Error::InvalidSpec(
                    "the large-data protocol needs a csv source (the test fraction requires a finite dataset)"
                        .into(),
                ));
            }
        }
        if let Protocol::LargeData { test_fraction, .. } = self.protocol {
            if !(test_fraction > 0.0 && test_fraction < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "test fraction must lie in (0,1), got {test_fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Indices of the `k` features with the largest absolute Pearson correlation
/// with the label, in decreasing order; ties break toward the lower column
/// index. Constant columns count as correlation zero.
pub fn rank_new_features(data: &Dataset, k: usize) -> Result<Vec<usize>> {
    if k >= data.d() {
        return Err(Error::TooManyFeatures {
            requested: k,
            available: data.d(),
        });
    }
    let y = data.y();
    let y_mean = y.mean();
    let y_var: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let mut scores: Vec<(usize, f64)> = (0..data.d())
        .map(|j| {
            let col = data.x().column(j);
            let m = col.mean();
            let mut cov = 0.0;
            let mut var = 0.0;
            for i in 0..data.n() {
                let dx = col[i] - m;
                cov += dx * (y[i] - y_mean);
                var += dx * dx;
            }
            let denom = (var * y_var).sqrt();
            let r = if denom > 1e-300 { (cov / denom).abs() } else { 0.0 };
            (j, r)
        })
        .collect();
    scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(scores.into_iter().take(k).map(|(j, _)| j).collect())
}

/// Pick rows and columns out of a full dataset, optionally prepending an
/// intercept column.
fn assemble(
    data: &Dataset,
    rows: &[usize],
    columns: &[usize],
    d_hist: usize,
    intercept: bool,
) -> Result<Dataset> {
    let extra = usize::from(intercept);
    let x = DMatrix::from_fn(rows.len(), columns.len() + extra, |i, j| {
        if intercept && j == 0 {
            1.0
        } else {
            data.x()[(rows[i], columns[j - extra])]
        }
    });
    let y = DVector::from_fn(rows.len(), |i, _| data.y()[rows[i]]);
    Dataset::new(x, y, d_hist + extra)
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Split a full dataset into (source, target, test) for one run.
///
/// The source drops the ranked new-feature columns; the target and test sets
/// keep them, reordered after the historical block. Deterministic in
/// `(spec.seed, run_index)`.
pub fn split(
    data: &Dataset,
    spec: &ExperimentSpec,
    run_index: usize,
) -> Result<(Dataset, Dataset, Dataset)> {
    let ranked = rank_new_features(data, spec.n_new_features)?;
    let hist: Vec<usize> = (0..data.d()).filter(|j| !ranked.contains(j)).collect();
    let mut full_cols = hist.clone();
    full_cols.extend(&ranked);
    let d_hist = hist.len();
    let intercept = spec.intercept;
    let n = data.n();

    match spec.protocol {
        Protocol::SmallData {
            n_source,
            n_target,
            n_test,
            runs,
        } => {
            if run_index >= runs {
                return Err(Error::InvalidSpec(format!(
                    "run index {run_index} out of range for {runs} runs"
                )));
            }
            let needed = n_test + n_source + runs * n_target;
            if needed > n {
                return Err(Error::InsufficientRows {
                    needed,
                    available: n,
                });
            }
            let order = shuffled_indices(n, derive_seed(spec.seed, SMALL_SPLIT_STREAM));
            let test_rows = &order[..n_test];
            let source_rows = &order[n_test..n_test + n_source];
            let target_start = n_test + n_source + run_index * n_target;
            let target_rows = &order[target_start..target_start + n_target];
            Ok((
                assemble(data, source_rows, &hist, d_hist, intercept)?,
                assemble(data, target_rows, &full_cols, d_hist, intercept)?,
                assemble(data, test_rows, &full_cols, d_hist, intercept)?,
            ))
        }
        Protocol::LargeData {
            test_fraction,
            n_target,
            ..
        } => {
            let n_test = (test_fraction * n as f64).floor() as usize;
            let needed = n_test + n_target + 1;
            if n_test == 0 || needed > n {
                return Err(Error::InsufficientRows {
                    needed,
                    available: n,
                });
            }
            let order = shuffled_indices(
                n,
                derive_seed(spec.seed, LARGE_SPLIT_STREAM + run_index as u64),
            );
            let test_rows = &order[..n_test];
            let target_rows = &order[n_test..n_test + n_target];
            let source_rows = &order[n_test + n_target..];
            Ok((
                assemble(data, source_rows, &hist, d_hist, intercept)?,
                assemble(data, target_rows, &full_cols, d_hist, intercept)?,
                assemble(data, test_rows, &full_cols, d_hist, intercept)?,
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest {
    pub method_a: Method,
    pub method_b: Method,
    pub p_value: f64,
    pub significant_after_correction: bool,
}

/// Per-run RMSE matrix plus summaries and pairwise significance tests.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub dataset: String,
    pub methods: Vec<Method>,
    /// `rmse[run][method]`; `None` records a failed fit on that run.
    pub rmse: Vec<Vec<Option<f64>>>,
    pub summary: Vec<MethodSummary>,
    pub tests: Vec<PairTest>,
}

fn fit_method(
    method: Method,
    source: &Dataset,
    target: &Dataset,
) -> Result<FittedModel> {
    match method {
        Method::Ols => fit_ols(target),
        Method::Dp => Ok(fit_data_pooling(source, target, None)?.0),
        Method::DsftLinear => fit_dsft_pipeline(source, target, &DsftConfig::linear()),
        Method::DsftKernel => fit_dsft_pipeline(source, target, &DsftConfig::rbf()),
    }
}

fn run_cells(
    spec: &ExperimentSpec,
    source: &Dataset,
    target: &Dataset,
    test: &Dataset,
) -> Vec<Option<f64>> {
    spec.methods
        .iter()
        .map(|&m| {
            fit_method(m, source, target)
                .and_then(|model| rmse(&model, test))
                .ok()
        })
        .collect()
}

/// Run every split, fit every requested method, and aggregate.
pub fn run_benchmark(spec: &ExperimentSpec) -> Result<BenchResult> {
    spec.validate()?;
    let runs = spec.protocol.runs();
    let rmse_matrix: Vec<Vec<Option<f64>>> = match &spec.source_of_data {
        DataSource::Csv { path, label_column } => {
            let full = csv::load_csv(path, label_column)?;
            // Surface structural problems (too few rows, too many removed
            // features) before burning through runs.
            split(&full, spec, 0)?;
            (0..runs)
                .into_par_iter()
                .map(|run| {
                    let (source, target, test) = split(&full, spec, run)?;
                    Ok(run_cells(spec, &source, &target, &test))
                })
                .collect::<Result<_>>()?
        }
        DataSource::Generator(generator) => {
            let mut base = generator.clone();
            if let Protocol::SmallData {
                n_source,
                n_target,
                n_test,
                ..
            } = spec.protocol
            {
                base.n_source = n_source;
                base.n_target = n_target;
                base.n_test = n_test;
            }
            let mut test_spec = base.clone();
            test_spec.seed = derive_seed(spec.seed, GENERATOR_TEST_STREAM);
            let (_, _, test) = simgen::generate(&test_spec)?;
            (0..runs)
                .into_par_iter()
                .map(|run| {
                    let mut run_spec = base.clone();
                    run_spec.seed =
                        derive_seed(spec.seed, GENERATOR_RUN_STREAM + 2 * run as u64);
                    let (source, target, _) = simgen::generate(&run_spec)?;
                    Ok(run_cells(spec, &source, &target, &test))
                })
                .collect::<Result<_>>()?
        }
    };

    let summary = spec
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let values: Vec<f64> = rmse_matrix.iter().filter_map(|row| row[j]).collect();
            let n_runs = values.len();
            let mean = if n_runs > 0 {
                values.iter().sum::<f64>() / n_runs as f64
            } else {
                f64::NAN
            };
            let std = if n_runs > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n_runs - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            MethodSummary {
                method,
                mean_rmse: mean,
                std_rmse: std,
                n_runs,
            }
        })
        .collect();

    let mut pairs = Vec::new();
    let mut p_values = Vec::new();
    for i in 0..spec.methods.len() {
        for j in (i + 1)..spec.methods.len() {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for row in &rmse_matrix {
                if let (Some(va), Some(vb)) = (row[i], row[j]) {
                    a.push(va);
                    b.push(vb);
                }
            }
            match wilcoxon_signed_rank(&a, &b) {
                Ok(p) => {
                    pairs.push((spec.methods[i], spec.methods[j]));
                    p_values.push(p);
                }
                Err(Error::TooFewPairs { .. }) => {} // pair dropped
                Err(e) => return Err(e),
            }
        }
    }
    let flags = significance_flags(&p_values, 0.05, spec.correction);
    let tests = pairs
        .into_iter()
        .zip(p_values)
        .zip(flags)
        .map(|(((method_a, method_b), p_value), significant)| PairTest {
            method_a,
            method_b,
            p_value,
            significant_after_correction: significant,
        })
        .collect();

    Ok(BenchResult {
        dataset: spec.name.clone(),
        methods: spec.methods.clone(),
        rmse: rmse_matrix,
        summary,
        tests,
    })
}

impl BenchResult {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn test_for(&self, a: Method, b: Method) -> Option<&PairTest> {
        self.tests.iter().find(|t| {
            (t.method_a == a && t.method_b == b) || (t.method_a == b && t.method_b == a)
        })
    }

    /// True when `a`'s mean RMSE exceeds `b`'s and the pairwise test is
    /// significant after correction.
    pub fn significantly_worse(&self, a: Method, b: Method) -> bool {
        match (self.summary_for(a), self.summary_for(b), self.test_for(a, b)) {
            (Some(sa), Some(sb), Some(t)) => {
                t.significant_after_correction && sa.mean_rmse > sb.mean_rmse
            }
            _ => false,
        }
    }

    pub fn write_results_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("dataset,method,run,rmse\n");
        for (run, row) in self.rmse.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let value = cell.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.dataset, self.methods[j], run, value
                ));
            }
        }
        csv::write_atomic(path, out.as_bytes())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("dataset,method,mean_rmse,std_rmse\n");
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.dataset, s.method, s.mean_rmse, s.std_rmse
            ));
        }
        csv::write_atomic(path, out.as_bytes())
    }

    pub fn write_tests_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("method_a,method_b,p_value,significant_after_correction\n");
        for t in &self.tests {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.method_a, t.method_b, t.p_value, t.significant_after_correction
            ));
        }
        csv::write_atomic(path, out.as_bytes())
    }

    /// One markdown row per method set, `mean ± std`, with the table-style
    /// markers: `*` when dp and ols show no significant difference, `†` when
    /// ols is significantly better than dp.
    pub fn markdown_table(&self) -> String {
        let mut header = String::from("| dataset |");
        let mut rule = String::from("| --- |");
        let mut row = {
            let marker = match self.test_for(Method::Dp, Method::Ols) {
                Some(t) if !t.significant_after_correction => "*",
                Some(_) if self.significantly_worse(Method::Dp, Method::Ols) => "†",
                _ => "",
            };
            format!("| {}{} |", self.dataset, marker)
        };
        for s in &self.summary {
            header.push_str(&format!(" {} |", s.method));
            rule.push_str(" --- |");
            row.push_str(&format!(" {:.4} ± {:.4} |", s.mean_rmse, s.std_rmse));
        }
        format!("{header}\n{rule}\n{row}\n")
    }
}

/// The five bundled generator scenarios used to probe when pooling can lose
/// to the target-only baseline: it should hold its ground except under a
/// clear distribution shift of the new feature or an interaction term.
pub fn robustness_scenarios(runs: usize, seed: u64) -> Vec<ExperimentSpec> {
    let methods = vec![Method::Ols, Method::Dp];
    let small = |n_source, n_target, n_test| Protocol::SmallData {
        n_source,
        n_target,
        n_test,
        runs,
    };
    let scenario = |name: &str, kind, protocol, stream| ExperimentSpec {
        name: name.to_string(),
        source_of_data: DataSource::Generator(GeneratorSpec::new(kind, 10, 10, 10, 0)),
        protocol,
        n_new_features: 1,
        methods: methods.clone(),
        seed: derive_seed(seed, stream),
        correction: Correction::Holm,
        intercept: false,
    };
    vec![
        scenario(
            "baseline",
            GeneratorKind::BaselineLinear,
            small(100, 8, 1000),
            1,
        ),
        scenario(
            "shifted-new-feature",
            GeneratorKind::ShiftedNewFeature,
            small(100, 8, 1000),
            2,
        ),
        scenario(
            "correlated",
            GeneratorKind::CorrelatedInputs { c: 0.1 },
            small(100, 8, 1000),
            3,
        ),
        scenario(
            "distribution-shift",
            GeneratorKind::DistributionShift {
                mu_source: 1.0,
                mu_target: 3.0,
            },
            small(200, 15, 1000),
            4,
        ),
        scenario(
            "non-additive",
            GeneratorKind::NonAdditive,
            small(200, 20, 1000),
            5,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn full_dataset(n: usize, seed: u64) -> Dataset {
        // Four informative features with distinct coefficient sizes.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |i, _| {
            5.0 * x[(i, 0)] + 0.1 * x[(i, 1)] - 2.0 * x[(i, 2)] + 0.5 * x[(i, 3)]
                + rng.sample::<f64, _>(StandardNormal)
        });
        Dataset::new(x, y, 4).unwrap()
    }

    #[test]
    fn ranking_puts_label_copy_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = DVector::from_fn(50, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut x = DMatrix::from_fn(50, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        x.set_column(2, &y);
        let data = Dataset::new(x, y, 3).unwrap();
        let ranked = rank_new_features(&data, 1).unwrap();
        assert_eq!(ranked, vec![2]);
    }

    #[test]
    fn ranking_uses_absolute_correlation_and_index_ties() {
        let y = DVector::from_fn(20, |i, _| i as f64);
        let mut x = DMatrix::zeros(20, 3);
        x.set_column(0, &DVector::from_fn(20, |i, _| -(i as f64))); // corr -1
        x.set_column(1, &y); // corr +1
        x.set_column(2, &DVector::from_fn(20, |i, _| ((i * 7919) % 13) as f64));
        let data = Dataset::new(x, y, 3).unwrap();
        let ranked = rank_new_features(&data, 2).unwrap();
        // |corr| ties at 1.0; the lower column index wins.
        assert_eq!(ranked, vec![0, 1]);
    }

    #[test]
    fn ranking_orders_by_coefficient_strength() {
        // theta = (0, 5, 0.1): the strong column must outrank the weak one.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(5000, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(5000, |i, _| {
            5.0 * x[(i, 1)] + 0.1 * x[(i, 2)] + rng.sample::<f64, _>(StandardNormal)
        });
        let data = Dataset::new(x, y, 3).unwrap();
        let ranked = rank_new_features(&data, 2).unwrap();
        assert_eq!(ranked[0], 1);
    }

    #[test]
    fn constant_column_scores_zero() {
        let y = DVector::from_fn(10, |i, _| i as f64);
        let mut x = DMatrix::from_element(10, 2, 3.0);
        x.set_column(1, &y);
        let data = Dataset::new(x, y, 2).unwrap();
        let ranked = rank_new_features(&data, 1).unwrap();
        assert_eq!(ranked, vec![1]);
        assert!(matches!(
            rank_new_features(&data, 2),
            Err(Error::TooManyFeatures { .. })
        ));
    }

    fn small_spec(data_rows: usize) -> ExperimentSpec {
        let _ = data_rows;
        ExperimentSpec {
            name: "unit".into(),
            source_of_data: DataSource::Csv {
                path: PathBuf::from("unused.csv"),
                label_column: "y".into(),
            },
            protocol: Protocol::SmallData {
                n_source: 30,
                n_target: 10,
                n_test: 20,
                runs: 4,
            },
            n_new_features: 2,
            methods: vec![Method::Ols, Method::Dp],
            seed: 9,
            correction: Correction::Holm,
            intercept: true,
        }
    }

    #[test]
    fn small_split_targets_are_disjoint_and_stable() {
        let data = full_dataset(120, 3);
        let spec = small_spec(120);
        let mut all_target_rows: Vec<Vec<f64>> = Vec::new();
        for run in 0..4 {
            let (source, target, test) = split(&data, &spec, run).unwrap();
            assert_eq!(source.n(), 30);
            assert_eq!(target.n(), 10);
            assert_eq!(test.n(), 20);
            assert_eq!(source.d(), 3); // intercept + 2 historical
            assert_eq!(target.d(), 5);
            assert_eq!(target.d_hist(), 3);
            all_target_rows.push(target.y().iter().copied().collect());
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                for v in &all_target_rows[i] {
                    assert!(!all_target_rows[j].contains(v));
                }
            }
        }
        // Fixed source/test across runs and full determinism.
        let (s0, _, t0) = split(&data, &spec, 0).unwrap();
        let (s1, _, t1) = split(&data, &spec, 1).unwrap();
        assert_eq!(s0, s1);
        assert_eq!(t0, t1);
    }

    #[test]
    fn small_split_needs_enough_rows() {
        let data = full_dataset(80, 4);
        let spec = small_spec(80); // needs 30 + 20 + 4*10 = 90
        assert!(matches!(
            split(&data, &spec, 0),
            Err(Error::InsufficientRows {
                needed: 90,
                available: 80
            })
        ));
    }

    #[test]
    fn large_split_sizes() {
        let data = full_dataset(500, 5);
        let mut spec = small_spec(500);
        spec.protocol = Protocol::LargeData {
            test_fraction: 0.10,
            n_target: 40,
            runs: 3,
        };
        let (source, target, test) = split(&data, &spec, 0).unwrap();
        assert_eq!(test.n(), 50);
        assert_eq!(target.n(), 40);
        assert_eq!(source.n(), 500 - 50 - 40);
        // Different runs draw different splits; same run is stable.
        let (s0a, _, _) = split(&data, &spec, 0).unwrap();
        let (s1, _, _) = split(&data, &spec, 1).unwrap();
        assert_eq!(source, s0a);
        assert_ne!(source, s1);
    }

    #[test]
    fn benchmark_on_noiseless_generator_gives_zero_ols_rmse() {
        let mut generator =
            GeneratorSpec::new(GeneratorKind::BaselineLinear, 50, 20, 100, 0);
        generator.sigma = 1e-12; // effectively noiseless labels
        let spec = ExperimentSpec {
            name: "noiseless".into(),
            source_of_data: DataSource::Generator(generator),
            protocol: Protocol::SmallData {
                n_source: 50,
                n_target: 20,
                n_test: 100,
                runs: 3,
            },
            n_new_features: 1,
            methods: vec![Method::Ols],
            seed: 77,
            correction: Correction::None,
            intercept: false,
        };
        let result = run_benchmark(&spec).unwrap();
        for row in &result.rmse {
            assert!(row[0].unwrap() < 1e-8);
        }
    }

    #[test]
    fn benchmark_summary_matches_matrix_means() {
        let spec = ExperimentSpec {
            name: "means".into(),
            source_of_data: DataSource::Generator(GeneratorSpec::new(
                GeneratorKind::BaselineLinear,
                60,
                10,
                200,
                0,
            )),
            protocol: Protocol::SmallData {
                n_source: 60,
                n_target: 10,
                n_test: 200,
                runs: 8,
            },
            n_new_features: 1,
            methods: vec![Method::Ols, Method::Dp],
            seed: 31,
            correction: Correction::Holm,
            intercept: false,
        };
        let result = run_benchmark(&spec).unwrap();
        for (j, s) in result.summary.iter().enumerate() {
            let values: Vec<f64> = result.rmse.iter().filter_map(|r| r[j]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            assert!((s.mean_rmse - mean).abs() < 1e-12);
            assert!(s.mean_rmse >= 0.0);
        }
        for t in &result.tests {
            assert!((0.0..=1.0).contains(&t.p_value));
        }
    }

    #[test]
    fn correction_switch_changes_only_flags() {
        let base = ExperimentSpec {
            name: "flags".into(),
            source_of_data: DataSource::Generator(GeneratorSpec::new(
                GeneratorKind::BaselineLinear,
                80,
                8,
                400,
                0,
            )),
            protocol: Protocol::SmallData {
                n_source: 80,
                n_target: 8,
                n_test: 400,
                runs: 12,
            },
            n_new_features: 1,
            methods: vec![Method::Ols, Method::Dp, Method::DsftLinear],
            seed: 4,
            correction: Correction::Holm,
            intercept: false,
        };
        let holm = run_benchmark(&base).unwrap();
        let mut none_spec = base.clone();
        none_spec.correction = Correction::None;
        let none = run_benchmark(&none_spec).unwrap();
        assert_eq!(holm.tests.len(), none.tests.len());
        for (a, b) in holm.tests.iter().zip(&none.tests) {
            assert_eq!(a.p_value, b.p_value);
        }
    }
}
