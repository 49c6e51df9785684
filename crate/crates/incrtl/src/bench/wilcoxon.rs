//! Paired Wilcoxon signed-rank test and multiple-testing corrections.
//!
//! Zero differences are dropped, tied absolute differences get average ranks.
//! For up to 20 remaining pairs the two-sided p-value comes from exact
//! enumeration of all 2^n sign assignments conditional on the observed ranks;
//! beyond that a normal approximation with tie correction and continuity
//! correction is used, matching the usual R behaviour.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const EXACT_LIMIT: usize = 20;

/// Average ranks of `|values|`, ascending, ties averaged.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].abs().partial_cmp(&values[j].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]].abs() == values[order[i]].abs() {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided p-value of the paired signed-rank test between `a` and `b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "paired sample lengths",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::TooFewPairs { pairs: n });
    }
    let ranks = average_ranks(&diffs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= EXACT_LIMIT {
        Ok(exact_two_sided(&ranks, w_plus))
    } else {
        Ok(normal_two_sided(&ranks, w_plus, n))
    }
}

/// Enumerate all 2^n sign assignments of the observed ranks. Ranks are
/// doubled to integers so the comparisons are exact.
fn exact_two_sided(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let observed = (2.0 * w_plus).round() as u64;
    let total = 1u64 << n;
    let mut count_le = 0u64;
    let mut count_ge = 0u64;
    for mask in 0..total {
        let mut w = 0u64;
        for (bit, r) in doubled.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                w += r;
            }
        }
        if w <= observed {
            count_le += 1;
        }
        if w >= observed {
            count_ge += 1;
        }
    }
    let tail = count_le.min(count_ge) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

fn normal_two_sided(ranks: &[f64], w_plus: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    // Tie correction: subtract sum(t^3 - t)/48 over groups of tied ranks.
    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let centered = w_plus - mean;
    let correction = 0.5 * centered.signum();
    let z = (centered - correction) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0)
}

/// Family-wise correction applied to significance flags (never to the
/// p-values themselves).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    None,
    #[default]
    Holm,
    Bonferroni,
}

impl std::fmt::Display for Correction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Correction::None => "none",
            Correction::Holm => "holm",
            Correction::Bonferroni => "bonferroni",
        })
    }
}

/// Which of the `p_values` are significant at level `alpha` after the chosen
/// family-wise correction.
pub fn significance_flags(p_values: &[f64], alpha: f64, correction: Correction) -> Vec<bool> {
    let m = p_values.len();
    match correction {
        Correction::None => p_values.iter().map(|&p| p < alpha).collect(),
        Correction::Bonferroni => p_values.iter().map(|&p| p < alpha / m as f64).collect(),
        Correction::Holm => {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).unwrap());
            let mut flags = vec![false; m];
            for (rank, &idx) in order.iter().enumerate() {
                if p_values[idx] < alpha / (m - rank) as f64 {
                    flags[idx] = true;
                } else {
                    break; // step-down: everything larger is non-significant
                }
            }
            flags
        }
    }
}
