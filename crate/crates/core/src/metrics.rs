//! Factuality metrics over labeled atoms and assessment models.
//!
//! A response with `n` atoms, `S` of them labeled `True`, scores factual
//! precision `S/n`, recall `min(S/K, 1)` against an atom budget `K`, and
//! their harmonic mean `F1@K` (zero when nothing is supported).
//! Verifiability counts atoms connected to any evidence edge, and
//! comprehensiveness is the covered fraction `n_in / (n_in + n_out)`.
//! Cross-run comparisons use the symmetric relative gain
//! `2(S_c - S_r) / (S_c + S_r)`, which lives in [-2, 2].
//!
//! Report finalization is two-phase: per-response reports are built with a
//! provisional per-response budget (`K = n`), and [`aggregate`] re-finalizes
//! recall and F1 once the dataset-wide median atom count is known.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::builder::AtomLabel;
use crate::graph::{GraphicalModel, VarKind};

/// Errors raised by metric computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricError {
    /// Precision over zero atoms is undefined.
    NoAtoms,
    /// Recall requires a positive atom budget.
    ZeroK,
    /// Comprehensiveness over an empty universe is undefined.
    EmptyCoverage,
    /// Aggregation requires at least one report.
    NoReports,
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::NoAtoms => f.write_str("precision over zero atoms is undefined"),
            MetricError::ZeroK => f.write_str("the atom budget K must be at least 1"),
            MetricError::EmptyCoverage => {
                f.write_str("comprehensiveness needs a non-empty universe of atoms")
            }
            MetricError::NoReports => f.write_str("aggregation needs at least one report"),
        }
    }
}

impl core::error::Error for MetricError {}

/// Factuality scores for a single response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactualityReport {
    pub n_atoms: usize,
    /// Number of atoms labeled `True`.
    pub supported: usize,
    /// `supported / n_atoms`.
    pub precision: f64,
    /// `min(supported / k_used, 1)`.
    pub recall_at_k: f64,
    /// Harmonic mean of precision and recall; 0 when `supported == 0`.
    pub f1_at_k: f64,
    /// Atoms connected to at least one evidence edge.
    pub verifiability: usize,
    /// Fraction of atoms the evidence covers.
    pub comprehensiveness: f64,
    /// Atom budget the recall/F1 columns were computed against.
    pub k_used: usize,
}

/// Number of atoms labeled `True`. Unverified and False both count as
/// unsupported.
pub fn supported_count(labels: &[AtomLabel]) -> usize {
    labels.iter().filter(|l| **l == AtomLabel::True).count()
}

/// Factual precision: supported fraction of all atoms.
pub fn precision(labels: &[AtomLabel]) -> Result<f64, MetricError> {
    if labels.is_empty() {
        return Err(MetricError::NoAtoms);
    }
    Ok(supported_count(labels) as f64 / labels.len() as f64)
}

/// Recall against an atom budget: `min(supported / k, 1)`.
pub fn recall_at_k(supported: usize, k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    Ok((supported as f64 / k as f64).min(1.0))
}

/// Harmonic mean of precision and recall, or 0 when nothing is supported.
pub fn f1_at_k(precision: f64, recall: f64, supported: usize) -> f64 {
    if supported == 0 || precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

/// Number of atom variables with at least one incident binary factor.
pub fn verifiability(model: &GraphicalModel) -> usize {
    model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Atom)
        .filter(|v| {
            model
                .factors()
                .iter()
                .any(|f| f.arity() == 2 && f.scope().contains(&v.id))
        })
        .count()
}

/// Covered fraction `n_in / (n_in + n_out)` of a universe of `n_in + n_out`
/// atoms.
pub fn comprehensiveness(n_in: usize, n_out: usize) -> Result<f64, MetricError> {
    if n_in + n_out == 0 {
        return Err(MetricError::EmptyCoverage);
    }
    Ok(n_in as f64 / (n_in + n_out) as f64)
}

/// Symmetric relative gain `2(S_c - S_r) / (S_c + S_r)` in [-2, 2],
/// comparing a correction's score against the response's. Defined as 0 when
/// both scores are 0 (the formula's 0/0 point). Inputs must be non-negative.
pub fn relative_gain(s_response: f64, s_correction: f64) -> f64 {
    let sum = s_response + s_correction;
    if sum == 0.0 {
        return 0.0;
    }
    2.0 * (s_correction - s_response) / sum
}

/// Median atom count over a dataset's responses, used as the shared recall
/// budget `K`. With an even count, the mean of the two middle values is
/// rounded half-up to keep `K` an integer.
pub fn median_k(atom_counts: &[usize]) -> Result<usize, MetricError> {
    if atom_counts.is_empty() {
        return Err(MetricError::NoReports);
    }
    let mut sorted = atom_counts.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let k = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]).div_ceil(2)
    };
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    Ok(k)
}

/// Builds the full report for one response from its labels and assessment
/// model, with recall provisionally computed at `K = n_atoms` (so it equals
/// precision until [`aggregate`] re-finalizes it with the dataset median).
pub fn build_report(labels: &[AtomLabel], model: &GraphicalModel) -> Result<FactualityReport, MetricError> {
    let n_atoms = labels.len();
    let precision = precision(labels)?;
    let supported = supported_count(labels);
    let verifiability = verifiability(model);
    let comprehensiveness = comprehensiveness(verifiability, n_atoms - verifiability)?;
    let recall = recall_at_k(supported, n_atoms)?;
    Ok(FactualityReport {
        n_atoms,
        supported,
        precision,
        recall_at_k: recall,
        f1_at_k: f1_at_k(precision, recall, supported),
        verifiability,
        comprehensiveness,
        k_used: n_atoms,
    })
}

/// Mean and sample standard deviation of one metric over a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 for a single report.
    pub std_dev: f64,
}

fn stats(values: &[f64]) -> MetricStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MetricStats { mean, std_dev: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MetricStats { mean, std_dev: libm::sqrt(var) }
}

/// Dataset-level metric summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub count: usize,
    /// Median atom count used as the shared recall budget.
    pub k: usize,
    pub precision: MetricStats,
    pub recall_at_k: MetricStats,
    pub f1_at_k: MetricStats,
    pub supported: MetricStats,
    pub verifiability: MetricStats,
    pub comprehensiveness: MetricStats,
}

/// Re-finalizes every report's recall/F1 against the dataset-median atom
/// budget, then summarizes each metric as mean and sample standard
/// deviation.
pub fn aggregate(reports: &mut [FactualityReport]) -> Result<AggregateSummary, MetricError> {
    if reports.is_empty() {
        return Err(MetricError::NoReports);
    }
    let counts: Vec<usize> = reports.iter().map(|r| r.n_atoms).collect();
    let k = median_k(&counts)?;
    for report in reports.iter_mut() {
        report.k_used = k;
        report.recall_at_k = recall_at_k(report.supported, k)?;
        report.f1_at_k = f1_at_k(report.precision, report.recall_at_k, report.supported);
    }
    let collect = |f: fn(&FactualityReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    Ok(AggregateSummary {
        count: reports.len(),
        k,
        precision: stats(&collect(|r| r.precision)),
        recall_at_k: stats(&collect(|r| r.recall_at_k)),
        f1_at_k: stats(&collect(|r| r.f1_at_k)),
        supported: stats(&collect(|r| r.supported as f64)),
        verifiability: stats(&collect(|r| r.verifiability as f64)),
        comprehensiveness: stats(&collect(|r| r.comprehensiveness)),
    })
}

/// Relative gains of a correction run over its response run, one per
/// headline metric, each in [-2, 2].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub supported: f64,
    pub precision: f64,
    pub recall_at_k: f64,
    pub f1_at_k: f64,
}

/// Gains of `correction` over `response`, computed on the aggregate means.
pub fn gain_report(response: &AggregateSummary, correction: &AggregateSummary) -> GainReport {
    GainReport {
        supported: relative_gain(response.supported.mean, correction.supported.mean),
        precision: relative_gain(response.precision.mean, correction.precision.mean),
        recall_at_k: relative_gain(response.recall_at_k.mean, correction.recall_at_k.mean),
        f1_at_k: relative_gain(response.f1_at_k.mean, correction.f1_at_k.mean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_model, AtomRecord, ContextRecord, PriorConfig, RelationKind, RelationRecord};
    use alloc::format;

    use AtomLabel::{False as F, True as T, Unverified as U};

    #[test]
    fn precision_counts_true_labels_only() {
        assert_eq!(precision(&[T, T, F, F, T, F, T, F]).unwrap(), 0.5);
        assert_eq!(precision(&[T, T, T]).unwrap(), 1.0);
        // Unverified counts as unsupported.
        assert_eq!(precision(&[T, T, F, U, T]).unwrap(), 0.6);
        assert_eq!(precision(&[]), Err(MetricError::NoAtoms));
    }

    #[test]
    fn recall_clamps_at_one() {
        assert_eq!(recall_at_k(12, 10).unwrap(), 1.0);
        assert_eq!(recall_at_k(0, 10).unwrap(), 0.0);
        assert_eq!(recall_at_k(8, 10).unwrap(), 0.8);
        assert_eq!(recall_at_k(3, 0), Err(MetricError::ZeroK));
    }

    #[test]
    fn f1_harmonic_mean_and_zero_support() {
        assert!((f1_at_k(0.8, 0.8, 4) - 0.8).abs() < 1e-15);
        assert_eq!(f1_at_k(0.0, 0.0, 0), 0.0);
        assert!((f1_at_k(0.5, 1.0, 5) - 2.0 / 3.0).abs() < 1e-15);
    }

    fn model_with_relations(n_atoms: usize, touched: &[usize]) -> GraphicalModel {
        let atoms: Vec<AtomRecord> =
            (1..=n_atoms).map(|i| AtomRecord::new(&format!("a{i}"), "claim")).collect();
        let contexts: Vec<ContextRecord> = touched
            .iter()
            .map(|i| ContextRecord::new(&format!("c{i}"), "t", &format!("https://x/{i}"), "s", "b", 0.99))
            .collect();
        let relations: Vec<RelationRecord> = touched
            .iter()
            .map(|&i| RelationRecord {
                source_id: format!("c{i}"),
                target_id: format!("a{i}"),
                kind: RelationKind::Entail,
                p: 0.9,
            })
            .collect();
        build_model(&atoms, &contexts, &relations, &PriorConfig::default()).unwrap()
    }

    #[test]
    fn verifiability_counts_atoms_with_evidence_edges() {
        assert_eq!(verifiability(&model_with_relations(3, &[])), 0);
        assert_eq!(verifiability(&model_with_relations(5, &[1, 2, 3, 4, 5])), 5);
        assert_eq!(verifiability(&model_with_relations(3, &[1, 3])), 2);
    }

    #[test]
    fn comprehensiveness_is_covered_fraction() {
        assert_eq!(comprehensiveness(4, 0).unwrap(), 1.0);
        assert_eq!(comprehensiveness(7, 3).unwrap(), 0.7);
        assert_eq!(comprehensiveness(0, 5).unwrap(), 0.0);
        assert_eq!(comprehensiveness(0, 0), Err(MetricError::EmptyCoverage));
    }

    #[test]
    fn relative_gain_endpoints() {
        assert_eq!(relative_gain(0.7, 0.7), 0.0);
        assert_eq!(relative_gain(0.0, 0.9), 2.0);
        assert_eq!(relative_gain(0.9, 0.0), -2.0);
        assert!((relative_gain(0.5, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(relative_gain(0.0, 0.0), 0.0);
    }

    #[test]
    fn median_k_rules() {
        assert_eq!(median_k(&[3, 5, 9]).unwrap(), 5);
        assert_eq!(median_k(&[4, 6]).unwrap(), 5);
        assert_eq!(median_k(&[3, 4]).unwrap(), 4); // 3.5 rounds half-up
        assert_eq!(median_k(&[7]).unwrap(), 7);
        assert_eq!(median_k(&[]), Err(MetricError::NoReports));
        assert_eq!(median_k(&[0, 0]), Err(MetricError::ZeroK));
    }

    #[test]
    fn build_report_composes_all_fields() {
        let model = model_with_relations(3, &[1, 3]);
        let labels = [T, F, U];
        let report = build_report(&labels, &model).unwrap();
        assert_eq!(report.n_atoms, 3);
        assert_eq!(report.supported, 1);
        assert!((report.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.k_used, 3);
        assert!((report.recall_at_k - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.verifiability, 2);
        assert!((report.comprehensiveness - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_refinalizes_with_median_budget() {
        let mk = |n: usize, s: usize, v: usize| FactualityReport {
            n_atoms: n,
            supported: s,
            precision: s as f64 / n as f64,
            recall_at_k: 0.0, // provisional values are overwritten
            f1_at_k: 0.0,
            verifiability: v,
            comprehensiveness: v as f64 / n as f64,
            k_used: n,
        };
        let mut reports = [mk(3, 2, 3), mk(5, 4, 4), mk(9, 3, 6)];
        let summary = aggregate(&mut reports).unwrap();
        assert_eq!(summary.count, 3);
        assert_eq!(summary.k, 5);
        for r in &reports {
            assert_eq!(r.k_used, 5);
        }
        // Hand-computed: recalls 2/5, 4/5, 3/5; F1s 1/2, 4/5, 3/7.
        assert!((reports[0].recall_at_k - 0.4).abs() < 1e-15);
        assert!((reports[0].f1_at_k - 0.5).abs() < 1e-15);
        assert!((reports[2].f1_at_k - 3.0 / 7.0).abs() < 1e-15);
        assert!((summary.precision.mean - 0.6).abs() < 1e-12);
        assert!((summary.recall_at_k.mean - 0.6).abs() < 1e-12);
        assert!((summary.f1_at_k.mean - 121.0 / 210.0).abs() < 1e-12);
        // Sample standard deviation of the precisions {2/3, 4/5, 1/3}.
        assert!((summary.precision.std_dev - libm::sqrt(13.0) / 15.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_of_single_report_has_zero_std() {
        let mut reports = [FactualityReport {
            n_atoms: 4,
            supported: 2,
            precision: 0.5,
            recall_at_k: 0.5,
            f1_at_k: 0.5,
            verifiability: 4,
            comprehensiveness: 1.0,
            k_used: 4,
        }];
        let summary = aggregate(&mut reports).unwrap();
        assert_eq!(summary.k, 4);
        assert_eq!(summary.precision.mean, 0.5);
        assert_eq!(summary.precision.std_dev, 0.0);
        assert!(aggregate(&mut []).is_err());
    }

    #[test]
    fn gain_report_compares_aggregate_means() {
        let base = |mean_s: f64, mean_p: f64| AggregateSummary {
            count: 2,
            k: 5,
            precision: MetricStats { mean: mean_p, std_dev: 0.0 },
            recall_at_k: MetricStats { mean: mean_p, std_dev: 0.0 },
            f1_at_k: MetricStats { mean: mean_p, std_dev: 0.0 },
            supported: MetricStats { mean: mean_s, std_dev: 0.0 },
            verifiability: MetricStats { mean: 3.0, std_dev: 0.0 },
            comprehensiveness: MetricStats { mean: 0.8, std_dev: 0.0 },
        };
        let gains = gain_report(&base(2.0, 0.5), &base(3.0, 0.75));
        assert!((gains.supported - 0.4).abs() < 1e-15);
        assert!((gains.precision - 0.4).abs() < 1e-15);
    }

    #[test]
    fn labels_from_serde_round_trip() {
        let labels = [T, F, U, AtomLabel::Unlabeled];
        let json = serde_json::to_string(&labels).unwrap();
        assert_eq!(json, r#"["True","False","Unverified","Unlabeled"]"#);
        let back: Vec<AtomLabel> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.as_slice(), labels.as_slice());
    }
}
