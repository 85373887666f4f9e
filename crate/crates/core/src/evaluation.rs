//! Confusion matrices, performance tables, significance statistics and
//! fusion-weight sweeps.
//!
//! Matrix convention throughout: column = true condition, row = identified
//! condition, entries are percentages of the column's test items.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{check_alpha, ConditionBank, LabeledUtterance};
use crate::error::{Error, Result};
use crate::math::argmax;

pub const DEFAULT_CRITICAL: f64 = 1.645;
const COLUMN_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[identified][true]`
    pub counts: Vec<Vec<usize>>,
    /// `percent[identified][true]`; a column with no test items is all zero.
    pub percent: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn from_indices(labels: &[String], truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch { expected: truth.len(), actual: predicted.len() });
        }
        if truth.is_empty() {
            return Err(Error::EmptyInput("confusion matrix input"));
        }
        let n = labels.len();
        let mut counts = vec![vec![0usize; n]; n];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n || p >= n {
                return Err(Error::UnknownLabel(format!("index {} of {n}", t.max(p))));
            }
            counts[p][t] += 1;
        }
        let mut percent = vec![vec![0.0; n]; n];
        for col in 0..n {
            let total: usize = (0..n).map(|row| counts[row][col]).sum();
            if total > 0 {
                for row in 0..n {
                    percent[row][col] = 100.0 * counts[row][col] as f64 / total as f64;
                }
            }
        }
        Ok(Self { labels: labels.to_vec(), counts, percent })
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.percent.iter().map(|row| row[col]).collect()
    }

    pub fn column_total(&self, col: usize) -> usize {
        self.counts.iter().map(|row| row[col]).sum()
    }

    /// Every column that has test items must be a valid percentage column.
    pub fn validate(&self) -> Result<()> {
        for col in 0..self.labels.len() {
            if self.column_total(col) > 0 {
                validate_column(&self.column(col))?;
            }
        }
        Ok(())
    }
}

/// Builds the matrix from label strings; every label must be in `labels`.
pub fn confusion_matrix<S: AsRef<str>>(labels: &[String], truth: &[S], predicted: &[S]) -> Result<ConfusionMatrix> {
    let index = |s: &S| {
        labels
            .iter()
            .position(|l| l == s.as_ref())
            .ok_or_else(|| Error::UnknownLabel(s.as_ref().to_string()))
    };
    let t: Vec<usize> = truth.iter().map(index).collect::<Result<_>>()?;
    let p: Vec<usize> = predicted.iter().map(index).collect::<Result<_>>()?;
    ConfusionMatrix::from_indices(labels, &t, &p)
}

/// Non-negative entries summing to 100 within 0.01.
pub fn validate_column(column: &[f64]) -> Result<()> {
    if let Some(bad) = column.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!("column entry {bad} is not a percentage")));
    }
    let sum: f64 = column.iter().sum();
    if (sum - 100.0).abs() > COLUMN_TOLERANCE {
        return Err(Error::InvalidArgument(format!("column sums to {sum}, not 100")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceTable {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    pub average: f64,
}

impl PerformanceTable {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || labels.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} performance values",
                labels.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("performance {bad} outside [0, 100]")));
        }
        let average = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self { labels, values, average })
    }

    pub fn sample_sd(&self) -> f64 {
        sample_sd(&self.values)
    }
}

/// Diagonal of the matrix and its mean.
pub fn performance_table(matrix: &ConfusionMatrix) -> PerformanceTable {
    let values = (0..matrix.labels.len()).map(|i| matrix.percent[i][i]).collect();
    PerformanceTable::new(matrix.labels.clone(), values).expect("diagonal of a confusion matrix")
}

pub fn relative_improvement(new: f64, old: f64) -> Result<f64> {
    if old <= 0.0 {
        return Err(Error::InvalidArgument(format!("baseline {old} must be positive")));
    }
    Ok(100.0 * (new - old) / old)
}

/// Rounds to one decimal, halves away from zero, the way the report tables
/// are printed (76.25 -> 76.3). A hair of slack absorbs averages that land
/// just below a tie through floating-point division.
pub fn round_tenth(x: f64) -> f64 {
    (x * 10.0 + 1e-9f64.copysign(x)).round() / 10.0
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn pooled_sd(sd_x: f64, sd_y: f64) -> Result<f64> {
    if sd_x < 0.0 || sd_y < 0.0 {
        return Err(Error::InvalidArgument(format!("negative standard deviation ({sd_x}, {sd_y})")));
    }
    Ok(((sd_x * sd_x + sd_y * sd_y) / 2.0).sqrt())
}

pub fn students_t(mean_x: f64, mean_y: f64, sd_pooled: f64) -> Result<f64> {
    if sd_pooled < 0.0 {
        return Err(Error::InvalidArgument(format!("negative pooled deviation {sd_pooled}")));
    }
    if sd_pooled == 0.0 {
        return if mean_x == mean_y {
            Ok(0.0)
        } else {
            Err(Error::UndefinedStatistic("t with zero pooled deviation and unequal means".into()))
        };
    }
    Ok((mean_x - mean_y) / sd_pooled)
}

pub fn confidence_interval(mean_x: f64, mean_y: f64, sd_pooled: f64, critical: f64) -> Result<(f64, f64)> {
    if sd_pooled < 0.0 {
        return Err(Error::InvalidArgument(format!("negative pooled deviation {sd_pooled}")));
    }
    let d = mean_x - mean_y;
    Ok((d - critical * sd_pooled, d + critical * sd_pooled))
}

/// How a table's spread becomes the deviation fed into the pooled estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdConvention {
    /// sample SD / sqrt(n)
    StandardError,
    /// sample SD
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_pooled: f64,
    pub t: Option<f64>,
    pub low: f64,
    pub high: f64,
    pub critical: f64,
}

pub fn t_test(x: &PerformanceTable, y: &PerformanceTable, convention: SdConvention, critical: f64) -> Result<TTestResult> {
    let spread = |p: &PerformanceTable| match convention {
        SdConvention::Raw => p.sample_sd(),
        SdConvention::StandardError => p.sample_sd() / (p.values.len() as f64).sqrt(),
    };
    let sd = pooled_sd(spread(x), spread(y))?;
    let t = match students_t(x.average, y.average, sd) {
        Ok(t) => Some(t),
        Err(Error::UndefinedStatistic(_)) => None,
        Err(e) => return Err(e),
    };
    let (low, high) = confidence_interval(x.average, y.average, sd, critical)?;
    Ok(TTestResult { mean_x: x.average, mean_y: y.average, sd_pooled: sd, t, low, high, critical })
}

/// 0.0, 0.1, ..., 1.0
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub average: f64,
    pub predictions: Vec<usize>,
}

/// Scores both streams once per utterance, then re-fuses at every weight.
pub fn alpha_sweep(bank: &ConditionBank, test: &[LabeledUtterance], alphas: &[f64]) -> Result<Vec<SweepRow>> {
    for &a in alphas {
        check_alpha(a)?;
    }
    if test.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let streams = test
        .par_iter()
        .map(|u| bank.all_streams(&u.utterance))
        .collect::<Result<Vec<_>>>()?;
    let labels = bank.labels();
    let truth: Vec<usize> = test.iter().map(|u| u.label).collect();
    alphas
        .iter()
        .map(|&alpha| {
            let predictions = streams
                .iter()
                .map(|s| Ok(argmax(&s.fused(alpha)?).unwrap_or(0)))
                .collect::<Result<Vec<_>>>()?;
            let m = ConfusionMatrix::from_indices(&labels, &truth, &predictions)?;
            Ok(SweepRow { alpha, average: performance_table(&m).average, predictions })
        })
        .collect()
}

/// Fraction of items where `predicted == truth`, as a percentage.
pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / truth.len() as f64
}

pub fn matrix_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("identified\\true");
    for l in &m.labels {
        let _ = write!(out, ",{l}");
    }
    out.push('\n');
    for (row, l) in m.labels.iter().enumerate() {
        out.push_str(l);
        for v in &m.percent[row] {
            let _ = write!(out, ",{:.1}", round_tenth(*v));
        }
        out.push('\n');
    }
    out
}

pub fn performance_csv(p: &PerformanceTable) -> String {
    let mut out = String::from("condition,performance\n");
    for (l, v) in p.labels.iter().zip(&p.values) {
        let _ = writeln!(out, "{l},{:.1}", round_tenth(*v));
    }
    let _ = writeln!(out, "average,{:.1}", round_tenth(p.average));
    out
}

pub fn t_test_csv(name_x: &str, name_y: &str, r: &TTestResult) -> String {
    let t = r.t.map_or_else(|| "undefined".to_string(), |t| format!("{t:.3}"));
    format!(
        "system_x,system_y,mean_x,mean_y,sd_pooled,t,critical,ci_low,ci_high\n\
         {name_x},{name_y},{:.1},{:.1},{:.3},{t},{:.3},{:.3},{:.3}\n",
        round_tenth(r.mean_x),
        round_tenth(r.mean_y),
        r.sd_pooled, r.critical, r.low, r.high
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,average_performance\n");
    for r in rows {
        let _ = writeln!(out, "{:.1},{:.1}", r.alpha, round_tenth(r.average));
    }
    out
}

pub fn comparison_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("classifier,average_performance\n");
    for (name, avg) in rows {
        let _ = writeln!(out, "{name},{:.1}", round_tenth(*avg));
    }
    out
}
