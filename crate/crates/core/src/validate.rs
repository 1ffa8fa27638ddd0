//! Empirical CDFs, Kolmogorov–Smirnov distances, moment checks, and the
//! JSON report document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};

/// 1% asymptotic Kolmogorov critical constant.
pub const KS_C01: f64 = 1.63;

pub fn ks_critical(n: usize) -> f64 {
    KS_C01 / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C01 * ((n + m) / (n * m)).sqrt()
}

/// Right-continuous step function of a sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "empty sample"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::invalid("samples", "NaN in sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// #{xᵢ ≤ y}/n.
    pub fn eval(&self, y: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= y) as f64 / self.len() as f64
    }

    /// Distinct values with F_n just below and at each.
    fn jumps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.len() as f64;
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.sorted.len() {
                return None;
            }
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            let out = (x, i as f64 / n, j as f64 / n);
            i = j;
            Some(out)
        })
    }
}

/// sup |F_n − F|, taken exactly over both sides of every jump. The left
/// side uses F at the next float down, so step CDFs are handled too.
pub fn ks_distance<F: Fn(f64) -> f64>(ecdf: &EmpiricalCdf, cdf: F) -> f64 {
    ecdf.jumps()
        .map(|(x, below, at)| (at - cdf(x)).max(cdf(x.next_down()) - below))
        .fold(0.0, f64::max)
}

/// Two-sample statistic sup |F_n − G_m|.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (x, y) = (a.sorted(), b.sorted());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: usize,
    pub details: BTreeMap<String, Value>,
}

impl ValidationReport {
    /// pass ⇔ statistic ≤ threshold.
    pub fn new(test_name: impl Into<String>, statistic: f64, threshold: f64, n: usize) -> Self {
        Self {
            test_name: test_name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            n,
            details: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }
}

/// KS distance of `samples` to `cdf` against the 1% critical value.
pub fn ks_report<F: Fn(f64) -> f64>(test_name: &str, samples: Vec<f64>, cdf: F) -> Result<ValidationReport> {
    let e = EmpiricalCdf::new(samples)?;
    let n = e.len();
    Ok(ValidationReport::new(test_name, ks_distance(&e, cdf), ks_critical(n), n))
}

/// MC mean of X^m at recorded column `t_index` against `analytic`; passes when
/// the error is within `sigma_rule` standard errors.
pub fn moment_report(
    ensemble: &PathEnsemble,
    t_index: usize,
    m: f64,
    analytic: f64,
    sigma_rule: u32,
) -> Result<ValidationReport> {
    if !(m >= 1.0) {
        return Err(Error::invalid("m", format!("must be at least 1, got {m}")));
    }
    if t_index >= ensemble.n_records() {
        return Err(Error::invalid("t_index", format!("{t_index} out of {} records", ensemble.n_records())));
    }
    let xs: Vec<f64> = ensemble.column(t_index).iter().map(|x| x.powf(m)).collect();
    let (mean, se) = mean_se(&xs);
    let t = ensemble.grid.time(ensemble.step_indices[t_index]);
    Ok(
        ValidationReport::new(format!("moment_m{m}"), (mean - analytic).abs(), sigma_rule as f64 * se, xs.len())
            .with("mean", mean)
            .with("std_error", se)
            .with("analytic", analytic)
            .with("t", t)
            .with("seed", ensemble.seed)
            .with("h", ensemble.grid.h()),
    )
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One JSON document per invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub suite: String,
    pub timestamp: u64,
    pub seed: u64,
    pub reports: Vec<ValidationReport>,
}

impl ReportDocument {
    pub fn new(suite: impl Into<String>, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            timestamp: timestamp(),
            seed,
            reports: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Unix seconds, from SOURCE_DATE_EPOCH when set.
pub fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return v;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_step() {
        let e = EmpiricalCdf::new(vec![2.0]).unwrap();
        assert_eq!(e.eval(1.999), 0.0);
        assert_eq!(e.eval(2.0), 1.0);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    #[test]
    fn point_mass_matches_step_cdf() {
        let e = EmpiricalCdf::new(vec![1.0; 10]).unwrap();
        assert_eq!(ks_distance(&e, |x| if x >= 1.0 { 1.0 } else { 0.0 }), 0.0);
    }

    #[test]
    fn duplicates_counted() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(e.eval(1.0), 0.6);
        assert_eq!(e.eval(2.5), 0.8);
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a = EmpiricalCdf::new(vec![0.1, 0.5, 0.9]).unwrap();
        assert_eq!(ks_two_sample(&a, &a.clone()), 0.0);
        let b = EmpiricalCdf::new(vec![5.0, 6.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn report_pass_rule() {
        let r = ValidationReport::new("x", 0.5, 0.5, 1);
        assert!(r.pass);
        assert!(!ValidationReport::new("x", 0.51, 0.5, 1).pass);
    }
}
