//! CDFs tabulated from a density by piecewise quadrature, interpolated with
//! monotone cubic Hermite polynomials that use the density as the slope.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedCdf {
    /// Tabulates ∫_lo^x density on `n_intervals` equal pieces of `[lo, hi]`.
    /// Values are not renormalized; `total()` reports the captured mass.
    pub fn build<F>(density: F, lo: f64, hi: f64, n_intervals: usize, abs_tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        if !(hi > lo) || n_intervals == 0 {
            return Err(Error::domain("TabulatedCdf::build", format!("bad range [{lo}, {hi}]")));
        }
        let w = (hi - lo) / n_intervals as f64;
        let nodes: Vec<f64> = (0..=n_intervals)
            .map(|i| if i == n_intervals { hi } else { lo + w * i as f64 })
            .collect();
        let opts = QuadOptions {
            abs_tol: abs_tol / n_intervals as f64,
            rel_tol: 1e-13,
            max_intervals: 2000,
        };
        let pieces: Vec<f64> = nodes
            .par_windows(2)
            .map(|p| integrate(&density, p[0], p[1], opts).map(|q| q.value))
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        values.push(0.0);
        for p in pieces {
            if !p.is_finite() {
                return Err(Error::NonConvergence {
                    context: "TabulatedCdf::build",
                    detail: "non-finite density".into(),
                });
            }
            acc += p.max(0.0);
            values.push(acc);
        }
        let mut slopes: Vec<f64> = nodes.par_iter().map(|&x| density(x).max(0.0)).collect();
        for s in slopes.iter_mut() {
            if !s.is_finite() {
                *s = 0.0;
            }
        }
        limit_slopes(&nodes, &values, &mut slopes);
        Ok(Self { nodes, values, slopes })
    }

    pub fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// CDF at x; 0 below the table, `total()` above it.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let i = match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        v.clamp(y0, y1)
    }
}

// Fritsch–Carlson: keep each cubic monotone on its interval.
fn limit_slopes(x: &[f64], y: &[f64], m: &mut [f64]) {
    for i in 0..x.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta;
        let b = m[i + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[i] = tau * a * delta;
            m[i + 1] = tau * b * delta;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_cdf() {
        let c = TabulatedCdf::build(|x: f64| (-x).exp(), 0.0, 40.0, 400, 1e-12).unwrap();
        for &x in &[0.013, 0.5, 1.0, 2.77, 10.0] {
            // cubic Hermite error is at most h⁴/384 · max|F⁗|
            assert!((c.eval(x) - (1.0 - (-x).exp())).abs() < 3e-7, "{x}");
        }
        assert!((c.total() - 1.0).abs() < 1e-12);
        assert_eq!(c.eval(-1.0), 0.0);
    }

    #[test]
    fn monotone_with_flat_stretch() {
        let f = |x: f64| if (1.0..2.0).contains(&x) { 0.0 } else { 0.5 };
        let c = TabulatedCdf::build(f, 0.0, 3.0, 30, 1e-10).unwrap();
        let mut prev = 0.0;
        for i in 0..=3000 {
            let v = c.eval(i as f64 * 1e-3);
            assert!(v >= prev);
            prev = v;
        }
    }
}
