//! Simulated radial paths on a uniform time grid, and their CSV / binary
//! serializations.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid tᵢ = i·h, i = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::invalid("t_end", format!("must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        Ok(Self { t_end, n_steps })
    }

    /// Grid with the step closest to `h` that divides `t_end` evenly.
    pub fn with_step(t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        Self::new(t_end, ((t_end / h).round() as usize).max(1))
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.t_end
        } else {
            step as f64 * self.h()
        }
    }
}

/// Which grid points a simulation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recording {
    /// Every grid point.
    Full,
    /// Every k-th grid point, plus the final one.
    Every(usize),
    /// Only t = 0 and t = t_end.
    Final,
}

impl Recording {
    pub fn step_indices(&self, n_steps: usize) -> Vec<usize> {
        match *self {
            Recording::Full => (0..=n_steps).collect(),
            Recording::Every(k) => {
                let k = k.max(1);
                let mut v: Vec<usize> = (0..=n_steps).step_by(k).collect();
                if *v.last().unwrap() != n_steps {
                    v.push(n_steps);
                }
                v
            }
            Recording::Final => vec![0, n_steps],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact Gaussian transitions of independent OU components; radial norm recorded.
    ExactComponents,
    /// Euler–Maruyama on the radial OU/Bessel SDE.
    EulerRadial,
    /// Euler–Maruyama on the hyperbolic distance SDE.
    EulerHyperbolic,
    /// Euler–Maruyama on the Poincaré-disc radius SDE.
    EulerDisc,
}

/// Model description carried alongside the simulated values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelTag {
    Euclidean { d: usize, b: f64, sigma: f64 },
    Hyperbolic { d: usize },
    Disc,
}

/// `n_paths` × `step_indices.len()` row-major matrix of positive radial values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub model: ModelTag,
    /// Reflection radius (R, S or V).
    pub radius: f64,
    pub grid: TimeGrid,
    pub scheme: Scheme,
    pub seed: u64,
    pub reflected: bool,
    pub step_indices: Vec<usize>,
    pub n_paths: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    model: ModelTag,
    radius: f64,
    grid: TimeGrid,
    scheme: Scheme,
    seed: u64,
    reflected: bool,
    step_indices: Vec<usize>,
    n_paths: usize,
}

const MAGIC: &[u8; 8] = b"RFLDENS1";

impl PathEnsemble {
    pub fn n_records(&self) -> usize {
        self.step_indices.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.step_indices.iter().map(|&s| self.grid.time(s)).collect()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.n_records();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_records())
    }

    /// Values of all paths at recorded column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.paths().map(|p| p[j]).collect()
    }

    /// One-time marginal at the final grid point.
    pub fn final_values(&self) -> Vec<f64> {
        self.column(self.n_records() - 1)
    }

    /// Column index of grid step `step`, if recorded.
    pub fn record_of_step(&self, step: usize) -> Option<usize> {
        self.step_indices.binary_search(&step).ok()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        writeln!(w, "path_id,step,t,value")?;
        let times = self.times();
        for (i, p) in self.paths().enumerate() {
            for (j, v) in p.iter().enumerate() {
                writeln!(w, "{},{},{},{}", i, self.step_indices[j], times[j], v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary dump: 8-byte magic, u64 LE header length, JSON header, then the
    /// values as little-endian f64 in row-major (path-major) order.
    pub fn write_binary<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        let header = serde_json::to_vec(&BinaryHeader {
            model: self.model,
            radius: self.radius,
            grid: self.grid,
            scheme: self.scheme,
            seed: self.seed,
            reflected: self.reflected,
            step_indices: self.step_indices.clone(),
            n_paths: self.n_paths,
        })?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Mismatch("not a path-ensemble dump".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let h: BinaryHeader = serde_json::from_slice(&header)?;
        let n = h.n_paths * h.step_indices.len();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok(Self {
            model: h.model,
            radius: h.radius,
            grid: h.grid,
            scheme: h.scheme,
            seed: h.seed,
            reflected: h.reflected,
            step_indices: h.step_indices,
            n_paths: h.n_paths,
            values,
        })
    }

    /// Parses the `path_id,step,t,value` CSV produced by [`write_csv`]; only
    /// the values are recovered, the metadata must be supplied.
    ///
    /// [`write_csv`]: PathEnsemble::write_csv
    pub fn read_csv_values<R: Read>(input: R) -> Result<Vec<(usize, usize, f64, f64)>> {
        let mut rows = Vec::new();
        for (lineno, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Mismatch(format!("bad CSV row {}: {line}", lineno + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            rows.push((
                f[0].parse().map_err(|_| bad())?,
                f[1].parse().map_err(|_| bad())?,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
            ));
        }
        Ok(rows)
    }
}
