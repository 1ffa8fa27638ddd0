//! Hyperbolic Brownian motion in the Poincaré disc: Euclidean radius D(t),
//! its law under the two radius ↔ distance mappings, and reflection inside
//! the concentric disc of radius V < 1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cdf::TabulatedCdf;
use crate::ensemble::{ModelTag, PathEnsemble, Scheme, TimeGrid};
use crate::error::{Error, Result};
use crate::hyperbolic::{cutoff, hyp_density, u2};
use crate::quad::{integrate, QuadOptions};
use crate::reflection::{euler_scalar, inversion, SimOptions};

/// Upper clamp for simulated radii.
pub const DISC_CAP: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscMapping {
    /// η = log((1+r²)/(1−r²)).
    ArtanhSquared,
    /// η = log((1+r)/(1−r)), the inverse of r = tanh(η/2).
    StandardTanhHalf,
}

impl DiscMapping {
    pub const ALL: [DiscMapping; 2] = [DiscMapping::ArtanhSquared, DiscMapping::StandardTanhHalf];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscParams {
    pub v: f64,
    pub mapping: DiscMapping,
}

impl DiscParams {
    pub fn new(v: f64, mapping: DiscMapping) -> Result<Self> {
        check_v(v)?;
        Ok(Self { v, mapping })
    }
}

fn check_v(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid("V", format!("must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_r(r: f64, what: &'static str) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(what, format!("r = {r} outside (0, 1)")));
    }
    Ok(())
}

pub fn r_to_eta(r: f64, mapping: DiscMapping) -> Result<f64> {
    check_r(r, "r_to_eta")?;
    Ok(match mapping {
        DiscMapping::ArtanhSquared => 2.0 * (r * r).atanh(),
        DiscMapping::StandardTanhHalf => 2.0 * r.atanh(),
    })
}

pub fn eta_to_r(eta: f64, mapping: DiscMapping) -> Result<f64> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("eta_to_r", format!("eta must be positive, got {eta}")));
    }
    let th = (0.5 * eta).tanh();
    Ok(match mapping {
        DiscMapping::ArtanhSquared => th.sqrt(),
        DiscMapping::StandardTanhHalf => th,
    })
}

/// dη/dr.
fn jacobian(r: f64, mapping: DiscMapping) -> f64 {
    match mapping {
        DiscMapping::ArtanhSquared => 4.0 * r / (1.0 - r.powi(4)),
        DiscMapping::StandardTanhHalf => 2.0 / (1.0 - r * r),
    }
}

/// Candidate radial density of D(t).
///
/// `ArtanhSquared`: u₂(η(r), t)·4r/(1−r⁴).
/// `StandardTanhHalf`: u₂(η(r), t)·sinh η·dη/dr = u₂(η(r), t)·4r/(1−r²)².
pub fn disc_kernel(r: f64, t: f64, mapping: DiscMapping) -> Result<f64> {
    check_r(r, "disc_kernel")?;
    let eta = r_to_eta(r, mapping)?;
    if eta > cutoff(2, t) {
        return Ok(0.0);
    }
    let u = u2(eta, t)?;
    Ok(match mapping {
        DiscMapping::ArtanhSquared => u * jacobian(r, mapping),
        DiscMapping::StandardTanhHalf => {
            let q = 1.0 - r * r;
            u * 4.0 * r / (q * q)
        }
    })
}

/// Kernel of D(t) with respect to hyperbolic area: k(r, t) = u₂(2 artanh r, t).
/// This is the function the disc generator evolves.
pub fn disc_area_kernel(r: f64, t: f64) -> Result<f64> {
    check_r(r, "disc_area_kernel")?;
    let eta = 2.0 * r.atanh();
    if eta > cutoff(2, t) {
        return Ok(0.0);
    }
    u2(eta, t)
}

/// Reflected kernel k̄ and density h̄ at 0 < r ≤ V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscReflectedLaws {
    pub k_bar: f64,
    pub h_bar: f64,
}

/// k̄ = k(r) + k(V²/r) with k the area kernel; h̄ = h(r) + (V/r)² h(V²/r),
/// h the standard-mapping density.
pub fn disc_reflected_laws(r: f64, t: f64, v: f64) -> Result<DiscReflectedLaws> {
    check_v(v)?;
    if !(r > 0.0) || r > v {
        return Err(Error::domain("disc_reflected_laws", format!("r = {r} outside (0, {v}]")));
    }
    let m = v * v / r;
    let inside = m < 1.0;
    let k_bar = disc_area_kernel(r, t)? + if inside { disc_area_kernel(m, t)? } else { 0.0 };
    let q = v / r;
    let h_bar = disc_kernel(r, t, DiscMapping::StandardTanhHalf)?
        + if inside { q * q * disc_kernel(m, t, DiscMapping::StandardTanhHalf)? } else { 0.0 };
    Ok(DiscReflectedLaws { k_bar, h_bar })
}

/// Unreflected CDF of D(t) under a mapping, built from the candidate density.
pub fn disc_cdf(t: f64, mapping: DiscMapping) -> Result<impl Fn(f64) -> f64> {
    let table = TabulatedCdf::build(
        |r| {
            if r >= 1.0 {
                0.0
            } else {
                disc_kernel(r, t, mapping).unwrap_or(f64::NAN)
            }
        },
        0.0,
        1.0,
        4000,
        1e-10,
    )?;
    Ok(move |r: f64| table.eval(r))
}

/// CDF of the reflected radius 𝓓(t) on (0, V]: F(r) + 1 − F(min(V²/r, 1)).
pub fn disc_reflected_cdf(t: f64, v: f64) -> Result<impl Fn(f64) -> f64> {
    check_v(v)?;
    let f = disc_cdf(t, DiscMapping::StandardTanhHalf)?;
    let total = f(1.0);
    Ok(move |r: f64| {
        if r <= 0.0 {
            0.0
        } else if r >= v {
            total
        } else {
            f(r) + total - f((v * v / r).min(1.0))
        }
    })
}

/// Normalization and, when samples are given, KS distance of one mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCandidate {
    pub mapping: DiscMapping,
    pub normalization: f64,
    pub ks: Option<f64>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingSelection {
    pub t: f64,
    pub candidates: Vec<MappingCandidate>,
    /// The unique passing mapping, if exactly one passes.
    pub winner: Option<DiscMapping>,
}

/// Checks ∫₀¹ candidate dr = 1 (to `norm_tol`) and, given simulated D(t)
/// samples, KS below `ks_threshold`, for both mappings.
pub fn select_mapping(t: f64, samples: Option<&[f64]>, norm_tol: f64, ks_threshold: f64) -> Result<MappingSelection> {
    let opts = QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let mut candidates = Vec::new();
    for mapping in DiscMapping::ALL {
        // integrate in η to avoid the r → 1 pile-up
        let top = cutoff(2, t).min(36.0);
        let normalization = integrate(
            |eta| {
                let r = eta_to_r(eta, mapping).unwrap();
                disc_kernel(r, t, mapping).unwrap() / jacobian(r, mapping)
            },
            0.0,
            top,
            opts,
        )?
        .value;
        let ks = match samples {
            Some(s) => {
                let cdf = disc_cdf(t, mapping)?;
                Some(crate::validate::ks_distance(&crate::validate::EmpiricalCdf::new(s.to_vec())?, cdf))
            }
            None => None,
        };
        let passes = (normalization - 1.0).abs() < norm_tol && ks.map_or(true, |k| k < ks_threshold);
        candidates.push(MappingCandidate {
            mapping,
            normalization,
            ks,
            passes,
        });
    }
    let passing: Vec<_> = candidates.iter().filter(|c| c.passes).collect();
    let winner = if passing.len() == 1 { Some(passing[0].mapping) } else { None };
    Ok(MappingSelection { t, candidates, winner })
}

/// Pushforward check: ∫₀^{r₀} candidate dr against ∫₀^{η(r₀)} p₂ dη.
pub fn pushforward_gap(r0: f64, t: f64, mapping: DiscMapping) -> Result<f64> {
    let opts = QuadOptions::with_abs_tol(1e-11);
    let lhs = integrate(|r| disc_kernel(r, t, mapping).unwrap(), 0.0, r0, opts)?.value;
    let rhs = integrate(|e| hyp_density(2, e, t).unwrap(), 0.0, r_to_eta(r0, mapping)?, opts)?.value;
    Ok(lhs - rhs)
}

/// Euler–Maruyama on dD = (1−D²)²/(4D) dt + (1−D²)/√2 dW, kept in
/// [floor, 1 − 1e−12], then reflected by D ↦ V²/D when `v` is given.
pub fn simulate_disc(grid: TimeGrid, opts: &SimOptions, v: Option<f64>) -> Result<PathEnsemble> {
    if let Some(v) = v {
        check_v(v)?;
    }
    if opts.n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be at least 1"));
    }
    // (1−D²)²/(4D) = 1/(4D) − D/2 + D³/4
    let (step_indices, mut values) = euler_scalar(
        grid,
        opts,
        0.25,
        |x| -0.5 * x + 0.25 * x * x * x,
        |x| (1.0 - x * x) * std::f64::consts::FRAC_1_SQRT_2,
        opts.floor,
        DISC_CAP,
    );
    if let Some(v) = v {
        for x in values.iter_mut() {
            *x = inversion(*x, v);
        }
    }
    Ok(PathEnsemble {
        model: ModelTag::Disc,
        radius: v.unwrap_or(1.0),
        grid,
        scheme: Scheme::EulerDisc,
        seed: opts.seed,
        reflected: v.is_some(),
        step_indices,
        n_paths: opts.n_paths,
        values,
    })
}

/// Writes `r,t,kernel,density` rows: the area kernel and standard-mapping
/// density, or their reflected versions when `v` is given.
pub fn write_law_csv<W: Write>(v: Option<f64>, rs: &[f64], ts: &[f64], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "r,t,kernel,density")?;
    for &t in ts {
        for &r in rs {
            let (k, h) = match v {
                Some(v) => {
                    let l = disc_reflected_laws(r, t, v)?;
                    (l.k_bar, l.h_bar)
                }
                None => (disc_area_kernel(r, t)?, disc_kernel(r, t, DiscMapping::StandardTanhHalf)?),
            };
            writeln!(w, "{r},{t},{k},{h}")?;
        }
    }
    w.flush()?;
    Ok(())
}
