//! Laws of the radial OU process (σ = 1) reflected by inversion in the sphere
//! of radius R, and the Brownian (b = 0) special case.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{bessel_i_scaled, bessel_k_scaled, ln_gamma, lower_incomplete_gamma, upper_incomplete_gamma};

/// λ(t) = (e^{2bt} − 1)/(2b), the component variance at time t.
pub fn lambda_of(b: f64, t: f64) -> f64 {
    let x = b * t;
    if x.abs() < 1e-6 {
        t * (1.0 + x + 2.0 / 3.0 * x * x + x * x * x / 3.0)
    } else {
        (2.0 * x).exp_m1() / (2.0 * b)
    }
}

/// Dimension, drift and reflection radius. `radius = ∞` is the free law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuLaw {
    pub d: usize,
    pub b: f64,
    pub radius: f64,
}

impl OuLaw {
    pub fn new(d: usize, b: f64, radius: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("d", format!("must be at least 2, got {d}")));
        }
        if !b.is_finite() {
            return Err(Error::invalid("b", "must be finite"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { d, b, radius })
    }

    pub fn brownian(d: usize, radius: f64) -> Result<Self> {
        Self::new(d, 0.0, radius)
    }

    pub fn unreflected(d: usize, b: f64) -> Result<Self> {
        Self::new(d, b, f64::INFINITY)
    }

    pub fn lambda(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain("lambda", format!("t must be positive, got {t}")));
        }
        Ok(lambda_of(self.b, t))
    }

    fn dh(&self) -> f64 {
        0.5 * self.d as f64
    }

    /// ln of 1/(2^{d/2−1} Γ(d/2) λ^{d/2}).
    fn ln_norm(&self, lambda: f64) -> f64 {
        let dh = self.dh();
        -(dh - 1.0) * std::f64::consts::LN_2 - ln_gamma(dh) - dh * lambda.ln()
    }

    fn check_inside(&self, r: f64, what: &'static str) -> Result<()> {
        if !(r > 0.0) || r > self.radius {
            return Err(Error::domain(what, format!("r = {r} outside (0, {}]", self.radius)));
        }
        Ok(())
    }
}

fn check_r(r: f64, what: &'static str) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(what, format!("r must be positive, got {r}")));
    }
    Ok(())
}

/// w_d(r, t) = e^{−r²/2λ} / (2^{d/2−1} Γ(d/2) λ^{d/2}).
pub fn ou_kernel(law: &OuLaw, r: f64, t: f64) -> Result<f64> {
    check_r(r, "ou_kernel")?;
    let l = law.lambda(t)?;
    Ok((law.ln_norm(l) - r * r / (2.0 * l)).exp())
}

/// z_d(r, t) = r^{d−1} w_d(r, t).
pub fn ou_density(law: &OuLaw, r: f64, t: f64) -> Result<f64> {
    check_r(r, "ou_density")?;
    let l = law.lambda(t)?;
    Ok(((law.d - 1) as f64 * r.ln() + law.ln_norm(l) - r * r / (2.0 * l)).exp())
}

/// w̄_d(r, t) = w_d(r, t) + w_d(R²/r, t).
pub fn ou_kernel_reflected(law: &OuLaw, r: f64, t: f64) -> Result<f64> {
    law.check_inside(r, "ou_kernel_reflected")?;
    let mirror = if law.radius.is_finite() {
        ou_kernel(law, law.radius * law.radius / r, t)?
    } else {
        0.0
    };
    Ok(ou_kernel(law, r, t)? + mirror)
}

/// z̄_d(r, t) = r^{d−1} w_d(r, t) + (R^{2d}/r^{d+1}) w_d(R²/r, t).
pub fn ou_density_reflected(law: &OuLaw, r: f64, t: f64) -> Result<f64> {
    law.check_inside(r, "ou_density_reflected")?;
    let mirror = if law.radius.is_finite() {
        let q = law.radius / r;
        q * q * ou_density(law, law.radius * q, t)?
    } else {
        0.0
    };
    Ok(ou_density(law, r, t)? + mirror)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionParams {
    pub r0: f64,
    pub s: f64,
    pub t: f64,
}

impl TransitionParams {
    pub fn new(r0: f64, s: f64, t: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::invalid("r0", format!("must be positive, got {r0}")));
        }
        if !(s >= 0.0) {
            return Err(Error::invalid("s", format!("must be non-negative, got {s}")));
        }
        if !(t > s) {
            return Err(Error::invalid("t", format!("must exceed s = {s}, got {t}")));
        }
        Ok(Self { r0, s, t })
    }
}

/// Density at time t of the radial OU process started from r₀ at time s:
/// (r/λ)(r/m)^ν e^{−(r²+m²)/2λ} I_ν(rm/λ), with m = r₀e^{b(t−s)},
/// λ = λ(t−s) and ν = d/2 − 1.
pub fn ou_transition(law: &OuLaw, r: f64, tp: &TransitionParams) -> Result<f64> {
    check_r(r, "ou_transition")?;
    let tp = TransitionParams::new(tp.r0, tp.s, tp.t)?;
    let dt = tp.t - tp.s;
    let l = lambda_of(law.b, dt);
    let m = tp.r0 * (law.b * dt).exp();
    let nu = law.dh() - 1.0;
    let x = r * m / l;
    let is = bessel_i_scaled(nu, x)?;
    if is == 0.0 {
        return Ok(0.0);
    }
    let ln = (r / l).ln() + nu * (r / m).ln() - (r - m) * (r - m) / (2.0 * l) + is.ln();
    Ok(ln.exp())
}

/// d = 2 reflected CDF: 1 − e^{−R′²/2λ} + e^{−R⁴/(2R′²λ)}.
pub fn reflected_cdf_d2(law: &OuLaw, rp: f64, t: f64) -> Result<f64> {
    if law.d != 2 {
        return Err(Error::domain("reflected_cdf_d2", format!("needs d = 2, got {}", law.d)));
    }
    law.check_inside(rp, "reflected_cdf_d2")?;
    let l = law.lambda(t)?;
    let r4 = law.radius.powi(4);
    let mirror = if law.radius.is_finite() {
        (-r4 / (2.0 * rp * rp * l)).exp()
    } else {
        0.0
    };
    Ok((-(rp * rp) / (2.0 * l)).exp_m1().abs() + mirror)
}

/// P{R₁ < 𝓑₂(t) < R₂} for 0 < R₁ < R₂ ≤ R.
pub fn reflected_cdf_d2_interval(law: &OuLaw, r1: f64, r2: f64, t: f64) -> Result<f64> {
    if !(r1 < r2) {
        return Err(Error::domain("reflected_cdf_d2_interval", format!("need r1 < r2, got {r1}, {r2}")));
    }
    Ok(reflected_cdf_d2(law, r2, t)? - reflected_cdf_d2(law, r1, t)?)
}

/// E[𝓑_d(t)^m] =
/// {(2λ)^{m/2} γ((d+m)/2, R²/2λ) + R^{2m}(2λ)^{−m/2} Γ((d−m)/2, R²/2λ)} / Γ(d/2).
pub fn reflected_moment(law: &OuLaw, m: f64, t: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::domain("reflected_moment", format!("m must be at least 1, got {m}")));
    }
    let l = law.lambda(t)?;
    let dh = law.dh();
    let two_l = 2.0 * l;
    let g = ln_gamma(dh).exp();
    if !law.radius.is_finite() {
        return Ok(two_l.powf(0.5 * m) * (ln_gamma(dh + 0.5 * m) - ln_gamma(dh)).exp());
    }
    let x = law.radius * law.radius / two_l;
    let inner = two_l.powf(0.5 * m) * lower_incomplete_gamma(dh + 0.5 * m, x)?;
    let outer = law.radius.powf(2.0 * m) / two_l.powf(0.5 * m) * upper_incomplete_gamma(dh - 0.5 * m, x)?;
    Ok((inner + outer) / g)
}

fn cartesian_norm(law: &OuLaw, x: &[f64], what: &'static str) -> Result<f64> {
    if x.len() != law.d {
        return Err(Error::domain(what, format!("point has {} coordinates, d = {}", x.len(), law.d)));
    }
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    law.check_inside(n, what)?;
    Ok(n)
}

/// (2πλ)^{−d/2}[e^{−‖x‖²/2λ} + e^{−R⁴/(2λ‖x‖²)}].
pub fn reflected_kernel_cartesian(law: &OuLaw, x: &[f64], t: f64) -> Result<f64> {
    let n = cartesian_norm(law, x, "reflected_kernel_cartesian")?;
    let l = law.lambda(t)?;
    let c = (2.0 * std::f64::consts::PI * l).powf(-law.dh());
    let mirror = if law.radius.is_finite() {
        (-law.radius.powi(4) / (2.0 * l * n * n)).exp()
    } else {
        0.0
    };
    Ok(c * ((-n * n / (2.0 * l)).exp() + mirror))
}

/// (2πλ)^{−d/2}[e^{−‖x‖²/2λ} + (R/‖x‖)^{2d} e^{−R⁴/(2λ‖x‖²)}].
pub fn reflected_density_cartesian(law: &OuLaw, x: &[f64], t: f64) -> Result<f64> {
    let n = cartesian_norm(law, x, "reflected_density_cartesian")?;
    let l = law.lambda(t)?;
    let dh = law.dh();
    let ln_c = -dh * (2.0 * std::f64::consts::PI * l).ln();
    let mirror = if law.radius.is_finite() {
        let rho = law.radius * law.radius / n;
        (ln_c + 2.0 * law.d as f64 * (law.radius / n).ln() - rho * rho / (2.0 * l)).exp()
    } else {
        0.0
    };
    Ok((ln_c - n * n / (2.0 * l)).exp() + mirror)
}

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(d: usize) -> f64 {
    let dh = 0.5 * d as f64;
    2.0 * std::f64::consts::PI.powf(dh) / ln_gamma(dh).exp()
}

/// Brownian kernel f, density g and their reflected versions at (r, t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmLaws {
    pub f: f64,
    pub g: f64,
    pub f_bar: f64,
    pub g_bar: f64,
}

pub fn bm_laws(d: usize, r: f64, t: f64, radius: f64) -> Result<BmLaws> {
    let law = OuLaw::brownian(d, radius)?;
    Ok(BmLaws {
        f: ou_kernel(&law, r, t)?,
        g: ou_density(&law, r, t)?,
        f_bar: ou_kernel_reflected(&law, r, t)?,
        g_bar: ou_density_reflected(&law, r, t)?,
    })
}

/// Coefficient of the mirrored Bessel term in the Laplace transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplaceForm {
    /// (R/r)^{d+2}, which is what the transform of ḡ_d produces.
    Corrected,
    /// R^{d−2}/r².
    AsPrinted,
}

/// ∫₀^∞ e^{−st} ḡ_d(r, t) dt =
/// 2^{−d/4+3/2} s^{(d−2)/4} r^{d/2}/Γ(d/2) · [K_ν(√(2s) r) + c·K_ν(√(2s) R²/r)],
/// ν = d/2 − 1, with c chosen by `form`.
pub fn bm_laplace_reflected_density(d: usize, r: f64, s: f64, radius: f64, form: LaplaceForm) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("bm_laplace_reflected_density", format!("s must be positive, got {s}")));
    }
    let law = OuLaw::brownian(d, radius)?;
    law.check_inside(r, "bm_laplace_reflected_density")?;
    let dh = law.dh();
    let nu = dh - 1.0;
    let q = (2.0 * s).sqrt();
    let ln_pre = (-0.25 * d as f64 + 1.5) * std::f64::consts::LN_2 + (d as f64 - 2.0) / 4.0 * s.ln()
        + dh * r.ln()
        - ln_gamma(dh);
    let k = |z: f64| -> Result<f64> { Ok(bessel_k_scaled(nu, z)?.ln() - z) };
    let mut v = (ln_pre + k(q * r)?).exp();
    if radius.is_finite() {
        let ln_c = match form {
            LaplaceForm::Corrected => (d as f64 + 2.0) * (radius / r).ln(),
            LaplaceForm::AsPrinted => (d as f64 - 2.0) * radius.ln() - 2.0 * r.ln(),
        };
        v += (ln_pre + ln_c + k(q * radius * radius / r)?).exp();
    }
    Ok(v)
}

/// Writes `r,t,kernel,density` rows for every (r, t) pair; reflected laws
/// when the radius is finite.
pub fn write_law_csv<W: Write>(law: &OuLaw, rs: &[f64], ts: &[f64], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "r,t,kernel,density")?;
    for &t in ts {
        for &r in rs {
            let (k, z) = if law.radius.is_finite() {
                (ou_kernel_reflected(law, r, t)?, ou_density_reflected(law, r, t)?)
            } else {
                (ou_kernel(law, r, t)?, ou_density(law, r, t)?)
            };
            writeln!(w, "{r},{t},{k},{z}")?;
        }
    }
    w.flush()?;
    Ok(())
}
