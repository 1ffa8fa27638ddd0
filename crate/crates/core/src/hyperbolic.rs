//! Hyperbolic Brownian motion on the Poincaré half-space: the distance η from
//! the reference point, its kernels u_d, reflection by ηη′ = S², tails, and
//! simulation of η.
//!
//! Kernels are normalized against the radial weight: ∫₀^∞ u_d sinh^{d−1}η dη = 1.
//! The generator of η is ∂² + (d−1)coth η ∂.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ensemble::{ModelTag, PathEnsemble, Scheme, TimeGrid};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::reflection::{euler_scalar, inversion, SimOptions};
use crate::specfun::{erfc, MAX_ARGUMENT};

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypParams {
    pub d: usize,
    pub s: f64,
}

impl HypParams {
    pub fn new(d: usize, s: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("d", format!("must be at least 2, got {d}")));
        }
        if !(s > 0.0) {
            return Err(Error::invalid("S", format!("must be positive, got {s}")));
        }
        Ok(Self { d, s })
    }
}

/// Point (x, x_d) of the upper half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypPoint {
    pub x: Vec<f64>,
    pub x_d: f64,
}

impl HypPoint {
    pub fn new(x: Vec<f64>, x_d: f64) -> Result<Self> {
        if !(x_d > 0.0) {
            return Err(Error::invalid("x_d", format!("must be positive, got {x_d}")));
        }
        Ok(Self { x, x_d })
    }
}

/// η with cosh η = (|x|² + x_d² + 1)/(2x_d).
pub fn hyperbolic_distance(p: &HypPoint) -> f64 {
    let sq: f64 = p.x.iter().map(|v| v * v).sum();
    let delta = ((sq + (p.x_d - 1.0) * (p.x_d - 1.0)) / (2.0 * p.x_d)).max(0.0);
    acosh1p(delta)
}

/// acosh(1 + x) without cancellation.
fn acosh1p(x: f64) -> f64 {
    (x + (x * (x + 2.0)).sqrt()).ln_1p()
}

/// ln sinh x for x > 0.
pub fn ln_sinh(x: f64) -> f64 {
    if x < 1.0 {
        x.sinh().ln()
    } else {
        x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

fn check_eta_t(eta: f64, t: f64, what: &'static str) -> Result<()> {
    if !(eta >= 0.0) {
        return Err(Error::domain(what, format!("eta must be non-negative, got {eta}")));
    }
    if eta > MAX_ARGUMENT {
        return Err(Error::range(what, format!("eta = {eta} exceeds {MAX_ARGUMENT}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(what, format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// True when p_d(η, t) is far below the smallest double.
fn negligible(d: usize, eta: f64, t: f64) -> bool {
    eta > MAX_ARGUMENT || eta * eta / (4.0 * t) - (d as f64 - 1.0) * eta > 1000.0
}

/// e^{η²/4t} ∫_η^∞ φ e^{−φ²/4t} / √(cosh φ − cosh η) dφ.
///
/// With u² = cosh φ − cosh η the integrand becomes 2φe^{−φ²/4t}/√(x(x+2)),
/// x = cosh φ − 1, which is smooth at u = 0. The u-range [0, √cosh η] is done
/// in u, the rest in φ.
fn u2_scaled_integral(eta: f64, t: f64, tol: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: tol,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let base = 2.0 * (0.5 * eta).sinh().powi(2);
    let inner = |u: f64| {
        let x = base + u * u;
        let phi = acosh1p(x);
        2.0 * phi * (-(phi - eta) * (phi + eta) / (4.0 * t)).exp() / (x * (x + 2.0)).sqrt()
    };
    let u_max = eta.cosh().sqrt();
    let near = integrate(inner, 0.0, u_max, opts)?;
    let phi0 = acosh1p(base + u_max * u_max);
    let outer = |phi: f64| {
        let gap = 2.0 * (0.5 * (phi + eta)).sinh() * (0.5 * (phi - eta)).sinh();
        phi * (-(phi - eta) * (phi + eta) / (4.0 * t)).exp() / gap.sqrt()
    };
    let scale = (2.0 * t / phi0).min(t.sqrt()).max(1e-3);
    let far = integrate_to_infinity(outer, phi0, scale, opts)?;
    Ok(near.value + far.value)
}

/// u₂(η, t) = e^{−t/4}/(√π(2t)^{3/2}) ∫_η^∞ φe^{−φ²/4t}/√(cosh φ − cosh η) dφ,
/// to absolute tolerance `tol` on the scaled integral.
pub fn u2_with_tol(eta: f64, t: f64, tol: f64) -> Result<f64> {
    check_eta_t(eta, t, "u2")?;
    if negligible(2, eta, t) {
        return Ok(0.0);
    }
    let pre = (-0.25 * t - eta * eta / (4.0 * t)).exp() / (SQRT_PI * (2.0 * t).powf(1.5));
    Ok(pre * u2_scaled_integral(eta, t, tol)?)
}

pub fn u2(eta: f64, t: f64) -> Result<f64> {
    u2_with_tol(eta, t, 1e-12)
}

/// u₃(η, t) = e^{−t}/(2√π t^{3/2}) · η e^{−η²/4t}/sinh η.
pub fn u3(eta: f64, t: f64) -> Result<f64> {
    check_eta_t(eta, t, "u3")?;
    Ok(ln_u3(eta, t).exp())
}

fn ln_u3(eta: f64, t: f64) -> f64 {
    let ratio = if eta < 1e-4 {
        -eta * eta / 6.0
    } else {
        eta.ln() - ln_sinh(eta)
    };
    -t - (2.0 * SQRT_PI * t.powf(1.5)).ln() + ratio - eta * eta / (4.0 * t)
}

/// coth η − 1/η.
fn coth_minus_inv(eta: f64) -> f64 {
    if eta < 1e-3 {
        eta / 3.0 - eta.powi(3) / 45.0
    } else {
        1.0 / eta.tanh() - 1.0 / eta
    }
}

/// ∂_η u₃.
pub fn du3_deta(eta: f64, t: f64) -> Result<f64> {
    Ok(-u3(eta, t)? * (coth_minus_inv(eta) + eta / (2.0 * t)))
}

/// Normalizing constant of the Millson step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MillsonConstant {
    /// u_{d+2} = −e^{−dt}/(d sinh η) ∂u_d; preserves the radial normalization.
    Dimension,
    /// u_{d+2} = −e^{−dt}/(2π sinh η) ∂u_d; the volume-normalized constant.
    TwoPi,
}

impl MillsonConstant {
    pub fn value(self, d: usize) -> f64 {
        match self {
            MillsonConstant::Dimension => d as f64,
            MillsonConstant::TwoPi => 2.0 * std::f64::consts::PI,
        }
    }
}

/// Default stencil step for [`millson_lift`].
pub fn default_h_eta(eta: f64) -> f64 {
    1e-4 * eta.max(1.0)
}

/// u_{d+2}(η, t) from u_d by a 5-point central difference of step `h_eta`.
pub fn millson_lift<F>(u_d: F, d: usize, eta: f64, t: f64, h_eta: f64, constant: MillsonConstant) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if !(h_eta > 0.0) || eta <= 2.0 * h_eta {
        return Err(Error::domain(
            "millson_lift",
            format!("eta = {eta} too small for a stencil of step {h_eta}"),
        ));
    }
    let f = |x: f64| u_d(x, t);
    let deriv = (f(eta - 2.0 * h_eta)? - 8.0 * f(eta - h_eta)? + 8.0 * f(eta + h_eta)? - f(eta + 2.0 * h_eta)?)
        / (12.0 * h_eta);
    Ok(-(-(d as f64) * t).exp() / (constant.value(d) * eta.sinh()) * deriv)
}

/// u₅ from the analytic derivative of u₃.
pub fn u5(eta: f64, t: f64) -> Result<f64> {
    check_eta_t(eta, t, "u5")?;
    Ok(ln_u5(eta, t).exp())
}

fn ln_u5(eta: f64, t: f64) -> f64 {
    // −∂u₃/sinh η = u₃·(coth η − 1/η + η/2t)/sinh η, and the bracket over
    // sinh η tends to 1/3 + 1/2t at the origin.
    let ratio = if eta < 1e-4 {
        (1.0 / 3.0 + 1.0 / (2.0 * t)).ln()
    } else {
        (coth_minus_inv(eta) + eta / (2.0 * t)).ln() - ln_sinh(eta)
    };
    -3.0 * t - 3f64.ln() + ln_u3(eta, t) + ratio
}

fn u2_scaled_prefactor(eta: f64, t: f64) -> Result<f64> {
    Ok(u2_scaled_integral(eta, t, 1e-13)? / (SQRT_PI * (2.0 * t).powf(1.5)))
}

/// u₄ from u₂ by the Millson step, differentiating the smooth factor
/// A(η) = u₂ e^{η²/4t + t/4} numerically.
pub fn u4(eta: f64, t: f64) -> Result<f64> {
    check_eta_t(eta, t, "u4")?;
    if negligible(4, eta, t) {
        return Ok(0.0);
    }
    let h = default_h_eta(eta).max(1e-3);
    let e = if eta <= 2.0 * h { 2.0 * h + 1e-12 } else { eta };
    let a = |x: f64| u2_scaled_prefactor(x, t);
    let da = (a(e - 2.0 * h)? - 8.0 * a(e - h)? + 8.0 * a(e + h)? - a(e + 2.0 * h)?) / (12.0 * h);
    let neg_du2 = (-0.25 * t - eta * eta / (4.0 * t)).exp() * (eta / (2.0 * t) * a(eta)? - da);
    Ok((-2.0 * t).exp() / (2.0 * eta.sinh()) * neg_du2)
}

/// u_d for d ∈ {2, 3, 4, 5}.
pub fn u_kernel(d: usize, eta: f64, t: f64) -> Result<f64> {
    match d {
        2 => u2(eta, t),
        3 => u3(eta, t),
        4 => u4(eta, t),
        5 => u5(eta, t),
        _ => Err(Error::domain("u_kernel", format!("d = {d} not supported (2..=5)"))),
    }
}

/// p_d(η, t) = u_d(η, t) sinh^{d−1} η.
pub fn hyp_density(d: usize, eta: f64, t: f64) -> Result<f64> {
    check_eta_t(eta.min(MAX_ARGUMENT), t, "hyp_density")?;
    if eta == 0.0 || negligible(d, eta, t) {
        return Ok(0.0);
    }
    let ln_w = (d as f64 - 1.0) * ln_sinh(eta);
    match d {
        3 => Ok((ln_u3(eta, t) + ln_w).exp()),
        5 => Ok((ln_u5(eta, t) + ln_w).exp()),
        _ => {
            let u = u_kernel(d, eta, t)?;
            Ok(if u > 0.0 { (u.ln() + ln_w).exp() } else { 0.0 })
        }
    }
}

/// η ↦ η inside the sphere, S²/η outside.
pub fn hyp_reflect(eta: f64, s: f64) -> Result<f64> {
    crate::reflection::reflect_radius(eta, s)
}

fn check_inside(eta: f64, s: f64, what: &'static str) -> Result<()> {
    if !(eta > 0.0) || eta > s {
        return Err(Error::domain(what, format!("eta = {eta} outside (0, {s}]")));
    }
    Ok(())
}

/// ū_d = u_d(η, t) + u_d(S²/η, t).
pub fn hyp_kernel_reflected(d: usize, eta: f64, t: f64, s: f64) -> Result<f64> {
    check_inside(eta, s, "hyp_kernel_reflected")?;
    let m = s * s / eta;
    let mirror = if negligible(d, m, t) { 0.0 } else { u_kernel(d, m, t)? };
    Ok(u_kernel(d, eta, t)? + mirror)
}

/// p̄_d = p_d(η, t) + (S/η)² p_d(S²/η, t).
pub fn hyp_density_reflected(d: usize, eta: f64, t: f64, s: f64) -> Result<f64> {
    check_inside(eta, s, "hyp_density_reflected")?;
    let q = s / eta;
    Ok(hyp_density(d, eta, t)? + q * q * hyp_density(d, s * q, t)?)
}

/// P{η_d(t) > η̄} for d ∈ {2, 3}: the single-integral form for d = 2 and
/// the erfc closed form for d = 3.
pub fn hyp_tail(d: usize, eta_bar: f64, t: f64) -> Result<f64> {
    check_eta_t(eta_bar.min(MAX_ARGUMENT), t, "hyp_tail")?;
    if negligible(d, eta_bar, t) {
        return Ok(0.0);
    }
    match d {
        2 => {
            // 2C ∫_{η̄}^∞ φ e^{−φ²/4t} √(cosh φ − cosh η̄) dφ
            let opts = QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_intervals: 4000,
            };
            let f = |phi: f64| {
                let gap = 2.0 * (0.5 * (phi + eta_bar)).sinh() * (0.5 * (phi - eta_bar)).sinh();
                phi * (-(phi - eta_bar) * (phi + eta_bar) / (4.0 * t)).exp() * gap.max(0.0).sqrt()
            };
            let q = integrate_to_infinity(f, eta_bar, t.sqrt().min(1.0), opts)?;
            let c = (-0.25 * t - eta_bar * eta_bar / (4.0 * t)).exp() / (SQRT_PI * (2.0 * t).powf(1.5));
            Ok(2.0 * c * q.value)
        }
        3 => {
            // C₃ ∫_{η̄}^∞ η sinh η e^{−η²/4t} dη, C₃ = e^{−t}/(2√π t^{3/2}).
            let st = t.sqrt();
            let g = |shift: f64| (-(eta_bar - shift) * (eta_bar - shift) / (4.0 * t)).exp();
            let plus = 2.0 * t * g(2.0 * t) + 2.0 * t * SQRT_PI * st * erfc((eta_bar - 2.0 * t) / (2.0 * st));
            let minus = 2.0 * t * g(-2.0 * t) - 2.0 * t * SQRT_PI * st * erfc((eta_bar + 2.0 * t) / (2.0 * st));
            Ok(0.5 * (plus - minus) / (2.0 * SQRT_PI * t * st))
        }
        _ => Err(Error::domain("hyp_tail", format!("closed form only for d = 2, 3, got {d}"))),
    }
}

/// P{𝓔_d(t) > η̄} = P{η_d > η̄} − P{η_d > S²/η̄}.
pub fn hyp_tail_reflected(d: usize, eta_bar: f64, t: f64, s: f64) -> Result<f64> {
    check_inside(eta_bar, s, "hyp_tail_reflected")?;
    if eta_bar == s {
        return Ok(0.0);
    }
    Ok(hyp_tail(d, eta_bar, t)? - hyp_tail(d, s * s / eta_bar, t)?)
}

/// ∫_a^b f over a finite or infinite range; `b = ∞` truncates by chunks.
fn integrate_range<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions, scale: f64) -> Result<f64> {
    if b.is_finite() {
        Ok(integrate(f, a, b, opts)?.value)
    } else {
        Ok(integrate_to_infinity(f, a, scale, opts)?.value)
    }
}

/// Tail of the reflected (d+2)-dimensional distance from the d-dimensional
/// law via the Millson step:
///
/// (e^{−dt}/c)[sinh^d η̄ u_d(η̄) − sinh^d(S²/η̄) u_d(S²/η̄) + d ∫_{η̄}^{S²/η̄} cosh η p_d dη]
///
/// `s = ∞` gives the unreflected tail.
pub fn hyp_tail_reflected_millson(d: usize, eta_bar: f64, t: f64, s: f64, constant: MillsonConstant) -> Result<f64> {
    if s.is_finite() {
        check_inside(eta_bar, s, "hyp_tail_reflected_millson")?;
        if eta_bar == s {
            return Ok(0.0);
        }
    } else if !(eta_bar > 0.0) {
        return Err(Error::domain("hyp_tail_reflected_millson", format!("eta_bar must be positive, got {eta_bar}")));
    }
    let upper = if s.is_finite() { s * s / eta_bar } else { f64::INFINITY };
    let boundary = |eta: f64| -> Result<f64> {
        if !eta.is_finite() || negligible(d + 1, eta, t) {
            return Ok(0.0);
        }
        let u = u_kernel(d, eta, t)?;
        Ok(if u > 0.0 { (u.ln() + d as f64 * ln_sinh(eta)).exp() } else { 0.0 })
    };
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 4000,
    };
    let top = upper.min(cutoff(d + 1, t));
    let integral = if top > eta_bar {
        integrate_range(
            |eta| eta.cosh() * hyp_density(d, eta, t).unwrap_or(f64::NAN),
            eta_bar,
            top,
            opts,
            1.0,
        )?
    } else {
        0.0
    };
    let pre = (-(d as f64) * t).exp() / constant.value(d);
    Ok(pre * (boundary(eta_bar)? - boundary(upper)? + d as f64 * integral))
}

/// η beyond which p_d(·, t) is negligible.
pub fn cutoff(d: usize, t: f64) -> f64 {
    // solve η²/4t − (d−1)η = 1000
    let k = d as f64 - 1.0;
    2.0 * t * (k + (k * k + 1000.0 / t).sqrt())
}

/// Euler–Maruyama on dη = (d−1)coth η dt + √2 dW, clamped below at the
/// floor, then reflected by η ↦ S²/η when `s` is finite.
pub fn simulate_eta(d: usize, grid: TimeGrid, opts: &SimOptions, s: f64) -> Result<PathEnsemble> {
    let p = HypParams::new(d, if s.is_finite() { s } else { 1.0 })?;
    if !(s > 0.0) {
        return Err(Error::invalid("S", format!("must be positive, got {s}")));
    }
    if opts.n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be at least 1"));
    }
    let k = (p.d - 1) as f64;
    let (step_indices, mut values) = euler_scalar(
        grid,
        opts,
        k,
        move |eta| k * coth_minus_inv(eta),
        |_| std::f64::consts::SQRT_2,
        opts.floor,
        MAX_ARGUMENT,
    );
    if s.is_finite() {
        for v in values.iter_mut() {
            *v = inversion(*v, s);
        }
    }
    Ok(PathEnsemble {
        model: ModelTag::Hyperbolic { d },
        radius: s,
        grid,
        scheme: Scheme::EulerHyperbolic,
        seed: opts.seed,
        reflected: s.is_finite(),
        step_indices,
        n_paths: opts.n_paths,
        values,
    })
}

/// Writes `eta,t,kernel,density` rows; reflected laws when `s` is finite.
pub fn write_law_csv<W: Write>(d: usize, s: f64, etas: &[f64], ts: &[f64], out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "eta,t,kernel,density")?;
    for &t in ts {
        for &eta in etas {
            let (k, p) = if s.is_finite() {
                (hyp_kernel_reflected(d, eta, t, s)?, hyp_density_reflected(d, eta, t, s)?)
            } else {
                (u_kernel(d, eta, t)?, hyp_density(d, eta, t)?)
            };
            writeln!(w, "{eta},{t},{k},{p}")?;
        }
    }
    w.flush()?;
    Ok(())
}
