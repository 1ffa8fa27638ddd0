//! Reflection by inversion in a sphere, radial simulators, and local time.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ModelTag, PathEnsemble, Recording, Scheme, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::path_rng;

/// Default stand-in for a start at the origin.
pub const EPS0: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub b: f64,
    pub sigma: f64,
    pub radius: f64,
}

impl ModelParams {
    pub fn new(d: usize, b: f64, sigma: f64, radius: f64) -> Result<Self> {
        let p = Self { d, b, sigma, radius };
        p.validate()?;
        Ok(p)
    }

    /// Standard Brownian case: b = 0, σ = 1.
    pub fn brownian(d: usize, radius: f64) -> Result<Self> {
        Self::new(d, 0.0, 1.0, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d", format!("must be at least 2, got {}", self.d)));
        }
        if !self.b.is_finite() {
            return Err(Error::invalid("b", "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be non-negative, got {}", self.sigma)));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {}", self.radius)));
        }
        Ok(())
    }

    fn tag(&self) -> ModelTag {
        ModelTag::Euclidean {
            d: self.d,
            b: self.b,
            sigma: self.sigma,
        }
    }
}

/// Path count, seed, start value and what to record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub n_paths: usize,
    pub seed: u64,
    pub start: f64,
    /// Positions below this are reset to it.
    pub floor: f64,
    pub recording: Recording,
}

impl SimOptions {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            start: EPS0,
            floor: EPS0,
            recording: Recording::Full,
        }
    }

    pub fn recording(self, recording: Recording) -> Self {
        Self { recording, ..self }
    }

    pub fn start(self, start: f64) -> Self {
        Self { start, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be at least 1"));
        }
        if !(self.start > 0.0) {
            return Err(Error::invalid("start", "must be positive"));
        }
        if !(self.floor > 0.0 && self.floor <= self.start) {
            return Err(Error::invalid("floor", "must be positive and at most the start value"));
        }
        Ok(())
    }
}

/// ρ inside the sphere is kept, ρ outside is sent to R²/ρ.
pub fn reflect_radius(rho: f64, radius: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::domain("reflect_radius", format!("rho must be positive, got {rho}")));
    }
    if !(radius > 0.0) {
        return Err(Error::domain("reflect_radius", format!("radius must be positive, got {radius}")));
    }
    Ok(inversion(rho, radius))
}

#[inline]
pub(crate) fn inversion(rho: f64, radius: f64) -> f64 {
    if rho < radius {
        rho
    } else {
        radius * (radius / rho)
    }
}

/// Runs `n_paths` independent paths, each advanced by `step` over the grid,
/// and keeps the recorded columns. `step(state, rng, h)` mutates the per-path
/// state; `observe` maps the state to the recorded value.
pub(crate) fn run_paths<S, Init, Step, Obs>(
    grid: TimeGrid,
    opts: &SimOptions,
    init: Init,
    step: Step,
    observe: Obs,
) -> (Vec<usize>, Vec<f64>)
where
    S: Send,
    Init: Fn() -> S + Sync,
    Step: Fn(&mut S, &mut crate::rng::PathRng, f64) + Sync,
    Obs: Fn(&S) -> f64 + Sync,
{
    let idx = opts.recording.step_indices(grid.n_steps);
    let m = idx.len();
    let h = grid.h();
    let mut values = vec![0.0; opts.n_paths * m];
    values
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(path, row)| {
            let mut rng = path_rng(opts.seed, path as u64);
            let mut state = init();
            row[0] = observe(&state);
            let mut next = 1;
            for k in 1..=grid.n_steps {
                step(&mut state, &mut rng, h);
                if next < m && idx[next] == k {
                    row[next] = observe(&state);
                    next += 1;
                }
            }
        });
    (idx, values)
}

/// Euler–Maruyama for dY = (c/Y + μ(Y))dt + s(Y)dW on (0, ∞), clamped to
/// `[lo, hi]`. The singular part c/Y is taken at the new point, which turns
/// the step into the positive root of y² − a·y − c·h = 0 with
/// a = Y + μ(Y)h + s(Y)√h Z. Fully explicit steps from a start near zero
/// would jump by c·h/Y.
pub(crate) fn euler_scalar<M, D>(
    grid: TimeGrid,
    opts: &SimOptions,
    singular: f64,
    regular: M,
    diffusion: D,
    lo: f64,
    hi: f64,
) -> (Vec<usize>, Vec<f64>)
where
    M: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    let y0 = opts.start;
    run_paths(
        grid,
        opts,
        || y0,
        |y, rng, h| {
            let z: f64 = StandardNormal.sample(rng);
            let a = *y + regular(*y) * h + diffusion(*y) * h.sqrt() * z;
            let next = if singular > 0.0 {
                0.5 * (a + (a * a + 4.0 * singular * h).sqrt())
            } else {
                a
            };
            *y = if next.is_nan() { lo } else { next.clamp(lo, hi) };
        },
        |y| *y,
    )
}

/// Exact transition of d independent OU components dX = bX dt + σdW started
/// at the origin; records max(‖X‖, floor), so t = 0 shows the floor.
pub fn simulate_ou_components(params: &ModelParams, grid: TimeGrid, opts: &SimOptions) -> Result<PathEnsemble> {
    params.validate()?;
    opts.validate()?;
    let d = params.d;
    let h = grid.h();
    let decay = (params.b * h).exp();
    let sd = params.sigma * crate::euclidean::lambda_of(params.b, h).sqrt();
    let floor = opts.floor;
    let (step_indices, values) = run_paths(
        grid,
        opts,
        || vec![0.0; d],
        |x, rng, _| {
            for xi in x.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *xi = *xi * decay + sd * z;
            }
        },
        |x| x.iter().map(|v| v * v).sum::<f64>().sqrt().max(floor),
    );
    Ok(PathEnsemble {
        model: params.tag(),
        radius: params.radius,
        grid,
        scheme: Scheme::ExactComponents,
        seed: opts.seed,
        reflected: false,
        step_indices,
        n_paths: opts.n_paths,
        values,
    })
}

/// Radial drift (d−1)σ²/(2x) + bx.
pub fn radial_drift(params: &ModelParams, x: f64) -> f64 {
    (params.d - 1) as f64 * params.sigma * params.sigma / (2.0 * x) + params.b * x
}

/// Euler–Maruyama on the radial SDE, clamped below at `opts.floor`. The
/// (d−1)σ²/(2x) term is treated implicitly.
pub fn simulate_radial_euler(params: &ModelParams, grid: TimeGrid, opts: &SimOptions) -> Result<PathEnsemble> {
    params.validate()?;
    opts.validate()?;
    let h_max = 1e-2 * if params.b == 0.0 { 1.0 } else { (1.0 / params.b.abs()).min(1.0) };
    if grid.h() > h_max {
        log::warn!("Euler step h = {} exceeds {h_max}; expect visible bias", grid.h());
    }
    let b = params.b;
    let sigma = params.sigma;
    let (step_indices, values) = euler_scalar(
        grid,
        opts,
        (params.d - 1) as f64 * sigma * sigma / 2.0,
        move |x| b * x,
        move |_| sigma,
        opts.floor,
        f64::INFINITY,
    );
    Ok(PathEnsemble {
        model: params.tag(),
        radius: params.radius,
        grid,
        scheme: Scheme::EulerRadial,
        seed: opts.seed,
        reflected: false,
        step_indices,
        n_paths: opts.n_paths,
        values,
    })
}

/// Pointwise inversion of every recorded value; idempotent.
pub fn reflect_ensemble(ensemble: &PathEnsemble) -> PathEnsemble {
    let r = ensemble.radius;
    PathEnsemble {
        values: ensemble.values.par_iter().map(|&v| inversion(v, r)).collect(),
        reflected: true,
        ..ensemble.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub t: f64,
    pub band_eps: f64,
    pub value_per_path: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Occupation of the interior band (R−ε, R] up to the last recorded time,
/// divided by ε. Each recorded point is weighted by the time until the next
/// one, so strided recordings are allowed but coarser.
pub fn estimate_local_time(ensemble: &PathEnsemble, band_eps: f64) -> Result<LocalTimeEstimate> {
    let r = ensemble.radius;
    if !(band_eps > 0.0 && band_eps < 0.5 * r) {
        return Err(Error::invalid("band_eps", format!("must lie in (0, {}), got {band_eps}", 0.5 * r)));
    }
    if !ensemble.reflected {
        return Err(Error::Mismatch("local time needs a reflected ensemble".into()));
    }
    let times = ensemble.times();
    let dts: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = r - band_eps;
    let value_per_path: Vec<f64> = ensemble
        .paths()
        .map(|p| {
            p.iter()
                .zip(&dts)
                .filter(|(v, _)| **v > lo && **v <= r)
                .map(|(_, dt)| dt)
                .sum::<f64>()
                / band_eps
        })
        .collect();
    let (mean, std_error) = mean_se(&value_per_path);
    Ok(LocalTimeEstimate {
        t: *times.last().unwrap(),
        band_eps,
        value_per_path,
        mean,
        std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeyerItoResidual {
    pub per_path: Vec<f64>,
    pub rms: f64,
    pub max: f64,
}

/// Structural check of the reflected SDE: rebuilds 𝓑(tₙ) from the unreflected
/// increments as
///
/// 𝓑(0) + Σ 1{B≤R}(σΔW + μΔt) − Σ 1{B>R}(R²/B²)(σΔW + μΔt)
///      + Σ 1{B>R} R²σ²/B³ Δt − L
///
/// with ΔW the increments implied by the radial SDE and L the discrete
/// Tanaka local time at R, and returns max |𝓑 − RHS| per path.
pub fn meyer_ito_residual(
    unreflected: &PathEnsemble,
    reflected: &PathEnsemble,
    params: &ModelParams,
) -> Result<MeyerItoResidual> {
    if unreflected.reflected || !reflected.reflected {
        return Err(Error::Mismatch("expected an unreflected and a reflected ensemble".into()));
    }
    if unreflected.grid != reflected.grid
        || unreflected.seed != reflected.seed
        || unreflected.step_indices != reflected.step_indices
        || unreflected.n_paths != reflected.n_paths
    {
        return Err(Error::Mismatch("ensembles differ in grid, seed or shape".into()));
    }
    if (unreflected.radius - params.radius).abs() > 0.0 || (reflected.radius - params.radius).abs() > 0.0 {
        return Err(Error::Mismatch("radius differs from params".into()));
    }
    let r = params.radius;
    let s2 = params.sigma * params.sigma;
    let times = unreflected.times();
    let per_path: Vec<f64> = unreflected
        .paths()
        .zip(reflected.paths())
        .map(|(b, refl)| {
            let mut rhs = refl[0];
            let mut worst: f64 = 0.0;
            for k in 0..b.len() - 1 {
                let dt = times[k + 1] - times[k];
                let bk = b[k];
                let db = b[k + 1] - bk;
                let mu = radial_drift(params, bk);
                let dw = if params.sigma > 0.0 { (db - mu * dt) / params.sigma } else { 0.0 };
                let incr = params.sigma * dw + mu * dt;
                let tanaka = (b[k + 1] - r).abs() - (bk - r).abs() - if bk > r { db } else { -db };
                if bk <= r {
                    rhs += incr;
                } else {
                    let q = r * r / (bk * bk);
                    rhs += -q * incr + r * r * s2 / (bk * bk * bk) * dt;
                }
                rhs -= tanaka;
                worst = worst.max((refl[k + 1] - rhs).abs());
            }
            worst
        })
        .collect();
    let n = per_path.len() as f64;
    let rms = (per_path.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let max = per_path.iter().cloned().fold(0.0, f64::max);
    Ok(MeyerItoResidual { per_path, rms, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_radius_examples() {
        assert_eq!(reflect_radius(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(reflect_radius(4.0, 2.0).unwrap(), 1.0);
        assert_eq!(reflect_radius(2.0, 2.0).unwrap(), 2.0);
        assert!(reflect_radius(0.0, 1.0).is_err());
        assert!(reflect_radius(-1.0, 1.0).is_err());
    }

    #[test]
    fn params_invariants() {
        assert!(ModelParams::new(1, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(2, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2, 0.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(2, -0.5, 1.0, 1.0).is_ok());
    }

    #[test]
    fn simulation_is_thread_count_independent() {
        let p = ModelParams::brownian(3, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 50).unwrap();
        let o = SimOptions::new(64, 11);
        let a = simulate_ou_components(&p, g, &o).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_ou_components(&p, g, &o).unwrap());
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().all(|&v| v > 0.0));
        assert_eq!(a.path(0)[0], EPS0);
    }

    #[test]
    fn reflected_ensemble_is_bounded_and_idempotent() {
        let p = ModelParams::brownian(2, 0.7).unwrap();
        let e = simulate_ou_components(&p, TimeGrid::new(2.0, 40).unwrap(), &SimOptions::new(100, 1)).unwrap();
        let r = reflect_ensemble(&e);
        assert!(r.values.iter().all(|&v| v > 0.0 && v <= 0.7));
        assert_eq!(reflect_ensemble(&r).values, r.values);
    }

    #[test]
    fn deterministic_decay() {
        // σ = 0, b < 0: Euler on x' = bx from x0 gives x0(1 + bh)^n.
        let p = ModelParams::new(2, -1.0, 0.0, 10.0).unwrap();
        let g = TimeGrid::new(1.0, 100).unwrap();
        let e = simulate_radial_euler(&p, g, &SimOptions::new(2, 0).start(1.0)).unwrap();
        let expect = (1.0f64 - 0.01).powi(100);
        assert!((e.final_values()[0] - expect).abs() < 1e-13);
        let refl = reflect_ensemble(&e);
        let res = meyer_ito_residual(&e, &refl, &p).unwrap();
        assert!(res.max < 1e-13, "{}", res.max);
    }

    #[test]
    fn local_time_band_checks() {
        let p = ModelParams::brownian(3, 1.0).unwrap();
        let e = simulate_ou_components(&p, TimeGrid::new(1.0, 10).unwrap(), &SimOptions::new(4, 3)).unwrap();
        assert!(estimate_local_time(&e, 0.1).is_err());
        let r = reflect_ensemble(&e);
        assert!(estimate_local_time(&r, 0.6).is_err());
        assert!(estimate_local_time(&r, 0.0).is_err());
        let far = ModelParams::brownian(3, 100.0).unwrap();
        let e = simulate_ou_components(&far, TimeGrid::new(1.0, 10).unwrap(), &SimOptions::new(4, 3)).unwrap();
        let lt = estimate_local_time(&reflect_ensemble(&e), 1.0).unwrap();
        assert_eq!(lt.mean, 0.0);
    }
}
