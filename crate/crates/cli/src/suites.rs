//! Suite execution. Each suite appends to one report document and writes its
//! artifacts to the configured targets.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use refldiff_core::cdf::TabulatedCdf;
use refldiff_core::disc::{
    disc_area_kernel, disc_cdf, disc_kernel, disc_reflected_cdf, disc_reflected_laws, select_mapping, simulate_disc,
    DiscMapping,
};
use refldiff_core::euclidean::{
    lambda_of, ou_density, ou_density_reflected, ou_kernel, ou_kernel_reflected, reflected_cdf_d2, reflected_moment,
    OuLaw,
};
use refldiff_core::hyperbolic::{
    default_h_eta, hyp_density, hyp_density_reflected, hyp_kernel_reflected, hyp_tail_reflected_millson,
    millson_lift, simulate_eta, u_kernel, MillsonConstant,
};
use refldiff_core::pde::{cauchy_residual, interior_derivative_scale, neumann_residual, CauchySpec, GridSpec, Problem};
use refldiff_core::quad::{integrate, QuadOptions};
use refldiff_core::reflection::{reflect_ensemble, simulate_ou_components, simulate_radial_euler};
use refldiff_core::validate::{ks_critical, ks_report, moment_report};
use refldiff_core::{ModelParams, PathEnsemble, Recording, ReportDocument, SimOptions, ValidationReport};
use serde_json::Value;

use crate::config::{Experiment, Family, SchemeChoice, Suite};
use crate::error::CliError;

/// Runs every configured suite in order. Human-readable lines go to `log`.
pub fn execute(exp: &Experiment, suite_name: &str, log: &mut dyn Write) -> Result<ReportDocument, CliError> {
    let mut doc = ReportDocument::new(suite_name, exp.seed);
    let mut sim: Option<Simulated> = None;
    for suite in &exp.suites {
        match suite {
            Suite::Simulate => {
                let s = simulate(exp)?;
                emit(exp.targets.paths.as_deref(), |w| {
                    if is_binary(exp.targets.paths.as_deref()) {
                        s.main.write_binary(w)
                    } else {
                        s.main.write_csv(w)
                    }
                })?;
                say(log, format!("simulate: {} paths x {} records", s.main.n_paths, s.main.n_records()));
                sim = Some(s);
            }
            Suite::Law => {
                let report = law(exp)?;
                say(log, format!("law: {} points, {}", exp.law_points, verdict(&report)));
                doc.reports.push(report);
            }
            Suite::Pde => pde(exp, &mut doc, log)?,
            Suite::Validate => {
                if sim.is_none() {
                    sim = Some(simulate(exp)?);
                }
                let before = doc.reports.len();
                validate(exp, sim.as_ref().unwrap(), &mut doc)?;
                for r in &doc.reports[before..] {
                    say(log, format!("validate: {} {}", r.test_name, verdict(r)));
                }
            }
            Suite::Millson => {
                let before = doc.reports.len();
                millson(exp, &mut doc)?;
                for r in &doc.reports[before..] {
                    say(log, format!("millson: {} {}", r.test_name, verdict(r)));
                }
            }
        }
    }
    Ok(doc)
}

fn say(log: &mut dyn Write, line: String) {
    let _ = writeln!(log, "{line}");
}

fn verdict(r: &ValidationReport) -> String {
    format!(
        "{} ({:.3e} vs {:.3e})",
        if r.pass { "PASS" } else { "FAIL" },
        r.statistic,
        r.threshold
    )
}

fn is_binary(path: Option<&Path>) -> bool {
    path.and_then(|p| p.extension()).is_some_and(|e| e == "bin")
}

/// Writes to `path`, or to standard output when there is none.
pub fn emit<F>(path: Option<&Path>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> refldiff_core::Result<()>,
{
    let wrap = |p: &Path, source: io::Error| CliError::Output {
        path: p.display().to_string(),
        source,
    };
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|q| !q.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| wrap(parent, e))?;
            }
            let f = File::create(p).map_err(|e| wrap(p, e))?;
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush().map_err(|e| wrap(p, e))?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush().map_err(|e| wrap(Path::new("<stdout>"), e))?;
        }
    }
    Ok(())
}

pub fn write_report(path: Option<&Path>, doc: &ReportDocument) -> Result<(), CliError> {
    emit(path, |w| {
        serde_json::to_writer_pretty(&mut *w, doc)?;
        writeln!(w)?;
        Ok(())
    })
}

struct Simulated {
    /// The process of interest: reflected when the radius is finite.
    main: PathEnsemble,
    /// Unreflected disc paths, kept for mapping selection.
    disc_free: Option<PathEnsemble>,
}

fn sim_options(exp: &Experiment) -> SimOptions {
    let recording = match exp.record_every {
        None => Recording::Final,
        Some(1) => Recording::Full,
        Some(k) => Recording::Every(k),
    };
    let mut opts = SimOptions::new(exp.n_paths, exp.seed).recording(recording);
    if let Some(s) = exp.start {
        opts = opts.start(s);
        opts.floor = opts.floor.min(s);
    }
    opts
}

fn simulate(exp: &Experiment) -> Result<Simulated, CliError> {
    let opts = sim_options(exp);
    let grid = exp.grid;
    Ok(match exp.family {
        Family::Ou | Family::Bm => {
            let params = ModelParams::new(exp.d, exp.b, 1.0, exp.radius)?;
            let free = match exp.scheme {
                SchemeChoice::Exact => simulate_ou_components(&params, grid, &opts)?,
                SchemeChoice::Euler => simulate_radial_euler(&params, grid, &opts)?,
            };
            let main = if exp.reflected() { reflect_ensemble(&free) } else { free };
            Simulated { main, disc_free: None }
        }
        Family::Hyperbolic => Simulated {
            main: simulate_eta(exp.d, grid, &opts, exp.radius)?,
            disc_free: None,
        },
        Family::Disc => {
            let free = simulate_disc(grid, &opts, None)?;
            let main = if exp.reflected() {
                reflect_ensemble(&PathEnsemble {
                    radius: exp.radius,
                    ..free.clone()
                })
            } else {
                free.clone()
            };
            Simulated {
                main,
                disc_free: Some(free),
            }
        }
    })
}

/// Kernel and density at (r, t) for the configured family.
fn laws(exp: &Experiment, r: f64, t: f64) -> refldiff_core::Result<(f64, f64)> {
    let reflected = exp.reflected();
    match exp.family {
        Family::Ou | Family::Bm => {
            if reflected {
                let law = OuLaw::new(exp.d, exp.b, exp.radius)?;
                Ok((ou_kernel_reflected(&law, r, t)?, ou_density_reflected(&law, r, t)?))
            } else {
                let law = OuLaw::unreflected(exp.d, exp.b)?;
                Ok((ou_kernel(&law, r, t)?, ou_density(&law, r, t)?))
            }
        }
        Family::Hyperbolic => {
            if reflected {
                Ok((
                    hyp_kernel_reflected(exp.d, r, t, exp.radius)?,
                    hyp_density_reflected(exp.d, r, t, exp.radius)?,
                ))
            } else {
                Ok((u_kernel(exp.d, r, t)?, hyp_density(exp.d, r, t)?))
            }
        }
        Family::Disc => {
            if reflected {
                let l = disc_reflected_laws(r, t, exp.radius)?;
                Ok((l.k_bar, l.h_bar))
            } else {
                Ok((
                    disc_area_kernel(r, t)?,
                    disc_kernel(r, t, DiscMapping::StandardTanhHalf)?,
                ))
            }
        }
    }
}

/// Upper end of the tabulated range: the radius when reflected, else a
/// point beyond which the mass is negligible.
fn support_end(exp: &Experiment, t: f64) -> f64 {
    if exp.reflected() {
        return exp.radius;
    }
    let eta_max = |d: usize| (d as f64 - 1.0) * t + 8.0 * (2.0 * t).sqrt() + 1.0;
    match exp.family {
        Family::Ou | Family::Bm => lambda_of(exp.b, t).sqrt() * ((exp.d as f64).sqrt() + 8.0),
        Family::Hyperbolic => eta_max(exp.d),
        Family::Disc => (0.5 * eta_max(2)).tanh(),
    }
}

fn density_cdf(exp: &Experiment, t: f64, n_intervals: usize) -> refldiff_core::Result<TabulatedCdf> {
    let hi = support_end(exp, t);
    TabulatedCdf::build(
        |r| {
            if r <= 0.0 {
                0.0
            } else {
                laws(exp, r, t).map(|l| l.1).unwrap_or(f64::NAN)
            }
        },
        0.0,
        hi,
        n_intervals,
        1e-12,
    )
}

fn model_details(exp: &Experiment, r: ValidationReport) -> ValidationReport {
    let radius = if exp.reflected() { Value::from(exp.radius) } else { Value::Null };
    r.with("family", format!("{:?}", exp.family).to_lowercase())
        .with("d", exp.d)
        .with("b", exp.b)
        .with("radius", radius)
        .with("t", exp.grid.t_end)
}

/// Writes the (r, kernel, density, cdf) table and reports the captured mass.
fn law(exp: &Experiment) -> Result<ValidationReport, CliError> {
    let t = exp.grid.t_end;
    let n = exp.law_points;
    let table = density_cdf(exp, t, n)?;
    let hi = table.hi();
    let w = hi / n as f64;
    let rows: Vec<(f64, f64, f64, f64)> = (1..=n)
        .map(|i| {
            let r = if i == n { hi } else { w * i as f64 };
            let (k, z) = laws(exp, r, t)?;
            Ok((r, k, z, table.eval(r)))
        })
        .collect::<refldiff_core::Result<_>>()?;
    emit(exp.targets.law.as_deref(), |out| {
        writeln!(out, "r,kernel,density,cdf")?;
        for (r, k, z, c) in &rows {
            writeln!(out, "{r},{k},{z},{c}")?;
        }
        Ok(())
    })?;
    let mass = table.total();
    Ok(model_details(exp, ValidationReport::new("law_mass", (mass - 1.0).abs(), 1e-6, n)).with("mass", mass))
}

fn problems(family: Family) -> &'static [Problem] {
    match family {
        Family::Ou => &[Problem::OuKernel, Problem::OuDensity],
        Family::Bm => &[Problem::BmKernel, Problem::BmDensity],
        Family::Hyperbolic => &[Problem::HypKernel, Problem::HypDensity],
        Family::Disc => &[Problem::DiscKernel],
    }
}

fn problem_name(p: Problem) -> String {
    serde_json::to_value(p).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

/// Cauchy residuals of the corrected and printed operator forms, plus the
/// Neumann slope of each reflected kernel. Only the corrected forms count
/// towards the exit status.
fn pde(exp: &Experiment, doc: &mut ReportDocument, log: &mut dyn Write) -> Result<(), CliError> {
    let t = exp.grid.t_end;
    let grid = GridSpec::default();
    say(log, format!("{:<14} {:<10} {:<10} {:>7} {:>12} {:>10}", "problem", "corrected", "as_printed", "order", "residual", "neumann"));
    for &p in problems(exp.family) {
        let spec = CauchySpec::new(p, exp.d, exp.b, exp.radius, t);
        let fixed = cauchy_residual(&spec, grid, exp.pde_h)?;
        let printed = cauchy_residual(&spec.printed(), grid, exp.pde_h)?;
        let threshold = if fixed.quadrature_backed { 1e-5 } else { 1e-6 * fixed.scale };
        let mut report = ValidationReport::new(format!("cauchy_{}", problem_name(p)), fixed.max_abs_residual, threshold, grid.n)
            .with("order", finite_or_null(fixed.convergence_order_estimate))
            .with("scale", fixed.scale)
            .with("h", fixed.h)
            .with("quadrature_backed", fixed.quadrature_backed)
            .with("printed_max_abs_residual", printed.max_abs_residual)
            .with("printed_pass", printed.pass);
        report.pass = fixed.pass;
        doc.reports.push(model_details(exp, report));

        let mut neumann_cell = "-".to_string();
        if !matches!(p, Problem::OuDensity | Problem::BmDensity | Problem::HypDensity) {
            let k = |r: f64| spec.reflected_law(r, t);
            let h = (1e-3f64).min(exp.radius / 20.0);
            let rel = neumann_residual(k, exp.radius, h)? / interior_derivative_scale(k, exp.radius)?;
            let tol = if fixed.quadrature_backed { 1e-5 } else { 1e-6 };
            let r = ValidationReport::new(format!("neumann_{}", problem_name(p)), rel, tol, 1).with("h", h);
            neumann_cell = if r.pass { "PASS" } else { "FAIL" }.to_string();
            doc.reports.push(model_details(exp, r));
        }
        say(
            log,
            format!(
                "{:<14} {:<10} {:<10} {:>7.2} {:>12.3e} {:>10}",
                problem_name(p),
                if fixed.pass { "PASS" } else { "FAIL" },
                if printed.pass { "PASS" } else { "FAIL" },
                fixed.convergence_order_estimate,
                fixed.max_abs_residual,
                neumann_cell
            ),
        );
    }
    Ok(())
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::Null
    }
}

fn validate(exp: &Experiment, sim: &Simulated, doc: &mut ReportDocument) -> Result<(), CliError> {
    let ens = &sim.main;
    let t = ens.grid.t_end;
    let last = ens.n_records() - 1;
    let samples = ens.final_values();
    let name = "ks_final";
    let ks = match exp.family {
        Family::Ou | Family::Bm if exp.reflected() && exp.d == 2 => {
            let law = OuLaw::new(2, exp.b, exp.radius)?;
            ks_report(name, samples, |r| {
                if r <= 0.0 {
                    0.0
                } else {
                    reflected_cdf_d2(&law, r.min(exp.radius), t).unwrap_or(f64::NAN)
                }
            })?
        }
        Family::Disc if exp.reflected() => ks_report(name, samples, disc_reflected_cdf(t, exp.radius)?)?,
        Family::Disc => ks_report(name, samples, disc_cdf(t, DiscMapping::StandardTanhHalf)?)?,
        _ => {
            let table = density_cdf(exp, t, 2000)?;
            ks_report(name, samples, |r| table.eval(r))?
        }
    };
    let scheme = serde_json::to_value(ens.scheme)?;
    let sim_details = |r: ValidationReport| {
        model_details(exp, r)
            .with("seed", exp.seed)
            .with("h", ens.grid.h())
            .with("scheme", scheme.clone())
    };
    doc.reports.push(sim_details(ks));

    if matches!(exp.family, Family::Ou | Family::Bm) && exp.reflected() {
        let law = OuLaw::new(exp.d, exp.b, exp.radius)?;
        for &m in &exp.moments {
            let analytic = reflected_moment(&law, m, t)?;
            doc.reports.push(sim_details(moment_report(ens, last, m, analytic, exp.sigma_rule)?));
        }
    }

    if let Some(free) = &sim.disc_free {
        let xs = free.final_values();
        let crit = ks_critical(xs.len());
        let sel = select_mapping(t, Some(&xs), 1e-6, crit)?;
        let standard = sel
            .candidates
            .iter()
            .find(|c| c.mapping == DiscMapping::StandardTanhHalf)
            .and_then(|c| c.ks)
            .unwrap_or(f64::NAN);
        let mut r = ValidationReport::new("disc_mapping_selection", standard, crit, xs.len())
            .with("winner", serde_json::to_value(sel.winner)?)
            .with("candidates", serde_json::to_value(&sel.candidates)?);
        r.pass = sel.winner == Some(DiscMapping::StandardTanhHalf);
        doc.reports.push(sim_details(r));
    }
    Ok(())
}

/// The two routes to u_{d+2}(η, t) from u_d.
pub struct MillsonRoutes {
    pub analytic: f64,
    pub lifted: f64,
}

impl MillsonRoutes {
    pub fn relative_error(&self) -> f64 {
        let diff = (self.lifted - self.analytic).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.analytic.abs()
        }
    }
}

pub fn millson_routes(from_d: usize, eta: f64, t: f64) -> refldiff_core::Result<MillsonRoutes> {
    let analytic = u_kernel(from_d + 2, eta, t)?;
    let lifted = millson_lift(
        |e, s| u_kernel(from_d, e, s),
        from_d,
        eta,
        t,
        default_h_eta(eta),
        MillsonConstant::Dimension,
    )?;
    Ok(MillsonRoutes { analytic, lifted })
}

pub fn millson_report(from_d: usize, eta: f64, t: f64) -> refldiff_core::Result<(MillsonRoutes, ValidationReport)> {
    let routes = millson_routes(from_d, eta, t)?;
    let r = ValidationReport::new(format!("millson_lift_d{from_d}"), routes.relative_error(), 1e-6, 1)
        .with("eta", eta)
        .with("t", t)
        .with("analytic", routes.analytic)
        .with("lifted", routes.lifted);
    Ok((routes, r))
}

fn millson(exp: &Experiment, doc: &mut ReportDocument) -> Result<(), CliError> {
    let t = exp.grid.t_end;
    let from_d = exp.millson_from_d;
    doc.reports.push(millson_report(from_d, exp.millson_eta, t)?.1);
    if exp.family == Family::Hyperbolic && exp.reflected() && from_d == 3 {
        let s = exp.radius;
        let eta_bar = 0.5 * s;
        let formula = hyp_tail_reflected_millson(3, eta_bar, t, s, MillsonConstant::Dimension)?;
        let opts = QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_intervals: 4000,
        };
        let q = integrate(|e| hyp_density_reflected(5, e, t, s).unwrap_or(f64::NAN), eta_bar, s, opts)?.value;
        doc.reports.push(
            ValidationReport::new("millson_tail_d5", (formula - q).abs(), 1e-6, 1)
                .with("eta_bar", eta_bar)
                .with("t", t)
                .with("radius", s)
                .with("formula", formula)
                .with("quadrature", q),
        );
    }
    Ok(())
}
