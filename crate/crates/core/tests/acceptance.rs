//! Acceptance suite: one pass/fail line per criterion. Runs without the libtest
//! harness so the lines always reach the test log.

use std::time::Instant;

use refldiff_core::cdf::TabulatedCdf;
use refldiff_core::disc::*;
use refldiff_core::euclidean::*;
use refldiff_core::hyperbolic::*;
use refldiff_core::pde::*;
use refldiff_core::quad::{integrate, integrate_to_infinity, QuadOptions};
use refldiff_core::reflection::*;
use refldiff_core::validate::*;
use refldiff_core::{PathEnsemble, Recording, TimeGrid};

const N_MC: usize = 100_000;
const H_MC: f64 = 1e-4;
const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: String) -> Self {
        Self { pass, summary, notes: Vec::new() }
    }

    fn note(mut self, n: String) -> Self {
        self.notes.push(n);
        self
    }
}

fn opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2, 3, 5] {
        for b in [-1.0, 0.0, 1.0] {
            for rr in [0.5, 1.0, 2.0] {
                for t in [0.25, 1.0, 4.0] {
                    let law = OuLaw::new(d, b, rr).unwrap();
                    let m = integrate(|r| ou_density_reflected(&law, r, t).unwrap(), 0.0, rr, opts()).unwrap().value;
                    worst = worst.max((m - 1.0).abs());
                }
            }
        }
    }
    let mut worst_h: f64 = 0.0;
    for d in [2, 3] {
        for s in [0.5, 1.0, 2.0] {
            for t in [0.25, 1.0, 4.0] {
                let m = integrate(|e| hyp_density_reflected(d, e, t, s).unwrap(), 0.0, s, opts()).unwrap().value;
                worst_h = worst_h.max((m - 1.0).abs());
            }
        }
    }
    Outcome::new(
        worst < 1e-7 && worst_h < 1e-7,
        format!("max |mass − 1|: euclidean {worst:.2e} (81 cases), hyperbolic {worst_h:.2e} (18 cases), tol 1e-7"),
    )
}

fn neumann() -> Outcome {
    let h = 1e-3;
    let mut worst_closed: f64 = 0.0;
    for d in [2, 3, 5] {
        for b in [-1.0, 0.0, 1.0] {
            for rr in [0.5, 1.0, 2.0] {
                let law = OuLaw::new(d, b, rr).unwrap();
                let k = |r: f64| ou_kernel_reflected(&law, r, 1.0);
                let rel = neumann_residual(k, rr, h).unwrap() / interior_derivative_scale(k, rr).unwrap();
                worst_closed = worst_closed.max(rel);
            }
        }
    }
    for d in [3, 5] {
        let k = |e: f64| hyp_kernel_reflected(d, e, 1.0, 2.0);
        worst_closed = worst_closed.max(neumann_residual(k, 2.0, h).unwrap() / interior_derivative_scale(k, 2.0).unwrap());
    }
    let k2 = |e: f64| hyp_kernel_reflected(2, e, 1.0, 2.0);
    let mut worst_quad = neumann_residual(k2, 2.0, h).unwrap() / interior_derivative_scale(k2, 2.0).unwrap();
    let kd = |r: f64| disc_reflected_laws(r, 1.0, 0.8).map(|l| l.k_bar);
    worst_quad = worst_quad.max(neumann_residual(kd, 0.8, h).unwrap() / interior_derivative_scale(kd, 0.8).unwrap());
    let free = OuLaw::unreflected(2, 1.0).unwrap();
    let k0 = |r: f64| ou_kernel(&free, r, 1.0);
    let control = neumann_residual(k0, 1.0, h).unwrap() / interior_derivative_scale(k0, 1.0).unwrap();
    let h0 = |e: f64| u_kernel(3, e, 1.0);
    let control_h = neumann_residual(h0, 2.0, h).unwrap() / interior_derivative_scale(h0, 2.0).unwrap();
    let control = control.min(control_h);
    Outcome::new(
        worst_closed < 1e-6 && worst_quad < 1e-5 && control > 1e-2,
        format!(
            "scale-relative boundary slope: closed forms {worst_closed:.2e} (tol 1e-6), quadrature-backed {worst_quad:.2e} (tol 1e-5), unreflected control {control:.2e} (> 1e-2)"
        ),
    )
}

fn pde_residuals() -> Outcome {
    let cases = [
        CauchySpec::new(Problem::OuKernel, 3, 1.0, 1.0, 1.0),
        CauchySpec::new(Problem::OuDensity, 3, 1.0, 1.0, 1.0),
        CauchySpec::new(Problem::BmKernel, 3, 0.0, 1.0, 1.0),
        CauchySpec::new(Problem::BmDensity, 2, 0.0, 1.0, 1.0),
        CauchySpec::new(Problem::HypKernel, 3, 0.0, 2.0, 1.0),
        CauchySpec::new(Problem::HypDensity, 3, 0.0, 2.0, 1.0),
        CauchySpec::new(Problem::HypKernel, 2, 0.0, 2.0, 1.0),
        CauchySpec::new(Problem::HypDensity, 2, 0.0, 2.0, 1.0),
        CauchySpec::new(Problem::DiscKernel, 2, 0.0, 0.8, 1.0),
    ];
    let mut pass = true;
    let mut min_order = f64::INFINITY;
    let mut worst_quad: f64 = 0.0;
    let mut printed = Vec::new();
    for c in cases {
        let r = cauchy_residual(&c, GridSpec::default(), None).unwrap();
        pass &= r.pass;
        if r.quadrature_backed {
            worst_quad = worst_quad.max(r.max_abs_residual);
        } else {
            min_order = min_order.min(r.convergence_order_estimate);
        }
        let p = cauchy_residual(&c.printed(), GridSpec::default(), None).unwrap();
        printed.push(format!(
            "{:?} d={}: residual {:.2e} (order {:.2}) -> {}",
            c.problem,
            c.d,
            p.max_abs_residual,
            p.convergence_order_estimate,
            if p.pass { "holds" } else { "fails" }
        ));
    }
    let mut out = Outcome::new(
        pass,
        format!(
            "{} problems: min Richardson order {min_order:.2} (closed forms, need 1.9), max residual {worst_quad:.2e} (quadrature-backed, tol 1e-5)",
            cases.len()
        ),
    );
    out = out.note("printed operator forms, for comparison:".into());
    for p in printed {
        out = out.note(format!("  {p}"));
    }
    out
}

fn ou_d2_cdf() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (b, rr, t) in [(1.0, 1.0, 1.0), (-1.0, 2.0, 0.25), (0.0, 0.5, 4.0)] {
        let law = OuLaw::new(2, b, rr).unwrap();
        for i in 1..=20 {
            let rp = rr * i as f64 / 20.0;
            let q = integrate(|r| ou_density_reflected(&law, r, t).unwrap(), 0.0, rp, opts()).unwrap().value;
            worst = worst.max((reflected_cdf_d2(&law, rp, t).unwrap() - q).abs());
        }
        let rp = 0.01 * rr;
        let ratio = reflected_cdf_d2(&law, rp, t).unwrap() / (rp * rp / (2.0 * lambda_of(b, t)));
        worst_ratio = worst_ratio.max((ratio - 1.0).abs());
    }
    Outcome::new(
        worst < 1e-8 && worst_ratio < 0.01,
        format!("closed form vs quadrature {worst:.2e} (tol 1e-8); small-R' ratio off by {:.3}% (tol 1%)", 100.0 * worst_ratio),
    )
}

fn moments() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2, 3, 5] {
        for m in [1.0, 2.0, 3.0] {
            for (b, rr, t) in [(1.0, 1.0, 1.0), (-1.0, 2.0, 0.5), (0.0, 0.5, 2.0)] {
                let law = OuLaw::new(d, b, rr).unwrap();
                let q = integrate(|r| r.powf(m) * ou_density_reflected(&law, r, t).unwrap(), 0.0, rr, opts())
                    .unwrap()
                    .value;
                worst = worst.max((reflected_moment(&law, m, t).unwrap() - q).abs());
            }
        }
    }
    let mut worst_mean: f64 = 0.0;
    for b in [-1.0, 0.0, 1.0] {
        for rr in [0.5, 1.0, 2.0] {
            for t in [0.25, 1.0, 4.0] {
                let law = OuLaw::new(3, b, rr).unwrap();
                let l = lambda_of(b, t);
                let closed = 2.0 * (2.0 * l).sqrt() / std::f64::consts::PI.sqrt() * (1.0 - (-rr * rr / (2.0 * l)).exp());
                worst_mean = worst_mean.max((reflected_moment(&law, 1.0, t).unwrap() - closed).abs());
            }
        }
    }
    Outcome::new(
        worst < 1e-8 && worst_mean < 1e-12,
        format!("moment vs quadrature {worst:.2e} (tol 1e-8); d=3 mean vs closed form {worst_mean:.2e} (tol 1e-12)"),
    )
}

fn mc_grid() -> TimeGrid {
    TimeGrid::with_step(1.0, H_MC).unwrap()
}

fn mc_opts(seed: u64) -> SimOptions {
    SimOptions::new(N_MC, seed).recording(Recording::Final)
}

fn hyp_cdf(d: usize, s: f64) -> TabulatedCdf {
    if s.is_finite() {
        TabulatedCdf::build(|e| if e > 0.0 { hyp_density_reflected(d, e, 1.0, s).unwrap() } else { 0.0 }, 0.0, s, 2000, 1e-10).unwrap()
    } else {
        TabulatedCdf::build(|e| hyp_density(d, e, 1.0).unwrap(), 0.0, 20.0, 4000, 1e-10).unwrap()
    }
}

fn with_radius(e: &PathEnsemble, radius: f64) -> PathEnsemble {
    PathEnsemble { radius, ..e.clone() }
}

fn monte_carlo(ou3: &PathEnsemble) -> Outcome {
    let crit = ks_critical(N_MC);
    let p2 = ModelParams::new(2, 1.0, 1.0, 1.0).unwrap();
    let ou2 = reflect_ensemble(&simulate_ou_components(&p2, mc_grid(), &mc_opts(SEED)).unwrap());
    let law2 = OuLaw::new(2, 1.0, 1.0).unwrap();
    let ks_ou = ks_report("ou_d2", ou2.final_values(), |r| {
        if r <= 0.0 {
            0.0
        } else {
            reflected_cdf_d2(&law2, r.min(1.0), 1.0).unwrap()
        }
    })
    .unwrap();
    let mut pass = ks_ou.pass;
    let mut parts = vec![format!("OU d=2 KS {:.4}", ks_ou.statistic)];
    for d in [2, 3] {
        let free = simulate_eta(d, mc_grid(), &mc_opts(SEED + d as u64), f64::INFINITY).unwrap();
        let refl = reflect_ensemble(&with_radius(&free, 2.0));
        let cr = hyp_cdf(d, 2.0);
        let ks_r = ks_report("hyp", refl.final_values(), |x| cr.eval(x)).unwrap();
        let cf = hyp_cdf(d, f64::INFINITY);
        let ks_f = ks_report("hyp", free.final_values(), |x| cf.eval(x)).unwrap();
        pass &= ks_r.pass && ks_f.pass;
        parts.push(format!("hyperbolic d={d} KS {:.4} (S=2), {:.4} (free)", ks_r.statistic, ks_f.statistic));
    }
    let law3 = OuLaw::new(3, 1.0, 1.0).unwrap();
    let refl3 = reflect_ensemble(&with_radius(ou3, 1.0));
    let mom = moment_report(&refl3, 1, 1.0, reflected_moment(&law3, 1.0, 1.0).unwrap(), 3).unwrap();
    pass &= mom.pass;
    parts.push(format!("OU d=3 mean err {:.2e} vs 3 SE {:.2e}", mom.statistic, mom.threshold));
    Outcome::new(pass, format!("n={N_MC}, h={H_MC}: {}; KS crit {crit:.4}", parts.join("; ")))
}

fn laplace() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut printed_general: f64 = 0.0;
    let mut printed_d3: f64 = 0.0;
    for r in [0.25, 0.5, 0.75] {
        for s in [0.5, 1.0, 2.0] {
            let q = integrate_to_infinity(|t| (-s * t).exp() * bm_laws(3, r, t, 1.0).unwrap().g_bar, 0.0, 1.0, opts())
                .unwrap()
                .value;
            let v = bm_laplace_reflected_density(3, r, s, 1.0, LaplaceForm::Corrected).unwrap();
            worst = worst.max((v - q).abs() / q);
            let p = bm_laplace_reflected_density(3, r, s, 1.0, LaplaceForm::AsPrinted).unwrap();
            printed_general = printed_general.max((p - q).abs() / q);
            let c = (2.0 * s).sqrt();
            let d3 = 2f64.powf(-0.25) * (r * (-c * r).exp() + (-c / r).exp());
            printed_d3 = printed_d3.max((d3 - q).abs() / q);
        }
    }
    Outcome::new(worst < 1e-6, format!("K_nu formula vs time quadrature, max rel gap {worst:.2e} (tol 1e-6, 9 points)"))
        .note(format!("general formula with mirrored coefficient R^(d-2)/r^2: max rel gap {printed_general:.3}"))
        .note(format!(
            "d=3 specialization with prefactor 2^(-1/4) and unit mirrored coefficient: max rel gap {printed_d3:.3}; the transform gives prefactor 2 and coefficient R^4/r^3"
        ))
}

fn hyperbolic_tails() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut at_s: f64 = 0.0;
    for d in [2, 3] {
        for s in [0.5, 1.0, 2.0] {
            for t in [0.25, 1.0, 4.0] {
                for frac in [0.2, 0.5, 0.8] {
                    let eb = frac * s;
                    let q = integrate(|e| hyp_density_reflected(d, e, t, s).unwrap(), eb, s, opts()).unwrap().value;
                    worst = worst.max((hyp_tail_reflected(d, eb, t, s).unwrap() - q).abs());
                }
                at_s = at_s.max(hyp_tail_reflected(d, s, t, s).unwrap().abs());
            }
        }
    }
    Outcome::new(
        worst < 1e-7 && at_s == 0.0,
        format!("difference of tails vs quadrature {worst:.2e} (tol 1e-7, 54 cases); value at eta_bar = S: {at_s}"),
    )
}

fn millson() -> Outcome {
    let mut worst_fd: f64 = 0.0;
    for i in 0..8 {
        for j in 0..4 {
            let eta = 0.2 + 2.8 * i as f64 / 7.0;
            let t = 0.5 + 0.5 * j as f64;
            let fd = millson_lift(u3, 3, eta, t, default_h_eta(eta), MillsonConstant::Dimension).unwrap();
            let an = u5(eta, t).unwrap();
            worst_fd = worst_fd.max((fd - an).abs() / an);
        }
    }
    let mass = |t: f64| integrate_to_infinity(|e| hyp_density(5, e, t).unwrap(), 0.0, 1.0, opts()).unwrap().value;
    let worst_mass = [0.5, 1.0, 2.0].iter().map(|&t| (mass(t) - 1.0).abs()).fold(0.0, f64::max);
    let (t, s) = (1.0, 2.0);
    let mut worst_tail: f64 = 0.0;
    for eb in [0.5, 1.0, 1.7] {
        let formula = hyp_tail_reflected_millson(3, eb, t, s, MillsonConstant::Dimension).unwrap();
        let q = integrate(|e| hyp_density_reflected(5, e, t, s).unwrap(), eb, s, opts()).unwrap().value;
        let lifted = integrate(
            |e| {
                let lift = |x: f64| millson_lift(u3, 3, x, t, default_h_eta(x), MillsonConstant::Dimension).unwrap();
                let m = s * s / e;
                lift(e) * e.sinh().powi(4) + (s / e).powi(2) * lift(m) * m.sinh().powi(4)
            },
            eb,
            s,
            opts(),
        )
        .unwrap()
        .value;
        worst_tail = worst_tail.max((formula - q).abs()).max((formula - lifted).abs());
    }
    let two_pi_mass = mass(1.0) * MillsonConstant::Dimension.value(3) / MillsonConstant::TwoPi.value(3);
    Outcome::new(
        worst_fd < 1e-6 && worst_mass < 1e-6 && worst_tail < 1e-6,
        format!("analytic vs finite difference rel {worst_fd:.2e}; u5 mass error {worst_mass:.2e}; tail routes {worst_tail:.2e} (all tol 1e-6)"),
    )
    .note(format!("with the constant 2*pi in place of d the lifted kernel has mass {two_pi_mass:.6} (3/(2*pi))"))
}

fn disc_suite() -> Outcome {
    let g = mc_grid();
    let crit = ks_critical(N_MC);
    let free = simulate_disc(g, &mc_opts(SEED + 10), None).unwrap();
    let samples = free.final_values();
    let sel = select_mapping(1.0, Some(&samples), 1e-6, crit).unwrap();
    let describe: Vec<String> = sel
        .candidates
        .iter()
        .map(|c| format!("{:?} mass {:.4} KS {:.4}", c.mapping, c.normalization, c.ks.unwrap()))
        .collect();
    let one = sel.candidates.iter().filter(|c| c.passes).count() == 1;
    let refl = reflect_ensemble(&with_radius(&free, 0.8));
    let cdf = disc_reflected_cdf(1.0, 0.8).unwrap();
    let ks = ks_report("disc_reflected", refl.final_values(), &cdf).unwrap();
    Outcome::new(
        one && sel.winner.is_some() && ks.pass,
        format!(
            "{}; winner {:?}; reflected V=0.8 KS {:.4}; crit {crit:.4}",
            describe.join(", "),
            sel.winner,
            ks.statistic
        ),
    )
}

fn r_to_infinity(ou3: &PathEnsemble) -> Outcome {
    let free = EmpiricalCdf::new(ou3.final_values()).unwrap();
    let ks: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&rr| {
            let refl = reflect_ensemble(&with_radius(ou3, rr));
            ks_two_sample(&EmpiricalCdf::new(refl.final_values()).unwrap(), &free)
        })
        .collect();
    let monotone = ks.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(monotone, format!("KS(reflected, unreflected) for R = 1, 2, 4, 8: {ks:.4?}"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if filter.iter().any(|f| !"acceptance".contains(f.as_str())) {
        return;
    }
    let started = Instant::now();
    let p3 = ModelParams::new(3, 1.0, 1.0, 1.0).unwrap();
    let ou3 = simulate_ou_components(&p3, mc_grid(), &mc_opts(SEED + 3)).unwrap();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "normalization", Box::new(normalization)),
        (2, "neumann", Box::new(neumann)),
        (3, "pde residuals", Box::new(pde_residuals)),
        (4, "OU d=2 CDF", Box::new(ou_d2_cdf)),
        (5, "moments", Box::new(moments)),
        (6, "Monte Carlo", Box::new(|| monte_carlo(&ou3))),
        (7, "Laplace transform", Box::new(laplace)),
        (8, "hyperbolic tails", Box::new(hyperbolic_tails)),
        (9, "Millson", Box::new(millson)),
        (10, "disc", Box::new(disc_suite)),
        (11, "R to infinity", Box::new(|| r_to_infinity(&ou3))),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {} ({:.1}s)", out.summary, t0.elapsed().as_secs_f64());
        for n in &out.notes {
            println!("    {n}");
        }
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of 11 criteria passed in {:.0}s", 11 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
