use std::f64::consts::PI;

use refldiff_core::euclidean::*;
use refldiff_core::quad::{integrate, integrate_to_infinity, QuadOptions};

fn opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        max_intervals: 4000,
    }
}

#[test]
fn lambda_values() {
    assert!((lambda_of(0.0, 0.7) - 0.7).abs() < 1e-16);
    assert!((lambda_of(1.0, 1.0) - 3.194_528_049_465_325).abs() < 1e-14);
    assert!((lambda_of(-1.0, 40.0) - 0.5).abs() < 1e-15);
    // series branch meets the closed form
    let b = 9.9e-7;
    assert!((lambda_of(b, 1.0) - (2.0 * b).exp_m1() / (2.0 * b)).abs() < 1e-15);
}

#[test]
fn free_kernels() {
    let law = OuLaw::unreflected(2, 0.0).unwrap();
    let t = 0.8;
    assert!((ou_kernel(&law, 1e-9, t).unwrap() - 1.0 / t).abs() < 1e-12);
    // Maxwell at λ = 0.5
    let law3 = OuLaw::unreflected(3, 0.0).unwrap();
    let maxwell = (2.0 / PI).sqrt() * 0.5f64.powf(-1.5) * (-1.0f64).exp();
    assert!((ou_kernel(&law3, 1.0, 0.5).unwrap() - maxwell).abs() < 1e-15);
    for d in [2, 3, 5] {
        for b in [-1.0, 0.0, 1.0] {
            let law = OuLaw::unreflected(d, b).unwrap();
            let m = integrate_to_infinity(|r| ou_density(&law, r, 1.0).unwrap(), 0.0, 1.0, opts()).unwrap().value;
            assert!((m - 1.0).abs() < 1e-10, "d={d} b={b}: {m}");
        }
    }
}

#[test]
fn reflected_densities_normalize() {
    for d in [2, 3, 5] {
        for b in [-1.0, 0.0, 1.0] {
            for rr in [0.5, 1.0, 2.0] {
                for t in [0.25, 1.0, 4.0] {
                    let law = OuLaw::new(d, b, rr).unwrap();
                    let m = integrate(|r| ou_density_reflected(&law, r, t).unwrap(), 0.0, rr, opts()).unwrap().value;
                    assert!((m - 1.0).abs() < 1e-8, "d={d} b={b} R={rr} t={t}: {m}");
                }
            }
        }
    }
}

#[test]
fn reflected_laws_converge_to_free_laws() {
    let free = OuLaw::unreflected(3, 0.5).unwrap();
    let z = ou_density(&free, 0.8, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for rr in [1.0, 2.0, 4.0, 8.0] {
        let gap = (ou_density_reflected(&OuLaw::new(3, 0.5, rr).unwrap(), 0.8, 1.0).unwrap() - z).abs();
        assert!(gap < prev || gap == 0.0);
        prev = gap;
    }
    assert!(prev < 1e-12);
}

#[test]
fn transition_from_near_origin() {
    for (d, b) in [(2, 0.0), (3, 1.0), (5, -0.5)] {
        let law = OuLaw::unreflected(d, b).unwrap();
        let tp = TransitionParams::new(1e-6, 0.0, 1.0).unwrap();
        for i in 0..30 {
            let r = 0.1 + 0.1 * i as f64;
            let a = ou_transition(&law, r, &tp).unwrap();
            let z = ou_density(&law, r, 1.0).unwrap();
            assert!((a - z).abs() < 1e-4 * z, "d={d} r={r}");
        }
        let tp = TransitionParams::new(1.3, 0.2, 1.0).unwrap();
        let m = integrate_to_infinity(|r| ou_transition(&law, r, &tp).unwrap(), 0.0, 1.0, opts()).unwrap().value;
        assert!((m - 1.0).abs() < 1e-9, "d={d}: {m}");
    }
}

#[test]
fn d2_cdf_closed_form() {
    let law = OuLaw::brownian(2, 1.0).unwrap();
    // λ = 0.5
    let v = reflected_cdf_d2(&law, 0.5, 0.5).unwrap();
    assert!((v - (1.0 - (-0.25f64).exp() + (-4.0f64).exp())).abs() < 1e-15);
    assert!((v - 0.239_51).abs() < 1e-5);
    assert!((reflected_cdf_d2(&law, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
    for (b, rr, t) in [(1.0, 1.0, 1.0), (-1.0, 2.0, 0.25), (0.0, 0.5, 4.0)] {
        let law = OuLaw::new(2, b, rr).unwrap();
        for i in 1..=20 {
            let rp = rr * i as f64 / 20.0;
            let q = integrate(|r| ou_density_reflected(&law, r, t).unwrap(), 0.0, rp, opts()).unwrap().value;
            assert!((reflected_cdf_d2(&law, rp, t).unwrap() - q).abs() < 1e-8);
        }
        let l = lambda_of(b, t);
        let rp = 0.01 * rr;
        let ratio = reflected_cdf_d2(&law, rp, t).unwrap() / (rp * rp / (2.0 * l));
        assert!((ratio - 1.0).abs() < 0.01);
    }
}

#[test]
fn moments_match_quadrature() {
    for d in [2, 3, 5] {
        for m in [1.0, 2.0, 3.0] {
            for (b, rr, t) in [(1.0, 1.0, 1.0), (-1.0, 2.0, 0.5), (0.0, 0.5, 2.0)] {
                let law = OuLaw::new(d, b, rr).unwrap();
                let q = integrate(|r| r.powf(m) * ou_density_reflected(&law, r, t).unwrap(), 0.0, rr, opts())
                    .unwrap()
                    .value;
                let v = reflected_moment(&law, m, t).unwrap();
                assert!((v - q).abs() < 1e-8, "d={d} m={m} b={b}: {v} vs {q}");
            }
        }
    }
}

#[test]
fn d3_mean_specialization() {
    let law = OuLaw::brownian(3, 1.0).unwrap();
    assert!((reflected_moment(&law, 1.0, 0.5).unwrap() - 0.713_271_669_674_917_9).abs() < 1e-12);
    for b in [-1.0, 0.0, 0.7] {
        for rr in [0.5, 1.0, 3.0] {
            for t in [0.1, 1.0, 3.0] {
                let law = OuLaw::new(3, b, rr).unwrap();
                let l = lambda_of(b, t);
                let closed = 2.0 * (2.0 * l).sqrt() / PI.sqrt() * (1.0 - (-rr * rr / (2.0 * l)).exp());
                assert!((reflected_moment(&law, 1.0, t).unwrap() - closed).abs() < 1e-12 * closed.max(1.0));
            }
        }
    }
}

#[test]
fn cartesian_forms() {
    let law = OuLaw::new(3, 0.4, 1.5).unwrap();
    let t = 0.9;
    let x = [0.3, -0.6, 0.5];
    let n = x.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let rotated = [n, 0.0, 0.0];
    let a = reflected_density_cartesian(&law, &x, t).unwrap();
    assert!((a - reflected_density_cartesian(&law, &rotated, t).unwrap()).abs() < 1e-15 * a);
    // density times sphere area times ‖x‖^{d−1} is the radial density
    let radial = ou_density_reflected(&law, n, t).unwrap();
    assert!((a * sphere_area(3) * n * n - radial).abs() < 1e-13 * radial);
    let k = reflected_kernel_cartesian(&law, &x, t).unwrap();
    let w = ou_kernel_reflected(&law, n, t).unwrap();
    // radial kernel carries the normalization 2^{1−d/2}/Γ(d/2) instead of (2π)^{−d/2}
    assert!((k * sphere_area(3) - w).abs() < 1e-13 * w);
    let shell = integrate(|r| reflected_density_cartesian(&law, &[r, 0.0, 0.0], t).unwrap() * sphere_area(3) * r * r, 0.0, 1.5, opts())
        .unwrap()
        .value;
    assert!((shell - 1.0).abs() < 1e-10);
    assert!(reflected_density_cartesian(&law, &[0.1, 0.1], t).is_err());
    assert!(reflected_density_cartesian(&law, &[2.0, 0.0, 0.0], t).is_err());
}

#[test]
fn brownian_specializations() {
    let (r, t) = (0.7f64, 0.6f64);
    let g3 = r * r * (2.0 / PI).sqrt() * t.powf(-1.5) * (-r * r / (2.0 * t)).exp();
    let laws = bm_laws(3, r, t, 1.0).unwrap();
    assert!((laws.g - g3).abs() < 1e-14);
    let near = ou_density(&OuLaw::unreflected(3, 1e-8).unwrap(), r, t).unwrap();
    assert!((near - g3).abs() < 1e-6);
    assert!(laws.g_bar > laws.g && laws.f_bar > laws.f);
}

#[test]
fn laplace_transform_matches_time_quadrature() {
    for r in [0.25, 0.5, 0.75] {
        for s in [0.5, 1.0, 2.0] {
            let q = integrate_to_infinity(|t| (-s * t).exp() * bm_laws(3, r, t, 1.0).unwrap().g_bar, 0.0, 1.0, opts())
                .unwrap()
                .value;
            let v = bm_laplace_reflected_density(3, r, s, 1.0, LaplaceForm::Corrected).unwrap();
            assert!((v - q).abs() < 1e-6 * q, "r={r} s={s}: {v} vs {q}");
            // d = 3 closed form
            let c = (2.0 * s).sqrt();
            let closed = 2.0 * (r * (-c * r).exp() + (-c / r).exp() / r.powi(3));
            assert!((v - closed).abs() < 1e-12 * closed);
            let printed = bm_laplace_reflected_density(3, r, s, 1.0, LaplaceForm::AsPrinted).unwrap();
            assert!((printed - q).abs() > 1e-3 * q);
        }
    }
    let free = bm_laplace_reflected_density(3, 0.5, 1.0, f64::INFINITY, LaplaceForm::Corrected).unwrap();
    assert!((free - 2.0 * 0.5 * (-(2.0f64).sqrt() * 0.5).exp()).abs() < 1e-14);
}

#[test]
fn law_csv_header_and_rows() {
    let law = OuLaw::new(2, 1.0, 1.0).unwrap();
    let mut buf = Vec::new();
    write_law_csv(&law, &[0.5, 1.0], &[1.0], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("r,t,kernel,density"));
}

#[test]
fn domain_errors() {
    assert!(OuLaw::new(1, 0.0, 1.0).is_err());
    assert!(OuLaw::new(3, 0.0, 0.0).is_err());
    let law = OuLaw::new(3, 0.0, 1.0).unwrap();
    assert!(ou_density_reflected(&law, 1.5, 1.0).is_err());
    assert!(ou_kernel(&law, 0.5, 0.0).is_err());
    assert!(reflected_moment(&law, 0.5, 1.0).is_err());
    assert!(reflected_cdf_d2(&law, 0.5, 1.0).is_err());
    assert!(TransitionParams::new(1.0, 1.0, 1.0).is_err());
}
