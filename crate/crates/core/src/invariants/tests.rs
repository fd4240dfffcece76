use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dforms::Coeff;
use crate::fields::{make_closed_form, make_flat, make_rt_perturbation, make_schwarzschild, Parity};

fn random_sphere_point<R: Rng>(n: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if s > 0.1 && s <= 1.0 {
            return v.iter().map(|t| r * t / s).collect();
        }
    }
}

/// `(1 + ε f) δ` with `f = (1 + a·x/|x|) |x|^{-p}`, not scalar flat.
fn bumpy(n: usize, eps: f64, p: f64, a: &[f64]) -> MetricField {
    let a = a.to_vec();
    let f = Arc::new(move |x: &[Tps]| {
        let n = x.len();
        let mut r2 = x[0].zero_like();
        for xi in x {
            r2.add_product(1.0, xi, xi);
        }
        let r = r2.sqrt();
        let mut dir = x[0].zero_like();
        for (xi, ai) in x.iter().zip(&a) {
            dir.add_scaled(*ai, xi);
        }
        let ang = dir.div(&r).add_scalar(1.0);
        let f = (&ang * &r2.powf(-p / 2.0)).scale(eps).add_scalar(1.0);
        let zero = x[0].zero_like();
        (0..n * n).map(|ij| if ij / n == ij % n { f.clone() } else { zero.clone() }).collect()
    });
    make_closed_form(n, f, p, 1.0, "bumpy").unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// --- quadrature -------------------------------------------------------------

#[test]
fn sphere_area_and_moments() {
    let s2 = sphere_rule(3, 1.0, 6).unwrap();
    assert!((s2.integrate_scalar(|_| Ok(1.0)).unwrap() - 4.0 * PI).abs() < 1e-12);
    for n in 3..=5 {
        let rule = sphere_rule(n, 2.5, 5).unwrap();
        for i in 0..n {
            assert!(rule.integrate_scalar(|p| Ok(p.x[i])).unwrap().abs() < 1e-12);
        }
    }
    let s3 = sphere_rule(4, 1.0, 4).unwrap();
    let v = s3.integrate_scalar(|p| Ok(p.x[0] * p.x[0])).unwrap();
    assert!((v - PI * PI / 2.0).abs() < 1e-10);
}

#[test]
fn total_weight_matches_sphere_volume() {
    for n in 3..=8 {
        let level = if n > 6 { 3 } else { 5 };
        for r in [1.0, 7.0] {
            let rule = sphere_rule(n, r, level).unwrap();
            let exact = unit_sphere_volume(n) * r.powi(n as i32 - 1);
            assert!(rel(rule.total_weight(), exact) < 1e-10, "n={n}");
            assert_eq!(rule.nodes.len(), 2 * level.pow(n as u32 - 1));
        }
    }
}

#[test]
fn polynomial_exactness_up_to_declared_degree() {
    // ∫ x_1² x_2² = ω_{n-1} / (n (n+2)), ∫ x_1⁴ = 3 ω_{n-1} / (n (n+2)) on the unit sphere
    for n in 3..=6 {
        let rule = sphere_rule(n, 1.0, 3).unwrap();
        assert!(rule.degree() >= 4);
        let w = unit_sphere_volume(n) / (n * (n + 2)) as f64;
        let a = rule.integrate_scalar(|p| Ok(p.x[0].powi(2) * p.x[n - 1].powi(2))).unwrap();
        let b = rule.integrate_scalar(|p| Ok(p.x[n - 2].powi(4))).unwrap();
        assert!(rel(a, w) < 1e-12 && rel(b, 3.0 * w) < 1e-12, "n={n}");
    }
}

#[test]
fn nodes_are_antipodally_symmetric() {
    for n in 3..=5 {
        let rule = sphere_rule(n, 3.0, 4).unwrap();
        for p in &rule.nodes {
            let found = rule.nodes.iter().any(|q| {
                q.x.iter().zip(&p.x).all(|(a, b)| (a + b).abs() < 1e-12) && (q.weight - p.weight).abs() < 1e-14 * p.weight
            });
            assert!(found);
        }
    }
}

#[test]
fn sphere_rule_rejects_bad_input() {
    assert_eq!(sphere_rule(2, 1.0, 3).unwrap_err(), Error::UnsupportedDimension(2));
    assert_eq!(sphere_rule(9, 1.0, 3).unwrap_err(), Error::UnsupportedDimension(9));
    assert!(sphere_rule(3, 1.0, 0).is_err());
    assert!(sphere_rule(3, -1.0, 2).is_err());
}

#[test]
fn compensated_sum_is_order_independent() {
    assert_eq!(neumaier_sum([1e16, 1.0, -1e16]), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut v: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-8..8))).collect();
    let a = neumaier_sum(v.iter().copied());
    v.reverse();
    let b = neumaier_sum(v.iter().copied());
    assert!((a - b).abs() <= 1e-13 * v.iter().map(|t| t.abs()).sum::<f64>());
}

#[test]
fn quadrature_is_thread_count_independent() {
    let g = make_schwarzschild(3, 1, 1.0, &[0.5, -0.3, 0.2], None).unwrap();
    let ctx = GbcContext::new(3, 1).unwrap();
    let rule = sphere_rule(3, 30.0, 8).unwrap();
    let f = |p: &SphereNode| center_forms(&g, &p.x, &ctx).map(|w| w.iter().map(|c| c.norm()).collect());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| rule.integrate(3, f)).unwrap();
    let b = four.install(|| rule.integrate(3, f)).unwrap();
    assert_eq!(a, b);
}

// --- extrapolation ----------------------------------------------------------

#[test]
fn extrapolate_constant_sequence() {
    let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&r| (r, 2.5)).collect();
    let e = extrapolate(&s).unwrap();
    assert_eq!(e.limit, 2.5);
    assert_eq!(e.residual, 0.0);
    assert!(e.degenerate && e.exponent.is_none());
}

#[test]
fn extrapolate_power_law() {
    let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&r| (r, 5.0 + 3.0 / r)).collect();
    let e = extrapolate(&s).unwrap();
    assert!((e.limit - 5.0).abs() < 1e-9, "{e:?}");
    assert!((e.exponent.unwrap() - 1.0).abs() < 1e-6);
    assert!(!e.flagged);
}

#[test]
fn extrapolate_with_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0, 160.0]
        .iter()
        .map(|&r| (r, 5.0 + 3.0 / r + 1e-6 * rng.gen_range(-1.0..1.0)))
        .collect();
    let e = extrapolate(&s).unwrap();
    assert!((e.limit - 5.0).abs() < 1e-5, "{e:?}");
}

#[test]
fn extrapolate_errors() {
    assert!(matches!(extrapolate(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::DegenerateFit(_))));
    assert!(matches!(extrapolate(&[(2.0, 1.0), (1.0, 2.0), (3.0, 1.0)]), Err(Error::DegenerateFit(_))));
    assert!(extrapolate_with(&[(1.0, 1.0), (2.0, 2.0), (4.0, 3.0)], 1.0, 3).is_err());
}

#[test]
fn multiplicative_model_resolves_power_families() {
    // 2 (1 + u)^13 with u = r^{-1/2}/2 decays too slowly for a short additive series
    let s: Vec<(f64, f64)> = (0..5)
        .map(|j| {
            let r = 20.0 * 2f64.powi(j);
            (r, 2.0 * (1.0 + 0.5 / r.sqrt()).powi(13))
        })
        .collect();
    let e = extrapolate_auto(&s, 0.5, 3).unwrap();
    assert_eq!(e.model, FitModel::Multiplicative);
    assert!(rel(e.limit, 2.0) < 1e-4, "{e:?}");
    let add = extrapolate_with(&s, 0.5, 3).unwrap();
    assert!(rel(add.limit, 2.0) > 1e-3);
}

#[test]
fn non_convergence_is_flagged() {
    let radii: Vec<f64> = (0..5).map(|j| 20.0 * 2f64.powi(j)).collect();
    let fit = |f: &dyn Fn(f64, usize) -> f64, s: f64| {
        let v: Vec<(f64, f64)> = radii.iter().enumerate().map(|(j, &r)| (r, f(r, j))).collect();
        extrapolate_auto(&v, s, 3).unwrap()
    };
    for s in [0.5, 1.0] {
        assert!(fit(&|r, _| r.sqrt(), s).flagged);
        assert!(fit(&|r, _| r.ln(), s).flagged);
        assert!(fit(&|_, j| if j % 2 == 0 { 1.0 } else { -1.0 }, s).flagged);
        assert!(!fit(&|r, _| 5.0 + 3.0 / r + 1.0 / (r * r), s).flagged);
        assert!(!fit(&|r, j| 1.0 + 1.0 / r + 1e-12 * (j as f64).sin(), s).flagged);
    }
    assert!(!fit(&|r, _| 2.0 * (1.0 + 0.5 / r.sqrt()).powi(13), 0.5).flagged);
}

#[test]
fn fit_exponents() {
    assert_eq!(fit_exponent(3, 1), 1.0);
    assert_eq!(fit_exponent(5, 2), 0.5);
    assert_eq!(fit_exponent(6, 2), 1.0);
    assert_eq!(fit_exponent(7, 2), 0.5);
}

// --- integrands -------------------------------------------------------------

#[test]
fn integrands_vanish_for_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, k) in [(3, 1), (4, 1), (5, 2)] {
        let g = make_flat(n).unwrap();
        let ctx = GbcContext::new(n, k).unwrap();
        let x = random_sphere_point(n, 5.0, &mut rng);
        assert_eq!(mass_integrand(&g, &x, &ctx).unwrap(), 0.0);
        for i in 0..n {
            assert_eq!(center_integrand(&g, &x, &ctx, i).unwrap(), 0.0);
        }
        assert_eq!(adm_integrand(&g, &x).unwrap(), 0.0);
    }
}

#[test]
fn k1_integrand_is_a_fixed_multiple_of_the_adm_integrand() {
    // The ratio is one constant for every metric and point: the P_1 pattern.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=5 {
        let ctx = GbcContext::new(n, 1).unwrap();
        let metrics = [
            make_schwarzschild(n, 1, 1.0, &vec![0.0; n], None).unwrap(),
            make_schwarzschild(n, 1, 0.7, &random_sphere_point(n, 0.8, &mut rng), None).unwrap(),
            make_rt_perturbation(n, 0.8, 9, Parity::Mixed, 0.2, 1.0).unwrap(),
        ];
        let mut ratios = Vec::new();
        for g in &metrics {
            for _ in 0..10 {
                let x = random_sphere_point(n, 4.0, &mut rng);
                let adm = adm_integrand(g, &x).unwrap();
                if adm.abs() > 1e-6 {
                    ratios.push(mass_integrand(g, &x, &ctx).unwrap() / adm);
                }
            }
        }
        let r0 = ratios[0];
        assert!(ratios.iter().all(|r| rel(*r, r0) < 1e-10), "n={n}: {ratios:?}");
        // (-1)^{n-1} (n-2)! times the ADM integrand
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        assert!(rel(r0, sign * factorial(n - 2)) < 1e-10, "n={n}: {r0}");
    }
}

#[test]
fn pairing_form_matches_up_to_orientation_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, k) in [(3, 1), (4, 1), (5, 1), (5, 2)] {
        let ctx = GbcContext::new(n, k).unwrap();
        let g = make_rt_perturbation(n, 0.8, 21, Parity::Mixed, 0.2, 1.0).unwrap();
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        for _ in 0..5 {
            let x = random_sphere_point(n, 3.0, &mut rng);
            let a = mass_integrand(&g, &x, &ctx).unwrap();
            let b = mass_integrand_pairing(&g, &x, &ctx).unwrap();
            assert!((a - sign * b).abs() < 1e-10 * (1.0 + a.abs()), "n={n} k={k}");
            for i in 0..n {
                let a = center_integrand(&g, &x, &ctx, i).unwrap();
                let b = center_integrand_pairing(&g, &x, &ctx, i).unwrap();
                assert!((a - sign * b).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}

#[test]
fn centered_schwarzschild_center_flux_vanishes() {
    for (n, k) in [(3, 1), (5, 2)] {
        let g = make_schwarzschild(n, k, 1.0, &vec![0.0; n], None).unwrap();
        let ctx = GbcContext::new(n, k).unwrap();
        let rule = sphere_rule(n, 25.0, 4).unwrap();
        let scale = rule.integrate_scalar(|p| mass_integrand(&g, &p.x, &ctx)).unwrap().abs() * 25.0;
        for i in 0..n {
            let v = rule.integrate_scalar(|p| center_integrand(&g, &p.x, &ctx, i)).unwrap();
            assert!(v.abs() < 1e-12 * scale, "axis {i}: {v}");
        }
    }
}

#[test]
fn integrands_reject_bad_input() {
    let g = make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap();
    let ctx = GbcContext::new(3, 1).unwrap();
    assert!(matches!(mass_integrand(&g, &[0.1, 0.0, 0.0], &ctx), Err(Error::OutsideChart { .. })));
    assert!(center_integrand(&g, &[5.0, 0.0, 0.0], &ctx, 3).is_err());
    let ctx4 = GbcContext::new(4, 1).unwrap();
    assert_eq!(mass_integrand(&g, &[5.0, 0.0, 0.0], &ctx4).unwrap_err(), Error::DimensionMismatch(3, 4));
    let ctx42 = GbcContext::new(4, 2).unwrap();
    let g4 = make_flat(4).unwrap();
    assert!(mass_integrand(&g4, &[5.0, 0.0, 0.0, 0.0], &ctx42).is_err());
}

#[test]
fn conformal_killing_field() {
    let x = [1.0, 2.0, -2.0];
    // X^{(0)} = r² e_0 - 2 x^0 x
    assert_eq!(conformal_killing(&x, 0), vec![9.0 - 2.0, -4.0, 4.0]);
}

// --- drivers ----------------------------------------------------------------

#[test]
fn schwarzschild_mass_is_calibrated() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let sched = Schedule::standard();
    for m in [1.0, 2.0, 0.5] {
        let g = make_schwarzschild(3, 1, m, &[0.0; 3], None).unwrap();
        let res = gbc_mass(&g, &ctx, &sched).unwrap();
        assert!((res.limit - m).abs() < 1e-3, "m={m}: {res:?}");
        assert!(!res.flagged());
        assert_eq!(res.per_radius.len(), 5);
    }
}

#[test]
fn flat_mass_is_zero() {
    for (n, k) in [(3, 1), (5, 2)] {
        let ctx = GbcContext::new(n, k).unwrap();
        let res = gbc_mass(&make_flat(n).unwrap(), &ctx, &Schedule::standard()).unwrap();
        assert!(res.limit.abs() < 1e-10);
        let adm = adm_mass_coordinate(&make_flat(n).unwrap(), &Schedule::standard()).unwrap();
        assert!(adm.limit.abs() < 1e-10);
    }
}

#[test]
fn adm_and_gbc_masses_agree_up_to_one_constant() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let sched = Schedule::standard();
    let metrics = [
        make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap(),
        make_schwarzschild(3, 1, 0.6, &[0.4, -0.2, 0.1], None).unwrap(),
        bumpy(3, 0.5, 1.0, &[0.3, 0.0, -0.2]),
    ];
    let mut ratios = Vec::new();
    for g in &metrics {
        let a = gbc_mass_with(g, &ctx, &sched, 1.0).unwrap();
        let b = adm_mass_coordinate(g, &sched).unwrap();
        for (p, q) in a.per_radius.iter().zip(&b.per_radius) {
            ratios.push(p.value / q.value);
        }
    }
    let r0 = ratios[0];
    let spread = ratios.iter().map(|r| rel(*r, r0)).fold(0.0, f64::max);
    assert!(spread < 1e-6, "{ratios:?}");
}

#[test]
fn adm_mass_is_linear_in_m() {
    let sched = Schedule::standard();
    for n in [3, 4] {
        let base = adm_mass_coordinate(&make_schwarzschild(n, 1, 1.0, &vec![0.0; n], None).unwrap(), &sched).unwrap();
        assert!((base.limit - 1.0).abs() < 1e-3);
        for m in [0.5, 2.0] {
            let g = make_schwarzschild(n, 1, m, &vec![0.0; n], None).unwrap();
            let v = adm_mass_coordinate(&g, &sched).unwrap().limit;
            assert!((v / base.limit - m).abs() < 1e-3, "n={n} m={m}: {v}");
        }
    }
}

#[test]
fn translated_schwarzschild_center_is_recovered() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let sched = Schedule::standard();
    let g0 = make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap();
    let mass = gbc_mass(&g0, &ctx, &sched).unwrap();
    let c0 = gbc_center(&g0, &ctx, &sched, &mass).unwrap();
    assert!(c0.iter().all(|c| c.limit.abs() < 1e-6));
    for w in [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [-1.0, 1.0, 0.5]] {
        let g = make_schwarzschild(3, 1, 1.0, &w, None).unwrap();
        let c = gbc_center(&g, &ctx, &sched, &mass).unwrap();
        for i in 0..3 {
            assert!((c[i].limit - w[i]).abs() < 5e-3, "w={w:?} axis {i}: {}", c[i].limit);
        }
    }
}

#[test]
fn center_is_translation_equivariant() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let sched = Schedule::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let base = [0.3, -0.4, 0.2];
    let m = 0.8;
    let g = make_schwarzschild(3, 1, m, &base, None).unwrap();
    let mass = gbc_mass(&g, &ctx, &sched).unwrap();
    let c = gbc_center(&g, &ctx, &sched, &mass).unwrap();
    for _ in 0..2 {
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let moved: Vec<f64> = base.iter().zip(&w).map(|(a, b)| a + b).collect();
        let h = make_schwarzschild(3, 1, m, &moved, None).unwrap();
        let d = gbc_center(&h, &ctx, &sched, &mass).unwrap();
        for i in 0..3 {
            assert!((d[i].limit - c[i].limit - w[i]).abs() < 5e-3);
        }
    }
}

#[test]
fn center_needs_nonzero_mass() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let g = make_flat(3).unwrap();
    let sched = Schedule::standard();
    let mass = gbc_mass(&g, &ctx, &sched).unwrap();
    assert_eq!(gbc_center(&g, &ctx, &sched, &mass).unwrap_err(), Error::VanishingMass);
}

#[test]
fn curvature_center_constant_is_universal() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let sched = Schedule::standard();
    let b = calibration(3, 1).unwrap().b;
    let g0 = make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap();
    assert!(curvature_center(&g0, &ctx, &sched).unwrap().iter().all(|t| t.limit.abs() < 1e-6));
    let mut ratios = Vec::new();
    for m in [0.5, 2.0] {
        let mass = gbc_mass(&make_schwarzschild(3, 1, m, &[0.0; 3], None).unwrap(), &ctx, &sched).unwrap();
        for w in [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [-1.0, 1.0, 0.0]] {
            let g = make_schwarzschild(3, 1, m, &w, None).unwrap();
            let c = gbc_center(&g, &ctx, &sched, &mass).unwrap();
            let t = curvature_center(&g, &ctx, &sched).unwrap();
            ratios.extend(curvature_center_ratios(&t, &c, &mass, 0.1).into_iter().flatten());
        }
    }
    assert!(ratios.len() >= 8);
    assert!(ratios.iter().all(|r| rel(*r, b) < 1e-2), "{ratios:?} vs {b}");
}

#[test]
fn shipped_calibration_matches_a_fresh_measurement() {
    let fresh = calibrate(3, 1, &Schedule::standard()).unwrap();
    let table = calibration(3, 1).unwrap();
    assert!(rel(fresh.a, table.a) < 1e-9);
    assert!(rel(fresh.c, table.c) < 1e-6);
    assert!(rel(fresh.b, table.b) < 1e-6);
    assert_eq!(calibration(7, 3).unwrap_err(), Error::MissingCalibration(7, 3));
}

#[test]
fn threshold_warning_is_reported() {
    // τ = 1/2 is below the k = 1 threshold (n - 2)/2 = 1 in n = 4 ...
    let g = make_rt_perturbation(4, 0.5, 2, Parity::Even, 0.2, 1.0).unwrap();
    let ctx = GbcContext::new(4, 1).unwrap();
    let res = gbc_mass(&g, &ctx, &Schedule::standard()).unwrap();
    assert!(res.warnings.iter().any(|w| w.contains("threshold")));
    // ... but the computation still produced per-radius values
    assert_eq!(res.per_radius.len(), 5);
}

#[test]
fn result_serialisation() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let g = make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap();
    let res = gbc_mass(&g, &ctx, &Schedule::dyadic(20.0, 3, 2)).unwrap();
    let back: InvariantResult = serde_json::from_str(&res.to_json()).unwrap();
    assert_eq!(back, res);
    let csv = res.to_csv();
    assert!(csv.starts_with("name,r,value,level,converged\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn schedule_validation() {
    let ctx = GbcContext::new(3, 1).unwrap();
    let g = make_schwarzschild(3, 1, 1.0, &[0.0; 3], None).unwrap();
    let mut s = Schedule::standard();
    s.radii = vec![20.0, 40.0];
    assert!(gbc_mass(&g, &ctx, &s).is_err());
    s.radii = vec![20.0, 10.0, 40.0];
    assert!(gbc_mass(&g, &ctx, &s).is_err());
    s.radii = vec![0.5, 1.0, 2.0];
    assert!(matches!(gbc_mass(&g, &ctx, &s), Err(Error::OutsideChart { .. })));
}

#[test]
fn stokes_balance_at_finite_radius() {
    // Boundary minus bulk stays within the remainder budget; for k = 1 the
    // budget is quadratic in ε, so the relative discrepancy shrinks with ε.
    for (n, k, weight) in [(3, 1, None), (3, 1, Some(0)), (4, 1, Some(3)), (5, 2, None), (5, 2, Some(0))] {
        let ctx = GbcContext::new(n, k).unwrap();
        let mut errs = Vec::new();
        for eps in [1e-2, 1e-3] {
            let mut a = vec![0.0; n];
            a[0] = 0.4;
            a[n - 1] = -0.3;
            let g = bumpy(n, eps, 0.5, &a);
            let rep = stokes_check(&g, &ctx, weight, 8.0, 6).unwrap();
            assert!(rep.budget_ratio() < 1.0, "n={n} k={k} {weight:?}: {rep:?}");
            errs.push(rel(rep.boundary, rep.bulk));
        }
        if k == 1 {
            assert!(errs[1] < 0.2 * errs[0], "n={n} {weight:?}: {errs:?}");
        }
    }
}

