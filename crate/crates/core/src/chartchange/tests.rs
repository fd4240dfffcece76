use super::*;
use crate::curvature::lie_flat;
use crate::fields::{make_closed_form, make_flat, make_schwarzschild, random_orthogonal};
use crate::invariants::Schedule;

fn random_point<R: Rng>(n: usize, r: f64, rng: &mut R) -> Vec<f64> {
    crate::fields::random_unit(n, rng).iter().map(|v| v * r).collect()
}

fn max_jet_diff(a: &[Tps], b: &[Tps]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(s, t)| s.coeffs().iter().zip(t.coeffs()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn arc(z: ClosedZeta) -> Arc<dyn VectorField> {
    Arc::new(z)
}

// --- diffeomorphisms --------------------------------------------------------

#[test]
fn identity_pullback_is_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, k) in [(3, 1), (5, 2)] {
        let g = make_schwarzschild(n, k, 1.3, &vec![0.2; n], None).unwrap();
        let p = pullback_metric(&identity_diffeo(n), &g).unwrap();
        for _ in 0..5 {
            let x = random_point(n, 12.0, &mut rng);
            assert!(max_jet_diff(&p.taylor(&x, 3).unwrap(), &g.taylor(&x, 3).unwrap()) < 1e-15);
        }
    }
}

#[test]
fn rotation_moves_schwarzschild_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, k) in [(3, 1), (4, 1), (5, 2)] {
        let c0: Vec<f64> = (0..n).map(|i| 0.5 - 0.3 * i as f64).collect();
        let q = random_orthogonal(n, &mut rng);
        let g = make_schwarzschild(n, k, 0.8, &c0, None).unwrap();
        let phi = isometry(&q, &vec![0.0; n]).unwrap();
        let expected = make_schwarzschild(n, k, 0.8, &phi.pull_point(&c0), None).unwrap();
        let p = pullback_metric(&phi, &g).unwrap();
        for _ in 0..5 {
            let x = random_point(n, 15.0, &mut rng);
            let (a, b) = (p.taylor(&x, 3).unwrap(), expected.taylor(&x, 3).unwrap());
            assert!(max_jet_diff(&a, &b) < 1e-12, "{}", max_jet_diff(&a, &b));
        }
    }
}

#[test]
fn translation_moves_schwarzschild_center() {
    let n = 4;
    let c0 = [0.3, 0.0, -0.2, 0.1];
    let t = [1.0, -0.5, 0.25, 0.0];
    let g = make_schwarzschild(n, 1, 1.0, &c0, None).unwrap();
    let phi = isometry(&identity(n), &t).unwrap();
    let moved = phi.pull_point(&c0);
    assert!((moved[0] + 0.7).abs() < 1e-15 && (moved[1] - 0.5).abs() < 1e-15);
    let expected = make_schwarzschild(n, 1, 1.0, &moved, None).unwrap();
    let p = pullback_metric(&phi, &g).unwrap();
    let x = [7.0, -3.0, 2.0, 5.0];
    assert!(max_jet_diff(&p.taylor(&x, 2).unwrap(), &expected.taylor(&x, 2).unwrap()) < 1e-13);
}

#[test]
fn make_diffeo_validates_gradient() {
    let n = 3;
    let id = identity(n);
    let zero = ClosedZeta::new(n, |x| vec![x[0].zero_like(); x.len()]);
    let d = make_diffeo(&id, &[0.0; 3], arc(zero), 1.0, 1.0, "zero").unwrap();
    assert_eq!(d.sup_dzeta(), 0.0);
    assert_eq!(d.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);

    let small = radial_zeta(n, 0.3, 0.8);
    let d = make_diffeo(&id, &[0.0; 3], arc(small.clone()), 0.8, 2.0, "radial").unwrap();
    assert!(d.sup_dzeta() < 1.0 && d.r_valid() == 2.0);
    // ∂(c x r^{-τ'}) has Frobenius norm c r^{-τ'} sqrt(n - 1 + (1-τ')²).
    let expect = 0.3 * 2f64.powf(-0.8) * (2.0 + 0.04f64).sqrt();
    assert!((d.sup_dzeta() - expect).abs() < 1e-12, "{} vs {expect}", d.sup_dzeta());

    let big = radial_zeta(n, 3.0, 0.8);
    assert!(matches!(make_diffeo(&id, &[0.0; 3], arc(big.clone()), 0.8, 1.0, "big"), Err(Error::NotInjective { .. })));
    let r = injectivity_radius(&big, 1.0, 1.0).unwrap();
    assert!(make_diffeo(&id, &[0.0; 3], arc(big), 0.8, r, "big").is_ok());
    assert!(r > 1.0);
}

#[test]
fn pullback_derivatives_follow_chain_rule() {
    let n = 3;
    let g = make_schwarzschild(n, 1, 1.0, &[0.1, -0.2, 0.3], None).unwrap();
    let z = harmonic_zeta(n, 0.7, 3, Parity::Mixed, 0.4);
    let q = random_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(8));
    let phi = make_diffeo(&q, &[0.5, 0.0, -0.5], arc(z), 0.7, 5.0, "mixed").unwrap();
    let p = pullback_metric(&phi, &g).unwrap();
    let x = [9.0, -4.0, 6.0];
    let d1 = p.d1(&x).unwrap();
    let h = 1e-5;
    for a in 0..n {
        let mut xp = x;
        let mut xm = x;
        xp[a] += h;
        xm[a] -= h;
        let (gp, gm) = (p.eval(&xp).unwrap(), p.eval(&xm).unwrap());
        for ij in 0..n * n {
            let fd = (gp[ij] - gm[ij]) / (2.0 * h);
            assert!((fd - d1[a * n * n + ij]).abs() < 1e-8, "{fd} vs {}", d1[a * n * n + ij]);
        }
    }
    // Values: DΦᵀ g(Φ) DΦ directly.
    let jets = phi.jets(&x, 1).unwrap();
    let y = phi.apply(&x).unwrap();
    let gy = g.eval(&y).unwrap();
    let gx = p.eval(&x).unwrap();
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += jets[a].gradient()[i] * gy[a * n + b] * jets[b].gradient()[j];
                }
            }
            assert!((s - gx[i * n + j]).abs() < 1e-14);
        }
    }
    assert_eq!(p.tau(), 0.7);
}

#[test]
fn leading_difference_is_the_lie_derivative() {
    let n = 4;
    let flat = make_flat(n).unwrap();
    let z = harmonic_zeta(n, 0.5, 17, Parity::Even, 1.0);
    let x = [3.0, -1.0, 2.0, 0.5];
    let lie = lie_flat(&z, &x).unwrap();
    let mut errs = Vec::new();
    for s in [1e-1, 1e-2, 1e-3] {
        let phi = make_diffeo(&identity(n), &[0.0; 4], arc(z.scaled(s)), 0.5, 2.0, "scaled").unwrap();
        let p = pullback_metric(&phi, &flat).unwrap();
        let mut diff = p.form(&x).unwrap();
        diff.axpy(-1.0, &DoubleForm::euclidean(n)).unwrap();
        let ratio = diff.norm() / (s * lie.norm());
        errs.push((ratio - 1.0).abs());
        assert!(diff.scale(1.0 / s).max_diff(&lie) < 5.0 * s * lie.max_abs());
    }
    assert!(errs[2] < errs[1] && errs[1] < errs[0] && errs[2] < 1e-2, "{errs:?}");
}

use crate::dforms::DoubleForm;

#[test]
fn pullback_escape_is_reported() {
    let n = 3;
    let g = make_schwarzschild(n, 1, 1.0, &[0.0; 3], None).unwrap();
    // Translation by 100 puts the origin of g far from x = 0.
    let phi = isometry(&identity(n), &[100.0, 0.0, 0.0]).unwrap();
    let p = pullback_metric(&phi, &g).unwrap();
    assert!(p.r_min() >= 100.0);
    assert!(matches!(p.eval(&[-100.0, 0.0, 0.0]), Err(Error::OutsideChart { .. })));
}

// --- ζ families -------------------------------------------------------------

#[test]
fn zeta_families_have_declared_decay() {
    let n = 3;
    for (z, tp) in [
        (radial_zeta(n, 0.5, 0.6), 0.6),
        (harmonic_zeta(n, 0.9, 1, Parity::Odd, 1.0), 0.9),
        (harmonic_zeta(n, 0.9, 1, Parity::Even, 1.0), 0.9),
        (harmonic_zeta(n, 0.9, 1, Parity::Mixed, 1.0), 0.9),
    ] {
        let (s1, _) = sup_gradient(&z, 100.0, 100.0, 64).unwrap();
        let (s2, _) = sup_gradient(&z, 1600.0, 1600.0, 64).unwrap();
        let slope = (s2 / s1).ln() / 16f64.ln();
        assert!((slope + tp).abs() < 0.05, "{slope}");
    }
}

#[test]
fn zeta_parity_is_as_constructed() {
    let n = 4;
    let x = [1.0, 2.0, -3.0, 0.5];
    let mx: Vec<f64> = x.iter().map(|v| -v).collect();
    let odd = harmonic_zeta(n, 0.7, 5, Parity::Odd, 1.0);
    let even = harmonic_zeta(n, 0.7, 5, Parity::Even, 1.0);
    for i in 0..n {
        let (a, b) = (odd.jet(&x, 0).unwrap()[i].value(), odd.jet(&mx, 0).unwrap()[i].value());
        assert!((a + b).abs() < 1e-15 * a.abs().max(1.0));
        let (a, b) = (even.jet(&x, 0).unwrap()[i].value(), even.jet(&mx, 0).unwrap()[i].value());
        assert!((a - b).abs() < 1e-15 * a.abs().max(1.0));
    }
}

// --- divergence structure ---------------------------------------------------

fn bumpy(n: usize) -> MetricField {
    make_closed_form(
        n,
        Arc::new(move |x: &[Tps]| {
            let r2 = radius_squared(x);
            let f = (&x[0].scale(0.3).add_scalar(1.0) * &r2.powf(-1.0)).scale(0.5).add_scalar(1.0);
            let z = x[0].zero_like();
            (0..n * n).map(|ij| if ij / n == ij % n { f.clone() } else { z.clone() }).collect()
        }),
        1.0,
        1.0,
        "bumpy",
    )
    .unwrap()
}

#[test]
fn linearised_flux_is_exact_for_k1() {
    for n in [3, 4, 5] {
        let ctx = GbcContext::new(n, 1).unwrap();
        let z = harmonic_zeta(n, 0.4, 9, Parity::Mixed, 1.0);
        for g in [make_flat(n).unwrap(), make_schwarzschild(n, 1, 1.0, &vec![0.1; n], None).unwrap(), bumpy(n)] {
            for r in [10.0, 40.0] {
                let rep = lie_flux_check(&g, &z, &ctx, r, 8).unwrap();
                assert!(rep.magnitude > 0.0);
                assert!(rep.flux.abs() < 1e-12 * rep.magnitude, "n={n} r={r}: {rep:?}");
            }
        }
    }
}

#[test]
fn linearised_flux_within_budget_for_k2() {
    let n = 5;
    let ctx = GbcContext::new(n, 2).unwrap();
    let z = harmonic_zeta(n, 0.4, 13, Parity::Mixed, 1.0);
    let g = bumpy(n);
    let mut ratios = Vec::new();
    for r in [10.0, 20.0, 40.0, 80.0] {
        let rep = lie_flux_check(&g, &z, &ctx, r, 8).unwrap();
        assert!(rep.budget > 0.0);
        ratios.push(rep.flux.abs() / rep.budget);
    }
    assert!(ratios.iter().all(|&q| q < 10.0), "{ratios:?}");
    let flat = lie_flux_check(&make_flat(n).unwrap(), &z, &ctx, 20.0, 6).unwrap();
    assert_eq!(flat.flux, 0.0);
}

// --- invariance -------------------------------------------------------------

fn quick() -> Schedule {
    Schedule::standard()
}

#[test]
fn rigid_rotation_leaves_mass_unchanged() {
    let n = 3;
    let g = make_schwarzschild(n, 1, 1.0, &[0.5, -0.3, 0.2], None).unwrap();
    let q = random_orthogonal(n, &mut ChaCha8Rng::seed_from_u64(4));
    let phi = isometry(&q, &[0.0; 3]).unwrap();
    let rep = invariance_report(&g, &phi, &GbcContext::new(n, 1).unwrap(), &quick(), true).unwrap();
    assert!(rep.pass, "{:?}", rep.warnings);
    for d in &rep.delta_mass {
        assert!(d.abs() < 1e-8, "{d}");
    }
    for d in rep.delta_center.as_ref().unwrap() {
        assert!(d.abs() < 1e-8, "{d}");
    }
}

#[test]
fn compliant_radial_zeta_preserves_mass() {
    let n = 3;
    let ctx = GbcContext::new(n, 1).unwrap();
    let g = make_schwarzschild(n, 1, 1.0, &[0.0; 3], None).unwrap();
    let phi = make_diffeo(&identity(n), &[0.0; 3], arc(radial_zeta(n, 0.5, 1.0)), 1.0, 4.0, "radial").unwrap();
    let rep = invariance_report(&g, &phi, &ctx, &quick(), false).unwrap();
    assert!(rep.pass, "{rep:#?}");
    assert!(rep.delta_mass_limit.abs() < 1e-3);
}

#[test]
fn zeta_just_above_threshold_converges() {
    let n = 3;
    let ctx = GbcContext::new(n, 1).unwrap();
    let g = make_schwarzschild(n, 1, 1.0, &[0.0; 3], None).unwrap();
    let phi = make_diffeo(&identity(n), &[0.0; 3], arc(radial_zeta(n, 0.5, 0.6)), 0.6, 4.0, "radial").unwrap();
    let rep = invariance_report(&g, &phi, &ctx, &quick(), false).unwrap();
    let slope = rep.delta_mass_slope.unwrap();
    assert!(slope < 0.0, "{rep:#?}");
    let d: Vec<f64> = rep.delta_mass.iter().map(|v| v.abs()).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn zeta_below_threshold_is_flagged() {
    let n = 3;
    let ctx = GbcContext::new(n, 1).unwrap();
    let g = make_schwarzschild(n, 1, 1.0, &[0.0; 3], None).unwrap();
    let phi = make_diffeo(&identity(n), &[0.0; 3], arc(radial_zeta(n, 0.5, 0.3)), 0.3, 4.0, "radial").unwrap();
    let rep = invariance_report(&g, &phi, &ctx, &quick(), false).unwrap();
    assert!(!rep.pass, "{rep:#?}");
    // The quadratic drift c² r^{n-2-2τ'} takes over from the decaying terms.
    let d = &rep.delta_mass;
    assert!(d[d.len() - 1].abs() > 0.5 * d[0].abs(), "{d:?}");
    assert!(d[d.len() - 1].abs() > d[d.len() - 2].abs(), "{d:?}");
    assert!(!rep.warnings.is_empty());
}

#[test]
fn report_serialises() {
    let n = 3;
    let g = make_schwarzschild(n, 1, 1.0, &[0.0; 3], None).unwrap();
    let rep = invariance_report(&g, &identity_diffeo(n), &GbcContext::new(n, 1).unwrap(), &quick(), false).unwrap();
    let back: InvarianceReport = serde_json::from_str(&rep.to_json()).unwrap();
    assert_eq!(back.delta_mass, rep.delta_mass);
    assert_eq!(rep.to_csv().lines().count(), rep.radii.len() + 1);
    assert!(rep.delta_mass.iter().all(|d| *d == 0.0));
}
