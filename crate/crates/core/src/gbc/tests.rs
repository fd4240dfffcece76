use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::curvature::{codiff, ext_deriv, random_polynomial_field, riemann, scalar_curvature, Connection, FnField};
use crate::dforms::PointMetric;
use crate::fields::{make_closed_form, make_flat, make_rt_perturbation, make_schwarzschild, Parity};

fn random_point(n: usize, lo: f64, hi: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.gen_range(-hi..hi)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= lo && norm <= hi {
            return v;
        }
    }
}

fn conformal(n: usize, u: impl Fn(&[Tps]) -> Tps + Send + Sync + 'static) -> MetricField {
    let e = 4.0 / (n as f64 - 2.0);
    make_closed_form(
        n,
        Arc::new(move |x: &[Tps]| {
            let f = u(x).powf(e);
            let z = f.zero_like();
            (0..n * n).map(|k| if k / n == k % n { f.clone() } else { z.clone() }).collect()
        }),
        1.0,
        0.0,
        "conformal",
    )
    .unwrap()
}

fn sphere(n: usize) -> MetricField {
    // stereographic unit sphere: u^{4/(n-2)} = 4/(1+|x|²)²
    conformal(n, move |x| {
        let mut r2 = Tps::constant(x[0].nvars(), x[0].order(), 1.0);
        for xi in x {
            r2.add_product(1.0, xi, xi);
        }
        r2.scale(0.5).powf(-(n as f64 - 2.0) / 2.0)
    })
}

fn lumpy(n: usize, seed: u64) -> MetricField {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n * n).map(|_| r.gen_range(-0.3..0.3)).collect();
    make_closed_form(
        n,
        Arc::new(move |x: &[Tps]| {
            let mut g = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = (&x[i] * &x[j]).scale(0.2);
                    if i == j {
                        let s = (&x[(i + 1) % n].scale(1.0 + a[i * n + j]) + &x[i].scale(0.5)).sin().scale(0.15);
                        v = v.add_scalar(1.0) + s;
                    } else {
                        v = v + (&x[i] + &x[j]).scale(a[i.min(j) * n + i.max(j)]).cos().scale(0.05);
                    }
                    g.push(v);
                }
            }
            g
        }),
        1.0,
        0.0,
        "lumpy",
    )
    .unwrap()
}

/// Full-index classical tensors: `Rm_{abcd} = R[ab,cd]/2`.
struct Classical {
    n: usize,
    rm: Vec<f64>,
    ginv: Vec<f64>,
}

impl Classical {
    fn new(r: &DoubleForm, m: &PointMetric) -> Self {
        let n = r.dim();
        let mut rm = vec![0.0; n.pow(4)];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        if a == b || c == d {
                            continue;
                        }
                        let (s1, i) = if a < b { (1.0, [a, b]) } else { (-1.0, [b, a]) };
                        let (s2, j) = if c < d { (1.0, [c, d]) } else { (-1.0, [d, c]) };
                        rm[((a * n + b) * n + c) * n + d] = 0.5 * s1 * s2 * r.component(&i, &j).unwrap();
                    }
                }
            }
        }
        Classical { n, rm, ginv: m.inverse().to_vec() }
    }

    fn ricci(&self) -> Vec<f64> {
        let n = self.n;
        let mut ric = vec![0.0; n * n];
        for b in 0..n {
            for d in 0..n {
                for a in 0..n {
                    for c in 0..n {
                        ric[b * n + d] += self.ginv[a * n + c] * self.rm[((a * n + b) * n + c) * n + d];
                    }
                }
            }
        }
        ric
    }

    fn scal(&self) -> f64 {
        let n = self.n;
        let ric = self.ricci();
        (0..n * n).map(|k| self.ginv[k] * ric[k]).sum()
    }

    fn norm2_2(&self, t: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.ginv[a * n + c] * self.ginv[b * n + d] * t[a * n + b] * t[c * n + d];
                    }
                }
            }
        }
        s
    }

    fn rm_norm2(&self) -> f64 {
        let n = self.n;
        // raise all indices
        let mut up = self.rm.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; n.pow(4)];
            let stride = n.pow(3 - slot as u32);
            for idx in 0..n.pow(4) {
                let i = (idx / stride) % n;
                let base = idx - i * stride;
                for j in 0..n {
                    next[idx] += self.ginv[i * n + j] * up[base + j * stride];
                }
            }
            up = next;
        }
        up.iter().zip(&self.rm).map(|(a, b)| a * b).sum()
    }
}

#[test]
fn context_validation() {
    assert!(GbcContext::new(3, 2).is_err());
    assert!(GbcContext::new(3, 0).is_err());
    assert!(GbcContext::new(9, 1).is_err());
    let c = GbcContext::new(4, 2).unwrap();
    assert!(c.b_power_lovelock().is_none());
    assert_eq!(c.b_power().degrees(), (0, 0));
    let c = GbcContext::new(5, 2).unwrap();
    assert_eq!(c.b_power_lovelock().unwrap().degrees(), (0, 0));
    assert_eq!(c.b_power().degrees(), (1, 1));
    assert!((c.tau_threshold() - 1.0 / 3.0).abs() < 1e-15);
    let g = make_flat(4).unwrap();
    assert!(matches!(lovelock(&g, &[1.0; 4], &GbcContext::new(4, 2).unwrap()), Err(Error::DegreeOverflow { .. })));
    assert!(matches!(l_k(&g, &[1.0; 4], &c), Err(Error::DimensionMismatch(4, 5))));
}

#[test]
fn flat_metric_is_gbc_flat() {
    let g = make_flat(5).unwrap();
    let x = [1.0, 2.0, -1.0, 0.5, 0.3];
    for k in [1, 2] {
        let ctx = GbcContext::new(5, k).unwrap();
        assert_eq!(l_k(&g, &x, &ctx).unwrap(), 0.0);
        assert_eq!(lovelock(&g, &x, &ctx).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn round_sphere_values() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for n in [3, 4, 5, 6] {
        let g = sphere(n);
        let x = random_point(n, 0.0, 1.0, &mut r);
        for k in 1..=n / 2 {
            let ctx = GbcContext::new(n, k).unwrap();
            let want = factorial(n) / factorial(n - 2 * k);
            let got = l_k(&g, &x, &ctx).unwrap();
            assert!((got - want).abs() < 1e-9 * want, "n={n} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn l1_is_scalar_curvature() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let ctx = |n| GbcContext::new(n, 1).unwrap();
    for n in [3, 4, 5] {
        let metrics = [
            make_schwarzschild(n, 1, 1.0, &vec![0.1; n], None).unwrap(),
            make_rt_perturbation(n, 1.0, 40 + n as u64, Parity::Mixed, 0.2, 1.0).unwrap(),
            lumpy(n, n as u64),
        ];
        for g in &metrics {
            for _ in 0..5 {
                let x = random_point(n, g.r_min().max(1.0) * 1.1, 5.0, &mut r);
                let pc = crate::curvature::point_curvature(g, &x).unwrap();
                let scal = Classical::new(&pc.riemann, &pc.metric).scal();
                let l1 = l_k(g, &x, &ctx(n)).unwrap();
                assert!((l1 - scal).abs() < 1e-10 * pc.riemann.max_abs().max(scal.abs()), "n={n}");
                assert!((scalar_curvature(g, &x).unwrap() - scal).abs() < 1e-10 * pc.riemann.max_abs());
            }
        }
    }
    // conformal metric with non-harmonic factor: Scal = -4(n-1)/(n-2) u^{-(n+2)/(n-2)} Δu
    let u = |x: &[Tps]| {
        let mut s = Tps::zero(x[0].nvars(), x[0].order());
        for xi in x {
            s.add_product(-0.3, xi, xi);
        }
        s.exp().scale(0.4).add_scalar(1.0)
    };
    for n in [3, 4, 5] {
        let g = conformal(n, u);
        let x = random_point(n, 0.0, 1.5, &mut r);
        let uj = u(&Tps::point(&x, 2));
        let lap: f64 = (0..n)
            .map(|i| {
                let mut a = vec![0; n];
                a[i] = 2;
                uj.derivative(&a)
            })
            .sum();
        let nf = n as f64;
        let want = -4.0 * (nf - 1.0) / (nf - 2.0) * uj.value().powf(-(nf + 2.0) / (nf - 2.0)) * lap;
        let got = l_k(&g, &x, &ctx(n)).unwrap();
        assert!((got - want).abs() < 1e-9 * want.abs(), "n={n}: {got} vs {want}");
    }
}

#[test]
fn l2_is_gauss_bonnet_density() {
    let ctx = GbcContext::new(5, 2).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut ratios = Vec::new();
    for i in 0..20u64 {
        let g = if i % 2 == 0 {
            make_rt_perturbation(5, 0.8, i, Parity::Mixed, 0.25, 1.0).unwrap()
        } else {
            lumpy(5, i)
        };
        let x = random_point(5, 1.2, 3.0, &mut r);
        let pc = crate::curvature::point_curvature(&g, &x).unwrap();
        let cl = Classical::new(&pc.riemann, &pc.metric);
        let ric = cl.ricci();
        let scal = cl.scal();
        let denom = cl.rm_norm2() - 4.0 * cl.norm2_2(&ric) + scal * scal;
        assert!(denom.abs() > 1e-6);
        ratios.push(l_k(&g, &x, &ctx).unwrap() / denom);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo < 1e-8, "spread {}", hi - lo);
    assert!((ratios[0] - 1.0).abs() < 1e-8, "constant {}", ratios[0]);
}

#[test]
fn p_k_reconstructs_l_k() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for (n, k) in [(5, 2), (5, 1), (4, 2), (6, 3), (6, 2)] {
        let ctx = GbcContext::new(n, k).unwrap();
        let g = if n == 5 {
            make_schwarzschild(5, 2, 1.0, &[0.0; 5], None).unwrap()
        } else {
            make_rt_perturbation(n, 1.0, 5, Parity::Even, 0.2, 1.0).unwrap()
        };
        for _ in 0..3 {
            let x = random_point(n, g.r_min() * 1.1 + 1.0, 6.0, &mut r);
            let pm = g.point_metric(&x).unwrap();
            let rm = riemann(&g, &x).unwrap();
            let sp = star_p_k(&g, &x, &ctx).unwrap();
            assert_eq!(sp.degrees(), (n - 2, n - 2));
            let lk = l_k(&g, &x, &ctx).unwrap();
            let via = rm.wedge(&sp).unwrap().hodge(&pm).unwrap().comps()[0];
            let scale = rm.max_abs().powi(k as i32);
            assert!((via - lk).abs() < 1e-9 * scale.max(lk.abs()));
            let pk = p_k(&g, &x, &ctx).unwrap();
            assert_eq!(pk.degrees(), (2, 2));
            assert!(pk.hodge(&pm).unwrap().max_diff(&sp) < 1e-12 * sp.max_abs());
        }
    }
}

#[test]
fn p1_of_flat_metric_is_the_mass_pattern() {
    let n = 4;
    let g = make_flat(n).unwrap();
    let p1 = p_k(&g, &[1.0, 0.0, 0.0, 0.0], &GbcContext::new(n, 1).unwrap()).unwrap();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    // 4-index pattern P_{mnrs} = P₁(e_m, e_r; e_n, e_s)
    for m in 0..n {
        for r in m + 1..n {
            for nn in 0..n {
                for s in nn + 1..n {
                    let want = d(r, s) * d(m, nn) - d(nn, r) * d(m, s);
                    assert_eq!(p1.component(&[m, r], &[nn, s]).unwrap(), want);
                }
            }
        }
    }
}

#[test]
fn star_p_k_is_parallel() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for (n, k, g) in [
        (5, 2, make_rt_perturbation(5, 1.0, 8, Parity::Mixed, 0.2, 1.0).unwrap()),
        (5, 2, lumpy(5, 1)),
        (4, 1, make_schwarzschild(4, 1, 1.0, &[0.2, 0.0, 0.0, 0.1], None).unwrap()),
        (4, 2, lumpy(4, 2)),
    ] {
        let ctx = GbcContext::new(n, k).unwrap();
        let field = StarPkField { metric: g.clone(), ctx };
        let conn = Connection::LeviCivita(g.clone());
        for _ in 0..2 {
            let x = random_point(n, g.r_min().max(1.0) * 1.2, 3.0, &mut r);
            let j = field.jet(&x, 1).unwrap();
            let scale = j.values().max_abs() + (0..n).map(|i| j.deriv(i).values().max_abs()).sum::<f64>();
            for side in [Side::Left, Side::Right] {
                let d = ext_deriv(&field, &x, side, &conn).unwrap();
                assert!(d.max_abs() < 1e-10 * scale, "n={n} k={k}: {} vs {scale}", d.max_abs());
            }
            let bl = j.values().bianchi(Side::Left);
            assert!(bl.max_abs() < 1e-12 * scale);
        }
    }
}

#[test]
fn lovelock_trace_and_einstein_case() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    for (n, k) in [(5, 2), (5, 1), (3, 1), (6, 2), (7, 3)] {
        let ctx = GbcContext::new(n, k).unwrap();
        let g = if (n, k) == (5, 2) {
            make_schwarzschild(5, 2, 0.8, &[0.1, 0.0, 0.0, 0.0, 0.0], None).unwrap()
        } else {
            make_rt_perturbation(n, 1.0, 9 + n as u64, Parity::Mixed, 0.2, 1.0).unwrap()
        };
        for _ in 0..3 {
            let x = random_point(n, g.r_min() * 1.1 + 1.0, 5.0, &mut r);
            let pm = g.point_metric(&x).unwrap();
            let t = lovelock(&g, &x, &ctx).unwrap();
            let tr = t.contract(&pm).unwrap().comps()[0];
            let lk = l_k(&g, &x, &ctx).unwrap();
            let scale = riemann(&g, &x).unwrap().max_abs().powi(k as i32);
            assert!((tr - (n - 2 * k) as f64 * lk).abs() < 1e-9 * scale, "n={n} k={k}");
            assert!(t.max_diff(&t.transpose()) < 1e-12 * scale);
            if k == 1 {
                let ric = crate::curvature::ricci(&g, &x).unwrap();
                let scal = scalar_curvature(&g, &x).unwrap();
                let mut einstein = DoubleForm::metric(&pm).scale(scal);
                einstein.axpy(-2.0, &ric).unwrap();
                assert!(t.max_diff(&einstein) < 1e-10 * scale);
            }
        }
    }
}

#[test]
fn lovelock_is_divergence_free() {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for (n, k, g) in [
        (5, 2, make_schwarzschild(5, 2, 1.0, &[0.0, 0.3, 0.0, 0.0, 0.0], None).unwrap()),
        (5, 2, make_rt_perturbation(5, 1.0, 3, Parity::Mixed, 0.2, 1.0).unwrap()),
        (5, 1, lumpy(5, 3)),
        (3, 1, lumpy(3, 4)),
    ] {
        let ctx = GbcContext::new(n, k).unwrap();
        let field = LovelockField { metric: g.clone(), ctx };
        let conn = Connection::LeviCivita(g.clone());
        for _ in 0..2 {
            let x = random_point(n, g.r_min().max(1.0) * 1.2, 4.0, &mut r);
            let scale = riemann(&g, &x).unwrap().max_abs().powi(k as i32);
            let j = field.jet(&x, 1).unwrap();
            let dscale = (0..n).map(|i| j.deriv(i).values().max_abs()).sum::<f64>();
            assert!(dscale > 1e-3 * scale, "degenerate test");
            for side in [Side::Left, Side::Right] {
                let d = codiff(&field, &x, side, &conn).unwrap();
                assert!(d.max_abs() < 1e-7 * scale, "n={n} k={k}: {} vs {scale}", d.max_abs());
            }
        }
    }
}

#[test]
fn l_k_rotation_invariance_for_conformally_flat() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let n = 5;
    let radial = conformal(n, |x| {
        let mut s = Tps::zero(x[0].nvars(), x[0].order());
        for xi in x {
            s.add_product(-0.1, xi, xi);
        }
        s.exp().scale(0.5).add_scalar(1.0)
    });
    for g in [make_schwarzschild(n, 2, 1.0, &[0.0; 5], None).unwrap(), radial] {
        for k in [1, 2] {
            let ctx = GbcContext::new(n, k).unwrap();
            for _ in 0..3 {
                let x = random_point(n, g.r_min() * 1.2 + 0.5, 5.0, &mut r);
                let q = crate::fields::random_orthogonal(n, &mut r);
                let qx: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * x[j]).sum()).collect();
                let a = l_k(&g, &x, &ctx).unwrap();
                let b = l_k(&g, &qx, &ctx).unwrap();
                let scale = riemann(&g, &x).unwrap().max_abs().powi(k as i32);
                assert!((a - b).abs() < 1e-10 * scale, "k={k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn l_k_integrability_proxy() {
    for (n, k) in [(3, 1), (5, 2), (5, 1)] {
        let g = make_schwarzschild(n, k, 1.0, &vec![0.0; n], None).unwrap();
        let g = g.superpose(&make_rt_perturbation(n, (n - 1) as f64, 1, Parity::Even, 0.05, g.r_min().max(3.0)).unwrap()).unwrap();
        let ctx = GbcContext::new(n, k).unwrap();
        let mut prev = f64::INFINITY;
        for j in 0..5 {
            let rad = 10.0 * 2f64.powi(j);
            let mut x = vec![0.0; n];
            x[0] = rad * 0.6;
            x[1] = rad * 0.8;
            let v = rad.powi(n as i32) * l_k(&g, &x, &ctx).unwrap().abs();
            assert!(v.is_finite() && v <= prev * 1.01 + 1e-12, "n={n} k={k} r={rad}: {v}");
            prev = v;
        }
    }
}

fn symmetric_field(n: usize, seed: u64) -> FnField {
    let a = random_polynomial_field(n, 1, 1, 3, seed).unwrap();
    FnField::new(n, (1, 1), 6, move |x| {
        let f = a.apply(x)?;
        let mut s = f.add(&f.transpose())?;
        s = s.scale(0.5);
        Ok(s)
    })
}

#[test]
fn variation_residual_scaling() {
    let n = 4;
    let x = [0.3, -0.5, 0.8, 0.1];
    let h = symmetric_field(n, 77);
    let flat = make_flat(n).unwrap();
    assert_eq!(variation_residual(&flat, &FnField::new(n, (1, 1), 6, |x| {
        Ok(JetForm::zeros_like(&x[0].zero_like(), 4, 1, 1)?)
    }), &x, 1.0).unwrap().max_abs(), 0.0);
    // flat background: first order vanishes
    let r1 = variation_residual(&flat, &h, &x, 1e-3).unwrap().norm();
    let r2 = variation_residual(&flat, &h, &x, 5e-4).unwrap().norm();
    assert!(r1 > 0.0);
    assert!((r1 / r2 - 4.0).abs() < 0.2, "flat ratio {}", r1 / r2);
    // curved background: leading term is bilinear in (R, h)
    let g = lumpy(n, 9);
    let c1 = variation_residual(&g, &h, &x, 2e-4).unwrap().norm();
    let c2 = variation_residual(&g, &h, &x, 1e-4).unwrap().norm();
    assert!((c1 / c2 - 2.0).abs() < 0.1, "curved ratio {}", c1 / c2);
}
