//! Randomised identity suite for the double-form algebra and the flat
//! derivative engine, reported as a pass/fail matrix per identity and bidegree.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{ext_deriv_jet, lie_flat_jet};
use crate::dforms::{factorial, DoubleForm, JetForm, PointMetric, Side, MAX_DIM};
use crate::error::{invalid, Result};
use crate::tps::{Tps, TpsSpace};

/// Relative tolerance of the randomised identities.
pub const TOLERANCE: f64 = 1e-12;
/// Componentwise tolerance of `*g^k = k!/(n−k)! g^{n−k}` for the Euclidean metric.
pub const POWER_TOLERANCE: f64 = 1e-13;
pub const DEFAULT_SAMPLES: usize = 100;

/// Outcome of one identity at one bidegree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<IdentityCheck>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("identity,n,p,q,samples,max_error,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{:e},{:e},{}\n",
                c.identity, c.n, c.p, c.q, c.samples, c.max_error, c.tolerance, c.pass
            ));
        }
        out
    }
}

/// Runs the algebra, metric-power and engine suites in dimension `n`.
pub fn run(n: usize, samples: usize, seed: u64) -> Result<VerifyReport> {
    let mut checks = algebra_suite(n, samples, seed)?;
    checks.extend(metric_power_suite(n)?);
    checks.extend(engine_suite(n, samples, seed.wrapping_add(1))?);
    Ok(VerifyReport { n, seed, samples, checks })
}

struct Tally {
    n: usize,
    tolerance: f64,
    cells: BTreeMap<(&'static str, usize, usize), (usize, f64)>,
}

impl Tally {
    fn new(n: usize, tolerance: f64) -> Self {
        Tally { n, tolerance, cells: BTreeMap::new() }
    }

    fn record(&mut self, identity: &'static str, (p, q): (usize, usize), error: f64) {
        let cell = self.cells.entry((identity, p, q)).or_insert((0, 0.0));
        cell.0 += 1;
        // NaN must fail the cell, so it is kept rather than dropped by max
        cell.1 = if error.is_nan() || cell.1.is_nan() { f64::NAN } else { cell.1.max(error) };
    }

    fn forms(&mut self, identity: &'static str, pq: (usize, usize), lhs: &DoubleForm, rhs: &DoubleForm) {
        let scale = 1f64.max(lhs.max_abs()).max(rhs.max_abs());
        self.record(identity, pq, lhs.max_diff(rhs) / scale);
    }

    fn scalars(&mut self, identity: &'static str, pq: (usize, usize), lhs: f64, rhs: f64) {
        self.record(identity, pq, (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs()));
    }

    fn finish(self) -> Vec<IdentityCheck> {
        let (n, tolerance) = (self.n, self.tolerance);
        let mut out: Vec<IdentityCheck> = self
            .cells
            .into_iter()
            .map(|((identity, p, q), (samples, max_error))| IdentityCheck {
                identity: identity.to_string(),
                n,
                p,
                q,
                samples,
                max_error,
                tolerance,
                pass: max_error <= tolerance,
            })
            .collect();
        out.sort_by(|a, b| (a.p, a.q).cmp(&(b.p, b.q)));
        out
    }
}

fn check_args(n: usize, samples: usize) -> Result<()> {
    if !(1..=MAX_DIM).contains(&n) {
        return Err(invalid("n", format!("must lie in 1..={MAX_DIM}")));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    Ok(())
}

fn sign(e: usize) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `A Aᵀ + ½ I` with `A` uniform in `[−1, 1]`.
fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Result<PointMetric> {
    let a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>();
        }
        g[i * n + i] += 0.5;
    }
    PointMetric::new(&g, n, 1.0)
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Pointwise identities for every bidegree `(p, q)`, `samples` random forms each.
/// Odd-numbered samples use a random positive definite metric, even ones the
/// Euclidean metric.
pub fn algebra_suite(n: usize, samples: usize, seed: u64) -> Result<Vec<IdentityCheck>> {
    check_args(n, samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(n, TOLERANCE);
    for p in 0..=n {
        for q in 0..=n {
            let pq = (p, q);
            for s in 0..samples {
                let m = if s % 2 == 0 { PointMetric::identity(n) } else { random_spd(n, &mut rng)? };
                let w = DoubleForm::random(n, p, q, &mut rng)?;

                // graded commutativity and associativity
                let (p2, q2) = (rng.gen_range(0..=n - p), rng.gen_range(0..=n - q));
                let f = DoubleForm::random(n, p2, q2, &mut rng)?;
                let wf = w.wedge(&f)?;
                t.forms("graded_commutativity", pq, &f.wedge(&w)?, &wf.scale(sign(p * p2 + q * q2)));
                let (p3, q3) = (rng.gen_range(0..=n - p - p2), rng.gen_range(0..=n - q - q2));
                let h = DoubleForm::random(n, p3, q3, &mut rng)?;
                t.forms("associativity", pq, &wf.wedge(&h)?, &w.wedge(&f.wedge(&h)?)?);

                // contraction is the adjoint of multiplication by g
                if p < n && q < n {
                    let g = DoubleForm::metric(&m);
                    let phi = DoubleForm::random(n, p + 1, q + 1, &mut rng)?;
                    let lhs = g.wedge(&w)?.inner(&phi, &m)?;
                    t.scalars("metric_adjointness", pq, lhs, w.inner(&phi.contract(&m)?, &m)?);
                }

                // *² sign law and the inner product through *
                let star = w.hodge(&m)?;
                t.forms("hodge_square", pq, &star.hodge(&m)?, &w.scale(sign(p * (n - p) + q * (n - q))));
                let phi = DoubleForm::random(n, p, q, &mut rng)?;
                let ip = w.inner(&phi, &m)?;
                let right = w.wedge(&phi.hodge(&m)?)?.hodge(&m)?;
                t.scalars("inner_via_hodge", pq, ip, *right.scalar_value().expect("scalar"));
                let left = star.wedge(&phi)?.hodge(&m)?;
                t.scalars("inner_via_hodge", pq, ip, sign(p * (n - p) + q * (n - q)) * left.scalar_value().expect("scalar"));

                // transposition conjugacies
                let wt = w.transpose();
                t.forms("transpose_bianchi", pq, &w.bianchi(Side::Right).transpose(), &wt.bianchi(Side::Left));
                t.forms("transpose_bianchi", pq, &w.bianchi(Side::Left).transpose(), &wt.bianchi(Side::Right));
                t.forms("transpose_product", pq, &wf.transpose(), &wt.wedge(&f.transpose())?);
                t.forms("transpose_hodge", pq, &star.transpose(), &wt.hodge(&m)?);

                // Bianchi maps: defining sums (the right map with ẽ_k on the left,
                // as the transpose conjugate of ℬ) and the anti-derivation rule
                if q > 0 && p < n {
                    let mut sum = DoubleForm::zeros(n, p + 1, q - 1)?;
                    for i in 0..n {
                        let e = unit(n, i);
                        sum.axpy(-1.0, &DoubleForm::left_covector(&e)?.wedge(&w.interior(&e, Side::Right)?)?)?;
                    }
                    t.forms("bianchi_definition", pq, &w.bianchi(Side::Left), &sum);
                }
                if p > 0 && q < n {
                    let mut sum = DoubleForm::zeros(n, p - 1, q + 1)?;
                    for i in 0..n {
                        let e = unit(n, i);
                        sum.axpy(-1.0, &DoubleForm::right_covector(&e)?.wedge(&w.interior(&e, Side::Left)?)?)?;
                    }
                    t.forms("bianchi_definition", pq, &w.bianchi(Side::Right), &sum);
                }
                // each side gets a partner of a degree where the rule is nontrivial
                if p < n {
                    let (a, b) = (rng.gen_range(0..n - p), rng.gen_range(usize::from(q == 0)..=n - q));
                    let f = DoubleForm::random(n, a, b, &mut rng)?;
                    let mut rhs = if q > 0 { w.bianchi(Side::Left).wedge(&f)? } else { DoubleForm::zeros(n, p + a + 1, b - 1)? };
                    if b > 0 {
                        rhs.axpy(sign(p + q), &w.wedge(&f.bianchi(Side::Left))?)?;
                    }
                    t.forms("bianchi_antiderivation", pq, &w.wedge(&f)?.bianchi(Side::Left), &rhs);
                }
                if q < n {
                    let (a, b) = (rng.gen_range(usize::from(p == 0)..=n - p), rng.gen_range(0..n - q));
                    let f = DoubleForm::random(n, a, b, &mut rng)?;
                    let mut rhs = if p > 0 { w.bianchi(Side::Right).wedge(&f)? } else { DoubleForm::zeros(n, a - 1, q + b + 1)? };
                    if a > 0 {
                        rhs.axpy(sign(p + q), &w.wedge(&f.bianchi(Side::Right))?)?;
                    }
                    t.forms("bianchi_antiderivation", pq, &w.wedge(&f)?.bianchi(Side::Right), &rhs);
                }
            }
        }
    }
    Ok(t.finish())
}

/// `*g^k = k!/(n−k)! g^{n−k}` for `k = 0..=n`: exactly for the Euclidean
/// metric, and relative to the largest component for a random metric.
pub fn metric_power_suite(n: usize) -> Result<Vec<IdentityCheck>> {
    check_args(n, 1)?;
    let mut exact = Tally::new(n, POWER_TOLERANCE);
    let mut curved = Tally::new(n, TOLERANCE);
    let b = PointMetric::identity(n);
    let m = random_spd(n, &mut ChaCha8Rng::seed_from_u64(n as u64))?;
    for k in 0..=n {
        let c = factorial(k) / factorial(n - k);
        let gb = DoubleForm::metric(&b);
        let lhs = gb.power(k)?.hodge(&b)?;
        exact.record("hodge_metric_power", (k, k), lhs.max_diff(&gb.power(n - k)?.scale(c)));
        let gm = DoubleForm::metric(&m);
        curved.forms("hodge_metric_power_curved", (k, k), &gm.power(k)?.hodge(&m)?, &gm.power(n - k)?.scale(c));
    }
    let mut out = exact.finish();
    out.extend(curved.finish());
    Ok(out)
}

/// Jet of a random polynomial double form of degree `order` about a point.
fn random_jet(n: usize, p: usize, q: usize, order: usize, rng: &mut ChaCha8Rng) -> Result<JetForm> {
    let len = TpsSpace::get(n, order).len();
    let comps = (0..crate::dforms::binomial(n, p) * crate::dforms::binomial(n, q))
        .map(|_| Tps::from_coeffs(n, order, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    JetForm::from_comps(n, p, q, comps)
}

fn d(w: &JetForm, side: Side) -> Result<JetForm> {
    ext_deriv_jet(w, None, side)
}

/// Flat-space derivative identities on random polynomial fields: the
/// Bianchi/derivative commutation relations, `𝒟² = 𝒟̃² = [𝒟,𝒟̃] = 0`,
/// `𝒟̃ω = (𝒟ωᵀ)ᵀ` and `(𝒟̃𝒟 + 𝒟𝒟̃)𝓛_ζb = 0`.
pub fn engine_suite(n: usize, samples: usize, seed: u64) -> Result<Vec<IdentityCheck>> {
    check_args(n, samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(n, TOLERANCE);
    let b = |w: &JetForm| w.bianchi(Side::Left);
    let bt = |w: &JetForm| w.bianchi(Side::Right);
    for p in 0..=n {
        for q in 0..=n {
            let pq = (p, q);
            for _ in 0..samples {
                let j = random_jet(n, p, q, 2, &mut rng)?;
                let j1 = j.truncate(1);
                if p < n {
                    let dj = d(&j1, Side::Left)?;
                    let dt = d(&j1.transpose(), Side::Right)?.transpose();
                    t.forms("transpose_derivative", pq, &dj.values(), &dt.values());
                }
                if p + 2 <= n {
                    let lhs = b(&d(&j1, Side::Left)?).values();
                    let rhs = if q > 0 { d(&b(&j1), Side::Left)?.values().scale(-1.0) } else { lhs.zero_same() };
                    t.forms("commutation_BD", pq, &lhs, &rhs);
                }
                if q + 2 <= n {
                    let lhs = bt(&d(&j1, Side::Right)?).values();
                    let rhs = if p > 0 { d(&bt(&j1), Side::Right)?.values().scale(-1.0) } else { lhs.zero_same() };
                    t.forms("commutation_BtDt", pq, &lhs, &rhs);
                }
                if p < n && q < n {
                    let lhs = bt(&d(&j1, Side::Left)?).values();
                    let mut rhs = d(&j1, Side::Right)?.values().scale(-1.0);
                    if p > 0 {
                        rhs.axpy(-1.0, &d(&bt(&j1), Side::Left)?.values())?;
                    }
                    t.forms("commutation_BtD", pq, &lhs, &rhs);
                    let lhs = b(&d(&j1, Side::Right)?).values();
                    let mut rhs = d(&j1, Side::Left)?.values().scale(-1.0);
                    if q > 0 {
                        rhs.axpy(-1.0, &d(&b(&j1), Side::Right)?.values())?;
                    }
                    t.forms("commutation_BDt", pq, &lhs, &rhs);
                    let dt = d(&d(&j, Side::Right)?, Side::Left)?.values();
                    let td = d(&d(&j, Side::Left)?, Side::Right)?.values();
                    t.forms("flat_commutator", pq, &dt, &td);
                }
                if p + 2 <= n {
                    let dd = d(&d(&j, Side::Left)?, Side::Left)?.values();
                    t.forms("flat_d_squared", pq, &dd, &dd.zero_same());
                }
                if q + 2 <= n {
                    let tt = d(&d(&j, Side::Right)?, Side::Right)?.values();
                    t.forms("flat_dt_squared", pq, &tt, &tt.zero_same());
                }
            }
        }
    }
    if n >= 2 {
        let len = TpsSpace::get(n, 3).len();
        for _ in 0..samples {
            let zeta: Vec<Tps> = (0..n)
                .map(|_| Tps::from_coeffs(n, 3, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect();
            let l = lie_flat_jet(&zeta);
            let mut s = d(&d(&l, Side::Left)?, Side::Right)?.values();
            s.axpy(1.0, &d(&d(&l, Side::Right)?, Side::Left)?.values())?;
            t.record("flat_lie_annihilated", (1, 1), s.max_abs() / 1f64.max(l.values().max_abs()));
        }
    }
    Ok(t.finish())
}
