//! Asymptotic changes of chart `Φ = A ∘ S` with `A(y) = Qy + t` and
//! `S(x) = x + ζ(x)`, metric pullback, and invariance harnesses.
//!
//! Pullbacks are evaluated on jets: the Taylor series of `g` about `Φ(x)` is
//! composed with the jet of `Φ`, so derivatives of `Φ*g` are exact chain-rule
//! values up to rounding.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{ext_deriv_jet, lie_flat_jet, point_curvature, VectorField};
use crate::dforms::{Coeff, Side};
use crate::error::{invalid, Error, Result};
use crate::fields::{check_orthogonal, harmonic_generators, identity, norm, radius_squared, MetricField, MetricModel, Parity};
use crate::gbc::GbcContext;
use crate::invariants::{curvature_factor, flux_density, gbc_center, gbc_mass, sphere_rule, InvariantResult, Schedule};
use crate::parity::sphere_sample;
use crate::tps::{Tps, MAX_ORDER};

/// Largest radius factor, relative to `r_min`, on which injectivity is sampled.
const SHELL_SPAN: f64 = 65536.0;

/// Mass tolerance of [`invariance_report`], relative to `max(1, |m_k|)`.
pub const MASS_TOLERANCE: f64 = 1e-3;

/// Absolute center tolerance of [`invariance_report`].
pub const CENTER_TOLERANCE: f64 = 5e-3;

/// `Φ = A ∘ S`, valid on `|x| ≥ r_valid`.
#[derive(Clone)]
pub struct Diffeo {
    n: usize,
    q: Vec<f64>,
    t: Vec<f64>,
    zeta: Option<Arc<dyn VectorField>>,
    tau_prime: f64,
    r_valid: f64,
    sup_dzeta: f64,
    label: String,
}

impl fmt::Debug for Diffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Diffeo({})", self.describe())
    }
}

impl Diffeo {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major orthogonal part `Q`.
    pub fn rotation(&self) -> &[f64] {
        &self.q
    }

    pub fn translation(&self) -> &[f64] {
        &self.t
    }

    /// Declared decay `τ′` of `∂ζ`; infinite for an isometry.
    pub fn tau_prime(&self) -> f64 {
        self.tau_prime
    }

    pub fn r_valid(&self) -> f64 {
        self.r_valid
    }

    /// Largest sampled Frobenius norm of `∂ζ` on `|x| ≥ r_valid`.
    pub fn sup_dzeta(&self) -> f64 {
        self.sup_dzeta
    }

    pub fn is_isometry(&self) -> bool {
        self.zeta.is_none()
    }

    pub fn describe(&self) -> String {
        format!("diffeo(n={}, {}, tau'={}, r_valid={})", self.n, self.label, self.tau_prime, self.r_valid)
    }

    /// Jets of the components `Φ^a` about `x`.
    pub fn jets(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        let mut s = Tps::point(x, order);
        if let Some(z) = &self.zeta {
            for (si, zi) in s.iter_mut().zip(z.jet(x, order)?) {
                si.add_scaled(1.0, &zi);
            }
        }
        Ok(rigid(&self.q, &self.t, &s))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jets(x, 0)?.iter().map(|t| t.value()).collect())
    }

    /// `A⁻¹(c) = Qᵀ(c - t)`, where a center `c` of `g` moves under `Φ*`.
    pub fn pull_point(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|a| self.q[a * n + i] * (c[a] - self.t[a])).sum()).collect()
    }
}

fn rigid(q: &[f64], t: &[f64], s: &[Tps]) -> Vec<Tps> {
    let n = s.len();
    (0..n)
        .map(|a| {
            let mut out = s[0].zero_like().add_scalar(t[a]);
            for (i, si) in s.iter().enumerate() {
                out.add_scaled(q[a * n + i], si);
            }
            out
        })
        .collect()
}

/// The identity map of `ℝⁿ`.
pub fn identity_diffeo(n: usize) -> Diffeo {
    isometry(&identity(n), &vec![0.0; n]).expect("identity is orthogonal")
}

/// `Φ(x) = Qx + t`.
pub fn isometry(q: &[f64], t: &[f64]) -> Result<Diffeo> {
    let n = t.len();
    check_orthogonal(q, n)?;
    Ok(Diffeo {
        n,
        q: q.to_vec(),
        t: t.to_vec(),
        zeta: None,
        tau_prime: f64::INFINITY,
        r_valid: 0.0,
        sup_dzeta: 0.0,
        label: "isometry".into(),
    })
}

/// Validates `Φ = A ∘ (id + ζ)` on `|x| ≥ r_min`.
///
/// `sup|∂ζ| < 1` (Frobenius norm, which bounds the operator norm) is sampled
/// on geometric shells from `r_min` to `65536 r_min`; a violation is an error.
pub fn make_diffeo(q: &[f64], t: &[f64], zeta: Arc<dyn VectorField>, tau_prime: f64, r_min: f64, label: &str) -> Result<Diffeo> {
    let n = t.len();
    check_orthogonal(q, n)?;
    if zeta.dim() != n {
        return Err(Error::DimensionMismatch(zeta.dim(), n));
    }
    if !(tau_prime > 0.0) {
        return Err(invalid("tau_prime", "must be positive"));
    }
    if !(r_min > 0.0) || !r_min.is_finite() {
        return Err(invalid("r_min", "must be positive and finite"));
    }
    let (sup, at) = sup_gradient(zeta.as_ref(), r_min, SHELL_SPAN * r_min, 48)?;
    if !(sup < 1.0) {
        return Err(Error::NotInjective { sup, r: at });
    }
    Ok(Diffeo {
        n,
        q: q.to_vec(),
        t: t.to_vec(),
        zeta: Some(zeta),
        tau_prime,
        r_valid: r_min,
        sup_dzeta: sup,
        label: label.into(),
    })
}

/// Largest sampled `|∂ζ|` on shells between `r0` and `r1`, with its radius.
pub fn sup_gradient(zeta: &dyn VectorField, r0: f64, r1: f64, directions: usize) -> Result<(f64, f64)> {
    let n = zeta.dim();
    let dirs = sphere_sample(n, directions);
    let mut best = (0.0f64, r0);
    let mut r = r0;
    while r <= r1 * (1.0 + 1e-12) {
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            let j = zeta.jet(&x, 1)?;
            let s: f64 = j.iter().flat_map(|c| c.gradient()).map(|v| v * v).sum::<f64>().sqrt();
            if !s.is_finite() {
                return Err(invalid("zeta", format!("non-finite derivative at radius {r}")));
            }
            if s > best.0 {
                best = (s, r);
            }
        }
        r *= 2f64.powf(0.25);
    }
    Ok(best)
}

/// Smallest radius on a geometric grid from `r_lo` at which the sampled
/// `sup|∂ζ|` stays below `bound` out to `65536` times that radius.
pub fn injectivity_radius(zeta: &dyn VectorField, r_lo: f64, bound: f64) -> Result<f64> {
    let mut r = r_lo;
    for _ in 0..200 {
        if sup_gradient(zeta, r, SHELL_SPAN * r, 24)?.0 < bound {
            return Ok(r);
        }
        r *= 1.25;
    }
    Err(invalid("zeta", "no injectivity radius found"))
}

// ---------------------------------------------------------------------------
// ζ families
// ---------------------------------------------------------------------------

/// A vector field given as a closure on coordinate jets.
#[derive(Clone)]
pub struct ClosedZeta {
    n: usize,
    f: Arc<dyn Fn(&[Tps]) -> Vec<Tps> + Send + Sync>,
}

impl ClosedZeta {
    pub fn new<F: Fn(&[Tps]) -> Vec<Tps> + Send + Sync + 'static>(n: usize, f: F) -> Self {
        ClosedZeta { n, f: Arc::new(f) }
    }

    /// `s ζ`.
    pub fn scaled(&self, s: f64) -> ClosedZeta {
        let f = self.f.clone();
        ClosedZeta::new(self.n, move |x| f(x).iter().map(|t| t.scale(s)).collect())
    }
}

impl VectorField for ClosedZeta {
    fn dim(&self) -> usize {
        self.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        if order > MAX_ORDER {
            return Err(Error::MissingDerivative { requested: order, available: MAX_ORDER });
        }
        Ok((self.f)(&Tps::point(x, order)))
    }
}

/// `ζ = c x |x|^{-τ′}`, so `|∂ζ| = O(|x|^{-τ′})`.
pub fn radial_zeta(n: usize, c: f64, tau_prime: f64) -> ClosedZeta {
    ClosedZeta::new(n, move |x| {
        let w = radius_squared(x).powf(-tau_prime / 2.0).scale(c);
        x.iter().map(|xi| xi * &w).collect()
    })
}

/// `ζ^j = A Σ P_j(x) |x|^{-d-τ′+1}` with random harmonic `P_j` of degree `d`.
///
/// `Parity::Odd` uses odd component functions (degrees 1 and 3), which make
/// `∂ζ` and so `𝓛_ζ b` even; `Parity::Even` uses degrees 0 and 2;
/// `Parity::Mixed` adds even components decaying one order faster to odd ones.
pub fn harmonic_zeta(n: usize, tau_prime: f64, seed: u64, parity: Parity, amplitude: f64) -> ClosedZeta {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms: Vec<(usize, f64, Vec<Vec<(f64, Vec<u8>)>>)> = Vec::new();
    let mut add = |deg: usize, rate: f64, rng: &mut ChaCha8Rng| {
        let gens = harmonic_generators(n, deg);
        let scale = amplitude / (gens.len() as f64).sqrt();
        let polys = (0..n)
            .map(|_| {
                let mut poly: Vec<(f64, Vec<u8>)> = Vec::new();
                for g in &gens {
                    let c = rng.gen_range(-1.0..1.0) * scale;
                    for (gc, e) in g {
                        match poly.iter_mut().find(|(_, pe)| pe == e) {
                            Some(t) => t.0 += c * gc,
                            None => poly.push((c * gc, e.clone())),
                        }
                    }
                }
                poly
            })
            .collect();
        terms.push((deg, rate, polys));
    };
    match parity {
        Parity::Odd => {
            add(1, tau_prime, &mut rng);
            add(3, tau_prime, &mut rng);
        }
        Parity::Even => {
            add(0, tau_prime, &mut rng);
            add(2, tau_prime, &mut rng);
        }
        Parity::Mixed => {
            add(1, tau_prime, &mut rng);
            add(3, tau_prime, &mut rng);
            add(0, tau_prime + 1.0, &mut rng);
            add(2, tau_prime + 1.0, &mut rng);
        }
    }
    ClosedZeta::new(n, move |x| {
        let r2 = radius_squared(x);
        let mut out = vec![x[0].zero_like(); n];
        for (deg, rate, polys) in &terms {
            let radial = r2.powf(-(*deg as f64 + rate - 1.0) / 2.0);
            for (j, poly) in polys.iter().enumerate() {
                out[j].add_scaled(1.0, &(&eval_poly(poly, x) * &radial));
            }
        }
        out
    })
}

fn eval_poly(poly: &[(f64, Vec<u8>)], x: &[Tps]) -> Tps {
    let mut p = x[0].zero_like();
    for (c, e) in poly {
        let mut m = x[0].zero_like().add_scalar(*c);
        for (v, &k) in e.iter().enumerate() {
            for _ in 0..k {
                m = &m * &x[v];
            }
        }
        p.add_scaled(1.0, &m);
    }
    p
}

// ---------------------------------------------------------------------------
// Pullback
// ---------------------------------------------------------------------------

/// `(Φ*g)_ij` jets of the given order from jets of `Φ` of one order higher.
pub fn pullback_jets(g: &MetricField, phi: &[Tps], order: usize) -> Result<Vec<Tps>> {
    let n = g.dim();
    let y: Vec<f64> = phi.iter().map(|p| p.value()).collect();
    let gy = g.taylor(&y, order)?;
    let delta: Vec<Tps> = phi.iter().map(|p| p.add_scalar(-p.value()).truncate(order)).collect();
    let composed: Vec<Tps> = gy.iter().map(|t| t.substitute(&delta)).collect();
    let dphi: Vec<Vec<Tps>> = phi.iter().map(|p| (0..n).map(|i| p.deriv(i)).collect()).collect();
    let mut out: Vec<Tps> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if j < i {
                out.push(out[j * n + i].clone());
                continue;
            }
            let mut s = Tps::zero(n, order);
            for a in 0..n {
                let mut row = Tps::zero(n, order);
                for b in 0..n {
                    row.add_product(1.0, &composed[a * n + b], &dphi[b][j]);
                }
                s.add_product(1.0, &dphi[a][i], &row);
            }
            out.push(s);
        }
    }
    Ok(out)
}

#[derive(Debug)]
struct Pullback {
    phi: Diffeo,
    g: MetricField,
    tau: f64,
    r_min: f64,
}

impl MetricModel for Pullback {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        pullback_jets(&self.g, &self.phi.jets(x, order + 1)?, order)
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn regularity(&self) -> usize {
        self.g.regularity().min(MAX_ORDER - 1)
    }
    fn describe(&self) -> String {
        format!("pullback({}, {})", self.phi.describe(), self.g.describe())
    }
}

/// `Φ*g` on the part of the chart that `Φ` maps into the chart of `g`.
///
/// The declared decay is `min(τ_g, τ′)`. The chart radius is the smallest
/// sampled radius beyond `r_valid` whose shells land outside `g`'s `r_min`;
/// evaluations that still escape fail with [`Error::OutsideChart`].
pub fn pullback_metric(phi: &Diffeo, g: &MetricField) -> Result<MetricField> {
    if phi.dim() != g.dim() {
        return Err(Error::DimensionMismatch(phi.dim(), g.dim()));
    }
    let n = g.dim();
    let dirs = sphere_sample(n, 48);
    let mut r = (phi.r_valid()).max(g.r_min() + norm(phi.translation())).max(1e-3);
    let lands = |r: f64| -> Result<bool> {
        for k in 0..=32 {
            let rr = r * 2f64.powf(k as f64 / 2.0);
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|v| v * rr).collect();
                if norm(&phi.apply(&x)?) < g.r_min() * (1.0 + 1e-9) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    let mut tries = 0;
    while !lands(r)? {
        r *= 1.25;
        tries += 1;
        if tries > 200 {
            return Err(Error::OutsideChart { r, r_min: g.r_min() });
        }
    }
    let tau = g.tau().min(phi.tau_prime());
    Ok(MetricField::new(Pullback { phi: phi.clone(), g: g.clone(), tau, r_min: r }))
}

// ---------------------------------------------------------------------------
// Invariance harness
// ---------------------------------------------------------------------------

/// Comparison of `m_k` (and optionally `C_k`) of `g` and `Φ*g`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub n: usize,
    pub k: usize,
    pub metric: String,
    pub diffeo: String,
    pub radii: Vec<f64>,
    pub mass: InvariantResult,
    pub mass_pulled: InvariantResult,
    /// `m_k(Φ*g)(r) - m_k(g)(r)` per radius.
    pub delta_mass: Vec<f64>,
    /// Log–log slope of `|Δm_k(r)|`; `None` when it vanishes identically.
    pub delta_mass_slope: Option<f64>,
    /// Difference of the extrapolated masses.
    pub delta_mass_limit: f64,
    pub center: Option<Vec<InvariantResult>>,
    pub center_pulled: Option<Vec<InvariantResult>>,
    /// Per radius, `max_α |C^α(Φ*g)(r) - (A⁻¹C(g)(r))^α|`.
    pub delta_center: Option<Vec<f64>>,
    /// `max_α` of the same difference of the extrapolated centers.
    pub delta_center_limit: Option<f64>,
    pub mass_tolerance: f64,
    pub center_tolerance: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Computes `m_k` (and `C_k` when `with_center`) for `g` and `Φ*g` on the same
/// schedule and compares them.
///
/// Passes when the extrapolated differences are within [`MASS_TOLERANCE`] and
/// [`CENTER_TOLERANCE`], the per-radius mass difference does not grow, and no
/// fit is flagged. Numerical trouble shows up in `warnings` and `pass`;
/// only invalid input is an error.
pub fn invariance_report(
    g: &MetricField,
    phi: &Diffeo,
    ctx: &GbcContext,
    sched: &Schedule,
    with_center: bool,
) -> Result<InvarianceReport> {
    let pulled = pullback_metric(phi, g)?;
    let mass = gbc_mass(g, ctx, sched)?;
    let mass_pulled = gbc_mass(&pulled, ctx, sched)?;
    let radii = sched.radii.clone();
    let delta_mass: Vec<f64> = mass_pulled.per_radius.iter().zip(&mass.per_radius).map(|(a, b)| a.value - b.value).collect();
    let delta_mass_limit = mass_pulled.limit - mass.limit;
    let delta_mass_slope = log_slope(&radii, &delta_mass);
    let mass_tolerance = MASS_TOLERANCE * mass.limit.abs().max(1.0);
    let mut warnings = Vec::new();
    let mut pass = delta_mass_limit.abs() < mass_tolerance;
    if !pass {
        warnings.push(format!("mass changes by {delta_mass_limit:.3e} (tolerance {mass_tolerance:.1e})"));
    }
    let small = delta_mass.iter().all(|d| d.abs() < mass_tolerance);
    if let Some(s) = delta_mass_slope {
        if !small && s >= 0.0 {
            pass = false;
            warnings.push(format!("mass difference does not decay (log-log slope {s:.3})"));
        }
    }
    for m in [&mass, &mass_pulled] {
        if m.flagged() {
            pass = false;
            warnings.push(format!("{} flagged: {}", m.name, m.warnings.join("; ")));
        }
    }
    if pulled.tau() <= ctx.tau_threshold() {
        warnings.push(format!("decay {} of the pulled-back metric is not above the threshold {}", pulled.tau(), ctx.tau_threshold()));
    }

    let (mut center, mut center_pulled, mut delta_center, mut delta_center_limit) = (None, None, None, None);
    if with_center {
        let c = gbc_center(g, ctx, sched, &mass)?;
        let cp = gbc_center(&pulled, ctx, sched, &mass_pulled)?;
        let per: Vec<f64> = (0..radii.len())
            .map(|i| {
                let here: Vec<f64> = c.iter().map(|r| r.per_radius[i].value).collect();
                let moved = phi.pull_point(&here);
                cp.iter().zip(&moved).map(|(r, m)| (r.per_radius[i].value - m).abs()).fold(0.0, f64::max)
            })
            .collect();
        let lim: Vec<f64> = c.iter().map(|r| r.limit).collect();
        let moved = phi.pull_point(&lim);
        let dl = cp.iter().zip(&moved).map(|(r, m)| (r.limit - m).abs()).fold(0.0, f64::max);
        if !(dl < CENTER_TOLERANCE) {
            pass = false;
            warnings.push(format!("center moves by {dl:.3e} (tolerance {CENTER_TOLERANCE:.1e})"));
        }
        for r in c.iter().chain(&cp) {
            if r.flagged() {
                pass = false;
                warnings.push(format!("{} flagged", r.name));
            }
        }
        center = Some(c);
        center_pulled = Some(cp);
        delta_center = Some(per);
        delta_center_limit = Some(dl);
    }
    Ok(InvarianceReport {
        n: ctx.n(),
        k: ctx.k(),
        metric: g.describe(),
        diffeo: phi.describe(),
        radii,
        mass,
        mass_pulled,
        delta_mass,
        delta_mass_slope,
        delta_mass_limit,
        center,
        center_pulled,
        delta_center,
        delta_center_limit,
        mass_tolerance,
        center_tolerance: CENTER_TOLERANCE,
        pass,
        warnings,
    })
}

impl InvarianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per radius: `r,delta_mass,delta_center`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,delta_mass,delta_center\n");
        for (i, r) in self.radii.iter().enumerate() {
            let dc = self.delta_center.as_ref().map_or(String::new(), |d| format!("{:e}", d[i]));
            out.push_str(&format!("{r},{:e},{dc}\n", self.delta_mass[i]));
        }
        out
    }
}

/// Sphere integral of the linearised flux `𝒟̃(𝓛_ζ b) ⍘ R^{k-1} ⍘ b^{n-2k}`
/// together with the size of the terms that keep it from being exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieFluxReport {
    pub radius: f64,
    pub flux: f64,
    /// `∫ |integrand|`
    pub magnitude: f64,
    /// `∫ |∂ζ| |∂e| |R|^{k-1}`
    pub budget: f64,
}

/// For `k = 1` the integrand is an exact form on the sphere and `flux`
/// vanishes to rounding; for `k ≥ 2` the flat derivative fails to annihilate
/// `R`, and `|flux|` is controlled by `budget`.
pub fn lie_flux_check(g: &MetricField, zeta: &dyn VectorField, ctx: &GbcContext, r: f64, level: usize) -> Result<LieFluxReport> {
    let n = ctx.n();
    if g.dim() != n || zeta.dim() != n {
        return Err(Error::DimensionMismatch(g.dim(), n));
    }
    let k = ctx.k() as i32;
    let rule = sphere_rule(n, r, level)?;
    let out = rule.integrate(3, |p| {
        let z = zeta.jet(&p.x, 2)?;
        let dl = ext_deriv_jet(&lie_flat_jet(&z), None, Side::Right)?.values();
        let f = flux_density(&dl.wedge(&curvature_factor(g, &p.x, ctx)?)?, &p.x)?;
        let dz: f64 = z.iter().flat_map(|c| c.gradient()).map(|v| v * v).sum::<f64>().sqrt();
        let de: f64 = g.d1(&p.x)?.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rn = if k > 1 { point_curvature(g, &p.x)?.riemann.norm().powi(k - 1) } else { 1.0 };
        Ok(vec![f, f.abs(), dz * de * rn])
    })?;
    Ok(LieFluxReport { radius: r, flux: out.value[0], magnitude: out.value[1], budget: out.value[2] })
}

fn log_slope(radii: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = radii.iter().zip(values).filter(|(_, v)| v.abs() > 0.0).map(|(r, v)| (r.ln(), v.abs().ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests;
