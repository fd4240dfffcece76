//! Asymptotic invariants: flux integrands, sphere quadrature, extrapolation
//! in `r` and the calibrated mass and center drivers.
//!
//! All stars, products and exterior derivatives inside the integrands are
//! Euclidean; only the curvature `R = R^g` and the Lovelock tensor use `g`.
//! Spheres are centred at the chart origin and `ν = x / |x|`.

mod calibration;
mod fit;
mod quadrature;

use serde::{Deserialize, Serialize};

use crate::curvature::{ext_deriv_jet, point_curvature};
use crate::dforms::{factorial, DoubleForm, JetForm, PointMetric, Side};
use crate::error::{invalid, Error, Result};
use crate::fields::MetricField;
use crate::gbc::{lovelock_form, GbcContext};
use crate::tps::Tps;

pub use calibration::{calibrate, calibration, Calibration, CALIBRATION_TABLE};
pub use fit::{extrapolate, extrapolate_auto, extrapolate_with, Extrapolation, FitModel, FIT_FLOOR, FIT_TOLERANCE};
pub use quadrature::{neumaier_sum, sphere_rule, unit_sphere_volume, Integral, SphereNode, SphereRule, SPHERE_DIMS};

/// Relative change between successive level doublings accepted as converged.
pub const LEVEL_TOLERANCE: f64 = 1e-8;

/// Radii and quadrature settings shared by the drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub radii: Vec<f64>,
    /// Starting level; doubled until successive integrals agree.
    pub level: usize,
    /// Largest level tried.
    pub max_level: usize,
    /// Node budget per sphere; doubling stops before exceeding it.
    pub max_nodes: usize,
    /// Correction terms in the `r`-fit, capped at `radii.len() - 2`.
    pub fit_terms: usize,
}

impl Schedule {
    /// `r_0 · 2^j` for `j = 0..count`.
    pub fn dyadic(r0: f64, count: usize, level: usize) -> Self {
        let radii = (0..count).map(|j| r0 * 2f64.powi(j as i32)).collect();
        Schedule { radii, level, max_level: 64, max_nodes: 300_000, fit_terms: 3 }
    }

    /// The default schedule: radii 20, 40, .., 320 starting at level 4.
    pub fn standard() -> Self {
        Schedule::dyadic(20.0, 5, 4)
    }

    fn validate(&self, g: &MetricField) -> Result<()> {
        if self.radii.len() < 3 {
            return Err(invalid("radii", "need at least 3 radii"));
        }
        if self.radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("radii", "must be increasing"));
        }
        if !(self.radii[0] > g.r_min()) {
            return Err(Error::OutsideChart { r: self.radii[0], r_min: g.r_min() });
        }
        if self.level == 0 {
            return Err(invalid("level", "must be at least 1"));
        }
        if self.fit_terms == 0 {
            return Err(invalid("fit_terms", "must be at least 1"));
        }
        Ok(())
    }
}

/// Value at one radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSample {
    pub r: f64,
    /// Normalised value (prefactor and calibration applied).
    pub value: f64,
    /// Level actually used.
    pub level: usize,
    /// Whether the last doubling met [`LEVEL_TOLERANCE`].
    pub converged: bool,
}

/// One invariant evaluated along a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub per_radius: Vec<RadiusSample>,
    pub limit: f64,
    pub fit: Extrapolation,
    /// Normalisation applied to the raw integrals (prefactor times calibration).
    pub constant_used: f64,
    pub warnings: Vec<String>,
}

impl InvariantResult {
    /// The value fails the convergence checks in quadrature or in `r`.
    pub fn flagged(&self) -> bool {
        self.fit.flagged || self.per_radius.iter().any(|s| !s.converged)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable")
    }

    /// `r,value,level,converged` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,r,value,level,converged\n");
        for p in &self.per_radius {
            s.push_str(&format!("{},{},{:.17e},{},{}\n", self.name, p.r, p.value, p.level, p.converged));
        }
        s
    }
}

/// Decay exponent used for the `r`-fits: the largest `s` dividing both the
/// Schwarzschild decay `n/k - 2` and `1`.
pub fn fit_exponent(n: usize, k: usize) -> f64 {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let g = gcd(n - 2 * k, k).max(1);
    g as f64 / k as f64
}

/// `(-1)^n / (2 (n-1)! ω_{n-1})`.
pub fn mass_prefactor(n: usize) -> f64 {
    let s = if n % 2 == 0 { 1.0 } else { -1.0 };
    s / (2.0 * factorial(n - 1) * unit_sphere_volume(n))
}

/// Standard ADM normalisation `1 / (2 (n-1) ω_{n-1})`.
pub fn adm_prefactor(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64 - 1.0) * unit_sphere_volume(n))
}

// ---------------------------------------------------------------------------
// Pointwise integrands
// ---------------------------------------------------------------------------

/// Ingredients shared by the mass and center integrands at one point.
struct FluxParts {
    /// `𝒟̃e ∈ 𝒟^{1,2}`
    de: DoubleForm,
    /// `e ∈ 𝒟^{1,1}`
    e: DoubleForm,
    /// `R^{k-1} ⍘ b^{n-2k} ∈ 𝒟^{n-2,n-2}`
    q: DoubleForm,
}

fn flux_parts(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<FluxParts> {
    check(g, ctx)?;
    let n = ctx.n();
    let ej = JetForm::from_comps(n, 1, 1, g.deviation(x, 1)?)?;
    let de = ext_deriv_jet(&ej, None, Side::Right)?.values();
    let q = if ctx.k() == 1 {
        ctx.b_power().clone()
    } else {
        let pc = point_curvature(g, x)?;
        pc.riemann.power(ctx.k() - 1)?.wedge(ctx.b_power())?
    };
    Ok(FluxParts { de, e: ej.values(), q })
}

fn check(g: &MetricField, ctx: &GbcContext) -> Result<()> {
    if g.dim() != ctx.n() {
        return Err(Error::DimensionMismatch(g.dim(), ctx.n()));
    }
    if ctx.n() < 2 * ctx.k() + 1 {
        return Err(invalid("k", "flux integrands need n >= 2k + 1"));
    }
    Ok(())
}

fn unit_normal(x: &[f64]) -> Result<Vec<f64>> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r > 0.0) {
        return Err(invalid("x", "the origin has no normal"));
    }
    Ok(x.iter().map(|v| v / r).collect())
}

/// `*ω(ν)` for `ω ∈ 𝒟^{n-1,n}` (Euclidean star, result in `𝒟^{1,0}`).
fn star_flux(w: &DoubleForm, nu: &[f64]) -> Result<f64> {
    let s = w.hodge(&PointMetric::identity(w.dim()))?;
    Ok(s.comps().iter().zip(nu).map(|(a, b)| a * b).sum())
}

/// `⟨ω, d̃vol⟩` with `d̃vol = ι_ν(dvol ⊗ dvol) ∈ 𝒟^{n-1,n}`.
fn volume_pairing(w: &DoubleForm, nu: &[f64]) -> Result<f64> {
    let id = PointMetric::identity(w.dim());
    let dvol = DoubleForm::volume(&id).interior(nu, Side::Left)?;
    w.inner(&dvol, &id)
}

/// `R^{k-1} ⍘ b^{n-2k}` at `x` (just `b^{n-2}` for `k = 1`).
pub fn curvature_factor(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<DoubleForm> {
    Ok(flux_parts(g, x, ctx)?.q)
}

/// `*ω(ν)` at `x` for `ω ∈ 𝒟^{n-1,n}`, the flux density used by the mass.
pub fn flux_density(w: &DoubleForm, x: &[f64]) -> Result<f64> {
    star_flux(w, &unit_normal(x)?)
}

/// `𝒟̃e ⍘ R^{k-1} ⍘ b^{n-2k} ∈ 𝒟^{n-1,n}` at `x`.
pub fn mass_form(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<DoubleForm> {
    let p = flux_parts(g, x, ctx)?;
    p.de.wedge(&p.q)
}

/// `*(𝒟̃e ⍘ R^{k-1} ⍘ b^{n-2k})(ν)` at `x`.
pub fn mass_integrand(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<f64> {
    star_flux(&mass_form(g, x, ctx)?, &unit_normal(x)?)
}

/// The same flux written as `⟨𝒟̃e ⍘ R^{k-1} ⍘ b^{n-2k}, d̃vol⟩`.
///
/// Equals `(-1)^{n-1}` times [`mass_integrand`].
pub fn mass_integrand_pairing(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<f64> {
    volume_pairing(&mass_form(g, x, ctx)?, &unit_normal(x)?)
}

/// `xⁱ 𝒟̃e ⍘ Q - 𝒟̃xⁱ ⍘ e ⍘ Q` with `Q = R^{k-1} ⍘ b^{n-2k}`, for every axis.
pub fn center_forms(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<Vec<DoubleForm>> {
    let n = ctx.n();
    let p = flux_parts(g, x, ctx)?;
    let a = p.de.wedge(&p.q)?;
    (0..n)
        .map(|i| {
            let xi = JetForm::from_comps(n, 0, 0, vec![Tps::variable(n, 1, i, x[i])])?;
            let dxi = ext_deriv_jet(&xi, None, Side::Right)?.values();
            let mut f = a.scale(x[i]);
            f.axpy(-1.0, &dxi.wedge(&p.e)?.wedge(&p.q)?)?;
            Ok(f)
        })
        .collect()
}

/// Center flux for axis `i`.
pub fn center_integrand(g: &MetricField, x: &[f64], ctx: &GbcContext, i: usize) -> Result<f64> {
    if i >= ctx.n() {
        return Err(invalid("axis", format!("{i} out of range")));
    }
    star_flux(&center_forms(g, x, ctx)?[i], &unit_normal(x)?)
}

/// Center flux for axis `i` in the `d̃vol` pairing; `(-1)^{n-1}` times
/// [`center_integrand`].
pub fn center_integrand_pairing(g: &MetricField, x: &[f64], ctx: &GbcContext, i: usize) -> Result<f64> {
    if i >= ctx.n() {
        return Err(invalid("axis", format!("{i} out of range")));
    }
    volume_pairing(&center_forms(g, x, ctx)?[i], &unit_normal(x)?)
}

/// `(∂_i g_ij - ∂_j g_kk) ν^j`.
pub fn adm_integrand(g: &MetricField, x: &[f64]) -> Result<f64> {
    let n = g.dim();
    let nu = unit_normal(x)?;
    let d = g.d1(x)?;
    let dg = |a: usize, i: usize, j: usize| d[(a * n + i) * n + j];
    let mut s = 0.0;
    for j in 0..n {
        let mut t = 0.0;
        for i in 0..n {
            t += dg(i, i, j) - dg(j, i, i);
        }
        s += t * nu[j];
    }
    Ok(s)
}

/// `X^{(α)} = r² ∂_α - 2 x^α r∂_r`.
pub fn conformal_killing(x: &[f64], alpha: usize) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| if i == alpha { r2 } else { 0.0 } - 2.0 * x[alpha] * xi)
        .collect()
}

/// `T_k(X^{(α)}, ν)` for every axis.
pub fn curvature_center_integrand(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<Vec<f64>> {
    check(g, ctx)?;
    let n = ctx.n();
    let pc = point_curvature(g, x)?;
    let t = lovelock_form(&pc.riemann, &pc.metric, ctx.k())?;
    let nu = unit_normal(x)?;
    let tn: Vec<f64> = (0..n).map(|i| (0..n).map(|j| t.comps()[i * n + j] * nu[j]).sum()).collect();
    Ok((0..n).map(|a| conformal_killing(x, a).iter().zip(&tn).map(|(u, v)| u * v).sum()).collect())
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

type NodeFn<'a> = dyn Fn(&SphereNode) -> Result<Vec<f64>> + Sync + 'a;

/// Integrates over `S_r`, doubling the level until two successive results
/// agree to [`LEVEL_TOLERANCE`] relative to `∫|f|`.
fn adaptive(n: usize, r: f64, dim: usize, sched: &Schedule, f: &NodeFn<'_>) -> Result<(Vec<f64>, usize, bool)> {
    let nodes = |l: usize| 2 * l.pow(n as u32 - 1);
    let mut level = sched.level;
    let mut prev = sphere_rule(n, r, level)?.integrate(dim, f)?;
    loop {
        let next = 2 * level;
        if next > sched.max_level || nodes(next) > sched.max_nodes {
            return Ok((prev.value, level, false));
        }
        let cur = sphere_rule(n, r, next)?.integrate(dim, f)?;
        let ok = cur.value.iter().zip(&prev.value).zip(&cur.magnitude).all(|((a, b), m)| (a - b).abs() <= LEVEL_TOLERANCE * m.max(1e-300));
        level = next;
        if ok {
            return Ok((cur.value, level, true));
        }
        prev = cur;
    }
}

/// Runs `f` on every radius and fits each output component.
fn run(
    g: &MetricField,
    sched: &Schedule,
    names: Vec<String>,
    k: usize,
    scale: &[f64],
    f: &NodeFn<'_>,
) -> Result<Vec<InvariantResult>> {
    sched.validate(g)?;
    let n = g.dim();
    let dim = names.len();
    let mut per: Vec<Vec<RadiusSample>> = vec![Vec::new(); dim];
    for &r in &sched.radii {
        let (vals, level, converged) = adaptive(n, r, dim, sched, f)?;
        for c in 0..dim {
            per[c].push(RadiusSample { r, value: vals[c] * scale[c], level, converged });
        }
    }
    let s = fit_exponent(n, k.max(1));
    let terms = sched.fit_terms.min(sched.radii.len() - 2).max(1);
    names
        .into_iter()
        .zip(per)
        .zip(scale)
        .map(|((name, per_radius), &c)| {
            let samples: Vec<(f64, f64)> = per_radius.iter().map(|p| (p.r, p.value)).collect();
            let fit = extrapolate_auto(&samples, s, terms)?;
            let mut warnings = Vec::new();
            if fit.flagged {
                warnings.push(format!("fit residual {:.3e} exceeds ten times the predicted {:.3e}", fit.residual, fit.predicted));
            }
            if per_radius.iter().any(|p| !p.converged) {
                warnings.push("quadrature did not converge at every radius".into());
            }
            Ok(InvariantResult { name, n, k, per_radius, limit: fit.limit, fit, constant_used: c, warnings })
        })
        .collect()
}

fn decay_warning(g: &MetricField, ctx: &GbcContext) -> Option<String> {
    (g.tau() <= ctx.tau_threshold())
        .then(|| format!("decay order {} is not above the threshold {}", g.tau(), ctx.tau_threshold()))
}

/// The GBC mass `m_k`, normalised by the prefactor and the shipped `a_{n,k}`.
pub fn gbc_mass(g: &MetricField, ctx: &GbcContext, sched: &Schedule) -> Result<InvariantResult> {
    let cal = calibration(ctx.n(), ctx.k())?;
    gbc_mass_with(g, ctx, sched, cal.a)
}

/// [`gbc_mass`] with an explicit calibration factor (1 gives the bare prefactor).
pub fn gbc_mass_with(g: &MetricField, ctx: &GbcContext, sched: &Schedule, a: f64) -> Result<InvariantResult> {
    check(g, ctx)?;
    let c = mass_prefactor(ctx.n()) * a;
    let f = |p: &SphereNode| mass_integrand(g, &p.x, ctx).map(|v| vec![v]);
    let mut out = run(g, sched, vec![format!("m_{}", ctx.k())], ctx.k(), &[c], &f)?.remove(0);
    out.warnings.extend(decay_warning(g, ctx));
    Ok(out)
}

/// Coordinate ADM mass `∫(∂_i g_ij - ∂_j g_kk)ν^j` with the standard
/// normalisation [`adm_prefactor`].
pub fn adm_mass_coordinate(g: &MetricField, sched: &Schedule) -> Result<InvariantResult> {
    let n = g.dim();
    let f = |p: &SphereNode| adm_integrand(g, &p.x).map(|v| vec![v]);
    let mut out = run(g, sched, vec!["m_adm".into()], 1, &[adm_prefactor(n)], &f)?.remove(0);
    if g.tau() <= (n as f64 - 2.0) / 2.0 {
        out.warnings.push(format!("decay order {} is not above {}", g.tau(), (n as f64 - 2.0) / 2.0));
    }
    Ok(out)
}

fn mass_value(mass: &InvariantResult) -> Result<f64> {
    if !(mass.limit.abs() > 1e-12) {
        return Err(Error::VanishingMass);
    }
    Ok(mass.limit)
}

/// The GBC center of mass `C_k`, one result per axis.
///
/// Each axis is normalised by the prefactor, `a_{n,k}`, `c_{n,k}` and the
/// mass value `m_k` from `mass`.
pub fn gbc_center(g: &MetricField, ctx: &GbcContext, sched: &Schedule, mass: &InvariantResult) -> Result<Vec<InvariantResult>> {
    let cal = calibration(ctx.n(), ctx.k())?;
    gbc_center_with(g, ctx, sched, mass, cal.a * cal.c)
}

/// [`gbc_center`] with an explicit product `a_{n,k} c_{n,k}`.
pub fn gbc_center_with(
    g: &MetricField,
    ctx: &GbcContext,
    sched: &Schedule,
    mass: &InvariantResult,
    factor: f64,
) -> Result<Vec<InvariantResult>> {
    check(g, ctx)?;
    let m = mass_value(mass)?;
    let n = ctx.n();
    let c = mass_prefactor(n) * factor / m;
    let f = |p: &SphereNode| -> Result<Vec<f64>> {
        let forms = center_forms(g, &p.x, ctx)?;
        forms.iter().map(|w| star_flux(w, &p.normal)).collect()
    };
    let names = (1..=n).map(|i| format!("C_{}^{}", ctx.k(), i)).collect();
    let mut out = run(g, sched, names, ctx.k(), &vec![c; n], &f)?;
    for r in &mut out {
        r.warnings.extend(decay_warning(g, ctx));
    }
    Ok(out)
}

/// `lim ∫ T_k(X^{(α)}, ν)` per axis, unnormalised.
pub fn curvature_center(g: &MetricField, ctx: &GbcContext, sched: &Schedule) -> Result<Vec<InvariantResult>> {
    check(g, ctx)?;
    let n = ctx.n();
    let f = |p: &SphereNode| curvature_center_integrand(g, &p.x, ctx);
    let names = (1..=n).map(|i| format!("T_{}(X^{},nu)", ctx.k(), i)).collect();
    run(g, sched, names, ctx.k(), &vec![1.0; n], &f)
}

/// Ratios `lim ∫T_k(X^{(α)},ν) / (m_k C^α_k)`; `None` where `|C^α|` is below `floor`.
pub fn curvature_center_ratios(
    curv: &[InvariantResult],
    center: &[InvariantResult],
    mass: &InvariantResult,
    floor: f64,
) -> Vec<Option<f64>> {
    curv.iter()
        .zip(center)
        .map(|(t, c)| (c.limit.abs() > floor).then(|| t.limit / (mass.limit * c.limit)))
        .collect()
}

/// Flux balance on the annulus `R/2 ≤ |x| ≤ R` for the weight `V` (`None` for
/// `V = 1`, `Some(i)` for `V = xⁱ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StokesReport {
    /// `(-1)^{n-1} / (n-2k)!` times the outer minus the inner sphere flux.
    pub boundary: f64,
    /// `∫ V L_k` over the annulus.
    pub bulk: f64,
    /// `∫ |V| (|e| |R|^k + |∂e|² |R|^{k-1})`, the size of the terms the
    /// balance neglects.
    pub budget: f64,
}

impl StokesReport {
    /// `|boundary - bulk| / budget`.
    pub fn budget_ratio(&self) -> f64 {
        (self.boundary - self.bulk).abs() / self.budget.max(f64::MIN_POSITIVE)
    }
}

/// Compares the boundary fluxes of the mass or center integrand with the bulk
/// integral of `V L_k`.
///
/// With the normalisations used here the flux divergence equals `V L_k` up to
/// terms of the size reported in [`StokesReport::budget`]; for `k = 1` these
/// are quadratic in `g - b`.
pub fn stokes_check(g: &MetricField, ctx: &GbcContext, weight: Option<usize>, radius: f64, level: usize) -> Result<StokesReport> {
    check(g, ctx)?;
    let n = ctx.n();
    let k = ctx.k();
    if let Some(i) = weight {
        if i >= n {
            return Err(invalid("axis", format!("{i} out of range")));
        }
    }
    if !(radius / 2.0 > g.r_min()) {
        return Err(Error::OutsideChart { r: radius / 2.0, r_min: g.r_min() });
    }
    let flux = |r: f64| -> Result<f64> {
        sphere_rule(n, r, level)?.integrate_scalar(|p| match weight {
            None => mass_integrand(g, &p.x, ctx),
            Some(i) => center_integrand(g, &p.x, ctx, i),
        })
    };
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let boundary = sign / factorial(n - 2 * k) * (flux(radius)? - flux(radius / 2.0)?);
    let unit = sphere_rule(n, 1.0, level)?;
    let mut bulk = Vec::new();
    let mut budget = Vec::new();
    for (r, w) in quadrature::legendre_interval(2 * level, radius / 2.0, radius) {
        let shell = unit.integrate(2, |p| {
            let x: Vec<f64> = p.x.iter().map(|v| v * r).collect();
            let v = weight.map_or(1.0, |i| x[i]);
            let pc = point_curvature(g, &x)?;
            let lk = crate::gbc::gbc_scalar(&pc.riemann, &pc.metric, k)?;
            let e = g.deviation(&x, 0)?.iter().map(|t| t.value().powi(2)).sum::<f64>().sqrt();
            let de = pc.dg.iter().map(|t| t * t).sum::<f64>().sqrt();
            let rm = pc.riemann.norm();
            Ok(vec![v * lk, v.abs() * (e * rm.powi(k as i32) + de * de * rm.powi(k as i32 - 1))])
        })?;
        let jac = w * r.powi(n as i32 - 1);
        bulk.push(jac * shell.value[0]);
        budget.push(jac * shell.value[1]);
    }
    Ok(StokesReport { boundary, bulk: neumaier_sum(bulk), budget: neumaier_sum(budget) })
}

#[cfg(test)]
mod tests;
