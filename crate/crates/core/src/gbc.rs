//! Gauss–Bonnet–Chern curvatures `L_k`, the companion forms `P_k`, Lovelock
//! tensors `T_k` and the first-order curvature variation.
//!
//! With `R` the curvature double form of `g`:
//!
//! * `L_k = *(R^k ⍘ g^{n-2k}) / (n-2k)!`
//! * `*P_k = R^{k-1} ⍘ g^{n-2k} / (n-2k)!`, so `L_k = *(R ⍘ *P_k)`
//! * `T_k = *(R^k ⍘ g^{n-2k-1}) / (n-2k-1)!`, with `c(T_k) = (n-2k) L_k`
//!
//! All stars, products and powers use the pointwise metric `g`.

use crate::curvature::{ext_deriv_jet, DoubleFormField, LocalGeometry};
use crate::dforms::{factorial, Coeff, DForm, DoubleForm, JetForm, Metric, Side};
use crate::error::{invalid, Error, Result};
use crate::fields::MetricField;
use crate::tps::Tps;

/// Linear coefficient in `R^{g+h} = R^g + κ (𝒟𝒟̃ + 𝒟̃𝒟) h + O(|R||h| + |h|·|∂²h| + |∂h|²)`
/// for the normalisation `R = 2 Rm`.
pub const VARIATION_COEFFICIENT: f64 = -0.5;

/// Dimension, order and the Euclidean powers shared by all evaluations.
#[derive(Clone, Debug)]
pub struct GbcContext {
    n: usize,
    k: usize,
    b_main: DoubleForm,
    b_lovelock: Option<DoubleForm>,
}

impl GbcContext {
    /// Requires `1 ≤ k` and `2k ≤ n`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if !(2..=crate::dforms::MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if 2 * k > n {
            return Err(Error::DegreeOverflow { n, p: 2 * k, q: 2 * k });
        }
        let b = DoubleForm::euclidean(n);
        let b_main = b.power(n - 2 * k)?;
        let b_lovelock = if 2 * k < n { Some(b.power(n - 2 * k - 1)?) } else { None };
        Ok(GbcContext { n, k, b_main, b_lovelock })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `b^{n-2k}`.
    pub fn b_power(&self) -> &DoubleForm {
        &self.b_main
    }

    /// `b^{n-2k-1}`, present when `n > 2k`.
    pub fn b_power_lovelock(&self) -> Option<&DoubleForm> {
        self.b_lovelock.as_ref()
    }

    /// Decay threshold `(n-2k)/(k+1)` for the mass.
    pub fn tau_threshold(&self) -> f64 {
        (self.n - 2 * self.k) as f64 / (self.k + 1) as f64
    }

    fn check(&self, g: &MetricField) -> Result<()> {
        if g.dim() != self.n {
            return Err(Error::DimensionMismatch(g.dim(), self.n));
        }
        Ok(())
    }

    fn require_lovelock(&self) -> Result<()> {
        if self.b_lovelock.is_none() {
            return Err(Error::DegreeOverflow { n: self.n, p: self.n + 1, q: self.n + 1 });
        }
        Ok(())
    }
}

/// `L_k` from a curvature form and metric of any coefficient type.
pub fn gbc_scalar<T: Coeff>(r: &DForm<T>, metric: &Metric<T>, k: usize) -> Result<T> {
    let n = r.dim();
    let g = metric_form(metric);
    let top = r.power(k)?.wedge(&g.power(n - 2 * k)?)?;
    let s = top.hodge(metric)?;
    Ok(s.comps()[0].scaled(1.0 / factorial(n - 2 * k)))
}

/// `*P_k = R^{k-1} ⍘ g^{n-2k} / (n-2k)!`.
pub fn star_p_k_form<T: Coeff>(r: &DForm<T>, metric: &Metric<T>, k: usize) -> Result<DForm<T>> {
    let n = r.dim();
    let g = metric_form(metric);
    Ok(r.power(k - 1)?.wedge(&g.power(n - 2 * k)?)?.scale(1.0 / factorial(n - 2 * k)))
}

/// `T_k = *(R^k ⍘ g^{n-2k-1}) / (n-2k-1)!`.
pub fn lovelock_form<T: Coeff>(r: &DForm<T>, metric: &Metric<T>, k: usize) -> Result<DForm<T>> {
    let n = r.dim();
    let g = metric_form(metric);
    let top = r.power(k)?.wedge(&g.power(n - 2 * k - 1)?)?;
    Ok(top.hodge(metric)?.scale(1.0 / factorial(n - 2 * k - 1)))
}

fn metric_form<T: Coeff>(m: &Metric<T>) -> DForm<T> {
    DForm::from_comps(m.dim(), 1, 1, m.matrix().to_vec()).expect("shape")
}

/// `L_k(x)`.
pub fn l_k(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<f64> {
    ctx.check(g)?;
    let pc = crate::curvature::point_curvature(g, x)?;
    gbc_scalar(&pc.riemann, &pc.metric, ctx.k)
}

/// `*P_k(x) ∈ 𝒟^{n-2,n-2}`.
pub fn star_p_k(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<DoubleForm> {
    ctx.check(g)?;
    let pc = crate::curvature::point_curvature(g, x)?;
    star_p_k_form(&pc.riemann, &pc.metric, ctx.k)
}

/// `P_k(x) ∈ 𝒟^{2,2}`, the preimage of [`star_p_k`] under `*`.
pub fn p_k(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<DoubleForm> {
    ctx.check(g)?;
    let pc = crate::curvature::point_curvature(g, x)?;
    // *² = +1 on 𝒟^{p,p}
    star_p_k_form(&pc.riemann, &pc.metric, ctx.k)?.hodge(&pc.metric)
}

/// `T_k(x) ∈ 𝒟^{1,1}`; requires `n > 2k`.
pub fn lovelock(g: &MetricField, x: &[f64], ctx: &GbcContext) -> Result<DoubleForm> {
    ctx.check(g)?;
    ctx.require_lovelock()?;
    let pc = crate::curvature::point_curvature(g, x)?;
    lovelock_form(&pc.riemann, &pc.metric, ctx.k)
}

/// `*P_k` as a field with jets (for `𝒟^g(*P_k) = 0`).
#[derive(Clone, Debug)]
pub struct StarPkField {
    pub metric: MetricField,
    pub ctx: GbcContext,
}

impl DoubleFormField for StarPkField {
    fn dim(&self) -> usize {
        self.ctx.n
    }
    fn degrees(&self) -> (usize, usize) {
        (self.ctx.n - 2, self.ctx.n - 2)
    }
    fn max_order(&self) -> usize {
        self.metric.regularity().saturating_sub(2)
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        self.ctx.check(&self.metric)?;
        let geo = LocalGeometry::new(&self.metric, x, order + 2)?;
        star_p_k_form(&geo.riemann()?, &geo.metric_to(order), self.ctx.k)
    }
}

/// `T_k` as a field with jets (for `δT_k = δ̃T_k = 0`).
#[derive(Clone, Debug)]
pub struct LovelockField {
    pub metric: MetricField,
    pub ctx: GbcContext,
}

impl DoubleFormField for LovelockField {
    fn dim(&self) -> usize {
        self.ctx.n
    }
    fn degrees(&self) -> (usize, usize) {
        (1, 1)
    }
    fn max_order(&self) -> usize {
        self.metric.regularity().saturating_sub(2)
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        self.ctx.check(&self.metric)?;
        self.ctx.require_lovelock()?;
        let geo = LocalGeometry::new(&self.metric, x, order + 2)?;
        lovelock_form(&geo.riemann()?, &geo.metric_to(order), self.ctx.k)
    }
}

/// `R^{g+εh} - R^g - κ (𝒟𝒟̃ + 𝒟̃𝒟)(εh)` at `x`, derivatives for the Levi-Civita
/// connection of `g` and `κ` = [`VARIATION_COEFFICIENT`].
pub fn variation_residual<H: DoubleFormField + ?Sized>(g: &MetricField, h: &H, x: &[f64], eps: f64) -> Result<DoubleForm> {
    let n = g.dim();
    if h.dim() != n {
        return Err(Error::DimensionMismatch(h.dim(), n));
    }
    if h.degrees() != (1, 1) {
        let (p, q) = h.degrees();
        return Err(Error::DegreeMismatch(p, q, 1, 1));
    }
    let gj = g.taylor(x, 2)?;
    let hj = h.jet(x, 2)?.scale(eps);
    for i in 0..n {
        for j in 0..i {
            if (hj.comps()[i * n + j].value() - hj.comps()[j * n + i].value()).abs() > 1e-12 * (1.0 + eps.abs()) {
                return Err(invalid("h", "not symmetric"));
            }
        }
    }
    let base = LocalGeometry::from_jets(n, gj.clone())?;
    let pert: Vec<Tps> = gj.iter().zip(hj.comps()).map(|(a, b)| a + b).collect();
    let vals: Vec<f64> = pert.iter().map(|t| t.value()).collect();
    crate::dforms::PointMetric::new(&vals, n, 1.0)?;
    let moved = LocalGeometry::from_jets(n, pert)?;
    let gamma = Some(base.christoffel());
    let mut lin = ext_deriv_jet(&ext_deriv_jet(&hj, gamma, Side::Right)?, gamma, Side::Left)?;
    lin.axpy(1.0, &ext_deriv_jet(&ext_deriv_jet(&hj, gamma, Side::Left)?, gamma, Side::Right)?)?;
    let mut out = moved.riemann()?.values();
    out.axpy(-1.0, &base.riemann()?.values())?;
    out.axpy(-VARIATION_COEFFICIENT, &lin.values())?;
    Ok(out)
}

#[cfg(test)]
mod tests;
