//! Antipodal parity of fields and parity-graded decay checks.
//!
//! The antipodal map `σ(x) = -x` pulls a `(p,q)` double form back to
//! `(σ*ω)(x) = (-1)^{p+q} ω(-x)`; a field is even when `σ*ω = ω` and odd when
//! `σ*ω = -ω`. Coordinate derivatives `∂^m e` of the metric deviation are
//! covariant tensors of rank `m + 2` and pick up `(-1)^m` under `σ*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::DoubleFormField;
use crate::dforms::{DoubleForm, JetForm};
use crate::error::{invalid, Error, Result};
use crate::fields::{norm, random_unit, MetricField};
use crate::tps::Tps;

/// Tolerance on fitted slopes used by [`rt_check`].
pub const SLOPE_TOLERANCE: f64 = 0.1;

/// Relative size below which a parity part is treated as rounding noise.
pub const ODD_NOISE: f64 = 1e-11;

/// `(σ*ω)(x)`. Fails when `x` (and so `-x`) lies inside `r_min`.
pub fn antipodal_pullback<F: DoubleFormField + ?Sized>(w: &F, x: &[f64], r_min: f64) -> Result<DoubleForm> {
    check_chart(w.dim(), x, r_min)?;
    let minus: Vec<f64> = x.iter().map(|v| -v).collect();
    let (p, q) = w.degrees();
    Ok(w.eval(&minus)?.scale(sign(p + q)))
}

/// Even and odd parts of `ω` at `x`: `½(ω ± σ*ω)`.
pub fn parity_split<F: DoubleFormField + ?Sized>(w: &F, x: &[f64], r_min: f64) -> Result<(DoubleForm, DoubleForm)> {
    let pulled = antipodal_pullback(w, x, r_min)?;
    let here = w.eval(x)?;
    Ok((here.add(&pulled)?.scale(0.5), here.sub(&pulled)?.scale(0.5)))
}

fn check_chart(n: usize, x: &[f64], r_min: f64) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch(x.len(), n));
    }
    let r = norm(x);
    if !(r >= r_min) {
        return Err(Error::OutsideChart { r, r_min });
    }
    Ok(())
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Which part of a field to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Even,
    Odd,
}

/// The even or odd part of a field, itself a field with full jets.
pub struct ParityPart<F> {
    pub field: F,
    pub part: Part,
}

impl<F: DoubleFormField> DoubleFormField for ParityPart<F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn degrees(&self) -> (usize, usize) {
        self.field.degrees()
    }
    fn max_order(&self) -> usize {
        self.field.max_order()
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        let (p, q) = self.degrees();
        let here = self.field.jet(x, order)?;
        let minus: Vec<f64> = x.iter().map(|v| -v).collect();
        // Jet of y ↦ ω(-y) about x: the coefficient of (y-x)^α flips by (-1)^|α|.
        let there = self.field.jet(&minus, order)?.map(reflect);
        let s = match self.part {
            Part::Even => sign(p + q),
            Part::Odd => -sign(p + q),
        };
        let mut out = here;
        out.axpy(s, &there)?;
        Ok(out.scale(0.5))
    }
}

fn reflect(t: &Tps) -> Tps {
    let mut out = t.clone();
    let sp = t.space();
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        if sp.degree(i) % 2 == 1 {
            *c = -*c;
        }
    }
    out
}

/// The metric deviation `e = g - δ` as a `(1,1)` field.
#[derive(Clone, Debug)]
pub struct DeviationField(pub MetricField);

impl DoubleFormField for DeviationField {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn degrees(&self) -> (usize, usize) {
        (1, 1)
    }
    fn max_order(&self) -> usize {
        self.0.regularity()
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        let n = self.dim();
        let e = self.0.deviation(x, order)?;
        let mut comps = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                comps.push(e[i * n + j].clone());
            }
        }
        JetForm::from_comps(n, 1, 1, comps)
    }
}

/// Log–log fit of `sup_{S_r} f` against `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRate {
    /// Least-squares slope; `None` when the field vanishes on every sphere
    /// (slope `-∞`).
    pub slope: Option<f64>,
    pub radii: Vec<f64>,
    pub sups: Vec<f64>,
}

impl DecayRate {
    pub fn vanishing(&self) -> bool {
        self.slope.is_none()
    }

    /// Slope with `-∞` for a vanishing field.
    pub fn slope_or_neg_inf(&self) -> f64 {
        self.slope.unwrap_or(f64::NEG_INFINITY)
    }
}

/// Fixed quasi-uniform sample of the unit sphere in `ℝⁿ`.
///
/// Seeded uniform directions; the set is deliberately not closed under
/// `x ↦ -x`, unlike the quadrature nodes.
pub fn sphere_sample(n: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a3b_1e00 + n as u64);
    (0..count).map(|_| random_unit(n, &mut rng)).collect()
}

/// Decay exponent of a pointwise norm from sphere suprema at `radii`.
pub fn decay_rate<F>(n: usize, f: F, radii: &[f64], samples_per_sphere: usize) -> Result<DecayRate>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if radii.len() < 4 {
        return Err(invalid("radii", format!("need at least 4 radii, got {}", radii.len())));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radii", "must be positive and increasing"));
    }
    if samples_per_sphere == 0 {
        return Err(invalid("samples_per_sphere", "must be positive"));
    }
    let dirs = sphere_sample(n, samples_per_sphere);
    let mut sups = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut sup = 0.0f64;
        for d in &dirs {
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            sup = sup.max(f(&x)?.abs());
        }
        sups.push(sup);
    }
    slope_fit(radii, sups)
}

fn slope_fit(radii: &[f64], sups: Vec<f64>) -> Result<DecayRate> {
    if sups.iter().all(|&s| s == 0.0) {
        return Ok(DecayRate { slope: None, radii: radii.to_vec(), sups });
    }
    if sups.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(invalid("field", "vanishes on some spheres only, or is not finite"));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(DecayRate { slope: Some(sxy / sxx), radii: radii.to_vec(), sups })
}

/// Frobenius norms of `∂^m e` at `x` split into even, odd and full parts.
///
/// Parts below [`ODD_NOISE`] relative to the full norm are set to zero.
pub fn derivative_parity_norms(g: &MetricField, x: &[f64], m: usize) -> Result<(f64, f64, f64)> {
    let n = g.dim();
    let minus: Vec<f64> = x.iter().map(|v| -v).collect();
    let mut here = g.derivatives(x, m)?;
    let mut there = g.derivatives(&minus, m)?;
    if m == 0 {
        for i in 0..n {
            here[i * n + i] -= 1.0;
            there[i * n + i] -= 1.0;
        }
    }
    let s = sign(m);
    let (mut even, mut odd, mut full) = (0.0, 0.0, 0.0);
    for (a, b) in here.iter().zip(&there) {
        let e = 0.5 * (a + s * b);
        let o = 0.5 * (a - s * b);
        even += e * e;
        odd += o * o;
        full += a * a;
    }
    let (mut even, mut odd, full) = (even.sqrt(), odd.sqrt(), full.sqrt());
    if odd <= ODD_NOISE * full {
        odd = 0.0;
    }
    if even <= ODD_NOISE * full {
        even = 0.0;
    }
    Ok((even, odd, full))
}

/// Parity-graded decay of one derivative order of the deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    /// `"e"`, `"de"`, `"d2e"`, ...
    pub component: String,
    pub order: usize,
    pub radii: Vec<f64>,
    pub full_slope: Option<f64>,
    pub even_slope: Option<f64>,
    pub odd_slope: Option<f64>,
    /// `-τ - m`
    pub required_full: f64,
    /// `-τ - 1 - m`
    pub required_odd: f64,
    /// Both slopes at or below their requirement plus [`SLOPE_TOLERANCE`].
    pub pass: bool,
}

/// Checks `|∂^m e| = O(r^{-τ-m})` and `|(∂^m e)^odd| = O(r^{-τ-1-m})` for
/// `m = 0..=ℓ` by fitted slopes on `radii` (at least four).
pub fn rt_check(g: &MetricField, tau: f64, ell: usize, radii: &[f64]) -> Result<Vec<ParityReport>> {
    rt_check_with(g, tau, ell, radii, 96)
}

pub fn rt_check_with(g: &MetricField, tau: f64, ell: usize, radii: &[f64], samples: usize) -> Result<Vec<ParityReport>> {
    if ell > g.regularity() {
        return Err(Error::MissingDerivative { requested: ell, available: g.regularity() });
    }
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    if radii.first().map_or(true, |&r| r < g.r_min()) {
        return Err(invalid("radii", "must lie in the chart"));
    }
    if radii.len() < 4 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("radii", "need at least 4 increasing radii"));
    }
    let dirs = sphere_sample(g.dim(), samples.max(1));
    let mut out = Vec::with_capacity(ell + 1);
    for m in 0..=ell {
        let mut sups = [vec![], vec![], vec![]];
        for &r in radii {
            let mut sup = [0.0f64; 3];
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|v| v * r).collect();
                let t = derivative_parity_norms(g, &x, m)?;
                sup = [sup[0].max(t.0), sup[1].max(t.1), sup[2].max(t.2)];
            }
            for c in 0..3 {
                sups[c].push(sup[c]);
            }
        }
        let [se, so, sf] = sups;
        let even = slope_fit(radii, se)?;
        let odd = slope_fit(radii, so)?;
        let full = slope_fit(radii, sf)?;
        let required_full = -tau - m as f64;
        let required_odd = required_full - 1.0;
        let pass = full.slope_or_neg_inf() <= required_full + SLOPE_TOLERANCE
            && odd.slope_or_neg_inf() <= required_odd + SLOPE_TOLERANCE;
        out.push(ParityReport {
            component: if m == 0 { "e".into() } else if m == 1 { "de".into() } else { format!("d{m}e") },
            order: m,
            radii: radii.to_vec(),
            full_slope: full.slope,
            even_slope: even.slope,
            odd_slope: odd.slope,
            required_full,
            required_odd,
            pass,
        });
    }
    Ok(out)
}
