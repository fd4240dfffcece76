//! Metric fields on exterior regions `{|x| ≥ r_min}` of `ℝⁿ`.
//!
//! A [`MetricField`] hands out Taylor jets of `g_ij` about any chart point;
//! values and coordinate derivatives of every order up to the field's
//! regularity are read off the jets. Shipped families are evaluated in closed
//! form on jets, so their derivatives are exact up to rounding.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dforms::{Coeff, DoubleForm, PointMetric, MAX_DIM};
use crate::error::{invalid, Error, Result};
use crate::tps::{Tps, MAX_ORDER};

/// A metric given in closed form on jets.
pub trait MetricModel: Send + Sync + Debug {
    fn dim(&self) -> usize;
    /// Row-major `g_ij` as jets of the given order about `x`. Called only with
    /// `order <= regularity()` and `|x| >= r_min()`.
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>>;
    /// Declared decay order of `g - δ`.
    fn tau(&self) -> f64;
    fn r_min(&self) -> f64;
    /// Highest derivative order available.
    fn regularity(&self) -> usize {
        3
    }
    fn describe(&self) -> String;
}

/// Shared handle to a metric model.
#[derive(Clone, Debug)]
pub struct MetricField {
    model: Arc<dyn MetricModel>,
}

impl MetricField {
    pub fn new<M: MetricModel + 'static>(model: M) -> Self {
        MetricField { model: Arc::new(model) }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn tau(&self) -> f64 {
        self.model.tau()
    }

    pub fn r_min(&self) -> f64 {
        self.model.r_min()
    }

    pub fn regularity(&self) -> usize {
        self.model.regularity()
    }

    pub fn describe(&self) -> String {
        self.model.describe()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(x.len(), self.dim()));
        }
        let r = norm(x);
        let r_min = self.r_min();
        if !(r >= r_min * (1.0 - 1e-12)) {
            return Err(Error::OutsideChart { r, r_min });
        }
        Ok(r)
    }

    /// Row-major `g_ij` jets of the given order about `x`.
    pub fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        self.check_point(x)?;
        if order > self.regularity() {
            return Err(Error::MissingDerivative { requested: order, available: self.regularity() });
        }
        self.model.taylor(x, order)
    }

    /// `g_ij(x)`, row-major.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.taylor(x, 0)?.iter().map(|t| t.value()).collect())
    }

    pub fn point_metric(&self, x: &[f64]) -> Result<PointMetric> {
        PointMetric::new(&self.eval(x)?, self.dim(), 1.0)
    }

    /// Partial derivatives of order `m`, laid out as `[(a_1..a_m), i, j]` with
    /// the derivative multi-index flattened in base `n`.
    pub fn derivatives(&self, x: &[f64], m: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        let jets = self.taylor(x, m)?;
        let count = n.pow(m as u32);
        let mut out = vec![0.0; count * n * n];
        let mut alpha = vec![0usize; n];
        for flat in 0..count {
            alpha.iter_mut().for_each(|a| *a = 0);
            let mut rest = flat;
            for _ in 0..m {
                alpha[rest % n] += 1;
                rest /= n;
            }
            for (ij, t) in jets.iter().enumerate() {
                out[flat * n * n + ij] = t.derivative(&alpha);
            }
        }
        Ok(out)
    }

    /// `∂_a g_ij` at `[a][i][j]`.
    pub fn d1(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.derivatives(x, 1)
    }

    /// `∂_a ∂_b g_ij` at `[a][b][i][j]` (flattened as `b * n + a`; symmetric).
    pub fn d2(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.derivatives(x, 2)
    }

    pub fn d3(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.derivatives(x, 3)
    }

    /// Jets of the deviation `e = g - δ`.
    pub fn deviation(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        let n = self.dim();
        let mut g = self.taylor(x, order)?;
        for i in 0..n {
            g[i * n + i] = g[i * n + i].add_scalar(-1.0);
        }
        Ok(g)
    }

    /// `g` as a `(1,1)` double form at `x`.
    pub fn form(&self, x: &[f64]) -> Result<DoubleForm> {
        DoubleForm::from_matrix(self.dim(), &self.eval(x)?)
    }

    /// `g + h - δ` for another field `h` on the same space.
    pub fn superpose(&self, other: &MetricField) -> Result<MetricField> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(MetricField::new(Superposition { a: self.clone(), b: other.clone() }))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|x|²` as a jet.
pub(crate) fn radius_squared(x: &[Tps]) -> Tps {
    let mut r2 = x[0].zero_like();
    for xi in x {
        r2.add_product(1.0, xi, xi);
    }
    r2
}

fn diagonal(n: usize, f: &Tps) -> Vec<Tps> {
    let z = f.zero_like();
    (0..n * n).map(|k| if k / n == k % n { f.clone() } else { z.clone() }).collect()
}

/// The Euclidean metric.
#[derive(Debug, Clone)]
pub struct Flat {
    n: usize,
}

impl MetricModel for Flat {
    fn dim(&self) -> usize {
        self.n
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        Ok(diagonal(self.n, &Tps::constant(x.len(), order, 1.0)))
    }
    fn tau(&self) -> f64 {
        f64::INFINITY
    }
    fn r_min(&self) -> f64 {
        0.0
    }
    fn regularity(&self) -> usize {
        MAX_ORDER
    }
    fn describe(&self) -> String {
        format!("flat(n={})", self.n)
    }
}

pub fn make_flat(n: usize) -> Result<MetricField> {
    check_dim(n)?;
    Ok(MetricField::new(Flat { n }))
}

/// Jet-level metric expression `x ↦ g_ij(x)`.
pub type JetMetricFn = Arc<dyn Fn(&[Tps]) -> Vec<Tps> + Send + Sync>;

/// A metric given by a closed-form expression evaluated on coordinate jets.
#[derive(Clone)]
pub struct ClosedForm {
    n: usize,
    f: JetMetricFn,
    tau: f64,
    r_min: f64,
    label: String,
}

impl Debug for ClosedForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ClosedForm({})", self.label)
    }
}

impl MetricModel for ClosedForm {
    fn dim(&self) -> usize {
        self.n
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        let g = (self.f)(&Tps::point(x, order));
        if g.len() != self.n * self.n {
            return Err(Error::DimensionMismatch(g.len(), self.n * self.n));
        }
        Ok(g)
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn regularity(&self) -> usize {
        MAX_ORDER
    }
    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Wraps a jet-level expression as a metric field with exact derivatives.
pub fn make_closed_form(n: usize, f: JetMetricFn, tau: f64, r_min: f64, label: &str) -> Result<MetricField> {
    check_dim(n)?;
    if !(r_min >= 0.0) {
        return Err(invalid("r_min", "must be non-negative"));
    }
    Ok(MetricField::new(ClosedForm { n, f, tau, r_min, label: label.to_string() }))
}

fn check_dim(n: usize) -> Result<()> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    Ok(())
}

/// `(1 + m / (2 ρ^τ))^{4k/(n-2k)} δ` with `ρ = |Q(x - c)|`, `τ = n/k - 2`.
#[derive(Debug, Clone)]
pub struct Schwarzschild {
    n: usize,
    k: usize,
    m: f64,
    center: Vec<f64>,
    rotation: Vec<f64>,
    r_min: f64,
}

impl Schwarzschild {
    pub fn power(&self) -> f64 {
        4.0 * self.k as f64 / (self.n as f64 - 2.0 * self.k as f64)
    }

    /// `n/k - 2`
    pub fn decay(&self) -> f64 {
        self.n as f64 / self.k as f64 - 2.0
    }

    fn conformal_factor(&self, x: &[Tps]) -> Tps {
        let n = self.n;
        let y: Vec<Tps> = (0..n)
            .map(|i| {
                let mut s = x[0].zero_like();
                for j in 0..n {
                    let q = self.rotation[i * n + j];
                    if q != 0.0 {
                        s.add_scaled(q, &x[j].add_scalar(-self.center[j]));
                    }
                }
                s
            })
            .collect();
        let r2 = radius_squared(&y);
        let u = r2.powf(-self.decay() / 2.0).scale(self.m / 2.0).add_scalar(1.0);
        u.powf(self.power())
    }
}

impl MetricModel for Schwarzschild {
    fn dim(&self) -> usize {
        self.n
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        if self.m == 0.0 {
            return Ok(diagonal(self.n, &Tps::constant(self.n, order, 1.0)));
        }
        let xs = Tps::point(x, order);
        let f = self.conformal_factor(&xs);
        if !(f.value() > 0.0) || !f.value().is_finite() {
            return Err(Error::OutsideChart { r: norm(x), r_min: self.r_min });
        }
        Ok(diagonal(self.n, &f))
    }
    fn tau(&self) -> f64 {
        self.decay()
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn regularity(&self) -> usize {
        MAX_ORDER
    }
    fn describe(&self) -> String {
        format!("schwarzschild(n={}, k={}, m={}, center={:?})", self.n, self.k, self.m, self.center)
    }
}

/// Generalised Schwarzschild metric of mass parameter `m`.
///
/// The chart starts at twice the radius where `m/(2ρ^τ)` reaches 1, measured
/// from the origin and enlarged by `|center|`.
pub fn make_schwarzschild(n: usize, k: usize, m: f64, center: &[f64], rotation: Option<&[f64]>) -> Result<MetricField> {
    check_dim(n)?;
    if k == 0 || n <= 2 * k {
        return Err(invalid("k", format!("need n > 2k, got n={n}, k={k}")));
    }
    if !m.is_finite() {
        return Err(invalid("m", "not finite"));
    }
    if center.len() != n {
        return Err(Error::DimensionMismatch(center.len(), n));
    }
    let rotation = match rotation {
        Some(q) => {
            check_orthogonal(q, n)?;
            q.to_vec()
        }
        None => identity(n),
    };
    let tau = n as f64 / k as f64 - 2.0;
    let horizon = (m.abs() / 2.0).powf(1.0 / tau);
    let r_min = if m == 0.0 { 0.0 } else { 2.0 * horizon + norm(center) };
    Ok(MetricField::new(Schwarzschild { n, k, m, center: center.to_vec(), rotation, r_min }))
}

/// Same family with an explicit chart radius; fails when the conformal factor
/// is not positive on `|x| >= r_min`.
pub fn make_schwarzschild_with_r_min(n: usize, k: usize, m: f64, center: &[f64], r_min: f64) -> Result<MetricField> {
    make_schwarzschild(n, k, m, center, None)?;
    if !(r_min >= 0.0) {
        return Err(invalid("r_min", "must be nonnegative"));
    }
    let tau = n as f64 / k as f64 - 2.0;
    let closest = r_min - norm(center);
    if m != 0.0 && !(closest > 0.0) {
        return Err(invalid("r_min", "chart must exclude the singular point"));
    }
    if m < 0.0 && !(1.0 + m / (2.0 * closest.powf(tau)) > 0.0) {
        return Err(invalid("m", format!("conformal factor vanishes on the chart r >= {r_min}")));
    }
    Ok(MetricField::new(Schwarzschild { n, k, m, center: center.to_vec(), rotation: identity(n), r_min }))
}

pub(crate) fn identity(n: usize) -> Vec<f64> {
    (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect()
}

pub(crate) fn check_orthogonal(q: &[f64], n: usize) -> Result<()> {
    if q.len() != n * n {
        return Err(Error::DimensionMismatch(q.len(), n * n));
    }
    for i in 0..n {
        for j in 0..n {
            let d: f64 = (0..n).map(|k| q[k * n + i] * q[k * n + j]).sum();
            if (d - if i == j { 1.0 } else { 0.0 }).abs() > 1e-10 {
                return Err(invalid("rotation", "matrix is not orthogonal"));
            }
        }
    }
    Ok(())
}

/// Antipodal parity content of a constructed perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    /// Even part decaying at `τ` plus an odd part decaying at `τ + 1`.
    Mixed,
}

/// One homogeneous polynomial coefficient per component, divided by `|x|^{deg + rate}`.
#[derive(Debug, Clone)]
struct HarmonicTerm {
    degree: usize,
    rate: f64,
    /// per upper-triangular component: list of (coefficient, exponents)
    polys: Vec<Vec<(f64, Vec<u8>)>>,
}

/// `δ + A Σ P_ij(x) |x|^{-τ-deg P}` with harmonic homogeneous `P` of the chosen parity.
#[derive(Debug, Clone)]
pub struct RtPerturbation {
    n: usize,
    tau: f64,
    amplitude: f64,
    parity: Parity,
    terms: Vec<HarmonicTerm>,
    r_min: f64,
}

/// Homogeneous harmonic polynomials of degree `d ≤ 3` as monomial lists.
pub(crate) fn harmonic_generators(n: usize, d: usize) -> Vec<Vec<(f64, Vec<u8>)>> {
    let mono = |idx: &[usize]| {
        let mut e = vec![0u8; n];
        for &i in idx {
            e[i] += 1;
        }
        e
    };
    let mut out = Vec::new();
    match d {
        0 => out.push(vec![(1.0, mono(&[]))]),
        1 => (0..n).for_each(|a| out.push(vec![(1.0, mono(&[a]))])),
        2 => {
            for a in 0..n {
                for b in a + 1..n {
                    out.push(vec![(1.0, mono(&[a, b]))]);
                }
                if a + 1 < n {
                    out.push(vec![(1.0, mono(&[a, a])), (-1.0, mono(&[a + 1, a + 1]))]);
                }
            }
        }
        3 => {
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        out.push(vec![(1.0, mono(&[a, b, c]))]);
                    }
                }
                for b in 0..n {
                    if b != a {
                        out.push(vec![(1.0, mono(&[a, a, a])), (-3.0, mono(&[a, b, b]))]);
                    }
                }
            }
        }
        _ => unreachable!("degree {d} not shipped"),
    }
    out
}

impl RtPerturbation {
    fn random_term<R: Rng>(n: usize, degree: usize, rate: f64, rng: &mut R) -> HarmonicTerm {
        let gens = harmonic_generators(n, degree);
        let scale = 1.0 / (gens.len() as f64).sqrt();
        let mut polys = Vec::new();
        for _i in 0..n {
            for _j in _i..n {
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
                polys.push(poly);
            }
        }
        HarmonicTerm { degree, rate, polys }
    }

    fn component_jets(&self, x: &[Tps]) -> Vec<Tps> {
        let n = self.n;
        let r2 = radius_squared(x);
        let mut out = vec![x[0].zero_like(); n * n];
        for term in &self.terms {
            let radial = r2.powf(-(term.rate + term.degree as f64) / 2.0);
            let mut slot = 0;
            for i in 0..n {
                for j in i..n {
                    let mut p = x[0].zero_like();
                    for (c, e) in &term.polys[slot] {
                        let mut m = Tps::constant(n, x[0].order(), *c);
                        for (v, &k) in e.iter().enumerate() {
                            for _ in 0..k {
                                m = &m * &x[v];
                            }
                        }
                        p.add_scaled(1.0, &m);
                    }
                    let e_ij = (&p * &radial).scale(self.amplitude);
                    out[i * n + j].add_scaled(1.0, &e_ij);
                    if i != j {
                        out[j * n + i].add_scaled(1.0, &e_ij);
                    }
                    slot += 1;
                }
            }
        }
        for i in 0..n {
            out[i * n + i] = out[i * n + i].add_scalar(1.0);
        }
        out
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }
}

impl MetricModel for RtPerturbation {
    fn dim(&self) -> usize {
        self.n
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        Ok(self.component_jets(&Tps::point(x, order)))
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn regularity(&self) -> usize {
        MAX_ORDER
    }
    fn describe(&self) -> String {
        format!("rt(n={}, tau={}, parity={:?}, amplitude={})", self.n, self.tau, self.parity, self.amplitude)
    }
}

/// Seeded perturbation of the Euclidean metric with prescribed parity and
/// decay, positive-definite on `|x| >= r_min` (checked on a sample of the
/// sphere `|x| = r_min`, where the deviation is largest).
pub fn make_rt_perturbation(
    n: usize,
    tau: f64,
    seed: u64,
    parity: Parity,
    amplitude: f64,
    r_min: f64,
) -> Result<MetricField> {
    check_dim(n)?;
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    if !(r_min > 0.0) {
        return Err(invalid("r_min", "must be positive"));
    }
    if !amplitude.is_finite() {
        return Err(invalid("amplitude", "not finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    match parity {
        Parity::Even => {
            terms.push(RtPerturbation::random_term(n, 0, tau, &mut rng));
            terms.push(RtPerturbation::random_term(n, 2, tau, &mut rng));
        }
        Parity::Odd => {
            terms.push(RtPerturbation::random_term(n, 1, tau, &mut rng));
            terms.push(RtPerturbation::random_term(n, 3, tau, &mut rng));
        }
        Parity::Mixed => {
            terms.push(RtPerturbation::random_term(n, 0, tau, &mut rng));
            terms.push(RtPerturbation::random_term(n, 2, tau, &mut rng));
            terms.push(RtPerturbation::random_term(n, 1, tau + 1.0, &mut rng));
            terms.push(RtPerturbation::random_term(n, 3, tau + 1.0, &mut rng));
        }
    }
    let model = RtPerturbation { n, tau, amplitude, parity, terms, r_min };
    let mut sample = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..256 {
        let dir = random_unit(n, &mut sample);
        let x: Vec<f64> = dir.iter().map(|d| d * r_min).collect();
        let g: Vec<f64> = model.taylor(&x, 0)?.iter().map(|t| t.value()).collect();
        if PointMetric::new(&g, n, 1.0).is_err() {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(MetricField::new(model))
}

/// Haar-random orthogonal matrix (row-major) by Gram–Schmidt on Gaussian-like columns.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v = random_unit(n, rng);
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let len = norm(&v);
        if len > 1e-6 {
            rows.push(v.iter().map(|a| a / len).collect());
        }
    }
    rows.concat()
}

pub(crate) fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

#[derive(Debug)]
struct Superposition {
    a: MetricField,
    b: MetricField,
}

impl MetricModel for Superposition {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        let n = self.dim();
        let mut g = self.a.taylor(x, order)?;
        let h = self.b.taylor(x, order)?;
        for (k, (gi, hi)) in g.iter_mut().zip(&h).enumerate() {
            gi.add_scaled(1.0, hi);
            if k / n == k % n {
                *gi = gi.add_scalar(-1.0);
            }
        }
        Ok(g)
    }
    fn tau(&self) -> f64 {
        self.a.tau().min(self.b.tau())
    }
    fn r_min(&self) -> f64 {
        self.a.r_min().max(self.b.r_min())
    }
    fn regularity(&self) -> usize {
        self.a.regularity().min(self.b.regularity())
    }
    fn describe(&self) -> String {
        format!("{} + {}", self.a.describe(), self.b.describe())
    }
}

/// Pointwise metric evaluator wrapped for [`fd_wrap`].
pub type MetricFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Central finite differences of a pointwise metric evaluator.
pub struct FiniteDifference {
    n: usize,
    f: MetricFn,
    order: usize,
    h0: f64,
    tau: f64,
    r_min: f64,
}

impl Debug for FiniteDifference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FiniteDifference(n={}, order={}, h0={})", self.n, self.order, self.h0)
    }
}

/// Stencil for the `d`-th derivative: (offset, weight).
fn stencil(d: usize, order: usize) -> &'static [(i32, f64)] {
    match (d, order) {
        (0, _) => &[(0, 1.0)],
        (1, 2) => &[(-1, -0.5), (1, 0.5)],
        (2, 2) => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        (3, 2) => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        (1, 4) => &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
        (2, 4) => &[(-2, -1.0 / 12.0), (-1, 4.0 / 3.0), (0, -2.5), (1, 4.0 / 3.0), (2, -1.0 / 12.0)],
        (3, 4) => &[(-3, 0.125), (-2, -1.0), (-1, 1.625), (1, -1.625), (2, 1.0), (3, -0.125)],
        _ => unreachable!(),
    }
}

impl FiniteDifference {
    fn partial(&self, x: &[f64], alpha: &[usize], h: f64) -> Vec<f64> {
        let n = self.n;
        let mut acc = vec![0.0; n * n];
        let stencils: Vec<&[(i32, f64)]> = alpha.iter().map(|&d| stencil(d, self.order)).collect();
        let mut idx = vec![0usize; n];
        loop {
            let mut w = 1.0;
            let mut y = x.to_vec();
            for v in 0..n {
                let (off, wt) = stencils[v][idx[v]];
                w *= wt;
                y[v] += off as f64 * h;
            }
            let g = (self.f)(&y);
            for (a, b) in acc.iter_mut().zip(&g) {
                *a += w * b;
            }
            // advance the odometer
            let mut v = 0;
            loop {
                if v == n {
                    let scale = h.powi(alpha.iter().sum::<usize>() as i32);
                    return acc.iter().map(|a| a / scale).collect();
                }
                idx[v] += 1;
                if idx[v] < stencils[v].len() {
                    break;
                }
                idx[v] = 0;
                v += 1;
            }
        }
    }
}

impl MetricModel for FiniteDifference {
    fn dim(&self) -> usize {
        self.n
    }
    fn taylor(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        let n = self.n;
        let h = self.h0 * norm(x).max(1.0);
        if x.iter().any(|&xi| xi + h == xi) {
            return Err(Error::StepUnderflow(h));
        }
        let sp = crate::tps::TpsSpace::get(n, order);
        let mut coeffs = vec![vec![0.0; sp.len()]; n * n];
        for mono in 0..sp.len() {
            let alpha: Vec<usize> = sp.exponents(mono).iter().map(|&a| a as usize).collect();
            let fact: f64 = alpha.iter().map(|&a| crate::dforms::factorial(a)).product();
            let d = if mono == 0 { (self.f)(x) } else { self.partial(x, &alpha, h) };
            if d.len() != n * n {
                return Err(Error::DimensionMismatch(d.len(), n * n));
            }
            for (ij, v) in d.iter().enumerate() {
                coeffs[ij][mono] = v / fact;
            }
        }
        Ok(coeffs.into_iter().map(|c| Tps::from_coeffs(n, order, c)).collect())
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn r_min(&self) -> f64 {
        self.r_min
    }
    fn describe(&self) -> String {
        format!("finite-difference(order={}, h0={})", self.order, self.h0)
    }
}

/// Wraps a pointwise metric evaluator, supplying derivatives up to order 3 by
/// central differences of accuracy `order ∈ {2, 4}` with step `h0·max(1, |x|)`.
pub fn fd_wrap(n: usize, f: MetricFn, order: usize, h0: f64, tau: f64, r_min: f64) -> Result<MetricField> {
    check_dim(n)?;
    if order != 2 && order != 4 {
        return Err(invalid("order", "must be 2 or 4"));
    }
    if !(h0 > 0.0) || !h0.is_finite() {
        return Err(Error::StepUnderflow(h0));
    }
    if h0 < 1e-7 {
        return Err(Error::StepUnderflow(h0));
    }
    Ok(MetricField::new(FiniteDifference { n, f, order, h0, tau, r_min }))
}
