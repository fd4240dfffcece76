//! Levi-Civita connection, curvature and the field-level operators
//! `𝒟`, `𝒟̃`, `δ`, `δ̃` acting on double-form fields.
//!
//! Fields are handled through Taylor jets: a field evaluated on a jet of the
//! coordinates yields the jets of its components, and covariant derivatives
//! act on those jets. Composite operators (`𝒟²`, `𝒟𝒟̃`, ...) therefore only
//! need the field's jet to the matching order.
//!
//! Conventions:
//! * `Rm(X,Y,Z,W) = g(R(X,Y)W, Z)` with sectional curvature `Rm(e_1,e_2,e_1,e_2) > 0`
//!   on the round sphere; the curvature double form is `R = 2 Rm`, so the unit
//!   sphere has `R = g ⍘ g`, `c(R) = 2 Ric` and `c²(R) = 2 Scal`.
//! * `𝒟ω = -Σ dx^i ⍘ ∇_i ω` and `𝒟̃ω = (𝒟 ωᵀ)ᵀ = -Σ d̃x^i ⍘ ∇_i ω`.
//! * `δ = -(-1)^{n(p+1)+q(n-q)} *𝒟*` on `𝒟^{p,q}` (and transposed for `δ̃`),
//!   which is the `L²` adjoint of `𝒟`.

use std::sync::{Arc, OnceLock};

use crate::dforms::index::{basis, MAX_DIM};
use crate::dforms::{binomial, Coeff, DForm, DoubleForm, JetForm, Metric, PointMetric, Side};
use crate::error::{Error, Result};
use crate::fields::MetricField;
use crate::tps::Tps;

/// Index a row-major `n×n` slice.
#[inline]
fn at(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

/// Curvature components `Rm_{abcd}` for `a<b`, `c<d` from the metric inverse and
/// its first and second coordinate derivatives (`dg[a][i][j]`, `ddg[a][b][i][j]`).
fn riemann_components<T: Coeff>(n: usize, ginv: &[T], dg: &[T], ddg: &[T]) -> DForm<T> {
    let proto = &ginv[0];
    let nn = n * n;
    let d1 = |a: usize, i: usize, j: usize| &dg[a * nn + i * n + j];
    let d2 = |a: usize, b: usize, i: usize, j: usize| &ddg[(a * n + b) * nn + i * n + j];
    // Γ_{f,ad} = ½(∂_a g_df + ∂_d g_af - ∂_f g_ad)
    let mut low = vec![proto.zero_like(); n * nn];
    for f in 0..n {
        for a in 0..n {
            for d in a..n {
                let mut v = d1(a, d, f).clone();
                v.add_scaled(1.0, d1(d, a, f));
                v.add_scaled(-1.0, d1(f, a, d));
                let v = v.scaled(0.5);
                low[f * nn + d * n + a] = v.clone();
                low[f * nn + a * n + d] = v;
            }
        }
    }
    // Γ^e_{ad} = g^{ef} Γ_{f,ad}
    let mut up = vec![proto.zero_like(); n * nn];
    for e in 0..n {
        for a in 0..n {
            for d in a..n {
                let mut v = proto.zero_like();
                for f in 0..n {
                    v.add_product(1.0, &ginv[at(n, e, f)], &low[f * nn + a * n + d]);
                }
                up[e * nn + d * n + a] = v.clone();
                up[e * nn + a * n + d] = v;
            }
        }
    }
    let b2 = basis(n);
    let w = binomial(n, 2);
    let mut comps = vec![proto.zero_like(); w * w];
    for (ri, &im) in b2.by_degree[2].iter().enumerate() {
        let a = im.trailing_zeros() as usize;
        let b = (im & !(1 << a)).trailing_zeros() as usize;
        for (rj, &jm) in b2.by_degree[2].iter().enumerate() {
            if rj < ri {
                continue;
            }
            let c = jm.trailing_zeros() as usize;
            let d = (jm & !(1 << c)).trailing_zeros() as usize;
            let mut v = d2(b, c, a, d).clone();
            v.add_scaled(1.0, d2(a, d, b, c));
            v.add_scaled(-1.0, d2(a, c, b, d));
            v.add_scaled(-1.0, d2(b, d, a, c));
            let mut v = v.scaled(0.5);
            for e in 0..n {
                v.add_product(1.0, &low[e * nn + b * n + c], &up[e * nn + a * n + d]);
                v.add_product(-1.0, &low[e * nn + b * n + d], &up[e * nn + a * n + c]);
            }
            let v = v.scaled(2.0);
            comps[rj * w + ri] = v.clone();
            comps[ri * w + rj] = v;
        }
    }
    DForm::from_comps(n, 2, 2, comps).expect("shape")
}

/// Christoffel symbols `Γ^k_ij` of `g` at `x`, laid out as `[k][i][j]`.
pub fn christoffel(g: &MetricField, x: &[f64]) -> Result<Vec<f64>> {
    let n = g.dim();
    let jets = g.taylor(x, 1)?;
    let vals: Vec<f64> = jets.iter().map(|t| t.value()).collect();
    let m = PointMetric::new(&vals, n, 1.0)?;
    let ginv = m.inverse();
    let dg = |a: usize, i: usize, j: usize| jets[at(n, i, j)].coeffs()[1 + a];
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv[at(n, k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
                }
                out[(k * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

/// Point values of `g`, `g^{-1}`, `∂g`, `∂∂g` read off a second-order jet.
struct PointData {
    metric: PointMetric,
    dg: Vec<f64>,
    ddg: Vec<f64>,
}

fn point_data(g: &MetricField, x: &[f64]) -> Result<PointData> {
    let n = g.dim();
    let jets = g.taylor(x, 2)?;
    let vals: Vec<f64> = jets.iter().map(|t| t.value()).collect();
    let metric = PointMetric::new(&vals, n, 1.0)?;
    let nn = n * n;
    let mut dg = vec![0.0; n * nn];
    let mut ddg = vec![0.0; nn * nn];
    let mut alpha = vec![0usize; n];
    for a in 0..n {
        for ij in 0..nn {
            dg[a * nn + ij] = jets[ij].coeffs()[1 + a];
        }
        for b in 0..n {
            alpha.iter_mut().for_each(|v| *v = 0);
            alpha[a] += 1;
            alpha[b] += 1;
            for ij in 0..nn {
                ddg[(a * n + b) * nn + ij] = jets[ij].derivative(&alpha);
            }
        }
    }
    Ok(PointData { metric, dg, ddg })
}

/// The curvature double form `R ∈ 𝒟^{2,2}` of `g` at `x` (coordinate components).
pub fn riemann(g: &MetricField, x: &[f64]) -> Result<DoubleForm> {
    let d = point_data(g, x)?;
    Ok(riemann_components(g.dim(), d.metric.inverse(), &d.dg, &d.ddg))
}

/// Metric and curvature at a point, as used by the invariant integrands.
#[derive(Clone, Debug)]
pub struct PointCurvature {
    pub metric: PointMetric,
    /// `∂_a g_ij` at `[a][i][j]`.
    pub dg: Vec<f64>,
    pub riemann: DoubleForm,
}

pub fn point_curvature(g: &MetricField, x: &[f64]) -> Result<PointCurvature> {
    let d = point_data(g, x)?;
    let riemann = riemann_components(g.dim(), d.metric.inverse(), &d.dg, &d.ddg);
    Ok(PointCurvature { metric: d.metric, dg: d.dg, riemann })
}

/// Ricci tensor as a `(1,1)` form, `Ric = c(R)/2`.
pub fn ricci(g: &MetricField, x: &[f64]) -> Result<DoubleForm> {
    let d = point_data(g, x)?;
    let r = riemann_components(g.dim(), d.metric.inverse(), &d.dg, &d.ddg);
    Ok(r.contract(&d.metric)?.scale(0.5))
}

/// Scalar curvature `c²(R)/2`.
pub fn scalar_curvature(g: &MetricField, x: &[f64]) -> Result<f64> {
    let d = point_data(g, x)?;
    let r = riemann_components(g.dim(), d.metric.inverse(), &d.dg, &d.ddg);
    Ok(0.5 * r.contract(&d.metric)?.contract(&d.metric)?.scalar_value().copied().unwrap_or(0.0))
}

/// Jets of the metric and its connection about a point.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    n: usize,
    order: usize,
    metric: Metric<Tps>,
    /// `Γ^k_ij` at `[k][i][j]`, one order lower than the metric.
    gamma: Vec<Tps>,
    dg: Vec<Tps>,
}

impl LocalGeometry {
    /// Metric jets of order `order ≥ 1` about `x`.
    pub fn new(g: &MetricField, x: &[f64], order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::MissingDerivative { requested: 1, available: 0 });
        }
        Self::from_jets(g.dim(), g.taylor(x, order)?)
    }

    /// From row-major metric jets of a common order `≥ 1`.
    pub fn from_jets(n: usize, jets: Vec<Tps>) -> Result<Self> {
        if jets.len() != n * n {
            return Err(Error::DimensionMismatch(jets.len(), n * n));
        }
        let order = jets[0].order();
        if order == 0 {
            return Err(Error::MissingDerivative { requested: 1, available: 0 });
        }
        let metric = Metric::from_matrix(jets.clone(), n, 1.0)?;
        let nn = n * n;
        let mut dg = Vec::with_capacity(n * nn);
        for a in 0..n {
            for t in &jets {
                dg.push(t.deriv(a));
            }
        }
        let ginv: Vec<Tps> = metric.inverse().iter().map(|t| t.truncate(order - 1)).collect();
        let mut gamma = vec![Tps::zero(n, order - 1); n * nn];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = Tps::zero(n, order - 1);
                    for l in 0..n {
                        let mut t = dg[i * nn + j * n + l].clone();
                        t.add_scaled(1.0, &dg[j * nn + i * n + l]);
                        t.add_scaled(-1.0, &dg[l * nn + i * n + j]);
                        s.add_product(0.5, &ginv[at(n, k, l)], &t);
                    }
                    gamma[(k * n + j) * n + i] = s.clone();
                    gamma[(k * n + i) * n + j] = s;
                }
            }
        }
        Ok(LocalGeometry { n, order, metric, gamma, dg })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn metric(&self) -> &Metric<Tps> {
        &self.metric
    }

    /// `g` as a `(1,1)` jet form.
    pub fn metric_form(&self) -> JetForm {
        JetForm::from_comps(self.n, 1, 1, self.metric.matrix().to_vec()).expect("shape")
    }

    /// `Γ^k_ij` jets of order `order - 1`.
    pub fn christoffel(&self) -> &[Tps] {
        &self.gamma
    }

    /// Curvature double form as a jet of order `order - 2`.
    pub fn riemann(&self) -> Result<JetForm> {
        if self.order < 2 {
            return Err(Error::MissingDerivative { requested: 2, available: self.order });
        }
        let n = self.n;
        let nn = n * n;
        let o = self.order - 2;
        let ginv: Vec<Tps> = self.metric.inverse().iter().map(|t| t.truncate(o)).collect();
        let dg: Vec<Tps> = self.dg.iter().map(|t| t.truncate(o)).collect();
        let mut ddg = Vec::with_capacity(nn * nn);
        for a in 0..n {
            for b in 0..n {
                for ij in 0..nn {
                    ddg.push(self.dg[a * nn + ij].deriv(b));
                }
            }
        }
        // ddg[(a*n+b)] holds ∂_b ∂_a, symmetric in (a, b)
        Ok(riemann_components(n, &ginv, &dg, &ddg))
    }

    /// Metric jets truncated to `order`.
    pub fn metric_to(&self, order: usize) -> Metric<Tps> {
        truncate_metric(&self.metric, order).expect("truncation keeps positivity")
    }

    /// `g` as a `(1,1)` jet form truncated to `order`.
    pub fn metric_form_to(&self, order: usize) -> JetForm {
        self.metric_form().truncate(order)
    }

    /// Pointwise metric at the expansion point.
    pub fn point_metric(&self) -> PointMetric {
        let vals: Vec<f64> = self.metric.matrix().iter().map(|t| t.value()).collect();
        PointMetric::new(&vals, self.n, 1.0).expect("metric jets are positive definite")
    }
}

/// Connection used by the field operators.
#[derive(Clone, Debug)]
pub enum Connection {
    /// Coordinate derivatives with the Euclidean metric.
    Flat,
    LeviCivita(MetricField),
}

impl Connection {
    /// Metric and Christoffel jets about `x` for fields given to order `order`;
    /// `None` for the flat connection.
    pub fn geometry(&self, x: &[f64], order: usize) -> Result<Option<LocalGeometry>> {
        match self {
            Connection::Flat => Ok(None),
            Connection::LeviCivita(g) => LocalGeometry::new(g, x, order.max(1)).map(Some),
        }
    }

    /// `Γ^k_ij(x)`; zeros for the flat connection.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Connection::Flat => Ok(vec![0.0; x.len().pow(3)]),
            Connection::LeviCivita(g) => christoffel(g, x),
        }
    }
}

/// `(I, a, m, I', sign)`: replacing `a ∈ I` by `m` gives `sign · e_{I'}`.
type SubstitutionTable = Vec<(u16, u8, u8, u16, f64)>;

fn substitution_table(n: usize, p: usize) -> &'static SubstitutionTable {
    static CACHE: [OnceLock<Vec<SubstitutionTable>>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    let all = CACHE[n].get_or_init(|| {
        let b = basis(n);
        (0..=n)
            .map(|p| {
                let mut t = Vec::new();
                for (ri, &im) in b.by_degree[p].iter().enumerate() {
                    for a in 0..n {
                        if im & (1 << a) == 0 {
                            continue;
                        }
                        let rest = im & !(1 << a);
                        let pos_a = (rest & ((1u16 << a) - 1) as u8).count_ones() as i32;
                        for m in 0..n {
                            if rest & (1 << m) != 0 {
                                continue;
                            }
                            let pos_m = (rest & ((1u16 << m) - 1) as u8).count_ones() as i32;
                            let sign = if (pos_a - pos_m).abs() % 2 == 0 { 1.0 } else { -1.0 };
                            let target = b.rank[(rest | 1 << m) as usize];
                            t.push((ri as u16, a as u8, m as u8, target, sign));
                        }
                    }
                }
                t
            })
            .collect()
    });
    &all[p]
}

/// Covariant derivative `∇_i ω` as a jet of one lower order. `gamma` holds
/// `Γ^k_ij` jets (of at least that order) or is `None` for the flat connection.
pub fn covariant_derivative(w: &JetForm, gamma: Option<&[Tps]>, i: usize) -> JetForm {
    let mut out = w.deriv(i);
    let Some(gamma) = gamma else { return out };
    let n = w.dim();
    let (p, q) = w.degrees();
    let (wp, wq) = (binomial(n, p), binomial(n, q));
    let comps = w.comps();
    let o = out.order();
    let gi = |m: usize, a: usize| &gamma[(m * n + i) * n + a];
    let dst = out.comps_mut();
    // left block: -Σ Γ^m_{ia} ω[a→m]
    for &(ri, a, m, rt, s) in substitution_table(n, p) {
        let c = gi(m as usize, a as usize);
        if c.is_zero() {
            continue;
        }
        let c = c.truncate(o);
        for j in 0..wq {
            dst[ri as usize * wq + j].add_product(-s, &c, &comps[rt as usize * wq + j]);
        }
    }
    for &(rj, a, m, rt, s) in substitution_table(n, q) {
        let c = gi(m as usize, a as usize);
        if c.is_zero() {
            continue;
        }
        let c = c.truncate(o);
        for ii in 0..wp {
            dst[ii * wq + rj as usize].add_product(-s, &c, &comps[ii * wq + rt as usize]);
        }
    }
    out
}

fn unit_covector(n: usize, i: usize, side: Side, proto: &Tps) -> JetForm {
    let (p, q) = match side {
        Side::Left => (1, 0),
        Side::Right => (0, 1),
    };
    let mut f = JetForm::zeros_like(proto, n, p, q).expect("degree");
    f.comps_mut()[i] = proto.const_like(1.0);
    f
}

/// `𝒟ω` (left) or `𝒟̃ω` (right) as a jet of one lower order.
pub fn ext_deriv_jet(w: &JetForm, gamma: Option<&[Tps]>, side: Side) -> Result<JetForm> {
    let n = w.dim();
    if w.order() == 0 {
        return Err(Error::MissingDerivative { requested: 1, available: 0 });
    }
    let (p, q) = w.degrees();
    let (tp, tq) = match side {
        Side::Left => (p + 1, q),
        Side::Right => (p, q + 1),
    };
    if tp > n || tq > n {
        return Err(Error::DegreeOverflow { n, p: tp, q: tq });
    }
    let proto = Tps::zero(n, w.order() - 1);
    let mut out = JetForm::zeros_like(&proto, n, tp, tq)?;
    for i in 0..n {
        let nabla = covariant_derivative(w, gamma, i);
        let term = unit_covector(n, i, side, &proto).wedge(&nabla)?;
        out.axpy(-1.0, &term)?;
    }
    Ok(out)
}

fn sign(e: usize) -> f64 {
    if e % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign `ε` with `δ = ε *𝒟*` on `𝒟^{p,q}` (left) or `δ̃ = ε *𝒟̃*` (right).
pub fn codiff_sign(n: usize, p: usize, q: usize, side: Side) -> f64 {
    match side {
        Side::Left => -sign(n * (p + 1) + q * (n - q)),
        Side::Right => -sign(n * (q + 1) + p * (n - p)),
    }
}

/// `δω` (left) or `δ̃ω` (right) as a jet of one lower order. `metric` is the
/// jet of the metric defining `*` (`None` for Euclidean), `gamma` its connection.
pub fn codiff_jet(w: &JetForm, metric: Option<&Metric<Tps>>, gamma: Option<&[Tps]>, side: Side) -> Result<JetForm> {
    let (p, q) = w.degrees();
    let n = w.dim();
    match side {
        Side::Left if p == 0 => return Err(Error::DegreeZero { side: "left" }),
        Side::Right if q == 0 => return Err(Error::DegreeZero { side: "right" }),
        _ => {}
    }
    let proto = w.comps()[0].clone();
    let flat = Metric::from_matrix(
        (0..n * n).map(|k| proto.const_like(if k / n == k % n { 1.0 } else { 0.0 })).collect(),
        n,
        1.0,
    )?;
    let m = metric.unwrap_or(&flat);
    let star = w.hodge(&truncate_metric(m, w.order())?)?;
    let d = ext_deriv_jet(&star, gamma, side)?;
    let back = d.hodge(&truncate_metric(m, d.order())?)?;
    Ok(back.scale(codiff_sign(n, p, q, side)))
}

pub(crate) fn truncate_metric(m: &Metric<Tps>, order: usize) -> Result<Metric<Tps>> {
    if m.matrix()[0].order() == order {
        return Ok(m.clone());
    }
    Metric::from_matrix(m.matrix().iter().map(|t| t.truncate(order)).collect(), m.dim(), m.orientation())
}

/// A double-form valued field with jets of its components.
pub trait DoubleFormField: Send + Sync {
    fn dim(&self) -> usize;
    fn degrees(&self) -> (usize, usize);
    /// Highest jet order available.
    fn max_order(&self) -> usize;
    /// Component jets of the given order about `x`.
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm>;

    fn eval(&self, x: &[f64]) -> Result<DoubleForm> {
        Ok(self.jet(x, 0)?.values())
    }

    /// Directional derivative `∂_v ω` at `x`.
    fn directional(&self, x: &[f64], v: &[f64]) -> Result<DoubleForm> {
        let j = self.jet(x, 1)?;
        let mut out = j.values().scale(0.0);
        for (i, vi) in v.iter().enumerate() {
            let mut alpha = vec![0; self.dim()];
            alpha[i] = 1;
            out.axpy(*vi, &j.derivative(&alpha))?;
        }
        Ok(out)
    }
}

fn require_order<F: DoubleFormField + ?Sized>(w: &F, order: usize) -> Result<()> {
    if w.max_order() < order {
        return Err(Error::MissingDerivative { requested: order, available: w.max_order() });
    }
    Ok(())
}

/// `𝒟ω(x)` or `𝒟̃ω(x)` for the given connection.
pub fn ext_deriv<F: DoubleFormField + ?Sized>(w: &F, x: &[f64], side: Side, conn: &Connection) -> Result<DoubleForm> {
    require_order(w, 1)?;
    let jet = w.jet(x, 1)?;
    let geo = conn.geometry(x, 1)?;
    Ok(ext_deriv_jet(&jet, geo.as_ref().map(|g| g.christoffel()), side)?.values())
}

/// `δω(x)` or `δ̃ω(x)`, with `*` taken for the connection's metric.
pub fn codiff<F: DoubleFormField + ?Sized>(w: &F, x: &[f64], side: Side, conn: &Connection) -> Result<DoubleForm> {
    require_order(w, 1)?;
    let jet = w.jet(x, 1)?;
    let geo = conn.geometry(x, 1)?;
    let out = codiff_jet(&jet, geo.as_ref().map(|g| g.metric()), geo.as_ref().map(|g| g.christoffel()), side)?;
    Ok(out.values())
}

/// Double-form field given by a closed-form expression in the coordinates.
#[derive(Clone)]
pub struct FnField {
    n: usize,
    degrees: (usize, usize),
    max_order: usize,
    f: Arc<dyn Fn(&[Tps]) -> Result<JetForm> + Send + Sync>,
}

impl FnField {
    pub fn new<F>(n: usize, degrees: (usize, usize), max_order: usize, f: F) -> Self
    where
        F: Fn(&[Tps]) -> Result<JetForm> + Send + Sync + 'static,
    {
        FnField { n, degrees, max_order, f: Arc::new(f) }
    }

    /// Evaluates the expression on arbitrary coordinate jets.
    pub fn apply(&self, x: &[Tps]) -> Result<JetForm> {
        (self.f)(x)
    }
}

impl DoubleFormField for FnField {
    fn dim(&self) -> usize {
        self.n
    }
    fn degrees(&self) -> (usize, usize) {
        self.degrees
    }
    fn max_order(&self) -> usize {
        self.max_order
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        require_order(self, order)?;
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        let out = (self.f)(&Tps::point(x, order))?;
        if out.degrees() != self.degrees {
            let (p, q) = out.degrees();
            return Err(Error::DegreeMismatch(p, q, self.degrees.0, self.degrees.1));
        }
        Ok(out)
    }
}

/// Random polynomial double-form field of the given total degree (exact jets).
pub fn random_polynomial_field(n: usize, p: usize, q: usize, degree: usize, seed: u64) -> Result<FnField> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let len = binomial(n, p) * binomial(n, q);
    let sp = crate::tps::TpsSpace::get(n, degree);
    let polys: Vec<Tps> = (0..len)
        .map(|_| Tps::from_coeffs(n, degree, (0..sp.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    if p > n || q > n {
        return Err(Error::DegreeOverflow { n, p, q });
    }
    Ok(FnField::new(n, (p, q), crate::tps::MAX_ORDER, move |x| {
        let comps = polys.iter().map(|poly| poly.substitute(x)).collect();
        JetForm::from_comps(n, p, q, comps)
    }))
}

/// The curvature double form of a metric as a field.
#[derive(Clone, Debug)]
pub struct RiemannField(pub MetricField);

impl DoubleFormField for RiemannField {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn degrees(&self) -> (usize, usize) {
        (2, 2)
    }
    fn max_order(&self) -> usize {
        self.0.regularity().saturating_sub(2)
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<JetForm> {
        require_order(self, order)?;
        LocalGeometry::new(&self.0, x, order + 2)?.riemann()
    }
}

/// Vector field with jets of its components.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], order: usize) -> Result<Vec<Tps>>;
}

/// Scalar field with jets.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], order: usize) -> Result<Tps>;
}

/// Vector field given by a closed-form expression.
#[derive(Clone)]
pub struct FnVectorField {
    n: usize,
    f: Arc<dyn Fn(&[Tps]) -> Vec<Tps> + Send + Sync>,
}

impl FnVectorField {
    pub fn new<F: Fn(&[Tps]) -> Vec<Tps> + Send + Sync + 'static>(n: usize, f: F) -> Self {
        FnVectorField { n, f: Arc::new(f) }
    }
}

impl VectorField for FnVectorField {
    fn dim(&self) -> usize {
        self.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Vec<Tps>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        Ok((self.f)(&Tps::point(x, order)))
    }
}

/// Scalar field given by a closed-form expression.
#[derive(Clone)]
pub struct FnScalarField {
    n: usize,
    f: Arc<dyn Fn(&[Tps]) -> Tps + Send + Sync>,
}

impl FnScalarField {
    pub fn new<F: Fn(&[Tps]) -> Tps + Send + Sync + 'static>(n: usize, f: F) -> Self {
        FnScalarField { n, f: Arc::new(f) }
    }
}

impl ScalarField for FnScalarField {
    fn dim(&self) -> usize {
        self.n
    }
    fn jet(&self, x: &[f64], order: usize) -> Result<Tps> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        Ok((self.f)(&Tps::point(x, order)))
    }
}

/// The dual forms `θ = Σ ζ_i dx^i ∈ 𝒟^{1,0}` and `θ̃ ∈ 𝒟^{0,1}` of vector jets.
pub fn dual_forms(zeta: &[Tps]) -> (JetForm, JetForm) {
    let n = zeta.len();
    (
        JetForm::from_comps(n, 1, 0, zeta.to_vec()).expect("shape"),
        JetForm::from_comps(n, 0, 1, zeta.to_vec()).expect("shape"),
    )
}

/// `𝓛_ζ b` as a jet of one lower order than `zeta`.
pub fn lie_flat_jet(zeta: &[Tps]) -> JetForm {
    let n = zeta.len();
    let comps = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            &zeta[j].deriv(i) + &zeta[i].deriv(j)
        })
        .collect();
    JetForm::from_comps(n, 1, 1, comps).expect("shape")
}

/// `(𝓛_ζ b)_ij = ∂_i ζ_j + ∂_j ζ_i` at `x`.
pub fn lie_flat<V: VectorField + ?Sized>(zeta: &V, x: &[f64]) -> Result<DoubleForm> {
    Ok(lie_flat_jet(&zeta.jet(x, 1)?).values())
}

/// Euclidean Hessian `∂_i ∂_j V` at `x`.
pub fn hess_flat<S: ScalarField + ?Sized>(v: &S, x: &[f64]) -> Result<DoubleForm> {
    let t = v.jet(x, 2)?;
    let n = v.dim();
    DoubleForm::from_fn(n, 1, 1, |i, j| {
        let mut a = vec![0; n];
        a[i[0]] += 1;
        a[j[0]] += 1;
        t.derivative(&a)
    })
}
