//! Pointwise algebra of double forms `𝒟^{p,q} = Λ^p ⊗ Λ^q` on an
//! `n`-dimensional inner-product space.
//!
//! Components are the values on coordinate basis vectors,
//! `ω[I, J] = ω(e_{i_1}, .., e_{i_p}; e_{j_1}, .., e_{j_q})` for increasing
//! multi-indices, stored densely in lexicographic rank order. Exterior
//! products use the determinant convention, so `(g ⍘ g)(e_1, e_2; e_1, e_2) = 2`
//! for the Euclidean `g`.
//!
//! Metric-dependent operations (contraction, inner product, Hodge star) take a
//! [`Metric`] and work with coordinate components raised by the minors of
//! `G^{-1}`. The Bianchi maps, interior products and the product itself are
//! metric-free.
//!
//! Everything is generic over the coefficient type so the same code acts on
//! plain values ([`DoubleForm`]) and on Taylor jets ([`JetForm`]).

pub mod index;
mod metric;

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use index::{binomial, factorial, MultiIndex, MAX_DIM};
use index::{basis, full_mask, product_table, shuffle_sign};
pub use metric::{invert, Metric, PointMetric};

use crate::error::{Error, Result};
use crate::tps::Tps;

/// Which index block an operation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Scalar coefficient ring for double forms.
pub trait Coeff: Clone + Debug + Send + Sync + 'static {
    fn zero_like(&self) -> Self;
    fn const_like(&self, v: f64) -> Self;
    fn is_zero(&self) -> bool;
    /// Constant part.
    fn value(&self) -> f64;
    /// `self += s * a`
    fn add_scaled(&mut self, s: f64, a: &Self);
    /// `self += s * a * b`
    fn add_product(&mut self, s: f64, a: &Self, b: &Self);
    fn scaled(&self, s: f64) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn recip(&self) -> Self;
}

impl Coeff for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn const_like(&self, v: f64) -> Self {
        v
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn add_scaled(&mut self, s: f64, a: &Self) {
        *self += s * a;
    }
    #[inline]
    fn add_product(&mut self, s: f64, a: &Self, b: &Self) {
        *self += s * a * b;
    }
    fn scaled(&self, s: f64) -> Self {
        self * s
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

impl Coeff for Tps {
    fn zero_like(&self) -> Self {
        Tps::zero(self.nvars(), self.order())
    }
    fn const_like(&self, v: f64) -> Self {
        Tps::constant(self.nvars(), self.order(), v)
    }
    fn is_zero(&self) -> bool {
        Tps::is_zero(self)
    }
    fn value(&self) -> f64 {
        Tps::value(self)
    }
    fn add_scaled(&mut self, s: f64, a: &Self) {
        Tps::add_scaled(self, s, a)
    }
    fn add_product(&mut self, s: f64, a: &Self, b: &Self) {
        Tps::add_product(self, s, a, b)
    }
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn recip(&self) -> Self {
        Tps::recip(self)
    }
}

/// A double form of bidegree `(p, q)` on `ℝⁿ` with coefficients in `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct DForm<T> {
    n: usize,
    p: usize,
    q: usize,
    comps: Vec<T>,
}

pub type DoubleForm = DForm<f64>;
/// Double form whose components are Taylor jets about a point.
pub type JetForm = DForm<Tps>;

fn check_degrees(n: usize, p: usize, q: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::UnsupportedDimension(n));
    }
    if p > n || q > n {
        return Err(Error::DegreeOverflow { n, p, q });
    }
    Ok(())
}

/// Sorts `idx` in place and returns the permutation sign (0 on repeats).
fn sort_sign(idx: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        0.0
    } else {
        sign
    }
}

impl<T: Coeff> DForm<T> {
    /// Zero form whose coefficients are shaped like `proto`.
    pub fn zeros_like(proto: &T, n: usize, p: usize, q: usize) -> Result<Self> {
        check_degrees(n, p, q)?;
        let len = binomial(n, p) * binomial(n, q);
        Ok(DForm { n, p, q, comps: vec![proto.zero_like(); len] })
    }

    pub fn from_comps(n: usize, p: usize, q: usize, comps: Vec<T>) -> Result<Self> {
        check_degrees(n, p, q)?;
        let len = binomial(n, p) * binomial(n, q);
        if comps.len() != len {
            return Err(Error::DimensionMismatch(comps.len(), len));
        }
        Ok(DForm { n, p, q, comps })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn comps(&self) -> &[T] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [T] {
        &mut self.comps
    }

    pub fn into_comps(self) -> Vec<T> {
        self.comps
    }

    fn width(&self) -> usize {
        binomial(self.n, self.q)
    }

    #[inline]
    pub(crate) fn slot(&self, i: u8, j: u8) -> usize {
        let b = basis(self.n);
        b.rank[i as usize] as usize * self.width() + b.rank[j as usize] as usize
    }

    /// Component on the increasing multi-indices `(I, J)`.
    pub fn get(&self, i: MultiIndex, j: MultiIndex) -> &T {
        &self.comps[self.slot(i.0, j.0)]
    }

    pub fn get_mut(&mut self, i: MultiIndex, j: MultiIndex) -> &mut T {
        let s = self.slot(i.0, j.0);
        &mut self.comps[s]
    }

    /// `ω(e_{i_1}, .., e_{i_p}; e_{j_1}, .., e_{j_q})` for arbitrary index
    /// sequences (antisymmetrised, zero on repeats).
    pub fn component(&self, i: &[usize], j: &[usize]) -> Result<T> {
        if i.len() != self.p || j.len() != self.q {
            return Err(Error::DegreeMismatch(i.len(), j.len(), self.p, self.q));
        }
        if i.iter().chain(j).any(|&x| x >= self.n) {
            return Err(Error::InvalidIndex(i.iter().chain(j).copied().collect()));
        }
        let (mut a, mut b) = (i.to_vec(), j.to_vec());
        let s = sort_sign(&mut a) * sort_sign(&mut b);
        if s == 0.0 {
            return Ok(self.proto().zero_like());
        }
        let (ia, ib) = (MultiIndex::new(&a)?, MultiIndex::new(&b)?);
        Ok(self.get(ia, ib).scaled(s))
    }

    pub(crate) fn proto(&self) -> &T {
        &self.comps[0]
    }

    pub fn zero_same(&self) -> Self {
        DForm { n: self.n, p: self.p, q: self.q, comps: vec![self.proto().zero_like(); self.comps.len()] }
    }

    fn check_same(&self, o: &Self) -> Result<()> {
        if self.n != o.n {
            return Err(Error::DimensionMismatch(self.n, o.n));
        }
        if self.p != o.p || self.q != o.q {
            return Err(Error::DegreeMismatch(self.p, self.q, o.p, o.q));
        }
        Ok(())
    }

    /// `self += s * o`
    pub fn axpy(&mut self, s: f64, o: &Self) -> Result<()> {
        self.check_same(o)?;
        for (a, b) in self.comps.iter_mut().zip(&o.comps) {
            a.add_scaled(s, b);
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let mut r = self.clone();
        r.axpy(1.0, o)?;
        Ok(r)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        let mut r = self.clone();
        r.axpy(-1.0, o)?;
        Ok(r)
    }

    pub fn scale(&self, s: f64) -> Self {
        DForm { n: self.n, p: self.p, q: self.q, comps: self.comps.iter().map(|c| c.scaled(s)).collect() }
    }

    /// Multiplies every component by a coefficient.
    pub fn scale_by(&self, s: &T) -> Self {
        DForm { n: self.n, p: self.p, q: self.q, comps: self.comps.iter().map(|c| c.mul(s)).collect() }
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> DForm<U> {
        DForm { n: self.n, p: self.p, q: self.q, comps: self.comps.iter().map(f).collect() }
    }

    /// Swaps the two index blocks.
    pub fn transpose(&self) -> Self {
        let b = basis(self.n);
        let mut out = DForm {
            n: self.n,
            p: self.q,
            q: self.p,
            comps: vec![self.proto().zero_like(); self.comps.len()],
        };
        for &i in &b.by_degree[self.p] {
            for &j in &b.by_degree[self.q] {
                let s = out.slot(j, i);
                out.comps[s] = self.comps[self.slot(i, j)].clone();
            }
        }
        out
    }

    /// The Kulkarni–Nomizu product `self ⍘ o`.
    pub fn wedge(&self, o: &Self) -> Result<Self> {
        if self.n != o.n {
            return Err(Error::DimensionMismatch(self.n, o.n));
        }
        let n = self.n;
        let (p, q) = (self.p + o.p, self.q + o.q);
        if p > n || q > n {
            return Err(Error::DegreeOverflow { n, p, q });
        }
        let proto = if self.comps.len() <= o.comps.len() { self.proto() } else { o.proto() };
        let mut out = DForm::zeros_like(proto, n, p, q)?;
        let tp = product_table(n, self.p, o.p);
        let tq = product_table(n, self.q, o.q);
        let (w1, w2, w) = (self.width(), o.width(), out.width());
        for &(a1, a2, ak, sa) in tp {
            let (a1, a2, ak) = (a1 as usize, a2 as usize, ak as usize);
            let row1 = &self.comps[a1 * w1..(a1 + 1) * w1];
            let row2 = &o.comps[a2 * w2..(a2 + 1) * w2];
            if row1.iter().all(|x| x.is_zero()) {
                continue;
            }
            let rowk = &mut out.comps[ak * w..(ak + 1) * w];
            for &(b1, b2, bk, sb) in tq {
                let x = &row1[b1 as usize];
                if x.is_zero() {
                    continue;
                }
                rowk[bk as usize].add_product(sa * sb, x, &row2[b2 as usize]);
            }
        }
        Ok(out)
    }

    /// `self^{⍘k}`; the zeroth power is the scalar 1.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = DForm::scalar_like(self.proto(), self.n, 1.0);
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// Degree-`(0,0)` form holding `v`.
    pub fn scalar_like(proto: &T, n: usize, v: f64) -> Self {
        DForm { n, p: 0, q: 0, comps: vec![proto.const_like(v)] }
    }

    /// The component of a `(0,0)` form.
    pub fn scalar_value(&self) -> Option<&T> {
        (self.p == 0 && self.q == 0).then(|| &self.comps[0])
    }

    fn check_metric(&self, m: &Metric<T>) -> Result<()> {
        if m.dim() != self.n {
            return Err(Error::DimensionMismatch(self.n, m.dim()));
        }
        Ok(())
    }

    /// Contravariant components `ω^{IJ}` (the identity for the Euclidean metric).
    pub fn raise(&self, m: &Metric<T>) -> Result<Self> {
        self.check_metric(m)?;
        let (Some(mp), Some(mq)) = (m.inv_minor(self.p), m.inv_minor(self.q)) else {
            return Ok(self.clone());
        };
        let (wp, wq) = (binomial(self.n, self.p), binomial(self.n, self.q));
        let zero = self.proto().zero_like();
        let mut tmp = vec![zero.clone(); wp * wq];
        for i in 0..wp {
            for a in 0..wp {
                let c = &mp[i * wp + a];
                if c.is_zero() {
                    continue;
                }
                for b in 0..wq {
                    tmp[i * wq + b].add_product(1.0, c, &self.comps[a * wq + b]);
                }
            }
        }
        let mut out = vec![zero; wp * wq];
        for i in 0..wp {
            for j in 0..wq {
                let acc = &mut out[i * wq + j];
                for b in 0..wq {
                    acc.add_product(1.0, &tmp[i * wq + b], &mq[j * wq + b]);
                }
            }
        }
        Ok(DForm { n: self.n, p: self.p, q: self.q, comps: out })
    }

    /// The Hodge star acting on both blocks, `𝒟^{p,q} → 𝒟^{n-p,n-q}`.
    pub fn hodge(&self, m: &Metric<T>) -> Result<Self> {
        let raised = self.raise(m)?;
        let n = self.n;
        let full = full_mask(n);
        let b = basis(n);
        let mut out = DForm::zeros_like(self.proto(), n, n - self.p, n - self.q)?;
        for &i in &b.by_degree[self.p] {
            for &j in &b.by_degree[self.q] {
                let (ic, jc) = (!i & full, !j & full);
                let s = shuffle_sign(i, ic) * shuffle_sign(j, jc);
                let slot = out.slot(ic, jc);
                let v = &raised.comps[raised.slot(i, j)];
                out.comps[slot] = if m.is_identity() { v.scaled(s) } else { v.mul(m.det()).scaled(s) };
            }
        }
        Ok(out)
    }

    /// Metric contraction of the first slot of each block, `𝒟^{p,q} → 𝒟^{p-1,q-1}`.
    pub fn contract(&self, m: &Metric<T>) -> Result<Self> {
        self.check_metric(m)?;
        if self.p == 0 {
            return Err(Error::DegreeZero { side: "left" });
        }
        if self.q == 0 {
            return Err(Error::DegreeZero { side: "right" });
        }
        let n = self.n;
        let b = basis(n);
        let ginv = m.inverse();
        let mut out = DForm::zeros_like(self.proto(), n, self.p - 1, self.q - 1)?;
        for &i in &b.by_degree[self.p - 1] {
            for &j in &b.by_degree[self.q - 1] {
                let slot = out.slot(i, j);
                let mut acc = self.proto().zero_like();
                for a in 0..n {
                    let sa = shuffle_sign(1 << a, i);
                    if sa == 0.0 {
                        continue;
                    }
                    for c in 0..n {
                        let sc = shuffle_sign(1 << c, j);
                        if sc == 0.0 || (m.is_identity() && a != c) {
                            continue;
                        }
                        let v = &self.comps[self.slot(i | 1 << a, j | 1 << c)];
                        if m.is_identity() {
                            acc.add_scaled(sa * sc, v);
                        } else {
                            acc.add_product(sa * sc, &ginv[a * n + c], v);
                        }
                    }
                }
                out.comps[slot] = acc;
            }
        }
        Ok(out)
    }

    /// The induced inner product on `𝒟^{p,q}`.
    pub fn inner(&self, o: &Self, m: &Metric<T>) -> Result<T> {
        self.check_same(o)?;
        let raised = o.raise(m)?;
        let mut acc = self.proto().zero_like();
        for (a, b) in self.comps.iter().zip(&raised.comps) {
            acc.add_product(1.0, a, b);
        }
        Ok(acc)
    }

    /// Interior product with the vector `x` in the first slot of one block.
    pub fn interior(&self, x: &[f64], side: Side) -> Result<Self> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(x.len(), self.n));
        }
        match side {
            Side::Left => {
                if self.p == 0 {
                    return Err(Error::DegreeZero { side: "left" });
                }
                let n = self.n;
                let b = basis(n);
                let mut out = DForm::zeros_like(self.proto(), n, self.p - 1, self.q)?;
                let w = self.width();
                for &i in &b.by_degree[self.p - 1] {
                    let ri = b.rank[i as usize] as usize;
                    for (k, &xk) in x.iter().enumerate() {
                        let s = shuffle_sign(1 << k, i);
                        if s == 0.0 || xk == 0.0 {
                            continue;
                        }
                        let src = b.rank[(i | 1 << k) as usize] as usize;
                        for c in 0..w {
                            out.comps[ri * w + c].add_scaled(s * xk, &self.comps[src * w + c]);
                        }
                    }
                }
                Ok(out)
            }
            Side::Right => {
                if self.q == 0 {
                    return Err(Error::DegreeZero { side: "right" });
                }
                Ok(self.transpose().interior(x, Side::Left)?.transpose())
            }
        }
    }

    /// Bianchi maps. Left: `ℬω = -Σ_i dx^i ⍘ ι_{e_i}^{right} ω`, `𝒟^{p,q} → 𝒟^{p+1,q-1}`.
    /// Right: the transpose conjugate. On `𝒟^{p,0}` the left map returns the
    /// zero form of bidegree `(p, 0)`; on `𝒟^{n,q}` it returns zero of bidegree
    /// `(n, q-1)`.
    pub fn bianchi(&self, side: Side) -> Self {
        match side {
            Side::Right => self.transpose().bianchi(Side::Left).transpose(),
            Side::Left => {
                let n = self.n;
                let (p, q) = (self.p, self.q);
                let (tp, tq) = if q == 0 { (p, 0) } else { ((p + 1).min(n), q - 1) };
                let mut out = DForm {
                    n,
                    p: tp,
                    q: tq,
                    comps: vec![self.proto().zero_like(); binomial(n, tp) * binomial(n, tq)],
                };
                if q == 0 || p == n {
                    return out;
                }
                let b = basis(n);
                for &i in &b.by_degree[p] {
                    for &j in &b.by_degree[q - 1] {
                        for a in 0..n {
                            let sl = shuffle_sign(1 << a, i);
                            let sr = shuffle_sign(1 << a, j);
                            if sl == 0.0 || sr == 0.0 {
                                continue;
                            }
                            let slot = out.slot(i | 1 << a, j);
                            let v = &self.comps[self.slot(i, j | 1 << a)];
                            out.comps[slot].add_scaled(-sl * sr, v);
                        }
                    }
                }
                out
            }
        }
    }
}

impl DoubleForm {
    pub fn zeros(n: usize, p: usize, q: usize) -> Result<Self> {
        DForm::zeros_like(&0.0, n, p, q)
    }

    pub fn scalar(n: usize, v: f64) -> Self {
        DForm::scalar_like(&0.0, n, v)
    }

    pub fn from_fn<F: FnMut(&[usize], &[usize]) -> f64>(n: usize, p: usize, q: usize, mut f: F) -> Result<Self> {
        check_degrees(n, p, q)?;
        let b = basis(n);
        let mut comps = Vec::with_capacity(binomial(n, p) * binomial(n, q));
        for &i in &b.by_degree[p] {
            let ii = MultiIndex(i).indices();
            for &j in &b.by_degree[q] {
                comps.push(f(&ii, &MultiIndex(j).indices()));
            }
        }
        Ok(DForm { n, p, q, comps })
    }

    /// The `(1,1)` form with components `G_ij` (row-major `n×n`).
    pub fn from_matrix(n: usize, g: &[f64]) -> Result<Self> {
        if g.len() != n * n {
            return Err(Error::DimensionMismatch(g.len(), n * n));
        }
        DoubleForm::from_comps(n, 1, 1, g.to_vec())
    }

    /// The metric `G` as an element of `𝒟^{1,1}`.
    pub fn metric(m: &PointMetric) -> Self {
        DoubleForm::from_matrix(m.dim(), m.matrix()).expect("square matrix")
    }

    /// The Euclidean metric `b`.
    pub fn euclidean(n: usize) -> Self {
        DoubleForm::metric(&PointMetric::identity(n))
    }

    /// `Σ v_i dx^i` in `𝒟^{1,0}`.
    pub fn left_covector(v: &[f64]) -> Result<Self> {
        DoubleForm::from_comps(v.len(), 1, 0, v.to_vec())
    }

    /// `Σ v_i d̃x^i` in `𝒟^{0,1}`.
    pub fn right_covector(v: &[f64]) -> Result<Self> {
        DoubleForm::from_comps(v.len(), 0, 1, v.to_vec())
    }

    /// `d vol ⊗ d vol` for the metric `m`.
    pub fn volume(m: &PointMetric) -> Self {
        DoubleForm::scalar(m.dim(), *m.det()).into_degree(m.dim(), m.dim())
    }

    fn into_degree(self, p: usize, q: usize) -> Self {
        DForm { n: self.n, p, q, comps: self.comps }
    }

    /// Components drawn uniformly from `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(n: usize, p: usize, q: usize, rng: &mut R) -> Result<Self> {
        check_degrees(n, p, q)?;
        let len = binomial(n, p) * binomial(n, q);
        Ok(DForm { n, p, q, comps: (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() })
    }

    /// Random simple form `(α_1 ∧ .. ∧ α_p) ⊗ (β_1 ∧ .. ∧ β_q)`.
    pub fn random_simple<R: Rng + ?Sized>(n: usize, p: usize, q: usize, rng: &mut R) -> Result<Self> {
        check_degrees(n, p, q)?;
        let mut left = DoubleForm::scalar(n, 1.0);
        for _ in 0..p {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            left = left.wedge(&DoubleForm::left_covector(&v)?)?;
        }
        for _ in 0..q {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            left = left.wedge(&DoubleForm::right_covector(&v)?)?;
        }
        Ok(left)
    }

    /// Evaluation on vectors `x_1..x_p` and `y_1..y_q` (multilinear extension).
    pub fn evaluate(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64> {
        if xs.len() != self.p || ys.len() != self.q {
            return Err(Error::DegreeMismatch(xs.len(), ys.len(), self.p, self.q));
        }
        let n = self.n;
        if xs.iter().chain(ys).any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(n, 0));
        }
        let b = basis(n);
        let minor = |vs: &[Vec<f64>], m: u8| -> f64 {
            let idx = MultiIndex(m).indices();
            let k = idx.len();
            let mat: Vec<f64> = (0..k).flat_map(|r| idx.iter().map(move |&c| vs[r][c])).collect();
            det_small(&mat, k)
        };
        let mut acc = 0.0;
        for &i in &b.by_degree[self.p] {
            let di = minor(xs, i);
            for &j in &b.by_degree[self.q] {
                acc += self.comps[self.slot(i, j)] * di * minor(ys, j);
            }
        }
        Ok(acc)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Largest absolute componentwise difference; infinite on shape mismatch.
    pub fn max_diff(&self, o: &Self) -> f64 {
        if self.check_same(o).is_err() {
            return f64::INFINITY;
        }
        self.comps.iter().zip(&o.comps).fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    /// Euclidean norm of the component vector.
    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Constant jets of the given shape.
    pub fn to_jet(&self, nvars: usize, order: usize) -> JetForm {
        self.map(|&v| Tps::constant(nvars, order, v))
    }
}

impl JetForm {
    /// Values at the expansion point.
    pub fn values(&self) -> DoubleForm {
        self.map(|t| t.value())
    }

    /// Componentwise partial derivative `∂^α` at the expansion point.
    pub fn derivative(&self, alpha: &[usize]) -> DoubleForm {
        self.map(|t| t.derivative(alpha))
    }

    /// Componentwise `∂_v` as a jet of one lower order.
    pub fn deriv(&self, v: usize) -> JetForm {
        self.map(|t| t.deriv(v))
    }

    pub fn truncate(&self, order: usize) -> JetForm {
        self.map(|t| t.truncate(order))
    }

    pub fn order(&self) -> usize {
        self.proto().order()
    }
}

/// Determinant of a small dense matrix by elimination.
pub(crate) fn det_small(a: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut m = a.to_vec();
    let mut det = 1.0;
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| m[i * k + c].abs().total_cmp(&m[j * k + c].abs())).unwrap();
        if m[piv * k + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..k {
                m.swap(piv * k + j, c * k + j);
            }
            det = -det;
        }
        det *= m[c * k + c];
        for i in c + 1..k {
            let f = m[i * k + c] / m[c * k + c];
            for j in c..k {
                m[i * k + j] -= f * m[c * k + j];
            }
        }
    }
    det
}
