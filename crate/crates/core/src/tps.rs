//! Truncated multivariate Taylor series.
//!
//! A [`Tps`] holds the Taylor coefficients of a smooth function of `n`
//! variables about a base point, truncated at total degree `order`. All
//! arithmetic is exact up to rounding, so derivatives propagated through a
//! closed-form expression carry no discretisation error. Metric fields, the
//! diffeomorphisms of the chart-change harness and the polynomial test fields
//! are all evaluated through this type.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::OnceLock;

use crate::dforms::index::MAX_DIM;

/// Highest truncation order supported.
pub const MAX_ORDER: usize = 6;

type Exps = [u8; MAX_DIM];

/// Monomial bookkeeping for a given `(n, order)`.
pub struct TpsSpace {
    pub n: usize,
    pub order: usize,
    exps: &'static [Exps],
    degree: &'static [u8],
    /// `(i, j, k)`: monomial `i` times monomial `j` is monomial `k`.
    mul: Vec<(u32, u32, u32)>,
    /// Per variable: `(source index, index in the order-1 space, factor)`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    alpha_factorial: Vec<f64>,
}

struct Monomials {
    exps: Vec<Exps>,
    degree: Vec<u8>,
    index: HashMap<Exps, u32>,
    /// number of monomials of degree <= d
    count: Vec<usize>,
}

fn monomials(n: usize) -> &'static Monomials {
    static CACHE: [OnceLock<Monomials>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    CACHE[n].get_or_init(|| {
        let mut exps: Vec<Exps> = vec![[0; MAX_DIM]];
        let mut degree = vec![0u8];
        let mut count = vec![1usize];
        let mut last: Vec<Exps> = vec![[0; MAX_DIM]];
        for d in 1..=MAX_ORDER {
            // extend degree d-1 monomials by one variable at or after their last one,
            // which enumerates each degree-d monomial exactly once
            let mut next = Vec::new();
            for e in &last {
                let start = (0..n).rev().find(|&v| e[v] > 0).unwrap_or(0);
                for v in start..n {
                    let mut f = *e;
                    f[v] += 1;
                    next.push(f);
                }
            }
            for e in &next {
                exps.push(*e);
                degree.push(d as u8);
            }
            count.push(exps.len());
            last = next;
        }
        let index = exps.iter().enumerate().map(|(i, e)| (*e, i as u32)).collect();
        Monomials { exps, degree, index, count }
    })
}

impl TpsSpace {
    pub fn get(n: usize, order: usize) -> &'static TpsSpace {
        assert!(n <= MAX_DIM && order <= MAX_ORDER, "tps space ({n}, {order}) out of range");
        static CACHE: [[OnceLock<TpsSpace>; MAX_ORDER + 1]; MAX_DIM + 1] =
            [const { [const { OnceLock::new() }; MAX_ORDER + 1] }; MAX_DIM + 1];
        CACHE[n][order].get_or_init(|| TpsSpace::build(n, order))
    }

    fn build(n: usize, order: usize) -> TpsSpace {
        let mono = monomials(n);
        let len = mono.count[order];
        let exps = &mono.exps[..len];
        let degree = &mono.degree[..len];
        let mut mul = Vec::new();
        for i in 0..len {
            for j in 0..len {
                if (degree[i] + degree[j]) as usize <= order {
                    let mut e = exps[i];
                    for v in 0..n {
                        e[v] += exps[j][v];
                    }
                    mul.push((i as u32, j as u32, mono.index[&e]));
                }
            }
        }
        let mut deriv = vec![Vec::new(); n];
        if order > 0 {
            for (i, e) in exps.iter().enumerate() {
                for v in 0..n {
                    if e[v] > 0 {
                        let mut f = *e;
                        f[v] -= 1;
                        deriv[v].push((i as u32, mono.index[&f], e[v] as f64));
                    }
                }
            }
        }
        let alpha_factorial = exps
            .iter()
            .map(|e| e.iter().map(|&a| crate::dforms::factorial(a as usize)).product())
            .collect();
        TpsSpace { n, order, exps, degree, mul, deriv, alpha_factorial }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Index of the monomial with exponents `alpha`, if it lies in this space.
    pub fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        let mut e = [0u8; MAX_DIM];
        for (v, &a) in alpha.iter().enumerate() {
            e[v] = a as u8;
        }
        monomials(self.n).index.get(&e).map(|&i| i as usize).filter(|&i| i < self.len())
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i][..self.n]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i] as usize
    }
}

impl fmt::Debug for TpsSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TpsSpace(n={}, order={})", self.n, self.order)
    }
}

/// Truncated Taylor series about an implicit base point.
#[derive(Clone)]
pub struct Tps {
    sp: &'static TpsSpace,
    c: Vec<f64>,
}

impl fmt::Debug for Tps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tps(n={}, order={}, {:?})", self.sp.n, self.sp.order, self.c)
    }
}

impl Tps {
    pub fn constant(n: usize, order: usize, v: f64) -> Tps {
        let sp = TpsSpace::get(n, order);
        let mut c = vec![0.0; sp.len()];
        c[0] = v;
        Tps { sp, c }
    }

    pub fn zero(n: usize, order: usize) -> Tps {
        Tps::constant(n, order, 0.0)
    }

    /// The coordinate function `x_i` expanded about a point where it equals `value`.
    pub fn variable(n: usize, order: usize, i: usize, value: f64) -> Tps {
        let mut t = Tps::constant(n, order, value);
        if order > 0 {
            t.c[1 + i] = 1.0;
        }
        t
    }

    /// All `n` coordinate functions about the point `x`.
    pub fn point(x: &[f64], order: usize) -> Vec<Tps> {
        let n = x.len();
        (0..n).map(|i| Tps::variable(n, order, i, x[i])).collect()
    }

    pub fn from_coeffs(n: usize, order: usize, c: Vec<f64>) -> Tps {
        let sp = TpsSpace::get(n, order);
        assert_eq!(c.len(), sp.len());
        Tps { sp, c }
    }

    pub fn space(&self) -> &'static TpsSpace {
        self.sp
    }

    pub fn nvars(&self) -> usize {
        self.sp.n
    }

    pub fn order(&self) -> usize {
        self.sp.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `∂^α f` at the base point.
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        match self.sp.index_of(alpha) {
            Some(i) => self.c[i] * self.sp.alpha_factorial[i],
            None => 0.0,
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        let n = self.sp.n;
        (0..n).map(|v| if self.sp.order > 0 { self.c[1 + v] } else { 0.0 }).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    pub fn truncate(&self, order: usize) -> Tps {
        if order >= self.sp.order {
            return self.clone();
        }
        let sp = TpsSpace::get(self.sp.n, order);
        Tps { sp, c: self.c[..sp.len()].to_vec() }
    }

    /// `∂_v` as a series of one lower order.
    pub fn deriv(&self, v: usize) -> Tps {
        assert!(self.sp.order > 0, "cannot differentiate an order-0 series");
        let sp = TpsSpace::get(self.sp.n, self.sp.order - 1);
        let mut c = vec![0.0; sp.len()];
        for &(src, dst, f) in &self.sp.deriv[v] {
            c[dst as usize] += f * self.c[src as usize];
        }
        Tps { sp, c }
    }

    pub fn scale(&self, s: f64) -> Tps {
        Tps { sp: self.sp, c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Tps {
        let mut t = self.clone();
        t.c[0] += s;
        t
    }

    fn common(a: &Tps, b: &Tps) -> &'static TpsSpace {
        debug_assert_eq!(a.sp.n, b.sp.n);
        if a.sp.order <= b.sp.order {
            a.sp
        } else {
            b.sp
        }
    }

    /// `self += s * a * b`, truncated at the order of `self`.
    pub fn add_product(&mut self, s: f64, a: &Tps, b: &Tps) {
        let sp = if self.sp.order <= a.sp.order.min(b.sp.order) { self.sp } else { Tps::common(a, b) };
        for &(i, j, k) in &sp.mul {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            if k < self.c.len() {
                let ai = a.c[i];
                if ai != 0.0 {
                    self.c[k] += s * ai * b.c[j];
                }
            }
        }
    }

    /// `self += s * a`, truncated at the order of `self`.
    pub fn add_scaled(&mut self, s: f64, a: &Tps) {
        let m = self.c.len().min(a.c.len());
        for i in 0..m {
            self.c[i] += s * a.c[i];
        }
    }

    /// `f(self)` given `derivs[j] = f^(j)(self.value())` for `j = 0..=order`.
    pub fn compose(&self, derivs: &[f64]) -> Tps {
        let order = self.sp.order;
        let mut delta = self.clone();
        delta.c[0] = 0.0;
        let mut out = Tps { sp: self.sp, c: vec![0.0; self.c.len()] };
        out.c[0] = derivs[0];
        let mut power = Tps::constant(self.sp.n, order, 1.0);
        let mut jfact = 1.0;
        for (j, d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            power = &power * &delta;
            jfact *= j as f64;
            out.add_scaled(d / jfact, &power);
        }
        out
    }

    pub fn powf(&self, a: f64) -> Tps {
        let x = self.value();
        let mut d = Vec::with_capacity(self.sp.order + 1);
        let mut coef = 1.0;
        for j in 0..=self.sp.order {
            d.push(coef * x.powf(a - j as f64));
            coef *= a - j as f64;
        }
        self.compose(&d)
    }

    pub fn powi(&self, k: i32) -> Tps {
        if k >= 0 {
            let mut out = Tps::constant(self.sp.n, self.sp.order, 1.0);
            for _ in 0..k {
                out = &out * self;
            }
            out
        } else {
            self.powf(k as f64)
        }
    }

    pub fn recip(&self) -> Tps {
        self.powf(-1.0)
    }

    pub fn sqrt(&self) -> Tps {
        self.powf(0.5)
    }

    pub fn exp(&self) -> Tps {
        let e = self.value().exp();
        self.compose(&vec![e; self.sp.order + 1])
    }

    pub fn ln(&self) -> Tps {
        let x = self.value();
        let mut d = vec![x.ln()];
        let mut coef = 1.0;
        for j in 1..=self.sp.order {
            d.push(coef * x.powi(-(j as i32)));
            coef *= -(j as f64);
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Tps {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose(&(0..=self.sp.order).map(|j| cycle[j % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Tps {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose(&(0..=self.sp.order).map(|j| cycle[j % 4]).collect::<Vec<_>>())
    }

    pub fn div(&self, other: &Tps) -> Tps {
        self * &other.recip()
    }

    /// Evaluates the polynomial `Σ c_α δ^α` with `δ` given as series in other
    /// variables (one per variable of `self`). With `δ = Φ(y) - Φ(y0)` this is
    /// the composition `f ∘ Φ`; constant terms in `δ` are allowed.
    pub fn substitute(&self, delta: &[Tps]) -> Tps {
        assert_eq!(delta.len(), self.sp.n);
        let ny = delta[0].sp.n;
        let order = delta[0].sp.order;
        let mut out = Tps::zero(ny, order);
        // monomials of delta, built incrementally in the monomial ordering
        let mut powers: Vec<Tps> = Vec::with_capacity(self.c.len());
        for i in 0..self.c.len() {
            let e = &self.sp.exps[i];
            let p = if i == 0 {
                Tps::constant(ny, order, 1.0)
            } else {
                let v = (0..self.sp.n).rev().find(|&v| e[v] > 0).unwrap();
                let mut f = *e;
                f[v] -= 1;
                let prev = monomials(self.sp.n).index[&f] as usize;
                &powers[prev] * &delta[v]
            };
            if self.c[i] != 0.0 {
                out.add_scaled(self.c[i], &p);
            }
            powers.push(p);
        }
        out
    }
}

impl Add for &Tps {
    type Output = Tps;
    fn add(self, o: &Tps) -> Tps {
        let sp = Tps::common(self, o);
        let c = (0..sp.len()).map(|i| self.c[i] + o.c[i]).collect();
        Tps { sp, c }
    }
}

impl Sub for &Tps {
    type Output = Tps;
    fn sub(self, o: &Tps) -> Tps {
        let sp = Tps::common(self, o);
        let c = (0..sp.len()).map(|i| self.c[i] - o.c[i]).collect();
        Tps { sp, c }
    }
}

impl Mul for &Tps {
    type Output = Tps;
    fn mul(self, o: &Tps) -> Tps {
        let sp = Tps::common(self, o);
        let mut out = Tps { sp, c: vec![0.0; sp.len()] };
        out.add_product(1.0, self, o);
        out
    }
}

impl Neg for &Tps {
    type Output = Tps;
    fn neg(self) -> Tps {
        self.scale(-1.0)
    }
}

impl Add for Tps {
    type Output = Tps;
    fn add(self, o: Tps) -> Tps {
        &self + &o
    }
}

impl Sub for Tps {
    type Output = Tps;
    fn sub(self, o: Tps) -> Tps {
        &self - &o
    }
}

impl Mul for Tps {
    type Output = Tps;
    fn mul(self, o: Tps) -> Tps {
        &self * &o
    }
}

impl Neg for Tps {
    type Output = Tps;
    fn neg(self) -> Tps {
        self.scale(-1.0)
    }
}

impl AddAssign<&Tps> for Tps {
    fn add_assign(&mut self, o: &Tps) {
        self.add_scaled(1.0, o);
    }
}
