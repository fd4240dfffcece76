//! Pointwise inner products on `ℝⁿ`, with the induced inner products on `Λ^p`.

use super::index::{basis, binomial, MAX_DIM};
use super::Coeff;
use crate::error::{Error, Result};

/// An inner product `G` at a point together with `g^{-1}`, `det G` and the
/// minor tables `Λ^p(G^{-1})[I, J] = det G^{-1}[I, J]` used to raise indices.
///
/// The orientation only affects single-form duality; the double-form Hodge
/// star applies it to both blocks, so it cancels there.
#[derive(Clone, Debug)]
pub struct Metric<T> {
    n: usize,
    g: Vec<T>,
    ginv: Vec<T>,
    det: T,
    orientation: f64,
    /// `None` for the identity matrix.
    inv_minors: Option<Vec<Vec<T>>>,
}

/// Metric with real entries.
pub type PointMetric = Metric<f64>;

impl PointMetric {
    /// Builds from a row-major `n×n` matrix, checking symmetry and positive definiteness.
    pub fn new(g: &[f64], n: usize, orientation: f64) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if g.len() != n * n {
            return Err(Error::DimensionMismatch(g.len(), n * n));
        }
        let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..n {
            for j in 0..i {
                if (g[i * n + j] - g[j * n + i]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if !cholesky_ok(g, n) {
            return Err(Error::NotPositiveDefinite);
        }
        Metric::from_matrix(g.to_vec(), n, orientation)
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1 && n <= MAX_DIM);
        let g: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
        Metric { n, ginv: g.clone(), g, det: 1.0, orientation: 1.0, inv_minors: None }
    }
}

/// Positive definiteness via an attempted Cholesky factorisation.
pub(crate) fn cholesky_ok(g: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = g[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    true
}

impl<T: Coeff> Metric<T> {
    /// Builds from a row-major matrix of coefficients. Only the constant parts
    /// are used for pivoting; positivity is checked on them.
    pub fn from_matrix(g: Vec<T>, n: usize, orientation: f64) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::UnsupportedDimension(n));
        }
        if g.len() != n * n {
            return Err(Error::DimensionMismatch(g.len(), n * n));
        }
        let values: Vec<f64> = g.iter().map(|x| x.value()).collect();
        if !cholesky_ok(&values, n) {
            return Err(Error::NotPositiveDefinite);
        }
        let (ginv, det) = invert(&g, n).ok_or(Error::Singular)?;
        let minors = minor_tables(&ginv, n);
        Ok(Metric { n, g, ginv, det, orientation: orientation.signum(), inv_minors: Some(minors) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        self.inv_minors.is_none()
    }

    pub fn matrix(&self) -> &[T] {
        &self.g
    }

    pub fn inverse(&self) -> &[T] {
        &self.ginv
    }

    pub fn det(&self) -> &T {
        &self.det
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// `det G^{-1}[I, J]` for `|I| = |J| = p`, by lexicographic ranks.
    pub(crate) fn inv_minor(&self, p: usize) -> Option<&[T]> {
        self.inv_minors.as_ref().map(|m| m[p].as_slice())
    }
}

/// Gauss-Jordan inverse and determinant, pivoting on constant parts.
pub fn invert<T: Coeff>(a: &[T], n: usize) -> Option<(Vec<T>, T)> {
    let proto = &a[0];
    let mut m = a.to_vec();
    let mut inv: Vec<T> =
        (0..n * n).map(|i| proto.const_like(if i / n == i % n { 1.0 } else { 0.0 })).collect();
    let mut det = proto.const_like(1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].value().abs().total_cmp(&m[j * n + col].value().abs()))?;
        if m[piv * n + col].value().abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
            det = det.scaled(-1.0);
        }
        det = det.mul(&m[col * n + col]);
        let r = m[col * n + col].recip();
        for j in 0..n {
            m[col * n + j] = m[col * n + j].mul(&r);
            inv[col * n + j] = inv[col * n + j].mul(&r);
        }
        for i in 0..n {
            if i == col || m[i * n + col].is_zero() {
                continue;
            }
            let f = m[i * n + col].clone();
            for j in 0..n {
                let mj = m[col * n + j].clone();
                m[i * n + j].add_product(-1.0, &f, &mj);
                let ij = inv[col * n + j].clone();
                inv[i * n + j].add_product(-1.0, &f, &ij);
            }
        }
    }
    Some((inv, det))
}

/// `Λ^p(A)` for every `p`, by Laplace expansion along the first row index.
pub(crate) fn minor_tables<T: Coeff>(a: &[T], n: usize) -> Vec<Vec<T>> {
    let b = basis(n);
    let proto = &a[0];
    let mut out: Vec<Vec<T>> = vec![vec![proto.const_like(1.0)]];
    for p in 1..=n {
        let w = binomial(n, p);
        let wp = binomial(n, p - 1);
        let prev = &out[p - 1];
        let mut cur = Vec::with_capacity(w * w);
        for &im in &b.by_degree[p] {
            let i0 = im.trailing_zeros() as usize;
            let irest = b.rank[(im & !(1 << i0)) as usize] as usize;
            for &jm in &b.by_degree[p] {
                let mut acc = proto.zero_like();
                let mut bits = jm;
                let mut pos = 0;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let jrest = b.rank[(jm & !(1 << j)) as usize] as usize;
                    let s = if pos % 2 == 0 { 1.0 } else { -1.0 };
                    acc.add_product(s, &a[i0 * n + j], &prev[irest * wp + jrest]);
                    pos += 1;
                }
                cur.push(acc);
            }
        }
        out.push(cur);
    }
    out
}
