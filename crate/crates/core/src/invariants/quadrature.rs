//! Product rules on coordinate spheres and compensated accumulation.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dimensions accepted by the sphere rules.
pub const SPHERE_DIMS: std::ops::RangeInclusive<usize> = 3..=8;

/// One node of a sphere rule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereNode {
    pub x: Vec<f64>,
    pub weight: f64,
    /// Outward unit normal `x / r`.
    pub normal: Vec<f64>,
}

/// Product rule on the coordinate sphere `S_r ⊂ ℝ^n`.
///
/// Hyperspherical coordinates `x_1 = r cos θ_1`, `x_2 = r sin θ_1 cos θ_2`, ..,
/// with `n-2` polar angles and one azimuth. Each polar angle `θ_j` carries the
/// weight `sin^{n-1-j} θ_j`, integrated by an `level`-point Gauss–Jacobi rule in
/// `cos θ_j`; the azimuth uses `2·level` equispaced points. The node set is
/// invariant under `x ↦ -x` with matching weights, so odd integrands cancel
/// to rounding.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub r: f64,
    pub level: usize,
    pub nodes: Vec<SphereNode>,
}

impl SphereRule {
    /// Spherical harmonics of degree up to this value are integrated exactly.
    pub fn degree(&self) -> usize {
        2 * self.level - 1
    }

    pub fn total_weight(&self) -> f64 {
        neumaier_sum(self.nodes.iter().map(|p| p.weight))
    }

    /// `∫ f` for a vector-valued integrand, together with `∫ |f|` per component.
    ///
    /// Nodes are evaluated in parallel; the sum runs in node order so the
    /// result does not depend on the thread count.
    pub fn integrate<F>(&self, dim: usize, f: F) -> Result<Integral>
    where
        F: Fn(&SphereNode) -> Result<Vec<f64>> + Sync,
    {
        let values: Vec<Vec<f64>> = self.nodes.par_iter().map(&f).collect::<Result<_>>()?;
        let mut value = Vec::with_capacity(dim);
        let mut magnitude = Vec::with_capacity(dim);
        for c in 0..dim {
            let terms = values.iter().zip(&self.nodes).map(|(v, p)| p.weight * v[c]);
            value.push(neumaier_sum(terms));
            magnitude.push(neumaier_sum(values.iter().zip(&self.nodes).map(|(v, p)| p.weight * v[c].abs())));
        }
        Ok(Integral { value, magnitude })
    }

    /// Scalar convenience wrapper around [`SphereRule::integrate`].
    pub fn integrate_scalar<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&SphereNode) -> Result<f64> + Sync,
    {
        Ok(self.integrate(1, |p| f(p).map(|v| vec![v]))?.value[0])
    }
}

/// Quadrature output: the integral and the integral of the absolute value.
#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub value: Vec<f64>,
    pub magnitude: Vec<f64>,
}

/// Builds the product rule of the given level on `S_r`.
pub fn sphere_rule(n: usize, r: f64, level: usize) -> Result<SphereRule> {
    if !SPHERE_DIMS.contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    if level == 0 {
        return Err(invalid("level", "must be at least 1"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r", "radius must be positive and finite"));
    }
    let polar: Vec<Vec<(f64, f64)>> = (1..=n - 2).map(|j| polar_rule(n - 1 - j, level)).collect();
    let m = 2 * level;
    let dphi = 2.0 * PI / m as f64;
    let azimuth: Vec<(f64, f64)> = (0..m).map(|a| ((a as f64 + 0.5) * dphi, dphi)).collect();

    let count = level.pow((n - 2) as u32) * m;
    let mut nodes = Vec::with_capacity(count);
    let scale = r.powi(n as i32 - 1);
    let mut idx = vec![0usize; n - 2];
    loop {
        let mut w = scale;
        let mut sines = 1.0;
        let mut unit = vec![0.0; n];
        for (j, &i) in idx.iter().enumerate() {
            let (t, wt) = polar[j][i];
            unit[j] = sines * t;
            sines *= (1.0 - t * t).max(0.0).sqrt();
            w *= wt;
        }
        for &(phi, wp) in &azimuth {
            let mut u = unit.clone();
            u[n - 2] = sines * phi.cos();
            u[n - 1] = sines * phi.sin();
            nodes.push(SphereNode { x: u.iter().map(|v| r * v).collect(), weight: w * wp, normal: u });
        }
        if !advance(&mut idx, level) {
            break;
        }
    }
    Ok(SphereRule { n, r, level, nodes })
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Gauss–Jacobi rule for `∫_{-1}^{1} f(t) (1-t²)^{(m-1)/2} dt`, symmetrised and
/// rescaled to the exact total weight.
fn polar_rule(m: usize, level: usize) -> Vec<(f64, f64)> {
    let alpha = (m as f64 - 1.0) / 2.0;
    let a = FiniteAboveNegOneF64::new(alpha).expect("exponent above -1");
    let rule = GaussJacobi::new(NonZeroUsize::new(level).expect("level > 0"), a, a);
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let len = pairs.len();
    let sym: Vec<(f64, f64)> = (0..len)
        .map(|i| {
            let (t0, w0) = pairs[i];
            let (t1, w1) = pairs[len - 1 - i];
            ((t0 - t1) / 2.0, (w0 + w1) / 2.0)
        })
        .collect();
    // ∫ sin^m θ dθ over [0, π] = ω_{m+1} / ω_m
    let exact = unit_sphere_volume(m + 2) / unit_sphere_volume(m + 1);
    let total: f64 = neumaier_sum(sym.iter().map(|p| p.1));
    sym.into_iter().map(|(t, w)| (t, w * exact / total)).collect()
}

/// `ω_{d-1}`, the volume of the unit sphere in `ℝ^d`, `2π^{d/2} / Γ(d/2)`.
pub fn unit_sphere_volume(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        // ω_{d-1} = 2π/(d-2) · ω_{d-3}
        _ => 2.0 * PI / (d as f64 - 2.0) * unit_sphere_volume(d - 2),
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in it {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub(crate) fn legendre_interval(points: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_quad::GaussLegendre::new(NonZeroUsize::new(points.max(1)).expect("nonzero"));
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    rule.as_node_weight_pairs().iter().map(|&(t, w)| (mid + half * t, half * w)).collect()
}
