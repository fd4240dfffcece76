//! Limits `r → ∞` from finite-radius samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Form of the fitted model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `v(r) = c_0 + Σ_{j=1}^{J} c_j r^{-js}`
    Additive,
    /// `v(r) = c_0 exp(Σ_{j=1}^{J} c_j r^{-js})`, for samples of one sign.
    Multiplicative,
}

/// Outcome of a fit in powers of `r^{-s}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub model: FitModel,
    /// Decay exponent `s`; `None` when the samples are constant.
    pub exponent: Option<f64>,
    /// Number of correction terms `J`.
    pub terms: usize,
    /// Largest absolute misfit over the samples.
    pub residual: f64,
    /// Predicted error of the limit: its change when the last correction term
    /// is dropped.
    pub predicted: f64,
    pub degenerate: bool,
    /// The residual exceeds ten times the prediction, or the prediction
    /// exceeds [`FIT_TOLERANCE`] relative to the limit.
    pub flagged: bool,
}

/// Two-parameter fit `c_0 + c_1 r^{-s}` with `s > 0` fitted.
pub fn extrapolate(samples: &[(f64, f64)]) -> Result<Extrapolation> {
    check_samples(samples)?;
    if let Some(e) = constant(samples) {
        return Ok(e);
    }
    // Golden-section search in log s on the sum of squared misfits.
    let cost = |ls: f64| fit_series(samples, ls.exp(), 1).map(|(_, sse)| sse).unwrap_or(f64::INFINITY);
    let grid: Vec<f64> = (0..=60).map(|i| (0.02f64).ln() + i as f64 * ((8.0f64).ln() - (0.02f64).ln()) / 60.0).collect();
    let best = grid.iter().copied().min_by(|a, b| cost(*a).total_cmp(&cost(*b))).expect("grid");
    let step = grid[1] - grid[0];
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    extrapolate_with(samples, ((a + b) / 2.0).exp(), 1)
}

/// Relative change of the limit, when the last correction term is dropped,
/// above which a fit is flagged as unconverged.
pub const FIT_TOLERANCE: f64 = 1e-2;

/// Absolute floor for [`FIT_TOLERANCE`], for limits close to zero.
pub const FIT_FLOOR: f64 = 1e-8;

/// Fit of the additive model with a known exponent `s` and `terms`
/// correction terms.
pub fn extrapolate_with(samples: &[(f64, f64)], s: f64, terms: usize) -> Result<Extrapolation> {
    check_fit(samples, s, terms)?;
    if let Some(e) = constant(samples) {
        return Ok(e);
    }
    let (limit, residual) = fit_model(samples, s, terms, FitModel::Additive)?;
    Ok(finish(samples, s, terms, FitModel::Additive, limit, residual))
}

/// Fits both models with exponent `s` and keeps the one with the smaller
/// residual. The multiplicative model is tried only when every sample has the
/// same sign; it resolves slowly converging power-law families such as
/// `(1 + a r^{-s})^q` from few radii.
pub fn extrapolate_auto(samples: &[(f64, f64)], s: f64, terms: usize) -> Result<Extrapolation> {
    let add = extrapolate_with(samples, s, terms)?;
    if add.degenerate {
        return Ok(add);
    }
    let sign = samples[0].1.signum();
    if sign == 0.0 || samples.iter().any(|p| p.1.signum() != sign) {
        return Ok(add);
    }
    match fit_model(samples, s, terms, FitModel::Multiplicative) {
        Ok((limit, residual)) if residual < add.residual => {
            Ok(finish(samples, s, terms, FitModel::Multiplicative, limit, residual))
        }
        _ => Ok(add),
    }
}

fn check_fit(samples: &[(f64, f64)], s: f64, terms: usize) -> Result<()> {
    check_samples(samples)?;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateFit(format!("exponent must be positive, got {s}")));
    }
    if terms == 0 || terms + 1 > samples.len() {
        return Err(Error::DegenerateFit(format!("{terms} terms need at least {} samples", terms + 1)));
    }
    Ok(())
}

/// Error estimate and flags. The prediction is the change of the limit when
/// the last correction term is dropped (the distance to the last sample for a
/// single term).
fn finish(samples: &[(f64, f64)], s: f64, terms: usize, model: FitModel, limit: f64, residual: f64) -> Extrapolation {
    let scale = samples.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let coarse = if terms > 1 {
        fit_model(samples, s, terms - 1, model).map(|p| p.0).unwrap_or(samples[samples.len() - 1].1)
    } else {
        samples[samples.len() - 1].1
    };
    let predicted = (limit - coarse).abs() + 1e-12 * scale;
    let flagged = (samples.len() > terms + 1 && residual > 10.0 * predicted)
        || predicted > FIT_TOLERANCE * limit.abs() + FIT_FLOOR;
    Extrapolation { limit, model, exponent: Some(s), terms, residual, predicted, degenerate: false, flagged }
}

/// Limit and largest misfit of one model.
fn fit_model(samples: &[(f64, f64)], s: f64, terms: usize, model: FitModel) -> Result<(f64, f64)> {
    let r0 = samples[0].0;
    match model {
        FitModel::Additive => {
            let (coef, _) = fit_series(samples, s, terms)?;
            let residual = samples.iter().map(|&(r, v)| (series(&coef, s, r0, r) - v).abs()).fold(0.0, f64::max);
            Ok((coef[0], residual))
        }
        FitModel::Multiplicative => {
            let sign = samples[0].1.signum();
            let logs: Vec<(f64, f64)> = samples.iter().map(|&(r, v)| (r, (v * sign).ln())).collect();
            let (coef, _) = fit_series(&logs, s, terms)?;
            let residual = samples
                .iter()
                .map(|&(r, v)| (sign * series(&coef, s, r0, r).exp() - v).abs())
                .fold(0.0, f64::max);
            Ok((sign * coef[0].exp(), residual))
        }
    }
}

fn check_samples(samples: &[(f64, f64)]) -> Result<()> {
    if samples.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 samples, got {}", samples.len())));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) || !(samples[0].0 > 0.0) {
        return Err(Error::DegenerateFit("radii must be positive and increasing".into()));
    }
    if samples.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::DegenerateFit("non-finite sample".into()));
    }
    Ok(())
}

fn constant(samples: &[(f64, f64)]) -> Option<Extrapolation> {
    let v0 = samples[0].1;
    let spread = samples.iter().map(|p| (p.1 - v0).abs()).fold(0.0, f64::max);
    (spread <= 1e-15 * v0.abs()).then_some(Extrapolation {
        limit: v0,
        model: FitModel::Additive,
        exponent: None,
        terms: 0,
        residual: spread,
        predicted: 0.0,
        degenerate: true,
        flagged: false,
    })
}

fn series(coef: &[f64], s: f64, r0: f64, r: f64) -> f64 {
    let u = (r / r0).powf(-s);
    coef.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// Least squares in `u = (r/r_0)^{-s}` by Householder QR. Returns the
/// coefficients and the sum of squared misfits.
fn fit_series(samples: &[(f64, f64)], s: f64, terms: usize) -> Result<(Vec<f64>, f64)> {
    let rows = samples.len();
    let cols = terms + 1;
    let r0 = samples[0].0;
    let mut a: Vec<Vec<f64>> = samples
        .iter()
        .map(|&(r, _)| {
            let u = (r / r0).powf(-s);
            (0..cols).map(|j| u.powi(j as i32)).collect()
        })
        .collect();
    let mut y: Vec<f64> = samples.iter().map(|p| p.1).collect();
    for c in 0..cols {
        let norm = (c..rows).map(|i| a[i][c] * a[i][c]).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::DegenerateFit("rank-deficient design".into()));
        }
        let alpha = if a[c][c] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (c..rows).map(|i| a[i][c]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        if vv > 0.0 {
            for cc in c..cols {
                let dot: f64 = (c..rows).map(|i| v[i - c] * a[i][cc]).sum();
                for i in c..rows {
                    a[i][cc] -= 2.0 * dot / vv * v[i - c];
                }
            }
            let dot: f64 = (c..rows).map(|i| v[i - c] * y[i]).sum();
            for i in c..rows {
                y[i] -= 2.0 * dot / vv * v[i - c];
            }
        }
    }
    let mut coef = vec![0.0; cols];
    for c in (0..cols).rev() {
        let mut t = y[c];
        for j in c + 1..cols {
            t -= a[c][j] * coef[j];
        }
        if a[c][c].abs() < 1e-14 * a[0][0].abs() {
            return Err(Error::DegenerateFit("rank-deficient design".into()));
        }
        coef[c] = t / a[c][c];
    }
    let sse = y[cols..].iter().map(|t| t * t).sum();
    Ok((coef, sse))
}
