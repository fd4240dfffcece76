//! The six commands. Each validates its config, runs the computation, prints
//! a short table and writes its artifacts.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use asymflat::chartchange::{
    harmonic_zeta, identity_diffeo, injectivity_radius, invariance_report, isometry, make_diffeo, radial_zeta, ClosedZeta,
    Diffeo, InvarianceReport,
};
use asymflat::fields::{make_flat, make_rt_perturbation, make_schwarzschild, random_orthogonal};
use asymflat::gbc::GbcContext;
use asymflat::invariants::{
    calibration, curvature_center, curvature_center_ratios, gbc_center, gbc_mass, InvariantResult,
};
use asymflat::parity::{rt_check_with, ParityReport};
use asymflat::verify::{self, VerifyReport};
use asymflat::MetricField;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ConfigError, DiffeoKind, ExperimentConfig, Family};
use crate::output::{emit, join_csv};

/// `|C^α|` below this is treated as zero when forming curvature-center ratios.
pub const RATIO_FLOOR: f64 = 1e-8;
/// `sup|∂ζ|` allowed at the default inner radius of a diffeomorphism.
pub const ZETA_GRADIENT_BOUND: f64 = 0.5;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Compute(asymflat::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<asymflat::Error> for CliError {
    fn from(e: asymflat::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// What a command produced: whether every result converged and every check
/// passed, and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub clean: bool,
    pub written: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Mass,
    Center,
    Curvcenter,
    Verify,
    Invariance,
    Rtcheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mass => "mass",
            Command::Center => "center",
            Command::Curvcenter => "curvcenter",
            Command::Verify => "verify",
            Command::Invariance => "invariance",
            Command::Rtcheck => "rtcheck",
        }
    }
}

pub fn run_command(cmd: Command, c: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    c.validate()?;
    match cmd {
        Command::Mass => cmd_mass(c, out, err),
        Command::Center => cmd_center(c, out, err),
        Command::Curvcenter => cmd_curvcenter(c, out, err),
        Command::Verify => cmd_verify(c, out),
        Command::Invariance => cmd_invariance(c, out, err),
        Command::Rtcheck => cmd_rtcheck(c, out),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The metric described by `[metric]`.
pub fn build_metric(c: &ExperimentConfig) -> Result<MetricField, CliError> {
    let m = &c.metric;
    Ok(match m.family {
        Family::Flat => make_flat(c.n)?,
        Family::Schwarzschild => {
            c.validate_invariant()?;
            let rotation = m.rotate.then(|| random_orthogonal(c.n, &mut rng(c.seed)));
            make_schwarzschild(c.n, c.k, m.mass, &c.center(), rotation.as_deref())?
        }
        Family::Perturbation => make_rt_perturbation(c.n, m.tau, c.seed, m.parity, m.amplitude, m.r_min)?,
    })
}

/// The diffeomorphism described by `[diffeo]`.
pub fn build_diffeo(c: &ExperimentConfig) -> Result<Diffeo, CliError> {
    let d = &c.diffeo;
    let n = c.n;
    let q = if d.rotate {
        random_orthogonal(n, &mut rng(c.seed.wrapping_add(1)))
    } else {
        (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect()
    };
    let t = c.translation();
    let zeta: ClosedZeta = match d.kind {
        DiffeoKind::Identity => return Ok(identity_diffeo(n)),
        DiffeoKind::Isometry => return Ok(isometry(&q, &t)?),
        DiffeoKind::Radial => radial_zeta(n, d.amplitude, d.tau_prime),
        DiffeoKind::Harmonic => harmonic_zeta(n, d.tau_prime, c.seed.wrapping_add(2), d.parity, d.amplitude),
    };
    let r = match d.r_valid {
        Some(r) => r,
        None => injectivity_radius(&zeta, 1.0, ZETA_GRADIENT_BOUND)?,
    };
    let label = match d.kind {
        DiffeoKind::Radial => "radial",
        _ => "harmonic",
    };
    Ok(make_diffeo(&q, &t, Arc::new(zeta), d.tau_prime, r, label)?)
}

fn context(c: &ExperimentConfig) -> Result<GbcContext, CliError> {
    c.validate_invariant()?;
    Ok(GbcContext::new(c.n, c.k)?)
}

fn clean(r: &InvariantResult) -> bool {
    !r.flagged() && r.warnings.is_empty()
}

fn print_warnings(err: &mut dyn Write, results: &[&InvariantResult]) -> std::io::Result<()> {
    for r in results {
        for w in &r.warnings {
            writeln!(err, "warning: {}: {w}", r.name)?;
        }
    }
    Ok(())
}

fn print_table(out: &mut dyn Write, results: &[&InvariantResult]) -> std::io::Result<()> {
    write!(out, "{:>12}", "r")?;
    for r in results {
        write!(out, " {:>22}", r.name)?;
    }
    writeln!(out)?;
    for i in 0..results.first().map_or(0, |r| r.per_radius.len()) {
        write!(out, "{:>12}", results[0].per_radius[i].r)?;
        for r in results {
            let s = &r.per_radius[i];
            write!(out, " {:>21.12e}{}", s.value, if s.converged { ' ' } else { '*' })?;
        }
        writeln!(out)?;
    }
    write!(out, "{:>12}", "limit")?;
    for r in results {
        write!(out, " {:>21.12e} ", r.limit)?;
    }
    writeln!(out)?;
    write!(out, "{:>12}", "±")?;
    for r in results {
        write!(out, " {:>21.2e} ", r.fit.predicted.abs().max(r.fit.residual))?;
    }
    writeln!(out)
}

fn cmd_mass(c: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    let ctx = context(c)?;
    let g = build_metric(c)?;
    let mass = gbc_mass(&g, &ctx, &c.schedule.schedule())?;
    writeln!(out, "{}", g.describe())?;
    print_table(out, &[&mass])?;
    print_warnings(err, &[&mass])?;
    let written = emit("mass", c, &mass, &mass.to_csv())?;
    Ok(Outcome { clean: clean(&mass), written })
}

#[derive(Serialize)]
struct CenterOutput<'a> {
    mass: &'a InvariantResult,
    center_limit: Vec<f64>,
    center: &'a [InvariantResult],
}

fn cmd_center(c: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    let ctx = context(c)?;
    let g = build_metric(c)?;
    let sched = c.schedule.schedule();
    let mass = gbc_mass(&g, &ctx, &sched)?;
    let center = gbc_center(&g, &ctx, &sched, &mass)?;
    let center_limit: Vec<f64> = center.iter().map(|r| r.limit).collect();
    writeln!(out, "{}", g.describe())?;
    let all: Vec<&InvariantResult> = std::iter::once(&mass).chain(&center).collect();
    print_table(out, &all)?;
    writeln!(out, "C_{} = {:?}", c.k, center_limit)?;
    print_warnings(err, &all)?;
    let csv = join_csv(all.iter().map(|r| r.to_csv()).collect::<Vec<_>>().iter().map(String::as_str));
    let written = emit("center", c, &CenterOutput { mass: &mass, center_limit, center: &center }, &csv)?;
    Ok(Outcome { clean: all.iter().all(|r| clean(r)), written })
}

#[derive(Serialize)]
struct CurvCenterOutput<'a> {
    mass: &'a InvariantResult,
    center: &'a [InvariantResult],
    curvature_center: &'a [InvariantResult],
    /// `lim ∫T_k(X^α, ν) / (m_k C^α_k)` per axis, `None` where `C^α` vanishes.
    ratios: Vec<Option<f64>>,
    /// The shipped constant, if this `(n, k)` was calibrated.
    expected: Option<f64>,
}

fn cmd_curvcenter(c: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    let ctx = context(c)?;
    let g = build_metric(c)?;
    let sched = c.schedule.schedule();
    let mass = gbc_mass(&g, &ctx, &sched)?;
    let center = gbc_center(&g, &ctx, &sched, &mass)?;
    let curv = curvature_center(&g, &ctx, &sched)?;
    let ratios = curvature_center_ratios(&curv, &center, &mass, RATIO_FLOOR);
    let expected = calibration(c.n, c.k).ok().map(|cal| cal.b);
    writeln!(out, "{}", g.describe())?;
    let all: Vec<&InvariantResult> = std::iter::once(&mass).chain(&center).chain(&curv).collect();
    print_table(out, &all)?;
    for (i, r) in ratios.iter().enumerate() {
        match r {
            Some(v) => writeln!(out, "ratio[{}] = {v:.9e}", i + 1)?,
            None => writeln!(out, "ratio[{}] = undefined (C vanishes)", i + 1)?,
        }
    }
    if let Some(b) = expected {
        writeln!(out, "calibrated constant = {b:.9e}")?;
    }
    print_warnings(err, &all)?;
    let csv = join_csv(all.iter().map(|r| r.to_csv()).collect::<Vec<_>>().iter().map(String::as_str));
    let doc = CurvCenterOutput { mass: &mass, center: &center, curvature_center: &curv, ratios, expected };
    let written = emit("curvcenter", c, &doc, &csv)?;
    Ok(Outcome { clean: all.iter().all(|r| clean(r)), written })
}

fn cmd_verify(c: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let report: VerifyReport = verify::run(c.n, c.verify.samples, c.seed)?;
    let mut names: Vec<&str> = report.checks.iter().map(|x| x.identity.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    writeln!(out, "{:<28} {:>6} {:>6} {:>10}", "identity", "cells", "pass", "max error")?;
    for name in names {
        let cells: Vec<_> = report.checks.iter().filter(|x| x.identity == name).collect();
        let passed = cells.iter().filter(|x| x.pass).count();
        let worst = cells.iter().map(|x| x.max_error).fold(0.0, f64::max);
        writeln!(out, "{name:<28} {:>6} {passed:>6} {worst:>10.2e}", cells.len())?;
    }
    for f in report.failures() {
        writeln!(out, "FAIL {} at (n,p,q) = ({},{},{}): {:.3e} > {:.1e}", f.identity, f.n, f.p, f.q, f.max_error, f.tolerance)?;
    }
    writeln!(out, "{}", if report.all_pass() { "all identities pass" } else { "some identities FAIL" })?;
    let written = emit("verify", c, &report, &report.to_csv())?;
    Ok(Outcome { clean: report.all_pass(), written })
}

fn cmd_invariance(c: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<Outcome, CliError> {
    let ctx = context(c)?;
    let g = build_metric(c)?;
    let phi = build_diffeo(c)?;
    let report: InvarianceReport = invariance_report(&g, &phi, &ctx, &c.schedule.schedule(), c.diffeo.center)?;
    writeln!(out, "{}", report.metric)?;
    writeln!(out, "{}", report.diffeo)?;
    writeln!(out, "{:>12} {:>14} {:>14}", "r", "delta mass", "delta center")?;
    for (i, r) in report.radii.iter().enumerate() {
        let dc = report.delta_center.as_ref().map_or(String::from("-"), |d| format!("{:.6e}", d[i]));
        writeln!(out, "{r:>12} {:>14.6e} {dc:>14}", report.delta_mass[i])?;
    }
    writeln!(out, "extrapolated delta mass = {:.6e} (tolerance {:.1e})", report.delta_mass_limit, report.mass_tolerance)?;
    if let Some(d) = report.delta_center_limit {
        writeln!(out, "extrapolated delta center = {d:.6e} (tolerance {:.1e})", report.center_tolerance)?;
    }
    writeln!(out, "{}", if report.pass { "invariance holds" } else { "invariance FAILS or drifts" })?;
    for w in &report.warnings {
        writeln!(err, "warning: {w}")?;
    }
    let written = emit("invariance", c, &report, &report.to_csv())?;
    Ok(Outcome { clean: report.pass, written })
}

fn slope(s: Option<f64>) -> String {
    s.map_or("-inf".into(), |v| format!("{v:.4}"))
}

fn cmd_rtcheck(c: &ExperimentConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let g = build_metric(c)?;
    let tau = c.rtcheck.tau.unwrap_or(g.tau());
    let radii = c.schedule.schedule().radii;
    let reports: Vec<ParityReport> = rt_check_with(&g, tau, c.rtcheck.ell, &radii, c.rtcheck.samples)?;
    writeln!(out, "{} tested at tau = {tau}", g.describe())?;
    let mut csv = String::from("component,order,full_slope,even_slope,odd_slope,required_full,required_odd,pass\n");
    writeln!(out, "{:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>5}", "part", "full", "even", "odd", "need", "need odd", "pass")?;
    for r in &reports {
        let row = [slope(r.full_slope), slope(r.even_slope), slope(r.odd_slope)];
        writeln!(
            out,
            "{:>6} {:>10} {:>10} {:>10} {:>10.4} {:>10.4} {:>5}",
            r.component, row[0], row[1], row[2], r.required_full, r.required_odd, r.pass
        )?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.component, r.order, row[0], row[1], row[2], r.required_full, r.required_odd, r.pass
        ));
    }
    let pass = reports.iter().all(|r| r.pass);
    writeln!(out, "{}", if pass { "RT conditions hold" } else { "RT conditions FAIL" })?;
    let written = emit("rtcheck", c, &reports, &csv)?;
    Ok(Outcome { clean: pass, written })
}
