//! Experiment configuration: a TOML document whose keys all have defaults,
//! overridden by command-line flags and validated before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use asymflat::invariants::Schedule;
use asymflat::Parity;
use serde::{Deserialize, Serialize};

/// A rejected configuration value, naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError { field: field.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Schwarzschild,
    Flat,
    /// Seeded harmonic perturbation of the Euclidean metric.
    Perturbation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffeoKind {
    Identity,
    Isometry,
    /// `ζ = c x |x|^{-τ'}` composed with the isometry.
    Radial,
    /// Harmonic polynomial `ζ` of the chosen parity, composed with the isometry.
    Harmonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub family: Family,
    /// Schwarzschild mass parameter.
    pub mass: f64,
    /// Schwarzschild center; empty means the origin.
    pub center: Vec<f64>,
    /// Apply a random rotation (drawn from `seed`) to the Schwarzschild field.
    pub rotate: bool,
    /// Decay order of the perturbation family.
    pub tau: f64,
    pub parity: Parity,
    pub amplitude: f64,
    /// Inner radius of the perturbation chart.
    pub r_min: f64,
}

impl Default for MetricSpec {
    fn default() -> Self {
        MetricSpec {
            family: Family::Schwarzschild,
            mass: 1.0,
            center: Vec::new(),
            rotate: false,
            tau: 1.0,
            parity: Parity::Mixed,
            amplitude: 0.2,
            r_min: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    /// First radius of the dyadic schedule `r0 · 2^j`.
    pub r0: f64,
    /// Number of radii.
    pub count: usize,
    /// Starting quadrature level.
    pub level: usize,
    pub max_level: usize,
    pub max_nodes: usize,
    pub fit_terms: usize,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        let s = Schedule::standard();
        ScheduleSpec {
            r0: s.radii[0],
            count: s.radii.len(),
            level: s.level,
            max_level: s.max_level,
            max_nodes: s.max_nodes,
            fit_terms: s.fit_terms,
        }
    }
}

impl ScheduleSpec {
    pub fn schedule(&self) -> Schedule {
        let mut s = Schedule::dyadic(self.r0, self.count, self.level);
        s.max_level = self.max_level;
        s.max_nodes = self.max_nodes;
        s.fit_terms = self.fit_terms;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffeoSpec {
    pub kind: DiffeoKind,
    /// Random rotation drawn from `seed`; otherwise the identity.
    pub rotate: bool,
    /// Empty means no translation.
    pub translation: Vec<f64>,
    /// Decay order of `ζ`.
    pub tau_prime: f64,
    pub amplitude: f64,
    pub parity: Parity,
    /// Inner radius of the diffeomorphism; by default the radius past which
    /// `sup|∂ζ| ≤ 1/2`.
    pub r_valid: Option<f64>,
    /// Also compare centers of mass.
    pub center: bool,
}

impl Default for DiffeoSpec {
    fn default() -> Self {
        DiffeoSpec {
            kind: DiffeoKind::Harmonic,
            rotate: true,
            translation: Vec::new(),
            tau_prime: 1.0,
            amplitude: 0.5,
            parity: Parity::Mixed,
            r_valid: None,
            center: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Random forms per identity and bidegree.
    pub samples: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec { samples: asymflat::verify::DEFAULT_SAMPLES }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RtSpec {
    /// Decay order to test; defaults to the metric's own.
    pub tau: Option<f64>,
    /// Highest derivative order.
    pub ell: usize,
    /// Directions per sphere.
    pub samples: usize,
}

impl Default for RtSpec {
    fn default() -> Self {
        RtSpec { tau: None, ell: 2, samples: 96 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub format: Format,
    /// Exit with status 2 when a result is flagged or a check fails.
    pub strict: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), format: Format::Both, strict: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    /// Seeds every random choice (rotations, perturbations, ζ, identity samples).
    pub seed: u64,
    pub metric: MetricSpec,
    pub schedule: ScheduleSpec,
    pub diffeo: DiffeoSpec,
    pub verify: VerifySpec,
    pub rtcheck: RtSpec,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 3,
            k: 1,
            seed: 0,
            metric: MetricSpec::default(),
            schedule: ScheduleSpec::default(),
            diffeo: DiffeoSpec::default(),
            verify: VerifySpec::default(),
            rtcheck: RtSpec::default(),
            output: OutputSpec::default(),
        }
    }
}

/// Command-line overrides; `None` leaves the config value alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub radii: Option<(f64, usize)>,
    pub level: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub strict: bool,
}

/// Parses `r0:levels`, e.g. `20:5` for radii 20, 40, .., 320.
pub fn parse_radii(s: &str) -> Result<(f64, usize), ConfigError> {
    let bad = |why: &str| ConfigError::new("radii", format!("`{s}`: {why} (expected r0:levels)"));
    let (a, b) = s.split_once(':').ok_or_else(|| bad("missing `:`"))?;
    let r0: f64 = a.trim().parse().map_err(|_| bad("r0 is not a number"))?;
    let count: usize = b.trim().parse().map_err(|_| bad("levels is not a count"))?;
    Ok((r0, count))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = unknown_field(&msg).unwrap_or_else(|| "config".into());
            ConfigError::new(field, msg)
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.n {
            self.n = n;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some((r0, count)) = o.radii {
            self.schedule.r0 = r0;
            self.schedule.count = count;
        }
        if let Some(level) = o.level {
            self.schedule.level = level;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        self.output.strict |= o.strict;
    }

    /// Checks shared by every command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=asymflat::dforms::MAX_DIM).contains(&self.n) {
            return Err(ConfigError::new("n", format!("must lie in 2..={}", asymflat::dforms::MAX_DIM)));
        }
        let s = &self.schedule;
        if !(s.r0.is_finite() && s.r0 > 0.0) {
            return Err(ConfigError::new("schedule.r0", "must be positive"));
        }
        if s.count < 4 {
            return Err(ConfigError::new("schedule.count", "need at least 4 radii"));
        }
        if s.level == 0 || s.level > s.max_level {
            return Err(ConfigError::new("schedule.level", "must lie in 1..=max_level"));
        }
        if s.fit_terms == 0 {
            return Err(ConfigError::new("schedule.fit_terms", "must be positive"));
        }
        let m = &self.metric;
        if !m.center.is_empty() && m.center.len() != self.n {
            return Err(ConfigError::new("metric.center", format!("needs {} entries", self.n)));
        }
        if !m.mass.is_finite() {
            return Err(ConfigError::new("metric.mass", "must be finite"));
        }
        if !(m.tau > 0.0 && m.tau.is_finite()) {
            return Err(ConfigError::new("metric.tau", "must be positive"));
        }
        if !(m.r_min > 0.0 && m.r_min.is_finite()) {
            return Err(ConfigError::new("metric.r_min", "must be positive"));
        }
        if !m.amplitude.is_finite() {
            return Err(ConfigError::new("metric.amplitude", "must be finite"));
        }
        let d = &self.diffeo;
        if !d.translation.is_empty() && d.translation.len() != self.n {
            return Err(ConfigError::new("diffeo.translation", format!("needs {} entries", self.n)));
        }
        if !(d.tau_prime > 0.0) {
            return Err(ConfigError::new("diffeo.tau_prime", "must be positive"));
        }
        if !d.amplitude.is_finite() {
            return Err(ConfigError::new("diffeo.amplitude", "must be finite"));
        }
        if let Some(r) = d.r_valid {
            if !(r > 0.0 && r.is_finite()) {
                return Err(ConfigError::new("diffeo.r_valid", "must be positive"));
            }
        }
        if self.verify.samples == 0 {
            return Err(ConfigError::new("verify.samples", "must be positive"));
        }
        if let Some(t) = self.rtcheck.tau {
            if !(t > 0.0) {
                return Err(ConfigError::new("rtcheck.tau", "must be positive"));
            }
        }
        if self.rtcheck.samples == 0 {
            return Err(ConfigError::new("rtcheck.samples", "must be positive"));
        }
        Ok(())
    }

    /// Extra checks for the invariant commands.
    pub fn validate_invariant(&self) -> Result<(), ConfigError> {
        if self.k == 0 || self.n <= 2 * self.k {
            return Err(ConfigError::new("k", format!("need 1 <= k and n > 2k, got n={}, k={}", self.n, self.k)));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        if self.metric.center.is_empty() {
            vec![0.0; self.n]
        } else {
            self.metric.center.clone()
        }
    }

    pub fn translation(&self) -> Vec<f64> {
        if self.diffeo.translation.is_empty() {
            vec![0.0; self.n]
        } else {
            self.diffeo.translation.clone()
        }
    }
}

/// Pulls the key name out of toml's "unknown field `x`" message.
fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}
