//! Library side of the `gbc` binary: argument parsing, configuration and the
//! command implementations, exposed for integration tests.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{run_command, CliError, Command, Outcome};
pub use config::{ConfigError, ExperimentConfig, Format, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

/// Asymptotic invariants of asymptotically flat metrics.
#[derive(Parser, Debug)]
#[command(name = "gbc", version, about)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML experiment config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Dyadic radii `r0:levels`, e.g. 20:5 for 20, 40, .., 320.
    #[arg(long, value_parser = parse_radii_arg)]
    pub radii: Option<(f64, usize)>,
    /// Starting quadrature level.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Exit with status 2 when a result is flagged or a check fails.
    #[arg(long)]
    pub strict: bool,
}

fn parse_radii_arg(s: &str) -> Result<(f64, usize), String> {
    config::parse_radii(s).map_err(|e| e.to_string())
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            n: self.n,
            k: self.k,
            radii: self.radii,
            level: self.level,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            strict: self.strict,
        }
    }

    /// The config file (or defaults) with the flags applied.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        c.apply(&self.overrides());
        Ok(c)
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let config = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match run_command(cli.command, &config, out, err) {
        Ok(outcome) => {
            for p in &outcome.written {
                let _ = writeln!(err, "wrote {}", p.display());
            }
            if !outcome.clean && config.output.strict {
                let _ = writeln!(err, "error: flagged result or failed check (--strict)");
                EXIT_NONCONVERGENCE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_VALIDATION
        }
    }
}
