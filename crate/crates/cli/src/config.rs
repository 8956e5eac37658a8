use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "lie-taylor", version, about = "Lie-Taylor calculus on matrix groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Taylor data L(alpha) phi(g) up to --order.
    Derive,
    /// Lie-Taylor series at the unit element evaluated at log(--target).
    Taylor,
    /// Majorant coefficients and values at each --radius.
    Majorant,
    /// The seminorm q_r at each --radius.
    Seminorm,
    /// Root-test evidence for entirety (heuristic).
    EntireCheck,
    /// Distance bound to --target and the length of --path.
    Riemann,
    /// Randomized Cauchy estimates on a complex group.
    CauchyCheck,
    /// Steiner chain of --path at --radius.
    Steiner,
    /// Continuation state along --path (or the default path to --target).
    Continue,
    /// Value of the holomorphic extension at --target.
    Extend,
    /// Randomized extension identities against the complexified field.
    VerifyExtension,
    /// Laurent coefficients on U1 and the derivative identity.
    Laurent,
    /// The acceptance battery.
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// JSON file with any of the settings below; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub group: Option<String>,
    /// Catalog name, a JSON field descriptor, or a path to one.
    #[arg(long, global = true)]
    pub field: Option<String>,
    /// exact, quadrature or finite-difference.
    #[arg(long, global = true)]
    pub method: Option<String>,
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[arg(long, global = true)]
    pub shift_order: Option<usize>,
    /// One radius or a comma-separated list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radius: Option<Vec<f64>>,
    /// Matrix as rows of [re, im] pairs, {"exp": span coordinates}, or a
    /// path to a file holding either.
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// List of segments in span coordinates, or a path to a file with one.
    #[arg(long, global = true)]
    pub path: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Settings after merging the config file and the flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub group: Option<String>,
    pub field: Option<serde_json::Value>,
    pub method: Option<String>,
    pub order: Option<usize>,
    pub shift_order: Option<usize>,
    pub radius: Option<Vec<f64>>,
    pub target: Option<serde_json::Value>,
    pub path: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{what}: {msg}")]
    Parse { what: String, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    /// serde_json messages end with the line and column.
    pub fn parse(what: &str, e: &serde_json::Error) -> Self {
        ConfigError::Parse { what: what.into(), msg: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
}

/// A flag value that is inline JSON, a path to a JSON file, or (for
/// `--field`) a bare catalog name.
fn json_or_file(what: &str, raw: &str, bare_ok: bool) -> Result<serde_json::Value, ConfigError> {
    let t = raw.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return serde_json::from_str(raw).map_err(|e| ConfigError::parse(what, &e));
    }
    let p = Path::new(raw);
    if p.is_file() {
        let text = read(p)?;
        return serde_json::from_str(&text).map_err(|e| ConfigError::parse(&format!("{what} file {raw}"), &e));
    }
    if bare_ok {
        return Ok(serde_json::Value::String(raw.into()));
    }
    Err(ConfigError::Invalid(format!("{what} '{raw}' is neither JSON nor a readable file")))
}

impl Cli {
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let f = &self.flags;
        let mut cfg = match &f.config {
            Some(p) => {
                let text = read(p)?;
                serde_json::from_str(&text).map_err(|e| ConfigError::parse(&format!("config {}", p.display()), &e))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &f.group {
            cfg.group = Some(v.clone());
        }
        if let Some(v) = &f.field {
            cfg.field = Some(json_or_file("--field", v, true)?);
        }
        if let Some(v) = &f.method {
            cfg.method = Some(v.clone());
        }
        if f.order.is_some() {
            cfg.order = f.order;
        }
        if f.shift_order.is_some() {
            cfg.shift_order = f.shift_order;
        }
        if let Some(v) = &f.radius {
            cfg.radius = Some(v.clone());
        }
        if let Some(v) = &f.target {
            cfg.target = Some(json_or_file("--target", v, false)?);
        }
        if let Some(v) = &f.path {
            cfg.path = Some(json_or_file("--path", v, false)?);
        }
        if f.seed.is_some() {
            cfg.seed = f.seed;
        }
        if let Some(v) = f.format {
            cfg.format = v;
        }
        if let Some(v) = &f.out {
            cfg.out = Some(v.clone());
        }
        Ok(cfg)
    }
}
