//! Experiment configuration: a TOML file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Deserialize;

use kleinsplit::regions::Axis;

use crate::error::{CliError, CliResult};
use crate::export::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Serial,
    #[default]
    Parallel,
}

impl FromStr for ExecMode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "serial" => Ok(ExecMode::Serial),
            "parallel" => Ok(ExecMode::Parallel),
            _ => Err(CliError::config(format!("unknown mode {s:?} (expected serial or parallel)"))),
        }
    }
}

/// A point given by name (`"generic"`) or by coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Named(String),
    Coords(Vec<f64>),
}

impl FromStr for PointSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        if s.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && s.parse::<f64>().is_err() {
            return Ok(PointSpec::Named(s.to_owned()));
        }
        parse_list(s, "point").map(PointSpec::Coords)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub hyperbolic: Option<f64>,
    pub region: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<String>,
}

/// Everything one invocation needs. Every field is optional here; the
/// commands fill in defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub b: Option<Vec<Vec<i64>>>,
    pub m: Option<Vec<Vec<f64>>>,
    pub mode: Option<ExecMode>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,

    pub n_max: Option<u64>,
    pub n_min: Option<i64>,
    pub epsilon: Option<f64>,
    pub x0: Option<PointSpec>,
    pub target: Option<PointSpec>,
    pub plane: Option<String>,
    pub resolution: Option<usize>,
    pub window: Option<[f64; 4]>,
    pub base_re: Option<Vec<f64>>,
    pub base_im: Option<Vec<f64>>,
    pub sigma: Option<Vec<Vec<f64>>>,
    pub h: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub radius: Option<u32>,
    pub shift: Option<Vec<i64>>,
    pub at_n: Option<i64>,
    pub z1_re: Option<Vec<f64>>,
    pub z1_im: Option<Vec<f64>>,
    pub z2_re: Option<Vec<f64>>,
    pub z2_im: Option<Vec<f64>>,
}

pub const DEFAULT_HYPERBOLIC_TOL: f64 = kleinsplit::linalg::DEFAULT_HYPERBOLIC_TOL;
pub const DEFAULT_REGION_TOL: f64 = kleinsplit::regions::DEFAULT_REGION_TOL;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid config: {}", e.message())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn hyperbolic_tol(&self) -> f64 {
        self.tolerances.hyperbolic.unwrap_or(DEFAULT_HYPERBOLIC_TOL)
    }

    pub fn region_tol(&self) -> f64 {
        self.tolerances.region.unwrap_or(DEFAULT_REGION_TOL)
    }

    pub fn mode(&self) -> ExecMode {
        self.mode.unwrap_or_default()
    }

    pub fn format(&self) -> CliResult<Format> {
        match (&self.output.format, &self.output.path) {
            (Some(f), _) => f.parse(),
            (None, Some(p)) => Ok(Format::from_path(p).unwrap_or(Format::Json)),
            (None, None) => Ok(Format::Json),
        }
    }

    pub fn plane(&self) -> CliResult<[Axis; 2]> {
        let text = self.plane.as_deref().unwrap_or("ims0,imu0");
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            return Err(CliError::config(format!("plane {text:?} must name two axes")));
        };
        let axis = |s: &str| s.parse::<Axis>().map_err(|e| CliError::config(e.to_string()));
        Ok([axis(a)?, axis(b)?])
    }

    /// Structural checks that need no matrix work.
    pub fn validate(&self) -> CliResult<()> {
        let sources = [self.preset.is_some(), self.b.is_some(), self.m.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::config("exactly one matrix source (preset, b or m) is required"));
        }
        for (name, tol) in [("hyperbolic", self.tolerances.hyperbolic), ("region", self.tolerances.region)] {
            if let Some(t) = tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(CliError::config(format!("tolerance {name} must be positive, got {t}")));
                }
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps <= 0.5) {
                return Err(CliError::config(format!("epsilon must lie in (0, 1/2], got {eps}")));
            }
        }
        if self.resolution == Some(0) {
            return Err(CliError::config("resolution must be positive"));
        }
        if self.samples == Some(0) {
            return Err(CliError::config("samples must be positive"));
        }
        if self.n_max == Some(0) {
            return Err(CliError::config("n_max must be positive"));
        }
        if let Some(w) = self.window {
            if w.iter().any(|v| !v.is_finite()) || w[0] >= w[1] || w[2] >= w[3] {
                return Err(CliError::config("window must be [lo0, hi0, lo1, hi1] with lo < hi"));
            }
        }
        if let Some(h) = self.h {
            if !h.is_finite() || h == 0.0 {
                return Err(CliError::config("h must be finite and nonzero"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.n_min, self.n_max) {
            if lo > hi as i64 {
                return Err(CliError::config("n_min must not exceed n_max"));
            }
        }
        for point in [&self.x0, &self.target] {
            if let Some(PointSpec::Named(name)) = point {
                if name != "generic" {
                    return Err(CliError::config(format!("unknown point {name:?}")));
                }
            }
        }
        if let Some(s) = &self.strategy {
            if s != "rounding" && s != "exhaustive" {
                return Err(CliError::config(format!("unknown strategy {s:?}")));
            }
        }
        if let Some(m) = &self.m {
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CliError::config("m must have finite entries"));
            }
        }
        self.format()?;
        self.plane()?;
        Ok(())
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML experiment file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// named matrix: cat2 or cat3
    #[arg(long)]
    pub preset: Option<String>,
    /// integer matrix B, rows separated by ';' (e.g. "2,1;1,1")
    #[arg(long = "b", value_name = "ROWS", allow_hyphen_values = true)]
    pub b: Option<String>,
    /// real generator M, rows separated by ';'
    #[arg(long = "m", value_name = "ROWS", allow_hyphen_values = true)]
    pub m: Option<String>,
    /// serial or parallel
    #[arg(long)]
    pub mode: Option<ExecMode>,
    #[arg(long, allow_hyphen_values = true)]
    pub hyperbolic_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub region_tol: Option<f64>,
    /// output file; stdout when absent
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// csv or json (default: from the file extension, else json)
    #[arg(long)]
    pub format: Option<String>,
    /// orbit length, largest power n, or witness steps
    #[arg(long = "n", value_name = "N")]
    pub n_max: Option<u64>,
    /// smallest n of a norm scan
    #[arg(long, allow_hyphen_values = true)]
    pub n_min: Option<i64>,
    /// box size for torus coverage
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// "generic" or comma-separated coordinates
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<PointSpec>,
    /// point approximated by fixed points ("generic" or coordinates)
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<PointSpec>,
    /// two axes among re<k>, ims<k>, imu<k>, e.g. "ims0,imu0"
    #[arg(long)]
    pub plane: Option<String>,
    /// grid cells per side
    #[arg(long)]
    pub res: Option<usize>,
    /// "lo0,hi0,lo1,hi1"
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// time step of the lattice check
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
    /// number of random psi-check samples
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// rounding or exhaustive
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub radius: Option<u32>,
    /// translation part b of a single fixed point
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<String>,
    /// power n of a single fixed point
    #[arg(long, allow_hyphen_values = true)]
    pub at_n: Option<i64>,
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::config(format!("cannot parse {what} {s:?}")))
}

fn parse_rows<T: FromStr>(s: &str, what: &str) -> CliResult<Vec<Vec<T>>> {
    s.split(';').map(|row| parse_list(row, what)).collect()
}

impl Overrides {
    /// Config file (if any) with the flags applied on top.
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> CliResult<()> {
        if self.preset.is_some() || self.b.is_some() || self.m.is_some() {
            cfg.preset = self.preset.clone();
            cfg.b = self.b.as_deref().map(|s| parse_rows(s, "matrix b")).transpose()?;
            cfg.m = self.m.as_deref().map(|s| parse_rows(s, "matrix m")).transpose()?;
        }
        macro_rules! take {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = &self.$flag { $field = Some(v.clone()); })*
            };
        }
        take!(
            mode => cfg.mode,
            hyperbolic_tol => cfg.tolerances.hyperbolic,
            region_tol => cfg.tolerances.region,
            out => cfg.output.path,
            format => cfg.output.format,
            n_max => cfg.n_max,
            n_min => cfg.n_min,
            eps => cfg.epsilon,
            x0 => cfg.x0,
            target => cfg.target,
            plane => cfg.plane,
            res => cfg.resolution,
            h => cfg.h,
            samples => cfg.samples,
            seed => cfg.seed,
            strategy => cfg.strategy,
            radius => cfg.radius,
            at_n => cfg.at_n,
        );
        if let Some(w) = &self.window {
            let v: Vec<f64> = parse_list(w, "window")?;
            cfg.window = Some(
                v.try_into()
                    .map_err(|_| CliError::config("window needs four numbers lo0,hi0,lo1,hi1"))?,
            );
        }
        if let Some(s) = &self.shift {
            cfg.shift = Some(parse_list(s, "shift")?);
        }
        Ok(())
    }
}
