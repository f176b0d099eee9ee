//! Flag and config-file handling. A scenario resolves from defaults, then a
//! key=value config file, then flags (flags win).

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "gchs",
    about = "Covariant Hamiltonian dynamics, geodesics, and identity checks",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Integrate a geodesic and export t, x, v, speed² columns
    Geodesic(ScenarioArgs),
    /// Integrate a structural system's flow and export diagnostics
    Gchs(ScenarioArgs),
    /// Run the identity suite and report per-identity residuals
    Check(ScenarioArgs),
}

#[derive(Args, Debug, Default)]
pub struct ScenarioArgs {
    /// key=value config file; flags given here override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Manifold preset (euclidean, sphere2, halfplane) or metric file path
    #[arg(long)]
    pub manifold: Option<String>,
    /// System preset (free, oscillator, sgq) or system file path
    #[arg(long)]
    pub system: Option<String>,
    /// Dimension for presets that take one
    #[arg(long)]
    pub dim: Option<usize>,
    /// Initial coordinates, comma-separated
    #[arg(long, value_name = "V1,V2,..", allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Initial velocity, comma-separated (geodesic)
    #[arg(long, value_name = "V1,V2,..", allow_hyphen_values = true)]
    pub v0: Option<String>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fields to track along the flow (names or expressions), comma-separated
    #[arg(long, value_name = "F1,F2,..", allow_hyphen_values = true)]
    pub track: Option<String>,
    /// Finite-difference step scale for file-loaded fields
    #[arg(long = "fd-step")]
    pub fd_step: Option<f64>,
    /// Sample count for the identity suite
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
    /// Print the resolved configuration and exit
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("format must be csv or json, got '{other}'")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Format::Csv => write!(f, "csv"),
            Format::Json => write!(f, "json"),
        }
    }
}

/// A fully-resolved scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub manifold: Option<String>,
    pub system: Option<String>,
    pub dim: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub track: Vec<String>,
    pub fd_step: Option<f64>,
    pub samples: usize,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            manifold: None,
            system: None,
            dim: None,
            x0: None,
            v0: None,
            t0: 0.0,
            t1: 1.0,
            dt: 1e-3,
            track: Vec::new(),
            fd_step: None,
            samples: 100,
            output: None,
            format: Format::Csv,
        }
    }
}

fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{}' in vector '{text}'", c.trim()))
        })
        .collect()
}

fn parse_names(text: &str) -> Vec<String> {
    text.split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect()
}

impl ScenarioConfig {
    /// Apply one config-file key.
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "manifold" => self.manifold = Some(value.to_string()),
            "system" => self.system = Some(value.to_string()),
            "dim" => self.dim = Some(value.parse().map_err(|_| format!("bad dim '{value}'"))?),
            "x0" => self.x0 = Some(parse_vector(value)?),
            "v0" => self.v0 = Some(parse_vector(value)?),
            "t0" => self.t0 = value.parse().map_err(|_| format!("bad t0 '{value}'"))?,
            "t1" => self.t1 = value.parse().map_err(|_| format!("bad t1 '{value}'"))?,
            "dt" => self.dt = value.parse().map_err(|_| format!("bad dt '{value}'"))?,
            "track" => self.track = parse_names(value),
            "fd_step" => {
                self.fd_step = Some(
                    value
                        .parse()
                        .map_err(|_| format!("bad fd_step '{value}'"))?,
                )
            }
            "samples" => {
                self.samples = value
                    .parse()
                    .map_err(|_| format!("bad samples '{value}'"))?
            }
            "output" => self.output = Some(PathBuf::from(value)),
            "format" => self.format = Format::parse(value)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    fn apply_file(&mut self, text: &str) -> Result<(), String> {
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let at = line
                .find('=')
                .ok_or_else(|| format!("config line {}: expected key = value", idx + 1))?;
            self.set(line[..at].trim(), line[at + 1..].trim())
                .map_err(|e| format!("config line {}: {e}", idx + 1))?;
        }
        Ok(())
    }

    /// Merge defaults, the optional config file, and flags.
    pub fn resolve(args: &ScenarioArgs) -> Result<Self, String> {
        let mut cfg = ScenarioConfig::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            cfg.apply_file(&text)?;
        }
        if let Some(v) = &args.manifold {
            cfg.manifold = Some(v.clone());
        }
        if let Some(v) = &args.system {
            cfg.system = Some(v.clone());
        }
        if let Some(v) = args.dim {
            cfg.dim = Some(v);
        }
        if let Some(v) = &args.x0 {
            cfg.x0 = Some(parse_vector(v)?);
        }
        if let Some(v) = &args.v0 {
            cfg.v0 = Some(parse_vector(v)?);
        }
        if let Some(v) = args.t0 {
            cfg.t0 = v;
        }
        if let Some(v) = args.t1 {
            cfg.t1 = v;
        }
        if let Some(v) = args.dt {
            cfg.dt = v;
        }
        if let Some(v) = &args.track {
            cfg.track = parse_names(v);
        }
        if let Some(v) = args.fd_step {
            cfg.fd_step = Some(v);
        }
        if let Some(v) = args.samples {
            cfg.samples = v;
        }
        if let Some(v) = &args.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = &args.format {
            cfg.format = Format::parse(v)?;
        }
        Ok(cfg)
    }

    /// The canonical key=value dump; re-parsing it yields this config.
    pub fn dump(&self) -> String {
        let g17 = |v: f64| format!("{v:.16e}");
        let vec17 = |v: &[f64]| v.iter().map(|c| g17(*c)).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        if let Some(v) = &self.manifold {
            out.push_str(&format!("manifold = {v}\n"));
        }
        if let Some(v) = &self.system {
            out.push_str(&format!("system = {v}\n"));
        }
        if let Some(v) = self.dim {
            out.push_str(&format!("dim = {v}\n"));
        }
        if let Some(v) = &self.x0 {
            out.push_str(&format!("x0 = {}\n", vec17(v)));
        }
        if let Some(v) = &self.v0 {
            out.push_str(&format!("v0 = {}\n", vec17(v)));
        }
        out.push_str(&format!("t0 = {}\n", g17(self.t0)));
        out.push_str(&format!("t1 = {}\n", g17(self.t1)));
        out.push_str(&format!("dt = {}\n", g17(self.dt)));
        if !self.track.is_empty() {
            out.push_str(&format!("track = {}\n", self.track.join(",")));
        }
        if let Some(v) = self.fd_step {
            out.push_str(&format!("fd_step = {}\n", g17(v)));
        }
        out.push_str(&format!("samples = {}\n", self.samples));
        if let Some(v) = &self.output {
            out.push_str(&format!("output = {}\n", v.display()));
        }
        out.push_str(&format!("format = {}\n", self.format));
        out
    }
}
