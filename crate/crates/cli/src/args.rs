use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use prelog_core::analysis::entropy::log2_grid;
use prelog_core::{ChannelConfig, CorrelationMatrix, SnrPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Block length.
    #[arg(long = "L")]
    pub l: Option<usize>,
    /// Correlation rank.
    #[arg(long = "Q")]
    pub q: Option<usize>,
    /// Receive antennas.
    #[arg(long = "R")]
    pub r: Option<usize>,
    /// Named configuration: A, B, C or D.
    #[arg(long)]
    pub preset: Option<String>,
    /// Channel configuration as inline JSON or a path, e.g. {"L":5,"Q":3,"R":2}.
    #[arg(long)]
    pub config: Option<String>,
    /// Correlation matrix file; the DFT matrix is used when absent.
    #[arg(long = "q-file")]
    pub q_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long = "N", default_value_t = 10_000)]
    pub n: usize,
    /// `a:b:steps` with log2 ρ running from a to b.
    #[arg(long = "rho-grid", default_value = "10:30:5")]
    pub rho_grid: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Random draws for identity checks.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Raised when the configuration itself is unusable (exit code 2).
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
    pub violations: Vec<String>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(message: impl Into<String>) -> anyhow::Error {
    ConfigError {
        message: message.into(),
        violations: Vec::new(),
    }
    .into()
}

#[derive(Debug, Clone)]
pub enum QSource {
    Dft,
    File(PathBuf),
}

impl QSource {
    pub fn label(&self) -> String {
        match self {
            QSource::Dft => "dft".to_string(),
            QSource::File(p) => format!("file:{}", p.display()),
        }
    }
}

impl Common {
    /// Explicit flags override `--preset`, which overrides `--config`.
    pub fn channel(&self) -> anyhow::Result<Option<ChannelConfig>> {
        let mut base: Option<ChannelConfig> = None;
        if let Some(text) = &self.config {
            let json = if text.trim_start().starts_with('{') {
                text.clone()
            } else {
                std::fs::read_to_string(text).with_context(|| format!("reading config {text}"))?
            };
            base = Some(serde_json::from_str(&json).map_err(|e| config_error(format!("bad --config: {e}")))?);
        }
        if let Some(name) = &self.preset {
            base = Some(ChannelConfig::preset(name).ok_or_else(|| config_error(format!("unknown preset {name}")))?);
        }
        let (l, q, r) = match base {
            Some(c) => (self.l.unwrap_or(c.l), self.q.unwrap_or(c.q), self.r.unwrap_or(c.r)),
            None => match (self.l, self.q, self.r) {
                (None, None, None) => return Ok(None),
                (Some(l), Some(q), Some(r)) => (l, q, r),
                _ => return Err(config_error("--L, --Q and --R must be given together")),
            },
        };
        let cfg = ChannelConfig::new(l, q, r);
        let violations = cfg.validate();
        if !violations.is_empty() {
            return Err(ConfigError {
                message: "invalid channel configuration".to_string(),
                violations: violations.iter().map(ToString::to_string).collect(),
            }
            .into());
        }
        Ok(Some(cfg))
    }

    pub fn require_channel(&self) -> anyhow::Result<ChannelConfig> {
        self.channel()?
            .ok_or_else(|| config_error("no channel configuration: use --preset, --config or --L/--Q/--R"))
    }

    pub fn q_source(&self) -> QSource {
        self.q_file.clone().map_or(QSource::Dft, QSource::File)
    }

    pub fn correlation(&self, cfg: &ChannelConfig) -> anyhow::Result<CorrelationMatrix> {
        let q = match &self.q_file {
            None => CorrelationMatrix::dft(cfg.l, cfg.q)?,
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                CorrelationMatrix::from_json(&text).map_err(|e| config_error(e.to_string()))?
            }
        };
        q.matches(cfg).map_err(|e| config_error(e.to_string()))?;
        Ok(q)
    }

    pub fn grid_spec(&self) -> anyhow::Result<(f64, f64, usize)> {
        let parts: Vec<&str> = self.rho_grid.split(':').collect();
        let [a, b, steps] = parts.as_slice() else {
            bail!(config_error(format!("--rho-grid expects a:b:steps, got {}", self.rho_grid)));
        };
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| config_error(format!("bad number {s} in --rho-grid")));
        let steps = steps
            .trim()
            .parse::<usize>()
            .map_err(|_| config_error(format!("bad step count {steps} in --rho-grid")))?;
        let spec = (parse(a)?, parse(b)?, steps);
        log2_grid(spec.0, spec.1, spec.2).map_err(|e| config_error(e.to_string()))?;
        Ok(spec)
    }

    pub fn grid(&self) -> anyhow::Result<Vec<SnrPoint>> {
        let (a, b, steps) = self.grid_spec()?;
        Ok(log2_grid(a, b, steps)?)
    }
}
