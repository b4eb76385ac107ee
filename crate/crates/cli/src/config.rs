//! Experiment configuration. Values are resolved from command-line flags first, then an optional
//! TOML file, then `SOSUB_PRECISION_BITS` (precision only), then built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sosub_core::numerics::{DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS};
use sosub_core::pushforward::{DensityGrid, GridSpacing};

use crate::CliError;

pub const PRECISION_ENV: &str = "SOSUB_PRECISION_BITS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
pub enum OutputFormat {
    #[serde(rename = "csv")]
    #[value(name = "csv")]
    Csv,
    #[serde(rename = "csv+svg")]
    #[value(name = "csv+svg")]
    CsvSvg,
}

impl OutputFormat {
    pub fn with_svg(self) -> bool {
        self == Self::CsvSvg
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<String>,
}

/// Contents of a `--config` file; every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub precision_bits: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub r_max: Option<u32>,
    pub format: Option<OutputFormat>,
    pub plateau_threshold: Option<f64>,
    pub grid: Option<GridConfig>,
    /// Default objective for `bound`.
    pub f: Option<String>,
    /// Default measure for `bound`.
    pub measure: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// The flag values that take part in precedence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlagOverrides {
    pub precision_bits: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub r_max: Option<u32>,
    pub format: Option<OutputFormat>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub precision_bits: usize,
    pub output_dir: PathBuf,
    /// `None` lets each experiment use its own default level range.
    pub r_max: Option<u32>,
    pub format: OutputFormat,
    /// Relative decrease below which a bound sequence counts as plateaued.
    pub plateau_threshold: f64,
    pub grid: DensityGrid,
    pub f: Option<String>,
    pub measure: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            precision_bits: DEFAULT_PRECISION_BITS,
            output_dir: PathBuf::from("results"),
            r_max: None,
            format: OutputFormat::CsvSvg,
            plateau_threshold: 0.02,
            grid: DensityGrid::default(),
            f: None,
            measure: None,
        }
    }
}

impl ExperimentConfig {
    pub fn resolve(
        flags: &FlagOverrides,
        file: Option<FileConfig>,
        env_precision: Option<&str>,
    ) -> Result<Self, CliError> {
        let file = file.unwrap_or_default();
        let mut cfg = Self::default();
        let env_bits = match env_precision {
            Some(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("{PRECISION_ENV} is not an integer: {s:?}")))?,
            ),
            None => None,
        };
        cfg.precision_bits = flags.precision_bits.or(file.precision_bits).or(env_bits).unwrap_or(cfg.precision_bits);
        if let Some(dir) = flags.output_dir.clone().or(file.output_dir) {
            cfg.output_dir = dir;
        }
        cfg.r_max = flags.r_max.or(file.r_max);
        if let Some(format) = flags.format.or(file.format) {
            cfg.format = format;
        }
        if let Some(t) = file.plateau_threshold {
            cfg.plateau_threshold = t;
        }
        if let Some(g) = file.grid {
            cfg.grid.lo = g.lo.unwrap_or(cfg.grid.lo);
            cfg.grid.hi = g.hi.unwrap_or(cfg.grid.hi);
            cfg.grid.points = g.points.unwrap_or(cfg.grid.points);
            if let Some(s) = g.spacing {
                cfg.grid.spacing = match s.as_str() {
                    "log" => GridSpacing::Log,
                    "linear" => GridSpacing::Linear,
                    other => return Err(CliError::Usage(format!("grid spacing must be log or linear, got {other:?}"))),
                };
            }
        }
        cfg.f = file.f;
        cfg.measure = file.measure;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.precision_bits < MIN_PRECISION_BITS {
            return Err(CliError::Usage(format!(
                "precision must be at least {MIN_PRECISION_BITS} bits, got {}",
                self.precision_bits
            )));
        }
        if self.r_max == Some(0) {
            return Err(CliError::Usage("r_max must be at least 1".into()));
        }
        if !(self.plateau_threshold > 0.0) {
            return Err(CliError::Usage("plateau_threshold must be positive".into()));
        }
        let g = &self.grid;
        if !(g.lo >= 0.0 && g.hi > g.lo && g.points >= 2) {
            return Err(CliError::Usage("grid needs 0 ≤ lo < hi and at least two points".into()));
        }
        if g.spacing == GridSpacing::Log && g.lo <= 0.0 {
            return Err(CliError::Usage("a log grid needs lo > 0".into()));
        }
        Ok(())
    }
}
