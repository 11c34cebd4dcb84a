use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use s3bell::curve::AngleGrid;
use s3bell::inequality::SettingsQuad;
use s3bell::pearle::BridgeMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Curve,
    Chsh,
    Geodesic,
    Bounds,
    Probabilities,
    FlatVsS3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    S3,
    PearleReject,
    Flat,
}

impl Model {
    pub fn bridge_mode(self) -> BridgeMode {
        match self {
            Model::S3 => BridgeMode::S3Ensemble,
            Model::PearleReject => BridgeMode::PearleReject,
            Model::Flat => BridgeMode::Flat,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// How the S³ model's correlation is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Average of the limit-of-product joint value.
    Limit,
    /// Stochastic outcomes from the pre-selected state ensemble.
    Ensemble,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

macro_rules! display_as_value {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&value_name(self))
            }
        }
    )*};
}
display_as_value!(Experiment, Model, Format, Estimator);

/// Every flag shared by the subcommands. Unset flags fall back to the config
/// file and then to defaults.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    /// Flat `key = value` file with keys named like the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Runs (states, pairs) per grid point or setting pair
    #[arg(long)]
    pub n: Option<u64>,
    /// Required, either here or in the config file
    #[arg(long)]
    pub seed: Option<u64>,
    /// Degrees, `start:stop:step` or a comma list
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub kappa: Option<u32>,
    /// Output file; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads (does not change any output)
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<Estimator>,
    /// Half-angle steps of the geodesic sweep
    #[arg(long)]
    pub steps: Option<usize>,
    /// CHSH settings in degrees, `a,a',b,b'`
    #[arg(long)]
    pub quad: Option<String>,
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: Model,
    pub n: u64,
    pub seed: u64,
    pub grid_spec: String,
    pub grid: AngleGrid,
    pub kappa: u32,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub workers: Option<usize>,
    pub estimator: Estimator,
    pub steps: usize,
    pub quad_spec: String,
    pub quad_deg: [f64; 4],
}

pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_GRID: &str = "0:180:5";
pub const DEFAULT_STEPS: usize = 180;
pub const DEFAULT_QUAD: &str = "90,0,45,135";

/// Settings for the embedded metadata block. Worker count and output path
/// are left out so the bytes of an artifact depend only on what it computes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub model: String,
    pub n: u64,
    pub seed: u64,
    pub grid: String,
    pub kappa: u32,
    pub format: String,
    pub estimator: String,
    pub steps: usize,
    pub quad: String,
}

impl ResolvedConfig {
    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("experiment".into(), self.experiment.clone()),
            ("model".into(), self.model.clone()),
            ("n".into(), self.n.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("grid".into(), self.grid.clone()),
            ("kappa".into(), self.kappa.to_string()),
            ("format".into(), self.format.clone()),
            ("estimator".into(), self.estimator.clone()),
            ("steps".into(), self.steps.to_string()),
            ("quad".into(), self.quad.clone()),
        ]
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| usage(format!("invalid value `{v}` for `{key}`")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, CliError> {
    T::from_str(v.trim(), false).map_err(|_| usage(format!("invalid value `{v}` for `{key}`")))
}

fn parse_quad(spec: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|t| parse_value::<f64>("quad", t))
        .collect::<Result<_, _>>()?;
    let quad: [f64; 4] = parts
        .try_into()
        .map_err(|_| usage("`quad` needs four angles a,a',b,b'"))?;
    if quad.iter().any(|d| !d.is_finite()) {
        return Err(usage("`quad` angles must be finite"));
    }
    Ok(quad)
}

/// Read a flat `key = value` file into overrides. Blank lines and lines
/// starting with `#` are ignored.
pub fn read_config_file(path: &Path) -> Result<Overrides, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "model" => o.model = Some(parse_enum(key, value)?),
            "n" => o.n = Some(parse_value(key, value)?),
            "seed" => o.seed = Some(parse_value(key, value)?),
            "grid" => o.grid = Some(value.to_string()),
            "kappa" => o.kappa = Some(parse_value(key, value)?),
            "out" => o.out = Some(PathBuf::from(value)),
            "format" => o.format = Some(parse_enum(key, value)?),
            "workers" => o.workers = Some(parse_value(key, value)?),
            "estimator" => o.estimator = Some(parse_enum(key, value)?),
            "steps" => o.steps = Some(parse_value(key, value)?),
            "quad" => o.quad = Some(value.to_string()),
            other => {
                return Err(usage(format!(
                    "config line {}: unknown key `{other}`",
                    i + 1
                )))
            }
        }
    }
    Ok(o)
}

impl Overrides {
    /// Fill unset fields from `base`.
    pub fn or(self, base: Overrides) -> Overrides {
        Overrides {
            config: self.config.or(base.config),
            model: self.model.or(base.model),
            n: self.n.or(base.n),
            seed: self.seed.or(base.seed),
            grid: self.grid.or(base.grid),
            kappa: self.kappa.or(base.kappa),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            workers: self.workers.or(base.workers),
            estimator: self.estimator.or(base.estimator),
            steps: self.steps.or(base.steps),
            quad: self.quad.or(base.quad),
        }
    }
}

impl ExperimentConfig {
    /// Merge flags over the config file (if any) and validate.
    pub fn resolve(experiment: Experiment, flags: Overrides) -> Result<Self, CliError> {
        let merged = match &flags.config {
            Some(path) => {
                let file = read_config_file(path)?;
                flags.or(file)
            }
            None => flags,
        };
        Self::from_overrides(experiment, merged)
    }

    pub fn from_overrides(experiment: Experiment, o: Overrides) -> Result<Self, CliError> {
        let seed = o
            .seed
            .ok_or_else(|| usage("a seed is required (--seed or `seed` in the config file)"))?;
        let n = o.n.unwrap_or(DEFAULT_N);
        if n == 0 {
            return Err(usage("`n` must be at least 1"));
        }
        let kappa = o.kappa.unwrap_or(1);
        if kappa == 0 {
            return Err(usage("`kappa` must be at least 1"));
        }
        let grid_spec = o.grid.unwrap_or_else(|| DEFAULT_GRID.to_string());
        let grid: AngleGrid = grid_spec.parse().map_err(|e| usage(format!("{e}")))?;
        let steps = o.steps.unwrap_or(DEFAULT_STEPS);
        if steps == 0 {
            return Err(usage("`steps` must be at least 1"));
        }
        if o.workers == Some(0) {
            return Err(usage("`workers` must be at least 1"));
        }
        let quad_spec = o.quad.unwrap_or_else(|| DEFAULT_QUAD.to_string());
        let quad_deg = parse_quad(&quad_spec)?;
        Ok(ExperimentConfig {
            experiment,
            model: o.model.unwrap_or(Model::S3),
            n,
            seed,
            grid_spec,
            grid,
            kappa,
            out: o.out,
            format: o.format.unwrap_or(Format::Csv),
            workers: o.workers,
            estimator: o.estimator.unwrap_or(Estimator::Ensemble),
            steps,
            quad_spec,
            quad_deg,
        })
    }

    pub fn resolved(&self) -> ResolvedConfig {
        ResolvedConfig {
            experiment: self.experiment.to_string(),
            model: self.model.to_string(),
            n: self.n,
            seed: self.seed,
            grid: self.grid_spec.clone(),
            kappa: self.kappa,
            format: self.format.to_string(),
            estimator: self.estimator.to_string(),
            steps: self.steps,
            quad: self.quad_spec.clone(),
        }
    }

    pub fn quad(&self) -> SettingsQuad {
        let [a, ap, b, bp] = self.quad_deg.map(f64::to_radians);
        SettingsQuad::planar(a, ap, b, bp)
    }
}
