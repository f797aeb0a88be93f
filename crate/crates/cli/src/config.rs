use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use grasshopper_core::analysis::{Initializer, ALL_INITIALIZERS};
use grasshopper_core::anneal::ScheduleOptions;
use grasshopper_core::grid::{generate_fibonacci_antipodal, SphericalGrid};
use grasshopper_core::kernel::DeltaKernel;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSource {
    Path(PathBuf),
    Fibonacci { n_pairs: usize },
}

impl GridSource {
    pub fn load(&self) -> Result<Arc<SphericalGrid>, Failure> {
        let grid = match self {
            GridSource::Path(p) => SphericalGrid::load(p)?,
            GridSource::Fibonacci { n_pairs } => generate_fibonacci_antipodal(*n_pairs)?,
        };
        Ok(Arc::new(grid))
    }
}

/// A jump angle in a config file: radians, or an expression like `"pi/5"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64, Failure> {
        match self {
            Angle::Radians(x) => Ok(*x),
            Angle::Expr(s) => parse_theta(s),
        }
    }
}

fn default_initializers() -> Vec<Initializer> {
    ALL_INITIALIZERS.to_vec()
}

fn default_replicas() -> usize {
    3
}

fn default_checkpoint_every() -> usize {
    10
}

/// Run configuration as read from JSON. Angles are normalized to radians
/// before the effective config is echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<GridSource>,
    /// `one`, `two`, or for sweeps also `both`.
    pub setup: Option<String>,
    pub theta: Option<Angle>,
    pub theta_list: Option<Vec<Angle>>,
    #[serde(default)]
    pub kernel: DeltaKernel,
    #[serde(default)]
    pub schedule: ScheduleOptions,
    #[serde(default = "default_replicas")]
    pub n_replicas: usize,
    #[serde(default = "default_initializers")]
    pub initializers: Vec<Initializer>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub table_cache: Option<PathBuf>,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: None,
            setup: None,
            theta: None,
            theta_list: None,
            kernel: DeltaKernel::default(),
            schedule: ScheduleOptions::default(),
            n_replicas: default_replicas(),
            initializers: default_initializers(),
            seed: None,
            output_dir: None,
            table_cache: None,
            checkpoint_every: default_checkpoint_every(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::invalid(format!("bad config {}: {e}", path.display())))
    }

    pub fn require_grid(&self) -> Result<&GridSource, Failure> {
        let grid = self
            .grid
            .as_ref()
            .ok_or_else(|| Failure::invalid("no grid given (--grid or --pairs)"))?;
        if let GridSource::Path(p) = grid {
            if !p.exists() {
                return Err(Failure::invalid(format!(
                    "grid file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(grid)
    }

    pub fn require_seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::invalid("no seed given (--seed or \"seed\" in the config)"))
    }

    pub fn require_output_dir(&self) -> Result<&Path, Failure> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| Failure::invalid("no output directory given (--out or \"output_dir\")"))
    }

    pub fn check_replicas(&self) -> Result<(), Failure> {
        if self.n_replicas == 0 {
            return Err(Failure::invalid("n_replicas must be at least 1"));
        }
        if self.initializers.is_empty() {
            return Err(Failure::invalid("initializers must not be empty"));
        }
        Ok(())
    }

    /// Replaces angle expressions by their radian values.
    pub fn normalize_angles(&mut self) -> Result<(), Failure> {
        if let Some(t) = &self.theta {
            self.theta = Some(Angle::Radians(t.radians()?));
        }
        if let Some(list) = &self.theta_list {
            let list = list
                .iter()
                .map(|t| t.radians().map(Angle::Radians))
                .collect::<Result<_, _>>()?;
            self.theta_list = Some(list);
        }
        Ok(())
    }

    pub fn write_effective(&self, dir: &Path) -> Result<(), Failure> {
        let path = dir.join("config.json");
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Failure::runtime(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// Parses `1.2`, `pi`, `pi/5`, `0.3pi`, `3pi/4` and the same with `π`.
pub fn parse_theta(text: &str) -> Result<f64, Failure> {
    let bad = || Failure::invalid(format!("cannot parse angle {text:?}"));
    let s: String = text
        .trim()
        .to_lowercase()
        .replace('π', "pi")
        .replace(['*', ' '], "");
    let value = match s.split_once("pi") {
        None => s.parse::<f64>().map_err(|_| bad())?,
        Some((coef, rest)) => {
            let coef = match coef {
                "" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            let den = match rest {
                "" => 1.0,
                r => r
                    .strip_prefix('/')
                    .ok_or_else(bad)?
                    .parse::<f64>()
                    .map_err(|_| bad())?,
            };
            coef * PI / den
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}
