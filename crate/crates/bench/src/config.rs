//! Experiment configuration: a flat key-value TOML file whose keys mirror the
//! command-line flags, overridden flag by flag from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use imanpl::parallel::Execution;
use imanpl::solver::{InexactRule, StepSchedule};
use serde::{Deserialize, Deserializer};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Ssc,
    Spca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItType {
    Lacc,
    Hacc,
}

impl ItType {
    pub fn label(self) -> &'static str {
        match self {
            ItType::Lacc => "LACC",
            ItType::Hacc => "HACC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsolverKind {
    Apg,
    Ssn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Fixed,
    /// Halve on backtracking, double on a full step.
    Adaptive,
    /// Multiply or divide by `v`, never below `t0`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Circle,
    Mixture,
    SpcaRandom,
    /// Feature matrix (SSC) or data matrix (SPCA) in CSV or Matrix Market.
    File(PathBuf),
}

impl DataSource {
    /// Name written to the `dataset` column.
    pub fn name(&self) -> String {
        match self {
            DataSource::Circle => "synthetic-circle".into(),
            DataSource::Mixture => "synthetic-mixture".into(),
            DataSource::SpcaRandom => "spca-random".into(),
            DataSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "synthetic-circle" | "circle" => DataSource::Circle,
            "synthetic-mixture" | "mixture" => DataSource::Mixture,
            "spca-random" => DataSource::SpcaRandom,
            "" => return Err("empty data source".into()),
            path => DataSource::File(PathBuf::from(path)),
        })
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::File(p) => write!(f, "{}", p.display()),
            other => f.write_str(&other.name()),
        }
    }
}

impl<'de> Deserialize<'de> for DataSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

/// Every setting, each optional. Used both as the config-file schema and as
/// the command-line flag set.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct Settings {
    #[arg(long, value_enum)]
    pub problem: Option<ProblemKind>,
    /// synthetic-circle, synthetic-mixture, spca-random, or a matrix file.
    #[arg(long)]
    pub data: Option<DataSource>,
    /// Regularization weight; repeat for a grid.
    #[arg(long = "u")]
    #[serde(deserialize_with = "one_or_many")]
    pub u: Vec<f64>,
    #[arg(long = "it", value_enum)]
    pub it: Option<ItType>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub subsolver: Option<SubsolverKind>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Factor of the geometric schedule.
    #[arg(long)]
    pub v: Option<f64>,
    /// Initial step; defaults to 1/(L_f + L_h L_c) for SSC and 1/(2‖A‖²) for SPCA.
    #[arg(long)]
    pub t0: Option<f64>,
    /// First seed; replications use seed, seed+1, ...
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub tol_decrease: Option<f64>,
    /// Stop once the objective is at or below this value.
    #[arg(long)]
    pub target_objective: Option<f64>,
    /// Results CSV; the summary table goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Number of clusters (SSC) or components (SPCA).
    #[arg(long)]
    pub r: Option<usize>,
    /// Rows of the random SPCA matrix.
    #[arg(long)]
    pub n1: Option<usize>,
    /// Columns of the random SPCA matrix.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ground-truth labels for file data, one integer per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Start each dual solve from the previous outer iteration's multiplier.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub warm_start: Option<bool>,
    #[arg(long)]
    pub max_subiter: Option<usize>,
    /// Run replications one after another.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(message) => BenchError::ConfigFile {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Field-wise `self` if set, else `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            problem: self.problem.or(base.problem),
            data: self.data.or(base.data),
            u: if self.u.is_empty() { base.u } else { self.u },
            it: self.it.or(base.it),
            rho: self.rho.or(base.rho),
            subsolver: self.subsolver.or(base.subsolver),
            schedule: self.schedule.or(base.schedule),
            v: self.v.or(base.v),
            t0: self.t0.or(base.t0),
            seed: self.seed.or(base.seed),
            reps: self.reps.or(base.reps),
            max_outer: self.max_outer.or(base.max_outer),
            tol_decrease: self.tol_decrease.or(base.tol_decrease),
            target_objective: self.target_objective.or(base.target_objective),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            r: self.r.or(base.r),
            n1: self.n1.or(base.n1),
            n: self.n.or(base.n),
            labels: self.labels.or(base.labels),
            warm_start: self.warm_start.or(base.warm_start),
            max_subiter: self.max_subiter.or(base.max_subiter),
            sequential: self.sequential.or(base.sequential),
        }
    }
}

pub const DEFAULT_U_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub data: DataSource,
    pub u_grid: Vec<f64>,
    pub it_type: ItType,
    pub rho: f64,
    pub subsolver: SubsolverKind,
    pub schedule: ScheduleKind,
    pub v: f64,
    pub t0: Option<f64>,
    pub seed: u64,
    pub reps: usize,
    pub max_outer: usize,
    pub tol_decrease: f64,
    pub target_objective: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub r: Option<usize>,
    pub n1: usize,
    pub n: usize,
    pub labels: Option<PathBuf>,
    pub warm_start: bool,
    pub max_subiter: usize,
    pub execution: Execution,
    /// k-means runs per recovered embedding.
    pub kmeans_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Ssc,
            data: DataSource::Mixture,
            u_grid: DEFAULT_U_GRID.to_vec(),
            it_type: ItType::Lacc,
            rho: 0.2,
            subsolver: SubsolverKind::Apg,
            schedule: ScheduleKind::Adaptive,
            v: 1.01,
            t0: None,
            seed: 0,
            reps: 1,
            max_outer: 1000,
            tol_decrease: 1e-5,
            target_objective: None,
            out: None,
            format: OutputFormat::Markdown,
            r: None,
            n1: 500,
            n: 1000,
            labels: None,
            warm_start: false,
            max_subiter: 5000,
            execution: Execution::Parallel,
            kmeans_repeats: 10,
        }
    }
}

impl ExperimentConfig {
    /// Defaults filled in from `s`, then validated.
    pub fn from_settings(s: Settings) -> Result<Self> {
        let d = Self::default();
        let problem = s.problem.unwrap_or(d.problem);
        let data = s.data.unwrap_or(match problem {
            ProblemKind::Ssc => DataSource::Mixture,
            ProblemKind::Spca => DataSource::SpcaRandom,
        });
        let schedule = s.schedule.unwrap_or(match problem {
            ProblemKind::Ssc => ScheduleKind::Adaptive,
            ProblemKind::Spca => ScheduleKind::Geometric,
        });
        let cfg = Self {
            problem,
            data,
            u_grid: if s.u.is_empty() { d.u_grid } else { s.u },
            it_type: s.it.unwrap_or(d.it_type),
            rho: s.rho.unwrap_or(d.rho),
            subsolver: s.subsolver.unwrap_or(d.subsolver),
            schedule,
            v: s.v.unwrap_or(d.v),
            t0: s.t0,
            seed: s.seed.unwrap_or(d.seed),
            reps: s.reps.unwrap_or(d.reps),
            max_outer: s.max_outer.unwrap_or(d.max_outer),
            tol_decrease: s.tol_decrease.unwrap_or(d.tol_decrease),
            target_objective: s.target_objective,
            out: s.out,
            format: s.format.unwrap_or(d.format),
            r: s.r,
            n1: s.n1.unwrap_or(d.n1),
            n: s.n.unwrap_or(d.n),
            labels: s.labels,
            warm_start: s.warm_start.unwrap_or(d.warm_start),
            max_subiter: s.max_subiter.unwrap_or(d.max_subiter),
            execution: if s.sequential.unwrap_or(false) {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
            kmeans_repeats: d.kmeans_repeats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.u_grid.is_empty() {
            return bad("u grid is empty".into());
        }
        if let Some(u) = self.u_grid.iter().find(|u| !(**u > 0.0 && u.is_finite())) {
            return bad(format!("u values must be positive, got {u}"));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        self.rule().validate().map_err(|e| BenchError::Config(e.to_string()))?;
        if !(self.v >= 1.0) {
            return bad(format!("v must be >= 1, got {}", self.v));
        }
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return bad(format!("t0 must be positive, got {t0}"));
            }
        }
        if !(self.tol_decrease >= 0.0) {
            return bad(format!("tol-decrease must be nonnegative, got {}", self.tol_decrease));
        }
        if self.r == Some(0) || self.n1 == 0 || self.n == 0 || self.max_subiter == 0 {
            return bad("r, n1, n and max-subiter must be positive".into());
        }
        match (self.problem, &self.data) {
            (ProblemKind::Ssc, DataSource::SpcaRandom) => bad("spca-random data needs --problem spca".into()),
            (ProblemKind::Spca, DataSource::Circle | DataSource::Mixture) => {
                bad("synthetic clustering data needs --problem ssc".into())
            }
            (ProblemKind::Ssc, _) if self.subsolver == SubsolverKind::Ssn => {
                bad("the SSN subsolver needs an identity inner map (--problem spca)".into())
            }
            _ => Ok(()),
        }
    }

    pub fn rule(&self) -> InexactRule {
        match self.it_type {
            ItType::Lacc => InexactRule::Lacc(self.rho),
            ItType::Hacc => InexactRule::Hacc(self.rho),
        }
    }

    pub fn step_schedule(&self) -> StepSchedule {
        match self.schedule {
            ScheduleKind::Fixed => StepSchedule::Fixed,
            ScheduleKind::Adaptive => StepSchedule::HalvingDoubling,
            ScheduleKind::Geometric => StepSchedule::Geometric { v: self.v },
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.reps as u64).map(|i| self.seed + i).collect()
    }

    /// Value of the `algorithm` column.
    pub fn algorithm(&self) -> String {
        match self.subsolver {
            SubsolverKind::Apg => "IManPL-APG".into(),
            SubsolverKind::Ssn => "IManPL-SSN".into(),
        }
    }
}
