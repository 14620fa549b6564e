//! Experiment configuration: one JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use reslab_core::{GroupSpec, SchottkyData};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const THREADS_ENV: &str = "RESLAB_THREADS";
pub const MAX_THREADS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Delta,
    ZetaScan,
    Resonances,
    CoverAbelian,
    Equidist,
    Congruence,
    ExplicitFormula,
    Cayley,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Delta => "delta",
            Experiment::ZetaScan => "zeta-scan",
            Experiment::Resonances => "resonances",
            Experiment::CoverAbelian => "cover-abelian",
            Experiment::Equidist => "equidist",
            Experiment::Congruence => "congruence",
            Experiment::ExplicitFormula => "explicit-formula",
            Experiment::Cayley => "cayley",
        }
    }
}

/// A preset name such as `symmetric3(0.25)` or an explicit group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupField {
    Name(String),
    Spec(GroupSpec),
}

impl GroupField {
    pub fn build(&self) -> reslab_core::Result<SchottkyData> {
        match self {
            GroupField::Name(name) => SchottkyData::preset(name),
            GroupField::Spec(spec) => spec.build(),
        }
    }
}

/// Every option is optional; unset options take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// JSON configuration file; flags given on the command line override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,

    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupField>,

    /// Group preset: cylinder(t), symmetric3(theta), sl2z-pair, sl2z-pair(a1,..,d2), sl2z-dense.
    #[arg(long)]
    #[serde(skip)]
    pub preset: Option<String>,

    /// Transfer-matrix truncation order.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmax: Option<usize>,

    /// Word length of the Euler-product cross-check.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_depth: Option<usize>,

    /// Rectangle re0,re1,im0,im1 in the s-plane.
    #[arg(long = "rect", value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rectangle: Option<Vec<f64>>,

    /// Grid size (scan points per axis, pressure samples, or test-function grid).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,

    /// Root-finding tolerance for delta.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,

    /// Worker threads; falls back to RESLAB_THREADS, then the core count.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,

    /// Seed for randomly placed check points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Abelian twist angles theta_1,..,theta_m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,

    /// Quotient moduli N_1,..,N_m (cover-abelian; template for cayley).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<usize>>,

    /// Cover sizes N (equidist) or cycle lengths (cayley gap decay).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,

    /// Primes for the class tables.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<u64>>,

    /// Prime for the trace/conjugacy and character-average checks.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,

    /// Length cutoff exponent: lengths up to beta * ln p.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,

    /// Smallest length cutoff T in the multiplicity growth table.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,

    /// Largest length cutoff T (congruence growth; geodesic sum in explicit-formula).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,

    /// Number of T values in [t_min, t_max].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,

    /// Character window (equidist) or test-function decay parameter (explicit-formula).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,

    /// Number of box factors J in the test function.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,

    /// Fourier envelope range xi_min,xi_max.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,

    /// Envelope exponent alpha in xi/(log xi)^(1+alpha).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// Cycle lengths lo,hi for the Cheeger sandwich check.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<Vec<usize>>,

    /// Directory receiving the output files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: ExperimentConfig) -> ExperimentConfig {
        let base = self;
        overlay!(base, top; config, experiment, group, preset, lmax, word_depth, rectangle, grid, tol,
            threads, seed, theta, moduli, sizes, primes, p, beta, t_min, t_max, steps, epsilon,
            order, xi, alpha, cycles, output_dir)
    }

    /// Loads `--config` if given and applies the remaining flags on top.
    pub fn with_file(self, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
        let mut merged = match &self.config {
            Some(path) => Self::from_file(path)?.overlay(self),
            None => self,
        };
        match merged.experiment {
            Some(e) if e != experiment => {
                return Err(CliError::Validation(format!(
                    "config: file is for experiment {} but {} was requested",
                    e.name(),
                    experiment.name()
                )))
            }
            _ => merged.experiment = Some(experiment),
        }
        if let Some(p) = merged.preset.take() {
            merged.group = Some(GroupField::Name(p));
        }
        Ok(merged)
    }

    /// Thread count from the config, then RESLAB_THREADS, then the core count.
    pub fn thread_count(&self) -> Result<usize, CliError> {
        let n = match self.threads {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Validation(format!("config: {THREADS_ENV}={v:?} is not a count")))?,
                Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            },
        };
        if !(1..=MAX_THREADS).contains(&n) {
            return Err(CliError::Validation(format!("config: threads = {n} outside 1..={MAX_THREADS}")));
        }
        Ok(n)
    }
}

/// Checks a value against a range and names the option on failure.
pub fn check<T: PartialOrd + std::fmt::Debug>(name: &str, v: T, lo: T, hi: T) -> Result<T, CliError> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(CliError::Validation(format!("config: {name} = {v:?} outside [{lo:?}, {hi:?}]")))
    }
}
