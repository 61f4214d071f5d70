//! Flat `section.key = value` experiment files.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown keys are errors so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::{ClarkeMonitor, Momentum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Gd,
    Agd,
    Pprs,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Agd => "agd",
            Algorithm::Pprs => "pprs",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(Algorithm::Gd),
            "agd" => Ok(Algorithm::Agd),
            "pprs" => Ok(Algorithm::Pprs),
            other => Err(Error::ConfigParse(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How many iterations each run gets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    /// Same iteration count for every algorithm.
    Iterations(usize),
    /// Fixed simulated-time budget; each run does as many iterations as fit.
    Budget(usize),
    /// Budget of this many PPRS iterations at the largest `K`, per depth.
    ReferenceIterations(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Objective name plus its `objective.*` parameters.
    pub objective: String,
    pub objective_params: BTreeMap<String, String>,
    pub algorithms: Vec<Algorithm>,
    pub deltas: Vec<usize>,
    pub horizon: Horizon,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub tau: usize,
    pub gd_lrs: Vec<f64>,
    pub agd_lrs: Vec<f64>,
    pub agd_momentum: Momentum,
    pub pprs_lrs: Vec<f64>,
    pub pprs_gammas: Vec<f64>,
    pub pprs_samples: Vec<usize>,
    pub pprs_momentum: Momentum,
    pub clarke: Option<ClarkeMonitor>,
}

const DEFAULT_GRID: [f64; 5] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            objective: "margin_attack".into(),
            objective_params: BTreeMap::new(),
            algorithms: vec![Algorithm::Gd, Algorithm::Agd, Algorithm::Pprs],
            deltas: vec![20, 200],
            horizon: Horizon::ReferenceIterations(200),
            seeds: (0..5).collect(),
            out: PathBuf::from("results"),
            tau: 0,
            gd_lrs: DEFAULT_GRID.to_vec(),
            agd_lrs: DEFAULT_GRID.to_vec(),
            agd_momentum: Momentum::Constant(0.99),
            pprs_lrs: DEFAULT_GRID.to_vec(),
            pprs_gammas: DEFAULT_GRID.to_vec(),
            pprs_samples: vec![2, 10, 100],
            pprs_momentum: Momentum::Constant(0.0),
            clarke: None,
        }
    }
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ConfigParse(format!("line {line}: {msg}"))
}

fn scalar<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse_err(line, format!("invalid value '{v}' for {key}")))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(line, key, s))
        .collect()
}

fn momentum(line: usize, key: &str, v: &str) -> Result<Momentum> {
    if v == "accelerated" {
        Ok(Momentum::Accelerated)
    } else {
        scalar(line, key, v).map(Momentum::Constant)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut horizon_set = false;
        let (mut radius, mut samples, mut every) = (None, None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, "expected 'section.key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "objective.name" => cfg.objective = value.to_string(),
                k if k.starts_with("objective.") => {
                    cfg.objective_params
                        .insert(k["objective.".len()..].to_string(), value.to_string());
                }
                "run.algorithms" => cfg.algorithms = list(line, key, value)?,
                "run.deltas" => cfg.deltas = list(line, key, value)?,
                "run.iterations" | "run.budget" | "run.reference_iterations" => {
                    if horizon_set {
                        return Err(parse_err(line, "only one of run.iterations, run.budget, run.reference_iterations"));
                    }
                    horizon_set = true;
                    let n: usize = scalar(line, key, value)?;
                    cfg.horizon = match key {
                        "run.iterations" => Horizon::Iterations(n),
                        "run.budget" => Horizon::Budget(n),
                        _ => Horizon::ReferenceIterations(n),
                    };
                }
                "run.seeds" => cfg.seeds = list(line, key, value)?,
                "run.out" => cfg.out = PathBuf::from(value),
                "pipeline.tau" => cfg.tau = scalar(line, key, value)?,
                "gd.lr" => cfg.gd_lrs = list(line, key, value)?,
                "agd.lr" => cfg.agd_lrs = list(line, key, value)?,
                "agd.momentum" => cfg.agd_momentum = momentum(line, key, value)?,
                "pprs.lr" => cfg.pprs_lrs = list(line, key, value)?,
                "pprs.gamma" | "smoothing.gamma" => cfg.pprs_gammas = list(line, key, value)?,
                "pprs.samples" | "smoothing.samples" => cfg.pprs_samples = list(line, key, value)?,
                "pprs.momentum" => cfg.pprs_momentum = momentum(line, key, value)?,
                "clarke.radius" => radius = Some(scalar(line, key, value)?),
                "clarke.samples" => samples = Some(scalar(line, key, value)?),
                "clarke.every" => every = Some(scalar(line, key, value)?),
                other => return Err(parse_err(line, format!("unknown key '{other}'"))),
            }
        }
        if let Some(radius) = radius {
            cfg.clarke = Some(ClarkeMonitor {
                radius,
                samples: samples.unwrap_or(32),
                every: every.unwrap_or(10),
            });
        } else if samples.is_some() || every.is_some() {
            return Err(Error::ConfigParse("clarke.samples/every need clarke.radius".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::ConfigParse(format!("{what} must not be empty")));
        if self.algorithms.is_empty() {
            return empty("run.algorithms");
        }
        if self.deltas.is_empty() || self.deltas.contains(&0) {
            return Err(Error::ConfigParse("run.deltas must be non-empty and positive".into()));
        }
        if self.seeds.is_empty() {
            return empty("run.seeds");
        }
        for alg in &self.algorithms {
            let lrs = match alg {
                Algorithm::Gd => &self.gd_lrs,
                Algorithm::Agd => &self.agd_lrs,
                Algorithm::Pprs => &self.pprs_lrs,
            };
            if lrs.is_empty() {
                return empty(&format!("{}.lr", alg.as_str()));
            }
            if lrs.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
                return Err(Error::ConfigParse(format!("{}.lr entries must be positive", alg.as_str())));
            }
        }
        if self.algorithms.contains(&Algorithm::Pprs) {
            if self.pprs_gammas.is_empty() {
                return empty("pprs.gamma");
            }
            if self.pprs_samples.is_empty() || self.pprs_samples.contains(&0) {
                return Err(Error::ConfigParse("pprs.samples must be non-empty and positive".into()));
            }
            if self.pprs_gammas.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
                return Err(Error::ConfigParse("pprs.gamma entries must be positive".into()));
            }
        }
        let n = match self.horizon {
            Horizon::Iterations(n) | Horizon::Budget(n) | Horizon::ReferenceIterations(n) => n,
        };
        if n == 0 {
            return Err(Error::ConfigParse("run horizon must be positive".into()));
        }
        Ok(())
    }

    /// Number of runs the grid expands to.
    pub fn run_count(&self) -> usize {
        let per_delta: usize = self
            .algorithms
            .iter()
            .map(|a| match a {
                Algorithm::Gd => self.gd_lrs.len(),
                Algorithm::Agd => self.agd_lrs.len(),
                Algorithm::Pprs => self.pprs_lrs.len() * self.pprs_gammas.len() * self.pprs_samples.len(),
            })
            .sum();
        per_delta * self.deltas.len() * self.seeds.len()
    }
}
