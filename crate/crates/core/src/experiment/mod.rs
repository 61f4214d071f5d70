//! Config-driven experiment grids.
//!
//! A config names an objective, the algorithms, their hyper-parameter grids,
//! the pipeline depths and the seeds. Every grid point and seed becomes one
//! run; results are flattened to one CSV row per iteration.

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{
    chain_partition, desk_attack_instance, fig1_objective, linf_objective, linf_objective_with_radius,
    margin_attack_perturbation_objective, quadratic_objective, NetSpec, Objective,
};
use crate::optim::{agd_run, gd_run, pprs_run, PPRSConfig, RunRecord};
use crate::pipeline::{bubbling_makespan, bubbling_schedule, gpipe_erm_schedule, nse_schedule};

pub use config::{Algorithm, ExperimentConfig, Horizon};
pub use output::{emit_plot, read_rows, rows_to_csv, summary_to_csv, write_atomic, PlotAxis};

/// One grid point and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub delta: usize,
    pub samples: usize,
    pub step: f64,
    pub gamma: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl RunSpec {
    pub fn id(&self) -> String {
        match self.algorithm {
            Algorithm::Pprs => format!(
                "pprs_d{}_k{}_lr{:e}_g{:e}_s{}",
                self.delta, self.samples, self.step, self.gamma, self.seed
            ),
            a => format!("{}_d{}_lr{:e}_s{}", a.as_str(), self.delta, self.step, self.seed),
        }
    }
}

/// One CSV row: a run's state after `iteration` steps (0 is the start).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub algorithm: String,
    pub delta: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: f64,
    pub eta: f64,
    pub seed: u64,
    pub iteration: usize,
    pub simulated_time: usize,
    pub loss: f64,
    pub best_loss: f64,
    pub grad_est_norm: Option<f64>,
    pub clarke_min_norm: Option<f64>,
    pub diverged: bool,
}

/// Best grid point of one `(algorithm, Δ, K)` group, by seed-mean of the
/// best-iterate loss.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub delta: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eta: f64,
    pub gamma: f64,
    pub seeds: usize,
    pub mean_best_loss: f64,
    pub mean_final_loss: f64,
    pub diverged_runs: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub runs: Vec<(RunSpec, RunRecord)>,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

fn param<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::ConfigParse(format!("invalid value '{v}' for objective.{key}"))),
    }
}

/// Builds a named objective from `objective.*` parameters.
pub fn build_objective(name: &str, params: &BTreeMap<String, String>) -> Result<Objective> {
    let allowed: &[&str] = match name {
        "linf" => &["d", "lipschitz", "radius"],
        "quadratic" => &["d", "beta"],
        "fig1" => &[],
        "margin_attack" => &["input_dim", "hidden", "classes", "gain", "net_seed", "lambda"],
        other => return Err(Error::ObjectiveUnknown(other.to_string())),
    };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::ConfigParse(format!("objective '{name}' has no parameter '{k}'")));
    }
    match name {
        "linf" => {
            let d = param(params, "d", 16usize)?;
            let l = param(params, "lipschitz", 1.0)?;
            let r = param(params, "radius", 1.0)?;
            if r == 0.0 {
                linf_objective(d, l)
            } else {
                linf_objective_with_radius(d, l, r)
            }
        }
        "quadratic" => quadratic_objective(param(params, "d", 4usize)?, param(params, "beta", 1.0)?),
        "fig1" => Ok(fig1_objective()),
        _ => {
            let defaults = NetSpec::default();
            let hidden = match params.get("hidden") {
                None => defaults.hidden.clone(),
                Some(v) => v
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<Vec<usize>, _>>()
                    .map_err(|_| Error::ConfigParse(format!("invalid value '{v}' for objective.hidden")))?,
            };
            let spec = NetSpec {
                input_dim: param(params, "input_dim", defaults.input_dim)?,
                hidden,
                classes: param(params, "classes", defaults.classes)?,
                gain: param(params, "gain", defaults.gain)?,
                seed: param(params, "net_seed", defaults.seed)?,
            };
            let (net, x, y) = desk_attack_instance(&spec)?;
            margin_attack_perturbation_objective(&net, &x, y, param(params, "lambda", 300.0)?)
        }
    }
}

fn iteration_cost(cfg: &ExperimentConfig, algorithm: Algorithm, delta: usize, k: usize) -> Result<usize> {
    Ok(match algorithm {
        Algorithm::Pprs => bubbling_makespan(delta, k, cfg.tau)?,
        _ => nse_schedule(delta)?.makespan(),
    })
}

/// Expands the config into runs, in a fixed order: depth, algorithm, grid
/// point (`K`, then learning rate, then `γ`), seed.
pub fn plan(cfg: &ExperimentConfig) -> Result<Vec<RunSpec>> {
    cfg.validate()?;
    let mut specs = Vec::with_capacity(cfg.run_count());
    for &delta in &cfg.deltas {
        let k_max = if cfg.algorithms.contains(&Algorithm::Pprs) {
            cfg.pprs_samples.iter().copied().max().unwrap_or(1)
        } else {
            1
        };
        let budget = match cfg.horizon {
            Horizon::Iterations(_) => None,
            Horizon::Budget(b) => Some(b),
            Horizon::ReferenceIterations(n) => Some(n * bubbling_makespan(delta, k_max, cfg.tau)?),
        };
        for &algorithm in &cfg.algorithms {
            let points: Vec<(usize, f64, f64)> = match algorithm {
                Algorithm::Gd => cfg.gd_lrs.iter().map(|&lr| (1, lr, 0.0)).collect(),
                Algorithm::Agd => cfg.agd_lrs.iter().map(|&lr| (1, lr, 0.0)).collect(),
                Algorithm::Pprs => cfg
                    .pprs_samples
                    .iter()
                    .flat_map(|&k| {
                        cfg.pprs_lrs
                            .iter()
                            .flat_map(move |&lr| cfg.pprs_gammas.iter().map(move |&g| (k, lr, g)))
                    })
                    .collect(),
            };
            for (k, step, gamma) in points {
                let iterations = match (cfg.horizon, budget) {
                    (Horizon::Iterations(n), _) => n,
                    (_, Some(b)) => b / iteration_cost(cfg, algorithm, delta, k)?,
                    _ => unreachable!(),
                };
                if iterations == 0 {
                    return Err(Error::ConfigParse(format!(
                        "time budget too small for one {} iteration at delta {delta}",
                        algorithm.as_str()
                    )));
                }
                for &seed in &cfg.seeds {
                    specs.push(RunSpec {
                        algorithm,
                        delta,
                        samples: k,
                        step,
                        gamma,
                        seed,
                        iterations,
                    });
                }
            }
        }
    }
    Ok(specs)
}

fn execute(cfg: &ExperimentConfig, objective: &Objective, spec: &RunSpec) -> Result<RunRecord> {
    match spec.algorithm {
        Algorithm::Gd => gd_run(objective, spec.step, spec.iterations, spec.delta, None),
        Algorithm::Agd => agd_run(objective, spec.step, cfg.agd_momentum, spec.iterations, spec.delta, None),
        Algorithm::Pprs => {
            let mut pc = PPRSConfig::new(spec.iterations, spec.samples, spec.step, spec.gamma, spec.delta);
            pc.momentum = cfg.pprs_momentum;
            pc.seed = spec.seed;
            pc.tau = cfg.tau;
            pc.clarke = cfg.clarke;
            pprs_run(objective, &pc)
        }
    }
}

/// Runs every grid point and seed. Runs execute in parallel but results come
/// back in plan order.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<(RunSpec, RunRecord)>> {
    let base = build_objective(&cfg.objective, &cfg.objective_params)?;
    let chains = cfg
        .deltas
        .iter()
        .map(|&d| Ok((d, chain_partition(&base, d)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let specs = plan(cfg)?;
    specs
        .into_par_iter()
        .map(|spec| {
            let record = execute(cfg, &chains[&spec.delta], &spec)?;
            Ok((spec, record))
        })
        .collect()
}

pub fn rows_for(spec: &RunSpec, record: &RunRecord) -> Vec<ResultRow> {
    let id = spec.id();
    let row = |iteration, simulated_time, loss, best_loss, grad_est_norm, clarke_min_norm| ResultRow {
        run_id: id.clone(),
        algorithm: spec.algorithm.as_str().to_string(),
        delta: spec.delta,
        k: spec.samples,
        gamma: spec.gamma,
        eta: spec.step,
        seed: spec.seed,
        iteration,
        simulated_time,
        loss,
        best_loss,
        grad_est_norm,
        clarke_min_norm,
        diverged: record.diverged,
    };
    let mut rows = Vec::with_capacity(record.iterations.len() + 1);
    rows.push(row(0, 0, record.initial_loss, record.initial_loss, None, None));
    for it in &record.iterations {
        rows.push(row(
            it.t,
            it.simulated_time,
            it.loss,
            it.best_loss,
            Some(it.grad_norm),
            it.clarke_min_norm,
        ));
    }
    rows
}

/// Best grid point per `(algorithm, Δ, K)`. Ties go to the smaller learning
/// rate, then the smaller `γ`.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    // last row of each run
    let mut last: BTreeMap<&str, &ResultRow> = BTreeMap::new();
    for r in rows {
        match last.get(r.run_id.as_str()) {
            Some(prev) if prev.iteration >= r.iteration => {}
            _ => {
                last.insert(&r.run_id, r);
            }
        }
    }
    type Point = (String, usize, usize, u64, u64);
    let mut points: BTreeMap<Point, Vec<&ResultRow>> = BTreeMap::new();
    for r in last.values() {
        let key = (r.algorithm.clone(), r.delta, r.k, r.eta.to_bits(), r.gamma.to_bits());
        points.entry(key).or_default().push(r);
    }
    let mut best: BTreeMap<(String, usize, usize), SummaryRow> = BTreeMap::new();
    for ((alg, delta, k, _, _), runs) in points {
        let n = runs.len() as f64;
        let cand = SummaryRow {
            algorithm: alg.clone(),
            delta,
            k,
            eta: runs[0].eta,
            gamma: runs[0].gamma,
            seeds: runs.len(),
            mean_best_loss: runs.iter().map(|r| r.best_loss).sum::<f64>() / n,
            mean_final_loss: runs.iter().map(|r| r.loss).sum::<f64>() / n,
            diverged_runs: runs.iter().filter(|r| r.diverged).count(),
        };
        let slot = best.entry((alg, delta, k)).or_insert_with(|| cand.clone());
        let better = cand
            .mean_best_loss
            .total_cmp(&slot.mean_best_loss)
            .then(cand.eta.total_cmp(&slot.eta))
            .then(cand.gamma.total_cmp(&slot.gamma))
            .is_lt();
        if better {
            *slot = cand;
        }
    }
    best.into_values().collect()
}

/// Runs the grid and writes `results.csv` and `summary.csv` to the output
/// directory.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::OutputUnwritable(format!("{}: {e}", cfg.out.display())))?;
    let runs = run_grid(cfg)?;
    let rows: Vec<ResultRow> = runs.iter().flat_map(|(s, r)| rows_for(s, r)).collect();
    let summary = summarize(&rows);
    let results_path = cfg.out.join("results.csv");
    let summary_path = cfg.out.join("summary.csv");
    write_atomic(&results_path, rows_to_csv(&rows)?.as_bytes())?;
    write_atomic(&summary_path, summary_to_csv(&summary)?.as_bytes())?;
    Ok(ExperimentOutput {
        runs,
        rows,
        summary,
        files: vec![results_path, summary_path],
    })
}

/// Cell listing of a schedule as CSV. `m` is only used by the ERM mode.
pub fn schedule_export(delta: usize, k: usize, mode: &str, m: usize, tau: usize) -> Result<String> {
    let schedule = match mode {
        "bubbling" => bubbling_schedule(delta, k, tau)?,
        "nse" => nse_schedule(delta)?,
        "gpipe" | "gpipe_erm" => gpipe_erm_schedule(delta, m, k)?,
        other => return Err(Error::UnknownMode(other.to_string())),
    };
    Ok(schedule.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::parse(
            "objective.name = linf\nobjective.d = 3\nrun.deltas = 4\nrun.iterations = 5\nrun.seeds = 0,1\n\
             gd.lr = 0.1, 0.01\nagd.lr = 0.01\npprs.lr = 0.1\npprs.gamma = 0.01, 0.001\npprs.samples = 2\n",
        )
        .unwrap()
    }

    #[test]
    fn plan_order_and_size() {
        let cfg = small();
        let specs = plan(&cfg).unwrap();
        assert_eq!(specs.len(), cfg.run_count());
        assert_eq!(specs.len(), (2 + 1 + 2) * 2);
        assert_eq!(specs[0].algorithm, Algorithm::Gd);
        assert_eq!(specs.last().unwrap().algorithm, Algorithm::Pprs);
    }

    #[test]
    fn budget_horizon() {
        let mut cfg = ExperimentConfig::parse("run.seeds = 0\nrun.deltas = 200\npprs.samples = 2, 10, 100").unwrap();
        cfg.horizon = Horizon::ReferenceIterations(200);
        let specs = plan(&cfg).unwrap();
        let iters = |alg, k| specs.iter().find(|s| s.algorithm == alg && s.samples == k).unwrap().iterations;
        assert_eq!(iters(Algorithm::Pprs, 100), 200);
        assert_eq!(iters(Algorithm::Pprs, 10), 119_600 / 418);
        assert_eq!(iters(Algorithm::Gd, 1), 299);
        assert_eq!(iters(Algorithm::Agd, 1), 299);
    }

    #[test]
    fn unknown_objective() {
        let mut cfg = small();
        cfg.objective = "resnet".into();
        assert_eq!(run_grid(&cfg).unwrap_err(), Error::ObjectiveUnknown("resnet".into()));
        cfg.objective = "fig1".into();
        cfg.objective_params.insert("d".into(), "3".into());
        assert!(matches!(run_grid(&cfg), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn registry_builds_every_objective() {
        let none = BTreeMap::new();
        for name in ["linf", "quadratic", "fig1", "margin_attack"] {
            let f = build_objective(name, &none).unwrap();
            assert!(f.value(&vec![0.0; f.dim()]).unwrap().is_finite());
        }
    }

    #[test]
    fn summary_picks_best_and_breaks_ties() {
        let runs = run_grid(&small()).unwrap();
        let rows: Vec<ResultRow> = runs.iter().flat_map(|(s, r)| rows_for(s, r)).collect();
        assert_eq!(rows.len(), runs.len() * 6);
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 3);
        let gd = summary.iter().find(|s| s.algorithm == "gd").unwrap();
        let by_lr = |lr: f64| {
            let v: Vec<f64> = runs
                .iter()
                .filter(|(s, _)| s.algorithm == Algorithm::Gd && s.step == lr)
                .map(|(_, r)| r.best_loss())
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert_eq!(gd.mean_best_loss, by_lr(0.1).min(by_lr(0.01)));
        // PPRS rows with equal losses for both γ would pick the smaller one
        let mut tied = rows.clone();
        for r in tied.iter_mut().filter(|r| r.algorithm == "pprs") {
            r.loss = 1.0;
            r.best_loss = 1.0;
        }
        let p = summarize(&tied).into_iter().find(|s| s.algorithm == "pprs").unwrap();
        assert_eq!(p.gamma, 0.001);
    }

    #[test]
    fn schedule_export_modes() {
        let csv = schedule_export(4, 4, "bubbling", 1, 0).unwrap();
        assert_eq!(csv.lines().count(), 1 + 32);
        assert_eq!(schedule_export(3, 1, "nse", 1, 0).unwrap().lines().count(), 1 + 6);
        let g = schedule_export(2, 1, "gpipe", 3, 0).unwrap();
        let max_slot = g
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap())
            .max()
            .unwrap();
        assert_eq!(max_slot, 8);
        assert_eq!(schedule_export(2, 2, "1f1b", 1, 0).unwrap_err(), Error::UnknownMode("1f1b".into()));
    }
}
