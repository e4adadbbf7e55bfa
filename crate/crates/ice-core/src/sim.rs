//! Segregation scenario generation and the model-comparison experiment.
//!
//! Four scenarios pair a low/high segregation contrast with low/moderate
//! spatial correlation. Logit-scale proportion fields are drawn from a
//! proper CAR GMRF (`Q = D - rho W`, conditional scale `sigma^2`)
//! independently per group, then counts are drawn binomially with a shared
//! per-county denominator:
//!
//! | scenario | mean1  | mean2  | variance | rho  |
//! |----------|--------|--------|----------|------|
//! | 1        | -1.72  | -1.72  | 0.2      | 0.2  |
//! | 2        | -1.72  | -1.72  | 0.2      | 0.65 |
//! | 3        | -1.72  | -0.4   | 0.4      | 0.2  |
//! | 4        | -1.72  | -0.4   | 0.4      | 0.65 |

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::car::{car_precision, CarKind, GmrfSampler};
use crate::diag::{evaluate_replicates, waic_joint, EvalSummary, ReplicateEval};
use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;
use crate::ice::{bootstrap_ice, posterior_ice, IceSummary};
use crate::mcmc::fit_ice_model;
use crate::model::{inv_logit, Approach, CountyObservation, McmcSettings, ModelSpec};
use crate::seeds;

/// Parameters for one simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    /// Logit-scale mean of the high-income White field.
    pub mean1: f64,
    /// Logit-scale mean of the low-income Black field.
    pub mean2: f64,
    /// Conditional GMRF scale `sigma^2`.
    pub variance: f64,
    /// Proper-CAR mixing parameter.
    pub rho: f64,
    /// Per-county denominator `N`.
    pub population: u64,
    pub replicates: usize,
}

impl ScenarioSpec {
    /// The standard parameter binding for scenario ids 1-4.
    pub fn standard(id: u8, population: u64, replicates: usize) -> Result<Self> {
        let (mean1, mean2, variance, rho) = match id {
            1 => (-1.72, -1.72, 0.2, 0.2),
            2 => (-1.72, -1.72, 0.2, 0.65),
            3 => (-1.72, -0.4, 0.4, 0.2),
            4 => (-1.72, -0.4, 0.4, 0.65),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "scenario id must be 1..=4, got {other}"
                )))
            }
        };
        Ok(ScenarioSpec {
            id,
            mean1,
            mean2,
            variance,
            rho,
            population,
            replicates,
        })
    }
}

/// One simulated data set with its recorded truths.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub scenario: u8,
    pub replicate: usize,
    pub seed: u64,
    pub truth_p1: Vec<f64>,
    pub truth_p2: Vec<f64>,
    pub observations: Vec<CountyObservation>,
    /// Count of county pairs redrawn because `y1 + y2 > N`.
    pub redraws: usize,
}

impl SimulatedDataset {
    pub fn truth_ice(&self) -> Vec<f64> {
        self.truth_p1
            .iter()
            .zip(&self.truth_p2)
            .map(|(p1, p2)| p1 - p2)
            .collect()
    }
}

/// Generate one data set under `spec` on `graph` using the caller's RNG.
pub fn generate(
    spec: &ScenarioSpec,
    graph: &AdjacencyGraph,
    rng: &mut ChaCha8Rng,
) -> Result<SimulatedDataset> {
    if graph.n() < 2 {
        return Err(Error::InvalidArgument(
            "simulation graph needs at least 2 units".into(),
        ));
    }
    if spec.population == 0 {
        return Err(Error::InvalidArgument("population N must be >= 1".into()));
    }
    let precision = car_precision(graph, CarKind::Proper(spec.rho))?;
    let sampler = GmrfSampler::new(&precision, spec.variance)?;
    let x1 = sampler.sample(rng);
    let x2 = sampler.sample(rng);
    let truth_p1: Vec<f64> = x1.iter().map(|x| inv_logit(spec.mean1 + x)).collect();
    let truth_p2: Vec<f64> = x2.iter().map(|x| inv_logit(spec.mean2 + x)).collect();

    let n = spec.population;
    let mut observations = Vec::with_capacity(graph.n());
    let mut redraws = 0usize;
    for i in 0..graph.n() {
        let d1 = Binomial::new(n, truth_p1[i]).expect("probability in (0,1)");
        let d2 = Binomial::new(n, truth_p2[i]).expect("probability in (0,1)");
        let mut attempts = 0;
        let (y1, y2) = loop {
            let y1 = d1.sample(rng);
            let y2 = d2.sample(rng);
            if y1 + y2 <= n {
                break (y1, y2);
            }
            attempts += 1;
            redraws += 1;
            log::debug!(
                "redrawing county {} (attempt {attempts}): y1 + y2 = {} > {n}",
                graph.unit_ids()[i],
                y1 + y2
            );
            if attempts >= 1000 {
                return Err(Error::NumericalFailure {
                    sweep: attempts,
                    detail: format!(
                        "county {} cannot satisfy y1 + y2 <= N (p1 + p2 = {:.3})",
                        graph.unit_ids()[i],
                        truth_p1[i] + truth_p2[i]
                    ),
                });
            }
        };
        observations.push(CountyObservation {
            unit_id: graph.unit_ids()[i].clone(),
            name: String::new(),
            y_group1: y1,
            y_group2: y2,
            n_total: n,
        });
    }
    Ok(SimulatedDataset {
        scenario: spec.id,
        replicate: 0,
        seed: 0,
        truth_p1,
        truth_p2,
        observations,
        redraws,
    })
}

/// Generate replicate `replicate` of a scenario with a seed derived from the
/// run seed and the task coordinates; deterministic under any scheduling.
pub fn generate_replicate(
    spec: &ScenarioSpec,
    graph: &AdjacencyGraph,
    base_seed: u64,
    replicate: usize,
) -> Result<SimulatedDataset> {
    let seed = seeds::mix(
        base_seed,
        &[spec.id as u64, spec.population, replicate as u64],
    );
    let mut rng = seeds::rng(seed);
    let mut data = generate(spec, graph, &mut rng)?;
    data.replicate = replicate;
    data.seed = seed;
    Ok(data)
}

/// Write the recorded truths of several replicates as
/// `replicate,fips,p_group1,p_group2,ice`.
pub fn write_truths_csv(path: impl AsRef<Path>, datasets: &[SimulatedDataset]) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let err = |e: csv::Error| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(err)?;
    w.write_record(["replicate", "fips", "p_group1", "p_group2", "ice"])
        .map_err(err)?;
    for data in datasets {
        for (i, obs) in data.observations.iter().enumerate() {
            w.write_record([
                data.replicate.to_string(),
                obs.unit_id.clone(),
                data.truth_p1[i].to_string(),
                data.truth_p2[i].to_string(),
                (data.truth_p1[i] - data.truth_p2[i]).to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// One fitted model in the comparison (approach plus cluster count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub approach: Approach,
    pub clusters: usize,
}

impl ModelChoice {
    pub fn new(approach: Approach, clusters: usize) -> Self {
        ModelChoice {
            approach,
            clusters,
        }
    }

    /// Parse `bootstrap | icar | bym | leroux | localK`.
    pub fn parse(token: &str) -> Result<Self> {
        let token = token.trim();
        if let Some(q) = token.strip_prefix("local") {
            let clusters: usize = if q.is_empty() {
                3
            } else {
                q.trim_start_matches([':', '-']).parse().map_err(|_| {
                    Error::InvalidSpec(format!("bad cluster count in model `{token}`"))
                })?
            };
            if clusters == 0 {
                return Err(Error::InvalidSpec("cluster count q must be >= 1".into()));
            }
            return Ok(ModelChoice::new(Approach::Local, clusters));
        }
        Ok(ModelChoice::new(token.parse()?, 1))
    }

    /// Canonical table label (M1-M6 for the standard comparison set).
    pub fn label(&self) -> String {
        match (self.approach, self.clusters) {
            (Approach::Bootstrap, _) => "M1-Bootstrap".into(),
            (Approach::Bym, _) => "M2-BYM".into(),
            (Approach::Icar, _) => "M3-ICAR".into(),
            (Approach::Leroux, _) => "M4-Leroux".into(),
            (Approach::Local, 2) => "M5-L2".into(),
            (Approach::Local, 3) => "M6-L3".into(),
            (Approach::Local, q) => format!("local-q{q}"),
        }
    }

    fn rank(&self) -> usize {
        match (self.approach, self.clusters) {
            (Approach::Bootstrap, _) => 1,
            (Approach::Bym, _) => 2,
            (Approach::Icar, _) => 3,
            (Approach::Leroux, _) => 4,
            (Approach::Local, q) => 3 + q,
        }
    }
}

/// Experiment configuration; parses from a `key = value` text file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenarios: Vec<u8>,
    pub populations: Vec<u64>,
    pub models: Vec<ModelChoice>,
    pub replicates: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior_shape: f64,
    pub prior_rate: f64,
    pub bootstrap_replicates: usize,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Paper-scale defaults: every scenario, every population size, all six
    /// models, 100 replicates.
    pub fn standard(seed: u64) -> Self {
        ExperimentConfig {
            scenarios: vec![1, 2, 3, 4],
            populations: vec![150, 500, 2000],
            models: vec![
                ModelChoice::new(Approach::Bootstrap, 1),
                ModelChoice::new(Approach::Bym, 1),
                ModelChoice::new(Approach::Icar, 1),
                ModelChoice::new(Approach::Leroux, 1),
                ModelChoice::new(Approach::Local, 2),
                ModelChoice::new(Approach::Local, 3),
            ],
            replicates: 100,
            seed,
            iterations: 50_000,
            burn_in: 20_000,
            thin: 1,
            prior_shape: 1.0,
            prior_rate: 0.01,
            bootstrap_replicates: 10_000,
            output_dir: None,
        }
    }

    /// Parse a `key = value` config file. Keys: `scenarios`, `populations`
    /// (alias `n`), `models`, `replicates`, `seed`, `iterations`, `burnin`,
    /// `thin`, `prior_a`, `prior_b`, `bootstrap_b`, `out`. `seed` and
    /// `models` are mandatory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&display, e))?;
        let mut cfg = ExperimentConfig::standard(0);
        cfg.models.clear();
        let mut saw_seed = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                msg,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let items = || value.split(',').map(str::trim).filter(|s| !s.is_empty());
            match key {
                "scenarios" => {
                    cfg.scenarios = items()
                        .map(|s| s.parse().map_err(|_| parse_err(format!("bad scenario `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                "populations" | "n" => {
                    cfg.populations = items()
                        .map(|s| s.parse().map_err(|_| parse_err(format!("bad population `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                "models" => {
                    cfg.models = items().map(ModelChoice::parse).collect::<Result<_>>()?;
                }
                "replicates" => {
                    cfg.replicates = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad replicates `{value}`")))?;
                }
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad seed `{value}`")))?;
                    saw_seed = true;
                }
                "iterations" => {
                    cfg.iterations = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad iterations `{value}`")))?;
                }
                "burnin" | "burn_in" => {
                    cfg.burn_in = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad burnin `{value}`")))?;
                }
                "thin" => {
                    cfg.thin = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad thin `{value}`")))?;
                }
                "prior_a" => {
                    cfg.prior_shape = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad prior_a `{value}`")))?;
                }
                "prior_b" => {
                    cfg.prior_rate = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad prior_b `{value}`")))?;
                }
                "bootstrap_b" | "b" => {
                    cfg.bootstrap_replicates = value
                        .parse()
                        .map_err(|_| parse_err(format!("bad bootstrap_b `{value}`")))?;
                }
                "out" | "output" => {
                    cfg.output_dir = Some(PathBuf::from(value));
                }
                other => return Err(parse_err(format!("unknown key `{other}`"))),
            }
        }
        if !saw_seed {
            return Err(Error::InvalidSpec(format!("{display}: `seed` is mandatory")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::InvalidSpec("model list is empty".into()));
        }
        if self.scenarios.is_empty() || self.populations.is_empty() {
            return Err(Error::InvalidSpec(
                "need at least one scenario and one population size".into(),
            ));
        }
        for &s in &self.scenarios {
            ScenarioSpec::standard(s, 1, 1)?;
        }
        if self.replicates == 0 {
            return Err(Error::InvalidSpec("replicates must be >= 1".into()));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidSpec(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }

    fn model_spec(&self, model: ModelChoice, seed: u64) -> ModelSpec {
        ModelSpec {
            approach: model.approach,
            clusters: model.clusters,
            prior_shape: self.prior_shape,
            prior_rate: self.prior_rate,
            mcmc: McmcSettings {
                iterations: self.iterations,
                burn_in: self.burn_in,
                thin: self.thin,
                seed,
            },
            bootstrap_replicates: self.bootstrap_replicates,
            ..ModelSpec::default()
        }
    }
}

/// Aggregated metrics for one (scenario, population, model) cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub scenario: u8,
    pub population: u64,
    pub model: ModelChoice,
    pub summary: EvalSummary,
    pub mean_waic: Option<f64>,
    pub replicates_used: usize,
    pub failures: usize,
}

/// Full experiment output.
#[derive(Debug, Clone)]
pub struct ExperimentTable {
    pub cells: Vec<CellResult>,
}

impl ExperimentTable {
    pub fn cell(&self, scenario: u8, population: u64, approach: Approach, clusters: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.scenario == scenario
                && c.population == population
                && c.model.approach == approach
                && (c.model.approach != Approach::Local || c.model.clusters == clusters)
        })
    }

    /// Write one `table_N<population>.csv` per population size, mirroring the
    /// metric-by-scenario rows and model columns of the comparison tables.
    /// WAIC rows are omitted when no fitted model produces one; the bootstrap
    /// column is left blank there. Returns the written paths.
    pub fn write_tables(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let populations: BTreeSet<u64> = self.cells.iter().map(|c| c.population).collect();
        let scenarios: BTreeSet<u8> = self.cells.iter().map(|c| c.scenario).collect();
        let mut models: Vec<ModelChoice> = Vec::new();
        for cell in &self.cells {
            if !models.contains(&cell.model) {
                models.push(cell.model);
            }
        }
        models.sort_by_key(|m| m.rank());
        let any_waic = self.cells.iter().any(|c| c.mean_waic.is_some());
        let mut written = Vec::new();
        for &population in &populations {
            let path = dir.join(format!("table_N{population}.csv"));
            let display = path.display().to_string();
            let err = |e: csv::Error| Error::Parse {
                path: display.clone(),
                line: 0,
                msg: e.to_string(),
            };
            let mut w = csv::Writer::from_path(&path).map_err(err)?;
            let mut header = vec!["metric".to_string(), "scenario".to_string()];
            header.extend(models.iter().map(|m| m.label()));
            w.write_record(&header).map_err(err)?;
            let metrics: &[&str] = if any_waic {
                &["rmse", "coverage", "width", "waic"]
            } else {
                &["rmse", "coverage", "width"]
            };
            for metric in metrics {
                for &scenario in &scenarios {
                    let mut row = vec![metric.to_string(), scenario.to_string()];
                    for model in &models {
                        let cell = self.cell(scenario, population, model.approach, model.clusters);
                        let value = cell.map(|c| match *metric {
                            "rmse" => Some(c.summary.rmse),
                            "coverage" => Some(c.summary.coverage),
                            "width" => Some(c.summary.mean_width),
                            _ => c.mean_waic,
                        });
                        row.push(match value {
                            Some(Some(v)) => format!("{v:.6}"),
                            _ => String::new(),
                        });
                    }
                    w.write_record(&row).map_err(err)?;
                }
            }
            w.flush().map_err(|e| Error::io(&display, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Fit one model to one simulated data set on `graph`, returning the ICE
/// summary and (for Bayesian models) the joint WAIC.
pub fn fit_model_to_dataset(
    model: ModelChoice,
    data: &SimulatedDataset,
    graph: &AdjacencyGraph,
    config: &ExperimentConfig,
    fit_seed: u64,
) -> Result<(IceSummary, Option<f64>)> {
    if model.approach == Approach::Bootstrap {
        let mut rng = seeds::rng(fit_seed);
        let summary = bootstrap_ice(&data.observations, config.bootstrap_replicates, &mut rng)?;
        Ok((summary, None))
    } else {
        let spec = config.model_spec(model, fit_seed);
        let (d1, d2) = fit_ice_model(&data.observations, graph, &spec)?;
        let waic = waic_joint(&d1, &d2)?;
        Ok((posterior_ice(&d1, &d2)?, Some(waic.waic)))
    }
}

/// Run the full comparison: for every (scenario, population, model,
/// replicate), generate the replicate data set (shared across models via
/// seed derivation), fit, summarize per-county ICE, and evaluate against the
/// recorded truths. Failed replicates are counted and excluded, never
/// silently dropped.
pub fn run_experiment(config: &ExperimentConfig, graph: &AdjacencyGraph) -> Result<ExperimentTable> {
    config.validate()?;
    struct Task {
        scenario: u8,
        population: u64,
        model_idx: usize,
        replicate: usize,
    }
    let mut tasks = Vec::new();
    for &scenario in &config.scenarios {
        for &population in &config.populations {
            for model_idx in 0..config.models.len() {
                for replicate in 0..config.replicates {
                    tasks.push(Task {
                        scenario,
                        population,
                        model_idx,
                        replicate,
                    });
                }
            }
        }
    }

    let outcomes: Vec<Result<(ReplicateEval, Option<f64>)>> = tasks
        .par_iter()
        .map(|task| {
            let scenario =
                ScenarioSpec::standard(task.scenario, task.population, config.replicates)?;
            let data = generate_replicate(&scenario, graph, config.seed, task.replicate)?;
            let model = config.models[task.model_idx];
            let fit_seed = seeds::mix(
                config.seed,
                &[
                    task.scenario as u64,
                    task.population,
                    task.replicate as u64,
                    1000 + task.model_idx as u64,
                ],
            );
            let (summary, waic) = fit_model_to_dataset(model, &data, graph, config, fit_seed)?;
            let eval = ReplicateEval {
                estimates: summary.counties.iter().map(|c| c.estimate).collect(),
                lower: summary.counties.iter().map(|c| c.lower).collect(),
                upper: summary.counties.iter().map(|c| c.upper).collect(),
                truths: data.truth_ice(),
            };
            Ok((eval, waic))
        })
        .collect();

    let mut cells = Vec::new();
    for &scenario in &config.scenarios {
        for &population in &config.populations {
            for (model_idx, &model) in config.models.iter().enumerate() {
                let mut evals = Vec::new();
                let mut waics = Vec::new();
                let mut failures = 0usize;
                for (task, outcome) in tasks.iter().zip(&outcomes) {
                    if task.scenario != scenario
                        || task.population != population
                        || task.model_idx != model_idx
                    {
                        continue;
                    }
                    match outcome {
                        Ok((eval, waic)) => {
                            evals.push(eval.clone());
                            if let Some(w) = waic {
                                waics.push(*w);
                            }
                        }
                        Err(e) => {
                            failures += 1;
                            log::warn!(
                                "replicate {} of scenario {scenario} N={population} {} failed: {e}",
                                task.replicate,
                                model.label()
                            );
                        }
                    }
                }
                if evals.is_empty() {
                    return Err(Error::NumericalFailure {
                        sweep: 0,
                        detail: format!(
                            "every replicate failed for scenario {scenario} N={population} {}",
                            model.label()
                        ),
                    });
                }
                let summary = evaluate_replicates(&evals)?;
                let mean_waic = if waics.is_empty() {
                    None
                } else {
                    Some(waics.iter().sum::<f64>() / waics.len() as f64)
                };
                cells.push(CellResult {
                    scenario,
                    population,
                    model,
                    summary,
                    mean_waic,
                    replicates_used: evals.len(),
                    failures,
                });
            }
        }
    }
    Ok(ExperimentTable { cells })
}
