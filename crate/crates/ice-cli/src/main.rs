//! `ice` — reproducible estimation of the Index of Concentration at the
//! Extremes over areal units.
//!
//! Subcommands: `fit` (estimate ICE from county observations), `simulate`
//! (generate scenario data sets), `evaluate` (run or score the
//! model-comparison experiment), `report` (sign changes between two
//! summaries plus a map-ready GeoJSON export).
//!
//! Every command is a pure function of its input files, flags, and seed; a
//! run manifest records enough to re-execute it. Exit codes: 0 success,
//! 1 usage, 2 data validation, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use ice_core::diag::{convergence_summary, waic_joint};
use ice_core::graph::AdjacencyGraph;
use ice_core::ice::{bootstrap_ice, posterior_ice, sign_change_report, IceSummary, Transition};
use ice_core::mcmc::{fit_ice_model, PosteriorDraws};
use ice_core::model::{read_observations_csv, write_observations_csv, Approach, McmcSettings, ModelSpec};
use ice_core::sim::{generate_replicate, write_truths_csv, ExperimentConfig, ScenarioSpec};
use ice_core::Error;

#[derive(Parser)]
#[command(name = "ice", version, about = "Spatially smoothed ICE estimation")]
struct Cli {
    /// Cap on worker threads (0 uses the rayon default). Outputs are
    /// identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimation approach and write ICE summaries, WAIC, and
    /// convergence diagnostics.
    Fit(FitArgs),
    /// Generate simulated data sets for one scenario.
    Simulate(SimulateArgs),
    /// Run the model-comparison experiment, or score existing estimates
    /// against recorded truths.
    Evaluate(EvaluateArgs),
    /// Sign-change table between two summaries, with optional GeoJSON export.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Estimation approach: bootstrap, icar, bym, leroux, or local.
    #[arg(long)]
    model: Approach,
    /// Cluster count q for the locally smooth model.
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 50_000)]
    iters: usize,
    #[arg(long, default_value_t = 20_000)]
    burnin: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Bootstrap replicate count B.
    #[arg(long, default_value_t = 10_000)]
    b: usize,
    /// Inverse-gamma prior shape for the variance components.
    #[arg(long, default_value_t = 1.0)]
    prior_a: f64,
    /// Inverse-gamma prior rate for the variance components.
    #[arg(long, default_value_t = 0.01)]
    prior_b: f64,
    #[arg(long)]
    seed: u64,
    /// Observations CSV (fips,name,n_total,y_white_high,y_black_low).
    #[arg(long)]
    data: PathBuf,
    /// Adjacency file: edge-list CSV (src,dst) or GAL neighbor list.
    #[arg(long)]
    adjacency: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also dump retained draws as CSV (large).
    #[arg(long, default_value_t = false)]
    dump_draws: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    scenario: u8,
    /// Per-county denominator N.
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Adjacency file; defaults to the built-in 12x13 rook lattice (156 units).
    #[arg(long)]
    adjacency: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config file (key = value lines).
    #[arg(long, conflicts_with_all = ["estimates", "truths"])]
    config: Option<PathBuf>,
    /// Pre-computed estimates CSV (replicate,fips,estimate,lower,upper).
    #[arg(long, requires = "truths")]
    estimates: Option<PathBuf>,
    /// Truths CSV as written by `simulate` (replicate,fips,p_group1,p_group2,ice).
    #[arg(long)]
    truths: Option<PathBuf>,
    /// Adjacency file; defaults to the built-in 12x13 rook lattice.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// Output directory (overrides the config file's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Earlier-period ICE summary JSON.
    #[arg(long)]
    t1: PathBuf,
    /// Later-period ICE summary JSON.
    #[arg(long)]
    t2: PathBuf,
    /// GeoJSON to copy with ice_t1/ice_t2/transition injected per feature
    /// (joined on a GEOID or fips property).
    #[arg(long)]
    geojson: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Fit(args) => cmd_fit(args, cli.threads),
        Command::Simulate(args) => cmd_simulate(args, cli.threads),
        Command::Evaluate(args) => cmd_evaluate(args, cli.threads),
        Command::Report(args) => cmd_report(args, cli.threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NumericalFailure { .. } | Error::NotPositiveDefinite => 3,
        Error::InvalidSpec(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Load an adjacency file, sniffing edge-list CSV (src,dst header) vs GAL.
fn read_adjacency(path: &Path) -> Result<AdjacencyGraph, Error> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: display, source: e })?;
    let first = text.lines().next().unwrap_or("").trim();
    if first.starts_with("src,dst") {
        AdjacencyGraph::read_edge_csv(path)
    } else {
        AdjacencyGraph::read_gal(path)
    }
}

fn graph_or_lattice(path: &Option<PathBuf>) -> Result<AdjacencyGraph, Error> {
    match path {
        Some(p) => read_adjacency(p),
        None => AdjacencyGraph::rook_lattice(12, 13),
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write `run_manifest.json`: command, version, inputs with hashes, and every
/// resolved flag. Everything except `timestamp_unix` is deterministic.
fn write_manifest(
    out: &Path,
    command: &str,
    threads: usize,
    args: BTreeMap<String, serde_json::Value>,
    inputs: &[&Path],
) -> Result<(), Error> {
    let mut input_records = Vec::new();
    for path in inputs {
        input_records.push(serde_json::json!({
            "path": path.display().to_string(),
            "sha256": sha256_file(path)?,
        }));
    }
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": timestamp,
        "threads": threads,
        "args": args,
        "inputs": input_records,
    });
    let path = out.join("run_manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap() + "\n").map_err(|e| {
        Error::Io {
            path: path.display().to_string(),
            source: e,
        }
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap() + "\n").map_err(|e| {
        Error::Io {
            path: path.display().to_string(),
            source: e,
        }
    })
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

fn cmd_fit(args: &FitArgs, threads: usize) -> Result<(), Error> {
    let observations = read_observations_csv(&args.data)?;
    let graph = read_adjacency(&args.adjacency)?;
    ensure_out_dir(&args.out)?;
    let spec = ModelSpec {
        approach: args.model,
        clusters: args.clusters,
        prior_shape: args.prior_a,
        prior_rate: args.prior_b,
        mcmc: McmcSettings {
            iterations: args.iters,
            burn_in: args.burnin,
            thin: args.thin,
            seed: args.seed,
        },
        bootstrap_replicates: args.b,
        ..ModelSpec::default()
    };
    spec.validate()?;

    let mut summary;
    if args.model == Approach::Bootstrap {
        // Bootstrap inputs need not match a graph unit-for-unit, but when an
        // adjacency is supplied the county sets must agree.
        ice_core::mcmc::align_observations(&observations, &graph)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        summary = bootstrap_ice(&observations, args.b, &mut rng)?;
    } else {
        let (d1, d2) = fit_ice_model(&observations, &graph, &spec)?;
        summary = posterior_ice(&d1, &d2)?;
        let waic = waic_joint(&d1, &d2)?;
        let per_group = |d: &PosteriorDraws| -> Result<serde_json::Value, Error> {
            let w = ice_core::diag::waic(d.retained, d.n_units, &d.loglik)?;
            Ok(serde_json::json!({"waic": w.waic, "lppd": w.lppd, "p_waic": w.p_waic}))
        };
        write_json(
            &args.out.join("waic.json"),
            &serde_json::json!({
                "joint": {"waic": waic.waic, "lppd": waic.lppd, "p_waic": waic.p_waic},
                "group1": per_group(&d1)?,
                "group2": per_group(&d2)?,
            }),
        )?;
        write_convergence_csv(&args.out.join("convergence.csv"), &d1, &d2)?;
        if args.dump_draws {
            dump_draws_csv(&args.out.join("draws_group1.csv"), &d1)?;
            dump_draws_csv(&args.out.join("draws_group2.csv"), &d2)?;
        }
    }
    summary.attach_names(&observations);
    summary.write_json(args.out.join("ice_summary.json"))?;
    summary.write_counties_csv(args.out.join("ice_counties.csv"))?;

    let mut flags = BTreeMap::new();
    flags.insert("model".into(), serde_json::json!(args.model.as_str()));
    flags.insert("clusters".into(), serde_json::json!(args.clusters));
    flags.insert("iters".into(), serde_json::json!(args.iters));
    flags.insert("burnin".into(), serde_json::json!(args.burnin));
    flags.insert("thin".into(), serde_json::json!(args.thin));
    flags.insert("b".into(), serde_json::json!(args.b));
    flags.insert("prior_a".into(), serde_json::json!(args.prior_a));
    flags.insert("prior_b".into(), serde_json::json!(args.prior_b));
    flags.insert("seed".into(), serde_json::json!(args.seed));
    flags.insert("data".into(), serde_json::json!(args.data.display().to_string()));
    flags.insert(
        "adjacency".into(),
        serde_json::json!(args.adjacency.display().to_string()),
    );
    flags.insert("out".into(), serde_json::json!(args.out.display().to_string()));
    flags.insert("dump_draws".into(), serde_json::json!(args.dump_draws));
    write_manifest(&args.out, "fit", threads, flags, &[&args.data, &args.adjacency])?;

    println!(
        "{}: statewide ICE {:.4} ({:.4}, {:.4})",
        summary.method, summary.statewide.estimate, summary.statewide.lower, summary.statewide.upper
    );
    Ok(())
}

fn write_convergence_csv(
    path: &Path,
    d1: &PosteriorDraws,
    d2: &PosteriorDraws,
) -> Result<(), Error> {
    let display = path.display().to_string();
    let err = |e: csv::Error| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["group", "parameter", "ess", "split_rhat"])
        .map_err(err)?;
    for (group, draws) in [("1", d1), ("2", d2)] {
        for diag in convergence_summary(std::slice::from_ref(draws))? {
            w.write_record([
                group,
                &diag.parameter,
                &format!("{:.1}", diag.ess),
                &format!("{:.4}", diag.split_rhat),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: display,
        source: e,
    })?;
    Ok(())
}

/// Long-format draw dump: `parameter,unit,draw,value`. Unit is empty for
/// scalar parameters.
fn dump_draws_csv(path: &Path, draws: &PosteriorDraws) -> Result<(), Error> {
    let display = path.display().to_string();
    let err = |e: csv::Error| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["parameter", "unit", "draw", "value"])
        .map_err(err)?;
    let mut record = |param: &str, unit: &str, draw: usize, value: f64| -> Result<(), Error> {
        w.write_record([param, unit, &draw.to_string(), &value.to_string()])
            .map_err(err)
    };
    for s in 0..draws.retained {
        for j in 0..draws.q {
            record(&format!("beta[{j}]"), "", s, draws.beta[s * draws.q + j])?;
        }
        record("sigma2_v", "", s, draws.sigma2_v[s])?;
        if let Some(su) = &draws.sigma2_u {
            record("sigma2_u", "", s, su[s])?;
        }
        if let Some(rho) = &draws.rho {
            record("rho", "", s, rho[s])?;
        }
        for i in 0..draws.n_units {
            let unit = i.to_string();
            record("v", &unit, s, draws.v[s * draws.n_units + i])?;
            if let Some(u) = &draws.u {
                record("u", &unit, s, u[s * draws.n_units + i])?;
            }
            if let Some(z) = &draws.z {
                record("z", &unit, s, z[s * draws.n_units + i] as f64)?;
            }
            record("p", &unit, s, draws.p_row(s)[i])?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: display,
        source: e,
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn cmd_simulate(args: &SimulateArgs, threads: usize) -> Result<(), Error> {
    let graph = graph_or_lattice(&args.adjacency)?;
    ensure_out_dir(&args.out)?;
    let spec = ScenarioSpec::standard(args.scenario, args.n, args.replicates)?;
    let mut datasets = Vec::with_capacity(args.replicates);
    for replicate in 0..args.replicates {
        let data = generate_replicate(&spec, &graph, args.seed, replicate)?;
        write_observations_csv(
            args.out.join(format!("replicate_{replicate:03}.csv")),
            &data.observations,
        )?;
        datasets.push(data);
    }
    write_truths_csv(args.out.join("truths.csv"), &datasets)?;

    let mut flags = BTreeMap::new();
    flags.insert("scenario".into(), serde_json::json!(args.scenario));
    flags.insert("n".into(), serde_json::json!(args.n));
    flags.insert("replicates".into(), serde_json::json!(args.replicates));
    flags.insert("seed".into(), serde_json::json!(args.seed));
    flags.insert(
        "adjacency".into(),
        serde_json::json!(args.adjacency.as_ref().map(|p| p.display().to_string())),
    );
    flags.insert("out".into(), serde_json::json!(args.out.display().to_string()));
    let inputs: Vec<&Path> = args.adjacency.iter().map(|p| p.as_path()).collect();
    write_manifest(&args.out, "simulate", threads, flags, &inputs)?;
    println!(
        "scenario {} N={}: wrote {} replicates over {} units",
        args.scenario,
        args.n,
        args.replicates,
        graph.n()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(args: &EvaluateArgs, threads: usize) -> Result<(), Error> {
    match (&args.config, &args.estimates) {
        (Some(config_path), None) => {
            let mut config = ExperimentConfig::from_file(config_path)?;
            if let Some(out) = &args.out {
                config.output_dir = Some(out.clone());
            }
            let out = config.output_dir.clone().ok_or_else(|| {
                Error::InvalidSpec("no output directory (config `out` or --out)".into())
            })?;
            let graph = graph_or_lattice(&args.adjacency)?;
            ensure_out_dir(&out)?;
            let table = ice_core::sim::run_experiment(&config, &graph)?;
            let paths = table.write_tables(&out)?;
            let failures: Vec<_> = table
                .cells
                .iter()
                .filter(|c| c.failures > 0)
                .map(|c| {
                    serde_json::json!({
                        "scenario": c.scenario,
                        "population": c.population,
                        "model": c.model.label(),
                        "failures": c.failures,
                        "replicates_used": c.replicates_used,
                    })
                })
                .collect();
            if !failures.is_empty() {
                write_json(&out.join("failures.json"), &serde_json::json!(failures))?;
            }
            let mut flags = BTreeMap::new();
            flags.insert(
                "config".into(),
                serde_json::json!(config_path.display().to_string()),
            );
            flags.insert("out".into(), serde_json::json!(out.display().to_string()));
            flags.insert(
                "adjacency".into(),
                serde_json::json!(args.adjacency.as_ref().map(|p| p.display().to_string())),
            );
            flags.insert("resolved".into(), serde_json::to_value(&config).unwrap());
            let mut inputs: Vec<&Path> = vec![config_path];
            inputs.extend(args.adjacency.iter().map(|p| p.as_path()));
            write_manifest(&out, "evaluate", threads, flags, &inputs)?;
            for path in paths {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        (None, Some(estimates)) => {
            let truths_path = args.truths.as_ref().expect("clap enforces --truths");
            let out = args
                .out
                .clone()
                .ok_or_else(|| Error::InvalidSpec("--out is required".into()))?;
            ensure_out_dir(&out)?;
            let metrics = score_estimates(estimates, truths_path)?;
            let path = out.join("metrics.csv");
            let display = path.display().to_string();
            let err = |e: csv::Error| Error::Parse {
                path: display.clone(),
                line: 0,
                msg: e.to_string(),
            };
            let mut w = csv::Writer::from_path(&path).map_err(err)?;
            w.write_record(["rmse", "coverage", "width"]).map_err(err)?;
            w.write_record([
                format!("{:.6}", metrics.rmse),
                format!("{:.6}", metrics.coverage),
                format!("{:.6}", metrics.mean_width),
            ])
            .map_err(err)?;
            w.flush().map_err(|e| Error::Io {
                path: display,
                source: e,
            })?;
            let mut flags = BTreeMap::new();
            flags.insert(
                "estimates".into(),
                serde_json::json!(estimates.display().to_string()),
            );
            flags.insert(
                "truths".into(),
                serde_json::json!(truths_path.display().to_string()),
            );
            flags.insert("out".into(), serde_json::json!(out.display().to_string()));
            write_manifest(&out, "evaluate", threads, flags, &[estimates, truths_path])?;
            println!(
                "rmse {:.6} coverage {:.4} width {:.6}",
                metrics.rmse, metrics.coverage, metrics.mean_width
            );
            Ok(())
        }
        _ => Err(Error::InvalidSpec(
            "evaluate needs either --config or --estimates with --truths".into(),
        )),
    }
}

/// Score an estimates CSV (replicate,fips,estimate,lower,upper) against a
/// truths CSV (replicate,fips,...,ice) by pooled RMSE/coverage/width.
fn score_estimates(
    estimates: &Path,
    truths: &Path,
) -> Result<ice_core::diag::EvalSummary, Error> {
    let read = |path: &Path,
                required: &[&str]|
     -> Result<(Vec<BTreeMap<String, String>>, String), Error> {
        let display = path.display().to_string();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io {
            path: display.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                path: display.clone(),
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        for field in required {
            if !headers.iter().any(|h| h == *field) {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: 1,
                    msg: format!("missing field `{field}`"),
                });
            }
        }
        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: display.clone(),
                line: idx + 2,
                msg: e.to_string(),
            })?;
            let mut map = BTreeMap::new();
            for (h, v) in headers.iter().zip(record.iter()) {
                map.insert(h.to_string(), v.to_string());
            }
            rows.push(map);
        }
        Ok((rows, display))
    };
    let (est_rows, est_path) = read(estimates, &["replicate", "fips", "estimate", "lower", "upper"])?;
    let (truth_rows, truth_path) = read(truths, &["replicate", "fips", "ice"])?;

    let parse = |path: &str, row: usize, field: &str, value: &str| -> Result<f64, Error> {
        value.parse().map_err(|_| Error::Parse {
            path: path.to_string(),
            line: row + 2,
            msg: format!("bad {field} `{value}`"),
        })
    };
    let mut truth_by_key = BTreeMap::new();
    for (idx, row) in truth_rows.iter().enumerate() {
        let key = (row["replicate"].clone(), row["fips"].clone());
        truth_by_key.insert(key, parse(&truth_path, idx, "ice", &row["ice"])?);
    }
    let mut by_replicate: BTreeMap<String, ice_core::diag::ReplicateEval> = BTreeMap::new();
    for (idx, row) in est_rows.iter().enumerate() {
        let key = (row["replicate"].clone(), row["fips"].clone());
        let truth = truth_by_key.get(&key).ok_or_else(|| Error::CountyMismatch(format!(
            "no truth for replicate {} county {}",
            key.0, key.1
        )))?;
        let entry = by_replicate
            .entry(row["replicate"].clone())
            .or_insert_with(|| ice_core::diag::ReplicateEval {
                estimates: Vec::new(),
                lower: Vec::new(),
                upper: Vec::new(),
                truths: Vec::new(),
            });
        entry
            .estimates
            .push(parse(&est_path, idx, "estimate", &row["estimate"])?);
        entry.lower.push(parse(&est_path, idx, "lower", &row["lower"])?);
        entry.upper.push(parse(&est_path, idx, "upper", &row["upper"])?);
        entry.truths.push(*truth);
    }
    let replicates: Vec<ice_core::diag::ReplicateEval> = by_replicate.into_values().collect();
    ice_core::diag::evaluate_replicates(&replicates)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

fn cmd_report(args: &ReportArgs, threads: usize) -> Result<(), Error> {
    let t1 = IceSummary::read_json(&args.t1)?;
    let t2 = IceSummary::read_json(&args.t2)?;
    let report = sign_change_report(&t1, &t2)?;
    ensure_out_dir(&args.out)?;

    let path = args.out.join("sign_changes.csv");
    let display = path.display().to_string();
    let err = |e: csv::Error| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record([
        "fips",
        "name",
        "transition",
        "ice_t1",
        "ice_t2",
        "p_group1_movement",
        "p_group2_movement",
        "larger_group_t2",
    ])
    .map_err(err)?;
    let mut to_positive = 0usize;
    let mut to_negative = 0usize;
    for change in report.iter().filter(|c| c.transition != Transition::Unchanged) {
        match change.transition {
            Transition::NegativeToPositive => to_positive += 1,
            Transition::PositiveToNegative => to_negative += 1,
            Transition::Unchanged => {}
        }
        w.write_record([
            change.unit_id.as_str(),
            change.name.as_str(),
            change.transition.as_str(),
            &format!("{:.6}", change.ice_t1),
            &format!("{:.6}", change.ice_t2),
            change.p_group1_movement.as_str(),
            change.p_group2_movement.as_str(),
            change.larger_group_t2,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: display,
        source: e,
    })?;

    if let Some(geojson_path) = &args.geojson {
        annotate_geojson(geojson_path, &args.out.join("ice_map.geojson"), &report)?;
    }

    let mut flags = BTreeMap::new();
    flags.insert("t1".into(), serde_json::json!(args.t1.display().to_string()));
    flags.insert("t2".into(), serde_json::json!(args.t2.display().to_string()));
    flags.insert(
        "geojson".into(),
        serde_json::json!(args.geojson.as_ref().map(|p| p.display().to_string())),
    );
    flags.insert("out".into(), serde_json::json!(args.out.display().to_string()));
    let mut inputs: Vec<&Path> = vec![&args.t1, &args.t2];
    inputs.extend(args.geojson.iter().map(|p| p.as_path()));
    write_manifest(&args.out, "report", threads, flags, &inputs)?;

    println!("{to_positive} negative_to_positive, {to_negative} positive_to_negative");
    Ok(())
}

/// Copy a GeoJSON with `ice_t1`, `ice_t2`, and `transition` injected into
/// each feature's properties, joined on a `GEOID` or `fips` property.
fn annotate_geojson(
    input: &Path,
    output: &Path,
    report: &[ice_core::ice::SignChange],
) -> Result<(), Error> {
    let display = input.display().to_string();
    let text = std::fs::read_to_string(input).map_err(|e| Error::Io {
        path: display.clone(),
        source: e,
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: display.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let by_id: BTreeMap<&str, &ice_core::ice::SignChange> =
        report.iter().map(|c| (c.unit_id.as_str(), c)).collect();
    let features = value
        .get_mut("features")
        .and_then(|f| f.as_array_mut())
        .ok_or_else(|| Error::Parse {
            path: display.clone(),
            line: 0,
            msg: "not a GeoJSON FeatureCollection (missing `features`)".into(),
        })?;
    for (idx, feature) in features.iter_mut().enumerate() {
        let properties = feature
            .get_mut("properties")
            .and_then(|p| p.as_object_mut())
            .ok_or_else(|| Error::Parse {
                path: display.clone(),
                line: 0,
                msg: format!("feature {idx} has no properties object"),
            })?;
        let fips = ["GEOID", "fips"]
            .iter()
            .find_map(|key| properties.get(*key))
            .map(|v| match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .ok_or_else(|| Error::Parse {
                path: display.clone(),
                line: 0,
                msg: format!("feature {idx} has no GEOID or fips property"),
            })?;
        let change = by_id.get(fips.as_str()).ok_or_else(|| {
            Error::CountyMismatch(format!("feature {idx} (fips {fips}) not in the summaries"))
        })?;
        properties.insert("ice_t1".into(), serde_json::json!(change.ice_t1));
        properties.insert("ice_t2".into(), serde_json::json!(change.ice_t2));
        properties.insert(
            "transition".into(),
            serde_json::json!(change.transition.as_str()),
        );
    }
    std::fs::write(
        output,
        serde_json::to_string_pretty(&value).unwrap() + "\n",
    )
    .map_err(|e| Error::Io {
        path: output.display().to_string(),
        source: e,
    })
}
