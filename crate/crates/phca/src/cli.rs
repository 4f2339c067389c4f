//! Command-line front end: argument parsing and file I/O around the
//! library.
//!
//! Exit codes: 0 on success, 1 when an input fails validation (malformed
//! or inconsistent data, out-of-range options), 2 on runtime failures
//! (I/O, numerics).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::AcquisitionKind;
use crate::distflow::{check_limits, solve_distflow};
use crate::fsutil::atomic_write;
use crate::network::{Network, NetworkError};
use crate::risk::{penalized_objective, RiskError};
use crate::scenario::{
    generate_synthetic, load_scenarios, write_scenarios, ProfileParams, ScenarioError, ScenarioSet,
};
use crate::solvers::{solve, Method, Query, SolveConfig, SolveError};

#[derive(Parser)]
#[command(
    name = "phca",
    version,
    about = "Probabilistic hosting capacity analysis for radial distribution feeders"
)]
struct Cli {
    /// Worker threads for scenario evaluation. Falls back to the
    /// PHCA_THREADS environment variable, then to one thread per core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file, and optionally a scenario directory, for
    /// structural problems.
    Validate {
        /// Network description (JSON).
        #[arg(long)]
        network: PathBuf,
        /// Scenario directory to check against the network.
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Solve a single power flow for given nodal injections.
    Powerflow {
        /// Network description (JSON).
        #[arg(long)]
        network: PathBuf,
        /// CSV of net injections with header `node,p,q`; omitted nodes
        /// default to zero. Positive p injects power into the node.
        #[arg(long)]
        injections: PathBuf,
        /// Write the solution and limit report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic scenario set sized to a network.
    Generate {
        /// Network description (JSON).
        #[arg(long)]
        network: PathBuf,
        /// Number of days to generate.
        #[arg(long)]
        days: usize,
        /// Snapshots per day.
        #[arg(long, default_value_t = 24)]
        snapshots: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write the scenario CSVs into.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate one capacity vector against a scenario set.
    Evaluate {
        /// Network description (JSON).
        #[arg(long)]
        network: PathBuf,
        /// Scenario directory.
        #[arg(long)]
        scenarios: PathBuf,
        /// Capacity per candidate node, comma separated (p.u.).
        #[arg(long)]
        psi: String,
        /// Violation probability budget.
        #[arg(long, default_value_t = 0.05)]
        eps_bar: f64,
        /// Write the evaluation as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximise hosting capacity subject to the violation budget.
    Solve {
        /// Network description (JSON).
        #[arg(long)]
        network: PathBuf,
        /// Scenario directory.
        #[arg(long)]
        scenarios: PathBuf,
        /// Search method.
        #[arg(long, value_enum, default_value_t = MethodArg::BayesOpt)]
        method: MethodArg,
        /// Objective evaluation budget (ignored by grid).
        #[arg(long, default_value_t = 60)]
        budget: usize,
        /// Size of the initial design (bayesopt only; default 2 per
        /// dimension, at least 4).
        #[arg(long)]
        n_initial: Option<usize>,
        /// Acquisition function (bayesopt only).
        #[arg(long, value_enum, default_value_t = AcquisitionArg::Ei)]
        acquisition: AcquisitionArg,
        /// Lattice resolution per dimension (grid only).
        #[arg(long, default_value_t = 11)]
        points_per_dim: usize,
        /// Violation probability budget.
        #[arg(long, default_value_t = 0.05)]
        eps_bar: f64,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include per-query wall-clock times in the trace. Off by
        /// default so repeated runs produce byte-identical files.
        #[arg(long)]
        timings: bool,
        /// Trace file to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn solver traces into per-iteration CSVs and compare them.
    ///
    /// The first trace is the reference. For each other trace the summary
    /// reports `best_obj %` = (ref - other) / other * 100 (how much more
    /// capacity the reference found) and `nfuncall %` = (other - ref) /
    /// other * 100 (the share of evaluations the reference saved).
    Report {
        /// Trace files; the first is the reference.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Directory for the CSVs (default: next to each trace).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(name = "bayesopt")]
    BayesOpt,
    #[value(name = "pattern")]
    Pattern,
    #[value(name = "grid")]
    Grid,
}

impl From<MethodArg> for Method {
    fn from(arg: MethodArg) -> Self {
        match arg {
            MethodArg::BayesOpt => Method::BayesOpt,
            MethodArg::Pattern => Method::PatternSearch,
            MethodArg::Grid => Method::GridSearch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AcquisitionArg {
    #[value(name = "ei")]
    Ei,
    #[value(name = "pi")]
    Pi,
}

impl From<AcquisitionArg> for AcquisitionKind {
    fn from(arg: AcquisitionArg) -> Self {
        match arg {
            AcquisitionArg::Ei => AcquisitionKind::ExpectedImprovement,
            AcquisitionArg::Pi => AcquisitionKind::ProbabilityOfImprovement,
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(err: NetworkError) -> Self {
        match err {
            NetworkError::Io { .. } => CliError::Runtime(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(err: ScenarioError) -> Self {
        match err {
            ScenarioError::Io { .. } => CliError::Runtime(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

impl From<RiskError> for CliError {
    fn from(err: RiskError) -> Self {
        CliError::Validation(err.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(err: SolveError) -> Self {
        match err {
            SolveError::Surrogate(_) => CliError::Runtime(err.to_string()),
            _ => CliError::Validation(err.to_string()),
        }
    }
}

/// Parses the command line, runs it, and returns the process exit code.
pub fn run() -> u8 {
    let cli = Cli::parse();
    let result = match worker_threads(cli.threads) {
        Ok(Some(n)) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(err) => Err(CliError::Runtime(format!("thread pool: {err}"))),
        },
        Ok(None) => dispatch(cli.command),
        Err(err) => Err(err),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.code()
        }
    }
}

fn worker_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PHCA_THREADS") {
            Ok(raw) => Some(raw.parse::<usize>().map_err(|_| {
                CliError::Validation(format!(
                    "PHCA_THREADS must be a positive integer, got {raw:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Validation(
            "thread count must be at least 1".to_string(),
        ));
    }
    Ok(n)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { network, scenarios } => cmd_validate(&network, scenarios.as_deref()),
        Command::Powerflow {
            network,
            injections,
            out,
        } => cmd_powerflow(&network, &injections, out.as_deref()),
        Command::Generate {
            network,
            days,
            snapshots,
            seed,
            out_dir,
        } => cmd_generate(&network, days, snapshots, seed, &out_dir),
        Command::Evaluate {
            network,
            scenarios,
            psi,
            eps_bar,
            out,
        } => cmd_evaluate(&network, &scenarios, &psi, eps_bar, out.as_deref()),
        Command::Solve {
            network,
            scenarios,
            method,
            budget,
            n_initial,
            acquisition,
            points_per_dim,
            eps_bar,
            seed,
            timings,
            out,
        } => {
            let mut config = SolveConfig::new(method.into());
            config.budget = budget;
            config.n_initial = n_initial;
            config.acquisition = acquisition.into();
            config.points_per_dim = points_per_dim;
            config.eps_bar = eps_bar;
            config.seed = seed;
            cmd_solve(&network, &scenarios, config, timings, &out)
        }
        Command::Report { traces, out_dir } => cmd_report(&traces, out_dir.as_deref()),
    }
}

fn load_network(path: &Path) -> Result<Network, CliError> {
    let network = Network::from_path(path)?;
    let problems = network.validate();
    if !problems.is_empty() {
        for problem in &problems {
            eprintln!("network: {problem}");
        }
        return Err(CliError::Validation(format!(
            "{} failed validation with {} problem(s)",
            path.display(),
            problems.len()
        )));
    }
    Ok(network)
}

fn load_scenario_dir(dir: &Path, network: &Network) -> Result<ScenarioSet, CliError> {
    Ok(load_scenarios(dir, network)?)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| CliError::Runtime(format!("serialising {}: {err}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
        .map_err(|err| CliError::Runtime(format!("writing {}: {err}", path.display())))
}

fn cmd_validate(network_path: &Path, scenario_dir: Option<&Path>) -> Result<(), CliError> {
    let network = load_network(network_path)?;
    println!(
        "network OK: {} nodes, {} lines, {} candidate(s)",
        network.nodes.len(),
        network.lines.len(),
        network.n_candidates()
    );
    if let Some(dir) = scenario_dir {
        let scenarios = load_scenario_dir(dir, &network)?;
        println!(
            "scenarios OK: {} day(s) x {} snapshot(s)",
            scenarios.n_days(),
            scenarios.snapshots_per_day
        );
    }
    Ok(())
}

fn read_injections(path: &Path, network: &Network) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let n_loads = network.n_loads();
    let mut p = vec![0.0; n_loads];
    let mut q = vec![0.0; n_loads];
    let mut seen = vec![false; n_loads];

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|err| CliError::Runtime(format!("reading {}: {err}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|err| CliError::Validation(format!("{}: {err}", path.display())))?
        .clone();
    let expected = ["node", "p", "q"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Validation(format!(
            "{}: expected header node,p,q, got {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    for (row, record) in reader.records().enumerate() {
        let record =
            record.map_err(|err| CliError::Validation(format!("{}: {err}", path.display())))?;
        let fail = |message: String| {
            CliError::Validation(format!("{}, row {}: {message}", path.display(), row + 2))
        };
        if record.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", record.len())));
        }
        let node: usize = record[0]
            .parse()
            .map_err(|_| fail(format!("bad node id {:?}", &record[0])))?;
        if node == 0 || node > n_loads {
            return Err(fail(format!("node {node} is outside 1..={n_loads}")));
        }
        if seen[node - 1] {
            return Err(fail(format!("node {node} appears twice")));
        }
        seen[node - 1] = true;
        p[node - 1] = record[1]
            .parse()
            .map_err(|_| fail(format!("bad p value {:?}", &record[1])))?;
        q[node - 1] = record[2]
            .parse()
            .map_err(|_| fail(format!("bad q value {:?}", &record[2])))?;
    }
    Ok((p, q))
}

fn cmd_powerflow(
    network_path: &Path,
    injections_path: &Path,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let network = load_network(network_path)?;
    let (p, q) = read_injections(injections_path, &network)?;
    let solution = solve_distflow(&network, &p, &q);
    let limits = check_limits(&network, &solution);

    println!(
        "converged {} in {} iteration(s), residual {:e}",
        solution.converged, solution.iterations, solution.residual
    );
    let v_lo = solution.v.iter().copied().fold(f64::INFINITY, f64::min);
    let v_hi = solution.v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("squared voltage range [{v_lo}, {v_hi}]");
    if limits.feasible {
        println!("limits OK");
    } else {
        for violation in &limits.voltage_violations {
            println!(
                "voltage violation: node {} at v={} outside [{}, {}]",
                violation.node, violation.v, violation.v_min, violation.v_max
            );
        }
        for violation in &limits.line_violations {
            println!(
                "line violation: {}->{} carries s={} over s_max={}",
                violation.from, violation.to, violation.s, violation.s_max
            );
        }
        if !solution.converged {
            println!("power flow did not converge");
        }
    }

    if let Some(path) = out {
        let value = serde_json::json!({ "solution": solution, "limits": limits });
        write_json(path, &value)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_generate(
    network_path: &Path,
    days: usize,
    snapshots: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    let network = load_network(network_path)?;
    let set = generate_synthetic(
        days,
        snapshots,
        network.n_candidates(),
        network.n_loads(),
        seed,
        &ProfileParams::default(),
    )?;
    write_scenarios(&set, out_dir)?;
    println!(
        "wrote {} day(s) x {} snapshot(s) to {}",
        set.n_days(),
        set.snapshots_per_day,
        out_dir.display()
    );
    Ok(())
}

fn parse_psi(raw: &str) -> Result<Vec<f64>, CliError> {
    let psi: Result<Vec<f64>, _> = raw.split(',').map(|part| part.trim().parse()).collect();
    match psi {
        Ok(values) if !values.is_empty() => Ok(values),
        _ => Err(CliError::Validation(format!(
            "--psi must be a comma-separated list of numbers, got {raw:?}"
        ))),
    }
}

fn cmd_evaluate(
    network_path: &Path,
    scenario_dir: &Path,
    psi_raw: &str,
    eps_bar: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let network = load_network(network_path)?;
    let scenarios = load_scenario_dir(scenario_dir, &network)?;
    let psi = parse_psi(psi_raw)?;
    let result = penalized_objective(&network, &scenarios, &psi, eps_bar)?;

    println!(
        "eps_hat       {} ({}/{} days violated)",
        result.eps_hat,
        result.violated_days.len(),
        scenarios.n_days()
    );
    println!("raw capacity  {}", result.raw_capacity);
    println!("objective     {}", result.objective);

    if let Some(path) = out {
        let value = serde_json::json!({
            "psi": psi,
            "eps_bar": eps_bar,
            "eps_hat": result.eps_hat,
            "violated_days": result.violated_days,
            "n_snapshots_checked": result.n_snapshots_checked,
            "raw_capacity": result.raw_capacity,
            "objective": result.objective,
        });
        write_json(path, &value)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceQuery {
    iter: usize,
    psi: Vec<f64>,
    eps_hat: f64,
    objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceSummary {
    best_obj: f64,
    best_psi: Vec<f64>,
    nfuncall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceFile {
    queries: Vec<TraceQuery>,
    summary: TraceSummary,
}

fn trace_query(index: usize, query: &Query, timings: bool) -> TraceQuery {
    TraceQuery {
        iter: index + 1,
        psi: query.psi.clone(),
        eps_hat: query.eps_hat,
        objective: query.objective,
        elapsed_ms: timings.then_some(query.elapsed.as_millis() as u64),
    }
}

fn cmd_solve(
    network_path: &Path,
    scenario_dir: &Path,
    config: SolveConfig,
    timings: bool,
    out: &Path,
) -> Result<(), CliError> {
    let network = load_network(network_path)?;
    let scenarios = load_scenario_dir(scenario_dir, &network)?;
    let trace = solve(&network, &scenarios, &config)?;

    let file = TraceFile {
        queries: trace
            .queries
            .iter()
            .enumerate()
            .map(|(i, q)| trace_query(i, q, timings))
            .collect(),
        summary: TraceSummary {
            best_obj: trace.best_objective,
            best_psi: trace.best_psi.clone(),
            nfuncall: trace.nfuncall,
        },
    };
    let value = serde_json::to_value(&file)
        .map_err(|err| CliError::Runtime(format!("serialising trace: {err}")))?;
    write_json(out, &value)?;

    // The recorded best is the first query attaining the maximum, so the
    // eps_hat shown here is the one actually measured at best_psi.
    let best = trace
        .queries
        .iter()
        .find(|q| q.objective == trace.best_objective)
        .expect("a finished solve has at least one query");
    println!("method          {}", method_name(config.method));
    println!("nfuncall        {}", trace.nfuncall);
    println!("best objective  {}", trace.best_objective);
    println!("raw capacity    {}", best.psi.iter().sum::<f64>());
    println!("final eps_hat   {}", best.eps_hat);
    println!("best psi        {:?}", trace.best_psi);
    println!("wrote {}", out.display());
    Ok(())
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::BayesOpt => "bayesopt",
        Method::PatternSearch => "pattern",
        Method::GridSearch => "grid",
    }
}

fn load_trace(path: &Path) -> Result<TraceFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::Runtime(format!("reading {}: {err}", path.display())))?;
    let file: TraceFile = serde_json::from_str(&text)
        .map_err(|err| CliError::Validation(format!("{}: {err}", path.display())))?;
    if file.queries.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: trace has no queries",
            path.display()
        )));
    }
    Ok(file)
}

/// Running maximum of the recorded objectives, one entry per query.
fn running_best(queries: &[TraceQuery]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    queries
        .iter()
        .map(|q| {
            best = best.max(q.objective);
            best
        })
        .collect()
}

fn convergence_csv(file: &TraceFile) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["iter", "best_obj", "eps_hat"])
        .expect("in-memory csv write cannot fail");
    for (query, best) in file.queries.iter().zip(running_best(&file.queries)) {
        writer
            .write_record([
                query.iter.to_string(),
                best.to_string(),
                query.eps_hat.to_string(),
            ])
            .expect("in-memory csv write cannot fail");
    }
    writer
        .into_inner()
        .expect("in-memory csv flush cannot fail")
}

fn csv_path(trace_path: &Path, out_dir: Option<&Path>) -> PathBuf {
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| trace_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    dir.join(format!("{stem}.csv"))
}

/// Capacity advantage of the reference over `other`, in percent of
/// `other`. Positive means the reference found more capacity.
fn best_obj_pct(reference: f64, other: f64) -> f64 {
    (reference - other) / other * 100.0
}

/// Share of `other`'s evaluations the reference saved, in percent.
fn nfuncall_pct(reference: usize, other: usize) -> f64 {
    (other as f64 - reference as f64) / other as f64 * 100.0
}

fn cmd_report(trace_paths: &[PathBuf], out_dir: Option<&Path>) -> Result<(), CliError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|err| CliError::Runtime(format!("creating {}: {err}", dir.display())))?;
    }

    let mut traces = Vec::with_capacity(trace_paths.len());
    for path in trace_paths {
        let file = load_trace(path)?;
        let csv_out = csv_path(path, out_dir);
        atomic_write(&csv_out, &convergence_csv(&file))
            .map_err(|err| CliError::Runtime(format!("writing {}: {err}", csv_out.display())))?;
        println!("wrote {}", csv_out.display());
        traces.push((path, file));
    }

    let name_width = trace_paths
        .iter()
        .map(|p| p.display().to_string().len() + 6)
        .max()
        .unwrap_or(10)
        .max(10);
    println!();
    println!(
        "{:<name_width$}  {:>12}  {:>8}  {:>10}  {:>10}",
        "trace", "best_obj", "nfuncall", "best_obj %", "nfuncall %"
    );
    let (_, reference) = &traces[0];
    let ref_best = reference.summary.best_obj;
    let ref_calls = reference.summary.nfuncall;
    for (index, (path, file)) in traces.iter().enumerate() {
        let name = if index == 0 {
            format!("{} (ref)", path.display())
        } else {
            path.display().to_string()
        };
        if index == 0 {
            println!(
                "{:<name_width$}  {:>12.4}  {:>8}  {:>10}  {:>10}",
                name, file.summary.best_obj, file.summary.nfuncall, "-", "-"
            );
        } else {
            println!(
                "{:<name_width$}  {:>12.4}  {:>8}  {:>10.2}  {:>10.2}",
                name,
                file.summary.best_obj,
                file.summary.nfuncall,
                best_obj_pct(ref_best, file.summary.best_obj),
                nfuncall_pct(ref_calls, file.summary.nfuncall)
            );
        }
    }
    Ok(())
}
