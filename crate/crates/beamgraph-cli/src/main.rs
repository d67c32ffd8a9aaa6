//! Batch front-end: scenario generation, single runs, method comparison
//! and solver validation against the exact oracle.
//!
//! Exit codes are a stable contract for scripting: 0 success, 2 validation
//! error, 3 I/O error, 4 size/cap error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use beamgraph::channel::CqiTable;
use beamgraph::error::Error;
use beamgraph::geometry::Point;
use beamgraph::matching::{
    check_feasible, exact_match, greedy_match, is_maximal, random_instance_capped,
    DEFAULT_EXACT_LIMIT,
};
use beamgraph::scenario::{generate_synthetic, load_gnbs, save_gnbs, Config, GnbSite, Trace, ZoneGrid};
use beamgraph::simulator::{run, Method, RunMetrics, RunOutput};

#[derive(Parser)]
#[command(
    name = "beamgraph",
    version,
    about = "Beam management for mmwave vehicular networks: conflict-aware matching vs. DBSCAN clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Manhattan-grid scenario (trace CSV + gNB CSV)
    Gen(GenArgs),
    /// Simulate one method over a scenario; writes report.json and CDF CSVs
    Run(RunArgs),
    /// Run both methods with the same seed and compare totals
    Compare(CompareArgs),
    /// Validate the greedy solver against the exact oracle on random graphs
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Area as WIDTHxHEIGHT in meters, e.g. 1000x1000
    #[arg(long, default_value = "1000x1000")]
    area: String,
    #[arg(long, default_value_t = 100)]
    vehicles: usize,
    #[arg(long, default_value_t = 10)]
    gnbs: usize,
    /// Trace horizon, seconds
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    /// Solver period and trace sampling step, seconds
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for trace.csv and gnbs.csv
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Trace CSV (`time_s,vehicle_id,x_m,y_m`)
    #[arg(long)]
    trace: PathBuf,
    /// gNB CSV (`gnb_id,x_m,y_m`)
    #[arg(long)]
    gnbs: PathBuf,
    /// Optional `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional CQI table CSV (`cqi_index,threshold_db,efficiency`)
    #[arg(long)]
    cqi_table: Option<PathBuf>,
    /// Trace sampling step, seconds
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Beam design method: cawbm or dbscan
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Also write the per-slot event log (slots.csv)
    #[arg(long)]
    slot_log: bool,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Number of random instances to validate
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cap on candidates per instance (exhaustive-search guard)
    #[arg(long, default_value_t = 12)]
    max_candidates: usize,
    /// Also dump every instance graph and both solutions as JSON files
    #[arg(long)]
    dump_graphs: Option<PathBuf>,
    /// Output JSON file (stdout when omitted)
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn verbose() -> bool {
    match std::env::var("BEAMGRAPH_LOG") {
        Ok(v) => !matches!(v.as_str(), "quiet" | "off" | "0"),
        Err(_) => true,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Io { .. } => 3,
                Error::Size(_) => 4,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), Error> {
    let (width, height) = parse_area(&args.area)?;
    let (trace, gnbs) = generate_synthetic(
        width,
        height,
        args.vehicles,
        args.gnbs,
        args.horizon,
        args.step,
        args.seed,
    )?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let trace_path = args.out.join("trace.csv");
    let gnbs_path = args.out.join("gnbs.csv");
    trace.save(&trace_path)?;
    save_gnbs(&gnbs, &gnbs_path)?;
    if verbose() {
        eprintln!(
            "wrote {} ({} records) and {} ({} sites)",
            trace_path.display(),
            trace.records.len(),
            gnbs_path.display(),
            gnbs.len()
        );
    }
    Ok(())
}

fn parse_area(s: &str) -> Result<(f64, f64), Error> {
    let bad = || Error::Argument(format!("area must look like 1000x1000, got `{s}`"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let width: f64 = w.trim().parse().map_err(|_| bad())?;
    let height: f64 = h.trim().parse().map_err(|_| bad())?;
    if !(width.is_finite() && width > 0.0) || !(height.is_finite() && height > 0.0) {
        return Err(bad());
    }
    Ok((width, height))
}

/// Everything needed to reproduce a run bit-exactly.
#[derive(Serialize)]
struct InputEcho {
    trace: String,
    gnbs: String,
    config: Option<String>,
    cqi_table: Option<String>,
    step_s: f64,
    seed: u64,
}

#[derive(Serialize)]
struct RunReport {
    version: String,
    method: Method,
    inputs: InputEcho,
    config: Config,
    metrics: RunMetrics,
    audits: Vec<beamgraph::simulator::EpochAudit>,
    /// Measured but not serialized: wall time varies between repeats while
    /// report files must be byte-identical. Logged on stderr instead.
    #[serde(skip)]
    wall_time_s: f64,
}

struct LoadedScenario {
    trace: Trace,
    gnbs: Vec<GnbSite>,
    grid: ZoneGrid,
    config: Config,
    echo: InputEcho,
}

fn load_scenario(args: &ScenarioArgs) -> Result<LoadedScenario, Error> {
    let trace = Trace::load(&args.trace, args.step)?;
    let gnbs = load_gnbs(&args.gnbs)?;
    if gnbs.is_empty() {
        return Err(Error::Config("gNB file contains no sites".into()));
    }

    let mut config = Config::default();
    if let Some(path) = &args.cqi_table {
        config.cqi = CqiTable::load(path)?;
    }
    let overrides = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        None => String::new(),
    };
    // applying (possibly empty) overrides also re-derives the edge-weight
    // floor from the effective CQI table and validates everything
    config.apply_str(&overrides)?;

    let points: Vec<Point> = trace
        .records
        .iter()
        .map(|r| r.position)
        .chain(gnbs.iter().map(|g| g.position))
        .collect();
    let grid = ZoneGrid::covering(&points, config.model.zone_size_m)?;

    let echo = InputEcho {
        trace: args.trace.display().to_string(),
        gnbs: args.gnbs.display().to_string(),
        config: args.config.as_ref().map(|p| p.display().to_string()),
        cqi_table: args.cqi_table.as_ref().map(|p| p.display().to_string()),
        step_s: args.step,
        seed: args.seed,
    };
    Ok(LoadedScenario {
        trace,
        gnbs,
        grid,
        config,
        echo,
    })
}

fn execute(scenario: &LoadedScenario, method: Method, log_slots: bool) -> Result<(RunOutput, RunReport), Error> {
    let start = Instant::now();
    let output = run(
        &scenario.trace,
        &scenario.gnbs,
        &scenario.grid,
        &scenario.config,
        method,
        scenario.echo.seed,
        log_slots,
    )?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        method,
        inputs: InputEcho {
            trace: scenario.echo.trace.clone(),
            gnbs: scenario.echo.gnbs.clone(),
            config: scenario.echo.config.clone(),
            cqi_table: scenario.echo.cqi_table.clone(),
            step_s: scenario.echo.step_s,
            seed: scenario.echo.seed,
        },
        config: scenario.config.clone(),
        metrics: output.metrics.clone(),
        audits: output.audits.clone(),
        wall_time_s,
    };
    Ok((output, report))
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let scenario = load_scenario(&args.scenario)?;
    let (output, report) = execute(&scenario, args.method, args.slot_log)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_json(&args.out.join("report.json"), &report)?;
    write_cdfs(&args.out, &output.metrics)?;
    if args.slot_log {
        write_slot_log(&args.out.join("slots.csv"), &output)?;
    }
    if verbose() {
        eprintln!(
            "{} run: {:.3e} bits, {}/{} vehicles served, wall time {:.3}s -> {}",
            args.method,
            report.metrics.total_data_bits,
            report.metrics.served_vehicles,
            report.metrics.n_trace_vehicles,
            report.wall_time_s,
            args.out.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ComparisonReport {
    cawbm: RunReport,
    dbscan: RunReport,
    /// cawbm total data over dbscan total data; null when dbscan moved no data.
    data_ratio: Option<f64>,
    /// cawbm served fraction minus dbscan served fraction; null without vehicles.
    served_delta: Option<f64>,
}

fn cmd_compare(args: CompareArgs) -> Result<(), Error> {
    let scenario = load_scenario(&args.scenario)?;
    let (_, cawbm) = execute(&scenario, Method::Cawbm, false)?;
    let (_, dbscan) = execute(&scenario, Method::Dbscan, false)?;

    let data_ratio = (dbscan.metrics.total_data_bits > 0.0)
        .then_some(cawbm.metrics.total_data_bits / dbscan.metrics.total_data_bits);
    let served_delta = (cawbm.metrics.n_trace_vehicles > 0)
        .then_some(cawbm.metrics.served_fraction - dbscan.metrics.served_fraction);
    if verbose() {
        eprintln!(
            "cawbm {:.3e} bits vs dbscan {:.3e} bits (ratio {:?}), served delta {:?}",
            cawbm.metrics.total_data_bits, dbscan.metrics.total_data_bits, data_ratio, served_delta
        );
    }
    let report = ComparisonReport {
        cawbm,
        dbscan,
        data_ratio,
        served_delta,
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_json(&args.out.join("comparison.json"), &report)
}

#[derive(Serialize)]
struct OracleInstance {
    seed: u64,
    candidates: usize,
    zones: usize,
    edges: usize,
    max_beams: usize,
    comp_limit: usize,
    conflict_free: bool,
    greedy_weight: f64,
    exact_weight: f64,
    /// greedy over exact; null when the exact optimum is zero.
    ratio: Option<f64>,
    greedy_feasible: bool,
    greedy_maximal: bool,
    exact_feasible: bool,
}

#[derive(Serialize)]
struct OracleReport {
    instances: usize,
    seed: u64,
    max_candidates: usize,
    violations: usize,
    min_ratio: Option<f64>,
    min_ratio_conflict_free: Option<f64>,
    per_instance: Vec<OracleInstance>,
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Error> {
    if args.max_candidates > DEFAULT_EXACT_LIMIT {
        return Err(Error::Size(format!(
            "max_candidates {} exceeds the exhaustive-search cap {DEFAULT_EXACT_LIMIT}",
            args.max_candidates
        )));
    }
    if let Some(dir) = &args.dump_graphs {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut per_instance = Vec::with_capacity(args.instances);
    let mut violations = 0usize;
    let mut min_ratio: Option<f64> = None;
    let mut min_ratio_cf: Option<f64> = None;
    for i in 0..args.instances {
        let instance_seed = args
            .seed
            .wrapping_mul(1_000_003)
            .wrapping_add(i as u64);
        let inst = random_instance_capped(instance_seed, args.max_candidates);
        let greedy = greedy_match(&inst.graph, inst.max_beams, inst.comp_limit);
        let exact = exact_match(
            &inst.graph,
            inst.max_beams,
            inst.comp_limit,
            DEFAULT_EXACT_LIMIT,
        )?;
        let greedy_feasible =
            check_feasible(&greedy, &inst.graph, inst.max_beams, inst.comp_limit).ok;
        let exact_feasible =
            check_feasible(&exact, &inst.graph, inst.max_beams, inst.comp_limit).ok;
        let greedy_maximal = is_maximal(&greedy, &inst.graph, inst.max_beams, inst.comp_limit);
        let dominance = exact.total_weight + 1e-9 >= greedy.total_weight;
        if let Some(dir) = &args.dump_graphs {
            let write = |name: String, text: String| -> Result<(), Error> {
                let path = dir.join(name);
                std::fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
            };
            write(format!("instance_{i:04}.json"), inst.graph.to_json())?;
            write(format!("instance_{i:04}_greedy.json"), greedy.to_json())?;
            write(format!("instance_{i:04}_exact.json"), exact.to_json())?;
        }
        if !(greedy_feasible && exact_feasible && greedy_maximal && dominance) {
            violations += 1;
        }
        let ratio = (exact.total_weight > 0.0).then(|| greedy.total_weight / exact.total_weight);
        if let Some(r) = ratio {
            min_ratio = Some(min_ratio.map_or(r, |m: f64| m.min(r)));
            if inst.conflict_free {
                min_ratio_cf = Some(min_ratio_cf.map_or(r, |m: f64| m.min(r)));
            }
        }
        per_instance.push(OracleInstance {
            seed: instance_seed,
            candidates: inst.graph.candidates.len(),
            zones: inst.graph.zones.len(),
            edges: inst.graph.edges.len(),
            max_beams: inst.max_beams,
            comp_limit: inst.comp_limit,
            conflict_free: inst.conflict_free,
            greedy_weight: greedy.total_weight,
            exact_weight: exact.total_weight,
            ratio,
            greedy_feasible,
            greedy_maximal,
            exact_feasible,
        });
    }
    let report = OracleReport {
        instances: args.instances,
        seed: args.seed,
        max_candidates: args.max_candidates,
        violations,
        min_ratio,
        min_ratio_conflict_free: min_ratio_cf,
        per_instance,
    };
    if verbose() {
        eprintln!(
            "oracle: {} instances, {} violations, min ratio {:?}",
            args.instances, violations, min_ratio
        );
    }
    match &args.out {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", to_pretty_json(&report));
            Ok(())
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialization cannot fail")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = to_pretty_json(value);
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write an empirical CDF as `value,cdf` rows, values ascending, cdf ending
/// at exactly 1.0. An empty sample writes just the header.
fn write_cdf(path: &Path, values: &[f64]) -> Result<(), Error> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut text = String::from("value,cdf\n");
    for (i, v) in sorted.iter().enumerate() {
        text.push_str(&format!("{},{}\n", v, (i + 1) as f64 / n));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_cdfs(dir: &Path, metrics: &RunMetrics) -> Result<(), Error> {
    let sinr: Vec<f64> = metrics.mean_sinr_db.iter().map(|&(_, v)| v).collect();
    let rate: Vec<f64> = metrics.effective_rate_bps.iter().map(|&(_, v)| v).collect();
    let beam_users: Vec<f64> = metrics.beam_user_counts.iter().map(|&c| c as f64).collect();
    let served_time: Vec<f64> = metrics.served_time_s.iter().map(|&(_, v)| v).collect();
    write_cdf(&dir.join("sinr_cdf.csv"), &sinr)?;
    write_cdf(&dir.join("rate_cdf.csv"), &rate)?;
    write_cdf(&dir.join("beam_users_cdf.csv"), &beam_users)?;
    write_cdf(&dir.join("served_time_cdf.csv"), &served_time)
}

fn write_slot_log(path: &Path, output: &RunOutput) -> Result<(), Error> {
    let mut text = String::from("epoch,slot,gnb,beam_dir,beam_width,vehicle,rate_bps\n");
    for e in &output.slot_events {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.epoch, e.slot, e.gnb, e.beam_dir, e.beam_width, e.vehicle, e.rate_bps
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
