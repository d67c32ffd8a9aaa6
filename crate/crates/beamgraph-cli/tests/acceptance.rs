//! Acceptance suite. Each test prints one PASS/FAIL line for its criterion
//! (visible with `--nocapture`) and asserts it.
//!
//! 1. solver oracle equivalence over >= 500 random graphs
//! 2. constraint certification across 50 full simulation runs
//! 3. directional data/served comparison on 10 scenarios
//! 4. serving-time ordering on the same 10 scenarios
//! 5. channel unit checks
//! 6. slot-log conservation audit
//! 7. byte-identical outputs across repeated commands

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use beamgraph::channel;
use beamgraph::geometry::Point;
use beamgraph::matching::{
    check_feasible, exact_match, greedy_match, is_maximal, random_instance, DEFAULT_EXACT_LIMIT,
};
use beamgraph::scenario::{generate_synthetic, Config, GnbSite, Trace, ZoneGrid};
use beamgraph::simulator::{run, Method};

fn announce(criterion: usize, ok: bool, detail: &str) {
    println!(
        "acceptance {criterion} {}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn grid_for(trace: &Trace, gnbs: &[GnbSite], cfg: &Config) -> ZoneGrid {
    let points: Vec<Point> = trace
        .records
        .iter()
        .map(|r| r.position)
        .chain(gnbs.iter().map(|g| g.position))
        .collect();
    ZoneGrid::covering(&points, cfg.model.zone_size_m).unwrap()
}

#[test]
fn criterion_1_solver_oracle_equivalence() {
    let start = Instant::now();
    let n = 500;
    let mut infeasible = 0;
    let mut not_maximal = 0;
    let mut dominance_broken = 0;
    let mut bound_broken = 0;
    for seed in 0..n {
        let inst = random_instance(seed);
        let greedy = greedy_match(&inst.graph, inst.max_beams, inst.comp_limit);
        let exact = exact_match(
            &inst.graph,
            inst.max_beams,
            inst.comp_limit,
            DEFAULT_EXACT_LIMIT,
        )
        .unwrap();
        if !check_feasible(&greedy, &inst.graph, inst.max_beams, inst.comp_limit).ok {
            infeasible += 1;
        }
        if !is_maximal(&greedy, &inst.graph, inst.max_beams, inst.comp_limit) {
            not_maximal += 1;
        }
        if exact.total_weight + 1e-9 < greedy.total_weight {
            dominance_broken += 1;
        }
        if inst.conflict_free
            && exact.total_weight > 0.0
            && greedy.total_weight / exact.total_weight < 0.5
        {
            bound_broken += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = infeasible == 0
        && not_maximal == 0
        && dominance_broken == 0
        && bound_broken == 0
        && elapsed < Duration::from_secs(60);
    announce(
        1,
        ok,
        &format!(
            "{n} instances: {infeasible} infeasible, {not_maximal} non-maximal, \
             {dominance_broken} exact<greedy, {bound_broken} below 1/2 bound, {elapsed:.2?}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_constraint_certification() {
    let mut violations = 0;
    let mut epochs = 0;
    for i in 0..25u64 {
        let seed = 1000 + i;
        let (trace, gnbs) = generate_synthetic(600.0, 600.0, 25, 5, 6.0, 1.0, seed).unwrap();
        let cfg = Config::default();
        let grid = grid_for(&trace, &gnbs, &cfg);
        for method in [Method::Cawbm, Method::Dbscan] {
            let out = run(&trace, &gnbs, &grid, &cfg, method, seed, false).unwrap();
            for audit in &out.audits {
                epochs += 1;
                if !audit.feasible || !audit.power_ok {
                    violations += 1;
                }
            }
        }
    }
    let ok = violations == 0;
    announce(
        2,
        ok,
        &format!("50 runs, {epochs} epochs certified, {violations} violations"),
    );
    assert!(ok);
}

struct PairedRun {
    data_cawbm: f64,
    data_dbscan: f64,
    served_cawbm: f64,
    served_dbscan: f64,
    median_time_cawbm: f64,
    median_time_dbscan: f64,
    wall: Duration,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    if values.is_empty() {
        0.0
    } else {
        values[values.len() / 2]
    }
}

fn paired_runs() -> &'static Vec<PairedRun> {
    static RUNS: OnceLock<Vec<PairedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..10u64)
            .map(|seed| {
                let (trace, gnbs) =
                    generate_synthetic(1000.0, 1000.0, 100, 10, 20.0, 1.0, seed).unwrap();
                let cfg = Config::default();
                assert_eq!(cfg.radio.comp_limit, 1);
                let grid = grid_for(&trace, &gnbs, &cfg);
                let start = Instant::now();
                let cawbm = run(&trace, &gnbs, &grid, &cfg, Method::Cawbm, seed, false).unwrap();
                let dbscan = run(&trace, &gnbs, &grid, &cfg, Method::Dbscan, seed, false).unwrap();
                let wall = start.elapsed();
                PairedRun {
                    data_cawbm: cawbm.metrics.total_data_bits,
                    data_dbscan: dbscan.metrics.total_data_bits,
                    served_cawbm: cawbm.metrics.served_fraction,
                    served_dbscan: dbscan.metrics.served_fraction,
                    median_time_cawbm: median(
                        cawbm.metrics.served_time_s.iter().map(|&(_, t)| t).collect(),
                    ),
                    median_time_dbscan: median(
                        dbscan.metrics.served_time_s.iter().map(|&(_, t)| t).collect(),
                    ),
                    wall,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_3_directional_data_and_served() {
    let runs = paired_runs();
    let data_wins = runs
        .iter()
        .filter(|r| r.data_cawbm >= r.data_dbscan)
        .count();
    let mean_served_cawbm: f64 = runs.iter().map(|r| r.served_cawbm).sum::<f64>() / 10.0;
    let mean_served_dbscan: f64 = runs.iter().map(|r| r.served_dbscan).sum::<f64>() / 10.0;
    let slowest = runs.iter().map(|r| r.wall).max().unwrap();
    let ok = data_wins >= 8
        && mean_served_cawbm >= mean_served_dbscan
        && slowest < Duration::from_secs(120);
    announce(
        3,
        ok,
        &format!(
            "data wins {data_wins}/10, mean served {mean_served_cawbm:.3} vs \
             {mean_served_dbscan:.3}, slowest pair {slowest:.2?}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_serving_time_ordering() {
    let runs = paired_runs();
    let time_wins = runs
        .iter()
        .filter(|r| r.median_time_cawbm >= r.median_time_dbscan)
        .count();
    let ok = time_wins >= 7;
    announce(4, ok, &format!("median served-time wins {time_wins}/10"));
    assert!(ok);
}

#[test]
fn criterion_5_channel_unit_checks() {
    let pl = channel::path_loss_db(100.0, true, 76.0, 2.1, 3.19);
    let pl_ok = (pl - 112.02).abs() <= 0.01;

    let noise_dbm = channel::watts_to_dbm(channel::noise_power(400e6, 7.0));
    let noise_ok = (noise_dbm - -80.98).abs() <= 0.01;

    let mut conservation_ok = true;
    for width in [5.0f64, 10.0, 15.0] {
        let alpha = width.to_radians();
        let total =
            alpha * channel::tx_gain(width, true, 0.01) + (std::f64::consts::TAU - alpha) * 0.01;
        if (total - std::f64::consts::TAU).abs() / std::f64::consts::TAU > 1e-9 {
            conservation_ok = false;
        }
    }

    let g5 = channel::tx_gain(5.0, true, 0.01);
    let g10 = channel::tx_gain(10.0, true, 0.01);
    let g15 = channel::tx_gain(15.0, true, 0.01);
    let monotone_ok = g5 > g10 && g10 > g15;

    let ok = pl_ok && noise_ok && conservation_ok && monotone_ok;
    announce(
        5,
        ok,
        &format!(
            "path loss {pl:.4} dB, noise {noise_dbm:.4} dBm, conservation {conservation_ok}, \
             gain monotone {monotone_ok}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_conservation_audit() {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let (trace, gnbs) = generate_synthetic(700.0, 700.0, 30, 5, 5.0, 1.0, 50 + seed).unwrap();
        let cfg = Config::default();
        let grid = grid_for(&trace, &gnbs, &cfg);
        let method = if seed % 2 == 0 { Method::Cawbm } else { Method::Dbscan };
        let out = run(&trace, &gnbs, &grid, &cfg, method, seed, true).unwrap();
        let recomputed: f64 = out
            .slot_events
            .iter()
            .map(|e| e.rate_bps * cfg.model.slot_s)
            .sum();
        let denom = out.metrics.total_data_bits.max(1.0);
        worst = worst.max((recomputed - out.metrics.total_data_bits).abs() / denom);
    }
    let ok = worst <= 1e-9;
    announce(
        6,
        ok,
        &format!("worst relative slot-log residual {worst:.3e} over 5 runs"),
    );
    assert!(ok);
}

fn beamgraph_bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_beamgraph"));
    cmd.env("BEAMGRAPH_LOG", "quiet");
    cmd
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_7_byte_identical_repeats() {
    let base = tempfile::tempdir().unwrap();
    let base = base.path();

    // one scenario shared by the run repeats
    let scen = base.join("scen");
    let status = beamgraph_bin()
        .args([
            "gen", "--area", "500x500", "--vehicles", "15", "--gnbs", "3", "--horizon", "4",
            "--seed", "9", "-o",
        ])
        .arg(&scen)
        .status()
        .unwrap();
    assert!(status.success());

    let mut all_ok = true;
    for repeat_set in ["gen", "run", "oracle"] {
        let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        for i in 0..3 {
            let out = base.join(format!("{repeat_set}_{i}"));
            std::fs::create_dir_all(&out).unwrap();
            let mut cmd = beamgraph_bin();
            match repeat_set {
                "gen" => {
                    cmd.args([
                        "gen", "--area", "500x500", "--vehicles", "15", "--gnbs", "3",
                        "--horizon", "4", "--seed", "9", "-o",
                    ])
                    .arg(&out);
                }
                "run" => {
                    cmd.args(["run", "--trace"])
                        .arg(scen.join("trace.csv"))
                        .arg("--gnbs")
                        .arg(scen.join("gnbs.csv"))
                        .args(["--method", "cawbm", "--seed", "9", "--slot-log", "-o"])
                        .arg(&out);
                }
                "oracle" => {
                    cmd.args(["oracle", "--instances", "40", "--seed", "5", "-o"])
                        .arg(out.join("oracle.json"));
                }
                _ => unreachable!(),
            }
            let status = cmd.status().unwrap();
            assert!(status.success(), "{repeat_set} repeat {i} failed");
            outputs.push(read_dir_files(&out));
        }
        let identical = outputs[0] == outputs[1] && outputs[1] == outputs[2];
        if !identical {
            all_ok = false;
        }
    }
    announce(
        7,
        all_ok,
        "3 commands x 3 repeats produce byte-identical JSON/CSV outputs",
    );
    assert!(all_ok);
}
