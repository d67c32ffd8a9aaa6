//! CLI contract tests: exit codes, output schemas and the replay guarantee.

use std::path::Path;
use std::process::Command;

fn beamgraph() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_beamgraph"));
    cmd.env("BEAMGRAPH_LOG", "quiet");
    cmd
}

fn gen_scenario(dir: &Path, vehicles: u32, seed: u32) {
    let status = beamgraph()
        .args([
            "gen",
            "--area",
            "500x500",
            "--vehicles",
            &vehicles.to_string(),
            "--gnbs",
            "3",
            "--horizon",
            "4",
            "--seed",
            &seed.to_string(),
            "-o",
        ])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn exit_codes_are_stable() {
    let tmp = tempfile::tempdir().unwrap();

    // missing input file -> 3
    let code = beamgraph()
        .args(["run", "--trace", "/no/such/trace.csv", "--gnbs", "/no/such/gnbs.csv"])
        .args(["--method", "cawbm", "-o"])
        .arg(tmp.path().join("out"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));

    // invalid method -> usage error 2
    let scen = tmp.path().join("scen");
    gen_scenario(&scen, 5, 1);
    let code = beamgraph()
        .args(["run", "--trace"])
        .arg(scen.join("trace.csv"))
        .arg("--gnbs")
        .arg(scen.join("gnbs.csv"))
        .args(["--method", "kmeans", "-o"])
        .arg(tmp.path().join("out2"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // malformed config file -> 2
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let code = beamgraph()
        .args(["run", "--trace"])
        .arg(scen.join("trace.csv"))
        .arg("--gnbs")
        .arg(scen.join("gnbs.csv"))
        .args(["--method", "cawbm", "--config"])
        .arg(&cfg)
        .arg("-o")
        .arg(tmp.path().join("out3"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // oracle cap exceeded -> 4
    let code = beamgraph()
        .args(["oracle", "--instances", "1", "--max-candidates", "25"])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(4));

    // gNB placement impossible -> 2
    let code = beamgraph()
        .args([
            "gen", "--area", "150x150", "--vehicles", "0", "--gnbs", "500", "-o",
        ])
        .arg(tmp.path().join("out4"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // unwritable output path -> 3
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let code = beamgraph()
        .args([
            "gen", "--area", "300x300", "--vehicles", "1", "--gnbs", "1", "-o",
        ])
        .arg(blocker.join("sub"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));
}

fn parse_cdf(path: &Path) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,cdf"));
    lines
        .map(|l| {
            let (v, c) = l.split_once(',').unwrap();
            (v.parse().unwrap(), c.parse().unwrap())
        })
        .collect()
}

#[test]
fn cdf_files_are_valid_distributions() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scen");
    gen_scenario(&scen, 20, 7);
    let out = tmp.path().join("out");
    let status = beamgraph()
        .args(["run", "--trace"])
        .arg(scen.join("trace.csv"))
        .arg("--gnbs")
        .arg(scen.join("gnbs.csv"))
        .args(["--method", "dbscan", "--seed", "7", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    for name in [
        "sinr_cdf.csv",
        "rate_cdf.csv",
        "beam_users_cdf.csv",
        "served_time_cdf.csv",
    ] {
        let rows = parse_cdf(&out.join(name));
        assert!(!rows.is_empty(), "{name} has no rows");
        for pair in rows.windows(2) {
            assert!(pair[1].0 >= pair[0].0, "{name} values not sorted");
            assert!(pair[1].1 >= pair[0].1, "{name} cdf not monotone");
        }
        assert_eq!(rows.last().unwrap().1, 1.0, "{name} cdf must end at 1");
    }
}

#[test]
fn empty_trace_gives_zero_report_and_empty_cdfs() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    std::fs::write(&trace, "time_s,vehicle_id,x_m,y_m\n").unwrap();
    let gnbs = tmp.path().join("gnbs.csv");
    std::fs::write(&gnbs, "gnb_id,x_m,y_m\n0,0,0\n").unwrap();
    let out = tmp.path().join("out");
    let status = beamgraph()
        .args(["run", "--trace"])
        .arg(&trace)
        .arg("--gnbs")
        .arg(&gnbs)
        .args(["--method", "cawbm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["total_data_bits"], 0.0);
    assert_eq!(report["metrics"]["served_vehicles"], 0);
    assert_eq!(
        std::fs::read_to_string(out.join("sinr_cdf.csv")).unwrap(),
        "value,cdf\n"
    );

    // compare on the empty trace reports null ratios
    let cmp_out = tmp.path().join("cmp");
    let status = beamgraph()
        .args(["compare", "--trace"])
        .arg(&trace)
        .arg("--gnbs")
        .arg(&gnbs)
        .arg("-o")
        .arg(&cmp_out)
        .status()
        .unwrap();
    assert!(status.success());
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cmp_out.join("comparison.json")).unwrap())
            .unwrap();
    assert!(cmp["data_ratio"].is_null());
    assert!(cmp["served_delta"].is_null());
    assert!(cmp["cawbm"]["metrics"].is_object());
    assert!(cmp["dbscan"]["metrics"].is_object());
}

#[test]
fn report_echo_replays_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scen");
    gen_scenario(&scen, 12, 3);
    let out = tmp.path().join("out");
    let status = beamgraph()
        .args(["run", "--trace"])
        .arg(scen.join("trace.csv"))
        .arg("--gnbs")
        .arg(scen.join("gnbs.csv"))
        .args(["--method", "cawbm", "--seed", "3", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    // reconstruct the command line from the echoed inputs
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let inputs = &report["inputs"];
    let replay_out = tmp.path().join("replay");
    let status = beamgraph()
        .args(["run", "--trace", inputs["trace"].as_str().unwrap()])
        .args(["--gnbs", inputs["gnbs"].as_str().unwrap()])
        .args(["--method", report["method"].as_str().unwrap()])
        .args(["--step", &inputs["step_s"].to_string()])
        .args(["--seed", &inputs["seed"].to_string()])
        .arg("-o")
        .arg(&replay_out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out.join("report.json")).unwrap(),
        std::fs::read(replay_out.join("report.json")).unwrap()
    );
}

#[test]
fn oracle_reports_clean_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle.json");
    let dumps = tmp.path().join("dumps");
    let status = beamgraph()
        .args(["oracle", "--instances", "100", "--seed", "2", "--dump-graphs"])
        .arg(&dumps)
        .arg("-o")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["violations"], 0);
    let min_ratio = report["min_ratio"].as_f64().unwrap();
    assert!(min_ratio <= 1.0 + 1e-12);
    let cf = report["min_ratio_conflict_free"].as_f64().unwrap();
    assert!(cf >= 0.5);
    assert_eq!(report["per_instance"].as_array().unwrap().len(), 100);

    // dumped graphs and solutions parse back through the library
    let graph = beamgraph::graphbuild::ConflictGraph::from_json(
        &std::fs::read_to_string(dumps.join("instance_0007.json")).unwrap(),
    )
    .unwrap();
    let sol = beamgraph::matching::Solution::from_json(
        &std::fs::read_to_string(dumps.join("instance_0007_greedy.json")).unwrap(),
    )
    .unwrap();
    sol.validate_against(&graph).unwrap();
    assert_eq!(
        beamgraph::matching::solution_weight(&sol, &graph).unwrap(),
        sol.total_weight
    );
}
