use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn beamhop(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_beamhop"));
    cmd.args(args).env_remove("BEAMHOP_THREADS");
    if let Some(t) = threads {
        cmd.env("BEAMHOP_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// All output files except the wall-clock timings.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timings.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut snaps = Vec::new();
    for (k, threads) in ["1", "8", "8"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{k}"));
        let out = beamhop(
            &[
                "-o",
                dir.to_str().unwrap(),
                "sweep",
                "--sensing-km",
                "60",
                "--design",
                "D3",
                "--design",
                "C2",
            ],
            Some(threads),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        snaps.push(snapshot(&dir));
    }
    assert!(snaps[0].contains_key("sweep.csv"));
    assert!(snaps[0].contains_key("cdf_D3_equal.csv"));
    assert!(snaps[0].contains_key("cdf_D3_snr_equalizing.csv"));
    assert!(snaps[0].contains_key("sinr_C2.csv"));
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[1], snaps[2]);

    let dir = tmp.path().join("run0");
    let sweep = read_json(&dir.join("sweep.json"));
    let d3 = &sweep["designs"][0];
    assert_eq!(d3["design"], "D3");
    assert_eq!(d3["k"], 463);
    assert!(d3["n_hops"].as_u64().unwrap() > 32);
    assert!(d3["p5_db"].as_f64().unwrap() >= 3.0);
    let sinr = std::fs::read_to_string(dir.join("sinr_D3.csv")).unwrap();
    assert_eq!(sinr.lines().next().unwrap(), "lat,lon,beam_id,ih,sinr_dB");
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["manifest"]["command"], "sweep");
    assert_eq!(
        manifest["files"].as_object().unwrap().len(),
        snaps[0].len() - 1
    );
}

#[test]
fn schedule_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = beamhop(
        &[
            "-o",
            dir.to_str().unwrap(),
            "schedule",
            "--scheme",
            "half_slot",
            "--scheme",
            "full-slot",
            "--n-hops",
            "62",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let kpi = read_json(&dir.join("kpi_half_slot_62_20ms.json"));
    assert_eq!(kpi["cs_slots"], 31);
    assert_eq!(kpi["cs_efficiency"], 0.80625);
    assert_eq!(kpi["msg4_per_s"], 87.5);
    assert_eq!(kpi["paging_ue_per_s"], 750.0);
    assert_eq!(kpi["coverage_ratio"], 1.0);
    let kpi = read_json(&dir.join("kpi_full_slot_62_20ms.json"));
    assert_eq!(kpi["cs_slots"], 62);
    assert_eq!(kpi["msg4_per_s"], 450.0);
    assert_eq!(kpi["paging_ue_per_s"], 1600.0);

    let csv = std::fs::read_to_string(dir.join("schedule_half_slot_62_20ms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "slot,symbol0,nsym,prb0,nprb,signal,ih,ssbi"
    );
    let signals: std::collections::BTreeSet<&str> =
        lines.map(|l| l.split(',').nth(5).unwrap()).collect();
    for s in [
        "SSB",
        "CORESET0_SS0",
        "SIB1",
        "SIB19",
        "PAGING",
        "MSG2",
        "MSG4",
    ] {
        assert!(signals.contains(s), "{s}");
    }
    let tl = read_json(&dir.join("timeline_half_slot_62_20ms.json"));
    assert_eq!(tl["half_frames"].as_array().unwrap().len(), 4);

    let manifest = read_json(&dir.join("manifest.json"));
    let config = std::fs::read(dir.join("config.json")).unwrap();
    assert_eq!(
        manifest["files"]["config.json"].as_str().unwrap(),
        sha256_of(&config)
    );
}

fn sha256_of(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn long_period_schedules() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = beamhop(
        &[
            "-o",
            dir.to_str().unwrap(),
            "schedule",
            "--period",
            "160",
            "--scheme",
            "extra_sweep160",
            "--scheme",
            "full_slot",
            "--n-hops",
            "62",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let extra = read_json(&dir.join("kpi_extra_sweep160_62_160ms.json"));
    assert_eq!(extra["cs_slots"], 124);
    assert_eq!(extra["ra_violations"], 0);
    let naive = read_json(&dir.join("kpi_full_slot_62_160ms.json"));
    assert!(naive["ra_violations"].as_u64().unwrap() > 0);
}

#[test]
fn strict_mode_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("strict");
    let d = dir.to_str().unwrap();
    let out = beamhop(
        &[
            "-o",
            d,
            "schedule",
            "--scheme",
            "extra_sweep",
            "--n-hops",
            "107",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let kpi = read_json(&dir.join("kpi_extra_sweep_107_20ms.json"));
    assert!(kpi["coverage_ratio"].as_f64().unwrap() < 1.0);
    let out = beamhop(
        &[
            "-o",
            d,
            "--strict",
            "schedule",
            "--scheme",
            "extra_sweep",
            "--n-hops",
            "107",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("107"));

    let cfg = tmp.path().join("tight.json");
    std::fs::write(&cfg, r#"{"search": {"start": 2, "max": 4}}"#).unwrap();
    let args = [
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        d,
        "sweep",
        "--sensing-km",
        "80",
        "--design",
        "D3",
    ];
    let out = beamhop(&args, None);
    assert_eq!(out.status.code(), Some(0));
    let sweep = read_json(&dir.join("sweep.json"));
    assert!(sweep["designs"][0]["n_hops"].is_null());
    let mut strict = vec!["--strict"];
    strict.extend(args);
    assert_eq!(beamhop(&strict, None).status.code(), Some(3));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("o");
    let d = d.to_str().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"designs": [{"name": "C9", "kind": "C", "alpha": 1.5}]}"#,
    )
    .unwrap();
    let out = beamhop(&["-c", bad.to_str().unwrap(), "-o", d, "layout"], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("designs[0]") && err.contains("alpha"), "{err}");

    std::fs::write(&bad, r#"{"orbit": {"altitude": 5}}"#).unwrap();
    assert_eq!(
        beamhop(&["-c", bad.to_str().unwrap(), "-o", d, "layout"], None)
            .status
            .code(),
        Some(2)
    );
    let missing = tmp.path().join("missing.json");
    assert_eq!(
        beamhop(&["-c", missing.to_str().unwrap(), "layout"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        beamhop(
            &[
                "-o",
                d,
                "schedule",
                "--scheme",
                "extra_sweep160",
                "--n-hops",
                "62"
            ],
            None
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        beamhop(&["-o", d, "layout", "--design", "Q"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        beamhop(&["-o", d, "--threads", "0", "layout"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        beamhop(&["schedule", "--scheme", "nope"], None)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn layout_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = beamhop(
        &[
            "-o",
            dir.to_str().unwrap(),
            "layout",
            "--design",
            "B",
            "--design",
            "D3",
            "--n-hops",
            "62",
        ],
        None,
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("B: K=1723"), "{stdout}");
    assert!(stdout.contains("D3: K=463"), "{stdout}");
    let summary = read_json(&dir.join("layout_D3.json"));
    assert_eq!(summary["k"], 463);
    let rows = std::fs::read_to_string(dir.join("layout_B.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1724);
    assert_eq!(
        rows.lines().next().unwrap(),
        "beam_id,lat,lon,theta_deg,phi_deg,wx_deg,wy_deg,br_km"
    );
    let hops = std::fs::read_to_string(dir.join("hops_D3_62.csv")).unwrap();
    assert_eq!(hops.lines().count(), 464);
    assert!(hops
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(3).unwrap().parse::<usize>().unwrap() < 62));
}
