use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amc-precode"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_SWEEP: &str = r#"{
  "sweep": {"max_symbols": 3200, "min_errors": 50, "vectors_per_channel": 10, "batch_blocks": 4,
            "schemes": ["digital", "amc", "neumann"]},
  "link": {"snr_db": [10, 20]}
}"#;

#[test]
fn ber_sweep_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let mut outputs = Vec::new();
    for workers in ["1", "1", "3"] {
        let out = dir.path().join(format!("w{}", outputs.len()));
        let o = run(&["--config", &cfg, "--workers", workers, "ber-sweep"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(out.join("ber.csv")).unwrap());
        assert!(out.join("ber.config.json").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "snr_db,scheme,symbols,bit_errors,ber,ci_low,ci_high,seed"
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn seed_flag_changes_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["--config", &cfg, "ber-sweep", "--snr", "10"], &a)
        .status
        .success());
    assert!(run(&["--config", &cfg, "--seed", "7", "ber-sweep", "--snr", "10"], &b)
        .status
        .success());
    let (ta, tb) = (
        fs::read_to_string(a.join("ber.csv")).unwrap(),
        fs::read_to_string(b.join("ber.csv")).unwrap(),
    );
    assert_ne!(ta, tb);
    assert!(tb.lines().nth(1).unwrap().ends_with(",7"));
}

#[test]
fn invalid_configs_exit_with_status_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"device":{"sigma_prog_us":-1}}"#, "sigma_prog_us"),
        (r#"{"devise":{}}"#, "devise"),
        ("{\n  \"dimensions\": {\"M\": 64\n", "line"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), text);
        let o = run(&["--config", &cfg, "precode"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    let o = run(&["precode", "--scheme", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_config_resolves_to_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{}");
    let o = run(&["--config", &cfg, "map-stats", "--matrices", "5"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mapstats.config.json")).unwrap()).unwrap();
    assert_eq!(echoed["dimensions"]["K"], 16);
    assert_eq!(echoed["dimensions"]["M"], 128);
    assert_eq!(echoed["master_seed"], 2024);
    assert_eq!(echoed["oa"]["gain_db"], 50.5);
    let csv = fs::read_to_string(dir.path().join("mapstats.csv")).unwrap();
    assert!(csv.lines().count() > 1);
}

#[test]
fn transient_waveform_spans_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["transient"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("waveform.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "time_ns,stage,node_index,voltage_v");
    let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (t, v): (f64, f64) = (f[0].parse().unwrap(), f[3].parse().unwrap());
        t_min = t_min.min(t);
        t_max = t_max.max(t);
        // Nothing moves before its enable edge.
        match f[1] {
            "INV" => assert!(t > 10.0 || v == 0.0, "{line}"),
            "MVM" => assert!(t > 20.0 || v == 0.0, "{line}"),
            other => panic!("unexpected stage {other}"),
        }
        assert!(v.abs() <= 0.6);
    }
    assert_eq!((t_min, t_max), (0.0, 30.0));
}

#[test]
fn strict_transient_faults_exit_with_status_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--strict", "transient"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!dir.path().join("waveform.csv").exists());
}

#[test]
fn power_report_matches_the_cost_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["power-report"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let power = fs::read_to_string(dir.path().join("power.csv")).unwrap();
    let mut lines = power.lines();
    assert_eq!(lines.next().unwrap(), "component,count,unit_power_mw,total_mw,fraction");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    let total: f64 = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 125.0).abs() <= 1.25, "{total}");
    let fraction = |name: &str| -> f64 { rows.iter().find(|r| r[0] == name).unwrap()[4].parse().unwrap() };
    assert!((0.45..=0.55).contains(&fraction("oa_mvm")));
    assert!(fraction("rram") < 0.02);
    let fsum: f64 = rows.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
    assert!((fsum - 1.0).abs() < 1e-12);

    let complexity = fs::read_to_string(dir.path().join("complexity.csv")).unwrap();
    assert_eq!(
        complexity,
        "scheme,inversion_ops,multiplication_ops\namc,1,1\nneumann,4096,32768\nqr,12800,32768\ngauss-jordan,4352,32768\n"
    );
}

#[test]
fn constellation_has_one_row_per_user_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constellation", "--snr", "40", "--trials", "25"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("constellation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trial,user,re_ideal,im_ideal,re_rx,im_rx");
    assert_eq!(lines.count(), 25 * 16);
}

#[test]
fn precode_prints_the_transmit_vector() {
    let dir = tempfile::tempdir().unwrap();
    for scheme in ["digital", "amc", "neumann"] {
        let o = run(&["precode", "--scheme", scheme, "--trial", "3"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let x = v["x"].as_array().unwrap();
        assert_eq!(x.len(), 128);
        let norm: f64 = x
            .iter()
            .map(|z| z[0].as_f64().unwrap().powi(2) + z[1].as_f64().unwrap().powi(2))
            .sum();
        assert!((norm - 1.0).abs() < 1e-9);
        assert!(v["alpha"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn smaller_array_override_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"dimensions":{"M":64}}"#);
    let o = run(&["--config", &cfg, "precode"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 64);
}
