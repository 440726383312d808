use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use securecache::output::read_payload_dump;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_securecache"));
    c.env_remove("SECURECACHE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(rec.iter().map(String::from))
                .collect()
        })
        .collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rate_examples() {
    let r = json(&run(&[
        "rate",
        "--scheme",
        "centralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "1.6667",
    ]));
    assert!((r["R_secure"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(r["regime_valid"], Value::Bool(true));

    let r = json(&run(&[
        "rate",
        "--scheme",
        "decentralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "1.6667",
    ]));
    assert!((r["R_secure"].as_f64().unwrap() - 38.0 / 27.0).abs() < 1e-3);
    assert!(r["R_baseline"].is_null());

    let r = json(&run(&[
        "rate",
        "--scheme",
        "centralized",
        "--n",
        "5",
        "--k",
        "5",
        "--m",
        "5",
    ]));
    assert_eq!(r["R_secure"].as_f64(), Some(0.0));
}

#[test]
fn infeasible_cache_size_exits_nonzero() {
    let out = run(&[
        "rate",
        "--scheme",
        "centralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "0.5",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("M < 1 infeasible under secure delivery"));

    let out = run(&[
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "0.5",
        "--f",
        "3",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("M < 1 infeasible under secure delivery"));
}

#[test]
fn two_user_example_simulation_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("payload.bin");
    let out = run(&[
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "2",
        "--k",
        "2",
        "--t",
        "1",
        "--f",
        "128",
        "--demand",
        "1,2",
        "--dump",
        path(&dump),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["measured_rate"].as_f64(), Some(0.5));
    assert_eq!(r["passed"], Value::Bool(true));
    let names: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["decode", "secrecy", "memory", "rate"]);
    assert_eq!(r["memory"]["per_user_bits"], serde_json::json!([192, 192]));

    let payload = read_payload_dump(fs::File::open(&dump).unwrap()).unwrap();
    assert_eq!(payload.records.len(), 1);
    assert_eq!(payload.records[0].subset.to_vec(), vec![1, 2]);
    assert_eq!(payload.records[0].ciphertext.len(), 64);
}

#[test]
fn tiny_secrecy_check_is_exhaustive() {
    for args in [
        [
            "--scheme",
            "centralized",
            "--n",
            "2",
            "--k",
            "2",
            "--t",
            "1",
            "--f",
            "2",
        ],
        [
            "--scheme",
            "decentralized",
            "--n",
            "2",
            "--k",
            "2",
            "--m",
            "1.5",
            "--f",
            "4",
        ],
    ] {
        let out = bin()
            .arg("simulate")
            .args(args)
            .args(["--check", "secrecy"])
            .output()
            .unwrap();
        assert!(out.status.success());
        let r = json(&out);
        assert_eq!(r["leakage"]["method"], "exhaustive");
        assert_eq!(r["leakage"]["mutual_information_bits"].as_f64(), Some(0.0));
        assert_eq!(r["leakage"]["audits"]["failures"], serde_json::json!([]));
    }
}

#[test]
fn decentralized_rate_concentrates() {
    let dir = tempfile::tempdir().unwrap();
    let frag = dir.path().join("fragments.json");
    let out = run(&[
        "simulate",
        "--scheme",
        "decentralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "1.6666666666666667",
        "--f",
        "300000",
        "--check",
        "decode,memory,rate",
        "--fragments",
        path(&frag),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    let rate = r["measured_rate"].as_f64().unwrap();
    assert!(
        (rate - 38.0 / 27.0).abs() / (38.0 / 27.0) <= 0.05,
        "rate {rate}"
    );

    let map: Value = serde_json::from_str(&fs::read_to_string(&frag).unwrap()).unwrap();
    for file in ["1", "2", "3"] {
        let sizes = map[file].as_object().unwrap();
        assert_eq!(sizes.len(), 8);
        assert_eq!(
            sizes.values().map(|v| v.as_u64().unwrap()).sum::<u64>(),
            300_000
        );
    }
}

#[test]
fn failing_check_is_named_and_exits_nonzero() {
    let out = run(&[
        "simulate",
        "--scheme",
        "decentralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "2",
        "--f",
        "30",
        "--check",
        "rate",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed: rate"));
    assert_eq!(json(&out)["passed"], Value::Bool(false));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{"scheme":"decentralized","N":3,"K":3,"F":600,"M":2.0,"seed":11,"demand":[2,2,3],"checks":["decode","secrecy"]}"#,
    )
    .unwrap();
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
        .map(|i| {
            let report = dir.path().join(format!("r{i}.json"));
            let dump = dir.path().join(format!("d{i}.bin"));
            let out = run(&[
                "simulate",
                path(&config),
                "--out",
                path(&report),
                "--dump",
                path(&dump),
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            (fs::read(&report).unwrap(), fs::read(&dump).unwrap())
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    let r: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert_eq!(r["demand"], serde_json::json!([2, 2, 3]));
    assert_eq!(r["params"]["seed"], 11);

    // Flags override the file.
    let out = run(&["simulate", path(&config), "--seed", "12", "--f", "300"]);
    let r = json(&out);
    assert_eq!(r["params"]["seed"], 12);
    assert_eq!(r["params"]["file_bits"], 300);
}

#[test]
fn seed_falls_back_to_environment() {
    let args = [
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "2",
        "--k",
        "2",
        "--t",
        "0",
        "--f",
        "8",
        "--check",
        "decode",
    ];
    let with_env = |seed: &str| {
        bin()
            .args(args)
            .env("SECURECACHE_SEED", seed)
            .output()
            .unwrap()
    };
    assert_eq!(json(&with_env("42"))["params"]["seed"], 42);
    assert_eq!(json(&run(&args))["params"]["seed"], 0);
    let flagged = bin()
        .args(args)
        .args(["--seed", "5"])
        .env("SECURECACHE_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(json(&flagged)["params"]["seed"], 5);
    assert!(!with_env("nope").status.success());
}

#[test]
fn config_errors_name_the_field() {
    let out = run(&[
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "3",
        "--k",
        "3",
        "--m",
        "1.3",
        "--f",
        "3",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `M`"));
    let out = run(&[
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "2",
        "--k",
        "2",
        "--t",
        "1",
        "--f",
        "3",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `t`"));
    let out = run(&[
        "simulate",
        "--scheme",
        "centralized",
        "--n",
        "2",
        "--k",
        "2",
        "--t",
        "1",
        "--f",
        "2",
        "--demand",
        "1",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("field `demand`"));
}

#[test]
fn keymem_rows_and_regimes() {
    let out = run(&["keymem", "--n", "5", "--k", "5"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 6);
    let regimes: Vec<&str> = rows.iter().map(|r| r["regime"].as_str()).collect();
    assert_eq!(
        regimes,
        ["regime-1", "regime-2", "regime-3", "regime-4", "regime-5", "no-keys"]
    );
    let desirable: Vec<&str> = rows.iter().map(|r| r["desirable"].as_str()).collect();
    assert_eq!(
        desirable,
        ["false", "true", "true", "true", "true", "false"]
    );
}

#[test]
fn tradeoff_columns_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("tradeoff.csv");
    let out = run(&[
        "tradeoff",
        "--n",
        "20",
        "--k",
        "20",
        "--out",
        path(&csv_path),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("scheme,N,K,M,R_secure,R_baseline,R_lower,gap,regime_valid\n"));
    let rows = csv_rows(&text);
    for scheme in ["centralized", "decentralized"] {
        let series: Vec<&std::collections::HashMap<String, String>> =
            rows.iter().filter(|r| r["scheme"] == scheme).collect();
        assert!(series.len() > 20);
        for column in ["R_secure", "R_lower"] {
            let v: Vec<f64> = series.iter().map(|r| r[column].parse().unwrap()).collect();
            assert!(
                v.windows(2).all(|w| w[1] <= w[0] + 1e-9),
                "{scheme} {column} not monotone"
            );
        }
    }
}

#[test]
fn gap_sweep_stays_below_seventeen() {
    let out = run(&["gap", "--n-max", "200", "--k-max", "200"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2 * 200 * 200 - 200);
    let worst = rows
        .iter()
        .map(|r| r["gap"].parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst <= 17.0, "max gap {worst}");
}

#[test]
fn unwritable_output_exits_nonzero() {
    let out = run(&[
        "keymem",
        "--n",
        "5",
        "--k",
        "5",
        "--out",
        "/nonexistent-dir/keymem.csv",
    ]);
    assert!(!out.status.success());
}
