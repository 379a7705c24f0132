//! End-to-end tests of the command-line interface: schema stability, golden
//! values on tiny configurations, exit-code contract, and SVG sanity.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subevo"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

/// Minimal CSV parse honoring quoted fields.
fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let mut fields = Vec::new();
        let mut cur = String::new();
        let mut in_quotes = false;
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                '"' if in_quotes && chars.peek() == Some(&'"') => {
                    cur.push('"');
                    chars.next();
                }
                '"' => in_quotes = !in_quotes,
                ',' if !in_quotes => {
                    fields.push(std::mem::take(&mut cur));
                }
                c => cur.push(c),
            }
        }
        fields.push(cur);
        rows.push(fields);
    }
    rows
}

#[test]
fn theory_schema_and_golden_values() {
    let dir = tempdir("theory_golden");
    let status = bin()
        .args([
            "theory",
            "--mode",
            "robust",
            "--loss",
            "huber",
            "--noise-scale",
            "3",
            "--delta",
            "5",
            "--q-grid",
            "0.3:0.9:0.3",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = parse_csv(&read(&dir.join("theory.csv")));
    assert_eq!(
        rows[0],
        vec!["label", "q", "eta", "sigma2", "gamma", "a", "eta_sigma2", "status"]
    );
    assert_eq!(rows.len(), 4);
    // frozen regression values for (delta=5, Huber, 3x t2) at q = 0.3/0.6/0.9
    let golden = [
        (0.3, 0.093304, 70.782016, 10.020163),
        (0.6, 0.410544, 11.806932, 2.414111),
        (0.9, 0.821472, 5.964368, 1.342477),
    ];
    for (row, (q, eta, sigma2, gamma)) in rows[1..].iter().zip(golden) {
        assert_eq!(row[7], "ok");
        assert!((row[1].parse::<f64>().unwrap() - q).abs() < 1e-9);
        assert!((row[2].parse::<f64>().unwrap() - eta).abs() < 1e-5, "eta {}", row[2]);
        assert!((row[3].parse::<f64>().unwrap() - sigma2).abs() < 1e-4);
        assert!((row[4].parse::<f64>().unwrap() - gamma).abs() < 1e-5);
        assert_eq!(row[5].parse::<f64>().unwrap(), 0.0);
    }
    for svg_name in ["theory_eta.svg", "theory_risk.svg"] {
        let svg = read(&dir.join(svg_name));
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(!svg.contains("http://") || svg.contains("xmlns"), "external refs");
    }
    // the affine reference line appears in robust mode
    assert!(read(&dir.join("theory_eta.svg")).contains("affine reference"));
}

#[test]
fn simulate_pair_schema_and_determinism() {
    let dir = tempdir("sim_pair");
    let args = [
        "simulate-pair",
        "--mode",
        "robust",
        "--loss",
        "pseudo-huber",
        "--noise-scale",
        "1",
        "--delta",
        "5",
        "--q",
        "0.6",
        "--n",
        "200",
        "--p",
        "40",
        "--reps",
        "4",
        "--seed",
        "11",
        "--out",
    ];
    assert!(bin().args(args).arg(&dir).status().unwrap().success());
    let first = read(&dir.join("simulate_pair.csv"));
    let rows = parse_csv(&first);
    assert_eq!(rows[0][0], "q");
    assert_eq!(rows[0].len(), 15);
    assert_eq!(rows[1][12], "4"); // completed
    assert_eq!(rows[1][13], "0"); // failed
    assert_eq!(rows[1][14], "ok");
    // bit-identical rerun
    let dir2 = tempdir("sim_pair2");
    assert!(bin().args(args).arg(&dir2).status().unwrap().success());
    assert_eq!(first, read(&dir2.join("simulate_pair.csv")));
}

#[test]
fn bagging_and_diagnostic_schemas() {
    let dir = tempdir("bag");
    assert!(bin()
        .args([
            "simulate-bagging",
            "--noise-scale",
            "3",
            "--delta",
            "5",
            "--q",
            "0.6",
            "--n",
            "150",
            "--p",
            "30",
            "--M",
            "3",
            "--reps",
            "3",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap()
        .success());
    let rows = parse_csv(&read(&dir.join("simulate_bagging.csv")));
    assert_eq!(rows[0][0], "q");
    assert_eq!(rows[0].len(), 9);
    assert_eq!(rows[1][8], "ok");

    assert!(bin()
        .args([
            "diagnostic",
            "--noise-scale",
            "3",
            "--delta",
            "5",
            "--q",
            "0.7",
            "--n",
            "200",
            "--p",
            "40",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap()
        .success());
    let rows = parse_csv(&read(&dir.join("diagnostic.csv")));
    assert_eq!(rows[0].len(), 11);
    assert_eq!(rows[0][4], "ks_marginal_a");
    assert_eq!(rows.len(), 2);
}

#[test]
fn exit_code_contract() {
    // usage errors: 2
    let st = bin().args(["theory", "--q-grid", "0.9:0.3:0.1", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = bin().args(["theory", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = bin().args(["theory", "--loss", "squared", "--q", "0.5", "--out", "/tmp/x"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    let st = bin().args(["nonsense"]).output().unwrap();
    assert_eq!(st.status.code(), Some(2));

    // all rows failing: 3 (q*delta <= 1 rejects every robust row)
    let dir = tempdir("allfail");
    let st = bin()
        .args(["theory", "--delta", "5", "--q-grid", "0.05:0.15:0.05", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(3));
    // failed rows carry their message in the status column (quoted commas parse)
    let rows = parse_csv(&read(&dir.join("theory.csv")));
    assert!(rows[1][7].contains("q*delta"));

    // mixed grid: some rows fail, overall success
    let st = bin()
        .args(["theory", "--delta", "5", "--q-grid", "0.1:0.6:0.5", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("subevo_cli_{tag}_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn thread_cap_env_is_honored() {
    let dir = tempdir("threads");
    let status = bin()
        .env("SUBEVO_THREADS", "1")
        .args([
            "simulate-pair",
            "--noise-scale",
            "1",
            "--delta",
            "5",
            "--q",
            "0.5",
            "--n",
            "120",
            "--p",
            "24",
            "--reps",
            "3",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
}
