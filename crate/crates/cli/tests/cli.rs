use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqmt::calibration::CalibrationResult;
use seqmt::thresholds::kappa_gi;
use seqmt::{ErrorBudget, ExperimentReport};
use seqmt_cli::report::{read_run_csv, RUN_HEADER};
use seqmt_cli::sidecar_path;

const GAP: &str = r#"
[streams]
family = "gaussian-mean"
null = 0.0
alt = 0.5
j = 10

[truth]
count = 5

[rule]
type = "gap"
m = 5
c = 2.1

[budget]
alpha = 0.05
beta = 0.05

[run]
replications = 2000
seed = 42
metrics = ["fdr", "fnr", "fwe1", "pfer"]
"#;

fn gi(l: usize, u: usize, signals: usize, metrics: &str) -> String {
    format!(
        r#"
[streams]
family = "gaussian-mean"
null = 0.0
alt = 0.5
j = 10

[truth]
count = {signals}

[rule]
type = "gap-intersection"
l = {l}
u = {u}
a = "auto"
b = "auto"
c = "auto"
d = "auto"

[budget]
alpha = 0.05
beta = 0.05

[run]
replications = 500
seed = 3
metrics = {metrics}
"#
    )
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.0.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn seqmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqmt"))
        .args(args)
        .env_remove("SEQMT_WORKERS")
        .output()
        .unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn run_writes_csv_with_the_documented_header() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let out = seqmt(&["run", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "rule,J,m_or_bounds,threshold,reps,seed,ET,ET_se,metric,value,se,n_effective,horizon_hits"
    );
    assert_eq!(RUN_HEADER.join(","), text.lines().next().unwrap());
    assert_eq!(lines.count(), 4);
}

#[test]
fn csv_and_json_round_trip_exactly() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let csv_path = dir.path("r.csv");
    let json_path = dir.path("r.json");
    for (format, path) in [("csv", &csv_path), ("json", &json_path)] {
        let out = seqmt(&[
            "run",
            "--config",
            arg(&cfg),
            "--format",
            format,
            "--out",
            arg(path),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let report: ExperimentReport =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    let rows = read_run_csv(fs::File::open(&csv_path).unwrap()).unwrap();
    assert_eq!(rows.len(), report.metrics.len());
    for (row, m) in rows.iter().zip(&report.metrics) {
        assert_eq!(row.metric, Some(m.metric));
        assert_eq!(row.value.unwrap().to_bits(), m.estimate.value.to_bits());
        assert_eq!(row.se.unwrap().to_bits(), m.estimate.se.to_bits());
        assert_eq!(row.n_effective, Some(m.estimate.n_effective));
        assert_eq!(row.et.to_bits(), report.mean_stopping_time.value.to_bits());
        assert_eq!(row.et_se.to_bits(), report.mean_stopping_time.se.to_bits());
        assert_eq!(row.thresholds().unwrap(), report.rule.thresholds());
        assert_eq!((row.reps, row.seed), (2000, 42));
    }

    // the JSON report re-serializes to the same text
    let again = serde_json::to_string_pretty(&report).unwrap();
    assert_eq!(
        again.trim_end(),
        fs::read_to_string(&json_path).unwrap().trim_end()
    );
}

#[test]
fn sidecar_config_reproduces_the_run() {
    let dir = Dir::new();
    let text = gi(2, 7, 4, r#"["fdr", "fnr"]"#);
    let cfg = dir.file("gi.toml", &text);
    let first = dir.path("first.csv");
    let out = seqmt(&["run", "--config", arg(&cfg), "--out", arg(&first)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let side = sidecar_path(&first);
    let resolved = fs::read_to_string(&side).unwrap();
    assert!(!resolved.contains("auto"), "{resolved}");

    let second = dir.path("second.csv");
    let out = seqmt(&["run", "--config", arg(&side), "--out", arg(&second)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&first).unwrap(),
        fs::read_to_string(&second).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let one = seqmt(&["run", "--config", arg(&cfg), "--workers", "1"]);
    let from_env = Command::new(env!("CARGO_BIN_EXE_seqmt"))
        .args(["run", "--config", arg(&cfg)])
        .env("SEQMT_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(from_env.status.code(), Some(0), "{}", stderr(&from_env));
    assert_eq!(one.stdout, from_env.stdout);
}

#[test]
fn overrides_apply() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let out = seqmt(&["run", "--config", arg(&cfg), "--reps", "100", "--seed", "9"]);
    let rows = read_run_csv(out.stdout.as_slice()).unwrap();
    assert!(rows.iter().all(|r| r.reps == 100 && r.seed == 9));
}

#[test]
fn invalid_alpha_exits_2_naming_the_field() {
    let dir = Dir::new();
    let cfg = dir.file("bad.toml", &GAP.replace("alpha = 0.05", "alpha = 1.5"));
    let out = seqmt(&["run", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_and_missing_files_exit_2() {
    let dir = Dir::new();
    let cfg = dir.file(
        "bad.toml",
        &GAP.replace("seed = 42", "seed = 42\nthreads = 4"),
    );
    let out = seqmt(&["run", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("threads"), "{}", stderr(&out));
    let out = seqmt(&["run", "--config", arg(&dir.path("missing.toml"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pfdr_with_zero_lower_bound_exits_1() {
    let dir = Dir::new();
    let cfg = dir.file("gi.toml", &gi(0, 7, 4, r#"["fdr", "pfdr"]"#));
    let out = seqmt(&["run", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("1 <= l"), "{}", stderr(&out));
}

#[test]
fn calibration_recovers_the_gap_threshold() {
    let dir = Dir::new();
    let cfg = dir.file(
        "gap.toml",
        &GAP.replace("replications = 2000", "replications = 10000"),
    );
    let out = seqmt(&["calibrate", "--config", arg(&cfg), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let result: CalibrationResult = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        (result.chosen - 2.1).abs() <= 0.2 + 1e-9,
        "c = {}",
        result.chosen
    );
    assert!(!result.trace.is_empty());
}

#[test]
fn impossible_calibration_exits_1_with_trace() {
    let dir = Dir::new();
    let text = GAP
        .replace("alpha = 0.05", "alpha = 1e-9")
        .replace("beta = 0.05", "beta = 1e-9")
        .replace("replications = 2000", "replications = 1000")
        + "\n[calibration]\nc_cap = 3.0\n";
    let cfg = dir.file("imp.toml", &text);
    let out = seqmt(&["calibrate", "--config", arg(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("evaluated ["), "{}", stderr(&out));
}

#[test]
fn reproduce_selected_rows() {
    let out = seqmt(&[
        "reproduce",
        "table1",
        "--rows",
        "1,5,9",
        "--reps",
        "500",
        "--format",
        "text",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("BH n (savings)"));
    assert_eq!(text.lines().count(), 5, "{text}");

    let out = seqmt(&["reproduce", "table2", "--rows", "1,50,99", "--reps", "200"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn reproduce_empty_rows_is_header_only() {
    let out = seqmt(&["reproduce", "table1", "--rows", ""]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("table,m,c,ET,ET_se,FDR"));
}

#[test]
fn reproduce_unknown_row_exits_1() {
    let out = seqmt(&["reproduce", "table1", "--rows", "12"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let out = seqmt(&[
        "sweep",
        "--config",
        arg(&cfg),
        "--alphas",
        "1e-2,1e-4,1e-6",
        "--reps",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        [
            "rule",
            "alpha",
            "beta",
            "threshold",
            "ET",
            "ET_se",
            "kappa",
            "ratio",
            "horizon_hits"
        ]
    );
    let ratios: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[7].parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");

    let out = seqmt(&[
        "sweep",
        "--config",
        arg(&cfg),
        "--alphas",
        "1e-3",
        "--reps",
        "200",
    ]);
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn gi_sweep_uses_the_three_case_kappa() {
    let dir = Dir::new();
    for signals in [2, 4, 7] {
        let cfg = dir.file("gi.toml", &gi(2, 7, signals, r#"["fdr", "fnr"]"#));
        let out = seqmt(&[
            "sweep",
            "--config",
            arg(&cfg),
            "--alphas",
            "1e-3",
            "--reps",
            "200",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
        let row = reader.records().next().unwrap().unwrap();
        let kappa: f64 = row[6].parse().unwrap();
        let want = kappa_gi(
            ErrorBudget::symmetric(1e-3).unwrap(),
            0.125,
            0.125,
            signals,
            2,
            7,
        )
        .unwrap();
        assert_eq!(kappa, want, "|A| = {signals}");
    }
}

#[test]
fn bad_sweep_level_exits_2() {
    let dir = Dir::new();
    let cfg = dir.file("gap.toml", GAP);
    let out = seqmt(&["sweep", "--config", arg(&cfg), "--alphas", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn example_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let file = seqmt_cli::config::ConfigFile::load(&path).unwrap();
        file.experiment().unwrap();
        seen += 1;
    }
    assert_eq!(seen, 5);
}
