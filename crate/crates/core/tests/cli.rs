use std::path::Path;
use std::process::Command;

fn qutrit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qutrit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn run_into(dir: &Path, args: &[&str]) {
    let mut full = args.to_vec();
    full.extend(["--out", dir.to_str().unwrap(), "--svg"]);
    let out = qutrit(&full);
    assert!(
        out.status.success(),
        "{:?}: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cases: [&[&str]; 3] = [
        &[
            "tomography",
            "--source",
            "stark",
            "--atoms",
            "50000",
            "--seed",
            "9",
        ],
        &[
            "averaging",
            "--scans",
            "3",
            "--replicates",
            "3",
            "--seed",
            "5",
        ],
        &["scan", "--points", "21"],
    ];
    for args in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_into(a.path(), args);
        run_into(b.path(), args);
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert!(fa.len() >= 2, "{args:?} wrote {} files", fa.len());
        assert_eq!(fa, fb, "{args:?}");
    }
}

#[test]
fn csv_header_carries_resolved_config() {
    let out = qutrit(&["detuning", "--points", "3", "--min", "-0.01"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let config = text
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .expect("config line");
    let v: serde_json::Value = serde_json::from_str(config).unwrap();
    assert_eq!(v["config"]["detuning"]["points"], 3);
    assert_eq!(v["config"]["detuning"]["min"], -0.01);
    assert_eq!(
        text.lines().filter(|l| !l.starts_with('#')).count(),
        1 + 2 * 3
    );
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"scan": {"points": 7, "input": 2}}"#).unwrap();
    let out = qutrit(&[
        "scan",
        "--config",
        cfg.to_str().unwrap(),
        "--points",
        "4",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["scan"]["points"], 4);
    assert_eq!(v["config"]["scan"]["input"], 2);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn validation_failures_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"decompose": {"entries": [[1,0],[1,0],[0,0],[0,0],[1,0],[0,0],[0,0],[0,0],[1,0]]}}"#,
    )
    .unwrap();
    for args in [
        vec!["decompose", "--config", bad.to_str().unwrap()],
        vec!["averaging"],
        vec!["scan", "--svg"],
        vec!["scan", "--alpha", "0"],
        vec!["frobnicate"],
    ] {
        assert_eq!(qutrit(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failures_exit_with_code_3() {
    use qutrit::cli::{exit_code, EXIT_NUMERICAL, EXIT_VALIDATION};
    use qutrit::Error;
    let tol = Error::Tolerance {
        what: "x".into(),
        value: 1.0,
        limit: 0.5,
    };
    assert_eq!(exit_code(&tol), EXIT_NUMERICAL);
    assert_eq!(
        exit_code(&Error::InvalidArgument("x".into())),
        EXIT_VALIDATION
    );
    // Selftest maps any failing criterion to the numerical code.
    let out = qutrit(&["selftest"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 11);
    let expected = if table.contains("[FAIL]") { 3 } else { 0 };
    assert_eq!(out.status.code(), Some(expected));
}
