use std::path::Path;
use std::process::{Command, Output};

fn sosub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sosub"))
        .args(args)
        .env_remove("SOSUB_PRECISION_BITS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The `value` and `precision_bits` columns of the single data row printed by `bound`.
fn bound_row(out: &Output) -> (f64, usize) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["kind", "f", "measure", "r", "value", "precision_bits", "eig_residual"]
    );
    let rec = rdr.records().next().unwrap().unwrap();
    (rec[4].parse().unwrap(), rec[5].parse().unwrap())
}

#[test]
fn bound_examples() {
    let (v, bits) =
        bound_row(&sosub(&["bound", "--kind", "ub", "--f", "x1^2", "--measure", "gamma:alpha=2,n=1", "--r", "0"]));
    assert_eq!(v, 0.5);
    assert_eq!(bits, 512);
    let (v, _) = bound_row(&sosub(&[
        "bound",
        "--kind",
        "ubpf",
        "--f",
        "x1^2+x1^6",
        "--measure",
        "gamma:alpha=2,n=1",
        "--r",
        "4",
    ]));
    assert_eq!(format!("{v:.2}"), "1.67");
    let (v, _) = bound_row(&sosub(&["bound", "--kind", "ub", "--f", "7", "--measure", "box:-1..1", "--r", "2"]));
    assert!((v - 7.0).abs() < 1e-30);
}

#[test]
fn exit_codes() {
    let parse = sosub(&["bound", "--kind", "ub", "--f", "x1^", "--measure", "box:-1..1", "--r", "1"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(!parse.stderr.is_empty());
    let measure = sosub(&["bound", "--kind", "ub", "--f", "x1", "--measure", "cauchy:1", "--r", "1"]);
    assert_eq!(measure.status.code(), Some(2));
    let too_many_vars = sosub(&["bound", "--kind", "ub", "--f", "x2", "--measure", "box:-1..1", "--r", "1"]);
    assert_eq!(too_many_vars.status.code(), Some(2));
    let budget = sosub(&["bound", "--kind", "ub", "--f", "x1^2", "--measure", "box:-1..1", "--r", "300"]);
    assert_eq!(budget.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&budget.stderr).contains("budget"));
}

#[test]
fn precision_precedence() {
    let args = ["bound", "--kind", "ub", "--f", "x1^2", "--measure", "box:-1..1", "--r", "1"];
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sosub"));
        cmd.args(extra).args(args).env_remove("SOSUB_PRECISION_BITS");
        if let Some(v) = env {
            cmd.env("SOSUB_PRECISION_BITS", v);
        }
        bound_row(&cmd.output().unwrap()).1
    };
    assert_eq!(run(None, &[]), 512);
    assert_eq!(run(Some("192"), &[]), 192);
    assert_eq!(run(Some("192"), &["--precision-bits", "256"]), 256);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "precision_bits = 320\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(Some("192"), &["--config", cfg]), 320);
    assert_eq!(run(Some("192"), &["--config", cfg, "--precision-bits", "256"]), 256);
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("c.toml");
    std::fs::write(&cfg, "[grid]\npoints = 40\nlo = 1e-3\nhi = 1e3\n").unwrap();
    for dir in [a.path(), b.path()] {
        let d = dir.to_str().unwrap();
        let c = cfg.to_str().unwrap();
        for cmd in [&["nonconv-lsl", "--r-max", "4"][..], &["density-compare"], &["compact-rate", "--r-max", "6"]] {
            let mut args = vec!["--out-dir", d, "--precision-bits", "256", "--config", c];
            args.extend_from_slice(cmd);
            let out = sosub(&args);
            assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    for name in [
        "nonconv_lsl.csv",
        "nonconv_lsl_2dp.csv",
        "nonconv_lsl.svg",
        "density_compare.csv",
        "density_compare_summary.csv",
        "compact_rate.csv",
        "compact_rate_fit.csv",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let lsl = read(a.path(), "nonconv_lsl_2dp.csv");
    assert_eq!(lsl.lines().count(), 6);
    assert!(lsl.lines().nth(1).unwrap().starts_with("0.5,0,120.00,0.50"));
    let summary = read(a.path(), "density_compare_summary.csv");
    assert!(summary.lines().nth(1).unwrap().contains(",40,log,"));
}

#[test]
fn csv_format_skips_plots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = sosub(&["--out-dir", d, "--format", "csv", "--precision-bits", "256", "compact-rate", "--r-max", "4"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("log-log slope"));
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert!(names.iter().all(|n| n.ends_with(".csv")), "{names:?}");
    assert_eq!(names.len(), 4);
}

#[test]
fn invalid_experiment_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(sosub(&["--out-dir", d, "nonconv-lsl", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(sosub(&["--out-dir", d, "density-compare", "--d", "2"]).status.code(), Some(2));
    assert_eq!(sosub(&["--out-dir", d, "compact-rate", "--r-max", "3"]).status.code(), Some(2));
    assert_eq!(sosub(&["--out-dir", d, "--precision-bits", "16", "table1"]).status.code(), Some(2));
}
