use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddl"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let o = ddl(&["validate", "--config", config], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(text.contains("gradient tracking"));
}

#[test]
fn zero_rounds_emit_only_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddl(&["run", "--rounds", "0"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "nu,messages,objective,delta,cons_err,gamma");
    assert!(lines[1].starts_with("0,0,"));
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddl(
        &[
            "run",
            "--rounds",
            "7",
            "--agents",
            "4",
            "--graph",
            "directed_ring",
            "--variant",
            "plain",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("7,14,"));
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddl(&["run", "--variant", "fast"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown variant"));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "rounds = 5\nnot_a_key = 1\n").unwrap();
    let o = ddl(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = ddl(&["run", "--config", "/nonexistent/cfg.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = ddl(&["run", "--agents", "500"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn denoise_improves_on_the_noisy_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = ddl(&["denoise", "--rounds", "40"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let psnr = |prefix: &str| -> f64 {
        let line = report.lines().find(|l| l.starts_with(prefix)).unwrap();
        line.split_whitespace().nth(2).unwrap().parse().unwrap()
    };
    assert!(psnr("output") > psnr("input"), "{report}");
    assert!(report.starts_with("messages 80\n"));
    for name in [
        "clean.pgm",
        "noisy.pgm",
        "denoised.pgm",
        "denoise_trace.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let img = ddl_core::image::read_pgm(dir.path().join("denoised.pgm")).unwrap();
    assert_eq!((img.width, img.height), (64, 64));
}

#[test]
fn denoise_reads_a_pgm_file() {
    let dir = tempfile::tempdir().unwrap();
    let img = ddl_core::image::test_image(40, 36);
    let path = dir.path().join("in.pgm");
    ddl_core::image::write_pgm(&path, &img, ddl_core::image::PgmFormat::Ascii).unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        format!(
            "image = {:?}\ndenoise_agents = 4\ndenoise_rounds = 5\n",
            path
        ),
    )
    .unwrap();
    let o = ddl(&["denoise", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = ddl_core::image::read_pgm(dir.path().join("clean.pgm")).unwrap();
    assert_eq!(out, img);
}

#[test]
fn compare_writes_labeled_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "budgets = [20, 40]\n").unwrap();
    let o = ddl(&["compare", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(csv.starts_with("algorithm,nu,messages,objective,delta,cons_err,gamma\n"));
    for label in ["d2l_linearized", "d2l_plain", "atc_baseline"] {
        assert!(csv.lines().any(|l| l.starts_with(label)), "{label}");
    }
    // 21 rows for each D²L variant, 41 for the baseline
    assert_eq!(csv.lines().count(), 1 + 21 + 21 + 41);
    assert_eq!(stdout(&o).lines().filter(|l| l.contains(" 40 ")).count(), 3);
}
