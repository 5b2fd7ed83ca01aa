use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subdiff-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL: &[&str] = &[
    "convergence", "--scheme", "l1", "--alpha", "0.5", "--sigma", "1.5", "--gamma", "1", "--example", "1", "--N", "16,32", "--M", "32",
    "--no-guard",
];

#[test]
fn convergence_prints_table_and_writes_files() {
    let dir = scratch("conv");
    let mut args = SMALL.to_vec();
    let d = dir.to_str().unwrap();
    args.extend(["--out", d]);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("| N | M | e(M,N) | Order |"));
    assert!(text.contains("predicted order: 1.50"));
    let csv = std::fs::read_to_string(dir.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,M,error,order,predicted_order");
    assert_eq!(lines.len(), 3);
    // 17 significant digits
    let err = lines[1].split(',').nth(2).unwrap();
    assert_eq!(err.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
}

#[test]
fn runs_are_byte_identical_and_config_round_trips() {
    let dir = scratch("repro");
    let a = dir.join("a");
    let b = dir.join("b");
    let mut args = SMALL.to_vec();
    args.extend(["--out", a.to_str().unwrap()]);
    assert!(run(&args).status.success());
    // rerun from the written config, with a flag that matches it
    let cfg = a.join("config.json");
    let out = run(&["convergence", "--config", cfg.to_str().unwrap(), "--alpha", "0.5", "--out", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["convergence.csv", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config() {
    let dir = scratch("override");
    let cfg = dir.join("c.json");
    std::fs::write(
        &cfg,
        r#"{"scheme":"fraccn","example":2,"alpha":0.4,"sigma":1.2,"gamma":"5/3","steps":[16,32],"intervals":32,"guard":{"enabled":false,"max_intervals":64,"tolerance":0.05}}"#,
    )
    .unwrap();
    let out = run(&["convergence", "--config", cfg.to_str().unwrap(), "--N", "8,16,32", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(dir.join("config.json")).unwrap();
    assert!(written.contains("\"5/3\""));
    assert_eq!(std::fs::read_to_string(dir.join("convergence.csv")).unwrap().lines().count(), 4);
}

#[test]
fn usage_errors_exit_with_one() {
    let mut args = SMALL.to_vec();
    args[12] = "";
    assert_eq!(run(&args).status.code(), Some(1));
    args[12] = "10,30";
    assert_eq!(run(&args).status.code(), Some(1));
    assert_eq!(run(&["reproduce", "--table", "10"]).status.code(), Some(1));
    assert_eq!(run(&["convergence", "--alpha", "0.5"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn series_divergence_exits_with_two() {
    let out = run(&["bounds", "--scheme", "l1", "--example", "1", "--alpha", "0.5", "--sigma", "1.5", "--N", "8", "--M", "16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Mittag-Leffler"));
}

#[test]
fn kernels_diagnostics_and_row_dump() {
    let out = run(&["kernels", "--scheme", "l1", "--alpha", "0.5", "--gamma", "2", "--N", "64"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("complementary identity deviation")).unwrap();
    let dev: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(dev < 1e-12);
    assert!(text.contains("assumptions overall: ok"));

    let out = run(&["kernels", "--scheme", "fraccn", "--alpha", "0.5", "--mesh", "random", "--rho", "6", "--seed", "3", "--N", "64"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("monotone kernels: FAILED"));

    let out = run(&["kernels", "--scheme", "l1", "--alpha", "0.5", "--mesh", "uniform", "--N", "4", "--dump-row", "2"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("j,coefficient\n0,"));
}

#[test]
fn mesh_solve_and_reproduce_smoke() {
    let dir = scratch("misc");
    let mesh_csv = dir.join("mesh.csv");
    let out = run(&["mesh", "--gamma", "2", "--N", "8", "--T0", "0.25", "--out", mesh_csv.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&mesh_csv).unwrap();
    assert!(csv.lines().nth(2).unwrap().starts_with("1,1.5625000000000000e-2"));

    let sol = dir.join("u.csv");
    let out = run(&[
        "solve", "--scheme", "fraccn", "--example", "2", "--alpha", "0.4", "--sigma", "1.2", "--gamma", "5/3", "--N", "16", "--M", "16", "--out",
        sol.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&sol).unwrap().lines().count(), 18);

    let out = run(&["reproduce", "--table", "6", "--N", "8,16", "--M", "16", "--no-guard", "--threads", "2", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = String::from_utf8(out.stdout).unwrap();
    let first = md.find("gamma=1 ").unwrap();
    let second = md.find("gamma=5/3").unwrap();
    assert!(first < second, "columns keep preset order");
    assert!(dir.join("table6.csv").exists());
}
