use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cmc(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmc-forge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CMC_FORGE_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn helicoid_prints_the_period_and_writes_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmc(dir.path(), &["helicoid", "--alpha", "1", "--nu", "9", "--nv", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("U = 1.311029"), "{}", stdout(&o));
    let obj = fs::read_to_string(dir.path().join("helicoid.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 45);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2 * 8 * 4);
    let table = fs::read_to_string(dir.path().join("helicoid_table.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("u,psi,G"));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "helicoid");
    assert_eq!(manifest["config"]["alpha"], 1.0);
    assert!(manifest["outputs"]["helicoid.obj"].as_str().unwrap().len() == 64);
}

#[test]
fn helicoid_width_is_inverted() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmc(dir.path(), &["helicoid", "--width", "0.5", "--nu", "3", "--nv", "3"]);
    assert!(o.status.success());
    let s = read_json(&dir.path().join("helicoid.json"));
    assert!((s["width"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["helicoid", "--alpha", "-1"],
        &["helicoid", "--alpha", "1", "--width", "0.5"],
        &["knoid", "--k", "2"],
        &["period-scan", "--b-min", "0.5", "--b-max", "0.2"],
        &["period-scan", "--points", "0"],
        &["period1", "--phi", "1.0"],
        &["lift", "--kappa", "-1", "--chart", "daniel-hauswirth"],
        &["solve", "--h", "0"],
        &["nonsense"],
    ];
    for args in cases {
        let o = cmc(dir.path(), args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let o = cmc(dir.path(), &["helicoid", "--alpha", "-1"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"tau": 0.25, "bogus": 1}"#).unwrap();
    let o = cmc(dir.path(), &["lift", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn dry_run_prints_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"h": 0.05, "k": 5}"#).unwrap();
    let out = dir.path().join("run");
    let o = cmc(
        &out,
        &["knoid", "--k", "3", "--dry-run", "--config", cfg.to_str().unwrap()],
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["k"], 3);
    assert_eq!(v["h"], 0.05);
    assert_eq!(v["n_start"], 4.0);
    assert!(!out.exists());
}

#[test]
fn lift_rise_matches_the_holonomy() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmc(
        dir.path(),
        &["lift", "--tau", "0.5", "--radius", "0.5", "--samples", "2000"],
    );
    assert!(o.status.success());
    let s = read_json(&dir.path().join("lift.json"));
    let (hol, rise) = (s["holonomy"].as_f64().unwrap(), s["lift_rise"].as_f64().unwrap());
    assert!((hol - std::f64::consts::PI * 0.25).abs() < 1e-5, "{hol}");
    assert!((hol - rise).abs() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("lift.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,z"));
}

#[test]
fn solve_recovers_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    for (problem, tol) in [("saddle", 1e-9), ("affine", 1e-9), ("sphere-cap", 1e-4)] {
        let out = dir.path().join(problem);
        let o = cmc(&out, &["solve", "--problem", problem, "--h", "0.1"]);
        assert!(o.status.success(), "{problem}");
        let s = read_json(&out.join("solve.json"));
        assert!(s["max_error"].as_f64().unwrap() < tol, "{problem}: {s}");
        assert!(fs::read_to_string(out.join("field.obj"))
            .unwrap()
            .lines()
            .any(|l| l.starts_with("f ")));
    }
}

#[test]
fn trace_of_the_saddle_satisfies_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmc(
        dir.path(),
        &["trace", "--problem", "saddle", "--h", "0.05", "--edge", "0"],
    );
    assert!(o.status.success());
    let s = read_json(&dir.path().join("trace.json"));
    let (p, q) = (s["period"].as_f64().unwrap(), s["period_sister"].as_f64().unwrap());
    assert!((p - q).abs() < 1e-6);
    assert!((p + (2f64.sqrt() - 1.0)).abs() < 2e-3, "{p}");
    assert_eq!(s["kind"], "horizontal");
    let sister = fs::read_to_string(dir.path().join("sister.csv")).unwrap();
    assert_eq!(sister.lines().next(), Some("t,k,t_tor,ktilde,ttilde,twist_cum"));
}

const SCAN: &[&str] = &[
    "period-scan",
    "--h",
    "0.05",
    "--n",
    "2",
    "--points",
    "3",
    "--b-max",
    "0.4",
];

#[test]
fn period_scan_reruns_and_resumes_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(cmc(&a, SCAN).status.success());
    let mut serial = SCAN.to_vec();
    serial.extend(["--jobs", "1"]);
    assert!(cmc(&b, &serial).status.success());
    for f in ["scan.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let scan = fs::read_to_string(a.join("scan.csv")).unwrap();
    assert_eq!(scan.lines().next(), Some("b,p,p_coarse,p_fine,residual"));
    assert_eq!(scan.lines().count(), 4);

    // drop the last checkpoint row and add a torn line
    let partial = a.join("scan.partial.csv");
    let text = fs::read_to_string(&partial).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    let torn = format!("{}\n0.2,0.1", lines.join("\n"));
    fs::write(&partial, torn).unwrap();
    let mut resume = SCAN.to_vec();
    resume.push("--resume");
    let o = cmc(&a, &resume);
    assert!(stdout(&o).contains("1 of 3 rows"), "{}", stdout(&o));
    assert_eq!(fs::read(a.join("scan.csv")).unwrap(), scan.as_bytes());
    let o = cmc(&a, &resume);
    assert!(stdout(&o).contains("0 of 3 rows"));
    assert_eq!(fs::read(a.join("scan.csv")).unwrap(), scan.as_bytes());
}
