use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn coagem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coagem"))
        .args(args)
        .env("COAGEM_OUT_DIR", dir)
        .env_remove("COAGEM_WORKERS")
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exact_lists_the_polynomial_family() {
    let dir = scratch("exact");
    let out = coagem(
        &dir,
        &["exact", "--ell", "1", "--init", "dimer", "--n-max", "10"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = json(dir.join("exact.coefficients.json"));
    let u4 = &c["polynomials"][2];
    assert_eq!(u4["n"], 4);
    assert_eq!(u4["terms"][0]["exponent"], 8);
    assert_eq!(u4["terms"][0]["coefficient"], "3/128");
    assert_eq!(c["polynomials"][8]["terms"][0]["rounded"], 0.04705);
    let csv = fs::read_to_string(dir.join("exact.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("#schema: coagem.exact/1"));
    assert!(lines.next().unwrap().starts_with("t,u_2,u_3"));
    assert_eq!(lines.next().unwrap().split(',').nth(1), Some("1"));
}

#[test]
fn simulate_is_reproducible_from_its_seed() {
    let dir = scratch("simulate");
    let args = [
        "simulate",
        "--clusters",
        "20000",
        "--t-end",
        "0.5",
        "--seed",
        "9",
    ];
    assert_eq!(coagem(&dir, &args).status.code(), Some(0));
    let first = fs::read(dir.join("simulate.csv")).unwrap();
    assert_eq!(coagem(&dir, &args).status.code(), Some(0));
    assert_eq!(first, fs::read(dir.join("simulate.csv")).unwrap());
    let other = coagem(
        &dir,
        &[
            "simulate",
            "--clusters",
            "20000",
            "--t-end",
            "0.5",
            "--seed",
            "10",
            "--name",
            "other",
        ],
    );
    assert_eq!(other.status.code(), Some(0));
    assert_ne!(first, fs::read(dir.join("other.csv")).unwrap());
    let meta = json(dir.join("simulate.meta.json"));
    assert_eq!(meta["config"]["seed"], 9);
    assert_eq!(meta["replicas"][0]["terminal"]["kind"], "reached_t_end");
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 2 + 51);
}

#[test]
fn replicas_do_not_depend_on_worker_count() {
    let dir = scratch("replicas");
    let base = [
        "simulate",
        "--clusters",
        "5000",
        "--t-end",
        "0.3",
        "--replicas",
        "3",
    ];
    let one: Vec<&str> = base
        .iter()
        .copied()
        .chain(["--workers", "1", "--name", "one"])
        .collect();
    let many: Vec<&str> = base
        .iter()
        .copied()
        .chain(["--workers", "3", "--name", "many"])
        .collect();
    assert_eq!(coagem(&dir, &one).status.code(), Some(0));
    assert_eq!(coagem(&dir, &many).status.code(), Some(0));
    for suffix in [".r0.csv", ".r2.csv", ".mean.csv"] {
        let a = fs::read(dir.join(format!("one{suffix}"))).unwrap();
        let b = fs::read(dir.join(format!("many{suffix}"))).unwrap();
        assert_eq!(a, b, "{suffix}");
    }
}

#[test]
fn finite_exhaustion_exits_with_four() {
    let dir = scratch("sim-exhaust");
    let out = coagem(
        &dir,
        &[
            "simulate",
            "--ell",
            "2",
            "--init",
            "kmer:5",
            "--clusters",
            "1000",
            "--t-end",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let meta = json(dir.join("simulate.meta.json"));
    assert_eq!(meta["replicas"][0]["terminal"]["kind"], "exhausted");
    assert!(dir.join("simulate.csv").exists());
}

#[test]
fn three_species_solve_reports_exhaustion() {
    let dir = scratch("solve");
    let out = coagem(
        &dir,
        &[
            "solve",
            "--system",
            "small",
            "--ell",
            "3",
            "--init",
            "1:0.5,2:0.3,3:0.2",
            "--track",
            "1,2,3",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let meta = json(dir.join("solve.meta.json"));
    let t_ex = meta["terminal"]["t_ex"].as_f64().unwrap();
    assert!((t_ex - 0.35).abs() < 1e-6, "{t_ex}");
    let csv = fs::read_to_string(dir.join("solve.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with("u_1,u_2,u_3"));
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = scratch("bad");
    assert_eq!(
        coagem(&dir, &["solve", "--init", "1:0.5,2:0.4"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        coagem(&dir, &["solve", "--init", "kmer:x"]).status.code(),
        Some(2)
    );
    assert_eq!(
        coagem(&dir, &["moments", "--t-end", "0.7"]).status.code(),
        Some(2)
    );
    assert_eq!(
        coagem(&dir, &["heatmap", "--ell", "2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        coagem(&dir, &["exact", "--engine", "poly", "--init", "kmer:3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        coagem(&dir, &["simulate", "--gel-policy", "sometimes"])
            .status
            .code(),
        Some(2)
    );
    let cfg = dir.join("bad.json");
    fs::write(&cfg, r#"{"t_end": 0.2, "colour": "red"}"#).unwrap();
    assert_eq!(
        coagem(&dir, &["solve", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_fills_options_and_flags_win() {
    let dir = scratch("config");
    let cfg = dir.join("run.json");
    fs::write(&cfg, r#"{"t_end": 0.2, "clusters": 3000, "seed": 5}"#).unwrap();
    let out = coagem(
        &dir,
        &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "6"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let meta = json(dir.join("simulate.meta.json"));
    assert_eq!(meta["config"]["t_end"], 0.2);
    assert_eq!(meta["config"]["clusters"], 3000);
    assert_eq!(meta["config"]["seed"], 6);
}

#[test]
fn moments_put_hierarchy_beside_closed_forms() {
    let dir = scratch("moments");
    assert_eq!(coagem(&dir, &["moments"]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("moments.csv")).unwrap();
    let mut lines = csv.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        ["t", "m0", "m1", "m2", "m3", "m2_closed", "m3_closed"]
    );
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(
            (v[3] / v[5] - 1.0).abs() < 1e-8 && (v[4] / v[6] - 1.0).abs() < 1e-8,
            "{line}"
        );
    }
    assert!(
        (json(dir.join("moments.meta.json"))["t_gel"]
            .as_f64()
            .unwrap()
            - 2.0 / 3.0)
            .abs()
            < 1e-15
    );
}

#[test]
fn classes_for_dimers() {
    let dir = scratch("classes");
    assert_eq!(
        coagem(
            &dir,
            &["classes", "--ell", "1", "--support", "2", "--n-max", "20"]
        )
        .status
        .code(),
        Some(0)
    );
    let c = json(dir.join("classes.json"));
    assert_eq!(c["reaction_numbers"]["3"], 1);
    assert_eq!(c["reaction_numbers"]["4"], 2);
    assert_eq!(c["reaction_numbers"]["5"], 2);
    assert_eq!(c["unattainable"], serde_json::json!([1]));
}

#[test]
fn heatmap_is_independent_of_worker_count() {
    let dir = scratch("heatmap");
    assert_eq!(
        coagem(
            &dir,
            &["heatmap", "--grid", "6", "--workers", "1", "--name", "a"]
        )
        .status
        .code(),
        Some(0)
    );
    assert_eq!(
        coagem(
            &dir,
            &["heatmap", "--grid", "6", "--workers", "4", "--name", "b"]
        )
        .status
        .code(),
        Some(0)
    );
    let a = fs::read_to_string(dir.join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 2 + 21);
    // r = 0 edge: t_ex = (1 - p) / 2.
    let row = a.lines().find(|l| l.starts_with("0.4,0.6,")).unwrap();
    let t: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((t - 0.3).abs() < 1e-6, "{row}");
}

#[test]
fn compare_reports_sup_deviation() {
    let dir = scratch("compare");
    assert_eq!(
        coagem(&dir, &["exact", "--n-max", "6", "--t-end", "0.3"])
            .status
            .code(),
        Some(0)
    );
    let args = [
        "solve",
        "--system",
        "truncated",
        "--ell",
        "1",
        "--t-end",
        "0.3",
        "--truncation",
        "200",
        "--track",
        "2,3,4,5,6",
    ];
    assert_eq!(coagem(&dir, &args).status.code(), Some(0));
    let (a, b) = (dir.join("exact.csv"), dir.join("solve.csv"));
    let out = coagem(
        &dir,
        &[
            "compare",
            "--a",
            a.to_str().unwrap(),
            "--b",
            b.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(dir.join("compare.json"));
    assert_eq!(r["shared_times"], 31);
    for n in 2..=6 {
        let sup = r["quantities"][format!("u_{n}")]["sup"].as_f64().unwrap();
        assert!(sup < 1e-7, "u_{n}: {sup}");
    }
    let same = coagem(
        &dir,
        &[
            "compare",
            "--a",
            a.to_str().unwrap(),
            "--b",
            a.to_str().unwrap(),
            "--name",
            "self",
        ],
    );
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(json(dir.join("self.json"))["quantities"]["u_3"]["sup"], 0.0);
}
