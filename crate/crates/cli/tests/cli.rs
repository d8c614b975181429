use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochshell"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn validate_presets_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    for preset in ["goy", "sabra", "novikov"] {
        let o = run(dir.path(), &["validate", "--model", preset, "--out", "v"]);
        assert_eq!(code(&o), 0, "{}", text(&o));
        assert!(!text(&o).contains("FAIL"));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v/validate.json")).unwrap()).unwrap();
    assert_eq!(report["accepted"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 12);

    let o = run(dir.path(), &["validate", "--model", "goy", "--param", "b=-1.4999", "--out", "v"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("a + b + c"), "{}", text(&o));
}

#[test]
fn parse_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "d = 1\nlambda = = 2\n").unwrap();
    let o = run(dir.path(), &["validate", "--model", "bad.toml"]);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("line 2"), "{}", text(&o));

    let o = run(dir.path(), &["validate", "--model", "missing.toml"]);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("missing.toml"));

    std::fs::write(dir.path().join("cfg.toml"), "seed = 1\nbogus = 3\n").unwrap();
    let o = run(dir.path(), &["--config", "cfg.toml", "validate", "--model", "goy"]);
    assert_eq!(code(&o), 2);

    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&run(dir.path(), &["simulate", "--model", "goy", "--dt", "fast"])), 2);
    assert_eq!(code(&run(dir.path(), &["constants"])), 2);
    assert_eq!(code(&run(dir.path(), &["validate", "--model", "goy", "--param", "zeta=1"])), 2);
}

#[test]
fn model_table_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
seed = 9

[model]
d = 1
lambda = 2.0
sigma = 1.0
istar = ["1"]

[[model.interaction]]
id = "1"
r = -1
h = -1
k = 0.5
pair = "2"
b = [1.0]

[[model.interaction]]
id = "2"
r = 1
h = 0
k = -1.0
pair = "1"
b = [1.0]
"#;
    std::fs::write(dir.path().join("exp.toml"), cfg).unwrap();
    let o = run(dir.path(), &["--config", "exp.toml", "validate", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", text(&o));

    std::fs::write(dir.path().join("bad.toml"), cfg.replace("k = -1.0", "k = -1.000001")).unwrap();
    let o = run(dir.path(), &["--config", "bad.toml", "validate", "--out", "r"]);
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("FAIL (iv) k_pair"), "{}", text(&o));
}

#[test]
fn simulate_reruns_identically_from_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--seed", "11", "simulate", "--model", "novikov", "--shells", "4", "--dt", "1e-4", "--horizon", "0.01",
        "--paths", "300", "--record-every", "25", "--out", "a",
    ];
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let o = run(dir.path(), &["--config", "a/simulate.config.toml", "--out", "b", "--threads", "2", "simulate"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let a = std::fs::read(dir.path().join("a/simulate.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/simulate.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8(a).unwrap();
    assert!(header.starts_with("t,n,mean_sq,se,energy_mean,ess\n"));
    assert_eq!(header.lines().count(), 1 + 5 * 4);
}

#[test]
fn constants_document() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    assert_eq!(code(&run(dir.path(), &["constants", "--model", "novikov", "--energy", "1", "--out", "a"])), 0);
    assert_eq!(code(&run(dir.path(), &["constants", "--model", "novikov", "--energy", "9", "--out", "b"])), 0);
    let (a, b) = (read("a/constants.json"), read("b/constants.json"));
    for key in ["nu", "Lambda", "mu", "C", "rho", "theta_max"] {
        assert!(a[key].as_f64().unwrap().is_finite(), "{key}");
    }
    let mu = a["mu"].as_f64().unwrap();
    assert!(mu > 0.0);
    assert!((b["rho"].as_f64().unwrap() / a["rho"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((a["theta_max"].as_f64().unwrap() * mu - 1.0).abs() < 1e-12);
    assert!(a["sigma_invariance"].as_f64().unwrap() < 1e-10);

    assert_eq!(code(&run(dir.path(), &["constants", "--model", "goy", "--out", "g"])), 0);
    assert_eq!(read("g/constants.json")["threshold"]["status"], "defined");
}

#[test]
fn moments_chain_and_triangulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["moments", "--model", "goy", "--shells", "8", "--points", "10", "--out", "m"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let m = std::fs::read_to_string(dir.path().join("m/moments.csv")).unwrap();
    assert!(m.starts_with("t,n,u,mass\n"));
    assert_eq!(m.lines().count(), 1 + 11 * 8);

    let o = run(
        dir.path(),
        &["chain", "--model", "novikov", "--replicates", "500", "--points", "5", "--max-level", "12", "--out", "c"],
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let c = std::fs::read_to_string(dir.path().join("c/chain.csv")).unwrap();
    assert!(c.starts_with("t,survival,se\n"));
    let occ = std::fs::read_to_string(dir.path().join("c/chain_occupancy.csv")).unwrap();
    assert!(occ.starts_with("t,n,occupancy,se\n"));
    assert_eq!(occ.lines().count(), 1 + 6 * 12);

    let o = run(
        dir.path(),
        &[
            "triangulate", "--model", "novikov", "--shells", "4", "--dt", "2e-5", "--horizon", "0.1", "--times",
            "0.05,0.1", "--max-shell", "4", "--paths", "400", "--replicates", "2000", "--out", "t",
        ],
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let t = std::fs::read_to_string(dir.path().join("t/triangulate.csv")).unwrap();
    assert!(t.starts_with("t,n,sde,sde_se,ode,chain,chain_se,z_sde_ode,z_chain_ode,z_sde_chain,pass\n"));
    assert_eq!(t.lines().count(), 1 + 2 * 4);
}

#[test]
fn dissipation_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["dissipation", "--model", "novikov", "--points", "30", "--girsanov-paths", "50", "--out", "d"],
    );
    assert_eq!(code(&o), 0, "{}", text(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d/dissipation.json")).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
    assert!(doc["girsanov"].is_object());
    let csv = std::fs::read_to_string(dir.path().join("d/dissipation.csv")).unwrap();
    assert!(csv.starts_with("shells,t,mass\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 31);

    let o = run(
        dir.path(),
        &["dissipation", "--model", "novikov", "--energy", "25", "--points", "20", "--out", "e"],
    );
    assert!(text(&o).contains("warning: rho"), "{}", text(&o));
}
