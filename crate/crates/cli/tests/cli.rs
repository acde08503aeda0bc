use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stable-carma"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn simulate_ou(dir: &Path, n: usize) -> String {
    let path = dir.join("ou.csv");
    let o = run(&[
        "simulate",
        "--family",
        "OU",
        "--theta=-1",
        "--alpha",
        "1.5",
        "--n",
        &n.to_string(),
        "--scheme",
        "exact",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_ou(dir.path(), 50);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("# seed=3\n"));
    assert!(text.contains("# family=OU\n"));
    assert!(text.contains("\nk,y\n1,"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 51);
    assert!(!text.contains('\r'));
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "--family",
        "OU",
        "--theta=-0.5",
        "--alpha",
        "1.2",
        "--n",
        "20",
        "--seed",
        "9",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn whittle_fit_recovers_ou() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_ou(dir.path(), 2000);
    let o = run(&[
        "whittle-fit",
        "--input",
        &path,
        "--family",
        "OU",
        "--alpha",
        "1.5",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let theta = v["theta_hat"][0].as_f64().unwrap();
    assert!((theta + 1.0).abs() < 0.2, "{theta}");
    assert_eq!(v["n"], 2000);
}

#[test]
fn garcia_fit_reports_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_ou(dir.path(), 1000);
    let o = run(&["garcia-fit", "--input", &path, "--family", "OU"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.get("failure_stage").is_some());
    assert_eq!(o.status.code() == Some(0), !v["failed"].as_bool().unwrap());
}

#[test]
fn acvf_and_periodogram_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_ou(dir.path(), 16);
    let a = stdout(&run(&["acvf", "--input", &path, "--max-lag", "3"]));
    assert!(a.starts_with("h,gamma\n0,"));
    assert_eq!(a.lines().count(), 5);
    let p = stdout(&run(&["periodogram", "--input", &path]));
    assert!(p.starts_with("omega,value\n"));
    assert_eq!(p.lines().count(), 33);
}

#[test]
fn spectrum_forms_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(
        &model,
        r#"{"family":"CARMA21_EX48","theta":[1.9647,0.0893,0.1761],"delta":1.0}"#,
    )
    .unwrap();
    let o = run(&["spectrum", "--model", model.to_str().unwrap(), "--points", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,f_integral,f_pi"));
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[2]).abs() < 1e-6 * v[2]);
    }
}

#[test]
fn beta_grid_ou_is_one() {
    let o = run(&[
        "beta-grid",
        "--family",
        "OU",
        "--theta0=-1",
        "--lo=-3",
        "--hi=-0.2",
        "--points",
        "4",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("theta,beta,beta_plus,beta_minus\n"));
    for l in text.lines().skip(1) {
        let beta: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((beta - 1.0).abs() < 1e-9);
    }
}

#[test]
fn limit_commands() {
    let o = run(&["acvf-limit", "--family", "OU", "--theta0=-1", "--alpha", "1.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["alpha"], 0.75);
    assert!(v["scale"].as_f64().unwrap() > 0.0);
    let o = run(&[
        "limit-sim",
        "--family",
        "OU",
        "--theta0=-1",
        "--grid=-2,-0.5",
        "--reps",
        "5",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("rep,theta=-2,theta=-0.5\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn experiment_with_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"family":"OU","theta0":[-1.0],"alpha":1.5,"n_list":[100],"replications":50,"estimators":["whittle"],"step":0.1}"#,
    )
    .unwrap();
    let base = |name: &str| dir.path().join(name);
    let go = |name: &str| {
        run(&[
            "experiment",
            "--config",
            cfg.to_str().unwrap(),
            "--replications",
            "4",
            "--seed",
            "5",
            "--threads",
            "2",
            "--out",
            base(name).to_str().unwrap(),
        ])
    };
    assert!(go("a").status.success());
    assert!(go("b").status.success());
    let ja = fs::read(base("a.json")).unwrap();
    let csv = fs::read_to_string(base("a.csv")).unwrap();
    assert!(csv.starts_with("estimator,n,coordinate,theta0,succeeded,failed,mean,bias,std,std_defined\n"));
    assert_eq!(csv.lines().count(), 2);
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["config"]["replications"], 4);
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    // only the output path differs between the two runs
    let jb = fs::read_to_string(base("b.json"))
        .unwrap()
        .replace("/b\"", "/a\"");
    assert_eq!(String::from_utf8(ja).unwrap(), jb);
}

#[test]
fn invalid_config_exits_2() {
    let o = run(&[
        "simulate",
        "--family",
        "NOPE",
        "--theta=-1",
        "--alpha",
        "1.5",
        "--n",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "simulate",
        "--family",
        "OU",
        "--theta=1",
        "--alpha",
        "1.5",
        "--n",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "experiment",
        "--family",
        "OU",
        "--theta0=-1",
        "--alpha",
        "1.5",
        "--replications",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["periodogram", "--input", "/nonexistent/file.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["bogus-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // a negative lag-one coefficient has no continuous-time logarithm
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("alternating.csv");
    let mut text = String::from("k,y\n");
    let mut x = 0.0;
    for k in 1..=300u64 {
        x = -0.7 * x + ((k * 37) % 17) as f64 / 17.0 - 0.5;
        text.push_str(&format!("{k},{x}\n"));
    }
    fs::write(&path, text).unwrap();
    let o = run(&["garcia-fit", "--input", path.to_str().unwrap(), "--family", "OU"]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["failure_stage"], "log_root");
}

#[test]
fn constant_series_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.csv");
    let text: String = std::iter::once("k,y\n".to_string())
        .chain((1..=200).map(|k| format!("{k},0\n")))
        .collect();
    fs::write(&path, text).unwrap();
    let o = run(&["garcia-fit", "--input", path.to_str().unwrap(), "--family", "OU"]);
    assert_eq!(o.status.code(), Some(2));
}
