use std::process::{Command, Output};
use std::time::Instant;

fn fracspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspec"))
        .args(args)
        .env_remove("FRACSPEC_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Column name to values, skipping comments.
fn columns(csv: &str) -> Vec<(String, Vec<String>)> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let names: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let mut cols: Vec<(String, Vec<String>)> = names.into_iter().map(|n| (n, Vec::new())).collect();
    for l in lines {
        for (c, v) in cols.iter_mut().zip(l.split(',')) {
            c.1.push(v.to_string());
        }
    }
    cols
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    columns(csv)
        .into_iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no column {name}"))
        .1
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn brownian_eigenvalues_agree() {
    let out = fracspec(&["eigs", "--H", "0.5", "--beta", "0", "--n-max", "10"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let oracle = column(&text, "lambda_oracle");
    let first = column(&text, "lambda_first_order");
    assert_eq!(oracle.len(), 10);
    for (o, f) in oracle.iter().zip(&first) {
        assert!((f / o - 1.0).abs() < 1e-3);
    }
    // Refined values start at n = 3 and match the closed form.
    let refined: Vec<String> = columns(&text).into_iter().find(|(n, _)| n == "lambda_refined").unwrap().1;
    assert!(refined[0].is_empty());
    let l3: f64 = refined[2].parse().unwrap();
    assert!((l3 * (2.5 * std::f64::consts::PI).powi(2) - 1.0).abs() < 1e-10);
}

#[test]
fn rough_case_omits_refined_columns() {
    let out = fracspec(&["eigs", "--H", "0.3", "--n-max", "5", "--grid", "200"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("# note:") && l.contains("H >= 1/2")));
    assert!(columns(&text).iter().all(|(n, _)| !n.contains("refined")));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&fracspec(&["mse", "--eps", ""])), 2);
    assert_eq!(code(&fracspec(&["mse", "--H", "1.2"])), 2);
    assert_eq!(code(&fracspec(&["mse", "--u", "0"])), 2);
    assert_eq!(code(&fracspec(&["validate", "--check", "11"])), 2);
    assert_eq!(code(&fracspec(&["eigs", "--n-max", "0"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty_eps.cfg");
    std::fs::write(&empty, "eps =\n").unwrap();
    let out = fracspec(&["mse", "--config", empty.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let corrupt = dir.path().join("corrupt.cfg");
    std::fs::write(&corrupt, "hurst = 0.7\nthis is not a setting\n").unwrap();
    let out = fracspec(&["validate", "--config", corrupt.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn solver_failure_and_truncation_codes() {
    // The contraction is too slow to converge within the cap at H = 0.9.
    let out = fracspec(&["eigs", "--H", "0.9", "--beta", "1", "--n-max", "3", "--grid", "200"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("auxiliary integral equations"));

    let out = fracspec(&["mse", "--eps", "1e-6", "--grid", "200"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn classical_endpoint_ratio() {
    let out = fracspec(&["mse", "--H", "0.5", "--eps", "1e-6", "--u", "1.0"]);
    assert_eq!(code(&out), 0);
    let ratio = column(&stdout(&out), "ratio");
    assert_eq!(ratio.len(), 1);
    assert!((ratio[0] - 1.0).abs() < 0.02);
}

#[test]
fn fractional_sweep_rows_and_trend() {
    let out = fracspec(&["mse", "--H", "0.7", "--beta", "-1", "--eps", "1e-4,1e-3,1e-5", "--u", "0.5,1.0"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("# exponent = 5.8333333333333337e-1"));
    let eps = column(&text, "eps");
    let u = column(&text, "u");
    let ratio = column(&text, "ratio");
    assert_eq!(ratio.len(), 6);
    assert_eq!(eps, vec![1e-3, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5]);
    let endpoint: Vec<f64> = ratio.iter().zip(&u).filter(|(_, &u)| u == 1.0).map(|(r, _)| *r).collect();
    assert!(endpoint.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
    assert!(ratio.iter().all(|r| (r - 1.0).abs() < 0.1));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_fracspec"))
            .args(["mse", "--H", "0.6", "--beta", "-1", "--grid", "300", "--eps", "1e-2,1e-3", "--wiener-hopf"])
            .args(["--output", path.to_str().unwrap()])
            .env("FRACSPEC_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    let c = run("c.csv", "1");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(String::from_utf8(a).unwrap().contains("p_wiener_hopf"));
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let first = fracspec(&[
        "special",
        "--H",
        "0.65",
        "--points",
        "0.1,1,10",
        "--save-config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&first), 0);
    let again = fracspec(&["special", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(column(&stdout(&again), "u"), vec![0.1, 1.0, 10.0]);
}

#[test]
fn json_documents() {
    let out = fracspec(&["special", "--format", "json", "--points", "0.5"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["hurst"].as_f64(), Some(0.7));
    assert!(v["results"]["rows"][0]["rho0"].as_f64().unwrap() > 0.0);

    let out = fracspec(&["validate", "--check", "7"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["results"][0]["id"], 7);
    assert_eq!(v["results"][0]["passed"], true);
}

#[test]
fn quick_validation_is_fast() {
    let start = Instant::now();
    let out = fracspec(&["validate", "--quick", "--format", "csv"]);
    let seconds = start.elapsed().as_secs_f64();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(seconds < 60.0, "quick suite took {seconds:.1} s");
    assert_eq!(stdout(&out).lines().filter(|l| l.ends_with(",ok")).count(), 5);
}
