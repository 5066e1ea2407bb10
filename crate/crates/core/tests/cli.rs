use std::process::Command;

fn treeflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_treeflow")).args(args).env_remove("TREEFLOW_SEED").output().unwrap()
}

#[test]
fn kernel_row_has_oracle_columns() {
    let out = treeflow(&["kernel", "--q", "2", "--t", "1", "--x", "0:", "--y", "0:"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(lines.next().is_none());
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    assert!((col("heat") - col("oracle")).abs() <= col("oracle_bound") + 1e-15);
    assert!(col("poisson") > 0.0);
}

#[test]
fn output_is_byte_identical_for_a_fixed_seed() {
    let args = ["oracle-compare", "--q", "2", "--t", "0.5,1", "--samples", "20000", "--seed", "9"];
    let a = treeflow(&args);
    let b = treeflow(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = Command::new(env!("CARGO_BIN_EXE_treeflow"))
        .args(&args[..args.len() - 2])
        .env("TREEFLOW_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn exp_gn_header_and_json_mirror() {
    let csv = treeflow(&["exp-gn", "--m-list", "2,4", "--tol", "1e-3"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("n,m,pairing,mh_norm,ratio_loglog,ratio_log,converged,radius,tail_estimate,eps\n"));
    assert!(text.lines().nth(1).unwrap().starts_with("3,2,6.9314718055994529e-1,"));

    let json = treeflow(&["exp-gn", "--m-list", "2,4", "--tol", "1e-3", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[1]["n"], 15);
    let csv_norm: f64 = text.lines().nth(2).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(rows[1]["mh_norm"].as_f64().unwrap(), csv_norm);
}

#[test]
fn config_errors_exit_with_three_and_a_record() {
    for args in [&["kernel", "--q", "1"][..], &["kernel", "--x", "0:5"], &["exp-gn", "--tol", "0"], &["no-such-command"]] {
        let out = treeflow(args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(rec["exit_code"], 3);
        assert_eq!(rec["error"], "config");
    }
}

#[test]
fn out_flag_writes_a_file() {
    let path = std::env::temp_dir().join(format!("treeflow_cli_{}.csv", std::process::id()));
    let out = treeflow(&["kernel", "--t", "0.5", "--d", "2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(",0:,2:,2,"));
    std::fs::remove_file(path).unwrap();
}
