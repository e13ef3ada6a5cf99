use std::path::Path;
use std::process::{Command, Output};

fn candy(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_candy")).args(args).env("CANDY_OUT_DIR", out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_with(dir: &Path, suffix: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_chessboard_word() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["simulate", "--d", "1", "--kappa", "3", "--init", "word:0101010"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("trial 0: fixation_time 0"));
    assert_eq!(files_with(dir.path(), ".jsonl").len(), 2); // results and manifests
    assert_eq!(files_with(dir.path(), ".csv").len(), 1);
    let manifest = std::fs::read_to_string(dir.path().join("manifests.jsonl")).unwrap();
    assert!(manifest.contains("\"subcommand\":\"simulate\""));
    assert!(manifest.contains("\"tool_version\""));
}

#[test]
fn simulate_block_fixates_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--init", "block", "--M", "10", "--trials", "1000", "--seed", "3"];
    let first = candy(dir.path(), &args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("fixated: 1000/1000"));
    let results = files_with(dir.path(), ".jsonl").into_iter().find(|p| !p.ends_with("manifests.jsonl")).unwrap();
    let before = std::fs::read(&results).unwrap();
    assert!(candy(dir.path(), &args).status.success());
    assert_eq!(std::fs::read(&results).unwrap(), before);
    let manifests = std::fs::read_to_string(dir.path().join("manifests.jsonl")).unwrap();
    assert_eq!(manifests.lines().count(), 2);
}

#[test]
fn simulate_rejects_bad_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["simulate", "--p", "0.3,0.3,0.3", "--init", "block"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("distribution must sum to 1"));
}

#[test]
fn simulate_exploratory_box() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["simulate", "--d", "2", "--n", "3", "--init", "box", "--shape", "5,5", "--trials", "3", "--t-max", "500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("exploratory"));
    let exp = files_with(dir.path(), ".experiment.json");
    assert!(std::fs::read_to_string(&exp[0]).unwrap().contains("\"exploratory\": true"));
}

#[test]
fn enumerate_k1_text_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["enumerate", "--k", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("n=0      1/2   3/4   1/2"), "{text}");
    assert!(text.contains("n=1      3/4   1/2   1/2"));
    assert!(text.contains("n=2      1/2   1/2     0"));
    let json = std::fs::read_to_string(&files_with(dir.path(), "json")[0]).unwrap();
    assert!(json.contains("\"pI\""));
}

#[test]
fn enumerate_k4_column_denominators() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["enumerate", "--k", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let exps: Vec<&str> = text.lines().find(|l| l.contains("(=2^")).unwrap().split_whitespace().collect();
    assert_eq!(exps, ["(=2^29)", "(=2^26)", "(=2^26)", "(=2^22)", "(=2^17)", "(=2^11)", "(=2^9)", "(=2^4)", "(=2^0)"]);
}

#[test]
fn enumerate_validates_k_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(candy(dir.path(), &["enumerate", "--k", "0"]).status.code(), Some(2));
    let cp = dir.path().join("cp.json");
    std::fs::write(&cp, "not a checkpoint").unwrap();
    let o = candy(dir.path(), &["enumerate", "--k", "2", "--checkpoint", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::remove_file(&cp).unwrap();
    let o = candy(dir.path(), &["enumerate", "--k", "2", "--checkpoint", cp.to_str().unwrap()]);
    assert!(o.status.success());
    // a checkpoint written for k = 2 cannot be used for k = 3
    let o = candy(dir.path(), &["enumerate", "--k", "3", "--checkpoint", cp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn certify_k1_k3_k4() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["certify", "--k", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("c = 5/2^2 = 5/4"));
    assert!(!stdout(&o).contains("CONTRACTION"));
    let o = candy(dir.path(), &["certify", "--k", "3"]);
    assert!(stdout(&o).contains("= 55705/49152"));
    let o = candy(dir.path(), &["certify", "--k", "4"]);
    assert!(stdout(&o).contains("= 200344049/201326592"));
    assert!(stdout(&o).contains("CONTRACTION"));
}

#[test]
fn certify_from_saved_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(candy(dir.path(), &["enumerate", "--k", "2"]).status.success());
    let tables = files_with(dir.path(), ".json").into_iter().find(|p| p.to_string_lossy().contains("enumerate-")).unwrap();
    let o = candy(dir.path(), &["certify", "--k", "2", "--no-compute", "--tables", tables.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("121/96"));
    let cert = files_with(dir.path(), ".json").into_iter().find(|p| p.to_string_lossy().contains("certify-")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cert).unwrap()).unwrap();
    assert_eq!(json["c"], "121/(3*2^5)");
    assert_eq!(json["contraction"], false);
    assert_eq!(candy(dir.path(), &["certify", "--k", "2", "--no-compute"]).status.code(), Some(2));
    assert_eq!(candy(dir.path(), &["certify", "--k", "3", "--tables", tables.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn crosscheck_k1_all_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["crosscheck", "--k", "1", "--windows", "all", "--samples", "100000"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn crosscheck_flags_breaches_and_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(candy(dir.path(), &["crosscheck", "--k", "1", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(candy(dir.path(), &["crosscheck", "--k", "1", "--windows", "many"]).status.code(), Some(2));
    // an absurdly tight tolerance must be reported as a check failure
    let o = candy(dir.path(), &["crosscheck", "--k", "1", "--samples", "2000", "--tolerance", "0.0001"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL window"));
}

#[test]
fn version_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let o = candy(dir.path(), &["--version"]);
    assert_eq!(stdout(&o).trim(), format!("candy {}", env!("CARGO_PKG_VERSION")));
    let o = candy(dir.path(), &["--threads", "2", "certify", "--k", "2"]);
    assert!(o.status.success());
    assert_eq!(candy(dir.path(), &["--threads", "0", "certify", "--k", "2"]).status.code(), Some(2));
}
