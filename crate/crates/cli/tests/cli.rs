use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
[spectrum]
alpha = 3.0
num_coeffs = [1.0]
den_coeffs = [1.0]

[window]
grid_size = 16384

[experiment]
j = [3]
q = [2, 3]
z = [-1.0, 0.0, 1.0]
replicates = 120
master_seed = 7

[output]
formats = ["csv", "json"]
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn needlets(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_needlets")).args(args).output().expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    needlets(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn constants_rows_and_json_mirror() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("out");
    let o = run("constants", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("constants.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "q,route,c_q,error_estimate");
    assert!(lines[1].starts_with("2,closed_q2,"));
    assert!(lines[2].starts_with("3,wigner_q3,"));
    assert!(lines[3].starts_with("3,bessel_q3,"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("constants.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
    assert_eq!(json[0]["route"], "closed_q2");
}

#[test]
fn invalid_q_lists_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("out");
    let o = run("constants", &cfg, &out, &["--q", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q must be ≥ 2"));
    let empty = write_config(tmp.path(), &BASE.replace("q = [2, 3]", "q = []"));
    assert_eq!(run("constants", &empty, &out, &[]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let unknown = write_config(tmp.path(), &format!("{BASE}\n[extra]\nkey = 1\n"));
    assert_eq!(run("variance", &unknown, &out, &[]).status.code(), Some(2));
    let missing = tmp.path().join("nope.toml");
    assert_eq!(run("variance", &missing, &out, &[]).status.code(), Some(2));
    let bad_alpha = write_config(tmp.path(), &BASE.replace("alpha = 3.0", "alpha = 1.5"));
    assert_eq!(run("variance", &bad_alpha, &out, &[]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run("variance", &cfg, &blocker.join("sub"), &["--j", "4", "--q", "2"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn variance_table_matches_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("out");
    let o = run("variance", &cfg, &out, &["--j", "4,5", "--q", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("variance_exact.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "j,q,var_exact,scaled,ratio_to_cq");
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let var: f64 = l.split(',').nth(2).unwrap().parse().unwrap();
        assert!(var > 0.0);
    }
}

#[test]
fn dry_run_computes_nothing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("out");
    let o = run("mc", &cfg, &out, &["--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("nodes"), "{text}");
    assert!(!out.exists());
}

fn table_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn mc_is_deterministic_and_resumable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run("mc", &cfg, dir, &["--j", "2,3"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let first = table_bytes(&a);
    assert_eq!(first, table_bytes(&b));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    for n in ["variance.csv", "cumulant.csv", "distance.csv", "nu_samples.csv", "variance.json"] {
        assert!(names.contains(&n), "{names:?}");
    }
    let header = String::from_utf8_lossy(&first.iter().find(|(n, _)| n == "variance.csv").unwrap().1).into_owned();
    assert!(header.starts_with("j,q,var_mc,se,var_exact,scaled,c_q,ratio\n"));

    // simulate an interruption: drop the last chunks of one scale
    let chunk_root = fs::read_dir(a.join("chunks")).unwrap().next().unwrap().unwrap().path();
    let scale = chunk_root.join("j3");
    for k in [1, 2] {
        fs::remove_file(scale.join(format!("chunk_{k:06}.done"))).unwrap();
        fs::remove_file(scale.join(format!("chunk_{k:06}.txt"))).unwrap();
    }
    let o = run("mc", &cfg, &a, &["--j", "2,3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("2 chunks computed, 1 reused"), "{}", stderr(&o));
    assert_eq!(first, table_bytes(&a));

    let o = run("mc", &cfg, &a, &["--j", "2,3", "--seed", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(first, table_bytes(&a));
}

#[test]
fn excursion_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("replicates = 120", "replicates = 150"));
    let out = tmp.path().join("out");
    let o = run("excursion", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("defect identity"));
    let csv = fs::read_to_string(out.join("excursion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(fs::read_to_string(out.join("phi_samples.csv")).unwrap().starts_with("replicate,j,z,phi,defect\n"));
    let r = run("report", &cfg, &out, &[]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("excursion.csv"));
    let empty = tmp.path().join("empty");
    assert_eq!(run("report", &cfg, &empty, &[]).status.code(), Some(4));
}
