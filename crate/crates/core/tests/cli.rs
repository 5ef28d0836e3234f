use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chordspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chordspec")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn table(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("table json")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

#[test]
fn oracle_e4_two_chords() {
    let o = chordspec(&["oracle", "--backbones", "0,0,0,0,1", "--chords", "2", "--mode", "oriented"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = table(&o);
    assert_eq!(t["schema"], 1);
    assert_eq!(t["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn oracle_rejects_too_many_chords() {
    let o = chordspec(&["oracle", "--backbones", "0,0,1", "--chords", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("chords"));
}

#[test]
fn oracle_bare_backbone() {
    let o = chordspec(&["oracle", "--backbones", "0,1", "--chords", "0"]);
    assert_eq!(code(&o), 0);
    let t = table(&o);
    let entries = t["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["spectrum"], serde_json::json!([{ "tuple": [1], "mult": 1 }]));
    assert_eq!(entries[0]["count"], "1");
}

#[test]
fn output_is_byte_deterministic() {
    let args = ["oracle", "--backbones", "0,1,1,1", "--chords", "2", "--mode", "nonoriented", "--connected-only"];
    assert_eq!(chordspec(&args).stdout, chordspec(&args).stdout);
}

#[test]
fn invalid_arguments_exit_2() {
    assert_eq!(code(&chordspec(&["oracle", "--backbones", "0,x", "--chords", "1"])), 2);
    assert_eq!(code(&chordspec(&["oracle", "--chords", "1"])), 2);
    assert_eq!(code(&chordspec(&["recurse", "--kmax", "1"])), 2);
    assert_eq!(code(&chordspec(&["bogus"])), 2);
    let o = chordspec(&["recurse", "--kmax", "1", "--bmax", "1", "--vmax", "2", "--mode", "nonoriented", "--policy", "rotation"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"backbones": "0,0,0,0,1", "chords": 1, "mode": "nonoriented"}"#).unwrap();
    let o = chordspec(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(table(&o)["mode"], "nonoriented");
    let o = chordspec(&["oracle", "--config", cfg.to_str().unwrap(), "--mode", "oriented", "--chords", "2"]);
    assert_eq!(table(&o)["mode"], "oriented");
    assert_eq!(table(&o)["k"], 2);
    fs::write(&cfg, r#"{"chordz": 1}"#).unwrap();
    assert_eq!(code(&chordspec(&["oracle", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn csv_and_out_files() {
    let dir = tempfile::tempdir().unwrap();
    let (json, csv) = (dir.path().join("t.json"), dir.path().join("t.csv"));
    let o = chordspec(&[
        "oracle", "--backbones", "0,0,1", "--chords", "1", "--mode", "nonoriented",
        "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(t["entries"].as_array().unwrap().len(), 2);
    let rows = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines[0], "mode,policy,k,backbones,l,euler_index,pieces,spectrum,count");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("(0)^1 (0,0)^1"));
}

#[test]
fn recurse_then_verify_e4() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let range = ["--kmax", "2", "--bmax", "1", "--vmax", "4", "--cache", cache];
    let o = chordspec(&[&["recurse"], &range[..]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("b={b_4=1} k=2 classes=3 total=3"));
    let o = chordspec(&[&["verify"], &range[..]].concat());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 8);
}

#[test]
fn verify_across_modes() {
    let o = chordspec(&["verify", "--cross-mode", "--kmax", "3", "--bmax", "2", "--vmax", "4", "--weight-max", "6"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

fn cached_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn perturbed_cache_fails_pde_check() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let range = ["--kmax", "2", "--bmax", "1", "--vmax", "4", "--cache", cache];
    assert_eq!(code(&chordspec(&[&["pde-check"], &range[..]].concat())), 0);
    let victim = cached_files(dir.path())
        .into_iter()
        .find(|p| {
            let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
            t["k"] == 1 && t["backbones"] == serde_json::json!([0, 0, 0, 0, 1])
        })
        .unwrap();
    let mut t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&victim).unwrap()).unwrap();
    let count: u64 = t["entries"][0]["count"].as_str().unwrap().parse().unwrap();
    t["entries"][0]["count"] = serde_json::Value::String((count + 1).to_string());
    fs::write(&victim, serde_json::to_string(&t).unwrap()).unwrap();
    let o = chordspec(&[&["pde-check"], &range[..]].concat());
    assert_eq!(code(&o), 1);
    let report = stdout(&o);
    assert!(report.contains("recursion: b={b_4=1} k=1"), "{report}");
    assert!(report.contains("y^1 t_4^1"), "{report}");
}

#[test]
fn corrupt_cache_exits_4_and_stale_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let range = ["--kmax", "1", "--bmax", "1", "--vmax", "2", "--cache", cache];
    assert_eq!(code(&chordspec(&[&["recurse"], &range[..]].concat())), 0);
    let files = cached_files(dir.path());

    let stale = &files[0];
    let mut t: serde_json::Value = serde_json::from_str(&fs::read_to_string(stale).unwrap()).unwrap();
    t["engine_version"] = "0.0.0-old".into();
    t["entries"][0]["count"] = "999".into();
    fs::write(stale, serde_json::to_string(&t).unwrap()).unwrap();
    let o = chordspec(&[&["verify"], &range[..]].concat());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!fs::read_to_string(stale).unwrap().contains("999"));

    fs::write(&files[1], "{ not json").unwrap();
    let o = chordspec(&[&["verify"], &range[..]].concat());
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains(files[1].file_name().unwrap().to_str().unwrap()));
}

#[test]
fn figure_one_fixture_validates() {
    let o = chordspec(&["validate", "--class", &fixture("figure1.json")]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("lengths 1:1 2:2 9:1"), "{text}");
    assert!(text.contains("points 0:2 1:2"), "{text}");
    assert!(text.trim_end().ends_with("valid"));
}

#[test]
fn invalid_class_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(fixture("figure1.json")).unwrap().replace("\"euler_index\": 1", "\"euler_index\": 0");
    fs::write(&path, text).unwrap();
    let o = chordspec(&["validate", "--class", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("Euler"));
}
