use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!("ce2-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        Scratch(dir)
    }

    fn file(&self, name: &str, body: &str) -> String {
        let p = self.0.join(name);
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn ce2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ce2")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const PAIR: &str = r#"{"maps":[{"kind":"affine","a":[0.5,0],"r":0.2},{"kind":"affine","a":[-0.3,0],"r":0.2}]}"#;
const E0: &str = r#"{"modes":1,"particles":1,"amps":[{"nu":[1],"amp":[1,0]}]}"#;

#[test]
fn mobius_cocycle_is_converged_and_tiny() {
    let s = Scratch::new("mob");
    let map = s.file("m.json", r#"{"kind":"mobius","theta":0.3,"alpha":[0.4,-0.2]}"#);
    let out = ce2(&["cocycle", &map]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["kernel"], "F");
    assert_eq!(v["assessment"]["verdict"], "converged");
    assert!(v["hs_norm_sq"].as_f64().unwrap() < 1e-18);
}

#[test]
fn tangent_pair_diverges() {
    let s = Scratch::new("tan");
    let maps = s.file("t.json", r#"[{"kind":"affine","a":[0.4,0],"r":0.4},{"kind":"affine","a":[-0.4,0],"r":0.4}]"#);
    let out = ce2(&["cocycle", &maps]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["kernel"], "G");
    assert_eq!(v["assessment"]["verdict"], "diverging");
}

#[test]
fn twopoint_standard_pair() {
    let s = Scratch::new("two");
    let (maps, e0) = (s.file("p.json", PAIR), s.file("e0.json", E0));
    let out = ce2(&["twopoint", &maps, "--inputs", &e0, &e0]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["plain"][0].as_f64().unwrap() - 0.0625).abs() < 1e-8);
    assert!(v["plain"][1].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn empty_configuration_gives_unit() {
    let s = Scratch::new("empty");
    let maps = s.file("e.json", "[]");
    let out = ce2(&["twopoint", &maps]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["plain"], serde_json::json!([1.0, 0.0]));
}

#[test]
fn csv_output() {
    let s = Scratch::new("csv");
    let (maps, e0) = (s.file("p.json", PAIR), s.file("e0.json", E0));
    let out = ce2(&["--format", "csv", "twopoint", &maps, "--inputs", &e0, &e0]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("quantity,re,im"));
    assert!(text.lines().any(|l| l.starts_with("plain,6.24999999999")));

    let out = ce2(&["--format", "csv", "verify", "trace"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("id,value,expected,abs_err,pass"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let a = ce2(&["verify", "covariance"]);
    let b = ce2(&["verify", "covariance"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["failed"], 0);
    let text = String::from_utf8(a.stdout).unwrap();
    let pos: Vec<usize> =
        ["\"suite\"", "\"config\"", "\"checks\"", "\"passed\"", "\"failed\""].iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn failing_check_exits_one() {
    let s = Scratch::new("fail");
    let cfg = s.file("c.json", r#"{"cutoffs":{"N":8},"tolerance":{"abs_tol":1e-300}}"#);
    let out = ce2(&["verify", "covariance", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["failed"].as_u64().unwrap() >= 1);
}

#[test]
fn parse_errors_exit_two() {
    let s = Scratch::new("parse");
    let bad = s.file("b.json", r#"{"kind":"mobius","theta":0.3}"#);
    assert_eq!(ce2(&["cocycle", &bad]).status.code(), Some(2));
    assert_eq!(ce2(&["verify", "no-such-suite"]).status.code(), Some(2));
    assert_eq!(ce2(&["cocycle", "/nonexistent/map.json"]).status.code(), Some(2));
    let unknown = s.file("u.json", r#"{"cutoffs":{"N":8},"bogus":1}"#);
    assert_eq!(ce2(&["verify", "trace", "--config", &unknown]).status.code(), Some(2));
}

#[test]
fn math_and_config_errors_exit_three() {
    let s = Scratch::new("math");
    let small = s.file("n.json", r#"{"cutoffs":{"N":2}}"#);
    assert_eq!(ce2(&["verify", "trace", "--config", &small]).status.code(), Some(3));
    let maps = s.file("p.json", PAIR);
    assert_eq!(ce2(&["twopoint", &maps]).status.code(), Some(3));
    assert_eq!(ce2(&["--precision", "extended", "verify", "trace"]).status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_ce2")).args(["verify", "trace"]).env("CE2_THREADS", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}
