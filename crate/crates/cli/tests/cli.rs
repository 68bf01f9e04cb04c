//! End-to-end checks of the mechlab binary: command surfaces, exit codes and
//! byte-identical reproducibility of seeded outputs.

use std::path::Path;
use std::process::{Command, Output};

fn mechlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mechlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const PAIR: &str = r#"{"m":2,"buyers":[{"types":[{"values":["3","1"],"prob":"1/2"},{"values":["1","3"],"prob":"1/2"}]}]}"#;

#[test]
fn gap_command_reports_the_family() {
    let out = mechlab(&["gap", "--m", "16"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("analytic-profit,15/2,15/2,=,true"));
    assert!(text.contains("sprofit,32767/16384,2,<=,true"));
    assert!(text.contains("ratio,"));
}

#[test]
fn gap_eps_variant_passes() {
    let out = mechlab(&["gap", "--m", "4", "--eps", "1/100"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // (m-1)/2 minus the probability-weighted discount (7/16)(1/100).
    assert!(text.contains("analytic-profit,2393/1600,2393/1600,=,true"));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    write(&good, PAIR);
    assert_eq!(
        mechlab(&["validate", "--instance", good.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );

    // Malformed rational: parse error class.
    let bad = dir.path().join("bad.json");
    write(
        &bad,
        r#"{"m":1,"buyers":[{"types":[{"values":["1"],"prob":"1/0"}]}]}"#,
    );
    assert_eq!(
        mechlab(&["validate", "--instance", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    // Well-formed file violating an invariant: assertion class.
    let invalid = dir.path().join("invalid.json");
    write(
        &invalid,
        r#"{"m":1,"buyers":[{"types":[{"values":["1"],"prob":"9/10"}]}]}"#,
    );
    let out = mechlab(&["validate", "--instance", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("distribution mass"));
}

#[test]
fn guard_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("pair.json");
    write(&inst, PAIR);
    let out = mechlab(&[
        "opt-pricing",
        "--instance",
        inst.to_str().unwrap(),
        "--guard-enum",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn check_buy_many_witness_fails() {
    let dir = tempfile::tempdir().unwrap();
    let menu = dir.path().join("menu.json");
    write(
        &menu,
        r#"{"options":[{"lottery":["1","0"],"price":"1"},{"lottery":["0","1"],"price":"1"},{"lottery":["1/2","1/2"],"price":"3"}]}"#,
    );
    let out = mechlab(&["check-buy-many", "--menu", menu.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("buy-many-witness[option 2],3,1,<=,false"));
}

#[test]
fn sequential_pipeline_passes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("two.json");
    write(
        &inst,
        r#"{"m":1,"buyers":[{"types":[{"values":["2"],"prob":"1"}]},{"types":[{"values":["2"],"prob":"1"}]}]}"#,
    );
    let out = mechlab(&[
        "sequential",
        "--instance",
        inst.to_str().unwrap(),
        "--order",
        "0,1",
        "--mode",
        "mc",
        "--trials",
        "5000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ratio,"));
    assert!(text.contains("mc-agreement"));
}

#[test]
fn sweep_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    // Different thread caps must not change the ordered output.
    for (path, threads) in [(&a, "1"), (&b, "2")] {
        let out = Command::new(env!("CARGO_BIN_EXE_mechlab"))
            .env("MECHLAB_THREADS", threads)
            .args([
                "sweep",
                "--trials",
                "4",
                "--seed",
                "9",
                "--out",
                path.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("# mechlab "));
    assert!(text.contains("# seed: 9"));
    assert!(text.contains("sweep-summary"));
}

#[test]
fn profit_bound_on_gap_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("gap4.json");
    write(
        &inst,
        r#"{"m":4,"costs":["0","4","4","4"],"buyers":[{"types":[{"values":["4","4","0","0"],"prob":"1/4"},{"values":["8","0","4","0"],"prob":"1/8"},{"values":["16","0","0","4"],"prob":"1/16"},{"values":["0","0","0","0"],"prob":"9/16"}]}]}"#,
    );
    let menu = dir.path().join("menu.json");
    write(
        &menu,
        r#"{"options":[{"lottery":["1/2","1/2","0","0"],"price":"4"},{"lottery":["1/2","0","1/2","0"],"price":"6"},{"lottery":["1/2","0","0","1/2"],"price":"10"}]}"#,
    );
    let out = mechlab(&[
        "profit-bound",
        "--instance",
        inst.to_str().unwrap(),
        "--menu",
        menu.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("profit-bound-2c,3/2"));
}

#[test]
fn decompose_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("pair.json");
    write(&inst, PAIR);
    let out = mechlab(&[
        "decompose",
        "--instance",
        inst.to_str().unwrap(),
        "--prices",
        "2,2",
        "--x",
        "1/4,1/2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("revenue,3/2,3/2,=,true"));
}
