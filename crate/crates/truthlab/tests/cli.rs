use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use truthlab::docs::Fixture;
use truthlab_core::mechanism::{split_penalty_gadget, ConstantAllocation, ConstantRule};
use truthlab_core::{ExactValue, Instance, MechanismSpec, Task};

fn truthlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truthlab"))
        .args(args)
        .env_remove("TRUTHLAB_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn r(p: i64, q: i64) -> ExactValue {
    ExactValue::ratio(p, q)
}

fn two_task_instance() -> Instance {
    Instance::new(
        3,
        vec![
            Task::new(0, 0, 1, r(0, 1), r(1, 2)),
            Task::new(1, 0, 2, r(0, 1), r(5, 8)),
        ],
    )
    .unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = truthlab(&[
            "gen",
            "--n",
            "3",
            "--ell",
            "4",
            "--eps",
            "1/20",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        bodies.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let inst: Instance = serde_json::from_slice(&bodies[0]).unwrap();
    // three pairs of four edges plus one loop per machine
    assert_eq!(inst.len(), 15);
}

#[test]
fn bad_configs_are_usage_errors() {
    let out = truthlab(&["gen", "--n", "3", "--ell", "4", "--eps", "2/5"]);
    assert_eq!(code(&out), 2);
    let out = truthlab(&["gen", "--n", "1", "--ell", "4", "--eps", "1/20"]);
    assert_eq!(code(&out), 2);
    let out = truthlab(&["gen", "--n", "3", "--ell", "4", "--eps", "one"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_json(dir.path(), "inst.json", &two_task_instance());
    let inst = inst.to_str().unwrap();

    let report = dir.path().join("vcg.json");
    let csv = dir.path().join("vcg.csv");
    let out = truthlab(&[
        "verify",
        "--mechanism",
        "vcg",
        "--instance",
        inst,
        "--suite",
        "wmon",
        "--trials",
        "200",
        "--out",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&report)["passed"], Value::Bool(true));
    assert!(std::fs::read_to_string(&csv)
        .unwrap()
        .starts_with("item,passed"));

    let fixture = Fixture::WinInterval {
        lo: r(1, 4),
        hi: r(3, 4),
    };
    let mech = write_json(dir.path(), "fixture.json", &fixture);
    let out = truthlab(&[
        "verify",
        "--mechanism",
        mech.to_str().unwrap(),
        "--instance",
        inst,
        "--suite",
        "wmon",
        "--trials",
        "500",
    ]);
    assert_eq!(code(&out), 1);
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["passed"], Value::Bool(false));

    let missing = dir.path().join("nope.json");
    let out = truthlab(&[
        "verify",
        "--mechanism",
        "vcg",
        "--instance",
        missing.to_str().unwrap(),
        "--suite",
        "wmon",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn classify_labels_pairs_and_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_json(dir.path(), "inst.json", &two_task_instance());
    let inst = inst.to_str().unwrap();

    let out = truthlab(&[
        "classify",
        "--mechanism",
        "vcg",
        "--instance",
        inst,
        "--root",
        "0",
        "--pair",
        "0,1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Crossing"));

    let gadget = split_penalty_gadget(3, (0, 1), 0, r(1, 8));
    let mech = write_json(dir.path(), "gadget.json", &gadget);
    let out = truthlab(&[
        "classify",
        "--mechanism",
        mech.to_str().unwrap(),
        "--instance",
        inst,
        "--root",
        "0",
        "--pair",
        "0,1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("QuasiBundling"));

    let out = truthlab(&[
        "classify",
        "--mechanism",
        "vcg",
        "--instance",
        inst,
        "--root",
        "0",
        "--star",
        "0,1",
        "--delta",
        "1/16",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["passed"], Value::Bool(true));

    let out = truthlab(&[
        "classify",
        "--mechanism",
        "vcg",
        "--instance",
        inst,
        "--root",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn adversary_reports_missing_nice_star() {
    let dir = tempfile::tempdir().unwrap();
    let constant = MechanismSpec::Constant(ConstantAllocation {
        assignment: Vec::new(),
        fallback: ConstantRule::LowerIndex,
    });
    let mech = write_json(dir.path(), "constant.json", &constant);
    let report = dir.path().join("adv.json");
    let out = truthlab(&[
        "adversary",
        "--mechanism",
        mech.to_str().unwrap(),
        "--n",
        "3",
        "--ell",
        "8",
        "--seed",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&report);
    assert_eq!(doc["passed"], Value::Bool(false));
    assert!(doc["body"]["error"].to_string().contains("nice"), "{doc}");
}

#[test]
fn replay_reproduces_a_verify_run() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_json(dir.path(), "inst.json", &two_task_instance());
    let first = dir.path().join("first.json");
    let out = truthlab(&[
        "verify",
        "--mechanism",
        "vcg",
        "--instance",
        inst.to_str().unwrap(),
        "--suite",
        "young",
        "--seed",
        "4",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = truthlab::manifest::manifest_path(&first);
    assert!(manifest.exists());

    let second = dir.path().join("second.json");
    let out = truthlab(&[
        "replay",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut a = read_json(&first);
    let mut b = read_json(&second);
    // the envelope names its own manifest file
    a["manifest"] = Value::Null;
    b["manifest"] = Value::Null;
    assert_eq!(a, b);
}
