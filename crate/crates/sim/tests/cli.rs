use std::process::Command;

fn sim() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_miboard-sim"));
    c.current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."));
    c
}

#[test]
fn prints_a_json_report() {
    let out = sim().args(["--games", "3", "--players", "3", "--policy", "honest:1", "--seed", "4"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["games"], 3);
    assert_eq!(report["summary"]["discussion_rounds"], 0);
    assert_eq!(report["games"].as_array().unwrap().len(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 games"));
}

#[test]
fn rejects_bad_arguments() {
    for args in [&["--policy", "greedy"][..], &["--players", "5"], &["--policy", "honest:1.5"]] {
        let out = sim().args(args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
    }
}
