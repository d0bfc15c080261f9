use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn lcmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcmd"))
        .args(args)
        .output()
        .expect("lcmd runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn verify_matching_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let violations = dir.path().join("violations.csv");
    let out = lcmd(&[
        "verify",
        "matching",
        "--n",
        "300",
        "--k",
        "3",
        "--seeds",
        "10",
        "--violations",
        violations.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::read_to_string(&violations).unwrap(), "");
    let text = stdout(&out);
    assert!(text.starts_with("name,instances,violations\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",10,0")), "{text}");
}

#[test]
fn verify_majorization_suite_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let violations = dir.path().join("violations.csv");
    let out = lcmd(&[
        "verify",
        "majorization",
        "--n",
        "300",
        "--seeds",
        "2",
        "--violations",
        violations.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&violations).unwrap(), "");
}

#[test]
fn bench_row_count() {
    let out = lcmd(&[
        "bench",
        "rsd",
        "--n",
        "256,1024,4096",
        "--seeds",
        "20",
        "--queries",
        "100",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# lcmd bench housing generated "));
    assert_eq!(
        lines.next().unwrap(),
        "family,n,seed,query,probes,wall_ns,digest"
    );
    assert_eq!(lines.count(), 3 * 20 * 100);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("# fit housing:"), "{summary}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lcmd(&["bench", "rsd", "--n", "0"]).status.code(), Some(2));
    assert_eq!(
        lcmd(&["run", "matching", "--n", "3", "--k", "5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(lcmd(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(lcmd(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn run_matching_query_json() {
    let out = lcmd(&[
        "run",
        "matching",
        "--seed",
        "5",
        "--n",
        "40",
        "--k",
        "3",
        "--rounds",
        "18",
        "--query-man",
        "7",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["man"], 7);
    assert!(v["probes"].as_u64().unwrap() >= 1);
    let status = v["status"].as_str().unwrap();
    assert!(["matched", "unmatched", "disqualified"].contains(&status));
    assert_eq!(v.get("woman").is_some(), status == "matched");
}

#[test]
fn run_all_stitches_into_a_matching() {
    let out = lcmd(&[
        "run", "matching", "--seed", "2", "--n", "60", "--k", "3", "--all",
    ]);
    let lines: Vec<Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 60);
    let mut women: Vec<u64> = lines.iter().filter_map(|v| v["woman"].as_u64()).collect();
    let matched = women.len();
    women.sort_unstable();
    women.dedup();
    assert_eq!(women.len(), matched);

    let out = lcmd(&[
        "run", "rsd", "--seed", "2", "--n", "60", "--d", "3", "--all",
    ]);
    let mut houses: Vec<u64> = stdout(&out)
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).unwrap()["house"].as_u64())
        .collect();
    let taken = houses.len();
    houses.sort_unstable();
    houses.dedup();
    assert_eq!(houses.len(), taken);
}

#[test]
fn scheduling_payment_from_explicit_bids() {
    let out = lcmd(&[
        "run",
        "scheduling",
        "--mode",
        "std",
        "--seed",
        "1",
        "--n",
        "2",
        "--m",
        "12",
        "--d",
        "2",
        "--bids",
        "2,3",
        "--pay-machine",
        "0",
        "--scheme",
        "expected",
        "--rule",
        "load-critical",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["machine"], 0);
    assert_eq!(v["scheme"], "expected-closed-form");
    // h(x) = 12x/(3+x): 1/2 * 24/5 + 1/2 * 3 = 39/10
    assert_eq!(v["payment"]["num"], "39");
    assert_eq!(v["payment"]["den"], "10");
}

#[test]
fn auction_sets_file_and_item_query() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets.json");
    fs::write(&sets, "[[0,1],[1],[0]]").unwrap();
    let path = sets.to_str().unwrap();
    let out = lcmd(&[
        "run", "auction", "--mode", "ksmb", "--m", "2", "--k", "2", "--bids", "5,4,3", "--sets",
        path,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["awards"], serde_json::json!([[0, 1], [], []]));
    assert_eq!(v["payments"][0]["num"], "4");

    let out = lcmd(&[
        "run",
        "auction",
        "--mode",
        "ksmb",
        "--m",
        "2",
        "--k",
        "2",
        "--bids",
        "5,4,3",
        "--sets",
        path,
        "--query-item",
        "1",
    ]);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["winner"], 0);
}

#[test]
fn gen_then_query_via_config() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("inst.json");
    let out = lcmd(&[
        "gen",
        "scheduling",
        "--mode",
        "res",
        "--seed",
        "4",
        "--n",
        "20",
        "--m",
        "30",
        "--d",
        "2",
        "--materialize",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg = file.to_str().unwrap();
    let from_file = lcmd(&["query", "--config", cfg, "--id", "11"]);
    let seeded = lcmd(&[
        "query",
        "scheduling",
        "--mode",
        "res",
        "--seed",
        "4",
        "--n",
        "20",
        "--m",
        "30",
        "--id",
        "11",
    ]);
    assert!(
        from_file.status.success(),
        "{}",
        String::from_utf8_lossy(&from_file.stderr)
    );
    let a: Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    let b: Value = serde_json::from_str(&stdout(&seeded)).unwrap();
    assert_eq!(a["machine"], b["machine"]);
    assert_eq!(a["job"], 11);
}
