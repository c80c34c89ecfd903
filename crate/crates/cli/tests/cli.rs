use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use propgate::extended::Extended;
use propgate::ingest::read_mps_file;
use propgate::{propagate_parallel, EngineConfig};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn propgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_propgate"))
        .args(args)
        .env_remove("PROPGATE_THREADS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_elapsed(out: &Output) -> String {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.contains("elapsed"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_converged_instance() {
    let out = propgate(&["run", "--engine", "par", "--input", fixture("flow.mps").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["status"], "Converged");
    assert_eq!(v["engine"], "par");
    assert!(v["elapsed_ns"].is_u64());
    assert!(v.get("bounds").is_none());
}

#[test]
fn infeasible_round_limit_and_usage_exit_codes() {
    let inf = propgate(&["run", "--engine", "seq", "-i", fixture("infeasible.mps").to_str().unwrap()]);
    assert_eq!(code(&inf), 2);
    assert_eq!(json(&inf)["status"], "Infeasible");

    let dir = tempfile::tempdir().unwrap();
    let c200 = dir.path().join("c200.mps");
    assert_eq!(code(&propgate(&["gen", "cascade", "-m", "200", "-o", c200.to_str().unwrap()])), 0);
    let limited = propgate(&["run", "-i", c200.to_str().unwrap()]);
    assert_eq!(code(&limited), 1);
    assert_eq!(json(&limited)["rounds_executed"], 100);

    let missing = propgate(&["run", "-i", dir.path().join("missing.mps").to_str().unwrap()]);
    assert_eq!(code(&missing), 3);
    assert!(!missing.stderr.is_empty());

    let bad = dir.path().join("bad.mps");
    std::fs::write(&bad, "NAME x\nROWS\n N obj\n Q c0\nENDATA\n").unwrap();
    let malformed = propgate(&["run", "-i", bad.to_str().unwrap()]);
    assert_eq!(code(&malformed), 3);
    assert!(String::from_utf8_lossy(&malformed.stderr).contains("line 4"));

    let flow = fixture("flow.mps");
    for args in [
        vec!["run", "-i", flow.to_str().unwrap(), "--engine", "gpu"],
        vec!["run", "-i", flow.to_str().unwrap(), "--precision", "f16"],
        vec!["run", "-i", flow.to_str().unwrap(), "--rounds-limit", "0"],
        vec!["run", "-i", flow.to_str().unwrap(), "--nnz-budget", "8", "--vector-threshold", "64"],
        vec!["frobnicate"],
        vec![],
    ] {
        let out = propgate(&args);
        assert_eq!(code(&out), 3, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(code(&propgate(&["--help"])), 0);
    assert_eq!(code(&propgate(&["--version"])), 0);
}

#[test]
fn compare_cascade_engines_agree() {
    let out = propgate(&["compare", "--input", fixture("cascade50.mps").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["report"]["equal"], true);
    assert_eq!(v["report"]["num_mismatches"], 0);
    assert_eq!(v["reference"]["rounds_executed"], 2);
    assert_eq!(v["test"]["rounds_executed"], 51);
}

#[test]
fn compare_reports_differences() {
    let out = propgate(&[
        "compare",
        "-i",
        fixture("cascade50.mps").to_str().unwrap(),
        "--rounds-limit",
        "10",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("cascade50,seq,par,Converged,RoundLimit,false,"), "{row}");
}

#[test]
fn dumped_bounds_round_trip_exactly() {
    let path = fixture("random60x50.mps");
    let out = propgate(&["run", "-i", path.to_str().unwrap(), "--dump-bounds", "--workers", "1"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let expected = propagate_parallel(&read_mps_file(&path).unwrap(), &EngineConfig::default()).unwrap();
    let lower: Vec<Extended> = serde_json::from_value(v["bounds"]["lower"].clone()).unwrap();
    let upper: Vec<Extended> = serde_json::from_value(v["bounds"]["upper"].clone()).unwrap();
    let bits = |x: &[Extended]| x.iter().map(|e| e.0.to_bits()).collect::<Vec<_>>();
    let bits64 = |x: &[f64]| x.iter().map(|e| e.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&lower), bits64(&expected.bounds.lower));
    assert_eq!(bits(&upper), bits64(&expected.bounds.upper));
    assert_eq!(v["per_round_changes"], serde_json::to_value(&expected.per_round_changes).unwrap());
    assert_eq!(v["rounds_executed"], expected.rounds_executed);
    assert_eq!(v["total_bound_changes"], expected.total_bound_changes);
}

#[test]
fn infinite_bounds_are_strings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("free.mps");
    std::fs::write(
        &path,
        "NAME free\nROWS\n N obj\n L c0\nCOLUMNS\n x c0 1.0\n y c0 1.0\nRHS\n RHS c0 10\nBOUNDS\n FR BND x\n UP BND y 5\nENDATA\n",
    )
    .unwrap();
    let out = propgate(&["run", "-i", path.to_str().unwrap(), "--dump-bounds"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["bounds"]["lower"], serde_json::json!(["-inf", 0.0]));
    assert_eq!(v["bounds"]["upper"], serde_json::json!([10.0, 5.0]));
    let lower: Vec<Extended> = serde_json::from_value(v["bounds"]["lower"].clone()).unwrap();
    assert_eq!(lower[0].0, f64::NEG_INFINITY);
}

#[test]
fn identical_invocations_are_identical() {
    let path = fixture("production.mps");
    for format in ["json", "csv", "human"] {
        let args = ["run", "-i", path.to_str().unwrap(), "--dump-bounds", "--format", format];
        let a = propgate(&args);
        let b = propgate(&args);
        if format == "csv" {
            // elapsed_ns is the last column of the summary row.
            let strip = |o: &Output| {
                let t = String::from_utf8(o.stdout.clone()).unwrap();
                t.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect::<Vec<_>>()
            };
            assert_eq!(strip(&a), strip(&b));
        } else {
            assert_eq!(without_elapsed(&a), without_elapsed(&b));
        }
    }

    let gen = ["gen", "random", "--rows", "40", "--cols", "30", "--seed", "9"];
    assert_eq!(propgate(&gen).stdout, propgate(&gen).stdout);
    let other = propgate(&["gen", "random", "--rows", "40", "--cols", "30", "--seed", "10"]);
    assert_ne!(propgate(&gen).stdout, other.stdout);
}

#[test]
fn worker_env_fallback() {
    let path = fixture("random60x50.mps");
    let with_flag = propgate(&["run", "-i", path.to_str().unwrap(), "--dump-bounds", "--workers", "3"]);
    let with_env = Command::new(env!("CARGO_BIN_EXE_propgate"))
        .args(["run", "-i", path.to_str().unwrap(), "--dump-bounds"])
        .env("PROPGATE_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&with_env), 0);
    assert_eq!(without_elapsed(&with_flag), without_elapsed(&with_env));

    let bad_env = Command::new(env!("CARGO_BIN_EXE_propgate"))
        .args(["run", "-i", path.to_str().unwrap()])
        .env("PROPGATE_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad_env), 3);
}

#[test]
fn permute_writes_instance_and_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, perm) = (dir.path().join("p.mps"), dir.path().join("p.json"));
    let out = propgate(&[
        "permute",
        "-i",
        fixture("production.mps").to_str().unwrap(),
        "--seed",
        "5",
        "-o",
        mps.to_str().unwrap(),
        "--perm-output",
        perm.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let pair: propgate::ingest::PermutationPair = serde_json::from_str(&std::fs::read_to_string(&perm).unwrap()).unwrap();
    assert!(pair.is_valid());
    assert_eq!(pair.seed, 5);

    let original = propagate_parallel(&read_mps_file(fixture("production.mps")).unwrap(), &EngineConfig::default()).unwrap();
    let permuted = propagate_parallel(&read_mps_file(&mps).unwrap(), &EngineConfig::default()).unwrap();
    assert_eq!(pair.restore_bounds(&permuted.bounds), original.bounds);
}

#[test]
fn bench_emits_records_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["flow.mps", "toy_integral.mps", "infeasible.mps"] {
        std::fs::copy(fixture(name), dir.path().join(name)).unwrap();
    }
    let out = propgate(&["bench", "-d", dir.path().to_str().unwrap(), "--repetitions", "2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 6);
    assert_eq!(v["metadata"]["repetitions"], 2);
    assert_eq!(v["metadata"]["baseline"], "seq");
    let infeasible: Vec<_> = records.iter().filter(|r| r["instance"] == "INFEAS").collect();
    assert!(infeasible.iter().all(|r| r["excluded"].is_string() && r["speedup"].is_null()));
    let all_par = v["aggregates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["engine"] == "par" && a["subset"] == "all")
        .unwrap();
    assert_eq!(all_par["count"], 2);

    let csv_path = dir.path().join("out.csv");
    let out = propgate(&["bench", "-d", dir.path().to_str().unwrap(), "--format", "csv", "-o", csv_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(csv_path).unwrap();
    let (records, aggregates) = text.split_once("\n\n").unwrap();
    assert_eq!(records.lines().count(), 7);
    assert!(aggregates.starts_with("engine,subset,count,geomean_speedup"));
}
