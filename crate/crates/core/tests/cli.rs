use std::path::Path;
use std::process::{Command, Output};

fn volgram(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_volgram"));
    cmd.args(args).env("RUST_LOG", "warn");
    match threads {
        Some(t) => cmd.env("VOLGRAM_THREADS", t),
        None => cmd.env_remove("VOLGRAM_THREADS"),
    };
    cmd.output().unwrap()
}

fn ok(args: &[&str]) {
    let out = volgram(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn five_row_series() {
    let dir = tempfile::tempdir().unwrap();
    let input = p(dir.path(), "in.csv");
    std::fs::write(&input, "value\n0\n1\n0\n1\n0\n").unwrap();
    let out = p(dir.path(), "est.csv");
    ok(&["estimate", "-i", &input, "--bins", "2", "-o", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "bin_start,bin_end,post_mean,lower,upper");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,0.5,"));
    assert!(lines[2].starts_with("0.5,1,"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "est.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["n"], 4);
    assert_eq!(meta["config"]["prior"]["alpha"], 0.001);
}

#[test]
fn simulate_round_trips_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    ok(&["simulate", "--s", "s1", "--drift", "b1", "--seed", "7", "--n", "8000", "-o", &a]);
    ok(&["simulate", "--s", "s1", "--drift", "b1", "--seed", "7", "--n", "8000", "-o", &b]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let spec = volgram::cli::IngestSpec { strict_times: true, ..volgram::cli::IngestSpec::new(&a) };
    let path = volgram::cli::ingest(&spec).unwrap();
    let fine = volgram::euler_simulate(
        &volgram::SimConfig::with_seed(7),
        &volgram::sde::AffineDrift::b1(),
        &volgram::sde::BenchS1,
    )
    .unwrap();
    let direct = volgram::subsample(&fine, 8000, 1.0).unwrap();
    assert_eq!(path.n(), 8000);
    assert_eq!(path.horizon(), 1.0);
    assert!(path.values().iter().zip(direct.values()).all(|(x, y)| x.to_bits() == y.to_bits()));

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "a.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["sim"]["seed"], 7);
}

#[test]
fn select_writes_grid_and_best() {
    let dir = tempfile::tempdir().unwrap();
    let sim = p(dir.path(), "sim.csv");
    ok(&["simulate", "--n", "8000", "--seed", "1", "-o", &sim]);
    let out = p(dir.path(), "sel.csv");
    ok(&["select", "-i", &sim, "--criterion", "dic", "--grid", "5,10,20,40,80,160,320", "-o", &out]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert_eq!(text.lines().next().unwrap(), "N,score");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "sel.json")).unwrap()).unwrap();
    assert_eq!(summary["criterion"], "dic");
    assert_eq!(summary["scores"].as_array().unwrap().len(), 7);
    let best = summary["best"].as_u64().unwrap();
    assert!([5, 10, 20, 40, 80, 160, 320].contains(&best));
}

#[test]
fn contract_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path(), "c.csv");
    let args = [
        "contract", "--n-list", "500,1000,2000", "--draws", "50", "--fine-points", "20001", "--realisations", "2",
        "--seed", "5", "-o", &out,
    ];
    ok(&args);
    for r in 0..2 {
        let text = std::fs::read_to_string(p(dir.path(), &format!("c_r{r}.csv"))).unwrap();
        assert_eq!(text.lines().next().unwrap(), "n,N,q");
        assert_eq!(text.lines().count(), 4);
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p(dir.path(), "c.json")).unwrap()).unwrap();
    for key in ["norm", "lambda", "slope", "slope_se", "seed"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["norm"], "l2");
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "2", "8"] {
        let out = p(dir.path(), &format!("c{threads}.csv"));
        let status = volgram(
            &["contract", "--s", "s2", "--lambda", "0.5", "--n-list", "400,800", "--draws", "64", "--fine-points", "8001", "-o", &out],
            Some(threads),
        );
        assert!(status.status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(volgram(&["estimate", "--bins"], None).status.code(), Some(2));
    assert_eq!(volgram(&["frobnicate"], None).status.code(), Some(2));

    let missing = p(dir.path(), "nope.csv");
    let out = p(dir.path(), "o.csv");
    assert_eq!(volgram(&["estimate", "-i", &missing, "--bins", "2", "-o", &out], None).status.code(), Some(3));

    let irregular = p(dir.path(), "irr.csv");
    std::fs::write(&irregular, "time,value\n0,1\n1,2\n2,3\n4,4\n5,5\n").unwrap();
    let res = volgram(&["estimate", "-i", &irregular, "--bins", "2", "--strict-times", "-o", &out], None);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("rows 3 and 4"));

    let good = p(dir.path(), "good.csv");
    std::fs::write(&good, "value\n1\n2\n1\n2\n").unwrap();
    assert_eq!(volgram(&["estimate", "-i", &good, "--bins", "9", "-o", &out], None).status.code(), Some(2));
    assert_eq!(volgram(&["estimate", "-i", &good, "--bins", "2", "--alpha", "-1", "-o", &out], None).status.code(), Some(2));
    assert_eq!(volgram(&["simulate", "--n", "7", "--fine-points", "101", "-o", &out], None).status.code(), Some(2));
    assert_eq!(volgram(&["simulate", "--s", "bogus", "--n", "10", "--fine-points", "101", "-o", &out], None).status.code(), Some(2));
    assert_eq!(volgram(&["simulate", "--n", "10", "--fine-points", "101", "-o", &out], Some("zero")).status.code(), Some(2));
    assert!(!Path::new(&out).exists());
}
