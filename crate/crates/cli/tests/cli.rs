use std::path::{Path, PathBuf};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    hidden_cli::main_with_args(std::iter::once("hidden").chain(args.iter().copied()))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn out(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: impl AsRef<Path>) -> Vec<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

fn data_file(dir: &Path, header: &str, rows: &[String]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    write(dir, "data.csv", &s)
}

#[test]
fn root_fit_with_frozen_t_gives_urn_probabilities() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = ["a", "a", "a", "b", "c", "c"].iter().map(|s| s.to_string()).collect();
    let data = data_file(tmp.path(), "x", &rows);
    let o = out(&tmp, "fit");
    let code = run(&[
        "fit", "--data", &data, "--update-t", "false", "--t0", "1", "--iterations", "50", "--burn-in", "10", "--seed",
        "1", "--out", &o,
    ]);
    assert_eq!(code, 0);
    let s = json(PathBuf::from(&o).join("summary.json"));
    let probs: Vec<f64> = s["predictive"][0]["rows"][0]["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    // (1 + n_x) / (3 + 6)
    for (p, want) in probs.iter().zip([4.0 / 9.0, 2.0 / 9.0, 3.0 / 9.0]) {
        assert!((p - want).abs() < 1e-12, "{probs:?}");
    }
}

#[test]
fn sparse_cells_are_shrunk_between_pooled_mean_and_mle() {
    let tmp = TempDir::new().unwrap();
    let mut rows = Vec::new();
    for pa in 0..5 {
        for i in 0..40 {
            rows.push(format!("p{pa},{}", if i % 10 < 3 { "yes" } else { "no" }));
        }
    }
    rows.push("p5,yes".into());
    rows.push("p5,yes".into());
    let data = data_file(tmp.path(), "pa,y", &rows);
    let dag = write(tmp.path(), "g.txt", "pa -> y\n");
    let o = out(&tmp, "fit");
    let code = run(&["fit", "--data", &data, "--dag", &dag, "--iterations", "4000", "--burn-in", "500", "--seed", "3", "--out", &o]);
    assert_eq!(code, 0);
    let s = json(PathBuf::from(&o).join("summary.json"));
    let table = s["predictive"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["node"] == "y")
        .unwrap();
    let labels: Vec<&str> = table["labels"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let yes = labels.iter().position(|&l| l == "yes").unwrap();
    let sparse = table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["parent_values"][0] == "p5")
        .unwrap();
    let fitted = sparse["probabilities"][yes].as_f64().unwrap();
    let pooled = (5.0 * 12.0 + 2.0) / 202.0;
    assert!(pooled < fitted && fitted < 1.0, "fitted {fitted}, pooled {pooled}");
}

#[test]
fn same_seed_reruns_are_identical() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = (0..30).map(|i| format!("{},{}", i % 3, (i / 2) % 2)).collect();
    let data = data_file(tmp.path(), "a,b", &rows);
    let dag = write(tmp.path(), "g.txt", "a -> b\n");
    let (o1, o2) = (out(&tmp, "r1"), out(&tmp, "r2"));
    for o in [&o1, &o2] {
        assert_eq!(run(&["fit", "--data", &data, "--dag", &dag, "--iterations", "500", "--burn-in", "100", "--seed", "9", "--out", o]), 0);
    }
    for f in ["traces/t.csv", "traces/log_post.csv", "summary.json", "manifest.json"] {
        let a = std::fs::read(PathBuf::from(&o1).join(f)).unwrap();
        let b = std::fs::read(PathBuf::from(&o2).join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

fn simulated_two_dag(tmp: &TempDir) -> String {
    let sim = out(tmp, "sim");
    assert_eq!(run(&["simulate", "--design", "two-dag", "--k1", "5", "--seed", "4", "--out", &sim]), 0);
    format!("{sim}/data/rep_000.csv")
}

#[test]
fn dags_mode_writes_normalized_posterior() {
    let tmp = TempDir::new().unwrap();
    let data = simulated_two_dag(&tmp);
    let dags = write(tmp.path(), "dags.txt", "[G1]\nx1 -> x2\nx1 -> x3\n[G2]\nx1 -> x2\nx1 -> x3\nx2 -> x3\n");
    let o = out(&tmp, "dags");
    let code = run(&[
        "structure", "--mode", "dags", "--data", &data, "--candidates", &dags, "--iterations", "3000", "--burn-in",
        "300", "--seed", "2", "--out", &o,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&o).join("graphs/posterior.csv"));
    assert_eq!(rows.len(), 3);
    let total: f64 = rows[1..].iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(PathBuf::from(&o).join("graphs/map.dot").exists());
}

#[test]
fn markov_blanket_finds_a_copied_variable() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = (0..100).map(|i| format!("{0},{0}", (i * 7 / 3) % 2)).collect();
    let data = data_file(tmp.path(), "x1,x2", &rows);
    let o = out(&tmp, "mb");
    let code = run(&[
        "structure", "--mode", "markov-blanket", "--node", "x2", "--data", &data, "--iterations", "3000", "--burn-in",
        "300", "--seed", "5", "--out", &o,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&o).join("graphs/blanket.csv"));
    assert_eq!(rows[1][0], "x1");
    assert!(rows[1][1].parse::<f64>().unwrap() > 0.9, "{rows:?}");
}

#[test]
fn ordered_regime_never_adds_back_edges() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = (0..80)
        .map(|i| {
            let a = i % 2;
            let b = (i / 2) % 3;
            format!("{a},{b},{},{}", (a + b) % 2, (i / 5) % 2)
        })
        .collect();
    let data = data_file(tmp.path(), "w,x,y,z", &rows);
    let o = out(&tmp, "ord");
    let code = run(&[
        "structure", "--mode", "edges", "--regime", "ordered", "--data", &data, "--iterations", "2000", "--burn-in",
        "200", "--seed", "6", "--out", &o,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&o).join("graphs/edge_probabilities.csv"));
    for (from, row) in rows[1..].iter().enumerate() {
        for (to, v) in row[1..].iter().enumerate() {
            if to <= from {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "edge {from} -> {to}");
            }
        }
    }
    let trace = csv_rows(PathBuf::from(&o).join("traces/structure.csv"));
    let mut edges = 0;
    for r in &trace[1..] {
        let node: usize = r[1].parse().unwrap();
        for pa in r[2].split(';').filter(|s| !s.is_empty()) {
            assert!(pa.parse::<usize>().unwrap() < node, "back edge {pa} -> {node}");
            edges += 1;
        }
    }
    assert!(edges > 0);
}

#[test]
fn score_treats_identical_candidates_identically() {
    let tmp = TempDir::new().unwrap();
    let data = simulated_two_dag(&tmp);
    let dags = write(tmp.path(), "dags.txt", "[A]\nx1 -> x2\nx2 -> x3\n[B]\nx1 -> x2\nx2 -> x3\n[C]\nx1 -> x3\n");
    let o = out(&tmp, "score");
    let code = run(&[
        "score", "--data", &data, "--candidates", &dags, "--iterations", "2000", "--burn-in", "200", "--seed", "8",
        "--out", &o,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&o).join("scores.csv"));
    let value = |g: &str, s: &str| {
        rows.iter()
            .find(|r| r[1] == g && r[2] == s)
            .map(|r| r[3].clone())
            .unwrap()
    };
    for s in ["bic", "aic", "bde", "exact"] {
        assert_eq!(value("A", s), value("B", s), "{s}");
    }
    let bf = json(PathBuf::from(&o).join("bayes_factors.json"));
    let m = bf["log_bayes_factor"].as_array().unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let ab = m[a][b].as_f64().unwrap();
            let ba = m[b][a].as_f64().unwrap();
            assert_eq!(ab, -ba);
        }
    }
    assert_eq!(m[0][1].as_f64().unwrap(), 0.0);
}

#[test]
fn exact_budget_is_reported_per_graph() {
    let tmp = TempDir::new().unwrap();
    let data = simulated_two_dag(&tmp);
    let dags = write(tmp.path(), "dags.txt", "[G1]\nx1 -> x2\nx1 -> x3\n[G2]\nx1 -> x2\nx1 -> x3\nx2 -> x3\n");
    let o = out(&tmp, "score");
    let code = run(&[
        "score", "--data", &data, "--candidates", &dags, "--exact-budget", "10", "--iterations", "500", "--burn-in",
        "100", "--seed", "8", "--out", &o,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&o).join("scores.csv"));
    let exact: Vec<_> = rows.iter().filter(|r| r[2] == "exact").collect();
    assert_eq!(exact.len(), 2);
    assert!(exact.iter().all(|r| r[3].is_empty() && !r[4].is_empty()));
    assert!(rows.iter().any(|r| r[2] == "bde" && !r[3].is_empty()));
}

#[test]
fn simulate_and_bench_single_node() {
    let tmp = TempDir::new().unwrap();
    let sim = out(&tmp, "sim");
    assert_eq!(run(&["simulate", "--design", "single-node", "--k-pa", "10", "--seed", "1", "--out", &sim]), 0);
    let rows = csv_rows(PathBuf::from(&sim).join("data/rep_000.csv"));
    assert_eq!(rows[0].len(), 2);
    assert_eq!(rows.len(), 101);

    let bench = out(&tmp, "bench");
    let code = run(&[
        "bench", "--design", "single-node", "--k-pa", "10", "--replications", "3", "--iterations", "1000", "--seed",
        "1", "--out", &bench,
    ]);
    assert_eq!(code, 0);
    let rows = csv_rows(PathBuf::from(&bench).join("results.csv"));
    assert_eq!(
        rows[0],
        ["replication", "data_seed", "chain_seed", "rmse_hidden", "rmse_mle", "rmse_dm"]
    );
    assert_eq!(rows.len(), 1 + 3 + 2);
    assert_eq!(rows[4][0], "mean");
    assert_eq!(rows[5][0], "sd");
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let rows: Vec<String> = (0..20).map(|i| format!("{}", i % 2)).collect();
    let data = data_file(tmp.path(), "x", &rows);
    let o = out(&tmp, "cfg");
    let cfg = write(
        tmp.path(),
        "run.toml",
        &format!("command = \"fit\"\ndata = \"{data}\"\niterations = 300\nburn_in = 50\nseed = 1\nhyper = [\"x=b:2\"]\n"),
    );
    assert_eq!(run(&["--config", &cfg, "--seed", "7", "--out", &o]), 0);
    let m = json(PathBuf::from(&o).join("manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["iterations"], 300);
    assert_eq!(m["hyper"][0], "x=b:2");
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = TempDir::new().unwrap();
    let o = out(&tmp, "x");
    // configuration errors
    assert_eq!(run(&["fit", "--no-such-flag"]), 2);
    assert_eq!(run(&["fit", "--seed", "1", "--out", &o]), 2);
    let rows: Vec<String> = (0..10).map(|i| format!("{},{},{}", i % 2, i % 3, i % 2)).collect();
    let data = data_file(tmp.path(), "a,b,c", &rows);
    let cyclic = write(tmp.path(), "cyc.txt", "[C]\na -> b\nb -> c\nc -> a\n");
    assert_eq!(run(&["structure", "--mode", "dags", "--data", &data, "--candidates", &cyclic, "--seed", "1", "--out", &o]), 2);
    let bad = write(tmp.path(), "bad.txt", "a -> b\n");
    assert_eq!(run(&["structure", "--mode", "dags", "--data", &data, "--candidates", &bad, "--seed", "1", "--out", &o]), 2);
    // data errors
    let missing = tmp.path().join("missing.csv").to_string_lossy().into_owned();
    assert_eq!(run(&["ingest", "--data", &missing, "--out", &o]), 3);
    let ragged = write(tmp.path(), "ragged.csv", "a,b\n1,2\n3\n");
    assert_eq!(run(&["ingest", "--data", &ragged, "--out", &o]), 3);
    // budget errors: eight parents with ten levels each
    let names: Vec<String> = (0..9).map(|j| format!("v{j}")).collect();
    let rows: Vec<String> = (0..10)
        .map(|i| (0..9).map(|j| ((i + j) % 10).to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let wide = data_file(tmp.path(), &names.join(","), &rows);
    let edges: String = (0..8).map(|j| format!("v{j} -> v8\n")).collect();
    let dag = write(tmp.path(), "wide.txt", &edges);
    assert_eq!(run(&["fit", "--data", &wide, "--dag", &dag, "--seed", "1", "--out", &o]), 4);
}
