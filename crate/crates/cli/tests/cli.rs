use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn assist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_assist")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path) {
    let o = assist(&[
        "generate",
        "-k",
        "10",
        "-q",
        "30",
        "-d",
        "300",
        "--vocab",
        "100",
        "--seed",
        "1",
        "--out",
        s(dir),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
}

/// CSV lines with the two wall-clock columns blanked.
fn without_clock(csv: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let clock: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.ends_with("_ms") || h.contains("_ms_"))
        .map(|(i, _)| i)
        .collect();
    assert_eq!(clock.len(), 2, "{header:?}");
    lines
        .map(|l| {
            l.split(',')
                .enumerate()
                .map(|(i, x)| if clock.contains(&i) { "" } else { x })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect()
}

#[test]
fn generate_writes_four_files() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("nested/scenario");
    generate(&dir);
    for f in ["kernel.json", "query.json", "data.json", "scenario.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let q = json(&dir.join("query.json"));
    assert_eq!(q["nodes"].as_array().unwrap().len(), 30);
    assert_eq!(q["vocabSize"], 100);
    let k = json(&dir.join("kernel.json"));
    assert_eq!(k["nodes"].as_array().unwrap().len(), 10);
    let m = json(&dir.join("scenario.json"));
    assert_eq!(m["seed"], 1);
    assert_eq!(m["kernelToQuery"].as_array().unwrap().len(), 10);
}

#[test]
fn generate_rejects_kernel_larger_than_query() {
    let tmp = TempDir::new().unwrap();
    let o = assist(&["generate", "-k", "40", "-q", "30", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(text(&o).contains("invalid"), "{}", text(&o));
    assert!(!tmp.path().join("query.json").exists());
}

#[test]
fn run_validate_round_trip() {
    let tmp = TempDir::new().unwrap();
    let (sc, out) = (tmp.path().join("sc"), tmp.path().join("run"));
    generate(&sc);
    let o = assist(&[
        "run",
        "--scenario",
        s(&sc),
        "--out",
        s(&out),
        "--repeats",
        "3",
        "--trace-phers",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));

    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("k,q,d,vocab,ablate,scenario_seed,seed,peer_ms,peer_comparisons"));
    assert!(metrics.ends_with('\n'));
    let medians = std::fs::read_to_string(out.join("medians.csv")).unwrap();
    assert_eq!(medians.lines().count(), 2);

    for seed in 1..=3 {
        for f in [
            format!("result-seed{seed}.json"),
            format!("ticks-seed{seed}.csv"),
            format!("merged-seed{seed}.csv"),
            format!("trace-seed{seed}.csv"),
        ] {
            assert!(out.join(&f).is_file(), "{f} missing");
        }
    }
    let result = out.join("result-seed1.json");
    let r = json(&result);
    assert!(r["ticksToKernel"].as_u64().unwrap() <= 20);
    assert!(!r["edges"].as_array().unwrap().is_empty());
    let merged = std::fs::read_to_string(out.join("merged-seed1.csv")).unwrap();
    assert!(merged.starts_with("query_u,query_v,data_u,data_v,origin\n"));
    assert!(merged.contains(",kernel"));

    let ok = assist(&[
        "validate",
        "--result",
        s(&result),
        "--query",
        s(&sc.join("query.json")),
        "--data",
        s(&sc.join("data.json")),
    ]);
    assert_eq!(code(&ok), 0, "{}", text(&ok));

    // point the first edge's second endpoint at a data node it is not joined to
    let mut bad = r.clone();
    let v = bad["edges"][0][1].as_u64().unwrap();
    let data = json(&sc.join("data.json"));
    let u_img = bad["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["queryId"] == bad["edges"][0][0])
        .unwrap()["dataId"]
        .as_u64()
        .unwrap();
    let adjacent: Vec<u64> = data["edges"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|e| {
            let (a, b) = (e[0].as_u64().unwrap(), e[1].as_u64().unwrap());
            (a == u_img).then_some(b).or((b == u_img).then_some(a))
        })
        .collect();
    let far = (100..300).find(|x| !adjacent.contains(x)).unwrap();
    for n in bad["nodes"].as_array_mut().unwrap() {
        if n["queryId"] == v {
            n["dataId"] = far.into();
        }
    }
    let tampered = tmp.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&bad).unwrap()).unwrap();
    let o = assist(&[
        "validate",
        "--result",
        s(&tampered),
        "--query",
        s(&sc.join("query.json")),
        "--data",
        s(&sc.join("data.json")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(text(&o).contains("(a)"), "{}", text(&o));
}

#[test]
fn kernel_embedding_exported_as_result_validates() {
    let tmp = TempDir::new().unwrap();
    let sc = tmp.path().join("sc");
    generate(&sc);
    let kernel = json(&sc.join("kernel.json"));
    let m = json(&sc.join("scenario.json"));
    let nodes: Vec<Value> = kernel["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| {
            let id = n["id"].as_u64().unwrap() as usize;
            serde_json::json!({
                "queryId": m["kernelToQuery"][id],
                "dataId": m["kernelToData"][id],
                "label": n["label"],
                "detail": n["detail"],
            })
        })
        .collect();
    let edges: Vec<Value> = kernel["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            serde_json::json!([
                m["kernelToQuery"][e[0].as_u64().unwrap() as usize],
                m["kernelToQuery"][e[1].as_u64().unwrap() as usize]
            ])
        })
        .collect();
    let result = serde_json::json!({
        "nodes": nodes, "edges": edges, "largestComponent": 10, "ticksToKernel": null, "ticksToConvergence": 0
    });
    let path = tmp.path().join("kernel-result.json");
    std::fs::write(&path, result.to_string()).unwrap();
    let o = assist(&[
        "validate",
        "--result",
        s(&path),
        "--query",
        s(&sc.join("query.json")),
        "--data",
        s(&sc.join("data.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
}

#[test]
fn disjoint_graphs_converge_immediately() {
    let tmp = TempDir::new().unwrap();
    let q = serde_json::json!({"vocabSize": 4, "nodes": [{"id": 0, "label": 0, "detail": 1}, {"id": 1, "label": 1, "detail": 1}], "edges": [[0, 1]]});
    let d = serde_json::json!({"vocabSize": 4, "nodes": [{"id": 0, "label": 2, "detail": 1}, {"id": 1, "label": 3, "detail": 1}], "edges": [[0, 1]]});
    let (qp, dp, out) = (
        tmp.path().join("q.json"),
        tmp.path().join("d.json"),
        tmp.path().join("out"),
    );
    std::fs::write(&qp, q.to_string()).unwrap();
    std::fs::write(&dp, d.to_string()).unwrap();
    let o = assist(&[
        "run",
        "--query",
        s(&qp),
        "--data",
        s(&dp),
        "--out",
        s(&out),
        "--repeats",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let r = json(&out.join("result-seed1.json"));
    assert_eq!(r["edges"].as_array().unwrap().len(), 0);
    assert_eq!(r["ticksToConvergence"], 0);
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let row: Vec<&str> = metrics.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.last(), Some(&"true"), "{metrics}");
}

#[test]
fn tick_limit_reports_non_convergence() {
    let tmp = TempDir::new().unwrap();
    let o = assist(&["run", "--max-ticks", "3", "--repeats", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 3, "{}", text(&o));
    let metrics = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().contains(",false,"), "{metrics}");
}

#[test]
fn config_file_with_command_line_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("assist.conf");
    std::fs::write(
        &cfg,
        "# small scenario\nkernel-size = 5\nquery-size = 12\ndata-size = 40\nvocab = 8\nseed = 9\n",
    )
    .unwrap();
    let out = tmp.path().join("sc");
    let o = assist(&["generate", "--config", s(&cfg), "-q", "15", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let m = json(&out.join("scenario.json"));
    assert_eq!(m["params"]["kernelSize"], 5);
    assert_eq!(m["params"]["querySize"], 15);
    assert_eq!(m["params"]["vocabSize"], 8);
    assert_eq!(m["seed"], 9);

    std::fs::write(&cfg, "speed = 3\n").unwrap();
    let o = assist(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn metrics_repeat_except_wall_clock() {
    let tmp = TempDir::new().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = assist(&[
            "run",
            "-k",
            "6",
            "-q",
            "20",
            "-d",
            "120",
            "--vocab",
            "20",
            "--seed",
            "4",
            "--repeats",
            "3",
            "--out",
            s(&out),
        ]);
        assert!(matches!(code(&o), 0 | 3), "{}", text(&o));
        runs.push(without_clock(
            &std::fs::read_to_string(out.join("metrics.csv")).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn bench_writes_rows_and_medians() {
    let tmp = TempDir::new().unwrap();
    let o = assist(&[
        "bench",
        "--sweep",
        "data-size",
        "--grid",
        "200,400",
        "-k",
        "6",
        "-q",
        "20",
        "--repeats",
        "2",
        "--workers",
        "2",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let rows = std::fs::read_to_string(tmp.path().join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
    let medians = std::fs::read_to_string(tmp.path().join("medians.csv")).unwrap();
    let lines: Vec<&str> = medians.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("ticks_to_kernel_q1,ticks_to_kernel_median,ticks_to_kernel_q3"));

    let o = assist(&[
        "bench",
        "--sweep",
        "ablation",
        "--grid",
        "0,0.5",
        "--vocabs",
        "10,100",
        "-k",
        "5",
        "-q",
        "15",
        "-d",
        "60",
        "--repeats",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let medians = std::fs::read_to_string(tmp.path().join("medians.csv")).unwrap();
    assert_eq!(medians.lines().count(), 1 + 4);

    let o = assist(&["bench", "--sweep", "sideways", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    let o = assist(&["bench", "--sweep", "data-size", "--grid", "5", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2, "{}", text(&o));
}
