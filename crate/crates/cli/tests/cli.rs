use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn tooldec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tooldec")).args(args).output().expect("spawn tooldec")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn compile(dir: &Path, schemas: &str, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = tooldec(&[
        "compile",
        "--schemas",
        path_str(&fixture(schemas)),
        "--vocab",
        path_str(&fixture("vocab512.json")),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn compile_matches_the_frozen_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let a = compile(dir.path(), "flight_search.json", "a.tdc");
    let b = compile(dir.path(), "flight_search.json", "b.tdc");
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(fixture("golden/flight_search_react.tdc")).unwrap());
}

#[test]
fn compile_reports_stats_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.tdc");
    let o = tooldec(&[
        "compile",
        "--schemas",
        path_str(&fixture("flight_search.json")),
        "--vocab",
        path_str(&fixture("vocab512.json")),
        "--out",
        path_str(&out),
    ]);
    let stats: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(stats["state_count"].as_u64().unwrap() > 0);
    assert!(stderr(&o).starts_with("config: compile "));
}

#[test]
fn missing_vocab_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tooldec(&[
        "compile",
        "--schemas",
        path_str(&fixture("flight_search.json")),
        "--vocab",
        "/nonexistent/vocab.json",
        "--out",
        path_str(&dir.path().join("x.tdc")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/vocab.json"), "{}", stderr(&o));
}

#[test]
fn inspect_summarizes() {
    let o = tooldec(&["inspect", path_str(&fixture("golden/flight_search_react.tdc"))]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["vocab_size"], 512);
    assert_eq!(v["tools"], serde_json::json!(["flight_search"]));
    assert_eq!(v["vocab_fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn inspect_rejects_corrupted_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = std::fs::read(fixture("golden/flight_search_react.tdc")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = dir.path().join("bad.tdc");
    std::fs::write(&bad, &bytes).unwrap();
    let o = tooldec(&["inspect", path_str(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corrupted"), "{}", stderr(&o));
}

fn validate_text(text: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, text).unwrap();
    tooldec(&["validate", path_str(&fixture("golden/flight_search_react.tdc")), path_str(&input)])
}

#[test]
fn validate_verdicts() {
    let ok = validate_text(
        "Thought: find flights\nAction: flight_search\nAction Input: {\"from\": \"LAX\", \"to\": \"JFK\", \"adult\": 2}\n",
    );
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("verdict: Valid"));

    let name = validate_text("Thought: x\nAction: flight_find\nAction Input: {}\n");
    assert_eq!(name.status.code(), Some(1));
    assert!(stdout(&name).contains("error_class: NameError"));
    assert!(stdout(&name).contains("offset: 19"), "{}", stdout(&name));

    let truncated = validate_text("Thought: x\nAction: flight_search\nAction Input: {\"from\": \"LAX\"");
    assert_eq!(truncated.status.code(), Some(1));
    assert!(stdout(&truncated).contains("error_class: FormatError"));

    let args = validate_text("Thought: x\nAction: flight_search\nAction Input: {\"from\": \"LAX\", \"to\": \"JFK\", \"adult\": \"2\"}\n");
    assert!(stdout(&args).contains("error_class: ArgumentError"));
}

#[test]
fn validate_token_ids() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ids.json");
    std::fs::write(&input, "[1, 2, 3]").unwrap();
    let o = tooldec(&["validate", path_str(&fixture("golden/flight_search_react.tdc")), path_str(&input), "--tokens"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("automaton: rejected"));
}

fn run(args: &[&str]) -> (Output, Vec<Value>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let artifact = fixture("golden/flight_search_react.tdc");
    let mut full = vec!["run", path_str(&artifact)];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", path_str(&out)]);
    let o = tooldec(&full);
    let lines = std::fs::read_to_string(&out)
        .unwrap_or_default()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    (o, lines)
}

#[test]
fn run_scripted_replays_the_call() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.txt");
    let text = "Thought: need flights\nAction: flight_search\nAction Input: {\"from\": \"LAX\", \"to\": \"JFK\", \"adult\": 2}\n";
    std::fs::write(&script, text).unwrap();
    let model = format!("script:{}", script.display());
    let (o, lines) = run(&["--model", &model]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["text"], text);
    assert_eq!(lines[0]["verdict"], "Valid");
    assert_eq!(lines[0]["fallbacks"], 0);
}

#[test]
fn run_adversarial_counts_fallbacks() {
    let (o, lines) = run(&["--model", "adversarial:5", "--sessions", "4", "--step-limit", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["error_rate"], 0.0);
    assert!(summary["fallbacks"].as_u64().unwrap() > 0);
    let sessions: Vec<u64> = lines.iter().map(|l| l["session"].as_u64().unwrap()).collect();
    assert_eq!(sessions, [0, 1, 2, 3]);
}

#[test]
fn run_rejects_bad_arguments() {
    let (o, _) = run(&["--model", "oracle:1"]);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run(&["--model", "random:1", "--policy", "nucleus:0.9"]);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = run(&["--model", "random:1", "--step-limit", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("step-limit"));
}

#[test]
fn render_single_tool_prompt() {
    let o = tooldec(&["render", "--schemas", path_str(&fixture("airport_arrivals.json"))]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "1. airport_arrivals_for_flight_fare_search\n\n   Description: Retrieves information about arriving flights.\n   Parameters:\n   - airportcode: Airport code (Example: LHR).\n   - carriercode: Airline carrier code (Optional).\n   - date: Date for checking arrivals (Optional).\n"
    );
}

#[test]
fn render_with_vocab_adds_stats() {
    let o = tooldec(&[
        "render",
        "--schemas",
        path_str(&fixture("tools10.json")),
        "--vocab",
        path_str(&fixture("vocab512.json")),
    ]);
    let text = stdout(&o);
    assert!(text.contains("tool_name\traw_tokens\tcompressed_tokens\tratio\n"));
    let rows = text.lines().filter(|l| l.split('\t').count() == 4).count();
    assert_eq!(rows, 12);
    assert!(text.lines().last().unwrap().starts_with("mean\t"));
}

#[test]
fn render_empty_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    let o = tooldec(&["render", "--schemas", path_str(&empty)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
}

#[test]
fn openapi_input_and_custom_scaffold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oa.tdc");
    let o = tooldec(&[
        "compile",
        "--schemas",
        path_str(&fixture("openapi_flights.json")),
        "--format",
        "openapi-subset",
        "--scaffold",
        path_str(&fixture("scaffolds/tagged_call.json")),
        "--vocab",
        path_str(&fixture("vocab512.json")),
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let jsonl = dir.path().join("t.jsonl");
    let o = tooldec(&["run", path_str(&out), "--model", "random:9", "--sessions", "20", "--out", path_str(&jsonl)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn library_sessions_reproduce_cli_transcripts() {
    use tooldec::decode::{DecodeSession, LanguageModel, RandomLogit, Sampler, SamplingPolicy};

    let (o, lines) = run(&["--model", "random:40", "--policy", "top-k:3", "--seed", "9", "--sessions", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(fixture("golden/flight_search_react.tdc")).unwrap();
    let a = tooldec::Artifact::from_bytes(&bytes).unwrap();
    for (i, line) in lines.iter().enumerate() {
        let mut model = RandomLogit::new(a.vocab.len(), 40 + i as u64);
        let mut sampler = Sampler::new(SamplingPolicy::TopK { k: 3, seed: 9 + i as u64 });
        // Caller-driven loop: fetch a distribution, hand it to the session.
        let mut s = DecodeSession::new(a.fsm(), 512).unwrap();
        let mut p = vec![0.0; model.vocab_size()];
        while !s.is_finished() {
            model.next_distribution(s.prefix(), &mut p);
            s.step_with_distribution(&p, &mut sampler).unwrap();
        }
        let expected: Vec<tooldec::TokenId> = serde_json::from_value(line["token_ids"].clone()).unwrap();
        assert_eq!(s.prefix(), &expected[..], "session {i}");
    }
}
