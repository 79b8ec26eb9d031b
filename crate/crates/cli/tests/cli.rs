use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use serde_json::{json, Value};

const CROP: &str = "<think>The sign is small.</think>\n<tool_call>\n{\"name\": \"image_zoom_in_tool\", \"arguments\": {\"bbox_2d\": [0, 0, 32, 24]}}\n</tool_call>";
const SEARCH: &str = "<think>Look it up.</think>\n<tool_call>\n{\"name\": \"search_web\", \"arguments\": {\"query\": \"hamburg u-bahn\"}}\n</tool_call>";

fn answer(text: &str) -> String {
    format!("<think>Done.</think>\n<answer>{text}</answer>")
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn write(&self, rel: &str, text: &str) {
        let p = self.path(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_geovista"))
            .arg("--config")
            .arg(self.path("run.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    fn jsonl(&self, rel: &str) -> Vec<Value> {
        self.read(rel).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }
}

fn manifest_line(id: &str, lat: f64, lon: f64, names: [&str; 3], data_type: &str) -> String {
    json!({
        "sample_id": id, "image_path": format!("images/{id}.png"), "lat": lat, "lon": lon,
        "country": names[0], "province": names[1], "city": names[2],
        "data_type": data_type, "width": 64, "height": 48
    })
    .to_string()
}

/// Ten samples: s0..s8 answer after crop and search, s9's policy is down.
fn rollout_fixture() -> Fixture {
    let f = Fixture { dir: tempfile::tempdir().unwrap() };
    fs::create_dir_all(f.path("data/images")).unwrap();
    let mut manifest = String::new();
    for i in 0..10 {
        let id = format!("s{i}");
        RgbImage::from_fn(64, 48, |x, y| Rgb([(x * 3 + i) as u8, (y * 5) as u8, 40]))
            .save(f.path(&format!("data/images/{id}.png")))
            .unwrap();
        let dt = ["photo", "panorama", "satellite"][i as usize % 3];
        manifest.push_str(&manifest_line(&id, 53.5511, 9.9937, ["Germany", "Hamburg", "Hamburg"], dt));
        manifest.push('\n');
    }
    f.write("data/manifest.jsonl", &manifest);
    let default = json!([CROP, SEARCH, answer("Mönckebergstraße, Hamburg, Germany")]);
    let mut samples = serde_json::Map::new();
    samples.insert("s1".into(), json!([answer("Munich, Bavaria, Germany")]));
    samples.insert("s9".into(), json!([{"error": "connection refused"}]));
    f.write("fixtures/policy.json", &json!({"default": default, "samples": samples}).to_string());
    f.write(
        "fixtures/search.json",
        &json!({"hamburg u-bahn": [{"title": "Hamburger Hochbahn", "snippet": "Operator of the Hamburg U-Bahn.", "url": "https://example.org/hochbahn"}]}).to_string(),
    );
    f.write(
        "fixtures/geocode.json",
        &json!({
            "Mönckebergstraße, Hamburg, Germany": {"lat": 53.5511, "lon": 10.0118},
            "Munich, Bavaria, Germany": {"lat": 48.1372, "lon": 11.5755}
        })
        .to_string(),
    );
    f.write(
        "run.toml",
        r#"
seed = 11
workers = 3
[paths]
manifest = "data/manifest.jsonl"
out = "out"
fixtures = "fixtures"
[policy]
kind = "scripted"
script = "policy.json"
[search]
kind = "fixture"
file = "search.json"
[geocode]
kind = "fixture"
file = "geocode.json"
"#,
    );
    f
}

#[test]
fn rollout_writes_log_and_summary_and_flags_protocol_errors() {
    let f = rollout_fixture();
    let out = f.run(&["rollout", "--deterministic"]);
    assert!(!out.status.success(), "s9 hits a protocol error, so the exit status is nonzero");
    let log = f.jsonl("out/trajectories.jsonl");
    assert_eq!(log.len(), 11);
    assert_eq!(log[0]["header"]["seed"], 11);
    let ids: Vec<&str> = log[1..].iter().map(|t| t["sample_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9"]);
    assert_eq!(log[10]["termination"], "protocol_error");
    let summary: Value = serde_json::from_str(&f.read("out/rollout_summary.json")).unwrap();
    assert_eq!(summary["terminations"]["answered"], 9);
    assert_eq!(summary["terminations"]["protocol_error"], 1);
    assert_eq!(summary["header"]["config_hash"], log[0]["header"]["config_hash"]);
    assert!(f.path("out/images").read_dir().unwrap().count() >= 1);
}

#[test]
fn deterministic_rollouts_are_byte_identical() {
    let f = rollout_fixture();
    f.run(&["rollout", "--deterministic", "--limit", "4"]);
    let first = f.read("out/trajectories.jsonl");
    f.run(&["rollout", "--deterministic", "--limit", "4", "--workers", "1"]);
    assert_eq!(first, f.read("out/trajectories.jsonl"));
}

#[test]
fn missing_manifest_fails_without_outputs() {
    let f = rollout_fixture();
    let out = f.run(&["rollout", "--manifest", "nope.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
    assert!(!f.path("out").exists());
}

#[test]
fn eval_reports_table_and_records() {
    let f = rollout_fixture();
    f.run(&["rollout", "--deterministic"]);
    let out = f.run(&["eval"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: Value = serde_json::from_str(&f.read("out/metrics.json")).unwrap();
    // s0, s2..s8 correct at every level; s1 country only; s9 unanswered.
    assert_eq!(metrics["n_samples"], 10);
    assert_eq!(metrics["country_acc"], 90.0);
    assert_eq!(metrics["city_acc"], 80.0);
    assert_eq!(metrics["under_3km_rate"], 80.0);
    let table = f.read("out/metrics.md");
    assert!(table.contains("Provincial/State %"));
    assert_eq!(f.jsonl("out/eval_records.jsonl").len(), 11);
}

#[test]
fn eval_lists_every_id_mismatch() {
    let f = rollout_fixture();
    f.run(&["rollout", "--deterministic", "--limit", "3"]);
    let out = f.run(&["eval", "--limit", "5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("in manifest but not in log (2): s3, s4"), "{err}");
}

#[test]
fn eval_rejects_an_empty_log() {
    let f = rollout_fixture();
    f.write("empty.jsonl", "");
    let out = f.run(&["eval", "--trajectories", f.path("empty.jsonl").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn reward_groups_and_advantages() {
    let f = rollout_fixture();
    f.run(&["rollout", "--deterministic", "--limit", "2"]);
    let out = f.run(&["reward", "--limit", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = f.jsonl("out/rewards.jsonl");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1]["reward"], 4.0);
    assert_eq!(rows[1]["advantage"], 0.0);
    assert_eq!(rows[2]["rung"], "country");
    let summary: Value = serde_json::from_str(&f.read("out/reward_summary.json")).unwrap();
    assert_eq!(summary["rung_fractions"]["city"], 0.5);
    assert_eq!(summary["rung_fractions"]["country"], 0.5);

    let out = f.run(&["reward", "--limit", "2", "--group-size", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("group 0: [s0, s1]"));
}

#[test]
fn reward_advantages_within_a_group() {
    let f = rollout_fixture();
    f.run(&["rollout", "--deterministic", "--limit", "2"]);
    let mut lines: Vec<Value> = f.jsonl("out/trajectories.jsonl");
    lines[2]["sample_id"] = json!("s0");
    let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
    f.write("grouped.jsonl", &text);
    let out = f.run(&["reward", "--trajectories", f.path("grouped.jsonl").to_str().unwrap(), "--group-size", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = f.jsonl("out/rewards.jsonl");
    let rewards: Vec<f64> = rows[1..].iter().map(|r| r["reward"].as_f64().unwrap()).collect();
    let advantages: Vec<f64> = rows[1..].iter().map(|r| r["advantage"].as_f64().unwrap()).collect();
    assert_eq!(rewards, [4.0, 1.0]);
    assert_eq!(advantages, [1.0, -1.0]);
}

fn curate_fixture() -> Fixture {
    let f = Fixture { dir: tempfile::tempdir().unwrap() };
    fs::create_dir_all(f.path("images")).unwrap();
    let mut manifest = String::new();
    for (i, id) in ["tower", "street"].iter().enumerate() {
        RgbImage::from_fn(120, 80, |x, y| Rgb([(x + i as u32) as u8, y as u8, 9])).save(f.path(&format!("images/{id}.png"))).unwrap();
        manifest.push_str(&manifest_line(id, 53.5511, 9.9937, ["Germany", "Hamburg", "Hamburg"], "photo"));
        manifest.push('\n');
    }
    f.write("manifest.jsonl", &manifest);
    f.write(
        "judge.json",
        &json!({"default": ["localizable"], "samples": {"tower#judge": ["landmark"]}}).to_string(),
    );
    f.write(
        "proposer.json",
        &json!({
            "samples": {
                "street#regions": [r#"[{"bbox_2d": [0, 0, 40, 40], "rationale": "Street sign."}, {"bbox_2d": [60, 10, 110, 70], "rationale": "Shop front."}]"#],
                "street#queries": [r#"[{"query": "hamburg u-bahn", "rationale": "Transit logo."}]"#],
                "street#final": [r#"{"reasoning": "Hamburg transit branding.", "answer": "Hamburg, Germany"}"#]
            }
        })
        .to_string(),
    );
    f.write(
        "search.json",
        &json!({"hamburg u-bahn": [{"title": "Hochbahn", "snippet": "Hamburg.", "url": "https://example.org/h"}]}).to_string(),
    );
    f.write(
        "run.toml",
        r#"
[paths]
manifest = "manifest.jsonl"
out = "out"
[policy]
kind = "scripted"
script = "judge.json"
[judge]
kind = "scripted"
script = "judge.json"
[proposer]
kind = "scripted"
script = "proposer.json"
[search]
kind = "fixture"
file = "search.json"
[curation]
turn_budget = 3
"#,
    );
    f
}

#[test]
fn curate_drops_landmarks_and_exports_conversations() {
    let f = curate_fixture();
    let out = f.run(&["curate", "--deterministic"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let drops = f.jsonl("out/drop_log.jsonl");
    assert_eq!(drops.len(), 2);
    assert_eq!(drops[1]["sample_id"], "tower");
    assert_eq!(drops[1]["verdict"], "landmark");
    let sft = f.jsonl("out/sft.jsonl");
    assert_eq!(sft.len(), 1);
    let assistant = sft[0]["messages"].as_array().unwrap().iter().filter(|m| m["role"] == "assistant").count();
    assert_eq!(assistant, 4);
    assert_eq!(f.jsonl("out/kept_manifest.jsonl").len(), 2);

    let before = f.read("out/sft.jsonl");
    let journal_lines = f.read("out/curation_journal.jsonl").lines().count();
    let out = f.run(&["curate", "--deterministic"]);
    assert!(out.status.success());
    assert_eq!(f.read("out/sft.jsonl"), before);
    assert_eq!(f.read("out/curation_journal.jsonl").lines().count(), journal_lines);
}

#[test]
fn curate_with_everything_dropped() {
    let f = curate_fixture();
    f.write("judge.json", &json!({"default": ["non-localizable"]}).to_string());
    let out = f.run(&["curate"]);
    assert!(out.status.success());
    assert_eq!(f.read("out/sft.jsonl"), "");
    assert_eq!(f.jsonl("out/drop_log.jsonl").len(), 3);
}
