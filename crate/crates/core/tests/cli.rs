mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;
use tempfile::TempDir;

fn mlid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlid"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mlid(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn read(p: &str) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn json(p: &str) -> Value {
    serde_json::from_str(&read(p)).unwrap()
}

fn labels_by_id(jsonl: &str) -> Vec<(String, String)> {
    jsonl
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["id"].as_str().unwrap().to_string(),
                v["label"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn annotate_worked_examples() {
    let dir = TempDir::new().unwrap();
    let corpus = fixture("worked_examples.jsonl").display().to_string();
    let p11 = path(&dir, "p11.jsonl");
    ok(&[
        "annotate",
        "--corpus",
        &corpus,
        "--principle",
        "p11",
        "--out",
        &p11,
    ]);
    let labels = labels_by_id(&read(&p11));
    let get = |id: &str| {
        labels
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, l)| l.clone())
            .unwrap()
    };
    assert_eq!(
        [get("ex-1"), get("ex-2"), get("ex-3"), get("ex-4")],
        ["en", "zh", "zh", "en"]
    );

    let manifest = json(&format!("{p11}.manifest.json"));
    assert_eq!(manifest["command"], "annotate");
    let digest = manifest["inputs"][&corpus].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));

    let eval = path(&dir, "eval.json");
    let spec = format!("a={p11}");
    let spec2 = format!("b={p11}");
    ok(&[
        "eval",
        "--verdicts",
        &spec,
        "--verdicts",
        &spec2,
        "--out",
        &eval,
    ]);
    let report = json(&eval);
    assert_eq!(report["agreement"]["cells"][0][1].as_f64().unwrap(), 1.0);
}

#[test]
fn exit_codes_and_cleanup() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "v.jsonl");
    let missing = mlid(&[
        "annotate",
        "--corpus",
        "/nonexistent.jsonl",
        "--principle",
        "p11",
        "--out",
        &out,
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!Path::new(&out).exists());

    assert_eq!(
        mlid(&["annotate", "--principle", "p11"]).status.code(),
        Some(2)
    );

    let corpus = path(&dir, "mono.jsonl");
    std::fs::write(
        &corpus,
        "{\"id\":\"a\",\"tokens\":[{\"surface\":\"hi\",\"lid\":\"en\"}]}\n{\"id\":\"b\",\"tokens\":[{\"surface\":\"yo\",\"lid\":\"en\"}]}\n",
    )
    .unwrap();
    let post = path(&dir, "post.csv");
    std::fs::write(&post, "id,p_0,p_1\na,0.9,0.1\nb,0.8,0.2\n").unwrap();
    let model = path(&dir, "model.json");
    let single = mlid(&[
        "train-map",
        "--corpus",
        &corpus,
        "--posteriors",
        &post,
        "--source",
        "lid",
        "--out",
        &model,
    ]);
    assert_eq!(single.status.code(), Some(3));
    assert!(!Path::new(&model).exists());
}

#[test]
fn seeded_pipeline_is_byte_identical() {
    let run = |dir: &TempDir| -> Vec<String> {
        let syn = path(dir, "syn");
        ok(&[
            "--seed",
            "7",
            "synth",
            "--count",
            "200",
            "--mono-count",
            "300",
            "--out",
            &syn,
        ]);
        let corpus = format!("{syn}/corpus.jsonl");
        let mono_en = format!("{syn}/mono_en.jsonl");
        let mono_zh = format!("{syn}/mono_zh.jsonl");
        let lex = format!("{syn}/lexicon.tsv");
        let fw = format!("{syn}/function_words.tsv");
        let lm1 = path(dir, "en.lm.json");
        let lm2 = path(dir, "zh.lm.json");
        ok(&[
            "train-lm",
            "--corpus",
            &mono_en,
            "--language",
            "en",
            "--out",
            &lm1,
        ]);
        ok(&[
            "train-lm",
            "--corpus",
            &mono_zh,
            "--language",
            "zh",
            "--out",
            &lm2,
        ]);
        let p2 = path(dir, "p2.jsonl");
        ok(&[
            "annotate",
            "--corpus",
            &corpus,
            "--principle",
            "p2",
            "--function-words",
            &fw,
            "--out",
            &p2,
        ]);
        let p12 = path(dir, "p12.jsonl");
        ok(&[
            "annotate",
            "--corpus",
            &corpus,
            "--principle",
            "p12",
            "--lexicon",
            &lex,
            "--lm1",
            &lm1,
            "--lm2",
            &lm2,
            "--log-alpha",
            "0",
            "--out",
            &p12,
        ]);
        let post = path(dir, "post.csv");
        let mut csv = String::from("id,p_0,p_1,p_2\n");
        for (i, line) in read(&p2).lines().enumerate() {
            let v: Value = serde_json::from_str(line).unwrap();
            let a = if v["label"] == "en" { 0.7 } else { 0.2 };
            let b = 0.05 + 0.01 * (i % 5) as f64;
            csv.push_str(&format!(
                "{},{a},{b},{}\n",
                v["id"].as_str().unwrap(),
                1.0 - a - b
            ));
        }
        std::fs::write(&post, csv).unwrap();
        let model = path(dir, "map.json");
        ok(&[
            "--seed",
            "3",
            "train-map",
            "--corpus",
            &corpus,
            "--posteriors",
            &post,
            "--source",
            "p2",
            "--verdicts",
            &p2,
            "--epochs",
            "50",
            "--out",
            &model,
        ]);
        let eval = path(dir, "eval.json");
        let truth = format!("{syn}/truth.csv");
        let a = format!("p2={p2}");
        let b = format!("p12={p12}");
        ok(&[
            "eval",
            "--verdicts",
            &a,
            "--verdicts",
            &b,
            "--truth",
            &truth,
            "--out",
            &eval,
        ]);
        [corpus, p2, p12, model, eval, lm1]
            .iter()
            .map(|p| read(p))
            .collect()
    };
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    let a = run(&first);
    let b = run(&second);
    for (x, y) in a.iter().zip(&b) {
        assert!(x == y, "outputs differ");
    }
    let report: Value = serde_json::from_str(&a[4]).unwrap();
    assert_eq!(
        report["systems"][0]["truth"]["f1_macro_covered"]
            .as_f64()
            .unwrap(),
        1.0
    );
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = TempDir::new().unwrap();
    let corpus = fixture("worked_examples.jsonl").display().to_string();
    let out = path(&dir, "b.jsonl");
    let config = path(&dir, "config.json");
    std::fs::write(
        &config,
        format!("{{\"principle\": \"baseline\", \"out\": \"{out}\"}}"),
    )
    .unwrap();
    ok(&["annotate", "--corpus", &corpus, "--config", &config]);
    let labels = labels_by_id(&read(&out));
    assert!(labels.iter().any(|(id, l)| id == "ex-3" && l == "zh"));
    let manifest = json(&format!("{out}.manifest.json"));
    assert_eq!(
        manifest["config"]["command"]["annotate"]["principle"],
        "baseline"
    );
}
