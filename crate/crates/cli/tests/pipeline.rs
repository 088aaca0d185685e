//! End-to-end pipeline test: synth -> align -> lexicon -> globaltrait ->
//! train-eval -> project on a tiny fixture, plus CLI error contracts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_globaltrait")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_config(dir: &Path) {
    let out = dir.join("out");
    let text = format!(
        r#"
seed = 7

[paths]
output_dir = "{out}"

[paths.embeddings]
en = "{out}/fixtures/en.vec"
xx = "{out}/fixtures/xx.vec"

[paths.corpora]
en = "{out}/fixtures/en.jsonl"
xx = "{out}/fixtures/xx.jsonl"

[languages]
target = "en"
sources = ["xx"]

[corpus]
format = "pretokenized"

[alignment]
epochs = 1
iterations_per_epoch = 300
discriminator_hidden = 64
refine_rounds = 1

[lexicon]
size = 50
visualization_count = 30

[grid]
k = 2
models = ["Lgr-mono", "Lgr-GlobalTrait"]

[train]
epochs = 12
learning_rate = 0.01

[cnn]
filters_per_width = 4
fc_hidden = 8
t_max = 128

[synth]
users_per_language = [16, 16]
vocab_size = 400
dim = 10
trait_word_count = 20
tokens_per_user = 80
"#,
        out = out.display()
    );
    fs::write(dir.join("globaltrait.toml"), text).unwrap();
}

#[test]
fn full_pipeline_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_config(dir);

    run_ok(dir, &["synth"]);
    for lang in ["en", "xx"] {
        assert!(dir.join(format!("out/fixtures/{lang}.vec")).exists());
        assert!(dir.join(format!("out/fixtures/{lang}.jsonl")).exists());
    }
    assert!(dir.join("out/fixtures/ground_truth.json").exists());

    let stdout = run_ok(dir, &["align"]);
    assert!(stdout.contains("validation mean cosine"), "{stdout}");
    let map_path = dir.join("out/maps/semantic_xx.json");
    assert!(map_path.exists());
    let first = fs::read(&map_path).unwrap();

    // Identical seed + config rerun must produce a byte-identical payload.
    run_ok(dir, &["align"]);
    let second = fs::read(&map_path).unwrap();
    assert_eq!(first, second, "align rerun is not byte-identical");

    run_ok(dir, &["lexicon"]);
    for lang in ["en", "xx"] {
        for t in ["Extr", "Agr", "Cons", "Emot", "Openn"] {
            assert!(dir.join(format!("out/lexicons/{lang}_{t}.json")).exists());
        }
    }

    run_ok(dir, &["globaltrait"]);
    for t in ["Extr", "Agr", "Cons", "Emot", "Openn"] {
        assert!(dir.join(format!("out/maps/trait_xx_{t}.json")).exists());
    }

    let stdout = run_ok(dir, &["train-eval"]);
    assert!(stdout.contains("Average"), "{stdout}");
    assert!(stdout.contains("Lgr-GlobalTrait"), "{stdout}");
    assert!(dir.join("out/reports/report_classification.json").exists());
    assert!(dir.join("out/reports/table_classification.txt").exists());

    let stdout = run_ok(
        dir,
        &["project", "--space", "trait:Agr", "--method", "pca"],
    );
    assert!(stdout.contains("separation ratio"), "{stdout}");
    let csv = fs::read_to_string(dir.join("out/projections/trait_Agr_pca_Agr.csv")).unwrap();
    assert!(csv.starts_with("word,language,x,y"));
    assert!(csv.lines().count() > 10);

    // Resolved-config snapshots accompany every command.
    for cmd in ["synth", "align", "lexicon", "globaltrait", "train-eval", "project"] {
        assert!(
            dir.join(format!("out/resolved_config_{cmd}.toml")).exists(),
            "missing snapshot for {cmd}"
        );
    }
}

#[test]
fn missing_inputs_produce_machine_readable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_config(dir);

    // align without fixtures: the .vec file is missing.
    let out = run(dir, &["align"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last_line = stderr.lines().last().unwrap_or_default();
    let payload: serde_json::Value =
        serde_json::from_str(last_line).expect("stderr ends with an error JSON");
    assert!(payload["error"].is_string());
    let chain = payload["chain"].as_array().unwrap();
    assert!(
        chain.iter().any(|c| c.as_str().unwrap().contains("xx.vec")
            || c.as_str().unwrap().contains("loading embeddings")),
        "error chain should name the missing path: {chain:?}"
    );

    // globaltrait before lexicon: the error directs to the producing step.
    run_ok(dir, &["synth"]);
    run_ok(dir, &["align"]);
    let out = run(dir, &["globaltrait"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("globaltrait lexicon"),
        "expected a pointer to `globaltrait lexicon`: {stderr}"
    );
}

#[test]
fn stale_inputs_are_refused_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_config(dir);
    run_ok(dir, &["synth"]);
    run_ok(dir, &["align"]);
    run_ok(dir, &["lexicon"]);

    // Tamper with a lexicon the globaltrait step consumes.
    let lex_path = dir.join("out/lexicons/xx_Agr.json");
    let mut lexicon: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&lex_path).unwrap()).unwrap();
    lexicon["language"] = serde_json::Value::String("tampered".into());
    fs::write(&lex_path, serde_json::to_string(&lexicon).unwrap()).unwrap();

    let out = run(dir, &["globaltrait"]);
    assert!(!out.status.success(), "tampered lexicon must be refused");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("modified"), "{stderr}");

    // --force proceeds. (The tampered language only affects metadata here.)
    let out = run(dir, &["globaltrait", "--force"]);
    assert!(
        out.status.success(),
        "--force should proceed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn missing_trait_score_error_names_user_and_trait() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_config(dir);
    run_ok(dir, &["synth"]);

    // Break one manifest record: drop the Openn score.
    let manifest = dir.join("out/fixtures/xx.jsonl");
    let text = fs::read_to_string(&manifest).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut record: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
    record["scores"].as_object_mut().unwrap().remove("Openn");
    lines[0] = record.to_string();
    fs::write(&manifest, lines.join("\n")).unwrap();

    let out = run(dir, &["lexicon"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Openn"), "{stderr}");
    assert!(stderr.contains("xx_u000"), "{stderr}");
}
