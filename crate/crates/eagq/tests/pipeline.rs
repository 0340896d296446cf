//! End-to-end tests of the command-line binary: every subcommand runs
//! as a real process, outputs re-parse under the library parsers, and
//! reruns with identical inputs produce identical bytes.

use eagq::bayes::{parse_cpt_report, BayesNet};
use eagq::eag::Eag;
use eagq::evalkit::{parse_jsonl, GoldRecord, PredictionRecord};
use eagq::matcher::Answer;
use eagq::scene::SceneAnnotation;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eagq"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temp paths are UTF-8")
}

/// Generates the bundled scenes into a fresh directory, returning
/// (root, scenes dir).
fn showcase_fixtures(dir: &Path) -> (PathBuf, PathBuf) {
    let root = dir.join("fx");
    run_ok(&["gen-fixtures", "--out", path_str(&root), "--kind", "showcase"]);
    let scenes = root.join("scenes");
    (root, scenes)
}

#[test]
fn three_player_scene_counts_three() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (_root, scenes) = showcase_fixtures(tmp.path());
    let eag = tmp.path().join("trio.eag");
    let done = tmp.path().join("trio.done.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("trio.json")),
        "--out",
        path_str(&eag),
    ]);
    run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);
    let out = run_ok(&["query", "--eag", path_str(&done), "--template", "Q7"]);
    assert_eq!(stdout_of(&out), "{\"kind\":\"count\",\"payload\":3}\n");
}

#[test]
fn full_pipeline_matches_planted_answers() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (root, scenes) = showcase_fixtures(tmp.path());
    let gold: Vec<GoldRecord> =
        parse_jsonl(&std::fs::read_to_string(root.join("answers.jsonl")).expect("answers file"))
            .expect("gold parses");
    assert!(!gold.is_empty());

    // Complete every scene once, then answer each gold query through
    // the binary and score the predictions with `eval`.
    let mut predictions = Vec::new();
    let mut completed: std::collections::BTreeMap<String, PathBuf> = Default::default();
    for record in &gold {
        let done = completed.entry(record.scene_id.clone()).or_insert_with(|| {
            let eag = tmp.path().join(format!("{}.eag", record.scene_id));
            let done = tmp.path().join(format!("{}.done.eag", record.scene_id));
            run_ok(&[
                "build-eag",
                "--scene",
                path_str(&scenes.join(format!("{}.json", record.scene_id))),
                "--out",
                path_str(&eag),
            ]);
            run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);
            done
        });
        let out = run_ok(&[
            "query",
            "--eag",
            path_str(done),
            "--template",
            &record.query_id,
        ]);
        let answer = Answer::from_json(stdout_of(&out).trim()).expect("answer parses");
        predictions.push(PredictionRecord {
            scene_id: record.scene_id.clone(),
            query_id: record.query_id.clone(),
            answer,
        });
    }
    let pred_path = tmp.path().join("preds.jsonl");
    std::fs::write(&pred_path, eagq::evalkit::render_jsonl(&predictions)).expect("write");

    let table = run_ok(&[
        "eval",
        "--pred",
        path_str(&pred_path),
        "--gold",
        path_str(&root.join("answers.jsonl")),
    ]);
    assert!(
        stdout_of(&table).contains("overall"),
        "table output names the overall row"
    );
    let machine = run_ok(&[
        "eval",
        "--pred",
        path_str(&pred_path),
        "--gold",
        path_str(&root.join("answers.jsonl")),
        "--format",
        "machine",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&stdout_of(&machine)).expect("machine report parses");
    assert_eq!(
        report["overall"].as_f64(),
        Some(1.0),
        "binary answers must match every planted reference"
    );
}

#[test]
fn outputs_reparse_under_module_parsers() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (root, scenes) = showcase_fixtures(tmp.path());

    for entry in std::fs::read_dir(&scenes).expect("scenes dir") {
        let path = entry.expect("entry").path();
        let text = std::fs::read_to_string(&path).expect("scene file");
        SceneAnnotation::from_json(&text).expect("generated scene reparses");
    }
    let _: Vec<GoldRecord> =
        parse_jsonl(&std::fs::read_to_string(root.join("answers.jsonl")).expect("file"))
            .expect("gold records reparse");

    let eag = tmp.path().join("s.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("showcase.json")),
        "--out",
        path_str(&eag),
    ]);
    Eag::from_json(&std::fs::read_to_string(&eag).expect("file")).expect("graph reparses");

    let done = tmp.path().join("s.done.eag");
    run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);
    Eag::from_json(&std::fs::read_to_string(&done).expect("file"))
        .expect("completed graph reparses");

    let role_dir = tmp.path().join("role");
    run_ok(&[
        "gen-fixtures",
        "--out",
        path_str(&role_dir),
        "--kind",
        "role-train",
        "--count",
        "40",
        "--seed",
        "7",
    ]);
    let model = tmp.path().join("role.model");
    run_ok(&[
        "learn",
        "--scene",
        path_str(&role_dir.join("scenes")),
        "--target",
        "role",
        "--out",
        path_str(&model),
    ]);
    BayesNet::from_json(&std::fs::read_to_string(&model).expect("file")).expect("model reparses");

    let table = run_ok(&["report-cpt", "--model", path_str(&model)]);
    parse_cpt_report(&stdout_of(&table)).expect("percent table reparses");
    let machine = run_ok(&["report-cpt", "--model", path_str(&model), "--format", "machine"]);
    BayesNet::from_json(&stdout_of(&machine)).expect("machine report reparses");

    let answer = run_ok(&["query", "--eag", path_str(&done), "--template", "Q2"]);
    Answer::from_json(stdout_of(&answer).trim()).expect("answer reparses");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().expect("tempdir");
    for kind in ["role-train", "team-train"] {
        let a = tmp.path().join(format!("{kind}-a"));
        let b = tmp.path().join(format!("{kind}-b"));
        for dir in [&a, &b] {
            run_ok(&[
                "gen-fixtures",
                "--out",
                path_str(dir),
                "--kind",
                kind,
                "--count",
                "25",
                "--seed",
                "42",
            ]);
        }
        for entry in std::fs::read_dir(a.join("scenes")).expect("scenes dir") {
            let pa = entry.expect("entry").path();
            let pb = b.join("scenes").join(pa.file_name().expect("name"));
            assert_eq!(
                std::fs::read(&pa).expect("file"),
                std::fs::read(&pb).expect("twin file"),
                "regenerated scene differs: {}",
                pa.display()
            );
        }
    }

    let (_, scenes) = showcase_fixtures(tmp.path());
    let x = tmp.path().join("x.eag");
    let y = tmp.path().join("y.eag");
    for out in [&x, &y] {
        run_ok(&[
            "build-eag",
            "--scene",
            path_str(&scenes.join("crowd.json")),
            "--out",
            path_str(out),
        ]);
    }
    assert_eq!(
        std::fs::read(&x).expect("file"),
        std::fs::read(&y).expect("file"),
        "graph construction must be deterministic"
    );

    let role_dir = tmp.path().join("role");
    run_ok(&[
        "gen-fixtures",
        "--out",
        path_str(&role_dir),
        "--kind",
        "role-train",
        "--count",
        "30",
        "--seed",
        "1",
    ]);
    let m1 = tmp.path().join("m1.model");
    let m2 = tmp.path().join("m2.model");
    for model in [&m1, &m2] {
        run_ok(&[
            "learn",
            "--scene",
            path_str(&role_dir.join("scenes")),
            "--target",
            "role",
            "--out",
            path_str(model),
        ]);
    }
    assert_eq!(
        std::fs::read(&m1).expect("file"),
        std::fs::read(&m2).expect("file"),
        "learning must be deterministic"
    );
}

#[test]
fn infer_on_complete_graph_warns_and_passes_through() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (_, scenes) = showcase_fixtures(tmp.path());
    let eag = tmp.path().join("s.eag");
    let done = tmp.path().join("s.done.eag");
    let again = tmp.path().join("s.again.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("showcase.json")),
        "--out",
        path_str(&eag),
    ]);
    run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);
    let out = run_ok(&["infer", "--eag", path_str(&done), "--out", path_str(&again)]);
    assert!(
        stderr_of(&out).contains("warning"),
        "second inference must warn, got: {}",
        stderr_of(&out)
    );
    assert_eq!(
        std::fs::read(&done).expect("file"),
        std::fs::read(&again).expect("file"),
        "second inference must pass the graph through unchanged"
    );
}

#[test]
fn query_file_and_template_answers_agree() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (_, scenes) = showcase_fixtures(tmp.path());
    let eag = tmp.path().join("s.eag");
    let done = tmp.path().join("s.done.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("showcase.json")),
        "--out",
        path_str(&eag),
    ]);
    run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);

    let query = tmp.path().join("count-players.q");
    std::fs::write(&query, "ask num(?p) {\n  (?p:person, role, \"player\")\n}\n")
        .expect("write query");
    let from_file = run_ok(&["query", "--eag", path_str(&done), "--query", path_str(&query)]);
    let from_template = run_ok(&["query", "--eag", path_str(&done), "--template", "Q7"]);
    assert_eq!(stdout_of(&from_file), stdout_of(&from_template));
}

#[test]
fn error_families_map_to_distinct_exit_codes() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (root, scenes) = showcase_fixtures(tmp.path());
    let eag = tmp.path().join("s.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("showcase.json")),
        "--out",
        path_str(&eag),
    ]);

    let showcase_scene = scenes.join("showcase.json");
    let roles_file = root.join("roles.jsonl");
    let answers_file = root.join("answers.jsonl");
    let cases: Vec<(Vec<&str>, i32, &str)> = vec![
        // Unknown flag: usage error from the argument parser.
        (vec!["build-eag", "--no-such-flag"], 2, ""),
        // Missing input file.
        (vec!["query", "--eag", "/no/such/file", "--template", "Q1"], 3, "io"),
        // A scene that does not parse.
        (vec!["build-eag", "--scene", path_str(&eag)], 4, "scene"),
        // A graph that does not parse.
        (
            vec!["query", "--eag", path_str(&showcase_scene), "--template", "Q1"],
            5,
            "eag",
        ),
        // An unknown template name.
        (vec!["query", "--eag", path_str(&eag), "--template", "Q9"], 7, "query"),
        // Predictions that cover none of the gold records.
        (
            vec![
                "eval",
                "--pred",
                path_str(&roles_file),
                "--gold",
                path_str(&answers_file),
            ],
            9,
            "eval",
        ),
    ];
    for (args, expected_code, family) in cases {
        let out = run(&args);
        assert_eq!(
            out.status.code(),
            Some(expected_code),
            "command {args:?}: stderr {}",
            stderr_of(&out)
        );
        if !family.is_empty() {
            let diagnostic: serde_json::Value = serde_json::from_str(stderr_of(&out).trim())
                .unwrap_or_else(|e| {
                    panic!(
                        "stderr of {args:?} is not one JSON object ({e}): {}",
                        stderr_of(&out)
                    )
                });
            assert_eq!(
                diagnostic["error"]["family"].as_str(),
                Some(family),
                "wrong family for {args:?}"
            );
        }
        assert!(
            out.stdout.is_empty(),
            "failed command {args:?} must not print results"
        );
    }

    // Inference with a model that classifies something other than the
    // graph's hidden attributes.
    let team_dir = tmp.path().join("team");
    run_ok(&[
        "gen-fixtures",
        "--out",
        path_str(&team_dir),
        "--kind",
        "team-train",
        "--count",
        "30",
        "--seed",
        "2",
    ]);
    let team_model = tmp.path().join("team.model");
    run_ok(&[
        "learn",
        "--scene",
        path_str(&team_dir.join("scenes")),
        "--target",
        "team",
        "--out",
        path_str(&team_model),
    ]);
    // Team-status inference needs filled roles; on an incomplete graph
    // the failure is an inference error, exit 6.
    let out = run(&[
        "infer",
        "--eag",
        path_str(&eag),
        "--model",
        path_str(&team_model),
        "--out",
        path_str(&tmp.path().join("t.eag")),
    ]);
    assert_eq!(out.status.code(), Some(6), "stderr: {}", stderr_of(&out));
}

#[test]
fn team_model_routes_into_team_status_posteriors() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let (_, scenes) = showcase_fixtures(tmp.path());
    let eag = tmp.path().join("s.eag");
    let done = tmp.path().join("s.done.eag");
    run_ok(&[
        "build-eag",
        "--scene",
        path_str(&scenes.join("showcase.json")),
        "--out",
        path_str(&eag),
    ]);
    run_ok(&["infer", "--eag", path_str(&eag), "--out", path_str(&done)]);

    let team_dir = tmp.path().join("team");
    run_ok(&[
        "gen-fixtures",
        "--out",
        path_str(&team_dir),
        "--kind",
        "team-train",
        "--count",
        "200",
        "--seed",
        "5",
    ]);
    let team_model = tmp.path().join("team.model");
    run_ok(&[
        "learn",
        "--scene",
        path_str(&team_dir.join("scenes")),
        "--target",
        "team",
        "--out",
        path_str(&team_model),
    ]);

    // Inference with the team model emits one posterior line per team.
    let passthrough = tmp.path().join("s.team.eag");
    let out = run_ok(&[
        "infer",
        "--eag",
        path_str(&done),
        "--model",
        path_str(&team_model),
        "--out",
        path_str(&passthrough),
    ]);
    let lines: Vec<serde_json::Value> = stdout_of(&out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("posterior line parses"))
        .collect();
    let ids: Vec<&str> = lines.iter().filter_map(|l| l["id"].as_str()).collect();
    assert_eq!(ids, ["blue", "red"], "one line per team, sorted");

    // Q5 accepts the learned model in place of the built-in tables.
    let answer = run_ok(&[
        "query",
        "--eag",
        path_str(&done),
        "--template",
        "Q5",
        "--model",
        path_str(&team_model),
    ]);
    assert_eq!(stdout_of(&answer), "{\"kind\":\"label\",\"payload\":\"red\"}\n");
}
