//! End-to-end contract of the `ispace` binary: JSON documents round-trip
//! through files, identical invocations print identical bytes, and every
//! documented exit code is produced by the failure class it stands for.
//!
//! 0 ok / 1 property fails / 2 bad input / 3 no solution / 4 cap exceeded.

use std::path::{Path, PathBuf};
use std::process::Command;

use ispace::filters::{localization_task_machine, BeliefState};
use ispace::io::SystemDoc;
use ispace::partition::Labeling;
use ispace::plan::ExternalModel;
use ispace::ts::{LabeledSystem, TransitionSystem};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ispace")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(bin()).args(args).output().expect("the binary runs");
    Run {
        code: out.status.code().expect("the binary exits normally"),
        stdout: String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    }
}

fn write_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).expect("temp files are writable");
    path
}

fn arg(path: &Path) -> &str {
    path.to_str().expect("temp paths are UTF-8")
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("expected JSON, got {e}:\n{text}"))
}

/// Three states where 0 and 1 share a label but step under the only symbol
/// to differently labeled successors.
fn insufficient_doc() -> String {
    let ts = TransitionSystem::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec!["u".into()],
        vec![(0, 0, 1), (1, 0, 2), (2, 0, 2)],
    )
    .unwrap();
    let sys = LabeledSystem::new(ts, Labeling::from_ids(vec![0, 0, 1], None)).unwrap();
    ispace::io::emit_json(&SystemDoc::from_labeled(&sys))
}

#[test]
fn documents_round_trip_and_output_is_deterministic() {
    let dir = TempDir::new().unwrap();

    // Generated systems parse back into the library types.
    let gen = run(&["random", "--states", "5", "--symbols", "2", "--seed", "11"]);
    assert_eq!(gen.code, 0, "stderr: {}", gen.stderr);
    let doc: SystemDoc = serde_json::from_str(&gen.stdout).expect("a system document");
    let ts = doc.to_transition_system().unwrap();
    assert_eq!(ts.state_count(), 5);
    assert!(ts.check_determinism().holds());
    assert!(ts.check_fullness().holds());

    // Same invocation, byte-identical output; -o moves it into a file.
    let again = run(&["random", "--states", "5", "--symbols", "2", "--seed", "11"]);
    assert_eq!(again.stdout, gen.stdout);
    let model = dir.path().join("model.json");
    let filed = run(&[
        "random", "--states", "5", "--symbols", "2", "--seed", "11", "-o", arg(&model),
    ]);
    assert_eq!(filed.code, 0);
    assert_eq!(filed.stdout, "", "-o must leave stdout empty");
    assert_eq!(std::fs::read_to_string(&model).unwrap(), gen.stdout);

    // A deterministic, full, unlabeled system passes every check.
    let check = run(&["check", arg(&model)]);
    assert_eq!(check.code, 0, "stderr: {}", check.stderr);
    let report = json(&check.stdout);
    assert_eq!(report["deterministic"]["verdict"], "deterministic");
    assert_eq!(report["full"]["verdict"], "full");
    assert_eq!(report.get("sufficient"), None);

    // DOT export renders the same file.
    let dot = run(&["export-dot", arg(&model)]);
    assert_eq!(dot.code, 0);
    assert!(dot.stdout.starts_with("digraph system {"));
    assert!(dot.stdout.contains("n0 ->"));
    assert!(dot.stdout.ends_with("}\n"));

    // Minimization reports feed back in as partition documents.
    let labeled = run(&[
        "random", "--states", "6", "--symbols", "2", "--seed", "3", "--labels", "2",
    ]);
    assert_eq!(labeled.code, 0);
    let sys = write_file(&dir, "labeled.json", &labeled.stdout);
    let minimized = run(&["minimize", arg(&sys)]);
    assert_eq!(minimized.code, 0, "stderr: {}", minimized.stderr);
    let report = json(&minimized.stdout);
    assert_eq!(report["sufficient"], Value::Bool(true));
    let partition = write_file(
        &dir,
        "partition.json",
        &serde_json::to_string(&serde_json::json!({ "labels": report["partition"]["labels"] }))
            .unwrap(),
    );
    let quotient = run(&["quotient", arg(&sys), "--partition", arg(&partition)]);
    assert_eq!(quotient.code, 0, "stderr: {}", quotient.stderr);
    let qdoc: SystemDoc = serde_json::from_str(&quotient.stdout).expect("a system document");
    assert!(qdoc.labels.is_some());
    qdoc.to_labeled().unwrap();
}

#[test]
fn failing_properties_exit_one_and_print_the_witness() {
    let dir = TempDir::new().unwrap();
    let sys = write_file(&dir, "bad.json", &insufficient_doc());

    // The labeling is insufficient; the report carries the violating pair.
    let check = run(&["check", arg(&sys), "--property", "sufficiency"]);
    assert_eq!(check.code, 1);
    let report = json(&check.stdout);
    assert_eq!(report["sufficient"]["verdict"], "violation");
    for field in ["state_a", "state_b", "symbol", "succ_a", "succ_b"] {
        assert!(report["sufficient"][field].is_u64(), "missing witness field {field}");
    }

    // The same document is still deterministic.
    let det = run(&["check", arg(&sys), "--property", "determinism"]);
    assert_eq!(det.code, 0);

    // A nondeterministic system fails the determinism check with both targets.
    let fork = serde_json::json!({
        "states": ["s0", "s1", "s2"],
        "alphabet": ["u"],
        "transitions": [[0, 0, 1], [0, 0, 2]],
    });
    let fork = write_file(&dir, "fork.json", &fork.to_string());
    let det = run(&["check", arg(&fork), "--property", "determinism"]);
    assert_eq!(det.code, 1);
    let report = json(&det.stdout);
    assert_eq!(report["deterministic"]["verdict"], "nondeterministic");
    assert_eq!(report["deterministic"]["state"], 0);

    // Deriving a filter from an insufficient partition fails with the
    // machine-readable witness on stdout.
    let tree = run(&[
        "build-tree", "--view", "observations", "--observations", "a,b", "--depth", "2",
    ]);
    assert_eq!(tree.code, 0);
    let tree = write_file(&dir, "tree.json", &tree.stdout);
    let partition =
        write_file(&dir, "lumpy.json", "{\"labels\": [0, 0, 0, 1, 1, 1, 1]}\n");
    let filter = run(&["filter", "--tree", arg(&tree), "--partition", arg(&partition)]);
    assert_eq!(filter.code, 1);
    let witness = json(&filter.stdout);
    assert_eq!(witness["error"], "not_sufficient");
    assert!(witness["witness"]["state_a"].is_u64());
    assert!(filter.stderr.contains("not sufficient"));
}

#[test]
fn malformed_input_exits_two() {
    let dir = TempDir::new().unwrap();

    // Truncated JSON.
    let broken = write_file(&dir, "broken.json", "{\"states\": [");
    let r = run(&["check", arg(&broken)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("malformed JSON"), "stderr: {}", r.stderr);

    // Valid JSON of the wrong shape.
    let shape = write_file(&dir, "shape.json", "{\"states\": 3}");
    assert_eq!(run(&["check", arg(&shape)]).code, 2);

    // A structurally fine document missing what the command needs.
    let plain = run(&["random", "--states", "3", "--symbols", "1", "--seed", "0"]);
    let plain = write_file(&dir, "plain.json", &plain.stdout);
    let r = run(&["minimize", arg(&plain)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("labels"), "stderr: {}", r.stderr);

    // Unknown subcommands and flags are usage errors.
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["check", arg(&plain), "--nope"]).code, 2);
}

#[test]
fn unsolvable_requests_exit_three() {
    let dir = TempDir::new().unwrap();

    // A branch whose targets carry different task labels admits no
    // sufficient refinement at all.
    let fork = serde_json::json!({
        "states": ["root", "left", "right"],
        "alphabet": ["u"],
        "transitions": [[0, 0, 1], [0, 0, 2], [1, 0, 1], [2, 0, 2]],
        "labels": [0, 1, 2],
    });
    let fork = write_file(&dir, "fork.json", &fork.to_string());
    let r = run(&["minimize", arg(&fork)]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    let witness = json(&r.stdout);
    assert_eq!(witness["error"], "no_sufficient_refinement");
    assert_eq!(witness["state"], 0);
    assert_eq!(witness["symbol"], 0);

    // Trials that label the same history prefix two ways cannot come from
    // any filter.
    let trials = serde_json::json!({
        "trials": [
            { "view": "observations", "events": [["y", "a"]], "labels": { "1": "left" } },
            { "view": "observations", "events": [["y", "a"]], "labels": { "1": "right" } },
        ]
    });
    let trials = write_file(&dir, "trials.json", &trials.to_string());
    let r = run(&[
        "learn", "--trials", arg(&trials), "--view", "observations",
        "--observations", "a,b",
    ]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("inconsistent trials"), "stderr: {}", r.stderr);

    // Localization can succeed here (state 0 announces itself by reaching
    // the pinging state), but clones 1 and 2 are indistinguishable forever,
    // so no plan guarantees it; synthesis reports the counterexample.
    let ts = TransitionSystem::new(
        vec!["herald".into(), "cloneA".into(), "cloneB".into(), "beacon".into()],
        vec!["step".into()],
        vec![(0, 0, 3), (1, 0, 1), (2, 0, 2), (3, 0, 3)],
    )
    .unwrap();
    let model = ExternalModel::new(
        ts,
        Labeling::from_ids(vec![0, 0, 0, 1], Some(vec!["quiet".into(), "ping".into()])),
    )
    .unwrap();
    let task =
        localization_task_machine(&model, &BeliefState::new(vec![0, 1, 2]), 1000).unwrap();
    let model_path =
        write_file(&dir, "clones.json", &ispace::io::emit_json(&SystemDoc::from_external(&model)));
    let task_path = write_file(
        &dir,
        "task.json",
        &ispace::io::emit_json(&SystemDoc::from_task_machine(&task)),
    );
    let r = run(&[
        "synthesize", "--model", arg(&model_path), "--task", arg(&task_path),
        "--prior", "0,1,2",
    ]);
    assert_eq!(r.code, 3, "stderr: {}", r.stderr);
    let report = json(&r.stdout);
    assert_eq!(report["feasible"], Value::Bool(false));
    assert!(report["state"].is_u64());
}

#[test]
fn exceeded_size_caps_exit_four() {
    let dir = TempDir::new().unwrap();

    // The depth-6 pairs tree over 2x2 symbols wants thousands of nodes.
    let r = run(&[
        "build-tree", "--view", "pairs", "--actions", "a,b", "--observations", "o,p",
        "--depth", "6", "--cap", "10",
    ]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("size limit exceeded"), "stderr: {}", r.stderr);

    // The corridor belief closure needs far more than two belief states.
    let world = run(&["gen-world", "--world", "corridor", "--bound", "2"]);
    assert_eq!(world.code, 0, "stderr: {}", world.stderr);
    let model = write_file(&dir, "corridor.json", &world.stdout);
    let r = run(&["belief", "--model", arg(&model), "--cap", "2"]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("size limit exceeded"), "stderr: {}", r.stderr);
}
