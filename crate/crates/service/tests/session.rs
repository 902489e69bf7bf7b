use std::time::Duration;

use orion_core::harness::library;
use orion_core::harness::run::{run_scenario, transcript_jsonl};
use orion_core::harness::{PlannerKind, RunOptions, Scenario};
use orion_core::world::MutationKind;
use orion_service::{spawn, Connection, SessionConfig, Snapshot};
use serde_json::{json, Value};

const WAIT: Duration = Duration::from_secs(120);

fn scenario(name: &str) -> Scenario {
    library::all()
        .into_iter()
        .chain([library::demo()])
        .find(|s| s.name == name)
        .expect("bundled scenario")
}

fn fast() -> SessionConfig {
    SessionConfig {
        speed: 1e6,
        ..SessionConfig::default()
    }
}

fn paused() -> SessionConfig {
    SessionConfig {
        start_paused: true,
        ..fast()
    }
}

/// Reads messages until one satisfies `pred`; returns everything read.
fn read_until(conn: &Connection, pred: impl Fn(&Value) -> bool) -> Vec<Value> {
    let mut seen = Vec::new();
    loop {
        let line = conn.rx.recv_timeout(WAIT).expect("message before timeout");
        let v: Value = serde_json::from_str(&line).expect("server sends JSON lines");
        let done = pred(&v);
        seen.push(v);
        if done {
            return seen;
        }
    }
}

fn reply_to(conn: &Connection, request_id: u64) -> Value {
    read_until(conn, |v| {
        v["request_id"] == request_id && (v["type"] == "ack" || v["type"] == "rejected")
    })
    .pop()
    .unwrap()
}

fn request(conn: &Connection, mut msg: Value, request_id: u64) -> Value {
    msg["request_id"] = json!(request_id);
    assert!(conn.send(msg.to_string()));
    reply_to(conn, request_id)
}

fn snapshot_ticks(msgs: &[Value]) -> Vec<u64> {
    msgs.iter()
        .filter(|v| v["type"] == "snapshot")
        .map(|v| v["tick"].as_u64().unwrap())
        .collect()
}

#[test]
fn fresh_session_shows_empty_map_and_root_only_graph() {
    let (h, _join) = spawn(scenario("a-01"), 1, RunOptions::default(), paused());
    let conn = h.connect("viewer");
    let first = read_until(&conn, |v| v["type"] == "snapshot")
        .pop()
        .unwrap();
    let snap: Snapshot = serde_json::from_value(first.clone()).expect("snapshot schema");
    assert_eq!(snap.tick, 0);
    assert!(snap.objects.is_empty());
    assert_eq!(snap.scene_graph, json!({"rooms": {}}));
    assert!(snap.task.paused);
    let keys: Vec<&str> = first
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    assert_eq!(
        keys,
        [
            "type",
            "tick",
            "robot",
            "grid_rle",
            "objects",
            "scene_graph",
            "frontiers",
            "plan_log",
            "task"
        ]
    );
    h.shutdown();
}

#[test]
fn submitted_task_transcript_matches_batch_run() {
    let s = scenario("a-01");
    let dir = tempfile::tempdir().unwrap();
    let cfg = SessionConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..fast()
    };
    let (h, join) = spawn(s.clone(), 1, RunOptions::default(), cfg);
    let conn = h.connect("operator");
    let ack = request(
        &conn,
        json!({"type": "task", "text": s.tasks[0].command}),
        1,
    );
    assert_eq!(ack["type"], "ack");
    assert_eq!(ack["tick"], 0);
    let msgs = read_until(&conn, |v| v["type"] == "task_done");
    let done = msgs.last().unwrap();

    let batch = run_scenario(&s, 1, &RunOptions::default());
    let expected = transcript_jsonl(&s, 1, PlannerKind::Oracle, &batch);
    let lines: Vec<&str> = expected.lines().skip(1).collect();
    let streamed: Vec<&str> = done["transcript"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_str().unwrap())
        .collect();
    assert_eq!(streamed, lines);
    assert_eq!(done["success"], batch.tasks[0].metrics.success);

    // The archive is written before clients hear the task ended, and the
    // polled snapshot already shows the outcome.
    let polled: Value = serde_json::from_str(&h.hub.latest_snapshot().unwrap()).unwrap();
    assert_eq!(polled["task"]["state"], "finished");
    assert_eq!(polled["task"]["success"], done["success"]);
    let archived = std::fs::read_to_string(dir.path().join("transcript.jsonl")).unwrap();
    assert_eq!(archived, expected);

    let ticks = snapshot_ticks(&msgs);
    assert!(
        ticks.windows(2).all(|w| w[0] < w[1]),
        "snapshot ticks must increase: {ticks:?}"
    );
    h.shutdown();
    join.join().unwrap().unwrap();
}

#[test]
fn each_rejection_has_its_own_code() {
    let (h, _join) = spawn(scenario("demo"), 1, RunOptions::default(), paused());
    let conn = h.connect("operator");
    assert_eq!(
        request(&conn, json!({"type": "task", "text": "find a monitor"}), 1)["type"],
        "ack"
    );
    let conflict = request(&conn, json!({"type": "task", "text": "find a printer"}), 2);
    assert_eq!(conflict["code"], "task_conflict");
    let dup = request(&conn, json!({"type": "pause"}), 2);
    assert_eq!(dup["code"], "duplicate_request");
    let bad = request(
        &conn,
        json!({"type": "mutate", "mutation": {"kind": "remove_object", "id": 999}}),
        3,
    );
    assert_eq!(bad["code"], "invalid_mutation");
    let wall = request(
        &conn,
        json!({"type": "mutate", "mutation": {"kind": "move_object", "id": 1, "to": {"x": -3.0, "y": 1.0}}}),
        4,
    );
    assert_eq!(wall["code"], "invalid_mutation");
    let malformed = request(&conn, json!({"type": "step", "n": "many"}), 5);
    assert_eq!(malformed["code"], "malformed");
    // Another client may reuse a request id.
    let other = h.connect("second");
    assert_eq!(request(&other, json!({"type": "pause"}), 1)["type"], "ack");
    h.shutdown();
}

#[test]
fn paused_session_advances_exactly_the_stepped_ticks() {
    let cfg = SessionConfig {
        snapshot_every: 1,
        ..paused()
    };
    let (h, _join) = spawn(scenario("demo"), 1, RunOptions::default(), cfg);
    let conn = h.connect("operator");
    request(&conn, json!({"type": "task", "text": "find a monitor"}), 1);
    let ack = request(&conn, json!({"type": "step", "n": 7}), 2);
    assert_eq!(ack["tick"], 0);
    let msgs = read_until(&conn, |v| v["type"] == "snapshot" && v["tick"] == 7);
    assert_eq!(snapshot_ticks(&msgs), (1..=7).collect::<Vec<u64>>());
    // Nothing moves until the next step; the pause ack proves the loop is idle at tick 7.
    let ack = request(&conn, json!({"type": "pause"}), 3);
    assert_eq!(ack["tick"], 7);
    assert!(conn.rx.recv_timeout(Duration::from_millis(200)).is_err());
    let ack = request(&conn, json!({"type": "step", "n": 1}), 4);
    assert_eq!(ack["tick"], 7);
    read_until(&conn, |v| v["type"] == "snapshot" && v["tick"] == 8);
    h.shutdown();
}

#[test]
fn monitor_added_mid_run_is_mapped_and_redirects_the_planner() {
    let s = scenario("demo");
    let (h, join) = spawn(s.clone(), 1, RunOptions::default(), paused());
    let conn = h.connect("operator");
    request(&conn, json!({"type": "task", "text": "find a monitor"}), 1);
    request(&conn, json!({"type": "step", "n": 30}), 2);
    read_until(&conn, |v| v["type"] == "snapshot" && v["tick"] == 30);
    let monitor = library::demo_monitor();
    let mutation = serde_json::to_value(MutationKind::AddObject { object: monitor }).unwrap();
    let ack = request(&conn, json!({"type": "mutate", "mutation": mutation}), 3);
    assert_eq!(ack["type"], "ack", "{ack}");
    assert_eq!(ack["tick"], 30);
    assert!(ack["object_id"].as_u64().unwrap() > 0);
    request(&conn, json!({"type": "resume"}), 4);
    let msgs = read_until(&conn, |v| v["type"] == "task_done");
    let done = msgs.last().unwrap();
    assert_eq!(done["success"], true);
    let seen_monitor = msgs.iter().filter(|v| v["type"] == "snapshot").any(|v| {
        v["objects"]
            .as_array()
            .unwrap()
            .iter()
            .any(|o| o["label"] == "monitor")
    });
    assert!(seen_monitor, "monitor never appeared in a snapshot");
    let actions = |lines: Vec<String>| -> Vec<String> {
        lines
            .iter()
            .map(|l| {
                serde_json::from_str::<Value>(l).unwrap()["action"]
                    .as_str()
                    .unwrap_or("")
                    .to_string()
            })
            .collect()
    };
    let live: Vec<String> = actions(
        done["transcript"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l.as_str().unwrap().to_string())
            .collect(),
    );
    let batch = run_scenario(&s, 1, &RunOptions::default());
    let unchanged = actions(
        batch.tasks[0]
            .result
            .transcript
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect(),
    );
    assert_eq!(
        live[0], unchanged[0],
        "the first decision precedes the mutation"
    );
    assert!(
        live[1].starts_with("goto(") && live[1].contains("monitor"),
        "{live:?}"
    );
    assert_ne!(live[1], unchanged[1]);
    assert!(!batch.tasks[0].metrics.success);
    h.shutdown();
    join.join().unwrap().unwrap();
}
