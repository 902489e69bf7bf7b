use orion_core::world::MutationKind;
use orion_service::{parse_envelope, Command, RejectCode, Reply};

fn parse(line: &str) -> Result<Command, (RejectCode, Option<u64>)> {
    parse_envelope(line, "anon")
        .map(|e| e.command)
        .map_err(|r| match r {
            Reply::Rejected {
                code, request_id, ..
            } => (code, request_id),
            other => panic!("unexpected reply {other:?}"),
        })
}

#[test]
fn every_command_kind_parses() {
    assert_eq!(
        parse(r#"{"type":"task","text":"find a monitor","request_id":1}"#),
        Ok(Command::Task {
            text: "find a monitor".into()
        })
    );
    assert_eq!(
        parse(r#"{"type":"pause","request_id":2}"#),
        Ok(Command::Pause)
    );
    assert_eq!(
        parse(r#"{"type":"resume","request_id":3}"#),
        Ok(Command::Resume)
    );
    assert_eq!(
        parse(r#"{"type":"step","n":5,"request_id":4}"#),
        Ok(Command::Step { n: 5 })
    );
    assert_eq!(
        parse(r#"{"type":"speed","x":2.5,"request_id":5}"#),
        Ok(Command::Speed { x: 2.5 })
    );
    let m = parse(r#"{"type":"mutate","request_id":6,"mutation":{"kind":"remove_object","id":3}}"#);
    assert_eq!(
        m,
        Ok(Command::Mutate {
            mutation: MutationKind::RemoveObject { id: 3 }
        })
    );
    let add = parse(
        r#"{"type":"mutate","request_id":7,"mutation":{"kind":"add_object","object":{"id":0,"label":"monitor","position":{"x":1.0,"y":2.0}}}}"#,
    );
    assert!(matches!(
        add,
        Ok(Command::Mutate {
            mutation: MutationKind::AddObject { .. }
        })
    ));
}

#[test]
fn client_id_defaults_to_connection_and_is_echoed() {
    let e = parse_envelope(r#"{"type":"pause","request_id":9}"#, "conn-4").unwrap();
    assert_eq!((e.client_id.as_str(), e.request_id), ("conn-4", 9));
    let e = parse_envelope(
        r#"{"type":"pause","request_id":9,"client_id":"console"}"#,
        "conn-4",
    )
    .unwrap();
    assert_eq!(e.client_id, "console");
}

#[test]
fn malformed_inputs_are_rejected_with_the_request_id_when_known() {
    let m = RejectCode::Malformed;
    assert_eq!(parse("not json"), Err((m, None)));
    assert_eq!(parse("[1,2]"), Err((m, None)));
    assert_eq!(parse(r#"{"type":"pause"}"#), Err((m, None)));
    assert_eq!(parse(r#"{"type":"pause","request_id":-1}"#), Err((m, None)));
    assert_eq!(
        parse(r#"{"type":"warp","request_id":1}"#),
        Err((m, Some(1)))
    );
    assert_eq!(
        parse(r#"{"type":"task","request_id":2}"#),
        Err((m, Some(2)))
    );
    assert_eq!(
        parse(r#"{"type":"task","text":"  ","request_id":3}"#),
        Err((m, Some(3)))
    );
    assert_eq!(
        parse(r#"{"type":"step","n":0,"request_id":4}"#),
        Err((m, Some(4)))
    );
    assert_eq!(
        parse(r#"{"type":"speed","x":0,"request_id":5}"#),
        Err((m, Some(5)))
    );
    assert_eq!(
        parse(r#"{"type":"pause","request_id":6,"florb":1}"#),
        Err((m, Some(6)))
    );
    assert_eq!(
        parse(r#"{"type":"mutate","request_id":7,"mutation":{"kind":"paint"}}"#),
        Err((m, Some(7)))
    );
}

#[test]
fn replies_use_the_documented_field_names() {
    let ack = Reply::Ack {
        client_id: "c".into(),
        request_id: 3,
        tick: 40,
        object_id: None,
    };
    let v: serde_json::Value = serde_json::from_str(&ack.to_line()).unwrap();
    assert_eq!(
        v,
        serde_json::json!({"type": "ack", "client_id": "c", "request_id": 3, "tick": 40})
    );
    let codes = [
        RejectCode::Malformed,
        RejectCode::InvalidMutation,
        RejectCode::TaskConflict,
        RejectCode::DuplicateRequest,
    ];
    let names: Vec<String> = codes
        .iter()
        .map(|c| {
            serde_json::to_value(c)
                .unwrap()
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(
        names,
        [
            "malformed",
            "invalid_mutation",
            "task_conflict",
            "duplicate_request"
        ]
    );
    let rej = Reply::rejected("c", Some(1), RejectCode::TaskConflict, "busy");
    let v: serde_json::Value = serde_json::from_str(&rej.to_line()).unwrap();
    assert_eq!(v["type"], "rejected");
    assert_eq!(v["code"], "task_conflict");
}
