//! Wire messages: operator commands in, acknowledgments and events out.
//! Every message is one JSON object per line with a `type` tag.

use orion_core::world::MutationKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Start a natural-language task; refused while one is running.
    Task {
        text: String,
    },
    /// Change the world at the next tick boundary. An added object with id 0
    /// is given a fresh id.
    Mutate {
        mutation: MutationKind,
    },
    Pause,
    Resume,
    /// Advance `n` ticks, then hold.
    Step {
        n: u64,
    },
    /// Real-time multiplier for live pacing.
    Speed {
        x: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub client_id: String,
    pub request_id: u64,
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    /// Not a well-formed command.
    Malformed,
    /// The world refused the mutation.
    InvalidMutation,
    /// A task is already running.
    TaskConflict,
    /// The client already used this request id.
    DuplicateRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack {
        client_id: String,
        request_id: u64,
        /// Tick boundary at which the command took effect.
        tick: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object_id: Option<u32>,
    },
    Rejected {
        client_id: String,
        request_id: Option<u64>,
        code: RejectCode,
        message: String,
    },
}

/// Sent to every client when a task ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "task_done")]
pub struct TaskDone {
    pub task_index: usize,
    pub command: String,
    pub success: bool,
    pub planner_steps: usize,
    pub sim_ticks: u64,
    /// The task's transcript records, one JSON line each.
    pub transcript: Vec<String>,
}

impl Reply {
    pub fn rejected(
        client_id: &str,
        request_id: Option<u64>,
        code: RejectCode,
        message: impl Into<String>,
    ) -> Self {
        Reply::Rejected {
            client_id: client_id.into(),
            request_id,
            code,
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reply serializes")
    }
}

/// Parses one line. `default_client` names the sender when the message has
/// no `client_id`. Failures come back as a ready-to-send rejection.
pub fn parse_envelope(line: &str, default_client: &str) -> Result<Envelope, Reply> {
    let malformed = |rid: Option<u64>, client: &str, msg: String| {
        Reply::rejected(client, rid, RejectCode::Malformed, msg)
    };
    let mut value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| malformed(None, default_client, format!("not JSON: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| malformed(None, default_client, "expected a JSON object".into()))?;
    let client_id = match obj.remove("client_id") {
        None => default_client.to_string(),
        Some(serde_json::Value::String(s)) => s,
        Some(_) => {
            return Err(malformed(
                None,
                default_client,
                "client_id must be a string".into(),
            ))
        }
    };
    let request_id = match obj.remove("request_id") {
        Some(v) => v.as_u64().ok_or_else(|| {
            malformed(
                None,
                &client_id,
                "request_id must be a non-negative integer".into(),
            )
        })?,
        None => return Err(malformed(None, &client_id, "missing request_id".into())),
    };
    let command: Command = serde_json::from_value(value.clone())
        .map_err(|e| malformed(Some(request_id), &client_id, e.to_string()))?;
    // Unit variants of a tagged enum ignore extra keys, so check them here.
    let known = serde_json::to_value(&command).expect("command serializes");
    if let Some(extra) = value
        .as_object()
        .and_then(|o| o.keys().find(|k| known.get(k.as_str()).is_none()))
    {
        return Err(malformed(
            Some(request_id),
            &client_id,
            format!("unknown field `{extra}`"),
        ));
    }
    validate(&command).map_err(|m| malformed(Some(request_id), &client_id, m))?;
    Ok(Envelope {
        client_id,
        request_id,
        command,
    })
}

fn validate(c: &Command) -> Result<(), String> {
    match c {
        Command::Task { text } if text.trim().is_empty() => Err("task text is empty".into()),
        Command::Step { n: 0 } => Err("step count must be positive".into()),
        Command::Speed { x } if !(x.is_finite() && *x > 0.0) => {
            Err("speed must be a positive number".into())
        }
        _ => Ok(()),
    }
}
