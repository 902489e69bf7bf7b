//! Prompt rendering, the chat-completion client, and strict parsing of the
//! planner's replies.

use std::fmt::Write as _;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::ActionRecord;
use crate::scene_graph::{split_name, SceneGraph};

pub const PLANNER_SYSTEM_TEMPLATE: &str = include_str!("../templates/planner_system.txt");
pub const ROOM_SYSTEM_TEMPLATE: &str = include_str!("../templates/room_system.txt");

pub const FORMAT_REMINDER: &str =
    "Respond with one command call on the first line and one line starting with \"Reasoning:\".";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        assert!(!content.is_empty(), "chat message content must be nonempty");
        Self { role, content }
    }
}

pub fn render_room_prompt(
    object_labels: &[String],
    candidate_rooms: &[String],
) -> Vec<ChatMessage> {
    assert!(!candidate_rooms.is_empty(), "room prompt needs candidates");
    let mut labels: Vec<&str> = object_labels.iter().map(String::as_str).collect();
    labels.sort_unstable();
    let user = format!(
        "Objects in this area: {}\nCandidate room labels: {}\nWhich candidate label fits this area best?",
        labels.join(", "),
        candidate_rooms.join(", ")
    );
    vec![
        ChatMessage::new(Role::System, ROOM_SYSTEM_TEMPLATE.trim_end()),
        ChatMessage::new(Role::User, user),
    ]
}

/// System message plus one user message holding, in order, the map, the
/// command history and feedback (each only when present), and the task.
pub fn render_planner_prompt(
    task: &str,
    graph_json: &str,
    history: &[ActionRecord],
    feedback: Option<&str>,
) -> Vec<ChatMessage> {
    let mut user = String::new();
    let _ = write!(user, "Map:\n{graph_json}\n\n");
    if !history.is_empty() {
        user.push_str("Command history:\n");
        for (i, rec) in history.iter().enumerate() {
            let _ = writeln!(
                user,
                "{}. {} -> {}",
                i + 1,
                rec.action_text(),
                rec.outcome.as_str()
            );
        }
        user.push('\n');
    }
    if let Some(fb) = feedback {
        let _ = write!(user, "Feedback:\n{fb}\n\n");
    }
    let _ = write!(user, "Task:\n{task}\n\n{FORMAT_REMINDER}");
    vec![
        ChatMessage::new(Role::System, PLANNER_SYSTEM_TEMPLATE.trim_end()),
        ChatMessage::new(Role::User, user),
    ]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    Decode(String),
}

/// Anything that can answer a chat transcript.
pub trait ChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            model: model.into(),
            temperature: 0.0,
            timeout_secs: 30,
        }
    }

    /// Reads `ORION_LLM_URL` and `ORION_LLM_KEY`.
    pub fn from_env(model: &str) -> Option<Self> {
        let url = std::env::var("ORION_LLM_URL").ok()?;
        let mut cfg = Self::new(url, model);
        cfg.api_key = std::env::var("ORION_LLM_KEY").ok();
        Some(cfg)
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

/// Blocking OpenAI-style chat-completion client.
pub struct HttpChatClient {
    cfg: EndpointConfig,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(cfg: EndpointConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> String {
        serde_json::to_string(&CompletionRequest {
            model: &self.cfg.model,
            messages,
            temperature: self.cfg.temperature,
        })
        .expect("request serializes")
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn decode_completion(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::Decode(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::Decode("missing choices[0].message.content".into()))
}

impl ChatClient for HttpChatClient {
    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let mut req = self
            .agent
            .post(&self.cfg.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send(self.request_body(messages))
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Transport(format!(
                "HTTP {}: {}",
                status.as_u16(),
                body.trim()
            )));
        }
        decode_completion(&body)
    }
}

/// Replays recorded replies in order; used for offline end-to-end runs.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    replies: std::collections::VecDeque<String>,
}

impl ReplayClient {
    pub fn new<I: IntoIterator<Item = String>>(replies: I) -> Self {
        Self {
            replies: replies.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatClient for ReplayClient {
    fn complete(&mut self, _messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.replies
            .pop_front()
            .ok_or_else(|| LlmError::Transport("replay transcript exhausted".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    GotoRoom,
    GotoObject,
    SearchRoom,
    ExploreGlobally,
    SearchObject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAction {
    pub kind: ActionKind,
    pub room: Option<String>,
    pub object: Option<String>,
    pub reasoning: String,
}

impl ParsedAction {
    pub fn goto_room(room: &str) -> Self {
        Self {
            kind: ActionKind::GotoRoom,
            room: Some(room.into()),
            object: None,
            reasoning: String::new(),
        }
    }

    pub fn goto_object(room: &str, object: &str) -> Self {
        Self {
            kind: ActionKind::GotoObject,
            room: Some(room.into()),
            object: Some(object.into()),
            reasoning: String::new(),
        }
    }

    pub fn search_room(room: &str) -> Self {
        Self {
            kind: ActionKind::SearchRoom,
            room: Some(room.into()),
            object: None,
            reasoning: String::new(),
        }
    }

    pub fn explore_globally() -> Self {
        Self {
            kind: ActionKind::ExploreGlobally,
            room: None,
            object: None,
            reasoning: String::new(),
        }
    }

    pub fn search_object(object: &str) -> Self {
        Self {
            kind: ActionKind::SearchObject,
            room: None,
            object: Some(object.into()),
            reasoning: String::new(),
        }
    }

    pub fn with_reasoning(mut self, reasoning: impl Into<String>) -> Self {
        self.reasoning = reasoning.into();
        self
    }

    pub fn is_goto(&self) -> bool {
        matches!(self.kind, ActionKind::GotoRoom | ActionKind::GotoObject)
    }

    /// The call alone, e.g. `goto(office-2, printer-1)`.
    pub fn call(&self) -> String {
        let arg = |o: &Option<String>| o.clone().unwrap_or_default();
        match self.kind {
            ActionKind::GotoRoom => format!("goto({})", arg(&self.room)),
            ActionKind::GotoObject => format!("goto({}, {})", arg(&self.room), arg(&self.object)),
            ActionKind::SearchRoom => format!("search_room({})", arg(&self.room)),
            ActionKind::ExploreGlobally => "explore_globally()".to_string(),
            ActionKind::SearchObject => format!("search_object({})", arg(&self.object)),
        }
    }

    /// Same action ignoring the reasoning text.
    pub fn same_call(&self, other: &ParsedAction) -> bool {
        self.kind == other.kind && self.room == other.room && self.object == other.object
    }
}

/// Renders an action the way the planner is asked to answer.
pub fn format_action(a: &ParsedAction) -> String {
    if a.reasoning.is_empty() {
        a.call()
    } else {
        format!("{}\nReasoning: {}", a.call(), a.reasoning)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ParseError(pub String);

const PRIMITIVES: &[&str] = &["goto", "search_room", "explore_globally", "search_object"];

static CALL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"([A-Za-z_]+)\s*\(([^()]*)\)").expect("valid regex"));
static NAME_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[a-z][a-z ]*[a-z]-[1-9][0-9]*$|^[a-z]-[1-9][0-9]*$").expect("valid regex")
});

/// Extracts the single action call from a reply. Repeating the same call in
/// the reasoning is tolerated; two different calls are not.
pub fn parse_action(text: &str) -> Result<ParsedAction, ParseError> {
    let mut calls: Vec<(String, String, std::ops::Range<usize>)> = Vec::new();
    let mut unknown: Option<String> = None;
    for cap in CALL_RE.captures_iter(text) {
        let name = cap[1].to_string();
        if PRIMITIVES.contains(&name.as_str()) {
            let range = cap.get(0).expect("whole match").range();
            calls.push((name, cap[2].trim().to_string(), range));
        } else if unknown.is_none() {
            unknown = Some(name);
        }
    }
    let Some((name, args, range)) = calls.first().cloned() else {
        return Err(ParseError(match unknown {
            Some(n) => format!(
                "Unknown action \"{n}\". Valid actions are goto(<room>), goto(<room>, <object>), search_room(<room>) and explore_globally()."
            ),
            None => "No action call found. Answer with one call such as goto(office-1, chair-1) or explore_globally().".into(),
        }));
    };
    if calls.iter().any(|(n, a, _)| *n != name || *a != args) {
        return Err(ParseError(
            "Multiple different actions found. Issue exactly one action per reply.".into(),
        ));
    }
    let args: Vec<String> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').map(|a| a.trim().to_string()).collect()
    };
    for a in &args {
        if !NAME_RE.is_match(a) {
            return Err(ParseError(format!(
                "Invalid argument \"{a}\" in {name}(...). Arguments must be map names of the form <label>-<id>, e.g. office-1."
            )));
        }
    }
    let mut action = match (name.as_str(), args.as_slice()) {
        ("goto", [room]) => ParsedAction::goto_room(room),
        ("goto", [room, object]) => ParsedAction::goto_object(room, object),
        ("goto", _) => {
            return Err(ParseError(
                "goto takes one argument for a room, goto(<room>), or two for an object, goto(<room>, <object>).".into(),
            ))
        }
        ("search_room", [room]) => ParsedAction::search_room(room),
        ("search_room", _) => return Err(ParseError("search_room takes exactly one argument: search_room(<room>).".into())),
        ("explore_globally", []) => ParsedAction::explore_globally(),
        ("explore_globally", _) => return Err(ParseError("explore_globally takes no arguments: explore_globally().".into())),
        ("search_object", [object]) => ParsedAction::search_object(object),
        ("search_object", _) => {
            return Err(ParseError("search_object takes exactly one argument: search_object(<object>).".into()))
        }
        _ => unreachable!("name filtered against primitives"),
    };
    let mut rest = String::new();
    rest.push_str(&text[..range.start]);
    rest.push_str(&text[range.end..]);
    let rest = rest.trim();
    let rest = rest.strip_prefix("Reasoning:").unwrap_or(rest).trim();
    action.reasoning = rest.to_string();
    Ok(action)
}

/// Parses and then checks the arguments against the current graph.
pub fn parse_action_in(text: &str, graph: &SceneGraph) -> Result<ParsedAction, ParseError> {
    let action = parse_action(text)?;
    if action.kind == ActionKind::GotoRoom {
        let arg = action.room.as_deref().unwrap_or_default();
        let is_room = graph.room(arg).is_some();
        let is_object = graph
            .rooms()
            .iter()
            .any(|r| r.children.iter().any(|o| o.name() == arg));
        if !is_room && is_object {
            return Err(ParseError(format!(
                "\"{arg}\" is an object. goto to an object requires the room as well: goto(<room>, {arg})."
            )));
        }
    }
    if let Some(room) = &action.room {
        if split_name(room).is_none() {
            return Err(ParseError(format!("Invalid room name \"{room}\".")));
        }
    }
    Ok(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::scene_graph::{NodeLevel, SceneNode};
    use proptest::prelude::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn room_prompt_lists_labels_and_candidates() {
        let m = render_room_prompt(&labels(&["chair"]), &labels(&["office", "corridor"]));
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].role, Role::System);
        assert!(m[1].content.contains("chair"));
        assert!(m[1].content.contains("office, corridor"));
        assert_eq!(
            m,
            render_room_prompt(&labels(&["chair"]), &labels(&["office", "corridor"]))
        );
    }

    #[test]
    fn room_prompt_sorts_many_labels() {
        let many: Vec<String> = (0..50).map(|i| format!("thing{:02}", 49 - i)).collect();
        let m = render_room_prompt(&many, &labels(&["office"]));
        assert_eq!(m.iter().filter(|x| x.role == Role::User).count(), 1);
        let mut sorted = many.clone();
        sorted.sort();
        assert!(m[1].content.contains(&sorted.join(", ")));
    }

    #[test]
    fn first_planner_call_has_only_map_and_task() {
        let m = render_planner_prompt("find a monitor", r#"{"rooms": {}}"#, &[], None);
        let user = &m[1].content;
        assert!(user.starts_with("Map:\n{\"rooms\": {}}"));
        assert!(user.contains("Task:\nfind a monitor"));
        assert!(!user.contains("Command history"));
        assert!(!user.contains("Feedback"));
    }

    #[test]
    fn feedback_section_is_verbatim() {
        let m = render_planner_prompt("t", "{}", &[], Some("Task has not been accomplished."));
        assert!(m[1]
            .content
            .contains("Feedback:\nTask has not been accomplished.\n"));
    }

    #[test]
    fn decode_rejects_missing_content() {
        assert_eq!(
            decode_completion(r#"{"choices":[{"message":{"content":"hi"}}]}"#),
            Ok("hi".into())
        );
        assert!(matches!(
            decode_completion(r#"{"choices":[]}"#),
            Err(LlmError::Decode(_))
        ));
        assert!(matches!(
            decode_completion("not json"),
            Err(LlmError::Decode(_))
        ));
    }

    #[test]
    fn parses_goto_with_trailing_reasoning() {
        let a =
            parse_action("goto(office-2, printer-1)\nReasoning: printers live in offices").unwrap();
        assert_eq!(a.kind, ActionKind::GotoObject);
        assert_eq!(a.room.as_deref(), Some("office-2"));
        assert_eq!(a.object.as_deref(), Some("printer-1"));
        assert_eq!(a.reasoning, "printers live in offices");
    }

    #[test]
    fn parses_explore_and_multiword_room() {
        assert_eq!(
            parse_action("explore_globally()").unwrap().kind,
            ActionKind::ExploreGlobally
        );
        let a = parse_action("search_room(break room-1)").unwrap();
        assert_eq!(a.room.as_deref(), Some("break room-1"));
    }

    #[test]
    fn parse_errors_are_descriptive() {
        assert!(parse_action("I think we should look around")
            .unwrap_err()
            .0
            .contains("No action call"));
        assert!(parse_action("fly(office-1)")
            .unwrap_err()
            .0
            .contains("Unknown action"));
        assert!(parse_action("explore_globally(office-1)")
            .unwrap_err()
            .0
            .contains("no arguments"));
        assert!(parse_action("goto(a-1, b-1, c-1)")
            .unwrap_err()
            .0
            .contains("goto takes"));
        assert!(parse_action("goto(office)")
            .unwrap_err()
            .0
            .contains("<label>-<id>"));
        assert!(parse_action("goto(office-1) or search_room(office-1)")
            .unwrap_err()
            .0
            .contains("Multiple"));
    }

    #[test]
    fn object_goto_without_room_is_rejected_against_graph() {
        let mut g = SceneGraph::empty(0);
        g.root.children.push(SceneNode {
            level: NodeLevel::Room,
            label: "office".into(),
            instance_id: 1,
            location: Point2::default(),
            children: vec![SceneNode {
                level: NodeLevel::Object,
                label: "printer".into(),
                instance_id: 1,
                location: Point2::default(),
                children: vec![],
            }],
        });
        let err = parse_action_in("goto(printer-1)", &g).unwrap_err();
        assert!(err.0.contains("requires the room"), "{err}");
        assert!(parse_action_in("goto(office-1)", &g).is_ok());
    }

    fn arb_name() -> impl Strategy<Value = String> {
        ("[a-z]{1,6}( [a-z]{1,5})?", 1u32..40).prop_map(|(l, i)| format!("{l}-{i}"))
    }

    fn arb_action() -> impl Strategy<Value = ParsedAction> {
        let reasoning = "[A-Za-z ,]{0,30}".prop_map(|s| s.trim().to_string());
        (0usize..5, arb_name(), arb_name(), reasoning).prop_map(|(k, r, o, why)| {
            let a = match k {
                0 => ParsedAction::goto_room(&r),
                1 => ParsedAction::goto_object(&r, &o),
                2 => ParsedAction::search_room(&r),
                3 => ParsedAction::explore_globally(),
                _ => ParsedAction::search_object(&o),
            };
            a.with_reasoning(why)
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_format(a in arb_action()) {
            prop_assert_eq!(parse_action(&format_action(&a)).unwrap(), a);
        }
    }
}
