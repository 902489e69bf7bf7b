//! The task executive: backend decisions, action dispatch, goto
//! verification, feedback and history. Also hosts the two baselines.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::explore::{run_exploration, ExploreEnd};
use crate::geometry::Point2;
use crate::llm_gateway::{
    parse_action_in, render_planner_prompt, ActionKind, ChatClient, ChatMessage, ParsedAction,
};
use crate::nav::{
    goto_behavior, rotate_360, GotoOutcome, GotoParams, UnknownPolicy, VelocityCommand,
};
use crate::scene_graph::{round_cm, NodeLevel, RoomScoreTable, SceneGraph, SceneNode, UNASSIGNED};
use crate::semantic_map::SemanticMap;
use crate::stack::Stack;
use crate::vocab::{parse_command, TargetSpec};
use crate::world::mix_seed;

pub const NOT_ACCOMPLISHED: &str = "Task has not been accomplished.";

/// Name of the single pseudo-room holding every object in the flat map
/// used by the object-map baseline.
pub const FLAT_MAP_ROOM: &str = "map-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub command: String,
    /// Evaluation only; never shown to a backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
}

impl Task {
    pub fn new(command: impl Into<String>) -> Self {
        let command = command.into();
        assert!(!command.trim().is_empty(), "task command must be nonempty");
        Self {
            command,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    NavFailure,
    ParseFailure,
    NotFound,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::NavFailure => "nav_failure",
            Outcome::ParseFailure => "parse_failure",
            Outcome::NotFound => "not_found",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action: Option<ParsedAction>,
    pub reply: String,
    pub outcome: Outcome,
    pub log: String,
    /// Set for successful gotos only.
    pub verified: Option<bool>,
    pub started_tick: u64,
    pub ended_tick: u64,
}

impl ActionRecord {
    /// The call as shown in the command history; the raw reply when it did
    /// not parse.
    pub fn action_text(&self) -> String {
        match &self.action {
            Some(a) => a.call(),
            None => self
                .reply
                .lines()
                .next()
                .unwrap_or_default()
                .trim()
                .to_string(),
        }
    }

    /// Failed for repetition purposes: anything but success, and gotos
    /// whose arrival was not verified.
    pub fn failed(&self) -> bool {
        self.outcome != Outcome::Success || self.verified == Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub step: usize,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<Vec<ChatMessage>>,
    pub reply: String,
    pub action: Option<String>,
    pub outcome: Outcome,
    pub log: String,
    pub verified: Option<bool>,
    pub feedback: Option<String>,
    pub started_tick: u64,
    pub ended_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub accomplished: bool,
    pub planner_steps: usize,
    pub sim_ticks: u64,
    pub path_length: f64,
    pub history: Vec<ActionRecord>,
    pub transcript: Vec<TranscriptRecord>,
    /// Why the loop ended without success, if it did.
    pub termination: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub max_steps: usize,
    pub max_ticks: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_steps: 10,
            max_ticks: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub object_standoff: f64,
    pub room_standoff: f64,
    pub verify_radius: f64,
    pub verify_dwell_ticks: u64,
    /// Distance from the robot to a room's nearest object for the robot to
    /// count as inside that room.
    pub room_radius: f64,
    pub explore_budget_ticks: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            object_standoff: 1.0,
            room_standoff: 0.5,
            verify_radius: 2.0,
            verify_dwell_ticks: 5,
            room_radius: 2.5,
            explore_budget_ticks: 600,
        }
    }
}

pub struct DecisionContext<'a> {
    pub command: &'a str,
    pub graph: &'a SceneGraph,
    pub feedback: Option<&'a str>,
    pub history: &'a [ActionRecord],
    pub robot: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Action(ParsedAction),
    Invalid {
        diagnostic: String,
    },
    /// The backend cannot work on this command at all.
    GiveUp {
        diagnostic: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub prompt: Option<Vec<ChatMessage>>,
    pub reply: String,
    pub decision: Decision,
}

pub trait PlannerBackend {
    fn name(&self) -> &str;

    /// The map the backend reasons over.
    fn graph_view(&self, stack: &Stack) -> SceneGraph {
        stack.graph.clone()
    }

    fn decide(&mut self, ctx: &DecisionContext) -> DecisionTrace;
}

fn failed_calls(history: &[ActionRecord]) -> BTreeSet<String> {
    history
        .iter()
        .filter(|r| r.failed())
        .filter_map(|r| r.action.as_ref().map(|a| a.call()))
        .collect()
}

fn nearest<T>(items: impl IntoIterator<Item = (Point2, T)>, robot: &Point2) -> Option<T> {
    items
        .into_iter()
        .enumerate()
        .min_by(|(i, (p, _)), (j, (q, _))| {
            p.distance(robot)
                .total_cmp(&q.distance(robot))
                .then(i.cmp(j))
        })
        .map(|(_, (_, t))| t)
}

/// Deterministic rule-based stand-in for the language model.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    pub table: RoomScoreTable,
}

impl OracleBackend {
    pub fn decide_action(&self, ctx: &DecisionContext) -> Result<ParsedAction, String> {
        let target = parse_command(ctx.command, &self.table.candidate_rooms)
            .ok_or_else(|| format!("command {:?} names no known object or room", ctx.command))?;
        let failed = failed_calls(ctx.history);
        let g = ctx.graph;
        match &target {
            TargetSpec::Object(label) => {
                let hit = nearest(
                    g.objects_labeled(label)
                        .map(|(r, o)| (o.location, ParsedAction::goto_object(&r.name(), &o.name())))
                        .filter(|(_, a)| !failed.contains(&a.call())),
                    &ctx.robot,
                );
                if let Some(a) = hit {
                    return Ok(a.with_reasoning(format!("{label} is in the map")));
                }
                let searched: BTreeSet<String> = ctx
                    .history
                    .iter()
                    .filter_map(|r| r.action.as_ref())
                    .filter(|a| a.kind == ActionKind::SearchRoom)
                    .filter_map(|a| a.room.clone())
                    .collect();
                let labeled: Vec<&SceneNode> =
                    g.rooms().iter().filter(|r| r.label != UNASSIGNED).collect();
                let best = labeled
                    .iter()
                    .map(|r| self.table.affinity(label, &r.label))
                    .fold(0.0, f64::max);
                if best > 0.0 {
                    let pick = nearest(
                        labeled
                            .iter()
                            .filter(|r| self.table.affinity(label, &r.label) == best)
                            .map(|r| (r.location, ParsedAction::search_room(&r.name())))
                            .filter(|(_, a)| {
                                !searched.contains(a.room.as_deref().unwrap_or_default())
                                    && !failed.contains(&a.call())
                            }),
                        &ctx.robot,
                    );
                    if let Some(a) = pick {
                        return Ok(a.with_reasoning(format!(
                            "a {label} is most likely found in this room"
                        )));
                    }
                }
            }
            TargetSpec::Room(label) => {
                let hit = nearest(
                    g.rooms()
                        .iter()
                        .filter(|r| &r.label == label)
                        .map(|r| (r.location, ParsedAction::goto_room(&r.name())))
                        .filter(|(_, a)| !failed.contains(&a.call())),
                    &ctx.robot,
                );
                if let Some(a) = hit {
                    return Ok(a.with_reasoning(format!("a {label} is in the map")));
                }
            }
        }
        Ok(ParsedAction::explore_globally()
            .with_reasoning(format!("no {} known yet", target.label())))
    }
}

impl PlannerBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> DecisionTrace {
        match self.decide_action(ctx) {
            Ok(a) => DecisionTrace {
                prompt: None,
                reply: crate::llm_gateway::format_action(&a),
                decision: Decision::Action(a),
            },
            Err(diagnostic) => DecisionTrace {
                prompt: None,
                reply: String::new(),
                decision: Decision::GiveUp { diagnostic },
            },
        }
    }
}

/// Language-model backend. A transport failure falls back to the oracle for
/// that step.
pub struct LlmBackend<C: ChatClient> {
    pub client: C,
    pub fallback: OracleBackend,
}

impl<C: ChatClient> LlmBackend<C> {
    pub fn new(client: C) -> Self {
        Self {
            client,
            fallback: OracleBackend::default(),
        }
    }
}

impl<C: ChatClient> PlannerBackend for LlmBackend<C> {
    fn name(&self) -> &str {
        "llm"
    }

    fn decide(&mut self, ctx: &DecisionContext) -> DecisionTrace {
        let prompt = render_planner_prompt(
            ctx.command,
            &ctx.graph.serialize(),
            ctx.history,
            ctx.feedback,
        );
        match self.client.complete(&prompt) {
            Ok(reply) => {
                let decision = match parse_action_in(&reply, ctx.graph) {
                    Ok(a) => Decision::Action(a),
                    Err(e) => Decision::Invalid { diagnostic: e.0 },
                };
                DecisionTrace {
                    prompt: Some(prompt),
                    reply,
                    decision,
                }
            }
            Err(e) => {
                log::warn!("planner model unavailable ({e}); using oracle for this step");
                let mut trace = self.fallback.decide(ctx);
                trace.prompt = Some(prompt);
                trace
            }
        }
    }
}

/// Support surfaces the object-map baseline searches near.
pub fn support_surfaces(label: &str) -> &'static [&'static str] {
    match label {
        "monitor" | "computer" | "keyboard" | "mouse" | "lamp" => &["table", "desk"],
        "book" => &["bookshelf", "table", "desk"],
        "printer" => &["table", "cabinet"],
        "bag" => &["chair", "table"],
        "microwave" | "coffee maker" => &["table", "cabinet"],
        _ => &["table"],
    }
}

/// Every map object under one pseudo-room, named by map instance id.
pub fn flat_object_graph(map: &SemanticMap, tick: u64) -> SceneGraph {
    let mut g = SceneGraph::empty(tick);
    let children: Vec<SceneNode> = map
        .objects
        .iter()
        .map(|o| SceneNode::leaf(&o.label, o.instance_id, round_cm(o.position_world)))
        .collect();
    if !children.is_empty() {
        let c = Point2::centroid(children.iter().map(|c| &c.location)).unwrap_or_default();
        g.root.children.push(SceneNode {
            level: NodeLevel::Room,
            label: "map".into(),
            instance_id: 1,
            location: round_cm(c),
            children,
        });
    }
    g
}

/// Object map without rooms: go to the target if mapped, else search near
/// the nearest unsearched support surface, alternating with exploration.
#[derive(Debug, Clone, Default)]
pub struct ObjectMapBackend {
    pub table: RoomScoreTable,
}

impl PlannerBackend for ObjectMapBackend {
    fn name(&self) -> &str {
        "object_map_search"
    }

    fn graph_view(&self, stack: &Stack) -> SceneGraph {
        flat_object_graph(&stack.semantic, stack.tick())
    }

    fn decide(&mut self, ctx: &DecisionContext) -> DecisionTrace {
        let action = match parse_command(ctx.command, &self.table.candidate_rooms) {
            None => {
                return DecisionTrace {
                    prompt: None,
                    reply: String::new(),
                    decision: Decision::GiveUp {
                        diagnostic: format!("command {:?} names no known object", ctx.command),
                    },
                }
            }
            Some(TargetSpec::Room(_)) => ParsedAction::explore_globally(),
            Some(TargetSpec::Object(label)) => {
                let failed = failed_calls(ctx.history);
                let hit = nearest(
                    ctx.graph
                        .objects_labeled(&label)
                        .map(|(r, o)| (o.location, ParsedAction::goto_object(&r.name(), &o.name())))
                        .filter(|(_, a)| !failed.contains(&a.call())),
                    &ctx.robot,
                );
                let last_was_search = ctx
                    .history
                    .last()
                    .and_then(|r| r.action.as_ref())
                    .is_some_and(|a| a.kind == ActionKind::SearchObject);
                let searched: BTreeSet<String> = ctx
                    .history
                    .iter()
                    .filter_map(|r| r.action.as_ref())
                    .filter(|a| a.kind == ActionKind::SearchObject)
                    .map(|a| a.call())
                    .collect();
                let anchors = support_surfaces(&label);
                let anchor = || {
                    nearest(
                        ctx.graph
                            .rooms()
                            .iter()
                            .flat_map(|r| r.children.iter())
                            .filter(|o| anchors.contains(&o.label.as_str()))
                            .map(|o| (o.location, ParsedAction::search_object(&o.name())))
                            .filter(|(_, a)| {
                                !searched.contains(&a.call()) && !failed.contains(&a.call())
                            }),
                        &ctx.robot,
                    )
                };
                match hit {
                    Some(a) => a,
                    None if !last_was_search => {
                        anchor().unwrap_or_else(ParsedAction::explore_globally)
                    }
                    None => ParsedAction::explore_globally(),
                }
            }
        };
        DecisionTrace {
            prompt: None,
            reply: crate::llm_gateway::format_action(&action),
            decision: Decision::Action(action),
        }
    }
}

/// Predicate for "the target has newly appeared", fixed at creation time.
struct TargetWatch {
    target: TargetSpec,
    known: BTreeSet<(String, u32)>,
    rooms_before: usize,
}

impl TargetWatch {
    fn new(stack: &Stack, target: &TargetSpec) -> Self {
        let known = stack
            .semantic
            .objects
            .iter()
            .filter(|o| o.label == target.label())
            .map(|o| (o.label.clone(), o.instance_id))
            .collect();
        let rooms_before = stack
            .graph
            .rooms()
            .iter()
            .filter(|r| r.label == target.label())
            .count();
        Self {
            target: target.clone(),
            known,
            rooms_before,
        }
    }

    fn fired(&self, stack: &Stack) -> bool {
        match &self.target {
            TargetSpec::Object(l) => {
                stack.semantic.objects.iter().any(|o| {
                    &o.label == l && !self.known.contains(&(o.label.clone(), o.instance_id))
                })
            }
            TargetSpec::Room(l) => {
                stack.graph.rooms().iter().filter(|r| &r.label == l).count() > self.rooms_before
            }
        }
    }
}

pub struct Executor<'a> {
    pub cfg: &'a PlannerConfig,
    pub deadline: u64,
    pub target: Option<TargetSpec>,
}

impl Executor<'_> {
    fn goto(
        &self,
        stack: &mut Stack,
        target: Point2,
        standoff: f64,
        face: bool,
    ) -> (Outcome, String) {
        let params = GotoParams {
            target,
            standoff,
            unknown: UnknownPolicy::Lethal,
            deadline: self.deadline,
            face_target: face,
        };
        let r = goto_behavior(stack, &params, &mut |_| false);
        match r.outcome {
            GotoOutcome::Arrived => (Outcome::Success, r.log),
            _ => (Outcome::NavFailure, r.log),
        }
    }

    fn scan(&self, stack: &mut Stack) -> String {
        let r = rotate_360(stack, self.deadline, &mut |_| false);
        if r.completed {
            "completed a 360 degree scan".into()
        } else {
            "scan interrupted by the tick budget".into()
        }
    }

    /// Runs one primitive against the graph it was chosen from.
    pub fn execute(
        &self,
        stack: &mut Stack,
        graph: &SceneGraph,
        a: &ParsedAction,
    ) -> (Outcome, String) {
        let room_arg = a.room.as_deref().unwrap_or_default();
        let obj_arg = a.object.as_deref().unwrap_or_default();
        match a.kind {
            ActionKind::GotoObject => match graph.object(room_arg, obj_arg) {
                Some(o) => self.goto(stack, o.location, self.cfg.object_standoff, true),
                None => (Outcome::NotFound, not_found(graph, room_arg, Some(obj_arg))),
            },
            ActionKind::GotoRoom => match graph.room(room_arg) {
                Some(r) => self.goto(stack, r.location, self.cfg.room_standoff, false),
                None => (Outcome::NotFound, not_found(graph, room_arg, None)),
            },
            ActionKind::SearchRoom => match graph.room(room_arg) {
                Some(r) => match self.goto(stack, r.location, self.cfg.room_standoff, false) {
                    (Outcome::Success, log) => {
                        (Outcome::Success, format!("{log}; {}", self.scan(stack)))
                    }
                    other => other,
                },
                None => (Outcome::NotFound, not_found(graph, room_arg, None)),
            },
            ActionKind::SearchObject => {
                let found = graph
                    .rooms()
                    .iter()
                    .flat_map(|r| r.children.iter())
                    .find(|o| o.name() == obj_arg);
                match found {
                    Some(o) => {
                        match self.goto(stack, o.location, self.cfg.object_standoff, false) {
                            (Outcome::Success, log) => {
                                (Outcome::Success, format!("{log}; {}", self.scan(stack)))
                            }
                            other => other,
                        }
                    }
                    None => (
                        Outcome::NotFound,
                        format!("object {obj_arg} does not exist in the map"),
                    ),
                }
            }
            ActionKind::ExploreGlobally => {
                let budget = self
                    .cfg
                    .explore_budget_ticks
                    .min(self.deadline.saturating_sub(stack.tick()));
                let watch = self.target.as_ref().map(|t| TargetWatch::new(stack, t));
                let out = run_exploration(stack, budget, &mut |s| {
                    watch.as_ref().is_some_and(|w| w.fired(s))
                });
                let why = match out.reason {
                    ExploreEnd::Stopped => "stopped early: target appeared in the map",
                    ExploreEnd::Budget => "exploration budget used up",
                };
                (
                    Outcome::Success,
                    format!("explored {} new cells; {why}", out.coverage_delta()),
                )
            }
        }
    }

    /// Detector-based check after a successful goto.
    pub fn verify(&self, stack: &mut Stack, target: &TargetSpec) -> bool {
        match target {
            TargetSpec::Object(label) => {
                for _ in 0..self.cfg.verify_dwell_ticks.max(1) {
                    stack.drive(VelocityCommand::ZERO);
                    let truth = stack.pose_true();
                    let seed = mix_seed(stack.cfg.seed, 0x5EE, 0);
                    let frame = stack.world.detect_objects(&truth, &stack.cfg.sensor, seed);
                    if frame
                        .iter()
                        .any(|f| &f.label == label && f.range() <= self.cfg.verify_radius)
                    {
                        return true;
                    }
                }
                false
            }
            TargetSpec::Room(label) => {
                stack.refresh_graph();
                let pos = stack.pose_est().position();
                stack
                    .graph
                    .room_containing(&pos, self.cfg.room_radius)
                    .is_some_and(|r| &r.label == label)
            }
        }
    }
}

fn not_found(graph: &SceneGraph, room: &str, object: Option<&str>) -> String {
    match (graph.room(room), object) {
        (None, _) => format!("room {room} does not exist in the scene graph"),
        (Some(_), Some(o)) => format!("object {o} does not exist in room {room}"),
        (Some(_), None) => format!("room {room} could not be resolved"),
    }
}

fn record_transcript(
    result: &mut TaskResult,
    backend: &str,
    trace: DecisionTrace,
    rec: &ActionRecord,
    feedback: Option<&str>,
) {
    result.transcript.push(TranscriptRecord {
        step: result.history.len() + 1,
        backend: backend.to_string(),
        prompt: trace.prompt,
        reply: trace.reply,
        action: rec.action.as_ref().map(|a| a.call()),
        outcome: rec.outcome,
        log: rec.log.clone(),
        verified: rec.verified,
        feedback: feedback.map(str::to_string),
        started_tick: rec.started_tick,
        ended_tick: rec.ended_tick,
    });
}

/// The decide / execute / verify loop.
pub fn run_task(
    stack: &mut Stack,
    task: &Task,
    backend: &mut dyn PlannerBackend,
    budget: Budget,
    cfg: &PlannerConfig,
) -> TaskResult {
    let start_tick = stack.tick();
    let start_len = stack.path_length;
    let deadline = start_tick + budget.max_ticks;
    let mut result = TaskResult {
        accomplished: false,
        planner_steps: 0,
        sim_ticks: 0,
        path_length: 0.0,
        history: Vec::new(),
        transcript: Vec::new(),
        termination: String::new(),
    };
    let rooms = RoomScoreTable::default().candidate_rooms;
    let target = parse_command(&task.command, &rooms);
    let exec = Executor {
        cfg,
        deadline,
        target: target.clone(),
    };
    stack.status.plan_log.clear();

    if budget.max_steps > 0 && budget.max_ticks > 0 && backend.graph_view(stack).is_empty() {
        stack.refresh_graph();
        if backend.graph_view(stack).is_empty() {
            stack.status.current_action = Some("initial scan".into());
            exec.scan(stack);
        }
    }
    let mut feedback: Option<String> = None;
    loop {
        if result.history.len() >= budget.max_steps {
            result.termination = "step budget exhausted".into();
            break;
        }
        if stack.tick() >= deadline {
            result.termination = "tick budget exhausted".into();
            break;
        }
        stack.refresh_graph();
        let graph = backend.graph_view(stack);
        let ctx = DecisionContext {
            command: &task.command,
            graph: &graph,
            feedback: feedback.as_deref(),
            history: &result.history,
            robot: stack.pose_est().position(),
        };
        let trace = backend.decide(&ctx);
        let started = stack.tick();
        let mut rec = ActionRecord {
            action: None,
            reply: trace.reply.clone(),
            outcome: Outcome::ParseFailure,
            log: String::new(),
            verified: None,
            started_tick: started,
            ended_tick: started,
        };
        let mut done = false;
        match &trace.decision {
            Decision::GiveUp { diagnostic } => {
                result.termination = diagnostic.clone();
                break;
            }
            Decision::Invalid { diagnostic } => {
                rec.log = diagnostic.clone();
                feedback = Some(diagnostic.clone());
            }
            Decision::Action(a) => {
                stack.status.current_action = Some(a.call());
                let (outcome, log) = exec.execute(stack, &graph, a);
                rec.action = Some(a.clone());
                rec.outcome = outcome;
                rec.log = log;
                if outcome == Outcome::Success {
                    if a.is_goto() {
                        let ok = target.as_ref().is_some_and(|t| exec.verify(stack, t));
                        rec.verified = Some(ok);
                        done = ok;
                    }
                    feedback = (!done).then(|| NOT_ACCOMPLISHED.to_string());
                } else {
                    feedback = Some(rec.log.clone());
                }
            }
        }
        rec.ended_tick = stack.tick();
        stack
            .status
            .plan_log
            .push(format!("{} -> {}", rec.action_text(), rec.outcome.as_str()));
        record_transcript(
            &mut result,
            backend.name(),
            trace,
            &rec,
            feedback.as_deref(),
        );
        result.history.push(rec);
        if done {
            result.accomplished = true;
            break;
        }
    }
    stack.status.current_action = None;
    result.planner_steps = result.history.len();
    result.sim_ticks = stack.tick() - start_tick;
    result.path_length = stack.path_length - start_len;
    result
}

/// Pure exploration; whenever a new instance of the target enters the map
/// the robot goes to it and checks it.
pub fn frontier_search_baseline(
    stack: &mut Stack,
    task: &Task,
    budget: Budget,
    cfg: &PlannerConfig,
) -> TaskResult {
    let start_tick = stack.tick();
    let start_len = stack.path_length;
    let deadline = start_tick + budget.max_ticks;
    let mut result = TaskResult {
        accomplished: false,
        planner_steps: 0,
        sim_ticks: 0,
        path_length: 0.0,
        history: Vec::new(),
        transcript: Vec::new(),
        termination: String::new(),
    };
    let target = parse_command(&task.command, &RoomScoreTable::default().candidate_rooms);
    let exec = Executor {
        cfg,
        deadline,
        target: target.clone(),
    };
    let mut tried: BTreeSet<(String, u32)> = BTreeSet::new();
    let push = |result: &mut TaskResult, rec: ActionRecord| {
        let trace = DecisionTrace {
            prompt: None,
            reply: rec.action_text(),
            decision: Decision::Action(ParsedAction::explore_globally()),
        };
        record_transcript(result, "frontier_search", trace, &rec, None);
        result.history.push(rec);
    };
    while let Some(t) = &target {
        if stack.tick() >= deadline {
            result.termination = "tick budget exhausted".into();
            break;
        }
        let candidate = |s: &Stack| -> Option<(String, Point2)> {
            match t {
                TargetSpec::Object(l) => s
                    .semantic
                    .objects
                    .iter()
                    .filter(|o| &o.label == l && !tried.contains(&(o.label.clone(), o.instance_id)))
                    .min_by(|a, b| {
                        let p = s.pose_est().position();
                        a.position_world
                            .distance(&p)
                            .total_cmp(&b.position_world.distance(&p))
                    })
                    .map(|o| (o.name(), o.position_world)),
                TargetSpec::Room(l) => s
                    .graph
                    .rooms()
                    .iter()
                    .find(|r| &r.label == l && !tried.contains(&(r.label.clone(), r.instance_id)))
                    .map(|r| (r.name(), r.location)),
            }
        };
        let started = stack.tick();
        let found = candidate(stack);
        let Some((name, at)) = found else {
            let out = run_exploration(stack, deadline - stack.tick(), &mut |s| {
                candidate(s).is_some()
            });
            push(
                &mut result,
                ActionRecord {
                    action: Some(ParsedAction::explore_globally()),
                    reply: String::new(),
                    outcome: Outcome::Success,
                    log: format!("explored {} new cells", out.coverage_delta()),
                    verified: None,
                    started_tick: started,
                    ended_tick: stack.tick(),
                },
            );
            continue;
        };
        let (label, id) = crate::scene_graph::split_name(&name)
            .map(|(l, i)| (l.to_string(), i))
            .expect("valid name");
        tried.insert((label, id));
        let standoff = if matches!(t, TargetSpec::Object(_)) {
            cfg.object_standoff
        } else {
            cfg.room_standoff
        };
        let (outcome, log) = exec.goto(stack, at, standoff, matches!(t, TargetSpec::Object(_)));
        let verified = (outcome == Outcome::Success).then(|| exec.verify(stack, t));
        let action = match t {
            TargetSpec::Object(_) => ParsedAction::goto_object(FLAT_MAP_ROOM, &name),
            TargetSpec::Room(_) => ParsedAction::goto_room(&name),
        };
        push(
            &mut result,
            ActionRecord {
                action: Some(action),
                reply: String::new(),
                outcome,
                log,
                verified,
                started_tick: started,
                ended_tick: stack.tick(),
            },
        );
        if verified == Some(true) {
            result.accomplished = true;
            break;
        }
    }
    if target.is_none() {
        result.termination = format!("command {:?} names no known object or room", task.command);
    }
    result.planner_steps = result.history.len();
    result.sim_ticks = stack.tick() - start_tick;
    result.path_length = stack.path_length - start_len;
    result
}
