//! Seeded end-to-end runs, per-run metrics, suites and reports.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::scenario::{PlannerKind, Scenario};
use crate::llm_gateway::{ChatClient, EndpointConfig, HttpChatClient, ReplayClient};
use crate::localization::CellState;
use crate::planner::{
    frontier_search_baseline, run_task, Budget, LlmBackend, ObjectMapBackend, OracleBackend,
    Outcome, PlannerBackend, PlannerConfig, Task, TaskResult, TranscriptRecord,
};
use crate::stack::Stack;
use crate::vocab::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    None,
    Localization,
    Exploration,
    Perception,
    Navigation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: String,
    pub seed: u64,
    pub backend: PlannerKind,
    pub task_index: usize,
    pub command: String,
    pub success: bool,
    pub planner_steps: usize,
    pub sim_ticks: u64,
    /// Wall-clock milliseconds; the only nondeterministic field.
    pub wall_time_ms: u64,
    pub path_length: f64,
    pub coverage: f64,
    pub collisions: u32,
    pub min_wall_distance: f64,
    pub failure_category: FailureCategory,
}

impl RunMetrics {
    /// Copy with the wall-clock field zeroed, for determinism checks.
    pub fn without_wall_time(&self) -> Self {
        Self {
            wall_time_ms: 0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub metrics: RunMetrics,
    pub result: TaskResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub tasks: Vec<TaskRun>,
}

/// Where the language-model backend gets its replies.
#[derive(Debug, Clone, Default)]
pub enum LlmSource {
    #[default]
    Unavailable,
    Endpoint(EndpointConfig),
    Replay(Vec<String>),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub planner: Option<PlannerKind>,
    pub llm: LlmSource,
    pub frontier_score: Option<crate::explore::ScoreMode>,
}

struct UnavailableClient;

impl ChatClient for UnavailableClient {
    fn complete(
        &mut self,
        _m: &[crate::llm_gateway::ChatMessage],
    ) -> Result<String, crate::llm_gateway::LlmError> {
        Err(crate::llm_gateway::LlmError::Transport(
            "no language model endpoint configured".into(),
        ))
    }
}

fn make_backend(kind: PlannerKind, llm: &LlmSource) -> Option<Box<dyn PlannerBackend>> {
    match kind {
        PlannerKind::Oracle => Some(Box::new(OracleBackend::default())),
        PlannerKind::ObjectMapSearch => Some(Box::new(ObjectMapBackend::default())),
        PlannerKind::FrontierSearch => None,
        PlannerKind::Llm => Some(match llm {
            LlmSource::Unavailable => Box::new(LlmBackend::new(UnavailableClient)),
            LlmSource::Endpoint(cfg) => Box::new(LlmBackend::new(HttpChatClient::new(cfg.clone()))),
            LlmSource::Replay(replies) => {
                Box::new(LlmBackend::new(ReplayClient::new(replies.clone())))
            }
        }),
    }
}

/// Free cells reachable from the robot start, from the ground-truth raster.
pub fn reachable_free_cells(stack: &Stack) -> Vec<(usize, usize)> {
    let g = &stack.grid;
    let (w, h, occ) = stack.world.rasterize(g.resolution);
    debug_assert_eq!((w, h), (g.width, g.height));
    let Some(start) = g.world_to_cell(&stack.world.robot.pose_true.position()) else {
        return Vec::new();
    };
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::from([start]);
    seen[start.1 * w + start.0] = true;
    let mut out = Vec::new();
    while let Some((x, y)) = queue.pop_front() {
        out.push((x, y));
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !seen[j] && !occ[j] {
                seen[j] = true;
                queue.push_back((nx as usize, ny as usize));
            }
        }
    }
    out
}

pub fn coverage(stack: &Stack, reachable: &[(usize, usize)]) -> f64 {
    if reachable.is_empty() {
        return 0.0;
    }
    let seen = reachable
        .iter()
        .filter(|&&(x, y)| stack.grid.get(x, y) == CellState::Explored)
        .count();
    seen as f64 / reachable.len() as f64
}

/// Ground-truth success: the robot really is at the requested thing.
pub fn ground_truth_reached(stack: &Stack, target: &TargetSpec, radius: f64) -> bool {
    let p = stack.pose_true().position();
    match target {
        TargetSpec::Object(l) => stack
            .world
            .present_objects()
            .any(|o| &o.label == l && o.position.distance(&p) <= radius),
        TargetSpec::Room(l) => stack.world.room_at(&p).is_some_and(|r| &r.label == l),
    }
}

pub fn classify_failure(
    stack: &Stack,
    target: Option<&TargetSpec>,
    result: &TaskResult,
    success: bool,
) -> FailureCategory {
    if success {
        return FailureCategory::None;
    }
    if result
        .history
        .iter()
        .any(|r| r.outcome == Outcome::NavFailure)
    {
        return FailureCategory::Navigation;
    }
    if stack
        .pose_est()
        .position()
        .distance(&stack.pose_true().position())
        > 0.5
    {
        return FailureCategory::Localization;
    }
    if let Some(TargetSpec::Object(l)) = target {
        let seen_but_unmapped = stack
            .world
            .present_objects()
            .filter(|o| &o.label == l)
            .any(|o| {
                let explored = stack
                    .grid
                    .world_to_cell(&o.position)
                    .is_some_and(|(x, y)| stack.grid.get(x, y) == CellState::Explored);
                explored
                    && !stack
                        .semantic
                        .objects
                        .iter()
                        .any(|m| &m.label == l && m.position_world.distance(&o.position) <= 1.0)
            });
        if seen_but_unmapped {
            return FailureCategory::Perception;
        }
    }
    FailureCategory::Exploration
}

/// Runs every task of the scenario in order on one stack.
pub fn run_scenario(s: &Scenario, seed: u64, opts: &RunOptions) -> ScenarioRun {
    run_scenario_keep_stack(s, seed, opts).0
}

/// As [`run_scenario`], also returning the final stack for archiving.
pub fn run_scenario_keep_stack(s: &Scenario, seed: u64, opts: &RunOptions) -> (ScenarioRun, Stack) {
    run_scenario_with_stack(s, seed, opts, s.build_stack(seed))
}

/// Runs the scenario's tasks on a stack already built from it, e.g. one
/// carrying a tick hook.
pub fn run_scenario_with_stack(
    s: &Scenario,
    seed: u64,
    opts: &RunOptions,
    mut stack: Stack,
) -> (ScenarioRun, Stack) {
    let mut runner = TaskRunner::new(s, seed, opts, &mut stack);
    let tasks = s
        .tasks
        .iter()
        .enumerate()
        .map(|(i, task)| runner.run(&mut stack, i, task, s.task_target(i)))
        .collect();
    (ScenarioRun { tasks }, stack)
}

/// Executes tasks one at a time on a scenario's stack with a fixed backend.
/// Scenario runs and live sessions both go through it, so their transcripts
/// agree.
pub struct TaskRunner {
    scenario: String,
    seed: u64,
    kind: PlannerKind,
    budget: Budget,
    pcfg: PlannerConfig,
    reachable: Vec<(usize, usize)>,
    backend: Option<Box<dyn PlannerBackend>>,
}

impl TaskRunner {
    /// Applies run options to `stack` and builds the backend.
    pub fn new(s: &Scenario, seed: u64, opts: &RunOptions, stack: &mut Stack) -> Self {
        let kind = opts.planner.unwrap_or(s.planner);
        if let Some(mode) = opts.frontier_score {
            stack.cfg.explore.score_mode = mode;
        }
        Self {
            scenario: s.name.clone(),
            seed,
            kind,
            budget: s.budget,
            pcfg: s.planner_config(),
            reachable: reachable_free_cells(stack),
            backend: make_backend(kind, &opts.llm),
        }
    }

    pub fn kind(&self) -> PlannerKind {
        self.kind
    }

    /// Runs `task` as task number `index` and scores it against `target`.
    pub fn run(
        &mut self,
        stack: &mut Stack,
        index: usize,
        task: &Task,
        target: Option<TargetSpec>,
    ) -> TaskRun {
        let clock = Instant::now();
        let result = match self.backend.as_mut() {
            Some(b) => run_task(stack, task, b.as_mut(), self.budget, &self.pcfg),
            None => frontier_search_baseline(stack, task, self.budget, &self.pcfg),
        };
        let success = result.accomplished
            && target
                .as_ref()
                .is_some_and(|t| ground_truth_reached(stack, t, self.pcfg.verify_radius));
        let metrics = RunMetrics {
            scenario: self.scenario.clone(),
            seed: self.seed,
            backend: self.kind,
            task_index: index,
            command: task.command.clone(),
            success,
            planner_steps: result.planner_steps,
            sim_ticks: result.sim_ticks,
            wall_time_ms: clock.elapsed().as_millis() as u64,
            path_length: result.path_length,
            coverage: coverage(stack, &self.reachable),
            collisions: stack.collisions,
            min_wall_distance: stack.min_wall_distance,
            failure_category: classify_failure(stack, target.as_ref(), &result, success),
        };
        TaskRun { metrics, result }
    }
}

#[derive(Debug, Serialize)]
struct TranscriptHeader<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    seed: u64,
    backend: PlannerKind,
    scenario: &'a Scenario,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptLine {
    #[serde(rename = "type")]
    kind: String,
    task_index: usize,
    #[serde(flatten)]
    record: TranscriptRecord,
}

/// Line-delimited transcript: a header embedding the scenario, then one
/// record per planner step.
pub fn transcript_jsonl(
    s: &Scenario,
    seed: u64,
    backend: PlannerKind,
    run: &ScenarioRun,
) -> String {
    let mut out = serde_json::to_string(&TranscriptHeader {
        kind: "header",
        seed,
        backend,
        scenario: s,
    })
    .expect("header");
    out.push('\n');
    for (i, t) in run.tasks.iter().enumerate() {
        for r in &t.result.transcript {
            out.push_str(&transcript_line(i, r));
            out.push('\n');
        }
    }
    out
}

/// One step record as it appears in a transcript, without the newline.
pub fn transcript_line(task_index: usize, record: &TranscriptRecord) -> String {
    let line = TranscriptLine {
        kind: "step".into(),
        task_index,
        record: record.clone(),
    };
    serde_json::to_string(&line).expect("record")
}

/// Parsed transcript: the embedded scenario, seed and the recorded replies.
pub struct Transcript {
    pub scenario: Scenario,
    pub seed: u64,
    pub backend: PlannerKind,
    pub records: Vec<TranscriptRecord>,
}

pub fn parse_transcript(text: &str) -> Result<Transcript, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: serde_json::Value = serde_json::from_str(lines.next().ok_or("empty transcript")?)
        .map_err(|e| format!("bad header: {e}"))?;
    if header.get("type").and_then(|t| t.as_str()) != Some("header") {
        return Err("first line is not a transcript header".into());
    }
    let scenario: Scenario = serde_json::from_value(
        header
            .get("scenario")
            .cloned()
            .ok_or("header lacks scenario")?,
    )
    .map_err(|e| e.to_string())?;
    let seed = header
        .get("seed")
        .and_then(|s| s.as_u64())
        .ok_or("header lacks seed")?;
    let backend: PlannerKind = serde_json::from_value(
        header
            .get("backend")
            .cloned()
            .ok_or("header lacks backend")?,
    )
    .map_err(|e| e.to_string())?;
    let records = lines
        .map(|l| {
            serde_json::from_str::<TranscriptLine>(l)
                .map(|t| t.record)
                .map_err(|e| format!("bad record: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Transcript {
        scenario,
        seed,
        backend,
        records,
    })
}

/// Writes transcript, metrics and final map artifacts under `dir`.
pub fn archive_run(
    dir: &Path,
    s: &Scenario,
    seed: u64,
    backend: PlannerKind,
    run: &ScenarioRun,
    stack: Option<&Stack>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("transcript.jsonl"),
        transcript_jsonl(s, seed, backend, run),
    )?;
    let mut m = std::fs::File::create(dir.join("metrics.jsonl"))?;
    for t in &run.tasks {
        writeln!(m, "{}", serde_json::to_string(&t.metrics).expect("metrics"))?;
    }
    if let Some(stack) = stack {
        stack.grid.export(&dir.join("map.pgm"))?;
        std::fs::write(dir.join("objects.jsonl"), stack.semantic.export_records())?;
        std::fs::write(dir.join("scene_graph.json"), stack.graph.serialize())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub group: String,
    pub backend: PlannerKind,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_planner_steps: f64,
    pub mean_sim_ticks: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<RunMetrics>,
    pub aggregates: Vec<Aggregate>,
}

/// Group key: scenario name up to its last '-' (so `a-03` belongs to `a`).
pub fn scenario_group(name: &str) -> &str {
    name.rsplit_once('-').map_or(name, |(g, _)| g)
}

pub fn aggregate(rows: &[RunMetrics]) -> Vec<Aggregate> {
    let mut by: BTreeMap<(String, PlannerKind), Vec<&RunMetrics>> = BTreeMap::new();
    for r in rows {
        by.entry((scenario_group(&r.scenario).to_string(), r.backend))
            .or_default()
            .push(r);
    }
    by.into_iter()
        .map(|((group, backend), rs)| {
            let n = rs.len();
            let successes = rs.iter().filter(|r| r.success).count();
            Aggregate {
                group,
                backend,
                runs: n,
                successes,
                success_rate: successes as f64 / n as f64,
                mean_planner_steps: rs.iter().map(|r| r.planner_steps as f64).sum::<f64>()
                    / n as f64,
                mean_sim_ticks: rs.iter().map(|r| r.sim_ticks as f64).sum::<f64>() / n as f64,
            }
        })
        .collect()
}

/// Every (scenario, seed, backend) combination, run in parallel. `seeds`
/// overrides each scenario's own seed list when given.
pub fn run_suite(
    scenarios: &[Scenario],
    seeds: Option<&[u64]>,
    backends: &[PlannerKind],
    opts: &RunOptions,
) -> Report {
    let mut jobs = Vec::new();
    for (si, s) in scenarios.iter().enumerate() {
        for &seed in seeds.unwrap_or(&s.seeds) {
            for &b in backends {
                jobs.push((si, seed, b));
            }
        }
    }
    let mut rows: Vec<RunMetrics> = jobs
        .par_iter()
        .flat_map_iter(|&(si, seed, b)| {
            let o = RunOptions {
                planner: Some(b),
                ..opts.clone()
            };
            run_scenario(&scenarios[si], seed, &o)
                .tasks
                .into_iter()
                .map(|t| t.metrics)
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.scenario.as_str(), a.seed, a.backend, a.task_index).cmp(&(
            b.scenario.as_str(),
            b.seed,
            b.backend,
            b.task_index,
        ))
    });
    let aggregates = aggregate(&rows);
    Report { rows, aggregates }
}

impl Report {
    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("row") + "\n")
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,seed,backend,task_index,success,planner_steps,sim_ticks,wall_time_ms,path_length,coverage,collisions,min_wall_distance,failure_category\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.3},{:.4},{},{:.3},{}\n",
                r.scenario,
                r.seed,
                r.backend.as_str(),
                r.task_index,
                r.success,
                r.planner_steps,
                r.sim_ticks,
                r.wall_time_ms,
                r.path_length,
                r.coverage,
                r.collisions,
                r.min_wall_distance,
                serde_json::to_value(r.failure_category)
                    .expect("category")
                    .as_str()
                    .unwrap_or_default(),
            ));
        }
        out
    }

    /// Per-group summary table with one line per backend.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:<10} {:>5} {:>9} {:>8} {:>10}\n",
            "group", "backend", "runs", "success", "steps", "ticks"
        );
        for a in &self.aggregates {
            out.push_str(&format!(
                "{:<12} {:<10} {:>5} {:>4}/{:<4} {:>8.2} {:>10.1}\n",
                a.group,
                a.backend.as_str(),
                a.runs,
                a.successes,
                a.runs,
                a.mean_planner_steps,
                a.mean_sim_ticks
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.jsonl"), self.to_jsonl())?;
        std::fs::write(dir.join("runs.csv"), self.to_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary_table())?;
        Ok(())
    }
}
