//! The single writer: one thread owns the stack and applies every operator
//! command at a tick boundary, between two calls to `Stack::drive`.

use std::collections::HashSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use orion_core::harness::run::{archive_run, transcript_line, TaskRun};
use orion_core::harness::{target_of, RunOptions, Scenario, ScenarioRun, TaskRunner};
use orion_core::nav::VelocityCommand;
use orion_core::planner::Task;
use orion_core::stack::{Stack, TickHook};
use orion_core::world::MutationKind;

use crate::protocol::{parse_envelope, Command, Envelope, RejectCode, Reply, TaskDone};
use crate::snapshot::{snapshot_state, TaskState, TaskView};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Start paused, so time moves only on `step` commands.
    pub start_paused: bool,
    /// Real-time multiplier while running unpaused.
    pub speed: f64,
    /// Ticks between streamed snapshots.
    pub snapshot_every: u64,
    /// Where to archive transcripts and maps after each task.
    pub out_dir: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            start_paused: false,
            speed: 1.0,
            snapshot_every: 5,
            out_dir: None,
        }
    }
}

pub enum Inbound {
    Line {
        conn: String,
        line: String,
        reply: Sender<Arc<str>>,
    },
    Shutdown,
}

/// Fan-out of server-originated lines to every connection, plus the latest
/// snapshot for polling clients.
#[derive(Clone, Default)]
pub struct Hub(Arc<Mutex<HubState>>);

#[derive(Default)]
struct HubState {
    subscribers: Vec<Sender<Arc<str>>>,
    latest_snapshot: Option<Arc<str>>,
}

impl Hub {
    fn state(&self) -> MutexGuard<'_, HubState> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Adds a subscriber and hands it the latest snapshot right away.
    pub fn subscribe(&self, tx: Sender<Arc<str>>) {
        let mut st = self.state();
        if let Some(s) = &st.latest_snapshot {
            let _ = tx.send(s.clone());
        }
        st.subscribers.push(tx);
    }

    pub fn latest_snapshot(&self) -> Option<Arc<str>> {
        self.state().latest_snapshot.clone()
    }

    fn set_latest(&self, line: Arc<str>) {
        self.state().latest_snapshot = Some(line);
    }

    fn broadcast(&self, line: Arc<str>, is_snapshot: bool) {
        let mut st = self.state();
        if is_snapshot {
            st.latest_snapshot = Some(line.clone());
        }
        st.subscribers.retain(|tx| tx.send(line.clone()).is_ok());
    }
}

/// Marker payload used to unwind out of a running task on shutdown.
struct ShutdownSignal;

struct Gateway {
    rx: Receiver<Inbound>,
    hub: Hub,
    dt: f64,
    snapshot_every: u64,
    paused: bool,
    speed: f64,
    credits: u64,
    last_tick_at: Instant,
    last_snapshot_tick: Option<u64>,
    seen: HashSet<(String, u64)>,
    view: TaskView,
    queued_task: Option<String>,
    shutdown: bool,
}

impl Gateway {
    fn publish_snapshot(&mut self, stack: &Stack) {
        if self.last_snapshot_tick.is_some_and(|t| t >= stack.tick()) {
            return;
        }
        self.last_snapshot_tick = Some(stack.tick());
        self.view.paused = self.paused;
        self.view.speed = self.speed;
        let line =
            serde_json::to_string(&snapshot_state(stack, &self.view)).expect("snapshot serializes");
        self.hub.broadcast(line.into(), true);
    }

    /// Replaces the polled snapshot without streaming it, for state changes
    /// that happen between ticks. Streams only ever carry new ticks.
    fn refresh_latest(&mut self, stack: &Stack) {
        self.view.paused = self.paused;
        self.view.speed = self.speed;
        let line =
            serde_json::to_string(&snapshot_state(stack, &self.view)).expect("snapshot serializes");
        self.hub.set_latest(line.into());
    }

    fn dispatch(&mut self, stack: &mut Stack, msg: Inbound) {
        match msg {
            Inbound::Shutdown => self.shutdown = true,
            Inbound::Line { conn, line, reply } => {
                let r = match parse_envelope(&line, &conn) {
                    Ok(env) => self.apply(stack, env),
                    Err(r) => r,
                };
                let _ = reply.send(r.to_line().into());
                self.refresh_latest(stack);
            }
        }
    }

    fn apply(&mut self, stack: &mut Stack, env: Envelope) -> Reply {
        let Envelope {
            client_id,
            request_id,
            command,
        } = env;
        if !self.seen.insert((client_id.clone(), request_id)) {
            return Reply::rejected(
                &client_id,
                Some(request_id),
                RejectCode::DuplicateRequest,
                "request id already used",
            );
        }
        let mut object_id = None;
        match command {
            Command::Task { text } => {
                if self.view.state == TaskState::Running || self.queued_task.is_some() {
                    return Reply::rejected(
                        &client_id,
                        Some(request_id),
                        RejectCode::TaskConflict,
                        "a task is already running",
                    );
                }
                self.queued_task = Some(text);
            }
            Command::Mutate { mut mutation } => {
                if let MutationKind::AddObject { object } = &mut mutation {
                    if object.id == 0 {
                        object.id = stack.world.objects.iter().map(|o| o.id).max().unwrap_or(0) + 1;
                    }
                    object_id = Some(object.id);
                }
                if let Err(e) = stack.world.apply_mutation(&mutation) {
                    return Reply::rejected(
                        &client_id,
                        Some(request_id),
                        RejectCode::InvalidMutation,
                        e.to_string(),
                    );
                }
            }
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            Command::Step { n } => self.credits += n,
            Command::Speed { x } => self.speed = x,
        }
        Reply::Ack {
            client_id,
            request_id,
            tick: stack.tick(),
            object_id,
        }
    }

    /// Blocks until the next tick may run: a step credit is available, or
    /// the run is unpaced-free and its real-time slot has come.
    fn wait_for_tick(&mut self, stack: &mut Stack) {
        loop {
            while let Ok(msg) = self.rx.try_recv() {
                self.dispatch(stack, msg);
            }
            if self.shutdown {
                return;
            }
            if self.credits > 0 {
                self.credits -= 1;
                break;
            }
            let msg = if self.paused {
                self.rx.recv().map_err(|_| RecvTimeoutError::Disconnected)
            } else {
                let due = self.last_tick_at + Duration::from_secs_f64(self.dt / self.speed);
                let now = Instant::now();
                if now >= due {
                    break;
                }
                self.rx.recv_timeout(due - now)
            };
            match msg {
                Ok(m) => self.dispatch(stack, m),
                Err(RecvTimeoutError::Timeout) => break,
                Err(RecvTimeoutError::Disconnected) => self.shutdown = true,
            }
        }
        self.last_tick_at = Instant::now();
    }
}

struct GatewayHook(Arc<Mutex<Gateway>>);

impl TickHook for GatewayHook {
    fn before_tick(&mut self, stack: &mut Stack) {
        let mut g = self.0.lock().unwrap_or_else(|e| e.into_inner());
        g.wait_for_tick(stack);
        if g.shutdown {
            drop(g);
            resume_unwind(Box::new(ShutdownSignal));
        }
    }

    fn after_tick(&mut self, stack: &Stack) {
        let mut g = self.0.lock().unwrap_or_else(|e| e.into_inner());
        if g.snapshot_every > 0 && stack.tick().is_multiple_of(g.snapshot_every) {
            g.publish_snapshot(stack);
        }
    }
}

/// One client's view of a session: commands go in through [`send`], and
/// replies, snapshots and task events arrive on `rx` in order.
///
/// [`send`]: Connection::send
pub struct Connection {
    pub sender: CommandSender,
    pub rx: Receiver<Arc<str>>,
}

impl Connection {
    /// Queues one command line; returns false once the session has ended.
    pub fn send(&self, line: impl Into<String>) -> bool {
        self.sender.send(line)
    }
}

/// The sending half of a [`Connection`].
#[derive(Clone)]
pub struct CommandSender {
    pub id: String,
    inbound: Sender<Inbound>,
    out: Sender<Arc<str>>,
}

impl CommandSender {
    pub fn send(&self, line: impl Into<String>) -> bool {
        self.inbound
            .send(Inbound::Line {
                conn: self.id.clone(),
                line: line.into(),
                reply: self.out.clone(),
            })
            .is_ok()
    }
}

#[derive(Clone)]
pub struct SessionHandle {
    inbound: Sender<Inbound>,
    pub hub: Hub,
}

impl SessionHandle {
    pub fn connect(&self, id: impl Into<String>) -> Connection {
        let (out, rx) = mpsc::channel();
        self.hub.subscribe(out.clone());
        Connection {
            sender: CommandSender {
                id: id.into(),
                inbound: self.inbound.clone(),
                out,
            },
            rx,
        }
    }

    /// Stops the session at its next tick boundary.
    pub fn shutdown(&self) {
        let _ = self.inbound.send(Inbound::Shutdown);
    }
}

/// Builds the scenario's stack on a new thread and serves commands until
/// shutdown. The thread's result reports setup failures such as an
/// unwritable output directory.
pub fn spawn(
    scenario: Scenario,
    seed: u64,
    opts: RunOptions,
    cfg: SessionConfig,
) -> (SessionHandle, JoinHandle<std::io::Result<()>>) {
    let (tx, rx) = mpsc::channel();
    let hub = Hub::default();
    let handle = SessionHandle {
        inbound: tx,
        hub: hub.clone(),
    };
    let join = std::thread::Builder::new()
        .name("orion-session".into())
        .spawn(move || run_session(scenario, seed, opts, cfg, rx, hub))
        .expect("spawn session thread");
    (handle, join)
}

fn run_session(
    scenario: Scenario,
    seed: u64,
    opts: RunOptions,
    cfg: SessionConfig,
    rx: Receiver<Inbound>,
    hub: Hub,
) -> std::io::Result<()> {
    let mut stack = scenario.build_stack(seed);
    let mut runner = TaskRunner::new(&scenario, seed, &opts, &mut stack);
    let gateway = Arc::new(Mutex::new(Gateway {
        rx,
        hub: hub.clone(),
        dt: stack.world.dt,
        snapshot_every: cfg.snapshot_every,
        paused: cfg.start_paused,
        speed: cfg.speed,
        credits: 0,
        last_tick_at: Instant::now(),
        last_snapshot_tick: None,
        seen: HashSet::new(),
        view: TaskView {
            paused: cfg.start_paused,
            speed: cfg.speed,
            ..TaskView::default()
        },
        queued_task: None,
        shutdown: false,
    }));
    stack.set_hook(Box::new(GatewayHook(gateway.clone())));
    let lock = || gateway.lock().unwrap_or_else(|e| e.into_inner());
    lock().publish_snapshot(&stack);
    let mut runs: Vec<TaskRun> = Vec::new();
    loop {
        let mut g = lock();
        if g.shutdown {
            return Ok(());
        }
        if let Some(text) = g.queued_task.take() {
            let task = scenario
                .tasks
                .iter()
                .find(|t| t.command == text)
                .cloned()
                .unwrap_or_else(|| Task::new(text));
            let index = runs.len();
            g.view = TaskView {
                state: TaskState::Running,
                index: Some(index),
                text: Some(task.command.clone()),
                ..g.view.clone()
            };
            drop(g);
            let target = target_of(&task);
            let run = match catch_unwind(AssertUnwindSafe(|| {
                runner.run(&mut stack, index, &task, target)
            })) {
                Ok(run) => run,
                Err(payload) if payload.is::<ShutdownSignal>() => return Ok(()),
                Err(payload) => resume_unwind(payload),
            };
            runs.push(run);
            let run = runs.last().expect("just pushed");
            if let Some(dir) = &cfg.out_dir {
                let all = ScenarioRun {
                    tasks: runs.clone(),
                };
                archive_run(dir, &scenario, seed, runner.kind(), &all, Some(&stack))?;
            }
            let mut g = lock();
            g.view.state = TaskState::Finished;
            g.view.success = Some(run.metrics.success);
            g.publish_snapshot(&stack);
            g.refresh_latest(&stack);
            let done = TaskDone {
                task_index: index,
                command: task.command.clone(),
                success: run.metrics.success,
                planner_steps: run.metrics.planner_steps,
                sim_ticks: run.metrics.sim_ticks,
                transcript: run
                    .result
                    .transcript
                    .iter()
                    .map(|r| transcript_line(index, r))
                    .collect(),
            };
            g.hub.broadcast(
                serde_json::to_string(&done)
                    .expect("event serializes")
                    .into(),
                false,
            );
            continue;
        }
        if g.credits > 0 {
            // Idle steps pass time in place; the hook consumes the credit.
            drop(g);
            match catch_unwind(AssertUnwindSafe(|| {
                stack.drive(VelocityCommand::new(0.0, 0.0))
            })) {
                Ok(_) => {}
                Err(payload) if payload.is::<ShutdownSignal>() => return Ok(()),
                Err(payload) => resume_unwind(payload),
            }
            continue;
        }
        match g.rx.recv() {
            Ok(msg) => g.dispatch(&mut stack, msg),
            Err(_) => return Ok(()),
        }
    }
}
