//! Consistent per-tick views of a running stack.

use orion_core::geometry::{Point2, Pose2};
use orion_core::stack::Stack;
use serde::{Deserialize, Serialize};

use crate::rle::{encode, GridRle};

/// Plan log entries carried per snapshot; older ones are in the transcript.
pub const PLAN_LOG_TAIL: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub pose_true: Pose2,
    pub pose_est: Pose2,
    /// Waypoints of the path being followed, if any.
    pub path: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub name: String,
    pub label: String,
    pub instance_id: u32,
    pub position: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Idle,
    Running,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub state: TaskState,
    /// Index of the current or last task in this session.
    pub index: Option<usize>,
    pub text: Option<String>,
    pub current_action: Option<String>,
    /// Outcome of the last finished task.
    pub success: Option<bool>,
    pub paused: bool,
    pub speed: f64,
}

impl Default for TaskView {
    fn default() -> Self {
        Self {
            state: TaskState::Idle,
            index: None,
            text: None,
            current_action: None,
            success: None,
            paused: false,
            speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(rename = "type")]
    pub kind: String,
    pub tick: u64,
    pub robot: RobotView,
    pub grid_rle: GridRle,
    pub objects: Vec<ObjectView>,
    pub scene_graph: serde_json::Value,
    pub frontiers: Vec<Point2>,
    pub plan_log: Vec<String>,
    pub task: TaskView,
}

/// Assembles a snapshot from the stack as it stands; callers invoke it only
/// between ticks, so every field comes from the same tick.
pub fn snapshot_state(stack: &Stack, task: &TaskView) -> Snapshot {
    let mut task = task.clone();
    task.current_action = stack.status.current_action.clone();
    let log = &stack.status.plan_log;
    Snapshot {
        kind: "snapshot".into(),
        tick: stack.tick(),
        robot: RobotView {
            pose_true: stack.pose_true(),
            pose_est: stack.pose_est(),
            path: stack.status.path.clone(),
        },
        grid_rle: encode(&stack.grid),
        objects: stack
            .semantic
            .objects
            .iter()
            .map(|o| ObjectView {
                name: o.name(),
                label: o.label.clone(),
                instance_id: o.instance_id,
                position: o.position_world,
            })
            .collect(),
        scene_graph: serde_json::from_str(&stack.graph.serialize())
            .expect("scene graph serializes to JSON"),
        frontiers: stack.status.frontiers.clone(),
        plan_log: log[log.len().saturating_sub(PLAN_LOG_TAIL)..].to_vec(),
        task,
    }
}
