//! Versioned JSON scenario format: world, configuration overrides, tasks,
//! timed mutations and seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explore::ExploreConfig;
use crate::geometry::{Point2, Pose2, Segment};
use crate::localization::DriftConfig;
use crate::nav::NavConfig;
use crate::planner::{Budget, PlannerConfig, Task};
use crate::semantic_map::AssociationConfig;
use crate::stack::{LoopClosureConfig, Stack, StackConfig};
use crate::vocab::{self, TargetSpec};
use crate::world::{Mutation, MutationKind, ObjectInstance, RoomRegion, SensorConfig, WorldModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[default]
    Oracle,
    Llm,
    #[serde(rename = "frontier")]
    FrontierSearch,
    #[serde(rename = "objectmap")]
    ObjectMapSearch,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Oracle => "oracle",
            PlannerKind::Llm => "llm",
            PlannerKind::FrontierSearch => "frontier",
            PlannerKind::ObjectMapSearch => "objectmap",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "llm" => Ok(Self::Llm),
            "frontier" => Ok(Self::FrontierSearch),
            "objectmap" => Ok(Self::ObjectMapSearch),
            other => Err(format!(
                "unknown planner {other:?} (expected oracle, llm, frontier or objectmap)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_true")]
    pub boundary: bool,
    /// Wall segments as `[x0, y0, x1, y1]`.
    #[serde(default)]
    pub walls: Vec<[f64; 4]>,
    #[serde(default)]
    pub objects: Vec<ObjectInstance>,
    #[serde(default)]
    pub rooms: Vec<RoomRegion>,
    pub robot_start: Pose2,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association: Option<AssociationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore: Option<ExploreConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nav: Option<NavConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_closure: Option<LoopClosureConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub world: WorldSpec,
    #[serde(default)]
    pub config: ConfigOverrides,
    /// Viewpoints scanned before the run to build a partial prior map.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub premap: Vec<Point2>,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mutations: Vec<Mutation>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub budget: Budget,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario schema violation: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Version(u32),
    #[error("unknown object label {label:?} in {field}")]
    UnknownLabel { label: String, field: String },
    #[error("invalid geometry in {field}: {reason}")]
    Geometry { field: String, reason: String },
    #[error("invalid value in {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Pretty JSON with a trailing newline; field order is fixed by the
    /// schema so equal scenarios serialize to equal bytes.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(self.schema_version));
        }
        let invalid = |field: &str, reason: &str| ScenarioError::Invalid {
            field: field.into(),
            reason: reason.into(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must be nonempty"));
        }
        if self.tasks.is_empty() {
            return Err(invalid("tasks", "at least one task is required"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.command.trim().is_empty() {
                return Err(invalid(&format!("tasks[{i}].command"), "must be nonempty"));
            }
            if let Some(TargetSpec::Object(l)) = &t.target {
                if !vocab::is_known_object(l) {
                    return Err(ScenarioError::UnknownLabel {
                        label: l.clone(),
                        field: format!("tasks[{i}].target"),
                    });
                }
            }
        }
        if let Some(s) = &self.config.sensor {
            s.validate()
                .map_err(|e| invalid("config.sensor", &e.to_string()))?;
        }
        if let Some(a) = &self.config.association {
            a.validate()
                .map_err(|e| invalid("config.association", &e))?;
        }
        let w = &self.world;
        if !(w.width > 0.0 && w.height > 0.0) {
            return Err(ScenarioError::Geometry {
                field: "world".into(),
                reason: "width and height must be positive".into(),
            });
        }
        let world = self.build_world();
        let bounds = world.bounds();
        for (i, o) in w.objects.iter().enumerate() {
            let field = format!("world.objects[{i}]");
            check_object(&world, o, &field)?;
        }
        if w.objects
            .iter()
            .enumerate()
            .any(|(i, a)| w.objects[..i].iter().any(|b| b.id == a.id))
        {
            return Err(invalid("world.objects", "object ids must be unique"));
        }
        let start = w.robot_start.position();
        if !bounds.contains(&start) || world.footprint_collides(&start) {
            return Err(ScenarioError::Geometry {
                field: "world.robot_start".into(),
                reason: "robot footprint must lie inside the world and clear of walls".into(),
            });
        }
        for (i, p) in self.premap.iter().enumerate() {
            if !bounds.contains(p) {
                return Err(ScenarioError::Geometry {
                    field: format!("premap[{i}]"),
                    reason: "outside the world".into(),
                });
            }
        }
        for (i, m) in self.mutations.iter().enumerate() {
            let field = format!("mutations[{i}]");
            if m.at_tick.is_some_and(|t| t > self.budget.max_ticks) {
                return Err(invalid(
                    &format!("{field}.at_tick"),
                    "beyond the run budget",
                ));
            }
            match &m.kind {
                MutationKind::AddObject { object } => {
                    check_object(&world, object, &format!("{field}.object"))?
                }
                MutationKind::MoveObject { to, .. } => {
                    if !bounds.contains(to) {
                        return Err(ScenarioError::Geometry {
                            field: format!("{field}.to"),
                            reason: "outside the world".into(),
                        });
                    }
                }
                MutationKind::RemoveObject { .. } => {}
            }
        }
        Ok(())
    }

    pub fn build_world(&self) -> WorldModel {
        let w = &self.world;
        let mut world = WorldModel::new(w.width, w.height, w.robot_start);
        if w.boundary {
            world = world.with_boundary();
        }
        for s in &w.walls {
            world.walls.push(Segment::new(
                Point2::new(s[0], s[1]),
                Point2::new(s[2], s[3]),
            ));
        }
        world.objects = w.objects.clone();
        world.rooms = w.rooms.clone();
        world
    }

    pub fn stack_config(&self, seed: u64) -> StackConfig {
        let c = &self.config;
        let mut cfg = StackConfig {
            seed,
            ..StackConfig::default()
        };
        if let Some(s) = &c.sensor {
            cfg.sensor = s.clone();
        }
        if let Some(d) = &c.drift {
            cfg.drift = *d;
        }
        if let Some(a) = &c.association {
            cfg.association = a.clone();
        }
        if let Some(e) = &c.explore {
            cfg.explore = e.clone();
        }
        if let Some(n) = &c.nav {
            cfg.nav = n.clone();
        }
        if let Some(l) = &c.loop_closure {
            cfg.loop_closure = l.clone();
        }
        cfg
    }

    pub fn planner_config(&self) -> PlannerConfig {
        self.config.planner.clone().unwrap_or_default()
    }

    /// World, premap and scheduled mutations, ready for the first task.
    pub fn build_stack(&self, seed: u64) -> Stack {
        let mut stack = Stack::new(self.build_world(), self.stack_config(seed));
        stack.premap(&self.premap);
        stack.schedule(self.mutations.iter().cloned());
        stack
    }

    /// The evaluation target of task `i`: the declared one, else what the
    /// command names.
    pub fn task_target(&self, i: usize) -> Option<TargetSpec> {
        target_of(&self.tasks[i])
    }
}

/// The evaluation target of a task: the declared one, else what the command
/// names.
pub fn target_of(t: &Task) -> Option<TargetSpec> {
    t.target.clone().or_else(|| {
        let rooms: Vec<String> = vocab::DEFAULT_CANDIDATE_ROOMS
            .iter()
            .map(|s| s.to_string())
            .collect();
        vocab::parse_command(&t.command, &rooms)
    })
}

fn check_object(world: &WorldModel, o: &ObjectInstance, field: &str) -> Result<(), ScenarioError> {
    if !vocab::is_known_object(&o.label) {
        return Err(ScenarioError::UnknownLabel {
            label: o.label.clone(),
            field: format!("{field}.label"),
        });
    }
    if !world.bounds().contains(&o.position) {
        return Err(ScenarioError::Geometry {
            field: format!("{field}.position"),
            reason: "outside the world".into(),
        });
    }
    if world.nearest_wall_distance(&o.position) < crate::world::OBJECT_WALL_CLEARANCE {
        return Err(ScenarioError::Geometry {
            field: format!("{field}.position"),
            reason: "overlaps a wall".into(),
        });
    }
    Ok(())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::from_json(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, s.to_canonical_json())
}

/// A suite: scenario files (relative to the manifest), optional seed
/// override and the backends to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub name: String,
    pub scenarios: Vec<std::path::PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    pub backends: Vec<PlannerKind>,
}

impl SuiteManifest {
    /// Reads the manifest and every scenario it lists.
    pub fn load(path: &Path) -> Result<(Self, Vec<Scenario>), ScenarioError> {
        let m: SuiteManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.backends.is_empty() {
            return Err(ScenarioError::Invalid {
                field: "backends".into(),
                reason: "at least one backend is required".into(),
            });
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let scenarios = m
            .scenarios
            .iter()
            .map(|p| load_scenario(&base.join(p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((m, scenarios))
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
