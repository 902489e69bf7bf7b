//! The full robot stack over one world: odometry, mapping, semantic
//! updates and scene-graph refresh, advanced one tick per drive command.

use serde::{Deserialize, Serialize};

use crate::explore::ExploreConfig;
use crate::geometry::{Point2, Pose2};
use crate::localization::{
    maybe_keyframe, pull_toward, DriftConfig, OccupancyGrid, Odometry, PoseGraph,
    DEFAULT_KEYFRAME_ANGLE, DEFAULT_KEYFRAME_DISTANCE,
};
use crate::nav::{cbf_filter, NavConfig, VelocityCommand};
use crate::scene_graph::{generate, AreaConfig, RoomLabeler, RuleTableLabeler, SceneGraph};
use crate::semantic_map::{
    project_to_world, AssociationConfig, FrameObject, SemanticMap, WorldObservation,
};
use crate::world::{Mutation, SensorConfig, WorldError, WorldModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopClosureConfig {
    pub enabled: bool,
    /// A revisit is a return within this distance of an older keyframe.
    pub revisit_radius: f64,
    pub min_age_ticks: u64,
    pub cooldown_ticks: u64,
}

impl Default for LoopClosureConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            revisit_radius: 1.0,
            min_age_ticks: 300,
            cooldown_ticks: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub seed: u64,
    pub sensor: SensorConfig,
    pub drift: DriftConfig,
    pub association: AssociationConfig,
    pub area: AreaConfig,
    pub nav: NavConfig,
    pub explore: ExploreConfig,
    pub loop_closure: LoopClosureConfig,
    pub grid_resolution: f64,
    pub semantic_every: u64,
    pub graph_every: u64,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sensor: SensorConfig::default(),
            drift: DriftConfig::default(),
            association: AssociationConfig::default(),
            area: AreaConfig::default(),
            nav: NavConfig::default(),
            explore: ExploreConfig::default(),
            loop_closure: LoopClosureConfig::default(),
            grid_resolution: 0.05,
            semantic_every: 5,
            graph_every: 20,
        }
    }
}

/// Runs at every tick boundary; the only place outside code may touch a
/// running stack.
pub trait TickHook: Send {
    fn before_tick(&mut self, stack: &mut Stack);
    fn after_tick(&mut self, stack: &Stack);
}

/// Presentation state read by snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StackStatus {
    pub current_action: Option<String>,
    pub plan_log: Vec<String>,
    pub path: Vec<Point2>,
    pub frontiers: Vec<Point2>,
}

pub struct Stack {
    pub world: WorldModel,
    pub cfg: StackConfig,
    pub odometry: Odometry,
    pub pose_graph: PoseGraph,
    /// True pose at each keyframe, used to simulate loop closures.
    pub keyframe_truth: Vec<Pose2>,
    pub grid: OccupancyGrid,
    pub semantic: SemanticMap,
    pub graph: SceneGraph,
    pub labeler: Box<dyn RoomLabeler + Send>,
    pending: Vec<Mutation>,
    pub mutation_errors: Vec<(u64, WorldError)>,
    pub scan_points: Vec<Point2>,
    pub last_detections: Vec<FrameObject>,
    pub path_length: f64,
    pub collisions: u32,
    pub min_wall_distance: f64,
    pub explore_episodes: u64,
    last_closure_tick: Option<u64>,
    pub status: StackStatus,
    hook: Option<Box<dyn TickHook>>,
}

impl Stack {
    pub fn new(world: WorldModel, cfg: StackConfig) -> Self {
        let grid = OccupancyGrid::covering(world.width, world.height, cfg.grid_resolution);
        let start = world.robot.pose_true;
        let odometry = Odometry::new(start, cfg.drift, cfg.seed);
        let min_wall_distance = world.nearest_wall_distance(&start.position());
        let mut stack = Self {
            world,
            odometry,
            pose_graph: PoseGraph::default(),
            keyframe_truth: Vec::new(),
            grid,
            semantic: SemanticMap::default(),
            graph: SceneGraph::empty(0),
            labeler: Box::new(RuleTableLabeler::default()),
            pending: Vec::new(),
            mutation_errors: Vec::new(),
            scan_points: Vec::new(),
            last_detections: Vec::new(),
            path_length: 0.0,
            collisions: 0,
            min_wall_distance,
            explore_episodes: 0,
            last_closure_tick: None,
            status: StackStatus::default(),
            hook: None,
            cfg,
        };
        stack.pose_graph.push(start, 0);
        stack.keyframe_truth.push(start);
        stack.scan();
        stack
    }

    pub fn tick(&self) -> u64 {
        self.world.tick
    }

    pub fn pose_est(&self) -> Pose2 {
        self.odometry.pose()
    }

    pub fn pose_true(&self) -> Pose2 {
        self.world.robot.pose_true
    }

    pub fn set_hook(&mut self, hook: Box<dyn TickHook>) {
        self.hook = Some(hook);
    }

    pub fn take_hook(&mut self) -> Option<Box<dyn TickHook>> {
        self.hook.take()
    }

    /// Queues mutations; those without a tick apply at the next boundary.
    pub fn schedule(&mut self, mutations: impl IntoIterator<Item = Mutation>) {
        self.pending.extend(mutations);
        self.pending.sort_by_key(|m| m.at_tick.unwrap_or(0));
    }

    pub fn pending_mutations(&self) -> &[Mutation] {
        &self.pending
    }

    fn apply_due_mutations(&mut self) {
        let now = self.world.tick;
        let due: Vec<Mutation> = {
            let split = self
                .pending
                .partition_point(|m| m.at_tick.unwrap_or(0) <= now);
            self.pending.drain(..split).collect()
        };
        for m in due {
            if let Err(e) = self.world.apply_mutation(&m.kind) {
                log::warn!("mutation at tick {now} rejected: {e}");
                self.mutation_errors.push((now, e));
            }
        }
    }

    /// One tick: boundary hook, due mutations, safety filter, motion,
    /// sensing. Returns whether the motion collided.
    pub fn drive(&mut self, cmd: VelocityCommand) -> bool {
        if let Some(mut hook) = self.hook.take() {
            hook.before_tick(self);
            self.hook = Some(hook);
        }
        self.apply_due_mutations();
        let safe = cbf_filter(cmd, &self.pose_est(), &self.scan_points, &self.cfg.nav.cbf);
        let prev = self.world.robot.pose_true;
        let out = self.world.step_robot(safe.v, safe.omega);
        let next = self.world.robot.pose_true;
        if out.collision {
            self.collisions += 1;
        }
        self.odometry.advance(&prev, &next);
        self.path_length += prev.position().distance(&next.position());
        self.min_wall_distance = self
            .min_wall_distance
            .min(self.world.nearest_wall_distance(&next.position()));
        self.sense();
        if let Some(mut hook) = self.hook.take() {
            hook.after_tick(self);
            self.hook = Some(hook);
        }
        out.collision
    }

    fn scan(&mut self) {
        let truth = self.world.robot.pose_true;
        let est = self.pose_est();
        let max_range = self.cfg.sensor.lidar_max_range;
        let ranges = self
            .world
            .raycast_lidar(&truth, self.cfg.sensor.lidar_beams, max_range);
        self.grid.integrate_scan(&est, &ranges, max_range);
        let n = ranges.len();
        self.scan_points = ranges
            .iter()
            .enumerate()
            .filter(|(_, &r)| r < max_range)
            .map(|(i, &r)| {
                let a = est.theta + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Point2::new(est.x + r * a.cos(), est.y + r * a.sin())
            })
            .collect();
    }

    fn sense(&mut self) {
        self.scan();
        let tick = self.world.tick;
        let est = self.pose_est();
        let last = *self
            .pose_graph
            .last()
            .expect("stack starts with a keyframe");
        if let Some(kf) = maybe_keyframe(
            &est,
            &last,
            DEFAULT_KEYFRAME_DISTANCE,
            DEFAULT_KEYFRAME_ANGLE,
            tick,
        ) {
            self.pose_graph.push(kf.pose_est, tick);
            self.keyframe_truth.push(self.world.robot.pose_true);
        }
        self.maybe_close_loop();
        if self.cfg.semantic_every > 0 && tick.is_multiple_of(self.cfg.semantic_every) {
            self.observe();
        }
        if self.cfg.graph_every > 0 && tick.is_multiple_of(self.cfg.graph_every) {
            self.refresh_graph();
        }
    }

    /// Runs the detector and folds the frame into the semantic map.
    pub fn observe(&mut self) {
        let truth = self.world.robot.pose_true;
        let est = self.pose_est();
        let frame = self
            .world
            .detect_objects(&truth, &self.cfg.sensor, self.cfg.seed);
        let obs: Vec<WorldObservation> = frame
            .iter()
            .map(|f| WorldObservation {
                label: f.label.clone(),
                position: project_to_world(f, &est),
            })
            .collect();
        let anchor = *self
            .pose_graph
            .last()
            .expect("stack starts with a keyframe");
        self.semantic.associate_and_update(
            &obs,
            &self.pose_graph,
            &anchor,
            &self.cfg.association,
            self.world.tick,
        );
        self.last_detections = frame;
    }

    pub fn refresh_graph(&mut self) -> &SceneGraph {
        self.graph = generate(
            &self.semantic.objects,
            &self.cfg.area,
            self.labeler.as_mut(),
            self.world.tick,
        );
        &self.graph
    }

    fn maybe_close_loop(&mut self) {
        let lc = &self.cfg.loop_closure;
        if !lc.enabled || self.cfg.drift.is_zero() {
            return;
        }
        let tick = self.world.tick;
        if self
            .last_closure_tick
            .is_some_and(|t| tick < t + lc.cooldown_ticks)
        {
            return;
        }
        let here = self.world.robot.pose_true.position();
        let revisit = self
            .pose_graph
            .keyframes
            .iter()
            .zip(&self.keyframe_truth)
            .any(|(kf, t)| {
                kf.tick + lc.min_age_ticks <= tick
                    && t.position().distance(&here) <= lc.revisit_radius
            });
        if revisit {
            self.close_loop();
        }
    }

    /// Scripted loop closure: contracts every keyframe and the live estimate
    /// toward truth, then re-derives object positions.
    pub fn close_loop(&mut self) {
        let gain = self.cfg.drift.correction_gain;
        let tick = self.world.tick;
        self.pose_graph
            .simulate_loop_closure(&self.keyframe_truth, gain, tick);
        let truth = self.world.robot.pose_true;
        self.odometry.estimate.pose = pull_toward(&self.odometry.pose(), &truth, gain);
        if let Err(e) = self.semantic.relocate_after_correction(&self.pose_graph) {
            log::error!("relocation failed: {e}");
        }
        self.last_closure_tick = Some(tick);
    }

    /// Builds an initial map from stationary full turns at each viewpoint
    /// with perfect localization, then returns the robot to its start. The
    /// tick counter is restored so scenario timing starts at zero.
    pub fn premap(&mut self, viewpoints: &[Point2]) {
        if viewpoints.is_empty() {
            return;
        }
        let start = self.world.robot.pose_true;
        let tick0 = self.world.tick;
        let steps = 16;
        for vp in viewpoints {
            for k in 0..steps {
                let pose = Pose2::new(
                    vp.x,
                    vp.y,
                    2.0 * std::f64::consts::PI * k as f64 / steps as f64,
                );
                self.world.robot.pose_true = pose;
                self.odometry.estimate.pose = pose;
                self.world.tick += 1;
                self.pose_graph.push(pose, self.world.tick);
                self.keyframe_truth.push(pose);
                self.scan();
                self.observe();
            }
        }
        self.world.robot.pose_true = start;
        self.odometry.estimate.pose = start;
        self.world.tick = tick0;
        self.pose_graph.push(start, tick0);
        self.keyframe_truth.push(start);
        self.scan();
        self.refresh_graph();
    }
}
