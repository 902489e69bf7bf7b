//! Ground-truth 2D environment: walls, labeled objects, the robot and its
//! simulated sensors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Point2, Pose2, Rect, Segment};
use crate::semantic_map::FrameObject;
use crate::vocab::SizeTier;

/// Minimum distance between an object position and any wall.
pub const OBJECT_WALL_CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub label: String,
    pub position: Point2,
    #[serde(default)]
    pub size_tier: SizeTier,
    #[serde(default = "default_true")]
    pub present: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose_true: Pose2,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotLimits {
    pub radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for RobotLimits {
    fn default() -> Self {
        Self {
            radius: 0.35,
            v_max: 0.5,
            omega_max: PI / 2.0,
        }
    }
}

/// Ground-truth room annotation, used only for evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomRegion {
    pub name: String,
    pub label: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub lidar_beams: usize,
    pub lidar_max_range: f64,
    pub detector_fov: f64,
    pub detector_max_range: f64,
    pub p_dropout: f64,
    pub p_misclass: f64,
    pub pos_jitter_sigma: f64,
    pub confusion_pairs: BTreeMap<String, String>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            lidar_beams: 180,
            lidar_max_range: 8.0,
            detector_fov: 1.5,
            detector_max_range: 5.0,
            p_dropout: 0.0,
            p_misclass: 0.0,
            pos_jitter_sigma: 0.0,
            confusion_pairs: BTreeMap::new(),
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(WorldError::InvalidConfig(format!(
                    "{name} must be in [0,1], got {p}"
                )))
            }
        };
        prob("p_dropout", self.p_dropout)?;
        prob("p_misclass", self.p_misclass)?;
        if self.lidar_max_range <= 0.0 || self.detector_max_range <= 0.0 {
            return Err(WorldError::InvalidConfig(
                "sensor ranges must be positive".into(),
            ));
        }
        if !(self.detector_fov > 0.0 && self.detector_fov <= 2.0 * PI) {
            return Err(WorldError::InvalidConfig(
                "detector_fov must be in (0, 2π]".into(),
            ));
        }
        if self.lidar_beams == 0 {
            return Err(WorldError::InvalidConfig(
                "lidar_beams must be positive".into(),
            ));
        }
        if self.pos_jitter_sigma < 0.0 {
            return Err(WorldError::InvalidConfig(
                "pos_jitter_sigma must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MutationKind {
    AddObject { object: ObjectInstance },
    RemoveObject { id: u32 },
    MoveObject { id: u32, to: Point2 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    #[serde(flatten)]
    pub kind: MutationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_tick: Option<u64>,
}

impl Mutation {
    pub fn now(kind: MutationKind) -> Self {
        Self {
            kind,
            at_tick: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("unknown object id {0}")]
    UnknownObject(u32),
    #[error("object id {0} is already present")]
    DuplicateObject(u32),
    #[error("object {label} at ({x:.2}, {y:.2}) overlaps a wall")]
    WallOverlap { label: String, x: f64, y: f64 },
    #[error("position ({x:.2}, {y:.2}) is outside the world bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Result of one kinematic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub width: f64,
    pub height: f64,
    pub walls: Vec<Segment>,
    pub objects: Vec<ObjectInstance>,
    pub rooms: Vec<RoomRegion>,
    pub robot: RobotState,
    pub limits: RobotLimits,
    pub tick: u64,
    pub dt: f64,
}

impl WorldModel {
    pub fn new(width: f64, height: f64, start: Pose2) -> Self {
        Self {
            width,
            height,
            walls: Vec::new(),
            objects: Vec::new(),
            rooms: Vec::new(),
            robot: RobotState {
                pose_true: start,
                v: 0.0,
                omega: 0.0,
            },
            limits: RobotLimits::default(),
            tick: 0,
            dt: 0.1,
        }
    }

    /// Adds the four boundary walls.
    pub fn with_boundary(mut self) -> Self {
        let (w, h) = (self.width, self.height);
        let c = [
            Point2::new(0.0, 0.0),
            Point2::new(w, 0.0),
            Point2::new(w, h),
            Point2::new(0.0, h),
        ];
        for i in 0..4 {
            self.walls.push(Segment::new(c[i], c[(i + 1) % 4]));
        }
        self
    }

    pub fn add_wall(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        self.walls
            .push(Segment::new(Point2::new(x0, y0), Point2::new(x1, y1)));
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.height)
    }

    pub fn object(&self, id: u32) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn present_objects(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter().filter(|o| o.present)
    }

    pub fn nearest_wall_distance(&self, p: &Point2) -> f64 {
        self.walls
            .iter()
            .map(|w| w.distance_to_point(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn footprint_collides(&self, p: &Point2) -> bool {
        self.nearest_wall_distance(p) < self.limits.radius
    }

    pub fn line_of_sight(&self, from: &Point2, to: &Point2) -> bool {
        let s = Segment::new(*from, *to);
        !self.walls.iter().any(|w| w.intersects(&s))
    }

    /// Unicycle integration with velocity clamping. A step whose end pose
    /// would put the footprint through a wall is discarded and reported.
    pub fn step_robot(&mut self, v: f64, omega: f64) -> StepOutcome {
        let v = v.clamp(-self.limits.v_max, self.limits.v_max);
        let omega = omega.clamp(-self.limits.omega_max, self.limits.omega_max);
        let p = self.robot.pose_true;
        let next = Pose2::new(
            p.x + v * p.theta.cos() * self.dt,
            p.y + v * p.theta.sin() * self.dt,
            p.theta + omega * self.dt,
        );
        self.tick += 1;
        if v != 0.0 && self.footprint_collides(&next.position()) {
            self.robot.v = 0.0;
            self.robot.omega = 0.0;
            return StepOutcome { collision: true };
        }
        self.robot = RobotState {
            pose_true: next,
            v,
            omega,
        };
        StepOutcome::default()
    }

    /// Range to the nearest wall along each of `beams` evenly spaced rays
    /// starting at the pose heading.
    pub fn raycast_lidar(&self, pose: &Pose2, beams: usize, max_range: f64) -> Vec<f64> {
        let origin = pose.position();
        (0..beams)
            .map(|i| {
                let a = pose.theta + 2.0 * PI * i as f64 / beams as f64;
                let dir = Point2::new(a.cos(), a.sin());
                self.walls
                    .iter()
                    .filter_map(|w| w.ray_intersection(&origin, &dir))
                    .fold(max_range, f64::min)
            })
            .collect()
    }

    /// Simulated object detector. Noise draws come from a generator keyed by
    /// `(seed, tick, object id)` so replays are exact.
    pub fn detect_objects(&self, pose: &Pose2, cfg: &SensorConfig, seed: u64) -> Vec<FrameObject> {
        let origin = pose.position();
        let mut out = Vec::new();
        let mut ids: Vec<&ObjectInstance> = self.present_objects().collect();
        ids.sort_by_key(|o| o.id);
        for obj in ids {
            let local = pose.inverse_transform_point(&obj.position);
            let range = local.norm();
            if range > cfg.detector_max_range {
                continue;
            }
            let bearing = local.y.atan2(local.x);
            if range > 0.0 && bearing.abs() > 0.5 * cfg.detector_fov {
                continue;
            }
            if !self.line_of_sight(&origin, &obj.position) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, self.tick, obj.id as u64));
            if cfg.p_dropout > 0.0 && rng.random::<f64>() < cfg.p_dropout {
                continue;
            }
            let mut label = obj.label.clone();
            if cfg.p_misclass > 0.0 && rng.random::<f64>() < cfg.p_misclass {
                if let Some(other) = cfg.confusion_pairs.get(&obj.label) {
                    label = other.clone();
                }
            }
            let mut position = local;
            if cfg.pos_jitter_sigma > 0.0 {
                let n = Normal::new(0.0, cfg.pos_jitter_sigma).expect("sigma validated");
                position.x += n.sample(&mut rng);
                position.y += n.sample(&mut rng);
            }
            out.push(FrameObject {
                label,
                position_robot: position,
                tick: self.tick,
            });
        }
        out
    }

    fn check_placement(&self, label: &str, p: &Point2) -> Result<(), WorldError> {
        if !self.bounds().contains(p) {
            return Err(WorldError::OutOfBounds { x: p.x, y: p.y });
        }
        if self.nearest_wall_distance(p) < OBJECT_WALL_CLEARANCE {
            return Err(WorldError::WallOverlap {
                label: label.to_string(),
                x: p.x,
                y: p.y,
            });
        }
        Ok(())
    }

    /// Applies a mutation atomically: on error the world is unchanged.
    pub fn apply_mutation(&mut self, m: &MutationKind) -> Result<(), WorldError> {
        match m {
            MutationKind::AddObject { object } => {
                self.check_placement(&object.label, &object.position)?;
                let mut object = object.clone();
                object.present = true;
                match self.objects.iter_mut().find(|o| o.id == object.id) {
                    Some(existing) if existing.present => {
                        return Err(WorldError::DuplicateObject(object.id))
                    }
                    Some(existing) => *existing = object,
                    None => {
                        self.objects.push(object);
                        self.objects.sort_by_key(|o| o.id);
                    }
                }
            }
            MutationKind::RemoveObject { id } => {
                let obj = self
                    .objects
                    .iter_mut()
                    .find(|o| o.id == *id && o.present)
                    .ok_or(WorldError::UnknownObject(*id))?;
                obj.present = false;
            }
            MutationKind::MoveObject { id, to } => {
                let label = self
                    .objects
                    .iter()
                    .find(|o| o.id == *id && o.present)
                    .ok_or(WorldError::UnknownObject(*id))?
                    .label
                    .clone();
                self.check_placement(&label, to)?;
                if let Some(obj) = self.objects.iter_mut().find(|o| o.id == *id) {
                    obj.position = *to;
                }
            }
        }
        Ok(())
    }

    /// Ground-truth occupancy at `resolution`, row-major from the origin.
    /// A cell is occupied when any wall passes through its square.
    pub fn rasterize(&self, resolution: f64) -> (usize, usize, Vec<bool>) {
        let w = (self.width / resolution).ceil() as usize;
        let h = (self.height / resolution).ceil() as usize;
        let mut occ = vec![false; w * h];
        for wall in &self.walls {
            let len = wall.a.distance(&wall.b);
            let steps = (len / (resolution * 0.25)).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let p = wall
                    .a
                    .add(&wall.b.sub(&wall.a).scale(s as f64 / steps as f64));
                let cx = ((p.x / resolution).floor() as i64).clamp(0, w as i64 - 1) as usize;
                let cy = ((p.y / resolution).floor() as i64).clamp(0, h as i64 - 1) as usize;
                occ[cy * w + cx] = true;
            }
        }
        (w, h, occ)
    }

    pub fn room_at(&self, p: &Point2) -> Option<&RoomRegion> {
        self.rooms.iter().find(|r| r.rect.contains(p))
    }
}

/// SplitMix64-style mixing of a run seed with per-event coordinates.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn bearing_to(pose: &Pose2, p: &Point2) -> f64 {
    normalize_angle((p.y - pose.y).atan2(p.x - pose.x) - pose.theta)
}
