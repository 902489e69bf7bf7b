//! Bundled scenario library: office floors with rooms along a straight
//! corridor, generated programmatically and exported to JSON.
//!
//! Groups: `a` (target visible from the start), `b` (target in a distant
//! room), `c` (room-finding), `dyn` (partial prior map plus an object added
//! after mapping, for baseline comparison).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::geometry::{Point2, Pose2, Rect, Segment};
use crate::harness::scenario::{
    save_scenario, ConfigOverrides, PlannerKind, Scenario, SuiteManifest, WorldSpec, SCHEMA_VERSION,
};
use crate::planner::{Budget, Task};
use crate::vocab::{size_tier, TargetSpec};
use crate::world::{Mutation, MutationKind, ObjectInstance, RoomRegion, SensorConfig};

pub const ROOM_WIDTH: f64 = 5.0;
pub const ROOM_DEPTH: f64 = 5.0;
pub const CORRIDOR_WIDTH: f64 = 2.0;
pub const DOOR_WIDTH: f64 = 1.2;
/// Thickness of the end face placed on free wall ends.
pub const FRAME_DEPTH: f64 = 0.1;
pub const SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoomKind {
    Office,
    BreakRoom,
    ConferenceRoom,
    StorageRoom,
    Empty,
}

impl RoomKind {
    fn label(self) -> &'static str {
        match self {
            RoomKind::Office => "office",
            RoomKind::BreakRoom => "break room",
            RoomKind::ConferenceRoom => "conference room",
            RoomKind::StorageRoom => "storage room",
            RoomKind::Empty => "storage room",
        }
    }

    /// Furniture as (label, u, v) in the room's object zone; `v = 1` is the
    /// side away from the door.
    fn furniture(self) -> &'static [(&'static str, f64, f64)] {
        match self {
            RoomKind::Office => &[
                ("desk", 0.2, 0.6),
                ("monitor", 0.25, 0.75),
                ("computer", 0.05, 0.85),
                ("chair", 0.35, 0.3),
                ("cabinet", 0.95, 0.95),
                ("printer", 0.9, 0.2),
            ],
            RoomKind::BreakRoom => &[
                ("table", 0.5, 0.5),
                ("chair", 0.2, 0.35),
                ("coffee maker", 0.0, 1.0),
                ("microwave", 0.35, 1.0),
                ("refrigerator", 1.0, 0.9),
                ("sink", 0.7, 1.0),
            ],
            RoomKind::ConferenceRoom => &[
                ("table", 0.5, 0.5),
                ("chair", 0.15, 0.3),
                ("chair", 0.85, 0.75),
                ("projector", 0.5, 0.0),
                ("whiteboard", 0.5, 1.0),
                ("tv", 1.0, 0.4),
            ],
            RoomKind::StorageRoom => &[
                ("box", 0.2, 0.3),
                ("box", 0.8, 0.7),
                ("cabinet", 0.0, 1.0),
                ("bookshelf", 1.0, 1.0),
            ],
            RoomKind::Empty => &[],
        }
    }
}

fn mm(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// One room slot: side of the corridor, column index, contents.
#[derive(Debug, Clone)]
pub struct RoomSpec {
    pub side: Side,
    pub col: usize,
    pub kind: RoomKind,
    /// Furniture labels left out of this room.
    pub omit: Vec<&'static str>,
    /// Additional (label, u, v) items.
    pub extra: Vec<(&'static str, f64, f64)>,
}

impl RoomSpec {
    pub fn new(side: Side, col: usize, kind: RoomKind) -> Self {
        Self {
            side,
            col,
            kind,
            omit: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn omit(mut self, labels: &[&'static str]) -> Self {
        self.omit.extend_from_slice(labels);
        self
    }

    pub fn with(mut self, label: &'static str, u: f64, v: f64) -> Self {
        self.extra.push((label, u, v));
        self
    }
}

/// A floor of `cols` room columns on each side of a corridor.
pub struct Floor {
    pub cols: usize,
    /// Door centre measured from each room's left wall.
    pub door_offset: f64,
    pub walls: Vec<[f64; 4]>,
    pub objects: Vec<ObjectInstance>,
    pub rooms: Vec<RoomRegion>,
    next_id: u32,
}

impl Floor {
    pub fn width(&self) -> f64 {
        self.cols as f64 * ROOM_WIDTH
    }

    pub fn height(&self) -> f64 {
        2.0 * ROOM_DEPTH + CORRIDOR_WIDTH
    }

    pub fn corridor_y(&self) -> f64 {
        ROOM_DEPTH + 0.5 * CORRIDOR_WIDTH
    }

    pub fn room_rect(&self, side: Side, col: usize) -> Rect {
        let x0 = col as f64 * ROOM_WIDTH;
        match side {
            Side::Lower => Rect::new(x0, 0.0, x0 + ROOM_WIDTH, ROOM_DEPTH),
            Side::Upper => Rect::new(
                x0,
                ROOM_DEPTH + CORRIDOR_WIDTH,
                x0 + ROOM_WIDTH,
                self.height(),
            ),
        }
    }

    /// World point for zone coordinates of a room.
    pub fn zone_point(&self, side: Side, col: usize, u: f64, v: f64) -> Point2 {
        let r = self.room_rect(side, col);
        let x = r.min.x + 1.3 + u * (ROOM_WIDTH - 2.6);
        let y = match side {
            Side::Lower => 3.0 - 2.0 * v,
            Side::Upper => r.min.y + 2.0 + 2.0 * v,
        };
        Point2::new(mm(x), mm(y))
    }

    /// A free point just inside the room's door.
    pub fn door_inside(&self, side: Side, col: usize) -> Point2 {
        let r = self.room_rect(side, col);
        let x = r.min.x + self.door_offset;
        match side {
            Side::Lower => Point2::new(mm(x), ROOM_DEPTH - 1.0),
            Side::Upper => Point2::new(mm(x), r.min.y + 1.0),
        }
    }

    pub fn room_center(&self, side: Side, col: usize) -> Point2 {
        self.room_rect(side, col).center()
    }

    pub fn corridor_point(&self, x: f64) -> Point2 {
        Point2::new(x, self.corridor_y())
    }

    pub fn new(cols: usize, rooms: &[RoomSpec]) -> Self {
        Self::with_doors(cols, 0.5 * ROOM_WIDTH, rooms)
    }

    pub fn with_doors(cols: usize, door_offset: f64, rooms: &[RoomSpec]) -> Self {
        let mut f = Floor {
            cols,
            door_offset,
            walls: Vec::new(),
            objects: Vec::new(),
            rooms: Vec::new(),
            next_id: 1,
        };
        let w = f.width();
        let (yl, yu) = (ROOM_DEPTH, ROOM_DEPTH + CORRIDOR_WIDTH);
        let doors: Vec<f64> = (0..cols)
            .map(|c| c as f64 * ROOM_WIDTH + door_offset)
            .collect();
        for y in [yl, yu] {
            let mut x = 0.0;
            for d in &doors {
                f.walls.push([x, y, d - 0.5 * DOOR_WIDTH, y]);
                x = d + 0.5 * DOOR_WIDTH;
            }
            f.walls.push([x, y, w, y]);
        }
        for c in 1..cols {
            let x = c as f64 * ROOM_WIDTH;
            f.walls.push([x, 0.0, x, yl]);
            f.walls.push([x, yu, x, f.height()]);
        }
        f.rooms.push(RoomRegion {
            name: "corridor".into(),
            label: "corridor".into(),
            rect: Rect::new(0.0, yl, w, yu),
        });
        let mut counts = std::collections::BTreeMap::<&str, u32>::new();
        for spec in rooms {
            let label = spec.kind.label();
            let n = counts.entry(label).and_modify(|n| *n += 1).or_insert(1);
            f.rooms.push(RoomRegion {
                name: format!("{label} {n}"),
                label: label.into(),
                rect: f.room_rect(spec.side, spec.col),
            });
            let items: Vec<(&str, f64, f64)> = spec
                .kind
                .furniture()
                .iter()
                .filter(|(l, _, _)| !spec.omit.contains(l))
                .chain(spec.extra.iter())
                .copied()
                .collect();
            for (label, u, v) in items {
                let p = f.zone_point(spec.side, spec.col, u, v);
                f.add(label, p);
            }
        }
        f
    }

    pub fn add(&mut self, label: &str, p: Point2) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.objects.push(ObjectInstance {
            id,
            label: label.into(),
            position: p,
            size_tier: size_tier(label),
            present: true,
        });
        id
    }

    /// Takes an object out of the initial world, returning it for a later
    /// add mutation.
    pub fn take(&mut self, label: &str, near: &Point2) -> ObjectInstance {
        let i = self
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.label == label)
            .min_by(|a, b| {
                a.1.position
                    .distance(near)
                    .total_cmp(&b.1.position.distance(near))
            })
            .map(|(i, _)| i)
            .expect("object to take exists");
        self.objects.remove(i)
    }

    pub fn world(&self, start: Pose2) -> WorldSpec {
        WorldSpec {
            width: self.width(),
            height: self.height(),
            boundary: true,
            walls: with_frames(&self.walls, self.width(), self.height())
                .into_iter()
                .map(|w| w.map(mm))
                .collect(),
            objects: self.objects.clone(),
            rooms: self.rooms.clone(),
            robot_start: start,
        }
    }
}

/// Adds a short end face across every wall end that touches neither the
/// boundary nor another wall. Walls are zero-thickness segments, so a bare
/// end seen edge-on falls between lidar beams; the face keeps it visible.
fn with_frames(walls: &[[f64; 4]], width: f64, height: f64) -> Vec<[f64; 4]> {
    let segs: Vec<Segment> = walls
        .iter()
        .map(|w| Segment::new(Point2::new(w[0], w[1]), Point2::new(w[2], w[3])))
        .collect();
    let mut out = walls.to_vec();
    for (i, s) in segs.iter().enumerate() {
        let dir = s.b.sub(&s.a);
        let len = dir.norm();
        if len == 0.0 {
            continue;
        }
        let normal = Point2::new(-dir.y / len, dir.x / len).scale(0.5 * FRAME_DEPTH);
        for end in [s.a, s.b] {
            let on_boundary = end.x <= 0.0 || end.y <= 0.0 || end.x >= width || end.y >= height;
            let joined = segs
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && o.distance_to_point(&end) < 1e-9);
            if !on_boundary && !joined {
                let (p, q) = (end.add(&normal), end.sub(&normal));
                out.push([p.x, p.y, q.x, q.y]);
            }
        }
    }
    out
}

fn mild_noise() -> ConfigOverrides {
    ConfigOverrides {
        sensor: Some(SensorConfig {
            p_dropout: 0.1,
            pos_jitter_sigma: 0.03,
            ..SensorConfig::default()
        }),
        ..ConfigOverrides::default()
    }
}

fn scenario(name: String, description: &str, world: WorldSpec, task: Task) -> Scenario {
    Scenario {
        schema_version: SCHEMA_VERSION,
        name,
        description: description.into(),
        world,
        config: mild_noise(),
        premap: Vec::new(),
        tasks: vec![task],
        mutations: Vec::new(),
        seeds: SEEDS.to_vec(),
        planner: PlannerKind::Oracle,
        budget: Budget::default(),
    }
}

fn object_task(command: &str, label: &str) -> Task {
    Task {
        command: command.into(),
        target: Some(TargetSpec::Object(label.into())),
    }
}

fn room_task(command: &str, label: &str) -> Task {
    Task {
        command: command.into(),
        target: Some(TargetSpec::Room(label.into())),
    }
}

use RoomKind::*;
use Side::*;

fn standard_floor() -> Vec<RoomSpec> {
    vec![
        RoomSpec::new(Lower, 0, Office),
        RoomSpec::new(Lower, 1, BreakRoom),
        RoomSpec::new(Lower, 2, ConferenceRoom),
        RoomSpec::new(Lower, 3, StorageRoom),
        RoomSpec::new(Upper, 0, ConferenceRoom),
        RoomSpec::new(Upper, 1, Office),
        RoomSpec::new(Upper, 2, BreakRoom),
        RoomSpec::new(Upper, 3, Office),
    ]
}

/// Robot standing in a room facing `heading`, some way in from the door.
fn in_room(f: &Floor, side: Side, col: usize, du: f64, heading: f64) -> Pose2 {
    let d = f.door_inside(side, col);
    Pose2::new(mm(d.x + du), d.y, heading)
}

pub fn scenario_a() -> Vec<Scenario> {
    // (room side, col, target label, command, start offset along x, heading)
    let cases: [(Side, usize, &str, &str, f64, f64); 12] = [
        (Lower, 0, "printer", "find a printer", 0.0, -PI / 2.0),
        (Lower, 1, "microwave", "find the microwave", -0.8, PI),
        (Lower, 1, "coffee maker", "go to the coffee maker", 0.5, 0.0),
        (Lower, 2, "projector", "find a projector", 0.0, PI / 2.0),
        (Lower, 3, "box", "find a box", 0.7, -PI / 2.0),
        (Upper, 0, "whiteboard", "find the whiteboard", -0.5, 0.0),
        (Upper, 1, "monitor", "find a monitor", 0.6, PI / 2.0),
        (Upper, 1, "computer", "go to the computer", 0.0, PI),
        (
            Upper,
            2,
            "refrigerator",
            "find the refrigerator",
            -0.6,
            -PI / 2.0,
        ),
        (Upper, 2, "sink", "find a sink", 0.9, PI / 4.0),
        (
            Upper,
            3,
            "cabinet",
            "find a cabinet in the office",
            0.0,
            0.0,
        ),
        (Lower, 2, "tv", "find the tv", -0.9, PI),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(i, &(side, col, label, cmd, du, heading))| {
            let f = Floor::new(4, &standard_floor());
            let start = in_room(&f, side, col, du, heading);
            scenario(
                format!("a-{:02}", i + 1),
                "short range retrieval: the target shares the starting room",
                f.world(start),
                object_task(cmd, label),
            )
        })
        .collect()
}

pub fn scenario_b() -> Vec<Scenario> {
    // Each floor holds exactly one instance of the target, far from the start.
    let floors: Vec<(Vec<RoomSpec>, Pose2Spec, &str, &str)> = vec![
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Upper && r.col == 2 {
                        r
                    } else {
                        r.omit(&["microwave"])
                    }
                })
                .collect(),
            Pose2Spec::Room(Lower, 0, 0.0, PI / 2.0),
            "microwave",
            "find a microwave",
        ),
        (
            without(&standard_floor(), "projector", (Lower, 2)),
            Pose2Spec::Room(Upper, 3, 0.0, -PI / 2.0),
            "projector",
            "find a projector",
        ),
        (
            without(&standard_floor(), "printer", (Upper, 3)),
            Pose2Spec::Room(Lower, 0, -0.5, 0.0),
            "printer",
            "find a printer",
        ),
        (
            without(&standard_floor(), "refrigerator", (Lower, 1)),
            Pose2Spec::Corridor(19.0, PI),
            "refrigerator",
            "find the refrigerator",
        ),
        (
            without(&standard_floor(), "whiteboard", (Lower, 2)),
            Pose2Spec::Room(Upper, 0, 0.5, PI / 2.0),
            "whiteboard",
            "find a whiteboard",
        ),
        (
            without(&standard_floor(), "sink", (Upper, 2)),
            Pose2Spec::Room(Lower, 0, 0.0, 0.0),
            "sink",
            "find a sink",
        ),
        (
            without(&standard_floor(), "coffee maker", (Upper, 2)),
            Pose2Spec::Corridor(1.0, 0.0),
            "coffee maker",
            "find a coffee maker",
        ),
        (
            without(&standard_floor(), "tv", (Upper, 0)),
            Pose2Spec::Room(Lower, 3, 0.0, PI),
            "tv",
            "find the tv",
        ),
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Lower && r.col == 3 {
                        r.with("bag", 0.5, 0.0)
                    } else {
                        r
                    }
                })
                .collect(),
            Pose2Spec::Room(Upper, 0, 0.0, 0.0),
            "bag",
            "find my bag",
        ),
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Upper && r.col == 3 {
                        r.with("book", 0.6, 0.5)
                    } else {
                        r
                    }
                })
                .collect(),
            Pose2Spec::Corridor(2.0, 0.0),
            "book",
            "find a book",
        ),
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Lower && r.col == 2 {
                        r.with("bottle", 0.3, 0.7)
                    } else {
                        r
                    }
                })
                .collect(),
            Pose2Spec::Room(Upper, 0, 0.0, PI / 2.0),
            "bottle",
            "find a water bottle",
        ),
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Upper && r.col == 2 {
                        r.with("cup", 0.55, 0.8)
                    } else {
                        r
                    }
                })
                .collect(),
            Pose2Spec::Room(Lower, 0, 0.5, PI),
            "cup",
            "find a cup",
        ),
        (
            standard_floor()
                .into_iter()
                .map(|r| {
                    if r.side == Lower && r.col == 3 {
                        r.with("lamp", 0.5, 1.0)
                    } else {
                        r
                    }
                })
                .collect(),
            Pose2Spec::Room(Upper, 1, 0.0, 0.0),
            "lamp",
            "find a lamp",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, StorageRoom),
                RoomSpec::new(Lower, 1, Office),
                RoomSpec::new(Lower, 2, ConferenceRoom),
                RoomSpec::new(Lower, 3, Office).omit(&["printer"]),
                RoomSpec::new(Lower, 4, BreakRoom),
                RoomSpec::new(Upper, 0, Office).omit(&["printer"]),
                RoomSpec::new(Upper, 1, ConferenceRoom),
                RoomSpec::new(Upper, 2, StorageRoom),
                RoomSpec::new(Upper, 3, Office).omit(&["printer"]),
                RoomSpec::new(Upper, 4, BreakRoom),
            ]
            .into_iter()
            .map(|r| {
                if r.side == Lower && r.col == 1 {
                    r.omit(&["printer"])
                } else {
                    r
                }
            })
            .chain([RoomSpec::new(Lower, 5, Office)])
            .collect(),
            Pose2Spec::Room(Lower, 0, 0.0, PI / 2.0),
            "printer",
            "find a printer",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, Office),
                RoomSpec::new(Lower, 1, Office),
                RoomSpec::new(Lower, 2, StorageRoom),
                RoomSpec::new(Lower, 3, ConferenceRoom),
                RoomSpec::new(Lower, 4, BreakRoom).omit(&["coffee maker"]),
                RoomSpec::new(Upper, 0, ConferenceRoom),
                RoomSpec::new(Upper, 1, StorageRoom),
                RoomSpec::new(Upper, 2, Office),
                RoomSpec::new(Upper, 3, Office),
                RoomSpec::new(Upper, 4, BreakRoom).omit(&["microwave"]),
            ],
            Pose2Spec::Corridor(1.0, 0.0),
            "microwave",
            "find the microwave",
        ),
    ];
    floors
        .into_iter()
        .enumerate()
        .map(|(i, (rooms, start, label, cmd))| {
            let cols = rooms.iter().map(|r| r.col + 1).max().unwrap_or(1);
            let f = Floor::new(cols, &rooms);
            scenario(
                format!("b-{:02}", i + 1),
                "long range retrieval: the target is in a distant room",
                f.world(start.resolve(&f)),
                object_task(cmd, label),
            )
        })
        .collect()
}

/// Removes `label` from every room except `keep`.
fn without(rooms: &[RoomSpec], label: &'static str, keep: (Side, usize)) -> Vec<RoomSpec> {
    rooms
        .iter()
        .cloned()
        .map(|r| {
            if (r.side, r.col) == keep {
                r
            } else {
                r.omit(&[label])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Pose2Spec {
    Room(Side, usize, f64, f64),
    Corridor(f64, f64),
}

impl Pose2Spec {
    fn resolve(self, f: &Floor) -> Pose2 {
        match self {
            Pose2Spec::Room(side, col, du, heading) => in_room(f, side, col, du, heading),
            Pose2Spec::Corridor(x, heading) => {
                let p = f.corridor_point(x);
                Pose2::new(p.x, p.y, heading)
            }
        }
    }
}

pub fn scenario_c() -> Vec<Scenario> {
    let floors: Vec<(Vec<RoomSpec>, Pose2Spec, &str, &str)> = vec![
        (
            vec![
                RoomSpec::new(Lower, 0, StorageRoom),
                RoomSpec::new(Lower, 1, ConferenceRoom),
                RoomSpec::new(Lower, 2, Office),
                RoomSpec::new(Lower, 3, StorageRoom),
                RoomSpec::new(Upper, 0, Office),
                RoomSpec::new(Upper, 1, StorageRoom),
                RoomSpec::new(Upper, 2, ConferenceRoom),
                RoomSpec::new(Upper, 3, BreakRoom),
            ],
            Pose2Spec::Corridor(1.0, 0.0),
            "break room",
            "find a break room",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, BreakRoom),
                RoomSpec::new(Lower, 1, ConferenceRoom),
                RoomSpec::new(Lower, 2, StorageRoom),
                RoomSpec::new(Lower, 3, Office),
                RoomSpec::new(Upper, 0, StorageRoom),
                RoomSpec::new(Upper, 1, BreakRoom),
                RoomSpec::new(Upper, 2, ConferenceRoom),
                RoomSpec::new(Upper, 3, StorageRoom),
            ],
            Pose2Spec::Room(Lower, 0, 0.0, PI / 2.0),
            "office",
            "go to an office",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, Office),
                RoomSpec::new(Lower, 1, BreakRoom),
                RoomSpec::new(Lower, 2, Office),
                RoomSpec::new(Lower, 3, StorageRoom),
                RoomSpec::new(Upper, 0, Office),
                RoomSpec::new(Upper, 1, StorageRoom),
                RoomSpec::new(Upper, 2, Office),
                RoomSpec::new(Upper, 3, ConferenceRoom),
            ],
            Pose2Spec::Room(Lower, 0, 0.0, 0.0),
            "conference room",
            "find a conference room",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, ConferenceRoom),
                RoomSpec::new(Lower, 1, Office),
                RoomSpec::new(Lower, 2, Office),
                RoomSpec::new(Lower, 3, BreakRoom),
                RoomSpec::new(Upper, 0, Office),
                RoomSpec::new(Upper, 1, ConferenceRoom),
                RoomSpec::new(Upper, 2, Office),
                RoomSpec::new(Upper, 3, StorageRoom),
            ],
            Pose2Spec::Corridor(19.0, PI),
            "break room",
            "find the break room",
        ),
        (
            vec![
                RoomSpec::new(Lower, 0, BreakRoom),
                RoomSpec::new(Lower, 1, StorageRoom),
                RoomSpec::new(Lower, 2, ConferenceRoom),
                RoomSpec::new(Lower, 3, BreakRoom),
                RoomSpec::new(Upper, 0, ConferenceRoom),
                RoomSpec::new(Upper, 1, StorageRoom),
                RoomSpec::new(Upper, 2, BreakRoom),
                RoomSpec::new(Upper, 3, Office),
            ],
            Pose2Spec::Room(Lower, 0, 0.5, PI / 2.0),
            "office",
            "find an office room",
        ),
    ];
    floors
        .into_iter()
        .enumerate()
        .map(|(i, (rooms, start, label, cmd))| {
            let f = Floor::new(4, &rooms);
            scenario(
                format!("c-{:02}", i + 1),
                "room navigation: the requested room type is not visible from the start",
                f.world(start.resolve(&f)),
                room_task(cmd, label),
            )
        })
        .collect()
}

/// Partial prior map covering one end of a long floor, including the office
/// and the break room; the far wing is unmapped. The monitor is taken out
/// before mapping and put back at tick 0 in the office corner away from the
/// door.
pub fn scenario_dynamic() -> Vec<Scenario> {
    struct Case {
        mapped: Vec<RoomSpec>,
        wing: Vec<RoomSpec>,
        office: (Side, usize),
        start: Pose2Spec,
    }
    let r = RoomSpec::new;
    let table_office = |side, col| r(side, col, Office).omit(&["desk"]).with("table", 0.2, 0.6);
    let cases = vec![
        Case {
            mapped: vec![r(Lower, 0, BreakRoom), table_office(Lower, 2)],
            wing: vec![
                r(Upper, 4, ConferenceRoom),
                r(Upper, 6, BreakRoom),
                r(Lower, 5, StorageRoom),
            ],
            office: (Lower, 2),
            start: Pose2Spec::Corridor(3.0, 0.0),
        },
        Case {
            mapped: vec![r(Upper, 0, BreakRoom), table_office(Upper, 2)],
            wing: vec![
                r(Lower, 4, ConferenceRoom),
                r(Upper, 5, ConferenceRoom),
                r(Lower, 7, Office).omit(&["monitor"]),
            ],
            office: (Upper, 2),
            start: Pose2Spec::Room(Upper, 0, 0.0, -PI / 2.0),
        },
        Case {
            mapped: vec![table_office(Lower, 1), r(Upper, 2, BreakRoom)],
            wing: vec![
                r(Lower, 4, BreakRoom),
                r(Upper, 4, StorageRoom),
                r(Lower, 6, ConferenceRoom),
            ],
            office: (Lower, 1),
            start: Pose2Spec::Corridor(12.0, PI),
        },
        Case {
            mapped: vec![
                table_office(Upper, 0),
                r(Lower, 1, BreakRoom),
                r(Lower, 2, ConferenceRoom),
            ],
            wing: vec![r(Upper, 4, ConferenceRoom), r(Lower, 5, BreakRoom)],
            office: (Upper, 0),
            start: Pose2Spec::Room(Lower, 1, 0.0, PI / 2.0),
        },
        Case {
            mapped: vec![
                table_office(Lower, 2),
                r(Upper, 1, BreakRoom),
                r(Upper, 2, StorageRoom),
            ],
            wing: vec![
                r(Lower, 4, StorageRoom),
                r(Upper, 5, ConferenceRoom),
                r(Lower, 6, BreakRoom),
                r(Upper, 7, ConferenceRoom),
            ],
            office: (Lower, 2),
            start: Pose2Spec::Corridor(1.0, 0.0),
        },
        Case {
            mapped: vec![table_office(Upper, 1), r(Lower, 0, BreakRoom)],
            wing: vec![
                r(Lower, 4, ConferenceRoom),
                r(Upper, 6, Office).omit(&["monitor"]),
            ],
            office: (Upper, 1),
            start: Pose2Spec::Room(Lower, 0, 0.5, PI / 2.0),
        },
        Case {
            mapped: vec![table_office(Lower, 0), r(Upper, 2, BreakRoom)],
            wing: vec![
                r(Lower, 4, BreakRoom),
                r(Upper, 4, ConferenceRoom),
                r(Lower, 6, StorageRoom),
            ],
            office: (Lower, 0),
            start: Pose2Spec::Room(Upper, 2, 0.0, -PI / 2.0),
        },
        Case {
            mapped: vec![
                table_office(Upper, 2),
                r(Lower, 2, BreakRoom),
                r(Upper, 0, ConferenceRoom),
            ],
            wing: vec![r(Lower, 5, ConferenceRoom), r(Upper, 6, BreakRoom)],
            office: (Upper, 2),
            start: Pose2Spec::Corridor(2.0, 0.0),
        },
        Case {
            mapped: vec![
                table_office(Lower, 1),
                r(Lower, 2, BreakRoom),
                r(Upper, 1, ConferenceRoom),
            ],
            wing: vec![
                r(Upper, 4, BreakRoom),
                r(Lower, 4, ConferenceRoom),
                r(Upper, 6, StorageRoom),
                r(Lower, 7, ConferenceRoom),
            ],
            office: (Lower, 1),
            start: Pose2Spec::Room(Lower, 2, 0.0, PI / 2.0),
        },
    ];
    cases
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rooms: Vec<RoomSpec> = c.mapped.iter().chain(c.wing.iter()).cloned().collect();
            // Furnish the rest of the wing; only the target office has a monitor.
            let fill = [ConferenceRoom, StorageRoom, BreakRoom, Office, StorageRoom];
            let mut k = i;
            for col in 3..8 {
                for side in [Lower, Upper] {
                    if rooms.iter().any(|r| r.side == side && r.col == col) {
                        continue;
                    }
                    rooms.push(match fill[k % fill.len()] {
                        Office => table_office(side, col),
                        kind => r(side, col, kind),
                    });
                    k += 1;
                }
            }
            for room in rooms
                .iter_mut()
                .filter(|r| r.kind == Office && (r.side, r.col) != c.office)
            {
                room.omit.push("monitor");
            }
            let mut f = Floor::with_doors(8, 1.2, &rooms);
            let near = f.zone_point(c.office.0, c.office.1, 0.25, 0.75);
            let mut monitor = f.take("monitor", &near);
            monitor.position = f.zone_point(c.office.0, c.office.1, 1.0, 0.9);
            let mut premap: Vec<Point2> = (0..3)
                .flat_map(|col| [f.room_center(Lower, col), f.room_center(Upper, col)])
                .collect();
            premap.extend([1.0, 5.0, 9.0, 13.0].map(|x| f.corridor_point(x)));
            let start = c.start.resolve(&f);
            let mut s = scenario(
                format!("dyn-{:02}", i + 1),
                "changing environment: a monitor is placed in the office after mapping",
                f.world(start),
                object_task("find a monitor", "monitor"),
            );
            s.premap = premap;
            // Only the time limit ends a comparison run.
            s.budget = Budget {
                max_steps: 100,
                ..Budget::default()
            };
            s.mutations = vec![Mutation {
                kind: MutationKind::AddObject { object: monitor },
                at_tick: Some(0),
            }];
            s
        })
        .collect()
}

/// The whole library in a fixed order.
pub fn all() -> Vec<Scenario> {
    let mut v = scenario_a();
    v.extend(scenario_b());
    v.extend(scenario_c());
    v.extend(scenario_dynamic());
    v
}

/// Small premapped floor for live sessions. The office has no monitor, so
/// "find a monitor" only succeeds if an operator places one, e.g.
/// [`demo_monitor`], while the task runs.
pub fn demo() -> Scenario {
    let rooms = [
        RoomSpec::new(Lower, 0, Office).omit(&["monitor"]),
        RoomSpec::new(Lower, 1, BreakRoom),
        RoomSpec::new(Upper, 0, ConferenceRoom),
        RoomSpec::new(Upper, 1, StorageRoom),
    ];
    let f = Floor::new(2, &rooms);
    let mut premap: Vec<Point2> = (0..2)
        .flat_map(|col| [f.room_center(Lower, col), f.room_center(Upper, col)])
        .collect();
    premap.extend([2.5, 7.5].map(|x| f.corridor_point(x)));
    let start = f.corridor_point(7.5);
    let mut s = scenario(
        "demo".into(),
        "operator demo: place a monitor in the office while the robot searches",
        f.world(Pose2::new(start.x, start.y, PI)),
        object_task("find a monitor", "monitor"),
    );
    s.premap = premap;
    s.budget = Budget {
        max_ticks: 3000,
        ..Budget::default()
    };
    s
}

/// The object an operator adds in the demo: a monitor on the office desk.
pub fn demo_monitor() -> ObjectInstance {
    let f = Floor::new(1, &[RoomSpec::new(Lower, 0, Office)]);
    let mut m = f
        .objects
        .iter()
        .find(|o| o.label == "monitor")
        .expect("offices have a monitor")
        .clone();
    m.id = 0;
    m
}

/// Two connected rooms with no objects, used for coverage checks.
pub fn two_room_benchmark() -> Scenario {
    let walls = with_frames(
        &[
            [10.0, 0.0, 10.0, 4.4],
            [10.0, 5.6, 10.0, 10.0],
            [4.0, 6.0, 4.0, 10.0],
        ],
        20.0,
        10.0,
    );
    let world = WorldSpec {
        width: 20.0,
        height: 10.0,
        boundary: true,
        walls,
        objects: Vec::new(),
        rooms: vec![
            RoomRegion {
                name: "west".into(),
                label: "office".into(),
                rect: Rect::new(0.0, 0.0, 10.0, 10.0),
            },
            RoomRegion {
                name: "east".into(),
                label: "break room".into(),
                rect: Rect::new(10.0, 0.0, 20.0, 10.0),
            },
        ],
        robot_start: Pose2::new(2.0, 2.0, 0.0),
    };
    let mut s = scenario(
        "two-room".into(),
        "noiseless coverage benchmark",
        world,
        Task::new("explore"),
    );
    s.config = ConfigOverrides {
        sensor: Some(SensorConfig::noiseless()),
        ..ConfigOverrides::default()
    };
    s.seeds = vec![0];
    s
}

/// Suite manifests over the exported files, keyed by file stem.
pub fn manifests() -> Vec<(String, SuiteManifest)> {
    let files = |group: &str| -> Vec<PathBuf> {
        all()
            .iter()
            .filter(|s| crate::harness::run::scenario_group(&s.name) == group)
            .map(|s| PathBuf::from("..").join(format!("{}.json", s.name)))
            .collect()
    };
    let suite = |name: &str, group: &str, backends: Vec<PlannerKind>| {
        (
            name.to_string(),
            SuiteManifest {
                name: name.into(),
                scenarios: files(group),
                seeds: None,
                backends,
            },
        )
    };
    vec![
        suite("suite-a", "a", vec![PlannerKind::Oracle]),
        suite("suite-b", "b", vec![PlannerKind::Oracle]),
        suite("suite-c", "c", vec![PlannerKind::Oracle]),
        suite(
            "comparison",
            "dyn",
            vec![
                PlannerKind::Oracle,
                PlannerKind::ObjectMapSearch,
                PlannerKind::FrontierSearch,
            ],
        ),
    ]
}

/// Writes every scenario as `<name>.json` into `dir` and the manifests into
/// `dir/suites`.
pub fn export(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("suites"))?;
    for s in all().iter().chain([two_room_benchmark(), demo()].iter()) {
        save_scenario(s, &dir.join(format!("{}.json", s.name)))?;
    }
    for (stem, m) in manifests() {
        std::fs::write(
            dir.join("suites").join(format!("{stem}.json")),
            m.to_canonical_json(),
        )?;
    }
    Ok(())
}
