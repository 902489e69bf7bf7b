//! Hierarchical scene graph: map objects clustered into areas, areas labeled
//! as rooms, and the resulting root → room → object tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{dbscan, groups};
use crate::geometry::Point2;
use crate::llm_gateway::{render_room_prompt, ChatClient};
use crate::semantic_map::MapObject;
use crate::vocab;

pub const UNASSIGNED: &str = "unassigned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLevel {
    Root,
    Room,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub level: NodeLevel,
    pub label: String,
    pub instance_id: u32,
    pub location: Point2,
    pub children: Vec<SceneNode>,
}

impl SceneNode {
    /// `label-instance_id`, the handle used in planner actions.
    pub fn name(&self) -> String {
        format!("{}-{}", self.label, self.instance_id)
    }

    pub fn leaf(label: &str, instance_id: u32, location: Point2) -> Self {
        Self {
            level: NodeLevel::Object,
            label: label.to_string(),
            instance_id,
            location,
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub root: SceneNode,
    pub built_at_tick: u64,
}

impl Default for SceneGraph {
    fn default() -> Self {
        Self::empty(0)
    }
}

/// Splits `"break room-2"` into `("break room", 2)`.
pub fn split_name(name: &str) -> Option<(&str, u32)> {
    let (label, id) = name.rsplit_once('-')?;
    let id: u32 = id.parse().ok()?;
    (!label.is_empty() && id >= 1).then_some((label, id))
}

impl SceneGraph {
    pub fn empty(tick: u64) -> Self {
        Self {
            root: SceneNode {
                level: NodeLevel::Root,
                label: "root".into(),
                instance_id: 1,
                location: Point2::default(),
                children: Vec::new(),
            },
            built_at_tick: tick,
        }
    }

    pub fn rooms(&self) -> &[SceneNode] {
        &self.root.children
    }

    pub fn is_empty(&self) -> bool {
        self.root.children.is_empty()
    }

    pub fn room(&self, name: &str) -> Option<&SceneNode> {
        self.rooms().iter().find(|r| r.name() == name)
    }

    pub fn object(&self, room: &str, object: &str) -> Option<&SceneNode> {
        self.room(room)?
            .children
            .iter()
            .find(|o| o.name() == object)
    }

    /// Every `(room, object)` pair whose object has `label`, in graph order.
    pub fn objects_labeled<'a>(
        &'a self,
        label: &'a str,
    ) -> impl Iterator<Item = (&'a SceneNode, &'a SceneNode)> + 'a {
        self.rooms()
            .iter()
            .flat_map(|r| r.children.iter().map(move |o| (r, o)))
            .filter(move |(_, o)| o.label == label)
    }

    pub fn object_count(&self) -> usize {
        self.rooms().iter().map(|r| r.children.len()).sum()
    }

    /// Canonical text form embedded in planner prompts:
    /// `{"rooms": {"office-1": {"location": [x, y], "objects": {"printer-1": {"location": [x, y]}}}}}`.
    pub fn serialize(&self) -> String {
        let mut s = String::from("{\"rooms\": {");
        for (i, room) in self.rooms().iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(
                s,
                "{}: {{\"location\": {}, \"objects\": {{",
                json_str(&room.name()),
                json_point(&room.location)
            );
            for (j, obj) in room.children.iter().enumerate() {
                if j > 0 {
                    s.push_str(", ");
                }
                let _ = write!(
                    s,
                    "{}: {{\"location\": {}}}",
                    json_str(&obj.name()),
                    json_point(&obj.location)
                );
            }
            s.push_str("}}");
        }
        s.push_str("}}");
        s
    }

    pub fn parse(text: &str) -> Result<Self, GraphParseError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GraphParseError(e.to_string()))?;
        let rooms = v
            .get("rooms")
            .and_then(|r| r.as_object())
            .ok_or_else(|| GraphParseError("missing \"rooms\" object".into()))?;
        let mut g = SceneGraph::empty(0);
        for (room_name, room) in rooms {
            let (label, id) = split_name(room_name)
                .ok_or_else(|| GraphParseError(format!("bad room key {room_name:?}")))?;
            let mut node = SceneNode {
                level: NodeLevel::Room,
                label: label.to_string(),
                instance_id: id,
                location: parse_point(room.get("location"))?,
                children: Vec::new(),
            };
            let objects = room
                .get("objects")
                .and_then(|o| o.as_object())
                .ok_or_else(|| GraphParseError(format!("room {room_name:?} has no objects map")))?;
            for (obj_name, obj) in objects {
                let (olabel, oid) = split_name(obj_name)
                    .ok_or_else(|| GraphParseError(format!("bad object key {obj_name:?}")))?;
                node.children.push(SceneNode::leaf(
                    olabel,
                    oid,
                    parse_point(obj.get("location"))?,
                ));
            }
            g.root.children.push(node);
        }
        Ok(g)
    }

    /// The labeled room whose nearest member object is within `radius` of
    /// `p`, choosing the closest such room.
    pub fn room_containing(&self, p: &Point2, radius: f64) -> Option<&SceneNode> {
        self.rooms()
            .iter()
            .filter(|r| r.label != UNASSIGNED)
            .filter_map(|r| {
                let d = r
                    .children
                    .iter()
                    .map(|o| o.location.distance(p))
                    .fold(f64::INFINITY, f64::min);
                (d <= radius).then_some((d, r))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, r)| r)
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("scene graph parse error: {0}")]
pub struct GraphParseError(pub String);

fn json_str(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

fn json_num(x: f64) -> String {
    let s = format!("{x}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn json_point(p: &Point2) -> String {
    format!("[{}, {}]", json_num(p.x), json_num(p.y))
}

fn parse_point(v: Option<&serde_json::Value>) -> Result<Point2, GraphParseError> {
    let arr = v
        .and_then(|v| v.as_array())
        .ok_or_else(|| GraphParseError("location must be [x, y]".into()))?;
    match arr.as_slice() {
        [x, y] => Ok(Point2::new(
            x.as_f64()
                .ok_or_else(|| GraphParseError("x must be a number".into()))?,
            y.as_f64()
                .ok_or_else(|| GraphParseError("y must be a number".into()))?,
        )),
        _ => Err(GraphParseError("location must be [x, y]".into())),
    }
}

/// Rounds to the centimeter so serialized graphs are short and round-trip.
pub fn round_cm(p: Point2) -> Point2 {
    Point2::new((p.x * 100.0).round() / 100.0, (p.y * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AreaConfig {
    pub eps_area: f64,
    pub min_pts_area: usize,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            eps_area: 2.5,
            min_pts_area: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AreaClusters {
    /// Indices into the clustered object slice.
    pub clusters: Vec<Vec<usize>>,
    pub unassigned: Vec<usize>,
}

pub fn cluster_areas(objects: &[MapObject], eps_area: f64, min_pts_area: usize) -> AreaClusters {
    let points: Vec<Point2> = objects.iter().map(|o| o.position_world).collect();
    let labels = dbscan(&points, eps_area, min_pts_area);
    let unassigned = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_none())
        .map(|(i, _)| i)
        .collect();
    AreaClusters {
        clusters: groups(&labels),
        unassigned,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomScoreTable {
    /// object label → room label → vote weight
    pub votes: BTreeMap<String, BTreeMap<String, f64>>,
    pub candidate_rooms: Vec<String>,
}

impl Default for RoomScoreTable {
    fn default() -> Self {
        let table: &[(&str, &[(&str, f64)])] = &[
            ("computer", &[("office", 3.0)]),
            ("monitor", &[("office", 3.0)]),
            ("keyboard", &[("office", 2.0)]),
            ("mouse", &[("office", 2.0)]),
            ("printer", &[("office", 2.0), ("storage room", 0.5)]),
            ("desk", &[("office", 2.0)]),
            ("lamp", &[("office", 1.0)]),
            ("cabinet", &[("office", 1.0), ("storage room", 1.5)]),
            ("bookshelf", &[("office", 1.0), ("storage room", 1.0)]),
            ("book", &[("office", 1.0)]),
            ("bag", &[("office", 1.0), ("conference room", 0.5)]),
            (
                "chair",
                &[
                    ("office", 1.0),
                    ("break room", 1.0),
                    ("conference room", 1.5),
                ],
            ),
            (
                "table",
                &[
                    ("office", 0.5),
                    ("break room", 1.0),
                    ("conference room", 1.5),
                ],
            ),
            ("coffee maker", &[("break room", 3.0)]),
            ("microwave", &[("break room", 3.0)]),
            ("refrigerator", &[("break room", 3.0)]),
            ("sink", &[("break room", 2.0)]),
            ("water dispenser", &[("break room", 2.0), ("corridor", 0.5)]),
            ("cup", &[("break room", 2.0), ("office", 0.5)]),
            ("bottle", &[("break room", 1.0)]),
            ("sofa", &[("break room", 1.0)]),
            ("trash can", &[("break room", 0.5), ("corridor", 1.0)]),
            ("projector", &[("conference room", 3.0)]),
            ("tv", &[("conference room", 2.0), ("break room", 0.5)]),
            ("whiteboard", &[("conference room", 2.0), ("office", 0.5)]),
            ("noticeboard", &[("corridor", 2.0)]),
            ("fire extinguisher", &[("corridor", 3.0)]),
            ("potted plant", &[("corridor", 1.0)]),
            ("bench", &[("corridor", 2.0)]),
            ("door", &[("corridor", 1.0)]),
            ("box", &[("storage room", 3.0)]),
        ];
        let votes = table
            .iter()
            .map(|(obj, rooms)| {
                (
                    obj.to_string(),
                    rooms
                        .iter()
                        .map(|(r, w)| (r.to_string(), *w))
                        .collect::<BTreeMap<_, _>>(),
                )
            })
            .collect();
        Self {
            votes,
            candidate_rooms: vocab::DEFAULT_CANDIDATE_ROOMS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl RoomScoreTable {
    pub fn affinity(&self, object: &str, room: &str) -> f64 {
        self.votes
            .get(object)
            .and_then(|m| m.get(room))
            .copied()
            .unwrap_or(0.0)
    }

    /// Sums votes per candidate and returns the best; ties go to the earlier
    /// candidate.
    pub fn best_room<S: AsRef<str>>(&self, object_labels: &[S]) -> String {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, room) in self.candidate_rooms.iter().enumerate() {
            let score: f64 = object_labels
                .iter()
                .map(|o| self.affinity(o.as_ref(), room))
                .sum();
            if score > best.0 {
                best = (score, i);
            }
        }
        self.candidate_rooms[best.1].clone()
    }
}

/// Source of room labels for object clusters.
pub trait RoomLabeler {
    fn label_room(&mut self, object_labels: &[String]) -> String;
}

#[derive(Debug, Clone, Default)]
pub struct RuleTableLabeler {
    pub table: RoomScoreTable,
}

impl RoomLabeler for RuleTableLabeler {
    fn label_room(&mut self, object_labels: &[String]) -> String {
        self.table.best_room(object_labels)
    }
}

/// Asks a chat model for the label; any transport or parse failure falls
/// back to the score table.
pub struct RemoteRoomLabeler<C: ChatClient> {
    pub client: C,
    pub table: RoomScoreTable,
}

impl<C: ChatClient> RoomLabeler for RemoteRoomLabeler<C> {
    fn label_room(&mut self, object_labels: &[String]) -> String {
        let messages = render_room_prompt(object_labels, &self.table.candidate_rooms);
        match self.client.complete(&messages) {
            Ok(reply) => {
                match parse_room_reply(&reply, &self.table.candidate_rooms) {
                    Some(label) => label,
                    None => {
                        log::warn!("room labeler reply {reply:?} names no single candidate; using score table");
                        self.table.best_room(object_labels)
                    }
                }
            }
            Err(e) => {
                log::warn!("room labeler unavailable ({e}); using score table");
                self.table.best_room(object_labels)
            }
        }
    }
}

/// Extracts exactly one candidate room from free text, preferring an exact
/// match of the trimmed reply.
pub fn parse_room_reply(reply: &str, candidates: &[String]) -> Option<String> {
    let text = reply
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '.')
        .to_lowercase();
    if let Some(c) = candidates.iter().find(|c| **c == text) {
        return Some(c.clone());
    }
    let mut found: Vec<&String> = candidates
        .iter()
        .filter(|c| text.contains(c.as_str()))
        .collect();
    // Drop hits that are substrings of a longer hit.
    let all = found.clone();
    found.retain(|c| {
        !all.iter()
            .any(|o| o.len() > c.len() && o.contains(c.as_str()))
    });
    match found.as_slice() {
        [one] => Some((*one).clone()),
        _ => None,
    }
}

/// Assembles the tree. `room_labels[i]` names `clusters.clusters[i]`.
pub fn build_graph(
    objects: &[MapObject],
    clusters: &AreaClusters,
    room_labels: &[String],
    tick: u64,
) -> SceneGraph {
    assert_eq!(
        clusters.clusters.len(),
        room_labels.len(),
        "one label per cluster"
    );
    let mut rooms: Vec<(String, Point2, Vec<usize>)> = clusters
        .clusters
        .iter()
        .zip(room_labels)
        .map(|(members, label)| {
            let c = Point2::centroid(members.iter().map(|&i| &objects[i].position_world))
                .unwrap_or_default();
            (label.clone(), c, members.clone())
        })
        .collect();
    rooms.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.lex_cmp(&b.1)));
    if !clusters.unassigned.is_empty() {
        let c = Point2::centroid(
            clusters
                .unassigned
                .iter()
                .map(|&i| &objects[i].position_world),
        )
        .unwrap_or_default();
        rooms.push((UNASSIGNED.to_string(), c, clusters.unassigned.clone()));
    }

    let mut g = SceneGraph::empty(tick);
    let mut per_label: BTreeMap<String, u32> = BTreeMap::new();
    for (label, centroid, members) in rooms {
        let id = per_label
            .entry(label.clone())
            .and_modify(|n| *n += 1)
            .or_insert(1);
        let mut ordered: Vec<&MapObject> = members.iter().map(|&i| &objects[i]).collect();
        ordered.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then(a.instance_id.cmp(&b.instance_id))
        });
        let mut obj_ids: BTreeMap<&str, u32> = BTreeMap::new();
        let children = ordered
            .iter()
            .map(|o| {
                let oid = obj_ids
                    .entry(o.label.as_str())
                    .and_modify(|n| *n += 1)
                    .or_insert(1);
                SceneNode::leaf(&o.label, *oid, round_cm(o.position_world))
            })
            .collect();
        g.root.children.push(SceneNode {
            level: NodeLevel::Room,
            label,
            instance_id: *id,
            location: round_cm(centroid),
            children,
        });
    }
    g.root.children.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.instance_id.cmp(&b.instance_id))
    });
    g
}

/// Full pipeline from a map snapshot to a labeled graph.
pub fn generate(
    objects: &[MapObject],
    area: &AreaConfig,
    labeler: &mut dyn RoomLabeler,
    tick: u64,
) -> SceneGraph {
    let clusters = cluster_areas(objects, area.eps_area, area.min_pts_area);
    let labels: Vec<String> = clusters
        .clusters
        .iter()
        .map(|members| {
            let mut l: Vec<String> = members.iter().map(|&i| objects[i].label.clone()).collect();
            l.sort();
            labeler.label_room(&l)
        })
        .collect();
    build_graph(objects, &clusters, &labels, tick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2;
    use crate::llm_gateway::{ChatMessage, LlmError};
    use proptest::prelude::*;

    fn obj(label: &str, id: u32, x: f64, y: f64) -> MapObject {
        MapObject {
            label: label.into(),
            instance_id: id,
            position_world: Point2::new(x, y),
            anchor_keyframe: 0,
            rel_transform: Pose2::new(x, y, 0.0),
            first_seen_tick: 0,
            observation_count: 1,
        }
    }

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn no_objects_no_clusters() {
        assert_eq!(cluster_areas(&[], 2.5, 2), AreaClusters::default());
    }

    #[test]
    fn two_groups_ten_meters_apart() {
        let objs = vec![
            obj("chair", 1, 0.0, 0.0),
            obj("table", 1, 1.0, 0.5),
            obj("monitor", 1, 0.5, 1.0),
            obj("chair", 2, 10.0, 0.0),
            obj("sofa", 1, 11.0, 0.5),
        ];
        let c = cluster_areas(&objs, 2.5, 2);
        assert_eq!(c.clusters, vec![vec![0, 1, 2], vec![3, 4]]);
        assert!(c.unassigned.is_empty());
    }

    #[test]
    fn isolated_object_is_unassigned() {
        let objs = vec![
            obj("chair", 1, 0.0, 0.0),
            obj("table", 1, 1.0, 0.0),
            obj("bench", 1, 20.0, 0.0),
        ];
        let c = cluster_areas(&objs, 2.5, 2);
        assert_eq!(c.unassigned, vec![2]);
    }

    #[test]
    fn break_room_and_office_labels() {
        let mut l = RuleTableLabeler::default();
        assert_eq!(
            l.label_room(&labels(&[
                "coffee maker",
                "microwave",
                "refrigerator",
                "table",
                "chair"
            ])),
            "break room"
        );
        assert_eq!(
            l.label_room(&labels(&[
                "computer", "monitor", "table", "cabinet", "chair"
            ])),
            "office"
        );
    }

    #[test]
    fn empty_label_set_takes_first_candidate() {
        let mut l = RuleTableLabeler::default();
        assert_eq!(l.label_room(&[]), "office");
    }

    struct Canned(Result<String, LlmError>);
    impl ChatClient for Canned {
        fn complete(&mut self, _m: &[ChatMessage]) -> Result<String, LlmError> {
            self.0.clone()
        }
    }

    #[test]
    fn remote_labeler_parses_or_falls_back() {
        let table = RoomScoreTable::default();
        let mut ok = RemoteRoomLabeler {
            client: Canned(Ok("Conference room".into())),
            table: table.clone(),
        };
        assert_eq!(ok.label_room(&labels(&["microwave"])), "conference room");
        let mut junk = RemoteRoomLabeler {
            client: Canned(Ok("no idea".into())),
            table: table.clone(),
        };
        assert_eq!(junk.label_room(&labels(&["microwave"])), "break room");
        let mut down = RemoteRoomLabeler {
            client: Canned(Err(LlmError::Transport("refused".into()))),
            table,
        };
        assert_eq!(down.label_room(&labels(&["microwave"])), "break room");
    }

    #[test]
    fn empty_map_gives_root_only_graph() {
        let g = build_graph(&[], &AreaClusters::default(), &[], 0);
        assert!(g.is_empty());
        assert_eq!(g.serialize(), r#"{"rooms": {}}"#);
    }

    #[test]
    fn per_room_instance_numbering() {
        let objs = vec![
            obj("monitor", 1, 0.0, 0.0),
            obj("chair", 4, 1.0, 0.0),
            obj("chair", 2, 0.0, 1.0),
        ];
        let clusters = AreaClusters {
            clusters: vec![vec![0, 1, 2]],
            unassigned: vec![],
        };
        let g = build_graph(&objs, &clusters, &labels(&["office"]), 0);
        let room = &g.rooms()[0];
        assert_eq!(room.name(), "office-1");
        let names: Vec<String> = room.children.iter().map(|c| c.name()).collect();
        assert_eq!(names, vec!["chair-1", "chair-2", "monitor-1"]);
        // chair-1 is the older map instance (chair-2 in the map).
        assert_eq!(room.children[0].location, Point2::new(0.0, 1.0));
    }

    #[test]
    fn duplicate_room_labels_get_instance_ids() {
        let objs = vec![
            obj("computer", 1, 10.0, 0.0),
            obj("monitor", 1, 10.5, 0.0),
            obj("computer", 2, 0.0, 0.0),
            obj("monitor", 2, 0.5, 0.0),
        ];
        let clusters = AreaClusters {
            clusters: vec![vec![0, 1], vec![2, 3]],
            unassigned: vec![],
        };
        let g = build_graph(&objs, &clusters, &labels(&["office", "office"]), 0);
        let names: Vec<String> = g.rooms().iter().map(|r| r.name()).collect();
        assert_eq!(names, vec!["office-1", "office-2"]);
        // Lexicographically smaller centroid gets id 1.
        assert_eq!(g.rooms()[0].location, Point2::new(0.25, 0.0));
    }

    #[test]
    fn single_printer_serialization() {
        let objs = vec![obj("printer", 1, 1.5, 2.25)];
        let clusters = AreaClusters {
            clusters: vec![vec![0]],
            unassigned: vec![],
        };
        let g = build_graph(&objs, &clusters, &labels(&["office"]), 0);
        assert_eq!(
            g.serialize(),
            r#"{"rooms": {"office-1": {"location": [1.5, 2.25], "objects": {"printer-1": {"location": [1.5, 2.25]}}}}}"#
        );
    }

    #[test]
    fn every_object_appears_once() {
        let objs = vec![
            obj("chair", 1, 0.0, 0.0),
            obj("table", 1, 1.0, 0.0),
            obj("bench", 1, 20.0, 0.0),
        ];
        let g = generate(
            &objs,
            &AreaConfig::default(),
            &mut RuleTableLabeler::default(),
            5,
        );
        assert_eq!(g.object_count(), 3);
        assert_eq!(g.rooms().last().unwrap().label, UNASSIGNED);
        assert_eq!(g.built_at_tick, 5);
    }

    #[test]
    fn room_key_with_spaces_splits_on_last_dash() {
        assert_eq!(split_name("break room-12"), Some(("break room", 12)));
        assert_eq!(split_name("office"), None);
        assert_eq!(split_name("office-0"), None);
    }

    #[test]
    fn room_reply_parsing() {
        let c: Vec<String> = vocab::DEFAULT_CANDIDATE_ROOMS
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            parse_room_reply(" Office.\n", &c).as_deref(),
            Some("office")
        );
        assert_eq!(
            parse_room_reply("This is a break room.", &c).as_deref(),
            Some("break room")
        );
        assert_eq!(parse_room_reply("office or corridor", &c), None);
    }

    fn arb_graph() -> impl Strategy<Value = SceneGraph> {
        let obj_labels = ["chair", "table", "monitor", "coffee maker", "bag"];
        let room_labels = ["office", "break room", "conference room", "unassigned"];
        prop::collection::vec(
            (
                0usize..4,
                -50i32..50,
                -50i32..50,
                prop::collection::vec((0usize..5, -900i32..900, -900i32..900), 0..6),
            ),
            0..5,
        )
        .prop_map(move |rooms| {
            let mut g = SceneGraph::empty(0);
            let mut room_ids: BTreeMap<&str, u32> = BTreeMap::new();
            for (rl, rx, ry, objs) in rooms {
                let label = room_labels[rl];
                let id = room_ids.entry(label).and_modify(|n| *n += 1).or_insert(1);
                let mut obj_ids: BTreeMap<&str, u32> = BTreeMap::new();
                let children = objs
                    .into_iter()
                    .map(|(ol, x, y)| {
                        let l = obj_labels[ol];
                        let oid = obj_ids.entry(l).and_modify(|n| *n += 1).or_insert(1);
                        SceneNode::leaf(l, *oid, Point2::new(x as f64 / 100.0, y as f64 / 100.0))
                    })
                    .collect();
                g.root.children.push(SceneNode {
                    level: NodeLevel::Room,
                    label: label.into(),
                    instance_id: *id,
                    location: Point2::new(rx as f64 / 10.0, ry as f64 / 10.0),
                    children,
                });
            }
            g
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn serialization_round_trips(g in arb_graph()) {
            let text = g.serialize();
            let back = SceneGraph::parse(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.serialize(), text);
        }
    }
}
