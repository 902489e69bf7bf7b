//! Persistent semantic object map.
//!
//! Detections are projected into the world frame and merged with the existing
//! map per class label by density clustering. Every map object is anchored to
//! the keyframe in which it was first observed through a relative transform,
//! so pose-graph corrections move objects rigidly with their keyframe.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{dbscan, groups};
use crate::geometry::{Point2, Pose2};
use crate::localization::{Keyframe, PoseGraph};
use crate::vocab;

/// A detection in the robot frame at the time it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObject {
    pub label: String,
    pub position_robot: Point2,
    pub tick: u64,
}

impl FrameObject {
    pub fn from_range_bearing(label: &str, range: f64, bearing: f64, tick: u64) -> Self {
        assert!(range >= 0.0, "range must be nonnegative");
        Self {
            label: label.to_string(),
            position_robot: Point2::new(range * bearing.cos(), range * bearing.sin()),
            tick,
        }
    }

    pub fn range(&self) -> f64 {
        self.position_robot.norm()
    }

    pub fn bearing(&self) -> f64 {
        self.position_robot.y.atan2(self.position_robot.x)
    }
}

pub fn project_to_world(fo: &FrameObject, pose_est: &Pose2) -> Point2 {
    pose_est.transform_point(&fo.position_robot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociationConfig {
    pub eps_large: f64,
    pub eps_small: f64,
    pub eps_default: f64,
    pub min_pts: usize,
    pub large_classes: BTreeSet<String>,
    pub small_classes: BTreeSet<String>,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            eps_large: 2.0,
            eps_small: 0.5,
            eps_default: 1.0,
            min_pts: 1,
            large_classes: vocab::LARGE_CLASSES.iter().map(|s| s.to_string()).collect(),
            small_classes: vocab::SMALL_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.eps_large <= 0.0 || self.eps_small <= 0.0 || self.eps_default <= 0.0 {
            return Err("association eps values must be positive".into());
        }
        if let Some(both) = self.large_classes.intersection(&self.small_classes).next() {
            return Err(format!("class {both:?} is both large and small"));
        }
        Ok(())
    }
}

pub fn class_epsilon(label: &str, cfg: &AssociationConfig) -> f64 {
    if cfg.large_classes.contains(label) {
        cfg.eps_large
    } else if cfg.small_classes.contains(label) {
        cfg.eps_small
    } else {
        cfg.eps_default
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapObject {
    pub label: String,
    pub instance_id: u32,
    pub position_world: Point2,
    pub anchor_keyframe: u32,
    /// Object pose in its anchor keyframe's frame.
    pub rel_transform: Pose2,
    pub first_seen_tick: u64,
    pub observation_count: u32,
}

impl MapObject {
    pub fn name(&self) -> String {
        format!("{}-{}", self.label, self.instance_id)
    }
}

/// A detection already projected to the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldObservation {
    pub label: String,
    pub position: Point2,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map object {0} is anchored to unknown keyframe {1}")]
    DanglingAnchor(String, u32),
}

/// The object map, kept sorted by `(label, instance_id)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SemanticMap {
    pub objects: Vec<MapObject>,
}

fn anchor_transform(anchor: &Keyframe, world: &Point2) -> Pose2 {
    anchor.pose_corrected.inverse().compose(&Pose2 {
        x: world.x,
        y: world.y,
        theta: 0.0,
    })
}

impl SemanticMap {
    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn find(&self, label: &str, instance_id: u32) -> Option<&MapObject> {
        self.objects
            .iter()
            .find(|o| o.label == label && o.instance_id == instance_id)
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.objects.iter().any(|o| o.label == label)
    }

    /// Merges one frame of observations into the map.
    ///
    /// For each label, DBSCAN runs over the union of that label's map-object
    /// and observation positions. A cluster holding map objects keeps only the
    /// one with the smallest instance id, which absorbs the others' counts and
    /// moves to the centroid of the cluster's observations. A cluster holding
    /// only observations becomes a new object anchored to `anchor`.
    pub fn associate_and_update(
        &mut self,
        frame: &[WorldObservation],
        graph: &PoseGraph,
        anchor: &Keyframe,
        cfg: &AssociationConfig,
        tick: u64,
    ) {
        let mut by_label: BTreeMap<&str, Vec<Point2>> = BTreeMap::new();
        for obs in frame.iter().filter(|o| !vocab::is_excluded(&o.label)) {
            by_label
                .entry(obs.label.as_str())
                .or_default()
                .push(obs.position);
        }
        for (label, mut observed) in by_label {
            observed.sort_by(|a, b| a.lex_cmp(b));
            self.update_label(label, &observed, graph, anchor, cfg, tick);
        }
        self.objects.sort_by(|a, b| {
            a.label
                .cmp(&b.label)
                .then(a.instance_id.cmp(&b.instance_id))
        });
    }

    fn update_label(
        &mut self,
        label: &str,
        observed: &[Point2],
        graph: &PoseGraph,
        anchor: &Keyframe,
        cfg: &AssociationConfig,
        tick: u64,
    ) {
        let (mut existing, rest): (Vec<MapObject>, Vec<MapObject>) =
            std::mem::take(&mut self.objects)
                .into_iter()
                .partition(|o| o.label == label);
        self.objects = rest;
        existing.sort_by_key(|o| o.instance_id);

        let mut points: Vec<Point2> = existing.iter().map(|o| o.position_world).collect();
        points.extend_from_slice(observed);
        let n_map = existing.len();
        let clusters = groups(&dbscan(&points, class_epsilon(label, cfg), cfg.min_pts));

        let mut max_id = existing.iter().map(|o| o.instance_id).max().unwrap_or(0);
        let mut retained = Vec::new();
        let mut fresh: Vec<Point2> = Vec::new();
        let mut slots: Vec<Option<MapObject>> = existing.into_iter().map(Some).collect();
        for members in clusters {
            let map_members: Vec<usize> = members.iter().copied().filter(|&i| i < n_map).collect();
            let obs: Vec<Point2> = members
                .iter()
                .filter(|&&i| i >= n_map)
                .map(|&i| points[i])
                .collect();
            if map_members.is_empty() {
                if let Some(c) = Point2::centroid(&obs) {
                    fresh.push(c);
                }
                continue;
            }
            // Map members are in instance-id order, so the first is the keeper.
            let mut keep = slots[map_members[0]]
                .take()
                .expect("each map object is in one cluster");
            for &i in &map_members[1..] {
                let dropped = slots[i].take().expect("each map object is in one cluster");
                keep.observation_count += dropped.observation_count;
            }
            if let Some(c) = Point2::centroid(&obs) {
                keep.observation_count += obs.len() as u32;
                keep.position_world = c;
                if let Some(kf) = graph.get(keep.anchor_keyframe) {
                    keep.rel_transform = anchor_transform(kf, &c);
                }
            }
            retained.push(keep);
        }
        // Unclustered map objects cannot occur with min_pts = 1, but a
        // larger min_pts leaves noise points that must not be lost.
        retained.extend(slots.into_iter().flatten());
        fresh.sort_by(|a, b| a.lex_cmp(b));
        for c in fresh {
            max_id += 1;
            retained.push(MapObject {
                label: label.to_string(),
                instance_id: max_id,
                position_world: c,
                anchor_keyframe: anchor.id,
                rel_transform: anchor_transform(anchor, &c),
                first_seen_tick: tick,
                observation_count: 1,
            });
        }
        self.objects.extend(retained);
    }

    /// Re-derives every world position from its anchor's corrected pose.
    pub fn relocate_after_correction(&mut self, graph: &PoseGraph) -> Result<(), MapError> {
        for o in &self.objects {
            if graph.get(o.anchor_keyframe).is_none() {
                return Err(MapError::DanglingAnchor(o.name(), o.anchor_keyframe));
            }
        }
        for o in &mut self.objects {
            let kf = graph.get(o.anchor_keyframe).expect("checked above");
            o.position_world = kf.pose_corrected.compose(&o.rel_transform).position();
        }
        Ok(())
    }

    /// One JSON record per line: label, instance_id, x, y, anchor, observation_count.
    pub fn export_records(&self) -> String {
        let mut out = String::new();
        for o in &self.objects {
            let rec = serde_json::json!({
                "label": o.label,
                "instance_id": o.instance_id,
                "x": o.position_world.x,
                "y": o.position_world.y,
                "anchor": o.anchor_keyframe,
                "observation_count": o.observation_count,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }
}
