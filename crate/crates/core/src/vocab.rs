//! Object and room vocabulary: canonical class names, synonyms and size tiers.

use serde::{Deserialize, Serialize};

/// Association size class of an object label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeTier {
    Large,
    Small,
    #[default]
    Default,
}

pub const LARGE_CLASSES: &[&str] = &["table", "door", "noticeboard", "sofa", "refrigerator"];
pub const SMALL_CLASSES: &[&str] = &["book", "bottle", "cup", "mouse"];

/// Labels the detector may report but which never enter the object map.
pub const EXCLUDED_LABELS: &[&str] = &["wall", "floor", "ceiling", "door frame"];

pub const OBJECT_CLASSES: &[&str] = &[
    "bag",
    "bench",
    "book",
    "bookshelf",
    "bottle",
    "box",
    "cabinet",
    "chair",
    "coffee maker",
    "computer",
    "cup",
    "desk",
    "door",
    "fire extinguisher",
    "keyboard",
    "lamp",
    "microwave",
    "monitor",
    "mouse",
    "noticeboard",
    "potted plant",
    "printer",
    "projector",
    "refrigerator",
    "sink",
    "sofa",
    "table",
    "trash can",
    "tv",
    "water dispenser",
    "whiteboard",
];

pub const DEFAULT_CANDIDATE_ROOMS: &[&str] = &[
    "office",
    "break room",
    "conference room",
    "corridor",
    "storage room",
];

const OBJECT_SYNONYMS: &[(&str, &str)] = &[
    ("backpack", "bag"),
    ("handbag", "bag"),
    ("couch", "sofa"),
    ("fridge", "refrigerator"),
    ("plant", "potted plant"),
    ("screen", "monitor"),
    ("display", "monitor"),
    ("pc", "computer"),
    ("laptop", "computer"),
    ("television", "tv"),
    ("bin", "trash can"),
    ("garbage can", "trash can"),
    ("coffee machine", "coffee maker"),
    ("extinguisher", "fire extinguisher"),
    ("bulletin board", "noticeboard"),
    ("shelf", "bookshelf"),
];

const ROOM_SYNONYMS: &[(&str, &str)] = &[
    ("kitchen", "break room"),
    ("kitchenette", "break room"),
    ("breakroom", "break room"),
    ("meeting room", "conference room"),
    ("hallway", "corridor"),
    ("hall", "corridor"),
    ("storeroom", "storage room"),
];

pub fn size_tier(label: &str) -> SizeTier {
    if LARGE_CLASSES.contains(&label) {
        SizeTier::Large
    } else if SMALL_CLASSES.contains(&label) {
        SizeTier::Small
    } else {
        SizeTier::Default
    }
}

pub fn is_known_object(label: &str) -> bool {
    OBJECT_CLASSES.contains(&label)
}

pub fn is_excluded(label: &str) -> bool {
    EXCLUDED_LABELS.contains(&label)
}

/// What a natural-language command asks the robot to reach.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum TargetSpec {
    Object(String),
    Room(String),
}

impl TargetSpec {
    pub fn label(&self) -> &str {
        match self {
            TargetSpec::Object(l) | TargetSpec::Room(l) => l,
        }
    }
}

/// Resolves a command such as "find a break room" to a target by keyword
/// match against the known vocabulary. Object mentions take precedence over
/// room mentions ("find a printer in the office" targets the printer); within
/// a category the longest phrase wins.
pub fn parse_command(command: &str, rooms: &[String]) -> Option<TargetSpec> {
    let text = format!(" {} ", normalize_text(command));
    let longest = |pairs: &mut dyn Iterator<Item = (&str, &str)>| -> Option<String> {
        let mut best: Option<(usize, &str)> = None;
        for (phrase, canonical) in pairs {
            let hit =
                text.contains(&format!(" {phrase} ")) || text.contains(&format!(" {phrase}s "));
            if hit && best.is_none_or(|(l, _)| phrase.len() > l) {
                best = Some((phrase.len(), canonical));
            }
        }
        best.map(|(_, c)| c.to_string())
    };
    let mut objects = OBJECT_CLASSES
        .iter()
        .map(|c| (*c, *c))
        .chain(OBJECT_SYNONYMS.iter().copied());
    if let Some(label) = longest(&mut objects) {
        return Some(TargetSpec::Object(label));
    }
    let mut room_terms = rooms.iter().map(|r| (r.as_str(), r.as_str())).chain(
        ROOM_SYNONYMS
            .iter()
            .copied()
            .filter(|(_, r)| rooms.iter().any(|c| c == r)),
    );
    longest(&mut room_terms).map(TargetSpec::Room)
}

fn normalize_text(s: &str) -> String {
    s.to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == ' ' {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}
