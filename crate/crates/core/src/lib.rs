//! Language-driven robot navigation over a deterministic 2D simulation:
//! semantic object mapping, hierarchical scene graphs, a planner executive
//! with action primitives, frontier exploration and safety-filtered
//! navigation.

pub mod cluster;
pub mod explore;
pub mod geometry;
pub mod harness;
pub mod llm_gateway;
pub mod localization;
pub mod nav;
pub mod planner;
pub mod scene_graph;
pub mod semantic_map;
pub mod stack;
pub mod vocab;
pub mod world;
