//! Inflated costmaps, cost-aware A*, pure-pursuit following, the CBF safety
//! filter and the goto / rotate behaviors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Point2, Pose2};
use crate::localization::{CellState, OccupancyGrid};
use crate::stack::Stack;

pub const LETHAL: u8 = 255;
pub const INSCRIBED: u8 = 254;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    Lethal,
    Cost(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostmapConfig {
    pub robot_radius: f64,
    pub inflation_radius: f64,
    pub cost_scale: f64,
    pub unknown_cost: u8,
}

impl Default for CostmapConfig {
    fn default() -> Self {
        Self {
            robot_radius: 0.35,
            inflation_radius: 0.9,
            cost_scale: 5.0,
            unknown_cost: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point2,
    pub cost: Vec<u8>,
}

impl Costmap {
    pub fn get(&self, cx: usize, cy: usize) -> u8 {
        self.cost[cy * self.width + cx]
    }

    pub fn world_to_cell(&self, p: &Point2) -> Option<(usize, usize)> {
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        (cx >= 0.0 && cy >= 0.0 && (cx as usize) < self.width && (cy as usize) < self.height)
            .then_some((cx as usize, cy as usize))
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    /// Binary PGM with the raw cost as grey level, top row is maximum y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for cy in (0..self.height).rev() {
            out.extend_from_slice(&self.cost[cy * self.width..(cy + 1) * self.width]);
        }
        out
    }
}

/// Exact squared Euclidean distance transform (in cells²) to the nearest
/// `true` cell. Cells with no source get a very large value.
pub fn squared_distance_transform(width: usize, height: usize, source: &[bool]) -> Vec<f64> {
    const FAR: f64 = 1e20;
    let mut grid: Vec<f64> = source.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let mut f = vec![0.0; width.max(height)];
    let mut d = vec![0.0; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        dt1d(&f[..height], &mut d[..height]);
        for y in 0..height {
            grid[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        dt1d(&f[..width], &mut d[..width]);
        grid[y * width..(y + 1) * width].copy_from_slice(&d[..width]);
    }
    grid
}

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn dt1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let vk = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + vk * vk)) / (2.0 * qf - 2.0 * vk);
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

/// Inflation cost for a cell whose center is `d` meters from the nearest
/// occupied cell center.
pub fn inflation_cost(d: f64, cfg: &CostmapConfig) -> u8 {
    if d <= 0.0 {
        LETHAL
    } else if d <= cfg.robot_radius {
        INSCRIBED
    } else if d >= cfg.inflation_radius {
        0
    } else {
        (253.0 * (-cfg.cost_scale * (d - cfg.robot_radius)).exp()).round() as u8
    }
}

pub fn build_costmap(grid: &OccupancyGrid, cfg: &CostmapConfig, unknown: UnknownPolicy) -> Costmap {
    assert!(
        cfg.inflation_radius >= cfg.robot_radius,
        "inflation radius below robot radius"
    );
    let occupied: Vec<bool> = grid
        .cells
        .iter()
        .map(|&c| c == CellState::Occupied)
        .collect();
    let d2 = squared_distance_transform(grid.width, grid.height, &occupied);
    let cost = grid
        .cells
        .iter()
        .zip(&d2)
        .map(|(&state, &d2)| {
            let inflated = inflation_cost(d2.sqrt() * grid.resolution, cfg);
            match (state, unknown) {
                (CellState::Unexplored, UnknownPolicy::Lethal) => LETHAL,
                (CellState::Unexplored, UnknownPolicy::Cost(c)) => inflated.max(c),
                _ => inflated,
            }
        })
        .collect();
    Costmap {
        width: grid.width,
        height: grid.height,
        resolution: grid.resolution,
        origin: grid.origin,
        cost,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    /// Meters of path length charged per unit of destination cell cost.
    pub lambda: f64,
    /// Inscribed cells this close to the start remain traversable so a robot
    /// nudged against an obstacle can leave.
    pub escape_radius: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            escape_radius: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2>,
    pub total_cost: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("no path: {0}")]
    NoPath(String),
}

/// Traversability shared by the planner and any reference search.
pub fn is_traversable(
    cm: &Costmap,
    cell: (usize, usize),
    start: (usize, usize),
    cfg: &PlanConfig,
) -> bool {
    match cm.get(cell.0, cell.1) {
        LETHAL => false,
        INSCRIBED => {
            let dx = cell.0 as f64 - start.0 as f64;
            let dy = cell.1 as f64 - start.1 as f64;
            (dx * dx + dy * dy).sqrt() * cm.resolution <= cfg.escape_radius
        }
        _ => true,
    }
}

pub fn edge_cost(cm: &Costmap, from: (usize, usize), to: (usize, usize), cfg: &PlanConfig) -> f64 {
    let diagonal = from.0 != to.0 && from.1 != to.1;
    let step = if diagonal {
        std::f64::consts::SQRT_2
    } else {
        1.0
    } * cm.resolution;
    step + cfg.lambda * cm.get(to.0, to.1) as f64
}

pub fn neighbors8(cm: &Costmap, c: (usize, usize)) -> impl Iterator<Item = (usize, usize)> + '_ {
    const OFFSETS: [(i64, i64); 8] = [
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    OFFSETS.iter().filter_map(move |(dx, dy)| {
        let x = c.0 as i64 + dx;
        let y = c.1 as i64 + dy;
        (x >= 0 && y >= 0 && (x as usize) < cm.width && (y as usize) < cm.height)
            .then_some((x as usize, y as usize))
    })
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then h, then index.
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn astar(
    cm: &Costmap,
    start: (usize, usize),
    is_goal: impl Fn((usize, usize)) -> bool,
    heuristic: impl Fn((usize, usize)) -> f64,
    cfg: &PlanConfig,
) -> Option<Path> {
    let w = cm.width;
    let n = w * cm.height;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = start.1 * w + start.0;
    g[s] = 0.0;
    open.push(Open {
        f: heuristic(start),
        h: heuristic(start),
        idx: s,
    });
    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let cell = (idx % w, idx / w);
        if is_goal(cell) {
            let mut cells = vec![idx];
            while parent[*cells.last().expect("nonempty")] != usize::MAX {
                cells.push(parent[*cells.last().expect("nonempty")]);
            }
            cells.reverse();
            let waypoints = cells
                .iter()
                .map(|&i| cm.cell_center(i % w, i / w))
                .collect();
            return Some(Path {
                waypoints,
                total_cost: g[idx],
            });
        }
        for nb in neighbors8(cm, cell) {
            let j = nb.1 * w + nb.0;
            if closed[j] || !is_traversable(cm, nb, start, cfg) {
                continue;
            }
            let cand = g[idx] + edge_cost(cm, cell, nb, cfg);
            if cand < g[j] {
                g[j] = cand;
                parent[j] = idx;
                let h = heuristic(nb);
                open.push(Open {
                    f: cand + h,
                    h,
                    idx: j,
                });
            }
        }
    }
    None
}

fn start_cell(cm: &Costmap, start: &Point2) -> Result<(usize, usize), NavError> {
    let s = cm
        .world_to_cell(start)
        .ok_or_else(|| NavError::NoPath("start outside the map".into()))?;
    if cm.get(s.0, s.1) == LETHAL {
        return Err(NavError::NoPath("start cell is blocked".into()));
    }
    Ok(s)
}

/// Optimal path between the cells containing `start` and `goal`.
pub fn plan_path(
    cm: &Costmap,
    start: &Point2,
    goal: &Point2,
    cfg: &PlanConfig,
) -> Result<Path, NavError> {
    let s = start_cell(cm, start)?;
    let gc = cm
        .world_to_cell(goal)
        .ok_or_else(|| NavError::NoPath("goal outside the map".into()))?;
    if !is_traversable(cm, gc, s, cfg) {
        return Err(NavError::NoPath(format!(
            "goal ({:.2}, {:.2}) is blocked",
            goal.x, goal.y
        )));
    }
    let gp = cm.cell_center(gc.0, gc.1);
    astar(
        cm,
        s,
        |c| c == gc,
        |c| cm.cell_center(c.0, c.1).distance(&gp),
        cfg,
    )
    .ok_or_else(|| NavError::NoPath(format!("goal ({:.2}, {:.2}) unreachable", goal.x, goal.y)))
}

/// Optimal path to any traversable cell whose center lies within `standoff`
/// of `target`; with zero standoff the target's own cell is the goal.
pub fn plan_to_region(
    cm: &Costmap,
    start: &Point2,
    target: &Point2,
    standoff: f64,
    cfg: &PlanConfig,
) -> Result<Path, NavError> {
    if standoff < cm.resolution {
        return plan_path(cm, start, target, cfg);
    }
    let s = start_cell(cm, start)?;
    let path = astar(
        cm,
        s,
        |c| cm.cell_center(c.0, c.1).distance(target) <= standoff,
        |c| (cm.cell_center(c.0, c.1).distance(target) - standoff).max(0.0),
        cfg,
    );
    path.ok_or_else(|| {
        NavError::NoPath(format!(
            "no reachable cell within {standoff:.2} m of ({:.2}, {:.2})",
            target.x, target.y
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const ZERO: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowerConfig {
    pub lookahead: f64,
    pub k_omega: f64,
    pub goal_tolerance: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.6,
            k_omega: 1.5,
            goal_tolerance: 0.1,
            v_max: 0.5,
            omega_max: PI / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowOutput {
    pub cmd: VelocityCommand,
    pub arrived: bool,
}

/// Turns toward `heading_error` with the follower gains.
pub fn steer(heading_error: f64, cfg: &FollowerConfig) -> VelocityCommand {
    let e = normalize_angle(heading_error);
    let omega = if e == PI {
        cfg.omega_max
    } else {
        (cfg.k_omega * e).clamp(-cfg.omega_max, cfg.omega_max)
    };
    VelocityCommand::new(cfg.v_max * e.cos().max(0.0), omega)
}

/// Pure pursuit toward the first waypoint at least `lookahead` away, counted
/// from the waypoint nearest the robot.
pub fn follow_path(path: &Path, pose: &Pose2, cfg: &FollowerConfig) -> FollowOutput {
    assert!(
        !path.waypoints.is_empty(),
        "follow_path needs a nonempty path"
    );
    let pos = pose.position();
    let last = *path.waypoints.last().expect("nonempty");
    if pos.distance(&last) <= cfg.goal_tolerance {
        return FollowOutput {
            cmd: VelocityCommand::ZERO,
            arrived: true,
        };
    }
    let nearest = path
        .waypoints
        .iter()
        .enumerate()
        .min_by(|a, b| {
            a.1.distance(&pos)
                .total_cmp(&b.1.distance(&pos))
                .then(b.0.cmp(&a.0))
        })
        .map(|(i, _)| i)
        .expect("nonempty");
    let target = path.waypoints[nearest..]
        .iter()
        .find(|w| w.distance(&pos) >= cfg.lookahead)
        .copied()
        .unwrap_or(last);
    let bearing = (target.y - pos.y).atan2(target.x - pos.x);
    FollowOutput {
        cmd: steer(bearing - pose.theta, cfg),
        arrived: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbfConfig {
    pub d_safe: f64,
    pub gamma: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub k_avoid: f64,
    pub dt: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        Self {
            d_safe: 0.45,
            gamma: 0.3,
            v_max: 0.5,
            omega_max: PI / 2.0,
            k_avoid: 0.5,
            dt: 0.1,
        }
    }
}

/// Single-constraint discrete-time barrier filter on the nearest obstacle
/// point. The half-space projection can leave a forward speed that still
/// violates the constraint once mapped back onto the heading, so the speed
/// is then reduced to the largest value that satisfies it.
pub fn cbf_filter(
    cmd: VelocityCommand,
    pose: &Pose2,
    obstacle_points: &[Point2],
    cfg: &CbfConfig,
) -> VelocityCommand {
    let pos = pose.position();
    let Some(nearest) = obstacle_points
        .iter()
        .min_by(|a, b| a.distance(&pos).total_cmp(&b.distance(&pos)))
    else {
        return cmd;
    };
    let diff = pos.sub(nearest);
    let dist = diff.norm();
    if dist == 0.0 {
        return VelocityCommand::new(0.0, cmd.omega);
    }
    let a = diff.scale(1.0 / dist);
    let h = dist - cfg.d_safe;
    let b = -cfg.gamma * h / cfg.dt;
    let heading = pose.heading();
    let u = heading.scale(cmd.v);
    if a.dot(&u) >= b {
        return cmd;
    }
    let u2 = u.add(&a.scale(b - a.dot(&u)));
    let mut v = u2.dot(&heading).clamp(0.0, cfg.v_max);
    let c = a.dot(&heading);
    if c < 0.0 && v * c < b {
        v = (b / c).max(0.0);
    }
    let mut omega = cmd.omega;
    if h < 0.0 {
        let away = normalize_angle(a.y.atan2(a.x) - pose.theta);
        omega += cfg.k_avoid * if away >= 0.0 { 1.0 } else { -1.0 };
    }
    VelocityCommand::new(v, omega.clamp(-cfg.omega_max, cfg.omega_max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub costmap: CostmapConfig,
    pub plan: PlanConfig,
    pub follower: FollowerConfig,
    pub cbf: CbfConfig,
    pub replan_every: u64,
    /// Abort when the robot moves less than 0.2 m over this many ticks.
    pub stall_ticks: u64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            costmap: CostmapConfig::default(),
            plan: PlanConfig::default(),
            follower: FollowerConfig::default(),
            cbf: CbfConfig::default(),
            replan_every: 20,
            stall_ticks: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GotoOutcome {
    Arrived,
    NoPath,
    Aborted,
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GotoResult {
    pub outcome: GotoOutcome,
    pub log: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GotoParams {
    pub target: Point2,
    pub standoff: f64,
    pub unknown: UnknownPolicy,
    /// Absolute tick at which the behavior gives up.
    pub deadline: u64,
    pub face_target: bool,
}

fn path_blocked(grid: &OccupancyGrid, path: &Path, pos: &Point2) -> bool {
    let nearest = path
        .waypoints
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(pos).total_cmp(&b.1.distance(pos)))
        .map_or(0, |(i, _)| i);
    path.waypoints[nearest..].iter().any(|w| {
        grid.world_to_cell(w)
            .is_some_and(|(cx, cy)| grid.get(cx, cy) == CellState::Occupied)
    })
}

/// Plans on the current grid and drives until within `standoff` of the
/// target, replanning periodically and whenever the path runs into newly
/// mapped obstacles.
pub fn goto_behavior(
    stack: &mut Stack,
    params: &GotoParams,
    stop: &mut dyn FnMut(&Stack) -> bool,
) -> GotoResult {
    let cfg = stack.cfg.nav.clone();
    let plan_standoff = (params.standoff - 0.1).max(0.0);
    let mut path: Option<Path> = None;
    let mut since_plan = 0u64;
    let mut anchor = (stack.tick(), stack.pose_est().position());
    stack.status.path.clear();
    let result = loop {
        if stop(stack) {
            break GotoResult {
                outcome: GotoOutcome::Stopped,
                log: "stopped: goal condition met".into(),
            };
        }
        let pose = stack.pose_est();
        let pos = pose.position();
        if pos.distance(&params.target) <= params.standoff {
            if params.face_target {
                face_point(stack, &params.target, params.deadline);
            }
            break GotoResult {
                outcome: GotoOutcome::Arrived,
                log: format!(
                    "arrived within {:.2} m of ({:.2}, {:.2})",
                    params.standoff, params.target.x, params.target.y
                ),
            };
        }
        if stack.tick() >= params.deadline {
            break GotoResult {
                outcome: GotoOutcome::Aborted,
                log: "aborted: tick budget exhausted".into(),
            };
        }
        let stale = match &path {
            None => true,
            Some(p) => since_plan >= cfg.replan_every || path_blocked(&stack.grid, p, &pos),
        };
        if stale {
            let cm = build_costmap(&stack.grid, &cfg.costmap, params.unknown);
            match plan_to_region(&cm, &pos, &params.target, plan_standoff, &cfg.plan) {
                Ok(p) => {
                    stack.status.path = p.waypoints.clone();
                    path = Some(p);
                }
                Err(e) => {
                    break GotoResult {
                        outcome: GotoOutcome::NoPath,
                        log: format!(
                            "navigation failed: {e} (target ({:.2}, {:.2}))",
                            params.target.x, params.target.y
                        ),
                    };
                }
            }
            since_plan = 0;
        }
        let follow = follow_path(path.as_ref().expect("planned above"), &pose, &cfg.follower);
        if follow.arrived {
            // End of path but not yet within standoff: plan again next tick.
            path = None;
        }
        stack.drive(follow.cmd);
        since_plan += 1;
        if stack.tick() - anchor.0 >= cfg.stall_ticks {
            let now = stack.pose_est().position();
            if now.distance(&anchor.1) < 0.2 {
                break GotoResult {
                    outcome: GotoOutcome::Aborted,
                    log: "aborted: robot made no progress".into(),
                };
            }
            anchor = (stack.tick(), now);
        }
    };
    stack.status.path.clear();
    result
}

/// Rotates in place until the robot faces `p` within 0.1 rad.
pub fn face_point(stack: &mut Stack, p: &Point2, deadline: u64) {
    let cfg = stack.cfg.nav.follower.clone();
    while stack.tick() < deadline {
        let pose = stack.pose_est();
        let e = normalize_angle((p.y - pose.y).atan2(p.x - pose.x) - pose.theta);
        if e.abs() < 0.1 {
            break;
        }
        let omega = (cfg.k_omega * e).clamp(-cfg.omega_max, cfg.omega_max);
        stack.drive(VelocityCommand::new(0.0, omega));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotateResult {
    pub completed: bool,
    pub turned: f64,
    pub ticks: u64,
}

/// Full turn in place at maximum angular rate, integrating the estimated
/// heading change.
pub fn rotate_360(
    stack: &mut Stack,
    deadline: u64,
    stop: &mut dyn FnMut(&Stack) -> bool,
) -> RotateResult {
    let omega = stack.cfg.nav.follower.omega_max;
    let start = stack.tick();
    let mut turned = 0.0;
    let mut prev = stack.pose_est().theta;
    while turned < 2.0 * PI - 1e-9 {
        if stack.tick() >= deadline || stop(stack) {
            return RotateResult {
                completed: false,
                turned,
                ticks: stack.tick() - start,
            };
        }
        stack.drive(VelocityCommand::new(0.0, omega));
        let now = stack.pose_est().theta;
        turned += normalize_angle(now - prev).abs();
        prev = now;
    }
    RotateResult {
        completed: true,
        turned,
        ticks: stack.tick() - start,
    }
}
