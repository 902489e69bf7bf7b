//! Frontier detection and scoring, blacklisting, random fallback goals and
//! the budgeted exploration behavior.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::localization::{CellState, OccupancyGrid};
use crate::nav::{
    goto_behavior, rotate_360, GotoOutcome, GotoParams, UnknownPolicy, VelocityCommand,
};
use crate::stack::Stack;
use crate::world::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub centroid: Point2,
    pub distance: f64,
    pub size: usize,
    pub score: f64,
    #[serde(skip)]
    pub cells: Vec<(usize, usize)>,
}

/// `Intent` minimizes `α·d − n` (closer wins); `Literal` maximizes
/// `α·d + n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    #[default]
    Intent,
    Literal,
}

impl std::str::FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intent" => Ok(Self::Intent),
            "literal" => Ok(Self::Literal),
            other => Err(format!(
                "unknown frontier score mode {other:?} (expected intent or literal)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    pub alpha: f64,
    pub score_mode: ScoreMode,
    pub blacklist_radius: f64,
    pub fallback_min_distance: f64,
    /// Frontiers smaller than this are detected but never selected.
    pub min_frontier_cells: usize,
    pub frontier_standoff: f64,
    pub fallback_standoff: f64,
    pub goal_timeout_ticks: u64,
    pub vanish_check_every: u64,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            score_mode: ScoreMode::Intent,
            blacklist_radius: 0.5,
            fallback_min_distance: 1.0,
            min_frontier_cells: 8,
            frontier_standoff: 0.5,
            fallback_standoff: 0.5,
            goal_timeout_ticks: 600,
            vanish_check_every: 20,
        }
    }
}

fn is_frontier_cell(grid: &OccupancyGrid, cx: usize, cy: usize) -> bool {
    if grid.get(cx, cy) != CellState::Unexplored {
        return false;
    }
    let (x, y) = (cx as i64, cy as i64);
    [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        nx >= 0
            && ny >= 0
            && (nx as usize) < grid.width
            && (ny as usize) < grid.height
            && grid.get(nx as usize, ny as usize) == CellState::Explored
    })
}

/// Unexplored cells 4-adjacent to explored cells, grouped into 8-connected
/// clusters, largest first then by centroid.
pub fn detect_frontiers(grid: &OccupancyGrid, robot: &Point2) -> Vec<Frontier> {
    let (w, h) = (grid.width, grid.height);
    let mut is_f = vec![false; w * h];
    for cy in 0..h {
        for cx in 0..w {
            is_f[cy * w + cx] = is_frontier_cell(grid, cx, cy);
        }
    }
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !is_f[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut cells = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (cx, cy) = (i % w, i / w);
            cells.push((cx, cy));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if is_f[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        cells.sort_unstable();
        let centroid = Point2::centroid(
            cells
                .iter()
                .map(|&(x, y)| grid.cell_center(x, y))
                .collect::<Vec<_>>()
                .iter(),
        )
        .expect("nonempty cluster");
        out.push(Frontier {
            centroid,
            distance: centroid.distance(robot),
            size: cells.len(),
            score: 0.0,
            cells,
        });
    }
    out.sort_by(|a, b| b.size.cmp(&a.size).then(a.centroid.lex_cmp(&b.centroid)));
    out
}

pub fn score_frontiers(frontiers: &mut [Frontier], alpha: f64, mode: ScoreMode) {
    for f in frontiers {
        f.score = match mode {
            ScoreMode::Intent => alpha * f.distance - f.size as f64,
            ScoreMode::Literal => alpha * f.distance + f.size as f64,
        };
    }
}

/// Index of the preferred frontier among `candidates` (already scored).
pub fn best_frontier<'a, I: IntoIterator<Item = (usize, &'a Frontier)>>(
    candidates: I,
    mode: ScoreMode,
) -> Option<usize> {
    candidates
        .into_iter()
        .min_by(|(_, a), (_, b)| {
            let by_score = match mode {
                ScoreMode::Intent => a.score.total_cmp(&b.score),
                ScoreMode::Literal => b.score.total_cmp(&a.score),
            };
            by_score.then(a.centroid.lex_cmp(&b.centroid))
        })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    Frontier,
    RandomFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreGoal {
    pub point: Point2,
    pub source: GoalSource,
    /// Index into the frontier list the goal was chosen from.
    #[serde(skip)]
    pub frontier: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    pub blacklist: Vec<Point2>,
    pub rng_seed: u64,
    draws: u64,
}

impl ExplorationState {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            blacklist: Vec::new(),
            rng_seed,
            draws: 0,
        }
    }

    pub fn is_blacklisted(&self, p: &Point2, radius: f64) -> bool {
        self.blacklist.iter().any(|b| b.distance(p) <= radius)
    }
}

/// Best selectable frontier, else a seeded uniform draw over explored cells
/// at least `fallback_min_distance` from the robot.
pub fn next_goal(
    frontiers: &[Frontier],
    state: &mut ExplorationState,
    grid: &OccupancyGrid,
    robot: &Point2,
    cfg: &ExploreConfig,
) -> Option<ExploreGoal> {
    let candidates = frontiers.iter().enumerate().filter(|(_, f)| {
        f.size >= cfg.min_frontier_cells && !state.is_blacklisted(&f.centroid, cfg.blacklist_radius)
    });
    if let Some(i) = best_frontier(candidates, cfg.score_mode) {
        return Some(ExploreGoal {
            point: frontiers[i].centroid,
            source: GoalSource::Frontier,
            frontier: Some(i),
        });
    }
    let free: Vec<Point2> = (0..grid.height)
        .flat_map(|cy| (0..grid.width).map(move |cx| (cx, cy)))
        .filter(|&(cx, cy)| grid.get(cx, cy) == CellState::Explored)
        .map(|(cx, cy)| grid.cell_center(cx, cy))
        .filter(|p| p.distance(robot) >= cfg.fallback_min_distance)
        .collect();
    if free.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(state.rng_seed, state.draws, 0xF4));
    state.draws += 1;
    let point = free[rng.random_range(0..free.len())];
    Some(ExploreGoal {
        point,
        source: GoalSource::RandomFallback,
        frontier: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreEnd {
    Budget,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreOutcome {
    pub reason: ExploreEnd,
    pub explored_before: usize,
    pub explored_after: usize,
    pub goals: Vec<ExploreGoal>,
    pub blacklisted: Vec<Point2>,
}

impl ExploreOutcome {
    pub fn coverage_delta(&self) -> i64 {
        self.explored_after as i64 - self.explored_before as i64
    }
}

/// Initial turn in place, then frontier goals until the budget runs out or
/// `stop` fires.
pub fn run_exploration(
    stack: &mut Stack,
    budget_ticks: u64,
    stop: &mut dyn FnMut(&Stack) -> bool,
) -> ExploreOutcome {
    let explored_before = stack.grid.count(CellState::Explored);
    let deadline = stack.tick() + budget_ticks;
    let cfg = stack.cfg.explore.clone();
    let unknown = UnknownPolicy::Cost(stack.cfg.nav.costmap.unknown_cost);
    stack.explore_episodes += 1;
    let mut state = ExplorationState::new(mix_seed(stack.cfg.seed, stack.explore_episodes, 0xE7));
    let mut goals = Vec::new();
    let finish = |stack: &Stack, reason, goals, state: ExplorationState| ExploreOutcome {
        reason,
        explored_before,
        explored_after: stack.grid.count(CellState::Explored),
        goals,
        blacklisted: state.blacklist,
    };
    if budget_ticks == 0 {
        return finish(stack, ExploreEnd::Budget, goals, state);
    }
    let spin = rotate_360(stack, deadline, stop);
    if !spin.completed {
        let reason = if stack.tick() >= deadline {
            ExploreEnd::Budget
        } else {
            ExploreEnd::Stopped
        };
        return finish(stack, reason, goals, state);
    }
    loop {
        if stack.tick() >= deadline {
            return finish(stack, ExploreEnd::Budget, goals, state);
        }
        if stop(stack) {
            return finish(stack, ExploreEnd::Stopped, goals, state);
        }
        let pos = stack.pose_est().position();
        let mut frontiers = detect_frontiers(&stack.grid, &pos);
        score_frontiers(&mut frontiers, cfg.alpha, cfg.score_mode);
        stack.status.frontiers = frontiers.iter().map(|f| f.centroid).collect();
        let started = stack.tick();
        let Some(goal) = next_goal(&frontiers, &mut state, &stack.grid, &pos, &cfg) else {
            stack.drive(VelocityCommand::ZERO);
            continue;
        };
        log::debug!(
            "explore goal {:?} at ({:.2}, {:.2})",
            goal.source,
            goal.point.x,
            goal.point.y
        );
        let cells = goal
            .frontier
            .map(|i| std::mem::take(&mut frontiers[i].cells))
            .unwrap_or_default();
        let standoff = match goal.source {
            GoalSource::Frontier => cfg.frontier_standoff,
            GoalSource::RandomFallback => cfg.fallback_standoff,
        };
        let params = GotoParams {
            target: goal.point,
            standoff,
            unknown,
            deadline: deadline.min(started + cfg.goal_timeout_ticks),
            face_target: false,
        };
        let mut vanished = false;
        let mut stop_goal = |s: &Stack| {
            if stop(s) {
                return true;
            }
            let elapsed = s.tick() - started;
            if !cells.is_empty() && elapsed > 0 && elapsed.is_multiple_of(cfg.vanish_check_every) {
                let open = cells
                    .iter()
                    .filter(|&&(x, y)| s.grid.get(x, y) == CellState::Unexplored)
                    .count();
                vanished = (open as f64) < 0.3 * cells.len() as f64;
            }
            vanished
        };
        let result = goto_behavior(stack, &params, &mut stop_goal);
        if goal.source == GoalSource::Frontier
            && matches!(
                result.outcome,
                GotoOutcome::NoPath | GotoOutcome::Aborted | GotoOutcome::Arrived
            )
        {
            state.blacklist.push(goal.point);
        }
        goals.push(goal);
        if stack.tick() == started {
            stack.drive(VelocityCommand::ZERO);
        }
    }
}
