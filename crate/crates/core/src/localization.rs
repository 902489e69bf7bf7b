//! Simulated SLAM: drifting odometry, a keyframe pose graph with scripted
//! corrections, and tri-state occupancy mapping from range scans.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Point2, Pose2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub pose: Pose2,
    /// Accumulated drift magnitude; zero for a perfect estimate.
    pub covariance_scalar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    pub trans_drift: f64,
    pub rot_drift: f64,
    pub correction_gain: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            trans_drift: 0.0,
            rot_drift: 0.0,
            correction_gain: 1.0,
        }
    }
}

impl DriftConfig {
    pub fn is_zero(&self) -> bool {
        self.trans_drift == 0.0 && self.rot_drift == 0.0
    }
}

/// Advances an estimate by a body-frame increment whose translation and
/// rotation are each scaled by `1 + drift·n`, `n ~ N(0, 1)` drawn from `seed`.
pub fn propagate_odometry(
    est: &PoseEstimate,
    true_delta: &Pose2,
    cfg: &DriftConfig,
    seed: u64,
) -> PoseEstimate {
    if cfg.is_zero() {
        return PoseEstimate {
            pose: est.pose.compose(true_delta),
            covariance_scalar: est.covariance_scalar,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_t: f64 = StandardNormal.sample(&mut rng);
    let n_r: f64 = StandardNormal.sample(&mut rng);
    let kt = 1.0 + cfg.trans_drift * n_t;
    let kr = 1.0 + cfg.rot_drift * n_r;
    let delta = Pose2::new(true_delta.x * kt, true_delta.y * kt, true_delta.theta * kr);
    let dist = true_delta.x.hypot(true_delta.y);
    PoseEstimate {
        pose: est.pose.compose(&delta),
        covariance_scalar: est.covariance_scalar
            + cfg.trans_drift * dist
            + cfg.rot_drift * true_delta.theta.abs(),
    }
}

/// Odometry source driven by consecutive ground-truth poses.
#[derive(Debug, Clone)]
pub struct Odometry {
    pub estimate: PoseEstimate,
    pub cfg: DriftConfig,
    seed: u64,
    steps: u64,
}

impl Odometry {
    pub fn new(start: Pose2, cfg: DriftConfig, seed: u64) -> Self {
        Self {
            estimate: PoseEstimate {
                pose: start,
                covariance_scalar: 0.0,
            },
            cfg,
            seed,
            steps: 0,
        }
    }

    pub fn advance(&mut self, true_prev: &Pose2, true_next: &Pose2) {
        self.steps += 1;
        if self.cfg.is_zero() {
            // Exact tracking: composing a recovered delta would round.
            self.estimate.pose = *true_next;
            return;
        }
        let delta = true_prev.delta_to(true_next);
        let seed = crate::world::mix_seed(self.seed, self.steps, 0x0D0);
        self.estimate = propagate_odometry(&self.estimate, &delta, &self.cfg, seed);
    }

    pub fn pose(&self) -> Pose2 {
        self.estimate.pose
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub id: u32,
    pub pose_est: Pose2,
    pub pose_corrected: Pose2,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub tick: u64,
    pub first_keyframe: u32,
    pub last_keyframe: u32,
    pub gain: f64,
    /// Mean translation applied to the keyframes.
    pub mean_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseGraph {
    pub keyframes: Vec<Keyframe>,
    pub correction_log: Vec<CorrectionEvent>,
}

pub const DEFAULT_KEYFRAME_DISTANCE: f64 = 0.5;
pub const DEFAULT_KEYFRAME_ANGLE: f64 = 0.5;

/// Keyframe policy: a new keyframe is due once the estimate has moved
/// `d_kf` meters or turned `a_kf` radians away from the last one.
pub fn maybe_keyframe(
    est: &Pose2,
    last: &Keyframe,
    d_kf: f64,
    a_kf: f64,
    tick: u64,
) -> Option<Keyframe> {
    let moved = est.position().distance(&last.pose_corrected.position());
    let turned = normalize_angle(est.theta - last.pose_corrected.theta).abs();
    (moved >= d_kf || turned >= a_kf).then(|| Keyframe {
        id: last.id + 1,
        pose_est: *est,
        pose_corrected: *est,
        tick,
    })
}

impl PoseGraph {
    pub fn last(&self) -> Option<&Keyframe> {
        self.keyframes.last()
    }

    pub fn get(&self, id: u32) -> Option<&Keyframe> {
        // ids are dense and start at zero
        self.keyframes.get(id as usize).filter(|k| k.id == id)
    }

    pub fn push(&mut self, pose: Pose2, tick: u64) -> u32 {
        let id = self.keyframes.last().map_or(0, |k| k.id + 1);
        self.keyframes.push(Keyframe {
            id,
            pose_est: pose,
            pose_corrected: pose,
            tick,
        });
        id
    }

    /// Pulls every keyframe toward its true pose by `gain`. Written as
    /// `truth - (1 - gain)·error` so that `gain = 1` lands exactly on truth.
    pub fn simulate_loop_closure(&mut self, truth: &[Pose2], gain: f64, tick: u64) {
        assert!((0.0..=1.0).contains(&gain), "gain must lie in [0, 1]");
        assert_eq!(
            truth.len(),
            self.keyframes.len(),
            "one true pose per keyframe"
        );
        if self.keyframes.is_empty() || gain == 0.0 {
            return;
        }
        let keep = 1.0 - gain;
        let mut shift = 0.0;
        for (kf, t) in self.keyframes.iter_mut().zip(truth) {
            let c = kf.pose_corrected;
            let next = Pose2 {
                x: t.x - keep * (t.x - c.x),
                y: t.y - keep * (t.y - c.y),
                theta: normalize_angle(t.theta - keep * normalize_angle(t.theta - c.theta)),
            };
            shift += next.position().distance(&c.position());
            kf.pose_corrected = next;
        }
        self.correction_log.push(CorrectionEvent {
            tick,
            first_keyframe: self.keyframes[0].id,
            last_keyframe: self.keyframes[self.keyframes.len() - 1].id,
            gain,
            mean_shift: shift / self.keyframes.len() as f64,
        });
    }
}

/// Applies the same contraction to a single pose (the live robot estimate).
pub fn pull_toward(current: &Pose2, truth: &Pose2, gain: f64) -> Pose2 {
    let keep = 1.0 - gain;
    Pose2 {
        x: truth.x - keep * (truth.x - current.x),
        y: truth.y - keep * (truth.y - current.y),
        theta: normalize_angle(truth.theta - keep * normalize_angle(truth.theta - current.theta)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Unexplored = 0,
    Occupied = 1,
    Explored = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point2,
    pub cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Self {
        Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![CellState::Unexplored; width * height],
        }
    }

    /// A grid covering `[0, w) × [0, h)` meters.
    pub fn covering(w: f64, h: f64, resolution: f64) -> Self {
        Self::new(
            (w / resolution).ceil() as usize,
            (h / resolution).ceil() as usize,
            resolution,
            Point2::default(),
        )
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        cy * self.width + cx
    }

    pub fn get(&self, cx: usize, cy: usize) -> CellState {
        self.cells[self.index(cx, cy)]
    }

    pub fn set(&mut self, cx: usize, cy: usize, s: CellState) {
        let i = self.index(cx, cy);
        self.cells[i] = s;
    }

    pub fn world_to_cell(&self, p: &Point2) -> Option<(usize, usize)> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        (fx >= 0.0 && fy >= 0.0 && (fx as usize) < self.width && (fy as usize) < self.height)
            .then_some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn count(&self, s: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == s).count()
    }

    /// Marks cells along each beam. Cells strictly before the return become
    /// explored; the cell just past the return point becomes occupied unless
    /// the beam reached `max_range`.
    pub fn integrate_scan(&mut self, pose: &Pose2, ranges: &[f64], max_range: f64) {
        let Some(start) = self.world_to_cell(&pose.position()) else {
            return;
        };
        let n = ranges.len();
        for (i, &r) in ranges.iter().enumerate() {
            let a = pose.theta + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let dir = Point2::new(a.cos(), a.sin());
            let hit = r < max_range;
            // Nudge past the surface so the occupied cell is on the far side
            // of the wall line regardless of rounding.
            let end = pose
                .position()
                .add(&dir.scale(if hit { r + 1e-6 } else { r }));
            let cells = self.traverse(&pose.position(), &end);
            let last = cells.len().saturating_sub(1);
            for (k, (cx, cy)) in cells.into_iter().enumerate() {
                let state = if k == last && hit {
                    CellState::Occupied
                } else {
                    CellState::Explored
                };
                self.set(cx, cy, state);
            }
        }
        if self.get(start.0, start.1) == CellState::Unexplored {
            self.set(start.0, start.1, CellState::Explored);
        }
    }

    /// Grid cells crossed by the segment `from → to`, in order, clipped to
    /// the grid (Amanatides–Woo traversal).
    pub fn traverse(&self, from: &Point2, to: &Point2) -> Vec<(usize, usize)> {
        let res = self.resolution;
        let (x0, y0) = (
            (from.x - self.origin.x) / res,
            (from.y - self.origin.y) / res,
        );
        let (x1, y1) = ((to.x - self.origin.x) / res, (to.y - self.origin.y) / res);
        let (mut cx, mut cy) = (x0.floor() as i64, y0.floor() as i64);
        let (ex, ey) = (x1.floor() as i64, y1.floor() as i64);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
        let t_delta_x = if dx != 0.0 {
            (1.0 / dx).abs()
        } else {
            f64::INFINITY
        };
        let t_delta_y = if dy != 0.0 {
            (1.0 / dy).abs()
        } else {
            f64::INFINITY
        };
        let mut t_max_x = if dx > 0.0 {
            (cx as f64 + 1.0 - x0) / dx
        } else if dx < 0.0 {
            (x0 - cx as f64) / -dx
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dy > 0.0 {
            (cy as f64 + 1.0 - y0) / dy
        } else if dy < 0.0 {
            (y0 - cy as f64) / -dy
        } else {
            f64::INFINITY
        };
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = Vec::new();
        let max_steps = ((ex - cx).abs() + (ey - cy).abs() + 2) as usize;
        for _ in 0..max_steps {
            if cx < 0 || cy < 0 || cx >= w || cy >= h {
                break;
            }
            out.push((cx as usize, cy as usize));
            if cx == ex && cy == ey {
                break;
            }
            if t_max_x < t_max_y {
                cx += step_x;
                t_max_x += t_delta_x;
            } else {
                cy += step_y;
                t_max_y += t_delta_y;
            }
        }
        out
    }

    /// Binary PGM (P5): 0 occupied, 128 unexplored, 255 explored, top row
    /// is the maximum y.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for cy in (0..self.height).rev() {
            for cx in 0..self.width {
                out.push(match self.get(cx, cy) {
                    CellState::Occupied => 0,
                    CellState::Unexplored => 128,
                    CellState::Explored => 255,
                });
            }
        }
        out
    }

    pub fn sidecar(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "resolution: {}", self.resolution);
        let _ = writeln!(s, "origin: {} {}", self.origin.x, self.origin.y);
        let _ = writeln!(s, "width: {}", self.width);
        let _ = writeln!(s, "height: {}", self.height);
        s
    }

    pub fn export(&self, pgm_path: &Path) -> io::Result<()> {
        std::fs::write(pgm_path, self.to_pgm())?;
        std::fs::write(pgm_path.with_extension("yaml"), self.sidecar())
    }

    pub fn from_pgm(bytes: &[u8], resolution: f64, origin: Point2) -> Option<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
        }
        if fields[0] != "P5" {
            return None;
        }
        let width: usize = fields[1].parse().ok()?;
        let height: usize = fields[2].parse().ok()?;
        let data = bytes.get(pos + 1..pos + 1 + width * height)?;
        let mut grid = Self::new(width, height, resolution, origin);
        for (row, chunk) in data.chunks(width).enumerate() {
            let cy = height - 1 - row;
            for (cx, &v) in chunk.iter().enumerate() {
                let s = match v {
                    0 => CellState::Occupied,
                    255 => CellState::Explored,
                    _ => CellState::Unexplored,
                };
                grid.set(cx, cy, s);
            }
        }
        Some(grid)
    }
}
