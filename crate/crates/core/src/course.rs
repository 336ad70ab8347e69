//! Route geometry, coin placement and pickup, route progress, and the trial
//! lifecycle for the coin-collection task.

use serde::{Deserialize, Serialize};

pub const DEFAULT_ROUTE_LENGTH: f64 = 200.0;
pub const DEFAULT_SPACING: f64 = 10.0;
pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
pub const DEFAULT_PICKUP_RADIUS: f64 = 0.75;

/// Built-in route ids.
pub const ROUTE_IDS: [u8; 4] = [1, 2, 3, 4];

/// Arc-length window searched around the current progress when tracking.
const TRACK_WINDOW: f64 = 5.0;

/// Chord length used when sampling arcs of built-in routes.
const SAMPLE_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CourseError {
    #[error("unknown route {0} (valid: 1, 2, 3, 4)")]
    UnknownRoute(u8),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid course parameter: {0}")]
    InvalidParameter(String),
}

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closest point on segment `a→b` to `p`, as the clamped parameter t ∈ [0, 1].
fn segment_param(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
}

/// Result of projecting a point onto the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc-length position of the foot point.
    pub arc: f64,
    pub point: Point,
    pub distance: f64,
    pub segment: usize,
}

/// Uniform grid over the route's segments, each segment listed in every cell
/// its bounding box touches.
#[derive(Debug, Clone)]
struct SegmentGrid {
    origin: Point,
    cell: f64,
    cols: i64,
    rows: i64,
    cells: Vec<Vec<u32>>,
}

impl SegmentGrid {
    fn build(points: &[Point], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let cols = ((hi[0] - lo[0]) / cell).floor() as i64 + 1;
        let rows = ((hi[1] - lo[1]) / cell).floor() as i64 + 1;
        let mut grid = SegmentGrid {
            origin: lo,
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); (cols * rows) as usize],
        };
        for (i, w) in points.windows(2).enumerate() {
            let (c0, r0) = grid.cell_of(w[0]);
            let (c1, r1) = grid.cell_of(w[1]);
            for c in c0.min(c1)..=c0.max(c1) {
                for r in r0.min(r1)..=r0.max(r1) {
                    let idx = grid.index(c, r).expect("segment inside grid bounds");
                    grid.cells[idx].push(i as u32);
                }
            }
        }
        grid
    }

    /// Cell coordinates, unclamped (may lie outside the grid).
    fn cell_of(&self, p: Point) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.cell).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell).floor() as i64,
        )
    }

    fn index(&self, c: i64, r: i64) -> Option<usize> {
        (0..self.cols)
            .contains(&c)
            .then_some(())
            .filter(|_| (0..self.rows).contains(&r))
            .map(|_| (r * self.cols + c) as usize)
    }

    /// Visit segment ids in cells at Chebyshev ring `ring` around `(c, r)`.
    fn ring(&self, c: i64, r: i64, ring: i64, mut f: impl FnMut(u32)) {
        let mut visit = |cc: i64, rr: i64| {
            if let Some(i) = self.index(cc, rr) {
                self.cells[i].iter().copied().for_each(&mut f);
            }
        };
        if ring == 0 {
            visit(c, r);
            return;
        }
        for cc in c - ring..=c + ring {
            visit(cc, r - ring);
            visit(cc, r + ring);
        }
        for rr in r - ring + 1..=r + ring - 1 {
            visit(c - ring, rr);
            visit(c + ring, rr);
        }
    }

    /// Rings needed before every grid cell has been visited.
    fn max_ring(&self, c: i64, r: i64) -> i64 {
        [c, self.cols - 1 - c, r, self.rows - 1 - r]
            .into_iter()
            .map(i64::abs)
            .max()
            .unwrap_or(0)
            + self.cols.max(self.rows)
    }
}

/// Centerline polyline plus the drivable corridor around it.
#[derive(Debug, Clone)]
pub struct CourseGeometry {
    points: Vec<Point>,
    /// Arc length at each point.
    cumulative: Vec<f64>,
    half_width: f64,
    grid: SegmentGrid,
}

impl CourseGeometry {
    pub fn new(points: Vec<Point>, half_width: f64) -> Result<Self, CourseError> {
        if points.len() < 2 {
            return Err(CourseError::InvalidGeometry(
                "need at least 2 points".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CourseError::InvalidGeometry("non-finite coordinate".into()));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(CourseError::InvalidParameter(format!(
                "half width {half_width} must be positive"
            )));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let d = dist(w[0], w[1]);
            if d == 0.0 {
                return Err(CourseError::InvalidGeometry(format!(
                    "points {i} and {} coincide",
                    i + 1
                )));
            }
            cumulative.push(cumulative[i] + d);
        }
        let grid = SegmentGrid::build(&points, (2.0 * half_width).max(1.0));
        Ok(CourseGeometry {
            points,
            cumulative,
            half_width,
            grid,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Segment index containing arc position `s` (clamped to the route).
    fn segment_at(&self, s: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= s);
        i.saturating_sub(1).min(self.segment_count() - 1)
    }

    pub fn point_at(&self, s: f64) -> Point {
        let s = s.clamp(0.0, self.total_length());
        let i = self.segment_at(s);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        lerp(
            self.points[i],
            self.points[i + 1],
            (s - self.cumulative[i]) / len,
        )
    }

    /// Route tangent direction at `s`, radians.
    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s.clamp(0.0, self.total_length()));
        let (a, b) = (self.points[i], self.points[i + 1]);
        (b[1] - a[1]).atan2(b[0] - a[0])
    }

    fn project_on(&self, p: Point, i: usize) -> Projection {
        let (a, b) = (self.points[i], self.points[i + 1]);
        let t = segment_param(p, a, b);
        let foot = lerp(a, b, t);
        Projection {
            arc: self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i]),
            point: foot,
            distance: dist(p, foot),
            segment: i,
        }
    }

    fn better(best: Option<Projection>, cand: Projection) -> Option<Projection> {
        match best {
            Some(b)
                if b.distance < cand.distance
                    || (b.distance == cand.distance && b.segment <= cand.segment) =>
            {
                Some(b)
            }
            _ => Some(cand),
        }
    }

    /// Globally nearest centerline point, via the segment grid.
    pub fn project(&self, p: Point) -> Projection {
        let (c, r) = self.grid.cell_of(p);
        let mut best: Option<Projection> = None;
        // distance from p to the boundary of its own cell
        let fx = (p[0] - self.grid.origin[0]) / self.grid.cell - c as f64;
        let fy = (p[1] - self.grid.origin[1]) / self.grid.cell - r as f64;
        let inset = fx.min(1.0 - fx).min(fy).min(1.0 - fy).max(0.0) * self.grid.cell;
        for ring in 0..=self.grid.max_ring(c, r) {
            self.grid.ring(c, r, ring, |i| {
                best = Self::better(best, self.project_on(p, i as usize));
            });
            // every unvisited segment lies at least this far away
            let cleared = ring as f64 * self.grid.cell + inset;
            if matches!(best, Some(b) if b.distance <= cleared) {
                break;
            }
        }
        best.unwrap_or_else(|| {
            (0..self.segment_count())
                .map(|i| self.project_on(p, i))
                .fold(None, Self::better)
                .expect("at least one segment")
        })
    }

    /// Distance from `p` to the centerline.
    pub fn distance_to_centerline(&self, p: Point) -> f64 {
        self.project(p).distance
    }

    pub fn in_corridor(&self, p: Point) -> bool {
        self.distance_to_centerline(p) <= self.half_width
    }

    /// Nearest centerline point among segments overlapping `[lo, hi]` in arc length.
    pub fn project_within(&self, p: Point, lo: f64, hi: f64) -> Projection {
        let total = self.total_length();
        let (lo, hi) = (lo.clamp(0.0, total), hi.clamp(0.0, total));
        let first = self.segment_at(lo);
        let last = self.segment_at(hi);
        let mut best = (first..=last)
            .map(|i| self.project_on(p, i))
            .fold(None, Self::better)
            .expect("non-empty range");
        if best.arc < lo || best.arc > hi {
            let arc = best.arc.clamp(lo, hi);
            let point = self.point_at(arc);
            best = Projection {
                arc,
                point,
                distance: dist(p, point),
                segment: self.segment_at(arc),
            };
        }
        best
    }
}

/// Monotone route progress: the furthest arc position reached, tracked with
/// a local search around the previous value so loops and close passes do
/// not cause jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteTracker {
    progress: f64,
}

impl RouteTracker {
    pub fn new() -> Self {
        RouteTracker { progress: 0.0 }
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn update(&mut self, course: &CourseGeometry, p: Point) -> f64 {
        let proj = course.project_within(
            p,
            self.progress - TRACK_WINDOW,
            self.progress + TRACK_WINDOW,
        );
        self.progress = self.progress.max(proj.arc);
        self.progress
    }

    /// Reset after a respawn; the only way progress decreases.
    pub fn reset_to(&mut self, arc: f64) {
        self.progress = arc;
    }
}

impl Default for RouteTracker {
    fn default() -> Self {
        RouteTracker::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coin {
    pub arc: f64,
    pub position: Point,
    pub collected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoinSet {
    pub coins: Vec<Coin>,
    pub spacing: f64,
    pub pickup_radius: f64,
}

impl CoinSet {
    /// Coins at arc positions `spacing, 2·spacing, …` up to the route end.
    pub fn place(
        course: &CourseGeometry,
        spacing: f64,
        pickup_radius: f64,
    ) -> Result<Self, CourseError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(CourseError::InvalidParameter(format!(
                "spacing {spacing} must be positive"
            )));
        }
        if !(pickup_radius.is_finite() && pickup_radius > 0.0) {
            return Err(CourseError::InvalidParameter(format!(
                "pickup radius {pickup_radius} must be positive"
            )));
        }
        let total = course.total_length();
        let coins = (1..)
            .map(|k| k as f64 * spacing)
            .take_while(|&arc| arc <= total + 1e-9)
            .map(|arc| {
                let arc = arc.min(total);
                Coin {
                    arc,
                    position: course.point_at(arc),
                    collected: false,
                }
            })
            .collect();
        Ok(CoinSet {
            coins,
            spacing,
            pickup_radius,
        })
    }

    pub fn total(&self) -> u32 {
        self.coins.len() as u32
    }

    pub fn collected(&self) -> u32 {
        self.coins.iter().filter(|c| c.collected).count() as u32
    }

    pub fn reset(&mut self) {
        self.coins.iter_mut().for_each(|c| c.collected = false);
    }

    /// Collect every pending coin within the pickup radius of `p`.
    /// Returns the indices collected by this call.
    pub fn update_pickup(&mut self, p: Point) -> Vec<usize> {
        let r = self.pickup_radius;
        self.coins
            .iter_mut()
            .enumerate()
            .filter(|(_, c)| !c.collected && dist(c.position, p) <= r)
            .map(|(i, c)| {
                c.collected = true;
                i
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialPhase {
    Training,
    Running,
    Complete,
    Aborted,
}

impl TrialPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, TrialPhase::Complete | TrialPhase::Aborted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStatus {
    pub phase: TrialPhase,
    pub coins_collected: u32,
    pub coins_total: u32,
    pub start_tick: u64,
    pub end_tick: Option<u64>,
}

impl TrialStatus {
    pub fn running(start_tick: u64, coins_total: u32) -> Self {
        TrialStatus {
            phase: TrialPhase::Running,
            coins_collected: 0,
            coins_total,
            start_tick,
            end_tick: None,
        }
    }

    pub fn training(start_tick: u64, coins_total: u32) -> Self {
        TrialStatus {
            phase: TrialPhase::Training,
            ..TrialStatus::running(start_tick, coins_total)
        }
    }

    /// Refresh counters and detect completion. Returns true on the tick the
    /// trial completes. Completion depends on route progress only.
    pub fn update(&mut self, coins: &CoinSet, progress: f64, total_length: f64, tick: u64) -> bool {
        self.coins_collected = coins.collected();
        self.coins_total = coins.total();
        if self.phase == TrialPhase::Running && progress >= total_length - 1e-9 {
            self.phase = TrialPhase::Complete;
            self.end_tick = Some(tick);
            return true;
        }
        false
    }

    /// Operator stop. No effect on a finished trial.
    pub fn abort(&mut self, tick: u64) {
        if !self.phase.is_terminal() {
            self.phase = TrialPhase::Aborted;
            self.end_tick = Some(tick);
        }
    }

    pub fn start(&mut self, tick: u64) {
        if self.phase == TrialPhase::Training {
            self.phase = TrialPhase::Running;
            self.start_tick = tick;
        }
    }

    pub fn duration_ticks(&self) -> Option<u64> {
        self.end_tick.map(|e| e - self.start_tick)
    }
}

enum Piece {
    Straight(f64),
    /// Radius and signed turn in degrees (positive = left).
    Arc(f64, f64),
}

fn trace_pieces(pieces: &[Piece]) -> Vec<Point> {
    let mut pts = vec![[0.0, 0.0]];
    let (mut x, mut y, mut h) = (0.0f64, 0.0f64, 0.0f64);
    for piece in pieces {
        match *piece {
            Piece::Straight(len) => {
                x += len * h.cos();
                y += len * h.sin();
                pts.push([x, y]);
            }
            Piece::Arc(radius, turn_deg) => {
                let turn = turn_deg.to_radians();
                let side = turn.signum();
                let (cx, cy) = (x - side * radius * h.sin(), y + side * radius * h.cos());
                let n = ((radius * turn.abs()) / SAMPLE_STEP).ceil().max(1.0) as usize;
                let start = h - side * std::f64::consts::FRAC_PI_2;
                for k in 1..=n {
                    let a = start + turn * k as f64 / n as f64;
                    pts.push([cx + radius * a.cos(), cy + radius * a.sin()]);
                }
                h += turn;
                x = cx + radius * (start + turn).cos();
                y = cy + radius * (start + turn).sin();
            }
        }
    }
    pts
}

/// Built-in centerline for `route`, scaled to `length` metres of arc.
///
/// 1 = loop, 2 = S-course, 3 = grid circuit, 4 = figure-eight (two reversed
/// lobes meeting tangentially, so the corridor never crosses itself).
pub fn builtin_centerline(route: u8, length: f64) -> Result<Vec<Point>, CourseError> {
    use Piece::*;
    let pieces: Vec<Piece> = match route {
        1 => vec![
            Straight(45.0),
            Arc(18.0, 180.0),
            Straight(50.0),
            Arc(18.0, 180.0),
        ],
        2 => vec![
            Straight(15.0),
            Arc(20.0, 90.0),
            Arc(20.0, -180.0),
            Arc(20.0, 180.0),
            Arc(20.0, -90.0),
            Straight(15.0),
        ],
        3 => vec![
            Straight(30.0),
            Arc(10.0, 90.0),
            Straight(20.0),
            Arc(10.0, -90.0),
            Straight(25.0),
            Arc(10.0, -90.0),
            Straight(20.0),
            Arc(10.0, 90.0),
            Straight(25.0),
        ],
        4 => vec![
            Straight(10.0),
            Arc(16.0, 270.0),
            Arc(16.0, -270.0),
            Straight(10.0),
        ],
        other => return Err(CourseError::UnknownRoute(other)),
    };
    if !(length.is_finite() && length > 0.0) {
        return Err(CourseError::InvalidParameter(format!(
            "route length {length} must be positive"
        )));
    }
    let pts = trace_pieces(&pieces);
    let raw: f64 = pts.windows(2).map(|w| dist(w[0], w[1])).sum();
    let k = length / raw;
    Ok(pts.into_iter().map(|[x, y]| [x * k, y * k]).collect())
}

/// Built-in route with coins, using default length and pickup radius.
pub fn generate_course(
    route: u8,
    spacing: f64,
    half_width: f64,
) -> Result<(CourseGeometry, CoinSet), CourseError> {
    let course = CourseGeometry::new(builtin_centerline(route, DEFAULT_ROUTE_LENGTH)?, half_width)?;
    let coins = CoinSet::place(&course, spacing, DEFAULT_PICKUP_RADIUS)?;
    Ok((course, coins))
}

/// Course definition as stored in configuration and course files: either a
/// built-in `route` id or explicit centerline `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_pickup")]
    pub pickup_radius: f64,
}

fn default_length() -> f64 {
    DEFAULT_ROUTE_LENGTH
}
fn default_spacing() -> f64 {
    DEFAULT_SPACING
}
fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}
fn default_pickup() -> f64 {
    DEFAULT_PICKUP_RADIUS
}

impl CourseSpec {
    pub fn builtin(route: u8) -> Self {
        CourseSpec {
            route: Some(route),
            points: None,
            length: DEFAULT_ROUTE_LENGTH,
            spacing: DEFAULT_SPACING,
            half_width: DEFAULT_HALF_WIDTH,
            pickup_radius: DEFAULT_PICKUP_RADIUS,
        }
    }

    pub fn custom(points: Vec<Point>) -> Self {
        CourseSpec {
            route: None,
            points: Some(points),
            ..CourseSpec::builtin(1)
        }
    }

    pub fn build(&self) -> Result<(CourseGeometry, CoinSet), CourseError> {
        let points = match (&self.route, &self.points) {
            (Some(route), None) => builtin_centerline(*route, self.length)?,
            (None, Some(points)) => points.clone(),
            _ => {
                return Err(CourseError::InvalidParameter(
                    "course needs exactly one of 'route' or 'points'".into(),
                ))
            }
        };
        let course = CourseGeometry::new(points, self.half_width)?;
        let coins = CoinSet::place(&course, self.spacing, self.pickup_radius)?;
        Ok((course, coins))
    }

    /// The same course with the centerline written out as explicit points.
    pub fn to_custom(&self) -> Result<CourseSpec, CourseError> {
        let (course, _) = self.build()?;
        Ok(CourseSpec {
            route: None,
            points: Some(course.points().to_vec()),
            ..self.clone()
        })
    }
}

impl Default for CourseSpec {
    fn default() -> Self {
        CourseSpec::builtin(1)
    }
}
