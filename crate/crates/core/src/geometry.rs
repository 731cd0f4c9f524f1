//! Planar worlds: bounds, obstacles, rigid poses, and a simulated 2D
//! rangefinder.
//!
//! Worlds are axis-aligned rectangles containing rectangle and segment
//! obstacles. The rangefinder casts a fan of rays from a pose and reports the
//! distance to the nearest obstacle or world bound per ray; it is noiseless
//! here, with optional additive range noise applied by the observation
//! pipeline in `sim`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::num::{wrap_angle, Real};
use crate::Error;

/// Number of beams in the default scanner configuration.
pub const DEFAULT_N_RAYS: usize = 222;
/// Default scanner field of view in radians (220 degrees).
pub const DEFAULT_FOV: f64 = 220.0 * std::f64::consts::PI / 180.0;
/// Default maximum range of the scanner in meters.
pub const DEFAULT_MAX_RANGE: f64 = 10.0;

/// Planar point / vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point2<R> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Point2<R> {
    pub fn new(x: R, y: R) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self {
            x: R::zero(),
            y: R::zero(),
        }
    }

    pub fn dot(self, other: Self) -> R {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product of the two vectors.
    pub fn cross(self, other: Self) -> R {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn dist(self, other: Self) -> R {
        (self - other).norm()
    }

    pub fn scale(self, factor: R) -> Self {
        Self {
            x: self.x * factor,
            y: self.y * factor,
        }
    }

    /// Rotates the vector by `angle` radians about the origin.
    pub fn rotated(self, angle: R) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }
}

impl<R: Real> std::ops::Add for Point2<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<R: Real> std::ops::Sub for Point2<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Coordinate frame a pose is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Frame {
    /// Fixed world frame.
    #[default]
    World,
    /// Frame of an observing agent at a given step.
    Relative { observer: usize, step: usize },
}

/// Planar pose. Heading is wrapped to `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<R> {
    pub x: R,
    pub y: R,
    pub heading: R,
    pub frame: Frame,
}

impl<R: Real> Pose<R> {
    pub fn world(x: R, y: R, heading: R) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            frame: Frame::World,
        }
    }

    pub fn relative(x: R, y: R, heading: R, observer: usize, step: usize) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            frame: Frame::Relative { observer, step },
        }
    }

    pub fn position(&self) -> Point2<R> {
        Point2::new(self.x, self.y)
    }

    /// Expresses `self` in the frame anchored at `anchor` (translate to the
    /// anchor, then rotate into its heading frame). Both poses must share a
    /// frame.
    pub fn relative_to(&self, anchor: &Pose<R>, observer: usize, step: usize) -> Pose<R> {
        assert_eq!(
            self.frame, anchor.frame,
            "cannot take a relative pose across mismatched frames"
        );
        let local = (self.position() - anchor.position()).rotated(-anchor.heading);
        Pose::relative(
            local.x,
            local.y,
            wrap_angle(self.heading - anchor.heading),
            observer,
            step,
        )
    }

    /// Inverse of [`Pose::relative_to`]: maps a pose expressed relative to
    /// `anchor` back into the anchor's own frame.
    pub fn from_relative(anchor: &Pose<R>, rel: &Pose<R>) -> Pose<R> {
        let world = anchor.position() + rel.position().rotated(anchor.heading);
        Pose {
            x: world.x,
            y: world.y,
            heading: wrap_angle(anchor.heading + rel.heading),
            frame: anchor.frame,
        }
    }

    /// Maps a point from this pose's local frame into its parent frame.
    pub fn point_to_parent(&self, local: Point2<R>) -> Point2<R> {
        self.position() + local.rotated(self.heading)
    }

    /// Maps a point from the parent frame into this pose's local frame.
    pub fn point_to_local(&self, parent: Point2<R>) -> Point2<R> {
        (parent - self.position()).rotated(-self.heading)
    }
}

/// Axis-aligned rectangle given by its min and max corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<R> {
    pub min: Point2<R>,
    pub max: Point2<R>,
}

impl<R: Real> Aabb<R> {
    pub fn new(min: Point2<R>, max: Point2<R>) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> R {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> R {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2<R>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn center(&self) -> Point2<R> {
        Point2::new(
            (self.min.x + self.max.x) / R::of(2.0),
            (self.min.y + self.max.y) / R::of(2.0),
        )
    }

    /// Clamps a point to the rectangle.
    pub fn clamp_point(&self, p: Point2<R>) -> Point2<R> {
        Point2::new(
            p.x.max(self.min.x).min(self.max.x),
            p.y.max(self.min.y).min(self.max.y),
        )
    }

    /// The four corner points in counterclockwise order.
    pub fn corners(&self) -> [Point2<R>; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    /// The four edges as point pairs.
    pub fn edges(&self) -> [(Point2<R>, Point2<R>); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }
}

/// Static obstacle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle<R> {
    Rect(Aabb<R>),
    Segment { a: Point2<R>, b: Point2<R> },
}

/// A bounded planar world with static obstacles.
#[derive(Clone, Debug, PartialEq)]
pub struct World<R> {
    bounds: Aabb<R>,
    obstacles: Vec<Obstacle<R>>,
    name: String,
}

impl<R: Real> World<R> {
    /// Builds a world, validating that the bounds have positive area and that
    /// every obstacle lies inside them.
    pub fn new(bounds: Aabb<R>, obstacles: Vec<Obstacle<R>>, name: &str) -> Result<Self, Error> {
        if !(bounds.width() > R::zero() && bounds.height() > R::zero()) {
            return Err(Error::InvalidWorld(
                "world bounds must have positive area".into(),
            ));
        }
        for (i, obs) in obstacles.iter().enumerate() {
            let inside = match obs {
                Obstacle::Rect(r) => {
                    r.width() >= R::zero()
                        && r.height() >= R::zero()
                        && bounds.contains(r.min)
                        && bounds.contains(r.max)
                }
                Obstacle::Segment { a, b } => bounds.contains(*a) && bounds.contains(*b),
            };
            if !inside {
                return Err(Error::InvalidWorld(format!(
                    "obstacle {i} extends outside the world bounds"
                )));
            }
        }
        Ok(Self {
            bounds,
            obstacles,
            name: name.to_string(),
        })
    }

    pub fn bounds(&self) -> Aabb<R> {
        self.bounds
    }

    pub fn obstacles(&self) -> &[Obstacle<R>] {
        &self.obstacles
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Scanner geometry knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidarConfig<R> {
    pub n_rays: usize,
    pub fov: R,
    pub max_range: R,
}

impl<R: Real> Default for LidarConfig<R> {
    fn default() -> Self {
        Self {
            n_rays: DEFAULT_N_RAYS,
            fov: R::of(DEFAULT_FOV),
            max_range: R::of(DEFAULT_MAX_RANGE),
        }
    }
}

/// One full sweep of the rangefinder. Beam `k` points at
/// `heading - fov/2 + k * fov / (n_rays - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LidarScan<R> {
    ranges: Vec<R>,
    max_range: R,
}

impl<R: Real> LidarScan<R> {
    /// Wraps a range vector, clipping entries into `[0, max_range]`.
    pub fn new(mut ranges: Vec<R>, max_range: R) -> Self {
        for r in &mut ranges {
            *r = r.max(R::zero()).min(max_range);
        }
        Self { ranges, max_range }
    }

    pub fn ranges(&self) -> &[R] {
        &self.ranges
    }

    pub fn max_range(&self) -> R {
        self.max_range
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

/// Casts a single ray and returns the distance to the nearest obstacle or
/// world bound, capped at `max_range`.
///
/// The origin must lie inside the world bounds.
pub fn ray_cast<R: Real>(
    world: &World<R>,
    origin: Point2<R>,
    angle: R,
    max_range: R,
) -> Result<R, Error> {
    if !world.bounds().contains(origin) {
        return Err(Error::OutOfBounds(
            "ray origin lies outside the world bounds".into(),
        ));
    }
    Ok(ray_cast_unchecked(world, origin, angle, max_range))
}

fn ray_cast_unchecked<R: Real>(world: &World<R>, origin: Point2<R>, angle: R, max_range: R) -> R {
    let (s, c) = angle.sin_cos();
    let dir = Point2::new(c, s);
    let mut best = ray_aabb_exit(origin, dir, &world.bounds()).unwrap_or(max_range);
    for obs in world.obstacles() {
        let hit = match obs {
            Obstacle::Rect(r) => ray_aabb_entry(origin, dir, r),
            Obstacle::Segment { a, b } => ray_segment(origin, dir, *a, *b),
        };
        if let Some(t) = hit {
            if t < best {
                best = t;
            }
        }
    }
    best.min(max_range).max(R::zero())
}

/// Distance along the ray at which it first enters the rectangle, `Some(0)`
/// if the origin is already inside, `None` on a miss.
fn ray_aabb_entry<R: Real>(o: Point2<R>, d: Point2<R>, rect: &Aabb<R>) -> Option<R> {
    let mut tmin = R::neg_infinity();
    let mut tmax = R::infinity();
    for (oc, dc, lo, hi) in [
        (o.x, d.x, rect.min.x, rect.max.x),
        (o.y, d.y, rect.min.y, rect.max.y),
    ] {
        if dc == R::zero() {
            if oc < lo || oc > hi {
                return None;
            }
        } else {
            let inv = dc.recip();
            let mut t0 = (lo - oc) * inv;
            let mut t1 = (hi - oc) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            tmin = tmin.max(t0);
            tmax = tmax.min(t1);
        }
    }
    if tmax < tmin || tmax < R::zero() {
        return None;
    }
    Some(tmin.max(R::zero()))
}

/// Distance along the ray at which it leaves the rectangle, assuming the
/// origin is inside.
fn ray_aabb_exit<R: Real>(o: Point2<R>, d: Point2<R>, rect: &Aabb<R>) -> Option<R> {
    let mut tmax = R::infinity();
    for (oc, dc, lo, hi) in [
        (o.x, d.x, rect.min.x, rect.max.x),
        (o.y, d.y, rect.min.y, rect.max.y),
    ] {
        if dc != R::zero() {
            let inv = dc.recip();
            let t0 = (lo - oc) * inv;
            let t1 = (hi - oc) * inv;
            tmax = tmax.min(t0.max(t1));
        }
    }
    if tmax.is_finite() {
        Some(tmax.max(R::zero()))
    } else {
        None
    }
}

/// Distance along the ray to the segment `a..b`, if hit.
fn ray_segment<R: Real>(o: Point2<R>, d: Point2<R>, a: Point2<R>, b: Point2<R>) -> Option<R> {
    let e = b - a;
    let denom = d.cross(e);
    let ao = a - o;
    if denom == R::zero() {
        // Parallel. Only a collinear segment can be hit.
        if d.cross(ao) != R::zero() {
            return None;
        }
        let ta = ao.dot(d);
        let tb = (b - o).dot(d);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        if hi < R::zero() {
            return None;
        }
        return Some(lo.max(R::zero()));
    }
    let t = ao.cross(e) / denom;
    let s = ao.cross(d) / denom;
    if t >= R::zero() && s >= R::zero() && s <= R::one() {
        Some(t)
    } else {
        None
    }
}

/// Sweeps the rangefinder from `pose` across the configured field of view.
///
/// Beams are evenly spaced and centered on the pose heading; beam 0 points at
/// `heading - fov/2`.
pub fn scan<R: Real>(
    world: &World<R>,
    pose: &Pose<R>,
    cfg: &LidarConfig<R>,
) -> Result<LidarScan<R>, Error> {
    if cfg.n_rays < 2 {
        return Err(Error::InvalidConfig(
            "scanner needs at least two beams".into(),
        ));
    }
    let origin = pose.position();
    if !world.bounds().contains(origin) {
        return Err(Error::OutOfBounds(
            "scan pose lies outside the world bounds".into(),
        ));
    }
    let half = cfg.fov / R::of(2.0);
    let step = cfg.fov / R::from_usize(cfg.n_rays - 1).unwrap();
    let mut ranges = Vec::with_capacity(cfg.n_rays);
    for k in 0..cfg.n_rays {
        let angle = pose.heading - half + step * R::from_usize(k).unwrap();
        ranges.push(ray_cast_unchecked(world, origin, angle, cfg.max_range));
    }
    Ok(LidarScan::new(ranges, cfg.max_range))
}

/// True when a disk of the given radius centered at `p` leaves the world
/// bounds or comes within `radius` of any obstacle.
pub fn collides<R: Real>(world: &World<R>, p: Point2<R>, radius: R) -> bool {
    let b = world.bounds();
    if p.x < b.min.x + radius || p.x > b.max.x - radius || p.y < b.min.y + radius || p.y > b.max.y - radius
    {
        return true;
    }
    world.obstacles().iter().any(|obs| match obs {
        Obstacle::Rect(r) => point_rect_distance(p, r) < radius,
        Obstacle::Segment { a, b } => point_segment_distance(p, *a, *b) < radius,
    })
}

/// Distance from a point to an axis-aligned rectangle (zero inside).
pub fn point_rect_distance<R: Real>(p: Point2<R>, rect: &Aabb<R>) -> R {
    p.dist(rect.clamp_point(p))
}

/// Distance from a point to the segment `a..b`.
pub fn point_segment_distance<R: Real>(p: Point2<R>, a: Point2<R>, b: Point2<R>) -> R {
    let e = b - a;
    let len_sq = e.dot(e);
    if len_sq == R::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(e) / len_sq).max(R::zero()).min(R::one());
    p.dist(a + e.scale(t))
}

/// True when segments `a..b` and `c..d` intersect (including touching).
pub fn segments_intersect<R: Real>(
    a: Point2<R>,
    b: Point2<R>,
    c: Point2<R>,
    d: Point2<R>,
) -> bool {
    segment_segment_distance(a, b, c, d) == R::zero()
}

/// Distance between segments `a..b` and `c..d` (zero when they intersect).
pub fn segment_segment_distance<R: Real>(
    a: Point2<R>,
    b: Point2<R>,
    c: Point2<R>,
    d: Point2<R>,
) -> R {
    let ab = b - a;
    let cd = d - c;
    let denom = ab.cross(cd);
    if denom != R::zero() {
        let t = (c - a).cross(cd) / denom;
        let s = (c - a).cross(ab) / denom;
        if t >= R::zero() && t <= R::one() && s >= R::zero() && s <= R::one() {
            return R::zero();
        }
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance from segment `a..b` to the rectangle (zero on contact or when an
/// endpoint is inside).
pub fn segment_rect_distance<R: Real>(a: Point2<R>, b: Point2<R>, rect: &Aabb<R>) -> R {
    if rect.contains(a) || rect.contains(b) {
        return R::zero();
    }
    let mut best = R::infinity();
    for (p, q) in rect.edges() {
        best = best.min(segment_segment_distance(a, b, p, q));
    }
    best
}

/// Catalog of benchmark environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    /// Empty 20 x 20 m arena.
    Simple,
    /// Single thick wall across the middle with a passable gap at each end.
    Wall,
    /// Densely scattered rectangular obstacles.
    Navigation,
    /// Randomized scatter used for data collection; varies with the seed.
    TrainingRandom,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Simple => "simple",
            EnvKind::Wall => "wall",
            EnvKind::Navigation => "navigation",
            EnvKind::TrainingRandom => "training_random",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "simple" => Ok(EnvKind::Simple),
            "wall" => Ok(EnvKind::Wall),
            "navigation" => Ok(EnvKind::Navigation),
            "training_random" => Ok(EnvKind::TrainingRandom),
            other => Err(Error::InvalidConfig(format!(
                "unknown environment '{other}' (expected simple, wall, navigation, or training_random)"
            ))),
        }
    }
}

/// Half-width of every catalog arena in meters.
pub const ARENA_HALF_EXTENT: f64 = 10.0;
/// Default separation between spawned agents in meters.
pub const SPAWN_SEPARATION: f64 = 5.0;
/// Clearance kept around the nominal spawn disks when scattering obstacles.
const SPAWN_CLEARANCE: f64 = 1.1;

/// Builds a catalog environment. Deterministic in `(kind, seed)`; the seed
/// only matters for the randomized layouts.
pub fn make_environment<R: Real>(kind: EnvKind, seed: u64) -> World<R> {
    let he = R::of(ARENA_HALF_EXTENT);
    let bounds = Aabb::new(Point2::new(-he, -he), Point2::new(he, he));
    let obstacles = match kind {
        EnvKind::Simple => Vec::new(),
        EnvKind::Wall => vec![Obstacle::Rect(Aabb::new(
            Point2::new(R::of(-0.5), R::of(-4.0)),
            Point2::new(R::of(0.5), R::of(4.0)),
        ))],
        EnvKind::Navigation => scatter_rects(bounds, 16, seed),
        EnvKind::TrainingRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let count = rng.random_range(4..=10usize);
            scatter_rects(bounds, count, rng.random())
        }
    };
    World::new(bounds, obstacles, kind.name()).expect("catalog environments are always valid")
}

/// Scatters `count` axis-aligned rectangles with side lengths in
/// `[0.5, 2.5] m`, keeping clear of the nominal spawn disks at
/// `(+-separation/2, 0)`.
fn scatter_rects<R: Real>(bounds: Aabb<R>, count: usize, seed: u64) -> Vec<Obstacle<R>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spawn_disks = [
        Point2::new(R::of(-SPAWN_SEPARATION / 2.0), R::zero()),
        Point2::new(R::of(SPAWN_SEPARATION / 2.0), R::zero()),
    ];
    let clearance = R::of(SPAWN_CLEARANCE);
    let mut rects = Vec::with_capacity(count);
    while rects.len() < count {
        let w = R::of(rng.random_range(0.5..=2.5));
        let h = R::of(rng.random_range(0.5..=2.5));
        let half_w = w / R::of(2.0);
        let half_h = h / R::of(2.0);
        let cx = R::of(rng.random_range(
            (bounds.min.x + half_w).as_f64()..=(bounds.max.x - half_w).as_f64(),
        ));
        let cy = R::of(rng.random_range(
            (bounds.min.y + half_h).as_f64()..=(bounds.max.y - half_h).as_f64(),
        ));
        let rect = Aabb::new(
            Point2::new(cx - half_w, cy - half_h),
            Point2::new(cx + half_w, cy + half_h),
        );
        if spawn_disks
            .iter()
            .all(|disk| point_rect_distance(*disk, &rect) >= clearance)
        {
            rects.push(Obstacle::Rect(rect));
        }
    }
    rects
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type P = Point2<f64>;

    fn square_world(obstacles: Vec<Obstacle<f64>>) -> World<f64> {
        World::new(
            Aabb::new(P::new(-10.0, -10.0), P::new(10.0, 10.0)),
            obstacles,
            "test",
        )
        .unwrap()
    }

    /// Closed-form ray/segment intersection used as an independent oracle:
    /// intersects the ray with the segment's supporting line and checks the
    /// parameters, with no shared code with the implementation.
    fn oracle_ray_segment(o: P, angle: f64, a: P, b: P) -> Option<f64> {
        let d = P::new(angle.cos(), angle.sin());
        // Line through a,b as n . p = k with n normal to the segment.
        let e = b - a;
        let n = P::new(-e.y, e.x);
        let denom = n.dot(d);
        if denom.abs() < 1e-15 {
            return None; // Parallel rays are exercised separately.
        }
        let t = n.dot(a - o) / denom;
        if t < 0.0 {
            return None;
        }
        let hit = P::new(o.x + t * d.x, o.y + t * d.y);
        let along = (hit - a).dot(e) / e.dot(e);
        if (-1e-12..=1.0 + 1e-12).contains(&along) {
            Some(t)
        } else {
            None
        }
    }

    /// Oracle for ray vs rectangle: nearest hit over the four edges.
    fn oracle_ray_rect(o: P, angle: f64, rect: &Aabb<f64>) -> Option<f64> {
        if rect.contains(o) {
            return Some(0.0);
        }
        rect.edges()
            .iter()
            .filter_map(|(a, b)| oracle_ray_segment(o, angle, *a, *b))
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |best| best.min(t)))
            })
    }

    fn oracle_range(world: &World<f64>, o: P, angle: f64, max_range: f64) -> f64 {
        let mut best = max_range;
        // Bound walls, traversed as segments.
        for (a, b) in world.bounds().edges() {
            if let Some(t) = oracle_ray_segment(o, angle, a, b) {
                best = best.min(t);
            }
        }
        for obs in world.obstacles() {
            let hit = match obs {
                Obstacle::Rect(r) => oracle_ray_rect(o, angle, r),
                Obstacle::Segment { a, b } => oracle_ray_segment(o, angle, *a, *b),
            };
            if let Some(t) = hit {
                best = best.min(t);
            }
        }
        best.max(0.0)
    }

    #[test]
    fn ray_hits_rect_corner_at_known_range() {
        let rect = Aabb::new(P::new(2.0, 2.0), P::new(3.0, 5.0));
        let world = square_world(vec![Obstacle::Rect(rect)]);
        let angle = std::f64::consts::FRAC_PI_4;
        let got = ray_cast(&world, P::zero(), angle, 10.0).unwrap();
        let expected = oracle_ray_rect(P::zero(), angle, &rect).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs oracle {expected}");
        assert!((got - 2.0 * 2.0f64.sqrt()).abs() < 1e-9);

        // Without the obstacle the ray runs to its range cap before the wall.
        let empty = square_world(vec![]);
        let free = ray_cast(&empty, P::zero(), angle, 10.0).unwrap();
        assert_eq!(free, 10.0);
    }

    #[test]
    fn ray_from_origin_outside_bounds_is_rejected() {
        let world = square_world(vec![]);
        assert!(ray_cast(&world, P::new(11.0, 0.0), 0.0, 10.0).is_err());
    }

    #[test]
    fn ray_starting_inside_an_obstacle_reports_zero() {
        let world = square_world(vec![Obstacle::Rect(Aabb::new(
            P::new(-1.0, -1.0),
            P::new(1.0, 1.0),
        ))]);
        assert_eq!(ray_cast(&world, P::zero(), 0.3, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn axis_parallel_rays_terminate_on_bounds() {
        let world = square_world(vec![]);
        for (angle, expected) in [
            (0.0, 10.0),
            (std::f64::consts::FRAC_PI_2, 8.0),
            (std::f64::consts::PI, 10.0),
        ] {
            let got = ray_cast(&world, P::new(0.0, 2.0), angle, 50.0).unwrap();
            assert!((got - expected).abs() < 1e-12, "angle {angle}: {got}");
        }
    }

    #[test]
    fn scan_matches_per_ray_oracle_on_wall_world() {
        let world: World<f64> = make_environment(EnvKind::Wall, 0);
        let pose = Pose::world(-2.5, 0.7, 0.3);
        let cfg = LidarConfig::default();
        let got = scan(&world, &pose, &cfg).unwrap();
        assert_eq!(got.len(), DEFAULT_N_RAYS);
        let half = cfg.fov / 2.0;
        let step = cfg.fov / (cfg.n_rays as f64 - 1.0);
        for (k, &r) in got.ranges().iter().enumerate() {
            let angle = pose.heading - half + k as f64 * step;
            let want = oracle_range(&world, pose.position(), angle, cfg.max_range);
            assert!(
                (r - want).abs() < 1e-9,
                "beam {k}: got {r}, oracle {want}"
            );
            assert!((0.0..=cfg.max_range).contains(&r));
        }
        // The wall sits dead ahead of this pose, so the central beam must be
        // much shorter than the extreme beams.
        let mid = got.ranges()[DEFAULT_N_RAYS / 2];
        assert!(mid < 2.2, "central beam should see the wall: {mid}");
    }

    #[test]
    fn scan_rejects_outside_poses_and_degenerate_configs() {
        let world = square_world(vec![]);
        let cfg = LidarConfig::default();
        assert!(scan(&world, &Pose::world(0.0, -10.5, 0.0), &cfg).is_err());
        let bad = LidarConfig {
            n_rays: 1,
            ..LidarConfig::default()
        };
        assert!(scan(&world, &Pose::world(0.0, 0.0, 0.0), &bad).is_err());
    }

    #[test]
    fn collides_thresholds_on_segment_distance() {
        let a = P::new(-2.0, 1.0);
        let b = P::new(2.0, 1.0);
        let world = square_world(vec![Obstacle::Segment { a, b }]);
        // Point 0.29 m below the segment: inside the radius.
        assert!(collides(&world, P::new(0.0, 0.71), 0.3));
        // Point 0.31 m below: clear.
        assert!(!collides(&world, P::new(0.0, 0.69), 0.3));
        // Near the arena edge the bound itself collides.
        assert!(collides(&world, P::new(9.75, 0.0), 0.3));
        assert!(!collides(&world, P::new(9.65, 0.0), 0.3));
    }

    #[test]
    fn distance_helpers_agree_with_dense_sampling() {
        let rect = Aabb::new(P::new(1.0, -1.0), P::new(3.0, 2.0));
        let seg = (P::new(-2.0, 4.0), P::new(4.0, 3.0));
        // Sampled oracle: walk the segment densely, take min distance.
        let mut best = f64::INFINITY;
        let steps = 20_000;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let p = P::new(
                seg.0.x + t * (seg.1.x - seg.0.x),
                seg.0.y + t * (seg.1.y - seg.0.y),
            );
            best = best.min(point_rect_distance(p, &rect));
        }
        let exact = segment_rect_distance(seg.0, seg.1, &rect);
        assert!((exact - best).abs() < 1e-4, "exact {exact} sampled {best}");

        let d = segment_segment_distance(P::new(0.0, 0.0), P::new(4.0, 0.0), P::new(2.0, -1.0), P::new(2.0, 3.0));
        assert_eq!(d, 0.0, "crossing segments have zero separation");
    }

    #[test]
    fn environment_catalog_is_deterministic_and_well_formed() {
        for kind in [
            EnvKind::Simple,
            EnvKind::Wall,
            EnvKind::Navigation,
            EnvKind::TrainingRandom,
        ] {
            let a: World<f64> = make_environment(kind, 7);
            let b: World<f64> = make_environment(kind, 7);
            assert_eq!(a, b, "same seed must reproduce {:?}", kind);
            assert_eq!(a.name(), kind.name());
            for obs in a.obstacles() {
                if let Obstacle::Rect(r) = obs {
                    assert!(a.bounds().contains(r.min) && a.bounds().contains(r.max));
                }
            }
        }
        let w: World<f64> = make_environment(EnvKind::TrainingRandom, 3);
        let v: World<f64> = make_environment(EnvKind::TrainingRandom, 4);
        assert_ne!(w, v, "different seeds should vary the training layout");
    }

    #[test]
    fn simple_world_is_empty_and_wall_world_leaves_gaps() {
        let simple: World<f64> = make_environment(EnvKind::Simple, 0);
        assert!(simple.obstacles().is_empty());

        let wall: World<f64> = make_environment(EnvKind::Wall, 0);
        assert_eq!(wall.obstacles().len(), 1);
        let Obstacle::Rect(r) = wall.obstacles()[0] else {
            panic!("wall world should contain a single rectangle");
        };
        // Centered, with at least 2 m of passable gap at each end.
        assert!((r.center().x).abs() < 1e-12 && (r.center().y).abs() < 1e-12);
        let gap_top = wall.bounds().max.y - r.max.y;
        let gap_bottom = r.min.y - wall.bounds().min.y;
        assert!(gap_top >= 2.0 && gap_bottom >= 2.0);
        // An agent-sized disk fits through either gap.
        assert!(!collides(&wall, P::new(0.0, (r.max.y + wall.bounds().max.y) / 2.0), 0.3));
    }

    #[test]
    fn training_random_counts_sizes_and_spawn_clearance() {
        for seed in 0..20u64 {
            let w: World<f64> = make_environment(EnvKind::TrainingRandom, seed);
            let n = w.obstacles().len();
            assert!((4..=10).contains(&n), "seed {seed}: {n} obstacles");
            for obs in w.obstacles() {
                let Obstacle::Rect(r) = obs else {
                    panic!("training layouts use rectangles")
                };
                for side in [r.width(), r.height()] {
                    assert!((0.5..=2.5).contains(&side), "side {side}");
                }
                for disk in [P::new(-2.5, 0.0), P::new(2.5, 0.0)] {
                    assert!(point_rect_distance(disk, r) >= 1.1 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn pose_frame_round_trips() {
        let anchor: Pose<f64> = Pose::world(1.0, -2.0, 0.8);
        let target = Pose::world(3.0, 0.5, -1.2);
        let rel = target.relative_to(&anchor, 0, 42);
        assert_eq!(
            rel.frame,
            Frame::Relative {
                observer: 0,
                step: 42
            }
        );
        let back = Pose::from_relative(&anchor, &rel);
        assert!((back.x - target.x).abs() < 1e-12);
        assert!((back.y - target.y).abs() < 1e-12);
        assert!((back.heading - target.heading).abs() < 1e-12);
        assert_eq!(back.frame, Frame::World);
    }

    #[test]
    #[should_panic(expected = "mismatched frames")]
    fn mixing_frames_panics() {
        let world_pose = Pose::world(0.0, 0.0, 0.0);
        let rel_pose = Pose::relative(1.0, 0.0, 0.0, 0, 0);
        let _ = rel_pose.relative_to(&world_pose, 0, 0);
    }

    fn arb_point() -> impl Strategy<Value = P> {
        (-9.0..9.0f64, -9.0..9.0f64).prop_map(|(x, y)| P::new(x, y))
    }

    fn arb_obstacle() -> impl Strategy<Value = Obstacle<f64>> {
        prop_oneof![
            (arb_point(), 0.1..3.0f64, 0.1..3.0f64).prop_map(|(c, w, h)| {
                let min = P::new((c.x - w).max(-10.0), (c.y - h).max(-10.0));
                let max = P::new((c.x + w).min(10.0), (c.y + h).min(10.0));
                Obstacle::Rect(Aabb::new(min, max))
            }),
            (arb_point(), arb_point()).prop_map(|(a, b)| Obstacle::Segment { a, b }),
        ]
    }

    proptest! {
        /// Removing any obstacle can only lengthen a ray.
        #[test]
        fn removing_an_obstacle_never_shortens_a_ray(
            obstacles in prop::collection::vec(arb_obstacle(), 1..6),
            origin in arb_point(),
            angle in 0.0..(2.0 * std::f64::consts::PI),
            removed_idx in 0usize..6,
        ) {
            let idx = removed_idx % obstacles.len();
            let full = square_world(obstacles.clone());
            let mut fewer = obstacles;
            fewer.remove(idx);
            let reduced = square_world(fewer);
            let with = ray_cast(&full, origin, angle, 10.0).unwrap();
            let without = ray_cast(&reduced, origin, angle, 10.0).unwrap();
            prop_assert!(without >= with - 1e-12);
        }

        /// Rotating segment obstacles and the ray together about the origin
        /// leaves short ranges unchanged (short enough not to touch bounds).
        #[test]
        fn ray_ranges_are_rotation_invariant(
            segs in prop::collection::vec(
                ((-4.0..4.0f64, -4.0..4.0f64), (-4.0..4.0f64, -4.0..4.0f64)),
                1..5
            ),
            angle in 0.0..(2.0 * std::f64::consts::PI),
            rot in 0.0..(2.0 * std::f64::consts::PI),
        ) {
            let obstacles: Vec<Obstacle<f64>> = segs
                .iter()
                .map(|((ax, ay), (bx, by))| Obstacle::Segment {
                    a: P::new(*ax, *ay),
                    b: P::new(*bx, *by),
                })
                .collect();
            let rotated: Vec<Obstacle<f64>> = segs
                .iter()
                .map(|((ax, ay), (bx, by))| Obstacle::Segment {
                    a: P::new(*ax, *ay).rotated(rot),
                    b: P::new(*bx, *by).rotated(rot),
                })
                .collect();
            let base = square_world(obstacles);
            let spun = square_world(rotated);
            let r0 = ray_cast(&base, P::zero(), angle, 3.0).unwrap();
            let r1 = ray_cast(&spun, P::zero(), angle + rot, 3.0).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-6, "{r0} vs {r1}");
        }

        /// A scan rotated by a quarter turn along with a rectangle world
        /// reproduces the same ranges beam for beam.
        #[test]
        fn quarter_turn_scan_invariance(
            cx in -6.0..6.0f64,
            cy in -6.0..6.0f64,
            w in 0.2..2.0f64,
            h in 0.2..2.0f64,
            px in -3.0..3.0f64,
            py in -3.0..3.0f64,
            heading in 0.0..(2.0 * std::f64::consts::PI),
        ) {
            let rect = Aabb::new(P::new(cx - w, cy - h), P::new(cx + w, cy + h));
            let quarter = std::f64::consts::FRAC_PI_2;
            // (x, y) -> (-y, x) maps the rect to another axis-aligned rect.
            let rect_rot = Aabb::new(P::new(-(cy + h), cx - w), P::new(-(cy - h), cx + w));
            let base = square_world(vec![Obstacle::Rect(rect)]);
            let spun = square_world(vec![Obstacle::Rect(rect_rot)]);
            let pose = Pose::world(px, py, heading);
            let pose_rot = Pose::world(-py, px, heading + quarter);
            let cfg = LidarConfig { n_rays: 64, ..LidarConfig::default() };
            let s0 = scan(&base, &pose, &cfg);
            let s1 = scan(&spun, &pose_rot, &cfg);
            prop_assume!(s0.is_ok() && s1.is_ok());
            let (s0, s1) = (s0.unwrap(), s1.unwrap());
            for (a, b) in s0.ranges().iter().zip(s1.ranges()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
