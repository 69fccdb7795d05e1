//! Planar primitives: vectors, rigid poses and convex polygons, plus the
//! separating-axis machinery the simulator and grasp evaluator run on.
//!
//! Polygons are stored counter-clockwise with their outward unit edge normals
//! and axis-aligned bounds cached, so the hot SAT paths never allocate.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Contact tolerance in cm: overlaps at or below this depth count as touching.
pub const EPS_CONTACT: f64 = 1e-4;

/// Vertices closer than this are considered repeated.
const EPS_VERTEX: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has a non-finite coordinate")]
    NonFinite,
    #[error("polygon has repeated vertices at index {0}")]
    RepeatedVertex(usize),
    #[error("polygon is not strictly convex at vertex {0}")]
    NotConvex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite(), "non-finite Vec2 ({x}, {y})");
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    #[inline]
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        self.rotate_sc(s, c)
    }

    #[inline]
    fn rotate_sc(self, s: f64, c: f64) -> Vec2 {
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        *self = *self + o;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*pi
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub position: Vec2,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
}

impl Pose2D {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Pose2D {
            position,
            heading: normalize_angle(heading),
        }
    }

    pub fn identity() -> Self {
        Pose2D::default()
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.heading) + self.position
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn from_points(pts: &[Vec2]) -> Aabb {
        let first = pts.first().copied().unwrap_or(Vec2::ZERO);
        let (mut min, mut max) = (first, first);
        for p in pts {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Aabb { min, max }
    }

    /// Overlap test with a margin; `margin = 0` treats touching boxes as overlapping.
    #[inline]
    pub fn overlaps(&self, o: &Aabb, margin: f64) -> bool {
        self.min.x <= o.max.x + margin
            && o.min.x <= self.max.x + margin
            && self.min.y <= o.max.y + margin
            && o.min.y <= self.max.y + margin
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb {
            min: self.min - Vec2::new(r, r),
            max: self.max + Vec2::new(r, r),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
    normals: Vec<Vec2>,
    bounds: Aabb,
    /// Leading normals that cover every edge direction up to sign: half of
    /// them for centrally symmetric polygons, all of them otherwise.
    axes: usize,
}

impl ConvexPolygon {
    /// Validates and stores the polygon. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        for i in 0..n {
            if vertices[i].distance(vertices[(i + 1) % n]) <= EPS_VERTEX {
                return Err(GeometryError::RepeatedVertex((i + 1) % n));
            }
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = (b - a).cross(c - b);
            let scale = (b - a).norm() * (c - b).norm();
            if turn <= 1e-12 * scale {
                return Err(GeometryError::NotConvex((i + 1) % n));
            }
        }
        // Convex turns everywhere plus a single winding around the interior.
        let total: f64 = (0..n)
            .map(|i| {
                let e0 = vertices[(i + 1) % n] - vertices[i];
                let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (total - 2.0 * PI).abs() > 1e-6 {
            return Err(GeometryError::NotConvex(0));
        }
        Ok(Self::from_ccw_unchecked(vertices))
    }

    /// Validates, then translates so the area centroid sits at the origin.
    pub fn centered(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        let poly = Self::new(vertices)?;
        let c = poly.centroid();
        Ok(poly.translated(-c))
    }

    fn from_ccw_unchecked(vertices: Vec<Vec2>) -> Self {
        let n = vertices.len();
        let normals: Vec<Vec2> = (0..n)
            .map(|i| {
                let e = vertices[(i + 1) % n] - vertices[i];
                let len = e.norm();
                Vec2::new(e.y / len, -e.x / len)
            })
            .collect();
        let bounds = Aabb::from_points(&vertices);
        let axes = symmetric_axes(&normals);
        ConvexPolygon {
            vertices,
            normals,
            bounds,
            axes,
        }
    }

    /// Axis-aligned `w x h` rectangle centered on the origin.
    pub fn rectangle(w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "rectangle needs positive sides");
        let (hw, hh) = (w / 2.0, h / 2.0);
        Self::from_ccw_unchecked(vec![
            Vec2::new(-hw, -hh),
            Vec2::new(hw, -hh),
            Vec2::new(hw, hh),
            Vec2::new(-hw, hh),
        ])
    }

    /// Regular `n`-gon inscribed in a circle of radius `r`, first vertex on +x.
    pub fn regular(n: usize, r: f64) -> Self {
        assert!(n >= 3 && r > 0.0);
        let verts = (0..n)
            .map(|i| Vec2::from_angle(2.0 * PI * i as f64 / n as f64) * r)
            .collect();
        Self::from_ccw_unchecked(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Outward unit normal of edge `i -> i+1`.
    pub fn normals(&self) -> &[Vec2] {
        &self.normals
    }

    /// Separating-axis candidates: edge normals with antiparallel duplicates removed.
    pub fn axes(&self) -> &[Vec2] {
        &self.normals[..self.axes]
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                a.distance(b)
            })
            .sum()
    }

    pub fn centroid(&self) -> Vec2 {
        area_centroid(&self.vertices)
    }

    /// Largest distance from the origin to a vertex (circumradius for
    /// centered body shapes).
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[inline]
    pub fn project(&self, axis: Vec2) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in &self.vertices {
            let p = v.dot(axis);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        (lo, hi)
    }

    /// Closed containment test (boundary points are inside).
    pub fn contains(&self, p: Vec2) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        self.vertices
            .iter()
            .zip(&self.normals)
            .all(|(v, n)| n.dot(p - *v) <= 0.0)
    }

    pub fn translated(&self, d: Vec2) -> Self {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| *v + d).collect(),
            normals: self.normals.clone(),
            bounds: Aabb {
                min: self.bounds.min + d,
                max: self.bounds.max + d,
            },
            axes: self.axes,
        }
    }

    /// Smallest width over all directions, attained along an edge normal.
    pub fn min_width(&self) -> f64 {
        self.normals
            .iter()
            .map(|n| {
                let (lo, hi) = self.project(*n);
                hi - lo
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Where the ray `origin + t * dir` (t > 0) leaves the polygon. The origin
    /// must be inside.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> Option<Vec2> {
        let mut best = f64::INFINITY;
        for (v, n) in self.vertices.iter().zip(&self.normals) {
            let den = n.dot(dir);
            if den > 1e-12 {
                let t = n.dot(*v - origin) / den;
                best = best.min(t);
            }
        }
        best.is_finite().then(|| origin + dir * best.max(0.0))
    }
}

fn signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Area centroid of a simple polygon given as a vertex loop. Falls back to the
/// vertex mean for degenerate (zero-area) input.
pub fn area_centroid(pts: &[Vec2]) -> Vec2 {
    let n = pts.len();
    if n == 0 {
        return Vec2::ZERO;
    }
    let origin = pts[0];
    let mut a2 = 0.0;
    let mut c = Vec2::ZERO;
    for i in 0..n {
        let p = pts[i] - origin;
        let q = pts[(i + 1) % n] - origin;
        let w = p.cross(q);
        a2 += w;
        c += (p + q) * w;
    }
    if a2.abs() <= 1e-14 {
        let sum = pts.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
        return sum * (1.0 / n as f64);
    }
    origin + c * (1.0 / (3.0 * a2))
}

/// Rotates by `pose.heading`, then translates by `pose.position`.
pub fn transform(poly: &ConvexPolygon, pose: &Pose2D) -> ConvexPolygon {
    let (s, c) = pose.heading.sin_cos();
    let vertices: Vec<Vec2> = poly
        .vertices
        .iter()
        .map(|v| v.rotate_sc(s, c) + pose.position)
        .collect();
    let normals = poly.normals.iter().map(|n| n.rotate_sc(s, c)).collect();
    let bounds = Aabb::from_points(&vertices);
    ConvexPolygon {
        vertices,
        normals,
        bounds,
        axes: poly.axes,
    }
}

fn symmetric_axes(normals: &[Vec2]) -> usize {
    let n = normals.len();
    let half = n / 2;
    let symmetric = n % 2 == 0 && (0..half).all(|k| (normals[k] + normals[k + half]).norm_sq() < 1e-18);
    if symmetric {
        half
    } else {
        n
    }
}

/// Minimum overlap of `a` and `b` along `axis`, with the signed direction
/// `b` must move along `axis` to separate. Ties prefer the positive sign.
#[inline]
fn axis_overlap(a: &ConvexPolygon, b: &ConvexPolygon, axis: Vec2) -> (f64, f64) {
    let (amin, amax) = a.project(axis);
    let (bmin, bmax) = b.project(axis);
    let forward = amax - bmin;
    let backward = bmax - amin;
    if forward <= backward {
        (forward, 1.0)
    } else {
        (backward, -1.0)
    }
}

/// True iff the interiors overlap by more than [`EPS_CONTACT`].
pub fn intersects(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    intersects_with(a, b, EPS_CONTACT)
}

/// [`intersects`] with an explicit contact tolerance.
pub fn intersects_with(a: &ConvexPolygon, b: &ConvexPolygon, eps: f64) -> bool {
    if !a.bounds.overlaps(&b.bounds, 0.0) {
        return false;
    }
    a.axes()
        .iter()
        .chain(b.axes())
        .all(|n| axis_overlap(a, b, *n).0 > eps)
}

/// Minimum translation that moves `b` out of `a`, or `None` when they do not
/// intersect. Equal-depth candidates are broken toward larger x, then larger y.
pub fn penetration_vector(a: &ConvexPolygon, b: &ConvexPolygon) -> Option<Vec2> {
    penetration_vector_with(a, b, EPS_CONTACT)
}

/// [`penetration_vector`] with an explicit contact tolerance.
pub fn penetration_vector_with(a: &ConvexPolygon, b: &ConvexPolygon, eps: f64) -> Option<Vec2> {
    if !a.bounds.overlaps(&b.bounds, 0.0) {
        return None;
    }
    // (depth, unit direction); normals are unit so directions compare directly
    let mut best: Option<(f64, Vec2)> = None;
    for n in a.axes().iter().chain(b.axes()) {
        let (amin, amax) = a.project(*n);
        let (bmin, bmax) = b.project(*n);
        let forward = amax - bmin;
        let backward = bmax - amin;
        if forward.min(backward) <= eps {
            return None;
        }
        for (depth, dir) in [(forward, *n), (backward, -*n)] {
            best = match best {
                None => Some((depth, dir)),
                Some((bd, bdir)) => {
                    let tol = 1e-12 * bd.max(1.0);
                    if depth < bd - tol {
                        Some((depth, dir))
                    } else if depth <= bd + tol && prefer(dir, bdir) {
                        Some((depth.min(bd), dir))
                    } else {
                        Some((bd, bdir))
                    }
                }
            };
        }
    }
    best.map(|(d, dir)| dir * d)
}

/// Lexicographic preference on unit directions: larger x, then larger y.
fn prefer(a: Vec2, b: Vec2) -> bool {
    if (a.x - b.x).abs() > 1e-9 {
        a.x > b.x
    } else {
        a.y > b.y + 1e-9
    }
}

/// Euclidean distance between two polygons; zero when they touch or overlap.
pub fn distance(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    let separated = a
        .axes()
        .iter()
        .chain(b.axes())
        .any(|n| axis_overlap(a, b, *n).0 <= 0.0);
    if !separated {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        for v in &p.vertices {
            for i in 0..q.len() {
                let (s, e) = q.edge(i);
                best = best.min(point_segment_distance(*v, s, e));
            }
        }
    }
    best
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}

/// Keeps the part of the loop `pts` with `normal . p <= offset`.
pub fn clip_halfplane(pts: &[Vec2], normal: Vec2, offset: f64) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(pts.len() + 2);
    clip_into(pts, normal, offset, &mut out);
    out
}

fn clip_into(pts: &[Vec2], normal: Vec2, offset: f64, out: &mut Vec<Vec2>) {
    out.clear();
    let n = pts.len();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let dp = normal.dot(p) - offset;
        let dq = normal.dot(q) - offset;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            out.push(p.lerp(q, dp / (dp - dq)));
        }
    }
}

/// Vertex loop of `a ∩ b` (possibly empty or degenerate).
pub fn intersection(a: &ConvexPolygon, b: &ConvexPolygon) -> Vec<Vec2> {
    let cap = a.vertices.len() + b.vertices.len();
    let mut pts = Vec::with_capacity(cap);
    pts.extend_from_slice(&a.vertices);
    let mut scratch = Vec::with_capacity(cap);
    for (v, n) in b.vertices.iter().zip(&b.normals) {
        if pts.is_empty() {
            break;
        }
        clip_into(&pts, *n, n.dot(*v), &mut scratch);
        std::mem::swap(&mut pts, &mut scratch);
    }
    pts
}

/// Direction of greatest spread of the polygon boundary, treated as a curve
/// of uniform density. Sign is fixed so `x > 0`, or `y > 0` when `x == 0`.
/// Isotropic shapes (squares, regular polygons) return `(1, 0)`.
pub fn principal_axis(poly: &ConvexPolygon) -> Vec2 {
    let (sxx, sxy, syy) = boundary_covariance(poly);
    principal_from_covariance(sxx, sxy, syy)
}

/// Second central moments `(xx, xy, yy)` of the boundary under the uniform
/// arc-length measure, integrated exactly edge by edge.
pub fn boundary_covariance(poly: &ConvexPolygon) -> (f64, f64, f64) {
    let n = poly.len();
    let mut total = 0.0;
    let mut first = Vec2::ZERO;
    for i in 0..n {
        let (p, q) = poly.edge(i);
        let len = p.distance(q);
        total += len;
        first += (p + q) * (len / 2.0);
    }
    let mean = first * (1.0 / total);
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = poly.edge(i);
        let len = p.distance(q);
        let (p, q) = (p - mean, q - mean);
        // integral over t in [0,1] of (p + t(q-p))(p + t(q-p))^T
        xx += len * (p.x * p.x + p.x * q.x + q.x * q.x) / 3.0;
        yy += len * (p.y * p.y + p.y * q.y + q.y * q.y) / 3.0;
        xy += len * (2.0 * p.x * p.y + p.x * q.y + q.x * p.y + 2.0 * q.x * q.y) / 6.0;
    }
    (xx / total, xy / total, yy / total)
}

/// Leading eigenvector of `[[sxx, sxy], [sxy, syy]]` with the sign rule of
/// [`principal_axis`].
pub fn principal_from_covariance(sxx: f64, sxy: f64, syy: f64) -> Vec2 {
    let half_diff = (sxx - syy) / 2.0;
    let disc = (half_diff * half_diff + sxy * sxy).sqrt();
    let scale = (sxx + syy).abs().max(f64::MIN_POSITIVE);
    if disc <= 1e-9 * scale {
        return Vec2::new(1.0, 0.0);
    }
    let lambda = (sxx + syy) / 2.0 + disc;
    let c1 = Vec2::new(sxy, lambda - sxx);
    let c2 = Vec2::new(lambda - syy, sxy);
    let v = if c1.norm_sq() >= c2.norm_sq() { c1 } else { c2 };
    let v = v.normalized().unwrap_or(Vec2::new(1.0, 0.0));
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

/// `k` points at equal arc-length spacing around the boundary, starting at the
/// lexicographically smallest vertex, each with the inward normal of the edge
/// it lies on (a point on a vertex belongs to the edge leaving that vertex).
pub fn contour_points(poly: &ConvexPolygon, k: usize) -> Vec<(Vec2, Vec2)> {
    assert!(k >= 1, "contour_points needs k >= 1");
    let n = poly.len();
    let start = (0..n)
        .min_by(|&i, &j| {
            let (a, b) = (poly.vertices[i], poly.vertices[j]);
            a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
        })
        .unwrap_or(0);
    let lengths: Vec<f64> = (0..n)
        .map(|o| {
            let (a, b) = poly.edge((start + o) % n);
            a.distance(b)
        })
        .collect();
    let perimeter: f64 = lengths.iter().sum();
    let spacing = perimeter / k as f64;

    let mut out = Vec::with_capacity(k);
    let mut edge = 0usize;
    let mut edge_start = 0.0;
    for i in 0..k {
        let s = spacing * i as f64;
        while edge + 1 < n && s >= edge_start + lengths[edge] {
            edge_start += lengths[edge];
            edge += 1;
        }
        let idx = (start + edge) % n;
        let (a, b) = poly.edge(idx);
        let t = ((s - edge_start) / lengths[edge]).clamp(0.0, 1.0);
        out.push((a.lerp(b, t), -poly.normals[idx]));
    }
    out
}
