//! Geometric grasp evaluator: binary target-only grasp feasibility over a
//! grid of gripper centers and 16 closing-axis orientations.
//!
//! The exact predicate is [`is_grasp_feasible_at`]. Whole-grid queries sweep
//! each grid row with per-object interval bounds derived from the same
//! separating-axis tests, so most cells are rejected without building any
//! polygons; every cell the bounds cannot reject goes through the exact
//! predicate, which keeps the results identical to a dense evaluation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{intersects, transform, ConvexPolygon, Pose2D, Vec2, EPS_CONTACT};
use crate::scene::{cell_center, scene_hash, Scene, SceneHash, GRID_CELLS};

pub const THETA_BINS: usize = 16;

/// Slack used when turning the separating-axis test into row intervals.
const INTERVAL_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("invalid gripper spec: {0}")]
    InvalidSpec(String),
}

/// Parallel-jaw gripper dimensions, cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperSpec {
    pub max_opening: f64,
    /// Finger size along the closing axis.
    pub finger_thickness: f64,
    /// Finger size across the closing axis.
    pub finger_width: f64,
    pub clearance: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            max_opening: 8.5,
            finger_thickness: 1.0,
            finger_width: 2.0,
            clearance: 0.25,
        }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<(), GraspError> {
        let all = [self.max_opening, self.finger_thickness, self.finger_width, self.clearance];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(GraspError::InvalidSpec("all dimensions must be positive".into()));
        }
        if self.max_opening <= self.finger_thickness {
            return Err(GraspError::InvalidSpec("max_opening must exceed finger_thickness".into()));
        }
        if self.max_opening <= 2.0 * self.clearance {
            return Err(GraspError::InvalidSpec("clearance leaves no usable opening".into()));
        }
        Ok(())
    }

    /// Farthest reach of any gripper part from the grasp center.
    fn reach(&self) -> f64 {
        let along = self.max_opening / 2.0 + self.finger_thickness + self.clearance;
        let across = self.finger_width / 2.0 + self.clearance;
        along.hypot(across)
    }

    fn key(&self) -> [u64; 4] {
        [
            self.max_opening.to_bits(),
            self.finger_thickness.to_bits(),
            self.finger_width.to_bits(),
            self.clearance.to_bits(),
        ]
    }
}

/// Grasp at grid cell `(i, j)` (row along +y, column along +x) with closing
/// axis at `theta_index * pi / 16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraspAction {
    pub i: usize,
    pub j: usize,
    pub theta_index: usize,
}

impl GraspAction {
    pub fn theta(&self) -> f64 {
        theta_of(self.theta_index)
    }

    /// Gripper center on an `n x n` grid over the workspace.
    pub fn center(&self, workspace: f64, n: usize) -> Vec2 {
        cell_center(workspace, n, self.i, self.j)
    }
}

pub fn theta_of(theta_index: usize) -> f64 {
    theta_index as f64 * PI / THETA_BINS as f64
}

/// World polygons of the gripper at a pose: the closing region between the
/// open fingers, then the two clearance-inflated fingers.
pub fn gripper_parts(center: Vec2, theta: f64, spec: &GripperSpec) -> [ConvexPolygon; 3] {
    let pose = Pose2D::new(center, theta);
    let h = spec.max_opening / 2.0;
    let closing = ConvexPolygon::rectangle(spec.max_opening, spec.finger_width);
    let finger = ConvexPolygon::rectangle(
        spec.finger_thickness + 2.0 * spec.clearance,
        spec.finger_width + 2.0 * spec.clearance,
    );
    let offset = Vec2::new(h + spec.finger_thickness / 2.0, 0.0);
    [
        transform(&closing, &pose),
        transform(&finger.translated(offset), &pose),
        transform(&finger.translated(-offset), &pose),
    ]
}

/// Exact feasibility on the default 224 x 224 grid.
pub fn is_grasp_feasible(scene: &Scene, grasp: GraspAction, spec: &GripperSpec) -> bool {
    is_grasp_feasible_on(scene, grasp, spec, GRID_CELLS)
}

pub fn is_grasp_feasible_on(scene: &Scene, grasp: GraspAction, spec: &GripperSpec, n: usize) -> bool {
    is_grasp_feasible_at(scene, grasp.center(scene.workspace(), n), grasp.theta(), spec)
}

/// True iff a grasp centered at `center` with closing axis `theta` picks up
/// the target and nothing else: the closing region overlaps the target, no
/// inflated finger touches any object, no other object lies between the
/// fingers, and the target's width along the closing axis fits the opening.
pub fn is_grasp_feasible_at(scene: &Scene, center: Vec2, theta: f64, spec: &GripperSpec) -> bool {
    let Some(t) = scene.target_index() else {
        return false;
    };
    let target = scene.footprint(t);
    let [closing, f1, f2] = gripper_parts(center, theta, spec);
    if !intersects(&closing, target) {
        return false;
    }
    for (k, poly) in scene.footprints().iter().enumerate() {
        if intersects(&f1, poly) || intersects(&f2, poly) {
            return false;
        }
        if k != t && intersects(&closing, poly) {
            return false;
        }
    }
    fits_opening(target, theta, spec)
}

/// Whether the target's full width along the closing axis fits the opening
/// less a clearance on each side.
pub fn fits_opening(target: &ConvexPolygon, theta: f64, spec: &GripperSpec) -> bool {
    let (lo, hi) = target.project(Vec2::from_angle(theta));
    hi - lo <= spec.max_opening - 2.0 * spec.clearance
}

/// Binary reward layers, one `n x n` row-major grid per orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMap {
    pub size: usize,
    layers: Vec<Vec<u8>>,
}

impl RewardMap {
    pub fn zeros(size: usize) -> Self {
        RewardMap {
            size,
            layers: vec![vec![0; size * size]; THETA_BINS],
        }
    }

    pub fn get(&self, theta_index: usize, i: usize, j: usize) -> f64 {
        f64::from(self.layers[theta_index][i * self.size + j])
    }

    fn set(&mut self, g: GraspAction) {
        self.layers[g.theta_index][g.i * self.size + g.j] = 1;
    }

    pub fn layer(&self, theta_index: usize) -> &[u8] {
        &self.layers[theta_index]
    }

    pub fn count_feasible(&self) -> usize {
        self.layers.iter().flatten().filter(|v| **v != 0).count()
    }

    /// Maximum value; ties go to the lowest theta index, then row-major cell.
    pub fn max(&self) -> GraspSummary {
        for (k, layer) in self.layers.iter().enumerate() {
            if let Some(idx) = layer.iter().position(|v| *v != 0) {
                return GraspSummary {
                    value: 1.0,
                    best: Some(GraspAction {
                        i: idx / self.size,
                        j: idx % self.size,
                        theta_index: k,
                    }),
                };
            }
        }
        GraspSummary { value: 0.0, best: None }
    }

    /// Binary PGM of all layers tiled 4 x 4 (theta index row-major from the
    /// top left), +y up within each tile, one pixel of separator between tiles.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.size;
        let side = 4 * n + 3;
        let mut img = vec![64u8; side * side];
        for (k, layer) in self.layers.iter().enumerate() {
            let (tr, tc) = (k / 4, k % 4);
            for i in 0..n {
                for j in 0..n {
                    let row = tr * (n + 1) + (n - 1 - i);
                    let col = tc * (n + 1) + j;
                    img[row * side + col] = if layer[i * n + j] != 0 { 255 } else { 0 };
                }
            }
        }
        write!(out, "P5\n{side} {side}\n255\n")?;
        out.write_all(&img)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspSummary {
    pub value: f64,
    pub best: Option<GraspAction>,
}

/// Separating-axis constraint `lo < a . p < hi` on the gripper center `p`
/// for one (object, gripper part, axis) triple.
#[derive(Clone, Copy)]
struct AxisBound {
    a: Vec2,
    lo: f64,
    hi: f64,
}

/// Centers at which one gripper part overlaps one object by more than the
/// contact tolerance: the intersection of its axis constraints.
struct PartBounds {
    axes: Vec<AxisBound>,
    /// Center heights where the bounding boxes can touch.
    ylo: f64,
    yhi: f64,
}

impl PartBounds {
    /// `part` is placed with its center at `center`; `u` is the closing axis.
    fn new(obj: &ConvexPolygon, part: &ConvexPolygon, center: Vec2, u: Vec2) -> Self {
        let axes = obj
            .axes()
            .iter()
            .copied()
            .chain([u, u.perp()])
            .map(|a| {
                let (olo, ohi) = obj.project(a);
                let (plo, phi) = part.project(a);
                let c = a.dot(center);
                AxisBound {
                    a,
                    lo: olo - (phi - c) + EPS_CONTACT,
                    hi: ohi - (plo - c) - EPS_CONTACT,
                }
            })
            .collect();
        let (ob, pb) = (obj.bounds(), part.bounds());
        PartBounds {
            axes,
            ylo: ob.min.y - (pb.max.y - center.y),
            yhi: ob.max.y - (pb.min.y - center.y),
        }
    }

    /// Open x-interval of centers on row `y` meeting every constraint, each
    /// tightened by `slack` (negative slack relaxes them).
    fn row(&self, y: f64, slack: f64) -> Option<(f64, f64)> {
        if y < self.ylo - INTERVAL_SLACK || y > self.yhi + INTERVAL_SLACK {
            return None;
        }
        let (mut xlo, mut xhi) = (f64::NEG_INFINITY, f64::INFINITY);
        for b in &self.axes {
            let lo = b.lo + slack;
            let hi = b.hi - slack;
            let rest = b.a.y * y;
            if b.a.x.abs() < 1e-12 {
                if !(rest > lo && rest < hi) {
                    return None;
                }
                continue;
            }
            let (l, h) = ((lo - rest) / b.a.x, (hi - rest) / b.a.x);
            let (l, h) = if b.a.x > 0.0 { (l, h) } else { (h, l) };
            xlo = xlo.max(l);
            xhi = xhi.min(h);
            if xlo >= xhi {
                return None;
            }
        }
        Some((xlo, xhi))
    }
}

/// Row sweep over the grid for one scene and gripper.
struct Sweep<'a> {
    scene: &'a Scene,
    spec: &'a GripperSpec,
    n: usize,
    target: usize,
    /// Objects that can touch a gripper part while the closing region
    /// touches the target, target first, then by distance.
    relevant: Vec<usize>,
}

impl<'a> Sweep<'a> {
    fn new(scene: &'a Scene, spec: &'a GripperSpec, n: usize) -> Option<Self> {
        let target = scene.target_index()?;
        let reach = spec.reach();
        let tbox = scene.footprint(target).bounds();
        let tb = tbox.inflate(2.0 * reach + INTERVAL_SLACK);
        let tc = (tbox.min + tbox.max) * 0.5;
        let dist = |k: usize| {
            let b = scene.footprint(k).bounds();
            if k == target {
                -1.0
            } else {
                ((b.min + b.max) * 0.5).distance(tc)
            }
        };
        let mut relevant: Vec<usize> = (0..scene.len())
            .filter(|k| scene.footprint(*k).bounds().overlaps(&tb, 0.0))
            .collect();
        relevant.sort_by(|a, b| dist(*a).total_cmp(&dist(*b)));
        Some(Sweep {
            scene,
            spec,
            n,
            target,
            relevant,
        })
    }

    /// Column range whose cell centers lie strictly inside `(lo, hi)`.
    fn columns(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let c = self.scene.workspace() / self.n as f64;
        let first = ((lo / c - 0.5).floor() + 1.0).max(0.0);
        let last = ((hi / c - 0.5).ceil() - 1.0).min(self.n as f64 - 1.0);
        if first > last {
            0..0
        } else {
            first as usize..last as usize + 1
        }
    }

    /// Visits every feasible grasp in (theta, row, column) order until the
    /// visitor returns false.
    fn run(&self, mut visit: impl FnMut(GraspAction) -> bool) {
        let w = self.scene.workspace();
        let c = w / self.n as f64;
        let reference = Vec2::new(0.5 * w, 0.5 * w);
        let target_poly = self.scene.footprint(self.target);
        let mut blocked = vec![false; self.n];
        for k in 0..THETA_BINS {
            let theta = theta_of(k);
            if !fits_opening(target_poly, theta, self.spec) {
                continue;
            }
            let u = Vec2::from_angle(theta);
            let parts = gripper_parts(reference, theta, self.spec);
            let reach = PartBounds::new(target_poly, &parts[0], reference, u);
            // the target may sit between the fingers but not under them
            let blockers: Vec<PartBounds> = self
                .relevant
                .iter()
                .flat_map(|&o| {
                    let first = usize::from(o == self.target);
                    parts[first..]
                        .iter()
                        .map(move |p| PartBounds::new(self.scene.footprint(o), p, reference, u))
                })
                .collect();
            for i in self.columns(reach.ylo - INTERVAL_SLACK, reach.yhi + INTERVAL_SLACK) {
                let y = (i as f64 + 0.5) * c;
                let Some((lo, hi)) = reach.row(y, -INTERVAL_SLACK) else {
                    continue;
                };
                let cand = self.columns(lo, hi);
                if cand.is_empty() {
                    continue;
                }
                blocked[cand.clone()].fill(false);
                let mut open = cand.len();
                for b in &blockers {
                    if open == 0 {
                        break;
                    }
                    if let Some((blo, bhi)) = b.row(y, INTERVAL_SLACK) {
                        let r = self.columns(blo, bhi);
                        for j in r.start.max(cand.start)..r.end.min(cand.end) {
                            if !blocked[j] {
                                blocked[j] = true;
                                open -= 1;
                            }
                        }
                    }
                }
                if open == 0 {
                    continue;
                }
                for j in cand {
                    if blocked[j] {
                        continue;
                    }
                    let g = GraspAction { i, j, theta_index: k };
                    if is_grasp_feasible_at(self.scene, cell_center(w, self.n, i, j), theta, self.spec) && !visit(g) {
                        return;
                    }
                }
            }
        }
    }
}

/// Reward layers on the default 224 x 224 grid.
pub fn reward_map(scene: &Scene, spec: &GripperSpec) -> RewardMap {
    reward_map_with(scene, spec, GRID_CELLS)
}

pub fn reward_map_with(scene: &Scene, spec: &GripperSpec, n: usize) -> RewardMap {
    let mut map = RewardMap::zeros(n);
    if let Some(sweep) = Sweep::new(scene, spec, n) {
        sweep.run(|g| {
            map.set(g);
            true
        });
    }
    map
}

/// Best grasp on the default grid; equals `reward_map(..).max()`.
pub fn max_grasp_reward(scene: &Scene, spec: &GripperSpec) -> GraspSummary {
    max_grasp_reward_with(scene, spec, GRID_CELLS)
}

pub fn max_grasp_reward_with(scene: &Scene, spec: &GripperSpec, n: usize) -> GraspSummary {
    let mut best = None;
    if let Some(sweep) = Sweep::new(scene, spec, n) {
        sweep.run(|g| {
            best = Some(g);
            false
        });
    }
    GraspSummary {
        value: if best.is_some() { 1.0 } else { 0.0 },
        best,
    }
}

/// Exact digest of everything the evaluator reads from a scene.
fn fingerprint(scene: &Scene) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |w: u64| h = (h ^ w).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(29);
    mix(scene.workspace().to_bits());
    for (spec, poly) in scene.specs().iter().zip(scene.footprints()) {
        mix(spec.is_target as u64);
        for v in poly.vertices() {
            mix(v.x.to_bits());
            mix(v.y.to_bits());
        }
    }
    h
}

struct CacheEntry {
    fingerprint: u64,
    summary: GraspSummary,
}

/// Memoized [`max_grasp_reward`] for one gripper and grid. Entries are keyed
/// by [`SceneHash`] and checked against an exact scene digest, so a scene that
/// shares a hash bin with a cached one is re-evaluated rather than answered
/// from the cache. Safe to share across threads.
pub struct GraspEvaluator {
    spec: GripperSpec,
    grid: usize,
    capacity: usize,
    cache: Mutex<HashMap<SceneHash, CacheEntry>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl GraspEvaluator {
    pub fn new(spec: GripperSpec) -> Self {
        Self::with_grid(spec, GRID_CELLS)
    }

    pub fn with_grid(spec: GripperSpec, grid: usize) -> Self {
        GraspEvaluator {
            spec,
            grid,
            capacity: 1 << 20,
            cache: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn spec(&self) -> &GripperSpec {
        &self.spec
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Spec key used alongside the scene hash; evaluators never share caches
    /// across specs, so this is informational.
    pub fn spec_key(&self) -> [u64; 4] {
        self.spec.key()
    }

    pub fn max_grasp_reward(&self, scene: &Scene) -> GraspSummary {
        let key = scene_hash(scene);
        let fp = fingerprint(scene);
        {
            let cache = self.cache.lock().expect("grasp cache poisoned");
            if let Some(e) = cache.get(&key) {
                if e.fingerprint == fp {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    return e.summary;
                }
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let summary = max_grasp_reward_with(scene, &self.spec, self.grid);
        let mut cache = self.cache.lock().expect("grasp cache poisoned");
        if cache.len() >= self.capacity {
            cache.clear();
        }
        cache.insert(key, CacheEntry { fingerprint: fp, summary });
        summary
    }

    pub fn is_feasible(&self, scene: &Scene, grasp: GraspAction) -> bool {
        is_grasp_feasible_on(scene, grasp, &self.spec, self.grid)
    }

    pub fn reward_map(&self, scene: &Scene) -> RewardMap {
        reward_map_with(scene, &self.spec, self.grid)
    }

    /// `(hits, misses)` since construction.
    pub fn cache_stats(&self) -> (u64, u64) {
        (self.hits.load(Ordering::Relaxed), self.misses.load(Ordering::Relaxed))
    }
}

impl std::fmt::Debug for GraspEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraspEvaluator")
            .field("spec", &self.spec)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}
