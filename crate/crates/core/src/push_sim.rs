//! Deterministic quasi-static push model.
//!
//! The closed gripper is a rectangle swept from `start` to `end` in substeps.
//! Penetrated objects are pushed out along their minimum translation vector
//! and the displacement propagates through object contacts until the scene is
//! consistent again. Off-center contacts also rotate the pushed object about
//! the contact point. Objects never leave the workspace; when a chain jams
//! against a wall the gripper stops at the last consistent position.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    area_centroid, clip_halfplane, intersection, intersects_with, normalize_angle, penetration_vector_with, transform,
    ConvexPolygon, Pose2D, Vec2, EPS_CONTACT,
};
use crate::scene::Scene;

/// Gripper travel after first contact, cm.
pub const EFFECTIVE_PUSH_CM: f64 = 5.0;
/// Free gap between the gripper front and the contact point at the start, cm.
pub const PUSH_CLEARANCE_CM: f64 = 0.5;
pub const RETRACT_STEP_CM: f64 = 0.25;
pub const RETRACT_MAX_CM: f64 = 3.0;

/// Halvings used to locate the jam point inside a failed substep.
const JAM_BISECTIONS: usize = 8;
/// Per-resolution cap on heading change, radians.
const MAX_TURN_PER_MOVE: f64 = 0.2;
/// Depth of the overlap slab that locates a contact, cm.
const CONTACT_SLAB_CM: f64 = 1e-3;

fn unit(v: Vec2) -> Vec2 {
    v.normalized().unwrap_or(Vec2::new(1.0, 0.0))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid push action: {0}")]
    InvalidAction(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Vec2,
    pub end: Vec2,
}

impl PushAction {
    pub fn new(start: Vec2, end: Vec2) -> Self {
        PushAction { start, end }
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Unit motion direction; `(1, 0)` for a degenerate action.
    pub fn direction(&self) -> Vec2 {
        (self.end - self.start).normalized().unwrap_or(Vec2::new(1.0, 0.0))
    }
}

/// Closed-gripper sweep rectangle: `width` across the motion, `depth` along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperFootprint {
    pub width: f64,
    pub depth: f64,
}

impl Default for GripperFootprint {
    fn default() -> Self {
        GripperFootprint { width: 2.0, depth: 1.5 }
    }
}

impl GripperFootprint {
    /// World polygon of the gripper centered at `center`, facing `dir`.
    pub fn polygon_at(&self, center: Vec2, dir: Vec2) -> ConvexPolygon {
        transform(
            &ConvexPolygon::rectangle(self.depth, self.width),
            &Pose2D::new(center, dir.angle()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Gripper advance per integration step, cm.
    pub substep: f64,
    /// Fraction of the lever-arm rotation applied per contact, in `[0, 1]`.
    pub rotation_gain: f64,
    pub max_resolve_iters: usize,
    pub eps_contact: f64,
    pub gripper: GripperFootprint,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            substep: 0.1,
            rotation_gain: 0.5,
            max_resolve_iters: 64,
            eps_contact: EPS_CONTACT,
            gripper: GripperFootprint::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if !(self.substep > 0.0 && self.substep <= 0.2) {
            return bad("substep must be in (0, 0.2] cm");
        }
        if !(0.0..=1.0).contains(&self.rotation_gain) {
            return bad("rotation_gain must be in [0, 1]");
        }
        if self.max_resolve_iters < 8 {
            return bad("max_resolve_iters must be >= 8");
        }
        if !(self.eps_contact > 0.0) {
            return bad("eps_contact must be positive");
        }
        if !(self.gripper.width > 0.0 && self.gripper.depth > 0.0) {
            return bad("gripper footprint must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushResult {
    pub scene_after: Scene,
    /// Per-object change of pose (position difference, wrapped heading difference).
    pub deltas: Vec<Pose2D>,
    pub contacted: Vec<bool>,
    /// Objects the gripper itself touched (a subset of `contacted`).
    pub gripper_contacted: Vec<bool>,
    /// Set when a jam stopped the gripper before `end`.
    pub truncated: bool,
    /// Distance the gripper actually travelled, cm.
    pub travel: f64,
}

impl PushResult {
    pub fn moved_any(&self) -> bool {
        self.contacted.iter().any(|c| *c)
    }
}

fn inside_workspace(p: Vec2, w: f64) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x <= w && p.y <= w
}

/// Builds the push that makes contact at `contact_point` moving along
/// `direction` and continues [`EFFECTIVE_PUSH_CM`] past it. The start sits
/// `depth / 2 + 0.5` cm before the contact, backed off in 0.25 cm steps (up
/// to 3 cm) until the gripper there is collision-free. `None` when no free
/// start exists or either endpoint leaves the workspace.
pub fn effective_push_action(
    scene: &Scene,
    contact_point: Vec2,
    direction: Vec2,
    params: &SimParams,
) -> Option<PushAction> {
    let dir = direction.normalized()?;
    let w = scene.workspace();
    let end = contact_point + dir * EFFECTIVE_PUSH_CM;
    if !inside_workspace(end, w) {
        return None;
    }
    let base = params.gripper.depth / 2.0 + PUSH_CLEARANCE_CM;
    let steps = (RETRACT_MAX_CM / RETRACT_STEP_CM).round() as usize;
    for k in 0..=steps {
        let start = contact_point - dir * (base + k as f64 * RETRACT_STEP_CM);
        if !inside_workspace(start, w) {
            return None;
        }
        let g = params.gripper.polygon_at(start, dir);
        let blocked = scene
            .footprints()
            .iter()
            .any(|f| intersects_with(&g, f, params.eps_contact));
        if !blocked {
            return Some(PushAction { start, end });
        }
    }
    None
}

/// Checks the push preconditions against `scene`.
pub fn validate_action(scene: &Scene, action: &PushAction, params: &SimParams) -> Result<(), SimError> {
    let w = scene.workspace();
    let finite = |p: Vec2| p.x.is_finite() && p.y.is_finite();
    if !finite(action.start) || !finite(action.end) {
        return Err(SimError::InvalidAction("non-finite endpoint".into()));
    }
    if action.length() <= 1e-9 {
        return Err(SimError::InvalidAction("start equals end".into()));
    }
    if !inside_workspace(action.start, w) || !inside_workspace(action.end, w) {
        return Err(SimError::InvalidAction("endpoint outside workspace".into()));
    }
    let g = params.gripper.polygon_at(action.start, action.direction());
    if let Some(i) = scene
        .footprints()
        .iter()
        .position(|f| intersects_with(&g, f, params.eps_contact))
    {
        return Err(SimError::InvalidAction(format!(
            "gripper start penetrates {}",
            scene.spec(i).id
        )));
    }
    Ok(())
}

struct SimState {
    poses: Vec<Pose2D>,
    polys: Vec<ConvexPolygon>,
}

struct Jam;

struct Stepper<'a> {
    scene: &'a Scene,
    params: &'a SimParams,
    dir: Vec2,
}

impl Stepper<'_> {
    /// Moves the gripper to `center` from a consistent state and resolves
    /// every penetration in place. Returns which objects moved and which the
    /// gripper touched; on a jam the state is restored and left unchanged.
    fn advance(&self, s: &mut SimState, center: Vec2) -> Result<(Vec<bool>, Vec<bool>), Jam> {
        let n = s.poses.len();
        let mut undo: Vec<(usize, Pose2D, ConvexPolygon)> = Vec::new();
        let eps = self.params.eps_contact;
        let gripper = self.params.gripper.polygon_at(center, self.dir);
        let mut rank = vec![u32::MAX; n];
        let mut moved = vec![false; n];
        // objects displaced in the previous and the current pass; a pair
        // needs checking only if one of them moved since it was last clean
        let mut dirty_prev = vec![false; n];
        let mut dirty = vec![false; n];
        for _ in 0..self.params.max_resolve_iters {
            let mut changed = false;
            for i in 0..n {
                if let Some(v) = penetration_vector_with(&gripper, &s.polys[i], eps) {
                    let c = contact_point(&gripper, &s.polys[i], self.dir);
                    if !moved[i] {
                        undo.push((i, s.poses[i], s.polys[i].clone()));
                    }
                    self.displace(s, i, v, c, &gripper, self.dir);
                    rank[i] = 1;
                    moved[i] = true;
                    dirty[i] = true;
                    changed = true;
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    if !(dirty_prev[i] || dirty_prev[j] || dirty[i] || dirty[j]) {
                        continue;
                    }
                    if !s.polys[i].bounds().overlaps(&s.polys[j].bounds(), 0.0) {
                        continue;
                    }
                    let (mut p, mut q) = self.order_pair(s, &rank, i, j);
                    if let Some(mut v) = penetration_vector_with(&s.polys[p], &s.polys[q], eps) {
                        // nothing is shoved back toward the gripper; the other body gives way
                        if v.dot(self.dir) < 0.0 {
                            std::mem::swap(&mut p, &mut q);
                            v = -v;
                        }
                        let c = contact_point(&s.polys[p], &s.polys[q], unit(v));
                        if !moved[q] {
                            undo.push((q, s.poses[q], s.polys[q].clone()));
                        }
                        let pusher = s.polys[p].clone();
                        self.displace(s, q, v, c, &pusher, unit(v));
                        rank[q] = rank[q].min(rank[p].saturating_add(1));
                        moved[q] = true;
                        dirty[q] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                let direct = rank.iter().map(|r| *r == 1).collect();
                return Ok((moved, direct));
            }
            std::mem::swap(&mut dirty_prev, &mut dirty);
            dirty.fill(false);
        }
        for (i, pose, poly) in undo {
            s.poses[i] = pose;
            s.polys[i] = poly;
        }
        Err(Jam)
    }

    /// `(pusher, pushed)`: the lower contact rank pushes; on equal rank the
    /// object further behind along the push direction pushes, then lower index.
    fn order_pair(&self, s: &SimState, rank: &[u32], i: usize, j: usize) -> (usize, usize) {
        if rank[i] != rank[j] {
            return if rank[i] < rank[j] { (i, j) } else { (j, i) };
        }
        let pi = s.poses[i].position.dot(self.dir);
        let pj = s.poses[j].position.dot(self.dir);
        if pj < pi {
            (j, i)
        } else {
            (i, j)
        }
    }

    /// Moves object `i` by `v` and turns it about `contact`, pushed by
    /// `pusher` along `push`. The turn never carries the object back against
    /// the push direction.
    fn displace(&self, s: &mut SimState, i: usize, v: Vec2, contact: Vec2, pusher: &ConvexPolygon, push: Vec2) {
        let pose = s.poses[i];
        let arm = pose.position - contact;
        let mut turn = 0.0;
        let r2 = arm.norm_sq();
        if self.params.rotation_gain > 0.0 && r2 > 1e-12 {
            turn = (self.params.rotation_gain * v.cross(arm) / r2).clamp(-MAX_TURN_PER_MOVE, MAX_TURN_PER_MOVE);
            turn = settle_turn(pusher, &s.polys[i], push, pose.position, contact, turn);
        }
        let mut swing = arm.rotate(turn) - arm;
        let back = swing.dot(self.dir);
        if back < 0.0 {
            swing -= self.dir * back;
        }
        let position = pose.position + swing + v;
        let mut new_pose = Pose2D::new(position, pose.heading + turn);
        let mut poly = transform(&self.scene.spec(i).shape, &new_pose);
        let shift = wall_shift(&poly, self.scene.workspace());
        if shift != Vec2::ZERO {
            new_pose.position += shift;
            poly = poly.translated(shift);
        }
        s.poses[i] = new_pose;
        s.polys[i] = poly;
    }
}

/// Caps `turn` where the pushed face lies flat against the pusher face and
/// turning past flat would reverse the torque. Without this a stable face
/// push rocks back and forth by one substep's worth of turn.
fn settle_turn(pusher: &ConvexPolygon, pushed: &ConvexPolygon, push: Vec2, center: Vec2, contact: Vec2, turn: f64) -> f64 {
    let facing = |poly: &ConvexPolygon, toward: Vec2| {
        (0..poly.len())
            .max_by(|a, b| poly.normals()[*a].dot(toward).total_cmp(&poly.normals()[*b].dot(toward)))
            .unwrap_or(0)
    };
    let pf = facing(pusher, push);
    let m = pusher.normals()[pf];
    let qf = facing(pushed, -m);
    let n = pushed.normals()[qf];
    // turn that would bring the pushed face flat against the pusher face
    let flat = n.cross(-m).atan2(n.dot(-m));
    let at_flat = flat.abs() <= 1e-9;
    if !at_flat && (flat * turn < 0.0 || flat.abs() > turn.abs()) {
        return turn;
    }
    // once flat, the end of the shared segment on the turning side carries the load
    let across = m.perp();
    let span = |(a, b): (Vec2, Vec2)| {
        let (x, y) = (a.dot(across), b.dot(across));
        (x.min(y), x.max(y))
    };
    let (plo, phi) = span(pusher.edge(pf));
    let (qlo, qhi) = span(pushed.edge(qf));
    let end = if turn > 0.0 { phi.min(qhi) } else { plo.max(qlo) };
    let lead = contact + across * (end - contact.dot(across));
    if m.cross(center - lead) * turn > 0.0 {
        turn
    } else if at_flat {
        0.0
    } else {
        flat
    }
}

/// Translation that brings `poly` back inside `[0, w]^2`.
fn wall_shift(poly: &ConvexPolygon, w: f64) -> Vec2 {
    let b = poly.bounds();
    let axis = |lo: f64, hi: f64| {
        if lo < 0.0 {
            -lo
        } else if hi > w {
            w - hi
        } else {
            0.0
        }
    };
    Vec2 {
        x: axis(b.min.x, b.max.x),
        y: axis(b.min.y, b.max.y),
    }
}

/// Where `pusher` acts on `pushed` when `pushed` is about to move along `dir`:
/// the centroid of the deepest slab (thickness [`CONTACT_SLAB_CM`]) of their
/// overlap. Using the slab instead of the whole overlap keeps the lever arm
/// independent of how far the pusher advanced in one substep.
fn contact_point(pusher: &ConvexPolygon, pushed: &ConvexPolygon, dir: Vec2) -> Vec2 {
    let region = intersection(pushed, pusher);
    if region.is_empty() {
        let c = pusher.centroid();
        return pushed
            .vertices()
            .iter()
            .copied()
            .min_by(|a, b| a.distance(c).total_cmp(&b.distance(c)))
            .unwrap_or(c);
    }
    let deepest = region.iter().map(|p| p.dot(dir)).fold(f64::INFINITY, f64::min);
    let slab = clip_halfplane(&region, dir, deepest + CONTACT_SLAB_CM);
    if slab.len() < 3 {
        return area_centroid(&region);
    }
    // the slab is thin, so its extent across `dir` is what matters
    let across = dir.perp();
    let (lo, hi) = slab
        .iter()
        .map(|p| p.dot(across))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), t| (l.min(t), h.max(t)));
    let along = slab.iter().map(|p| p.dot(dir)).sum::<f64>() / slab.len() as f64;
    dir * along + across * (0.5 * (lo + hi))
}

/// Gripper travel bookkeeping for one push.
struct Run<'a> {
    stepper: &'a Stepper<'a>,
    origin: Vec2,
    state: SimState,
    contacted: Vec<bool>,
    direct: Vec<bool>,
    travelled: f64,
}

impl Run<'_> {
    fn merge(&mut self, (moved, touched): (Vec<bool>, Vec<bool>)) {
        for k in 0..moved.len() {
            self.contacted[k] |= moved[k];
            self.direct[k] |= touched[k];
        }
    }

    /// Advances the gripper to travel `t`. On a jam the stop point is
    /// bisected and `Err` returned.
    fn step(&mut self, t: f64) -> Result<(), Jam> {
        let dir = self.stepper.dir;
        match self.stepper.advance(&mut self.state, self.origin + dir * t) {
            Ok(step) => {
                self.merge(step);
                self.travelled = t;
                Ok(())
            }
            Err(Jam) => {
                let (mut lo, mut hi) = (self.travelled, t);
                for _ in 0..JAM_BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    match self.stepper.advance(&mut self.state, self.origin + dir * mid) {
                        Ok(step) => {
                            self.merge(step);
                            lo = mid;
                        }
                        Err(Jam) => hi = mid,
                    }
                }
                self.travelled = lo;
                Err(Jam)
            }
        }
    }
}

/// Runs one push through the quasi-static model. Deterministic: identical
/// inputs give bit-identical results.
pub fn simulate_push(scene: &Scene, action: &PushAction, params: &SimParams) -> Result<PushResult, SimError> {
    params.validate()?;
    validate_action(scene, action, params)?;
    let dir = action.direction();
    let len = action.length();
    let stepper = Stepper { scene, params, dir };
    let state = SimState {
        poses: scene.poses().to_vec(),
        polys: scene.footprints().to_vec(),
    };
    let n = scene.len();
    let mut run = Run {
        stepper: &stepper,
        origin: action.start,
        state,
        contacted: vec![false; n],
        direct: vec![false; n],
        travelled: 0.0,
    };
    let steps = (len / params.substep).ceil().max(1.0) as usize;
    let mut truncated = false;
    for k in 1..=steps {
        let t = if k == steps { len } else { k as f64 * params.substep };
        if run.step(t).is_err() {
            truncated = true;
            break;
        }
    }
    let Run { state, contacted, direct, travelled, .. } = run;

    let deltas = scene
        .poses()
        .iter()
        .zip(&state.poses)
        .map(|(a, b)| Pose2D {
            position: b.position - a.position,
            heading: normalize_angle(b.heading - a.heading),
        })
        .collect();
    // contacted objects that ended exactly where they began still count as contacted
    Ok(PushResult {
        scene_after: scene.with_poses(state.poses),
        deltas,
        contacted,
        gripper_contacted: direct,
        truncated,
        travel: travelled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectSpec, WORKSPACE_CM};

    fn scene_of(objs: &[(&str, f64, f64, f64, bool)]) -> Scene {
        Scene::new(
            WORKSPACE_CM,
            objs.iter()
                .map(|(id, x, y, side, t)| (ObjectSpec::boxed(*id, *side, *side, *t), Pose2D::new(Vec2::new(*x, *y), 0.0)))
                .collect(),
        )
        .unwrap()
    }

    /// Push whose gripper front face starts touching the square's left edge and
    /// advances `travel` cm.
    fn face_push(scene: &Scene, idx: usize, travel: f64, params: &SimParams) -> PushAction {
        let b = scene.footprint(idx).bounds();
        let y = scene.pose(idx).position.y;
        let start = Vec2::new(b.min.x - params.gripper.depth / 2.0, y);
        PushAction::new(start, start + Vec2::new(travel, 0.0))
    }

    #[test]
    fn empty_space_push_changes_nothing() {
        let s = scene_of(&[("t", 30.0, 30.0, 4.0, true)]);
        let a = PushAction::new(Vec2::new(5.0, 5.0), Vec2::new(10.0, 5.0));
        let r = simulate_push(&s, &a, &SimParams::default()).unwrap();
        assert_eq!(r.scene_after, s);
        assert!(r.contacted.iter().all(|c| !c));
        assert!(r.deltas.iter().all(|d| *d == Pose2D::default()));
        assert!(!r.truncated);
    }

    #[test]
    fn centered_push_translates_square() {
        let s = scene_of(&[("t", 20.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let r = simulate_push(&s, &face_push(&s, 0, 5.0, &p), &p).unwrap();
        let fine = SimParams { substep: 0.01, ..p };
        let oracle = simulate_push(&s, &face_push(&s, 0, 5.0, &fine), &fine).unwrap();
        let d = r.deltas[0];
        let od = oracle.deltas[0];
        assert!((od.position.x - 5.0).abs() < 0.05, "oracle {od:?}");
        assert!((d.position.x - od.position.x).abs() <= 0.05 * od.position.x);
        assert!(d.position.y.abs() < 1e-9);
        assert!(d.heading.to_degrees().abs() < 1.0);
        assert!(r.contacted[0]);
    }

    #[test]
    fn flush_pair_moves_together() {
        let s = scene_of(&[("a", 16.0, 22.4, 4.0, false), ("b", 20.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let r = simulate_push(&s, &face_push(&s, 0, 5.0, &p), &p).unwrap();
        assert!(r.contacted[0] && r.contacted[1]);
        assert!(r.deltas[0].position.x > 4.5 && r.deltas[1].position.x > 4.5);
        let after = &r.scene_after;
        assert!(after.first_overlap().is_none());
        let (xa, xb) = (after.pose(0).position.x, after.pose(1).position.x);
        assert!(xb >= xa + 4.0 - p.eps_contact);
        let gap = after.footprint(1).bounds().min.x - after.footprint(0).bounds().max.x;
        assert!(gap.abs() <= p.eps_contact, "gap {gap}");
    }

    #[test]
    fn off_center_push_rotates() {
        let s = scene_of(&[("t", 20.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let b = s.footprint(0).bounds();
        let start = Vec2::new(b.min.x - 0.75, 24.0);
        let r = simulate_push(&s, &PushAction::new(start, start + Vec2::new(5.0, 0.0)), &p).unwrap();
        // pushing above the centroid toward +x turns the block clockwise
        assert!(r.deltas[0].heading < -0.01, "{:?}", r.deltas[0]);
        assert!(r.scene_after.first_overlap().is_none());
    }

    #[test]
    fn wall_jam_truncates() {
        let s = scene_of(&[("t", 42.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let start = Vec2::new(38.0 - 0.75, 22.4);
        let a = PushAction::new(start, Vec2::new(44.0, 22.4));
        let r = simulate_push(&s, &a, &p).unwrap();
        assert!(r.truncated);
        let b = r.scene_after.footprint(0).bounds();
        assert!(b.max.x <= WORKSPACE_CM + 1e-9);
        assert!((b.max.x - WORKSPACE_CM).abs() < 1e-6);
        assert!(r.travel < a.length());
    }

    #[test]
    fn deterministic() {
        let s = scene_of(&[("a", 16.0, 22.0, 4.0, false), ("b", 20.0, 23.0, 4.0, true), ("c", 24.0, 21.0, 4.0, false)]);
        let p = SimParams::default();
        let start = Vec2::new(13.0, 23.5);
        let a = PushAction::new(start, start + Vec2::new(6.0, 0.5));
        let r1 = simulate_push(&s, &a, &p).unwrap();
        let r2 = simulate_push(&s, &a, &p).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn invalid_actions_rejected() {
        let s = scene_of(&[("t", 20.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let same = PushAction::new(Vec2::new(5.0, 5.0), Vec2::new(5.0, 5.0));
        assert!(matches!(simulate_push(&s, &same, &p), Err(SimError::InvalidAction(_))));
        let inside = PushAction::new(Vec2::new(20.0, 22.4), Vec2::new(25.0, 22.4));
        assert!(matches!(simulate_push(&s, &inside, &p), Err(SimError::InvalidAction(_))));
        let out = PushAction::new(Vec2::new(-1.0, 5.0), Vec2::new(3.0, 5.0));
        assert!(simulate_push(&s, &out, &p).is_err());
        let bad = SimParams { substep: 0.5, ..p };
        let ok = PushAction::new(Vec2::new(5.0, 5.0), Vec2::new(9.0, 5.0));
        assert!(matches!(simulate_push(&s, &ok, &bad), Err(SimError::InvalidParams(_))));
    }

    #[test]
    fn effective_push_construction() {
        let s = scene_of(&[("t", 20.0, 22.4, 4.0, true)]);
        let p = SimParams::default();
        let contact = Vec2::new(18.0, 22.4);
        let a = effective_push_action(&s, contact, Vec2::new(1.0, 0.0), &p).unwrap();
        let standoff = p.gripper.depth / 2.0 + PUSH_CLEARANCE_CM;
        assert!((a.start.x - (18.0 - standoff)).abs() < 1e-12);
        assert_eq!(a.start.y, 22.4);
        assert!((a.length() - (standoff + 5.0)).abs() < 1e-12);
        let dist_after_contact = (a.end - a.start).dot(a.direction()) - contact.distance(a.start);
        assert!((dist_after_contact - EFFECTIVE_PUSH_CM).abs() < 1e-12);
    }

    #[test]
    fn effective_push_blocked_in_pile() {
        // 5 x 5 tiling; the middle block cannot be approached from any side
        let mut objs = Vec::new();
        let ids: Vec<String> = (0..25).map(|k| format!("o{k:02}")).collect();
        for r in 0..5 {
            for c in 0..5 {
                let k = r * 5 + c;
                objs.push((ids[k].as_str(), 14.4 + 4.0 * c as f64, 14.4 + 4.0 * r as f64, 4.0, k == 12));
            }
        }
        let s = scene_of(&objs);
        let p = SimParams::default();
        for dir in [Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, 1.0)] {
            let contact = s.pose(12).position - dir * 2.0;
            assert_eq!(effective_push_action(&s, contact, dir, &p), None);
        }
        // a push whose retraction steps back out of a neighbor succeeds
        let contact = s.pose(0).position - Vec2::new(2.0, 0.0);
        assert!(effective_push_action(&s, contact, Vec2::new(1.0, 0.0), &p).is_some());
    }

    #[test]
    fn retraction_clears_nearby_object() {
        // a thin neighbor 1 cm behind the contact point forces a back-off
        let s = Scene::new(
            WORKSPACE_CM,
            vec![
                (ObjectSpec::boxed("t", 4.0, 4.0, true), Pose2D::new(Vec2::new(20.0, 22.4), 0.0)),
                (ObjectSpec::boxed("w", 0.5, 6.0, false), Pose2D::new(Vec2::new(17.0, 22.4), 0.0)),
            ],
        )
        .unwrap();
        let p = SimParams::default();
        let a = effective_push_action(&s, Vec2::new(18.0, 22.4), Vec2::new(1.0, 0.0), &p);
        let a = a.expect("retraction finds a free start behind the neighbor");
        assert!(a.start.x < 16.75 - p.gripper.depth / 2.0 + 1e-9);
        assert!((a.end.x - 23.0).abs() < 1e-12);
    }
}
