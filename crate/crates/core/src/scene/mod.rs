//! World model: the object catalog, poses inside a square workspace, and the
//! derived views (occupancy grid, hash, SVG) the planner needs.

mod hash;
mod io;
mod raster;
mod svg;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, transform, ConvexPolygon, GeometryError, Pose2D, EPS_CONTACT};

pub(crate) use hash::fnv1a_str;
pub use hash::{scene_hash, SceneHash, HEADING_BIN_DEG, POSITION_BIN_CM};
pub use io::{load_scenario, load_scenario_with, save_scenario, ScenarioFile};
pub use raster::{cell_center, rasterize, rasterize_with, Cell, OccupancyGrid};
pub use svg::{render_svg, Annotation};

/// Side of the square workspace, cm.
pub const WORKSPACE_CM: f64 = 44.8;
/// Cells per side of the planning grid.
pub const GRID_CELLS: usize = 224;
/// Vertex count used for cylinder footprints.
pub const CYLINDER_SIDES: usize = 24;
/// Default opening used for the graspability flag when no gripper is given.
pub const DEFAULT_MAX_OPENING_CM: f64 = 8.5;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid shape for {id}: {source}")]
    Shape {
        id: String,
        #[source]
        source: GeometryError,
    },
    #[error("invalid workspace size {0}")]
    Workspace(f64),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("expected exactly one target, found {0}")]
    TargetCount(usize),
    #[error("overlap: {0},{1}")]
    Overlap(String, String),
    #[error("outside workspace: {0}")]
    OutOfWorkspace(String),
    #[error("non-finite pose: {0}")]
    Pose(String),
}

/// Editable shape description, kept alongside the polygon so files round-trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeSpec {
    Box { w_cm: f64, h_cm: f64 },
    Cylinder { r_cm: f64 },
    /// Vertices in any frame; the body frame puts the area centroid at the origin.
    Polygon { vertices_cm: Vec<[f64; 2]> },
}

impl ShapeSpec {
    pub fn polygon(&self) -> Result<ConvexPolygon, GeometryError> {
        use geometry::Vec2;
        match self {
            ShapeSpec::Box { w_cm, h_cm } => {
                if !(*w_cm > 0.0 && *h_cm > 0.0 && w_cm.is_finite() && h_cm.is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                Ok(ConvexPolygon::rectangle(*w_cm, *h_cm))
            }
            ShapeSpec::Cylinder { r_cm } => {
                if !(*r_cm > 0.0 && r_cm.is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                Ok(ConvexPolygon::regular(CYLINDER_SIDES, *r_cm))
            }
            ShapeSpec::Polygon { vertices_cm } => ConvexPolygon::centered(
                vertices_cm.iter().map(|[x, y]| Vec2 { x: *x, y: *y }).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    /// Body-frame footprint, centroid at the origin.
    pub shape: ConvexPolygon,
    pub shape_spec: ShapeSpec,
    pub is_target: bool,
    /// Metadata only.
    pub height: f64,
    /// False when no orientation fits between the open fingers.
    pub graspable: bool,
}

impl ObjectSpec {
    pub fn new(id: impl Into<String>, shape_spec: ShapeSpec, is_target: bool) -> Result<Self, SceneError> {
        let id = id.into();
        let shape = shape_spec.polygon().map_err(|source| SceneError::Shape {
            id: id.clone(),
            source,
        })?;
        let graspable = shape.min_width() <= DEFAULT_MAX_OPENING_CM;
        Ok(ObjectSpec {
            id,
            shape,
            shape_spec,
            is_target,
            height: 5.0,
            graspable,
        })
    }

    pub fn boxed(id: impl Into<String>, w: f64, h: f64, is_target: bool) -> Self {
        Self::new(id, ShapeSpec::Box { w_cm: w, h_cm: h }, is_target).expect("positive box sides")
    }

    pub fn cylinder(id: impl Into<String>, r: f64, is_target: bool) -> Self {
        Self::new(id, ShapeSpec::Cylinder { r_cm: r }, is_target).expect("positive radius")
    }

    /// Re-derives the graspability flag against a specific opening.
    pub fn with_max_opening(mut self, max_opening: f64) -> Self {
        self.graspable = self.shape.min_width() <= max_opening;
        self
    }
}

/// Immutable planar state: specs are shared, poses and world footprints owned.
#[derive(Debug, Clone)]
pub struct Scene {
    workspace: f64,
    specs: Arc<[ObjectSpec]>,
    poses: Vec<Pose2D>,
    footprints: Vec<ConvexPolygon>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.workspace == other.workspace && self.specs == other.specs && self.poses == other.poses
    }
}

impl Scene {
    /// Builds and validates a scene. At most one object may be the target.
    pub fn new(workspace: f64, objects: Vec<(ObjectSpec, Pose2D)>) -> Result<Scene, SceneError> {
        if !(workspace > 0.0 && workspace.is_finite()) {
            return Err(SceneError::Workspace(workspace));
        }
        let (specs, poses): (Vec<_>, Vec<_>) = objects.into_iter().unzip();
        for (s, p) in specs.iter().zip(&poses) {
            if !(p.position.x.is_finite() && p.position.y.is_finite() && p.heading.is_finite()) {
                return Err(SceneError::Pose(s.id.clone()));
            }
        }
        let scene = Scene::assemble(workspace, specs.into(), poses);
        scene.validate()?;
        Ok(scene)
    }

    /// An empty workspace of the default size.
    pub fn empty() -> Scene {
        Scene::assemble(WORKSPACE_CM, Vec::new().into(), Vec::new())
    }

    fn assemble(workspace: f64, specs: Arc<[ObjectSpec]>, poses: Vec<Pose2D>) -> Scene {
        let footprints = specs
            .iter()
            .zip(&poses)
            .map(|(s, p)| transform(&s.shape, p))
            .collect();
        Scene {
            workspace,
            specs,
            poses,
            footprints,
        }
    }

    /// Checks every scene invariant: unique ids, at most one target, footprints
    /// inside the workspace and pairwise non-overlapping.
    pub fn validate(&self) -> Result<(), SceneError> {
        for i in 0..self.len() {
            for j in 0..i {
                if self.specs[i].id == self.specs[j].id {
                    return Err(SceneError::DuplicateId(self.specs[i].id.clone()));
                }
            }
        }
        let targets = self.specs.iter().filter(|s| s.is_target).count();
        if targets > 1 {
            return Err(SceneError::TargetCount(targets));
        }
        for (s, f) in self.specs.iter().zip(&self.footprints) {
            let b = f.bounds();
            let w = self.workspace;
            if b.min.x < -EPS_CONTACT || b.min.y < -EPS_CONTACT || b.max.x > w + EPS_CONTACT || b.max.y > w + EPS_CONTACT {
                return Err(SceneError::OutOfWorkspace(s.id.clone()));
            }
        }
        if let Some((i, j)) = self.first_overlap() {
            return Err(SceneError::Overlap(self.specs[i].id.clone(), self.specs[j].id.clone()));
        }
        Ok(())
    }

    /// First overlapping pair `(i, j)` with `i < j`.
    pub fn first_overlap(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if geometry::intersects(&self.footprints[i], &self.footprints[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Same objects at new poses. The caller guarantees validity.
    pub fn with_poses(&self, poses: Vec<Pose2D>) -> Scene {
        assert_eq!(poses.len(), self.len());
        Scene::assemble(self.workspace, self.specs.clone(), poses)
    }

    /// The scene with object `index` taken out.
    pub fn without(&self, index: usize) -> Scene {
        let specs: Vec<ObjectSpec> = self
            .specs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, s)| s.clone())
            .collect();
        let mut poses = self.poses.clone();
        poses.remove(index);
        let mut footprints = self.footprints.clone();
        footprints.remove(index);
        Scene {
            workspace: self.workspace,
            specs: specs.into(),
            poses,
            footprints,
        }
    }

    pub fn workspace(&self) -> f64 {
        self.workspace
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn specs(&self) -> &[ObjectSpec] {
        &self.specs
    }

    pub fn poses(&self) -> &[Pose2D] {
        &self.poses
    }

    pub fn footprints(&self) -> &[ConvexPolygon] {
        &self.footprints
    }

    pub fn spec(&self, i: usize) -> &ObjectSpec {
        &self.specs[i]
    }

    pub fn pose(&self, i: usize) -> Pose2D {
        self.poses[i]
    }

    pub fn footprint(&self, i: usize) -> &ConvexPolygon {
        &self.footprints[i]
    }

    pub fn target_index(&self) -> Option<usize> {
        self.specs.iter().position(|s| s.is_target)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }

    /// Center of the workspace square.
    pub fn center(&self) -> geometry::Vec2 {
        geometry::Vec2::new(self.workspace / 2.0, self.workspace / 2.0)
    }
}
