//! Scenario JSON: `{"workspace_cm": 44.8, "objects": [{"id", "target",
//! "shape": {"kind": ...}, "pose": {"x_cm", "y_cm", "theta_deg"}}]}`.

use serde::{Deserialize, Serialize};

use super::{ObjectSpec, Scene, SceneError, ShapeSpec, DEFAULT_MAX_OPENING_CM, WORKSPACE_CM};
use crate::geometry::{Pose2D, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default = "default_workspace")]
    pub workspace_cm: f64,
    pub objects: Vec<ObjectEntry>,
}

fn default_workspace() -> f64 {
    WORKSPACE_CM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    #[serde(default)]
    pub target: bool,
    pub shape: ShapeSpec,
    pub pose: PoseEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub x_cm: f64,
    pub y_cm: f64,
    #[serde(default)]
    pub theta_deg: f64,
}

/// Parses and validates a scenario; exactly one target is required.
pub fn load_scenario(bytes: &[u8]) -> Result<Scene, SceneError> {
    load_scenario_with(bytes, DEFAULT_MAX_OPENING_CM)
}

/// [`load_scenario`] with the graspability flag computed for `max_opening`.
pub fn load_scenario_with(bytes: &[u8], max_opening: f64) -> Result<Scene, SceneError> {
    let file: ScenarioFile = serde_json::from_slice(bytes)?;
    file.into_scene(max_opening)
}

impl ScenarioFile {
    pub fn into_scene(self, max_opening: f64) -> Result<Scene, SceneError> {
        let targets = self.objects.iter().filter(|o| o.target).count();
        if targets != 1 {
            return Err(SceneError::TargetCount(targets));
        }
        let objects = self
            .objects
            .into_iter()
            .map(|o| {
                let mut spec = ObjectSpec::new(o.id, o.shape, o.target)?.with_max_opening(max_opening);
                if let Some(h) = o.height_cm {
                    spec.height = h;
                }
                let pose = Pose2D::new(Vec2 { x: o.pose.x_cm, y: o.pose.y_cm }, o.pose.theta_deg.to_radians());
                Ok((spec, pose))
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        Scene::new(self.workspace_cm, objects)
    }

    pub fn from_scene(scene: &Scene) -> ScenarioFile {
        ScenarioFile {
            workspace_cm: scene.workspace(),
            objects: scene
                .specs()
                .iter()
                .zip(scene.poses())
                .map(|(s, p)| ObjectEntry {
                    id: s.id.clone(),
                    target: s.is_target,
                    shape: s.shape_spec.clone(),
                    pose: PoseEntry {
                        x_cm: p.position.x,
                        y_cm: p.position.y,
                        theta_deg: p.heading.to_degrees(),
                    },
                    height_cm: Some(s.height),
                })
                .collect(),
        }
    }
}

/// Pretty-printed scenario JSON.
pub fn save_scenario(scene: &Scene) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scene(scene)).expect("scenario serializes")
}
