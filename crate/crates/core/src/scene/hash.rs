use serde::{Deserialize, Serialize};

use super::Scene;

/// Position quantization bin, cm.
pub const POSITION_BIN_CM: f64 = 0.05;
/// Heading quantization bin, degrees.
pub const HEADING_BIN_DEG: f64 = 0.5;

/// 64-bit digest of object ids and binned poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SceneHash(pub u64);

impl std::fmt::Display for SceneHash {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, used for every digest that must be stable across builds.
pub(crate) fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub(crate) fn fnv1a_str(s: &str) -> u64 {
    fnv1a(FNV_OFFSET, s.as_bytes())
}

/// Two scenes hash equal when every object has the same id, target flag and
/// pose bins (0.05 cm in x and y, 0.5 deg in heading).
pub fn scene_hash(scene: &Scene) -> SceneHash {
    let heading_bins = (360.0 / HEADING_BIN_DEG) as i64;
    let mut h = fnv1a(FNV_OFFSET, &scene.workspace().to_bits().to_le_bytes());
    for (spec, pose) in scene.specs().iter().zip(scene.poses()) {
        h = fnv1a(h, spec.id.as_bytes());
        h = fnv1a(h, &[0xff, spec.is_target as u8]);
        let qx = (pose.position.x / POSITION_BIN_CM).floor() as i64;
        let qy = (pose.position.y / POSITION_BIN_CM).floor() as i64;
        let qh = (pose.heading.to_degrees() / HEADING_BIN_DEG).floor() as i64;
        let qh = qh.rem_euclid(heading_bins);
        for q in [qx, qy, qh] {
            h = fnv1a(h, &q.to_le_bytes());
        }
    }
    SceneHash(h)
}
