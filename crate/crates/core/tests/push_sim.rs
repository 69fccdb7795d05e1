mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vft_core::geometry::{Pose2D, Vec2};
use vft_core::push_sim::{effective_push_action, simulate_push, PushAction, SimParams, EFFECTIVE_PUSH_CM};
use vft_core::scene::{ObjectSpec, Scene, WORKSPACE_CM};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn push_invariants_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sim = SimParams::default();
        let scene = common::packed_scene(&mut rng);
        let a = common::random_push(&mut rng, &scene, &sim);
        if let Err(e) = common::check_push(&scene, &a, &sim) {
            return Err(TestCaseError::fail(e));
        }
    }

    #[test]
    fn effective_distance_is_constant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sim = SimParams::default();
        let scene = common::packed_scene(&mut rng);
        let k = rand::Rng::gen_range(&mut rng, 0..scene.len());
        let poly = scene.footprint(k);
        let c = poly.centroid();
        let dir = Vec2::from_angle(rand::Rng::gen_range(&mut rng, 0.0..std::f64::consts::TAU));
        let contact = poly.ray_exit(c, -dir).unwrap();
        if let Some(a) = effective_push_action(&scene, contact, dir, &sim) {
            // distance travelled past the contact point
            let past = (a.end - contact).dot(dir);
            prop_assert!((past - EFFECTIVE_PUSH_CM).abs() < 1e-9);
            prop_assert!((a.direction().dot(dir) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn long_row_is_pushed_as_a_train() {
    let objects = (0..6)
        .map(|k| {
            let spec = ObjectSpec::boxed(format!("o{k}"), 3.0, 3.0, k == 0);
            (spec, Pose2D::new(Vec2::new(10.0 + 3.0 * k as f64, 20.0), 0.0))
        })
        .collect();
    let scene = Scene::new(WORKSPACE_CM, objects).unwrap();
    let sim = SimParams::default();
    let a = PushAction::new(Vec2::new(7.0, 20.0), Vec2::new(12.0, 20.0));
    let r = simulate_push(&scene, &a, &sim).unwrap();
    assert!(!r.truncated);
    assert!(r.contacted.iter().all(|c| *c));
    assert!(r.gripper_contacted[0] && !r.gripper_contacted[1]);
    // the gripper face ends at 12.75 and the row keeps its order without gaps
    let xs: Vec<f64> = r.scene_after.poses().iter().map(|p| p.position.x).collect();
    assert!((xs[0] - 14.25).abs() < 0.05, "{xs:?}");
    for w in xs.windows(2) {
        assert!(w[1] >= w[0] + 3.0 - 1e-3);
    }
}

#[test]
fn wall_stops_a_train() {
    let objects = (0..3)
        .map(|k| {
            let spec = ObjectSpec::boxed(format!("o{k}"), 4.0, 4.0, k == 0);
            (spec, Pose2D::new(Vec2::new(WORKSPACE_CM - 2.0 - 4.0 * k as f64, 20.0), 0.0))
        })
        .collect();
    let scene = Scene::new(WORKSPACE_CM, objects).unwrap();
    let sim = SimParams::default();
    let start = Vec2::new(WORKSPACE_CM - 12.0 - 1.0, 20.0);
    let r = simulate_push(&scene, &PushAction::new(start, start + Vec2::new(5.0, 0.0)), &sim).unwrap();
    assert!(r.truncated);
    assert!(r.travel < 0.5);
    r.scene_after.validate().unwrap();
}
