#![allow(dead_code)]

use rand::Rng;
use vft_core::geometry::{Pose2D, Vec2};
use vft_core::planner::sample_action_space;
use vft_core::push_sim::{validate_action, PushAction, SimParams};
use vft_core::scene::{ObjectSpec, Scene, WORKSPACE_CM};

/// Boxes and discs on a jittered grid with sub-clearance gaps, rotated and
/// shifted as a whole. The object nearest the middle is the target.
pub fn packed_scene<R: Rng>(rng: &mut R) -> Scene {
    loop {
        let rows = rng.gen_range(1..=4);
        let cols = rng.gen_range(1..=4);
        let ws: Vec<f64> = (0..cols).map(|_| rng.gen_range(2.0..5.0)).collect();
        let hs: Vec<f64> = (0..rows).map(|_| rng.gen_range(2.0..5.0)).collect();
        let (tw, th) = (ws.iter().sum::<f64>(), hs.iter().sum::<f64>());
        let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let reach = 0.5 * (tw * tw + th * th).sqrt() + 0.5;
        let centre = Vec2::new(
            rng.gen_range(reach..WORKSPACE_CM - reach),
            rng.gen_range(reach..WORKSPACE_CM - reach),
        );
        let mut objects = Vec::new();
        let mut y0 = -th / 2.0;
        for (r, h) in hs.iter().enumerate() {
            let mut x0 = -tw / 2.0;
            for (c, w) in ws.iter().enumerate() {
                if rng.gen_bool(0.85) {
                    let gap = rng.gen_range(0.0..0.3);
                    let local = Vec2::new(x0 + w / 2.0, y0 + h / 2.0);
                    let id = format!("o{r}{c}");
                    let spec = if rng.gen_bool(0.2) {
                        ObjectSpec::cylinder(id, (w.min(*h) - gap) / 2.0, false)
                    } else {
                        ObjectSpec::boxed(id, w - gap, h - gap, false)
                    };
                    objects.push((spec, Pose2D::new(centre + local.rotate(heading), heading)));
                }
                x0 += w;
            }
            y0 += h;
        }
        if objects.is_empty() {
            continue;
        }
        let t = (0..objects.len())
            .min_by(|a, b| {
                let da = objects[*a].1.position.distance(centre);
                let db = objects[*b].1.position.distance(centre);
                da.total_cmp(&db)
            })
            .unwrap();
        objects[t].0.is_target = true;
        if let Ok(s) = Scene::new(WORKSPACE_CM, objects) {
            return s;
        }
    }
}

/// Either a planner action or a free-floating push of random length.
pub fn random_push<R: Rng>(rng: &mut R, scene: &Scene, sim: &SimParams) -> PushAction {
    if rng.gen_bool(0.6) {
        let actions = sample_action_space(scene, sim);
        if !actions.is_empty() {
            return actions[rng.gen_range(0..actions.len())];
        }
    }
    loop {
        let start = Vec2::new(rng.gen_range(1.0..WORKSPACE_CM - 1.0), rng.gen_range(1.0..WORKSPACE_CM - 1.0));
        let aim = scene.pose(rng.gen_range(0..scene.len())).position;
        let dir = (aim - start)
            .normalized()
            .unwrap_or(Vec2::new(1.0, 0.0))
            .rotate(rng.gen_range(-0.3..0.3));
        let end = start + dir * rng.gen_range(1.0..12.0);
        let a = PushAction::new(start, end);
        if validate_action(scene, &a, sim).is_ok() {
            return a;
        }
    }
}

/// A few objects scattered at random, one of them the target.
pub fn scattered_scene<R: Rng>(rng: &mut R, max_objects: usize) -> Scene {
    loop {
        let n = rng.gen_range(1..=max_objects);
        let objects: Vec<_> = (0..n)
            .map(|k| {
                let spec = match rng.gen_range(0..3) {
                    0 => ObjectSpec::cylinder(format!("o{k}"), rng.gen_range(1.0..3.0), k == 0),
                    _ => ObjectSpec::boxed(format!("o{k}"), rng.gen_range(1.5..6.0), rng.gen_range(1.5..6.0), k == 0),
                };
                let pos = Vec2::new(rng.gen_range(6.0..WORKSPACE_CM - 6.0), rng.gen_range(6.0..WORKSPACE_CM - 6.0));
                (spec, Pose2D::new(pos, rng.gen_range(0.0..std::f64::consts::PI)))
            })
            .collect();
        if let Ok(s) = Scene::new(WORKSPACE_CM, objects) {
            return s;
        }
    }
}

/// Region swept by the gripper rectangle between the endpoints of `a`; the
/// gripper moves along its own depth axis, so this is a longer rectangle.
pub fn sweep_region(a: &PushAction, sim: &SimParams) -> vft_core::geometry::ConvexPolygon {
    let rect = vft_core::geometry::ConvexPolygon::rectangle(a.length() + sim.gripper.depth, sim.gripper.width);
    let pose = Pose2D::new(a.start.lerp(a.end, 0.5), a.direction().angle());
    vft_core::geometry::transform(&rect, &pose)
}

/// Objects a push could possibly reach: anything within `reach` of the sweep,
/// then anything within `reach` of an object already reached.
pub fn reachable(scene: &Scene, a: &PushAction, sim: &SimParams, reach: f64) -> Vec<bool> {
    use vft_core::geometry::distance;
    let sweep = sweep_region(a, sim);
    let n = scene.len();
    let mut seen: Vec<bool> = (0..n).map(|i| distance(&sweep, scene.footprint(i)) <= reach).collect();
    let mut frontier: Vec<usize> = (0..n).filter(|i| seen[*i]).collect();
    while let Some(i) = frontier.pop() {
        for j in 0..n {
            if !seen[j] && distance(scene.footprint(i), scene.footprint(j)) <= reach {
                seen[j] = true;
                frontier.push(j);
            }
        }
    }
    seen
}

/// Validity, forward progress, locality and determinism of one push.
pub fn check_push(scene: &Scene, a: &PushAction, sim: &SimParams) -> Result<(), String> {
    use vft_core::push_sim::simulate_push;
    let r = simulate_push(scene, a, sim).map_err(|e| e.to_string())?;
    r.scene_after.validate().map_err(|e| format!("invalid post-state: {e}"))?;
    let dir = a.direction();
    for i in 0..scene.len() {
        if r.gripper_contacted[i] {
            let along = r.deltas[i].position.dot(dir);
            if along < -1e-9 {
                return Err(format!("object {} moved {along} against the push", scene.spec(i).id));
            }
        }
        if !r.contacted[i] && r.deltas[i] != Pose2D::default() {
            return Err(format!("object {} moved without contact", scene.spec(i).id));
        }
    }
    let reach = reachable(scene, a, sim, a.length());
    for i in 0..scene.len() {
        if !reach[i] && (r.contacted[i] || r.deltas[i] != Pose2D::default()) {
            return Err(format!("object {} is out of reach but moved", scene.spec(i).id));
        }
    }
    let again = simulate_push(scene, a, sim).map_err(|e| e.to_string())?;
    if again != r {
        return Err("simulation is not deterministic".into());
    }
    Ok(())
}

/// Target flanked by one or two flush neighbours at a random pose, so the
/// start has no feasible grasp.
pub fn flanked_scene<R: Rng>(rng: &mut R) -> Scene {
    loop {
        let w = rng.gen_range(2.5..5.0);
        let h = rng.gen_range(2.5..5.0);
        let heading = rng.gen_range(0.0..std::f64::consts::PI);
        let centre = Vec2::new(rng.gen_range(12.0..32.0), rng.gen_range(12.0..32.0));
        let mut objects = vec![(ObjectSpec::boxed("t", w, h, true), Pose2D::new(centre, heading))];
        let neighbours = rng.gen_range(1..=2);
        for k in 0..neighbours {
            let side = if k == 0 { 1.0 } else { -1.0 };
            let nw = rng.gen_range(2.0..4.0);
            let nh = rng.gen_range(h..h + 6.0);
            let gap = rng.gen_range(0.0..0.2);
            let local = Vec2::new(side * (w / 2.0 + gap + nw / 2.0), rng.gen_range(-1.0..1.0));
            objects.push((ObjectSpec::boxed(format!("n{k}"), nw, nh, false), Pose2D::new(centre + local.rotate(heading), heading)));
        }
        if let Ok(s) = Scene::new(WORKSPACE_CM, objects) {
            return s;
        }
    }
}

/// Every value appended to Q in one iteration must equal the discounted
/// maximum of the rewards along that iteration's path below the node.
pub fn check_backprop(t: &vft_core::planner::IterationTrace, gamma: f64) -> Result<(), String> {
    // rewards from the new node downward: the node, then the rollout states
    let leaf = t.path.len() - 1;
    for (k, (node, value)) in t.backprop.iter().enumerate() {
        let pos = leaf - k;
        if t.path[pos] != *node {
            return Err(format!("iteration {}: backprop order differs from the path", t.iteration));
        }
        let mut want: f64 = 0.0;
        let mut discount = 1.0;
        for r in t.path_rewards[pos..].iter().chain(&t.rollout_rewards) {
            want = want.max(discount * r);
            discount *= gamma;
        }
        if (want - value).abs() > 1e-12 {
            return Err(format!("iteration {}: node {node} got {value}, expected {want}", t.iteration));
        }
    }
    if t.backprop.len() != leaf {
        return Err(format!("iteration {}: {} updates for a path of {} nodes", t.iteration, t.backprop.len(), t.path.len()));
    }
    Ok(())
}

/// Best discounted max-along-path value of any push sequence of at most
/// `d_star` pushes from `scene`, starting with each root action; returns the
/// overall optimum.
pub fn exhaustive_optimum(scene: &Scene, ctx: vft_core::planner::PlanContext<'_>) -> f64 {
    fn value(s: &Scene, depth: usize, ctx: vft_core::planner::PlanContext<'_>) -> f64 {
        let r = ctx.reward(s);
        if depth >= ctx.cfg.d_star || r >= ctx.cfg.r_gp_star {
            return r;
        }
        let below = ctx
            .actions(s)
            .iter()
            .map(|a| value(&vft_core::push_sim::simulate_push(s, a, ctx.sim).unwrap().scene_after, depth + 1, ctx))
            .fold(0.0, f64::max);
        r.max(below * ctx.cfg.gamma)
    }
    ctx.actions(scene)
        .iter()
        .map(|a| value(&vft_core::push_sim::simulate_push(scene, a, ctx.sim).unwrap().scene_after, 1, ctx))
        .fold(0.0, f64::max)
}
