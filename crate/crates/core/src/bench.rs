//! Scenario suites and the benchmark harness.
//!
//! Suites are generated procedurally and certified while generating: every
//! easy scenario is solvable by one push, every packed scenario starts with no
//! feasible grasp, and no single push solves a trap scenario.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose2D, Vec2};
use crate::grasp::GraspEvaluator;
use crate::planner::{run_episode, sample_action_space, PlanContext, PlannerConfig, PlannerError, PlannerKind};
use crate::push_sim::{simulate_push, SimParams};
use crate::scene::{fnv1a_str, load_scenario, save_scenario, ObjectSpec, Scene, SceneError, WORKSPACE_CM};

/// Attempts per scenario before generation gives up.
pub const GEN_ATTEMPTS: usize = 500;
/// Largest gap left between neighbouring blocks, cm. Below the gripper clearance.
pub const MAX_PACK_GAP_CM: f64 = 0.2;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("could not generate a certified {kind} scenario after {attempts} attempts")]
    Generation { kind: SuiteKind, attempts: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("scenario {id}: {source}")]
    Scenario {
        id: String,
        #[source]
        source: SceneError,
    },
    #[error(transparent)]
    Planner(#[from] PlannerError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Easy,
    Packed,
    Trap,
}

impl SuiteKind {
    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::Easy => "easy",
            SuiteKind::Packed => "packed",
            SuiteKind::Trap => "trap",
        }
    }
}

impl std::fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(SuiteKind::Easy),
            "packed" => Ok(SuiteKind::Packed),
            "trap" => Ok(SuiteKind::Trap),
            other => Err(format!("unknown suite '{other}' (expected easy, packed or trap)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub scene: Scene,
}

/// Axis-aligned block in the layout frame.
#[derive(Debug, Clone, Copy)]
struct Block {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Block {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Block { x0, x1, y0, y1 }
    }

    fn union(&self, o: &Block) -> Block {
        Block::new(self.x0.min(o.x0), self.x1.max(o.x1), self.y0.min(o.y0), self.y1.max(o.y1))
    }
}

/// Places the target block and its neighbours rotated by `heading` about the
/// workspace centre shifted by `offset`. Every side of every block is pulled in
/// by a random half-gap so neighbours end up at most `MAX_PACK_GAP_CM` apart.
fn place<R: Rng>(rng: &mut R, target: Block, others: &[Block], heading: f64, offset: Vec2) -> Option<Scene> {
    let centre = Vec2::new(WORKSPACE_CM / 2.0, WORKSPACE_CM / 2.0) + offset;
    let mut objects = Vec::with_capacity(others.len() + 1);
    for (k, b) in std::iter::once(&target).chain(others).enumerate() {
        let mut half_gap = || rng.gen_range(0.0..MAX_PACK_GAP_CM / 2.0);
        let b = Block::new(b.x0 + half_gap(), b.x1 - half_gap(), b.y0 + half_gap(), b.y1 - half_gap());
        let local = Vec2::new((b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0);
        let pose = Pose2D::new(centre + local.rotate(heading), heading);
        let spec = if k == 0 {
            ObjectSpec::boxed("t", b.x1 - b.x0, b.y1 - b.y0, true)
        } else {
            ObjectSpec::boxed(format!("b{k:02}"), b.x1 - b.x0, b.y1 - b.y0, false)
        };
        objects.push((spec, pose));
    }
    Scene::new(WORKSPACE_CM, objects).ok()
}

/// Cell boundaries for widths laid out left to right around a centred middle cell.
fn bounds(sizes: &[f64]) -> Vec<f64> {
    let mid = sizes.len() / 2;
    let mut start = -sizes[mid] / 2.0 - sizes[..mid].iter().sum::<f64>();
    let mut out = vec![start];
    for s in sizes {
        start += s;
        out.push(start);
    }
    out
}

/// The eight cells around the centre of a 3x3 layout, ring-ordered, with the
/// target cell first. Corners are merged into edges or edges split until the
/// ring has `count` blocks.
fn inner_ring<R: Rng>(rng: &mut R, xs: &[f64], ys: &[f64], count: usize) -> (Block, Vec<Block>) {
    let cell = |c: usize, r: usize| Block::new(xs[c], xs[c + 1], ys[r], ys[r + 1]);
    let target = cell(1, 1);
    // ring order: corners at even positions
    let ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    let mut groups: Vec<Vec<Block>> = ring.iter().map(|&(c, r)| vec![cell(c, r)]).collect();
    while groups.len() > count {
        // merge a lone corner with one of its ring neighbours
        let corners: Vec<usize> = (0..groups.len())
            .filter(|&g| groups[g].len() == 1 && is_corner(&groups[g][0], &target))
            .collect();
        let Some(&g) = corners.choose(rng) else { break };
        let n = groups.len();
        let h = if rng.gen_bool(0.5) { (g + 1) % n } else { (g + n - 1) % n };
        if groups[h].len() > 1 {
            continue;
        }
        let merged = groups[h].pop().expect("len 1");
        groups[g].push(merged);
        groups.remove(h);
    }
    let mut blocks: Vec<Block> = groups.iter().map(|g| g.iter().skip(1).fold(g[0], |a, b| a.union(b))).collect();
    let mut splittable: Vec<usize> = (0..blocks.len()).filter(|&i| !is_corner(&blocks[i], &target)).collect();
    splittable.shuffle(rng);
    while blocks.len() < count {
        let Some(i) = splittable.pop() else { break };
        let b = blocks[i];
        let (first, second) = if b.x1 - b.x0 >= b.y1 - b.y0 {
            let m = (b.x0 + b.x1) / 2.0;
            (Block::new(b.x0, m, b.y0, b.y1), Block::new(m, b.x1, b.y0, b.y1))
        } else {
            let m = (b.y0 + b.y1) / 2.0;
            (Block::new(b.x0, b.x1, b.y0, m), Block::new(b.x0, b.x1, m, b.y1))
        };
        blocks[i] = first;
        blocks.push(second);
    }
    (target, blocks)
}

fn is_corner(b: &Block, target: &Block) -> bool {
    let sx = b.x1 <= target.x0 + 1e-9 || b.x0 >= target.x1 - 1e-9;
    let sy = b.y1 <= target.y0 + 1e-9 || b.y0 >= target.y1 - 1e-9;
    sx && sy
}

/// The sixteen outer cells of a 5x5 layout, one block each.
fn outer_ring(xs: &[f64], ys: &[f64]) -> Vec<Block> {
    let mut out = Vec::new();
    for c in 0..5 {
        for r in 0..5 {
            if c == 0 || c == 4 || r == 0 || r == 4 {
                out.push(Block::new(xs[c], xs[c + 1], ys[r], ys[r + 1]));
            }
        }
    }
    out
}

fn easy_layout<R: Rng>(rng: &mut R) -> (Block, Vec<Block>) {
    let w = rng.gen_range(3.0..9.0);
    let h = rng.gen_range(2.5..5.0);
    let target = Block::new(-w / 2.0, w / 2.0, -h / 2.0, h / 2.0);
    let mut sides = [0usize, 1, 2, 3];
    sides.shuffle(rng);
    let count = rng.gen_range(1..=3);
    let mut others = Vec::new();
    for &side in &sides[..count] {
        let depth = rng.gen_range(2.0..4.0);
        let along = if side % 2 == 0 { w } else { h };
        let len = rng.gen_range(0.6 * along..along + 3.0);
        let shift = rng.gen_range(-0.3 * along..0.3 * along);
        let (a0, a1) = (shift - len / 2.0, shift + len / 2.0);
        others.push(match side {
            0 => Block::new(a0, a1, h / 2.0, h / 2.0 + depth),
            1 => Block::new(w / 2.0, w / 2.0 + depth, a0, a1),
            2 => Block::new(a0, a1, -h / 2.0 - depth, -h / 2.0),
            _ => Block::new(-w / 2.0 - depth, -w / 2.0, a0, a1),
        });
    }
    (target, others)
}

fn packed_layout<R: Rng>(rng: &mut R) -> (Block, Vec<Block>) {
    let sizes: Vec<f64> = (0..3).map(|_| rng.gen_range(2.5..4.5)).collect();
    let xs = bounds(&sizes);
    let sizes: Vec<f64> = (0..3).map(|_| rng.gen_range(2.5..4.5)).collect();
    let ys = bounds(&sizes);
    let count = rng.gen_range(6..=10);
    inner_ring(rng, &xs, &ys, count)
}

fn trap_layout<R: Rng>(rng: &mut R) -> (Block, Vec<Block>) {
    let sizes: Vec<f64> = (0..5).map(|_| rng.gen_range(3.0..4.5)).collect();
    let xs = bounds(&sizes);
    let sizes: Vec<f64> = (0..5).map(|_| rng.gen_range(3.0..4.5)).collect();
    let ys = bounds(&sizes);
    let count = rng.gen_range(6..=10);
    let (target, mut blocks) = inner_ring(rng, &xs[1..5], &ys[1..5], count);
    blocks.extend(outer_ring(&xs, &ys));
    (target, blocks)
}

/// Best reward reachable with one push, stopping early at 1.
fn best_single_push(scene: &Scene, grasp: &GraspEvaluator, sim: &SimParams) -> f64 {
    let mut best: f64 = 0.0;
    for a in sample_action_space(scene, sim) {
        if let Ok(r) = simulate_push(scene, &a, sim) {
            best = best.max(grasp.max_grasp_reward(&r.scene_after).value);
            if best >= 1.0 {
                break;
            }
        }
    }
    best
}

/// Checks the difficulty contract of `kind` on one scene.
pub fn certify(kind: SuiteKind, scene: &Scene, grasp: &GraspEvaluator, sim: &SimParams) -> bool {
    if grasp.max_grasp_reward(scene).value > 0.0 {
        return false;
    }
    match kind {
        SuiteKind::Easy => best_single_push(scene, grasp, sim) >= 1.0,
        SuiteKind::Packed => true,
        SuiteKind::Trap => best_single_push(scene, grasp, sim) < 1.0,
    }
}

/// Generates `count` certified scenarios of `kind`; the same seed always
/// yields the same suite.
pub fn gen_suite(
    kind: SuiteKind,
    count: usize,
    seed: u64,
    grasp: &GraspEvaluator,
    sim: &SimParams,
) -> Result<Vec<Scenario>, BenchError> {
    if count == 0 {
        return Err(BenchError::Argument("count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a_str(kind.name()));
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let scene = (0..GEN_ATTEMPTS)
            .find_map(|_| {
                let (target, others) = match kind {
                    SuiteKind::Easy => easy_layout(&mut rng),
                    SuiteKind::Packed => packed_layout(&mut rng),
                    SuiteKind::Trap => trap_layout(&mut rng),
                };
                let heading = rng.gen_range(0.0..std::f64::consts::PI);
                let offset = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                place(&mut rng, target, &others, heading, offset).filter(|s| certify(kind, s, grasp, sim))
            })
            .ok_or(BenchError::Generation { kind, attempts: GEN_ATTEMPTS })?;
        out.push(Scenario { id: format!("{}-{k:03}", kind.name()), scene });
    }
    Ok(out)
}

/// Writes one `<id>.json` per scenario into `dir`, creating it if needed.
pub fn write_suite(dir: &Path, suite: &[Scenario]) -> Result<Vec<PathBuf>, BenchError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    suite
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.json", s.id));
            std::fs::write(&path, save_scenario(&s.scene)).map_err(io_err(&path))?;
            Ok(path)
        })
        .collect()
}

/// Loads every `*.json` scenario in `dir`, ordered by file name.
pub fn load_suite(dir: &Path) -> Result<Vec<Scenario>, BenchError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(BenchError::Argument(format!("no scenario files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let bytes = std::fs::read(p).map_err(io_err(p))?;
            let scene = load_scenario(&bytes).map_err(|source| BenchError::Scenario { id: id.clone(), source })?;
            Ok(Scenario { id, scene })
        })
        .collect()
}

/// Seed of one episode: the bench seed mixed with the scenario id and repeat.
pub fn episode_seed(seed: u64, scenario: &str, repeat: usize) -> u64 {
    seed ^ fnv1a_str(&format!("{scenario}#{repeat}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub outcome: String,
    pub actions: usize,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
    pub wall_ms: f64,
}

/// Aggregates for one scenario and planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub scenario: String,
    pub planner: PlannerKind,
    pub repeats: usize,
    pub mean_actions: f64,
    pub completion_rate: f64,
    pub grasp_success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<EpisodeRow>,
    pub results: Vec<SuiteResult>,
}

impl BenchReport {
    /// Means over every row of `planner`: (mean actions, completion, grasp success).
    pub fn overall(&self, planner: PlannerKind) -> Option<(f64, f64, f64)> {
        let rows: Vec<&EpisodeRow> = self.rows.iter().filter(|r| r.planner == planner).collect();
        let s = aggregate(&rows)?;
        Some((s.0, s.1, s.2))
    }
}

/// (mean actions, completion rate, grasp success rate) over `rows`. Grasp
/// success is 1 when no grasp was attempted.
fn aggregate(rows: &[&EpisodeRow]) -> Option<(f64, f64, f64)> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let actions = rows.iter().map(|r| r.actions as f64).sum::<f64>() / n;
    let done = rows.iter().filter(|r| r.outcome == "success").count() as f64 / n;
    let attempts: usize = rows.iter().map(|r| r.grasp_attempts).sum();
    let successes: usize = rows.iter().map(|r| r.grasp_successes).sum();
    let grasp = if attempts == 0 { 1.0 } else { successes as f64 / attempts as f64 };
    Some((actions, done, grasp))
}

/// Per scenario and planner aggregates, in first-appearance order.
pub fn summarize(rows: &[EpisodeRow]) -> Vec<SuiteResult> {
    let mut keys: Vec<(String, PlannerKind)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(s, p)| *s == r.scenario && *p == r.planner) {
            keys.push((r.scenario.clone(), r.planner));
        }
    }
    keys.into_iter()
        .map(|(scenario, planner)| {
            let group: Vec<&EpisodeRow> = rows.iter().filter(|r| r.scenario == scenario && r.planner == planner).collect();
            let (mean_actions, completion_rate, grasp_success_rate) = aggregate(&group).expect("group is non-empty");
            SuiteResult { scenario, planner, repeats: group.len(), mean_actions, completion_rate, grasp_success_rate }
        })
        .collect()
}

/// Plain-text table of `results` with one overall line per planner.
pub fn summary_table(report: &BenchReport) -> String {
    let mut s = format!("{:<14} {:<7} {:>7} {:>10} {:>8} {:>8}\n", "scenario", "planner", "repeats", "completion", "grasp", "actions");
    for r in &report.results {
        let _ = writeln!(
            s,
            "{:<14} {:<7} {:>7} {:>9.1}% {:>7.1}% {:>8.2}",
            r.scenario,
            r.planner.name(),
            r.repeats,
            100.0 * r.completion_rate,
            100.0 * r.grasp_success_rate,
            r.mean_actions
        );
    }
    for p in [PlannerKind::Vft, PlannerKind::Greedy] {
        if let Some((a, c, g)) = report.overall(p) {
            let n = report.rows.iter().filter(|r| r.planner == p).count();
            let _ = writeln!(s, "{:<14} {:<7} {:>7} {:>9.1}% {:>7.1}% {:>8.2}", "all", p.name(), n, 100.0 * c, 100.0 * g, a);
        }
    }
    s
}

/// Runs `repeats` seeded episodes per scenario and planner, writing one CSV
/// row per episode to `out` as soon as it finishes. The CSV starts with `#`
/// comment lines holding the configuration.
pub fn run_bench<W: Write>(
    suite: &[Scenario],
    planners: &[PlannerKind],
    repeats: usize,
    cfg: &PlannerConfig,
    sim: &SimParams,
    grasp: &GraspEvaluator,
    out: W,
) -> Result<BenchReport, BenchError> {
    if repeats == 0 {
        return Err(BenchError::Argument("repeats must be at least 1".into()));
    }
    if suite.is_empty() || planners.is_empty() {
        return Err(BenchError::Argument("need at least one scenario and one planner".into()));
    }
    cfg.validate()?;
    sim.validate().map_err(PlannerError::from)?;
    let mut out = out;
    let header = |e: std::io::Error| BenchError::Csv(e.into());
    writeln!(out, "# planner_config {}", serde_json::to_string(cfg).expect("config serializes")).map_err(header)?;
    writeln!(out, "# sim_params {}", serde_json::to_string(sim).expect("params serialize")).map_err(header)?;
    writeln!(out, "# gripper {}", serde_json::to_string(grasp.spec()).expect("spec serializes")).map_err(header)?;
    writeln!(out, "# grid {} repeats {repeats}", grasp.grid()).map_err(header)?;
    let mut csv = csv::Writer::from_writer(out);
    let mut rows = Vec::new();
    for scenario in suite {
        for &planner in planners {
            for repeat in 0..repeats {
                let seed = episode_seed(cfg.seed, &scenario.id, repeat);
                let ep_cfg = PlannerConfig { seed, ..cfg.clone() };
                let ctx = PlanContext { cfg: &ep_cfg, sim, grasp };
                let t0 = Instant::now();
                let log = run_episode(&scenario.id, &scenario.scene, ctx, planner)?;
                let row = EpisodeRow {
                    scenario: scenario.id.clone(),
                    planner,
                    seed,
                    outcome: log.outcome.name().to_string(),
                    actions: log.action_count,
                    grasp_attempts: log.grasp_attempts,
                    grasp_successes: log.grasp_successes,
                    wall_ms: (t0.elapsed().as_secs_f64() * 1e6).round() / 1e3,
                };
                csv.serialize(&row)?;
                csv.flush().map_err(header)?;
                rows.push(row);
            }
        }
    }
    let results = summarize(&rows);
    Ok(BenchReport { rows, results })
}

/// Parses the rows of a CSV written by [`run_bench`], skipping comment lines.
pub fn read_rows(text: &str) -> Result<Vec<EpisodeRow>, BenchError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_bounds_centre_the_middle_cell() {
        let b = bounds(&[2.0, 4.0, 3.0]);
        assert_eq!(b, vec![-4.0, -2.0, 2.0, 5.0]);
    }

    #[test]
    fn inner_ring_hits_requested_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = bounds(&[3.0, 4.0, 3.0]);
        for count in 6..=10 {
            let (_, blocks) = inner_ring(&mut rng, &xs, &xs, count);
            assert_eq!(blocks.len(), count);
        }
    }

    #[test]
    fn episode_seed_depends_on_scenario_and_repeat() {
        assert_ne!(episode_seed(1, "a", 0), episode_seed(1, "a", 1));
        assert_ne!(episode_seed(1, "a", 0), episode_seed(1, "b", 0));
        assert_eq!(episode_seed(1, "a", 0), episode_seed(1, "a", 0));
    }

    #[test]
    fn suite_kind_round_trip() {
        for k in [SuiteKind::Easy, SuiteKind::Packed, SuiteKind::Trap] {
            assert_eq!(k.name().parse::<SuiteKind>().unwrap(), k);
        }
        assert!("hard".parse::<SuiteKind>().is_err());
    }
}
