use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mcts::{search_with, IterationTrace, SearchStats};
use super::{PlanContext, PlannerConfig, PlannerError, TieBreak};
use crate::grasp::GraspAction;
use crate::push_sim::{simulate_push, PushAction};
use crate::scene::{scene_hash, Scene, SceneHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Vft,
    Greedy,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::Vft => "vft",
            PlannerKind::Greedy => "greedy",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vft" => Ok(PlannerKind::Vft),
            "greedy" => Ok(PlannerKind::Greedy),
            other => Err(format!("unknown planner '{other}' (expected vft or greedy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    BudgetExhausted,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionRecord {
    /// `merged` pushes continue the previous push and are not counted.
    Push { action: PushAction, merged: bool },
    Grasp { grasp: GraspAction, success: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Hash of the state the action was chosen in.
    pub state: SceneHash,
    pub action: ActionRecord,
    /// Best grasp reward of that state.
    pub reward: f64,
    /// Value the planner assigned to the chosen push.
    pub plan_value: Option<f64>,
    pub wall_ms: f64,
    pub search: Option<SearchStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
    /// Actions after merging chained pushes.
    pub action_count: usize,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
    pub wall_ms: f64,
    /// Initial scene and the scene after every counted action.
    #[serde(skip)]
    pub frames: Vec<Scene>,
    /// Per-search iteration traces, keyed by record index, when tracing is on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<(usize, Vec<IterationTrace>)>,
}

/// Depth-one lookahead: simulates every push once and returns the one whose
/// successor has the best grasp reward, with its score. Ties follow
/// `cfg.greedy_tie_break`.
pub fn greedy_baseline<R: Rng>(
    scene: &Scene,
    ctx: PlanContext<'_>,
    rng: &mut R,
) -> Result<(PushAction, f64), PlannerError> {
    let actions = ctx.actions(scene);
    if actions.is_empty() {
        return Err(PlannerError::NoActions);
    }
    let mut scores = Vec::with_capacity(actions.len());
    for a in &actions {
        let next = simulate_push(scene, a, ctx.sim)?.scene_after;
        scores.push(ctx.reward(&next));
    }
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..actions.len()).filter(|i| scores[*i] == best).collect();
    let pick = match ctx.cfg.greedy_tie_break {
        TieBreak::First => tied[0],
        TieBreak::Random => *tied.choose(rng).expect("non-empty"),
    };
    Ok((actions[pick], best))
}

/// Whether `next` continues `prev`: same direction within `concat_angle_deg`
/// and starting within `concat_gap_cm` of where `prev` ended.
pub fn pushes_chain(prev: &PushAction, next: &PushAction, cfg: &PlannerConfig) -> bool {
    let cos = prev.direction().dot(next.direction());
    cos >= cfg.concat_angle_deg.to_radians().cos() && prev.end.distance(next.start) <= cfg.concat_gap_cm
}

/// Runs one retrieval episode: grasp when the best reward is strictly above
/// `r_g_star`, otherwise plan and execute a push, until the target is removed
/// or the action budget is spent.
pub fn run_episode(
    scenario: &str,
    scene: &Scene,
    ctx: PlanContext<'_>,
    planner: PlannerKind,
) -> Result<EpisodeLog, PlannerError> {
    let cfg = ctx.cfg;
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = EpisodeLog {
        scenario: scenario.to_string(),
        planner,
        seed: cfg.seed,
        records: Vec::new(),
        outcome: Outcome::BudgetExhausted,
        action_count: 0,
        grasp_attempts: 0,
        grasp_successes: 0,
        wall_ms: 0.0,
        frames: vec![scene.clone()],
        traces: Vec::new(),
    };
    let mut scene = scene.clone();
    let mut last_push: Option<PushAction> = None;
    // merged pushes are free, so also bound the raw step count
    while log.action_count < cfg.episode_action_budget && log.records.len() < 4 * cfg.episode_action_budget {
        let t0 = Instant::now();
        let summary = ctx.grasp.max_grasp_reward(&scene);
        let state = scene_hash(&scene);
        if summary.value > cfg.r_g_star {
            let grasp = summary.best.expect("positive reward has a grasp");
            let success = ctx.grasp.is_feasible(&scene, grasp);
            log.action_count += 1;
            log.grasp_attempts += 1;
            last_push = None;
            if success {
                log.grasp_successes += 1;
                let t = scene.target_index().expect("graspable scene has a target");
                scene = scene.without(t);
            }
            log.frames.push(scene.clone());
            log.records.push(StepRecord {
                state,
                action: ActionRecord::Grasp { grasp, success },
                reward: summary.value,
                plan_value: None,
                wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                search: None,
            });
            if success {
                log.outcome = Outcome::Success;
                break;
            }
            continue;
        }

        let (action, value, stats, trace) = match planner {
            PlannerKind::Vft => {
                let r = search_with(&scene, ctx, &mut rng)?;
                (r.action, r.value, Some(r.stats), r.trace)
            }
            PlannerKind::Greedy => {
                let (a, v) = greedy_baseline(&scene, ctx, &mut rng)?;
                (a, v, None, Vec::new())
            }
        };
        let next = simulate_push(&scene, &action, ctx.sim)?.scene_after;
        let merged = cfg.concat_pushes && last_push.is_some_and(|p| pushes_chain(&p, &action, cfg));
        scene = next;
        if merged {
            *log.frames.last_mut().expect("initial frame") = scene.clone();
        } else {
            log.action_count += 1;
            log.frames.push(scene.clone());
        }
        last_push = Some(action);
        if !trace.is_empty() {
            log.traces.push((log.records.len(), trace));
        }
        log.records.push(StepRecord {
            state,
            action: ActionRecord::Push { action, merged },
            reward: summary.value,
            plan_value: Some(value),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
            search: stats,
        });
    }
    log.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(log)
}

/// [`run_episode`] with the tree-search planner.
pub fn vft_episode(scene: &Scene, ctx: PlanContext<'_>) -> Result<EpisodeLog, PlannerError> {
    run_episode("scene", scene, ctx, PlannerKind::Vft)
}
