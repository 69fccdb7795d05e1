//! Push/grasp planning: Monte-Carlo tree search over imagined pushes, the
//! episode loop that alternates search and execution, and a depth-one greedy
//! baseline.

mod episode;
mod mcts;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{contour_points, principal_axis, Vec2};
use crate::grasp::GraspEvaluator;
use crate::push_sim::{effective_push_action, PushAction, SimError, SimParams};
use crate::scene::Scene;

pub use episode::{
    greedy_baseline, pushes_chain, run_episode, vft_episode, ActionRecord, EpisodeLog, Outcome, PlannerKind, StepRecord,
};
pub use mcts::{mcts_search, uct, uct_value, IterationTrace, SearchResult, SearchStats, SearchTree, TreeNode};

/// Axis pushes plus contour pushes per object.
pub const PUSHES_PER_OBJECT: usize = 12;
const CONTOUR_PUSHES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no push action is available in the current scene")]
    NoActions,
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// How the greedy baseline breaks ties between equally scored pushes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// First in action-space order.
    First,
    /// Uniform among the tied actions, from the episode generator.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub n_max: usize,
    pub gamma: f64,
    /// Push budget from the search root shared by tree and rollout.
    pub d_star: usize,
    /// A grasp is executed when the best reward is strictly above this.
    pub r_g_star: f64,
    /// Rollouts stop once a state reaches this reward.
    pub r_gp_star: f64,
    pub m: usize,
    pub c: f64,
    pub final_m: usize,
    pub final_c: f64,
    pub seed: u64,
    pub episode_action_budget: usize,
    /// Merge consecutive collinear pushes that chain end to start.
    pub concat_pushes: bool,
    /// Largest angle between merged push directions, degrees.
    pub concat_angle_deg: f64,
    /// Largest distance between one push's end and the next one's start, cm.
    pub concat_gap_cm: f64,
    /// Keep only the first k actions of every state's action space.
    pub max_actions_per_state: Option<usize>,
    pub greedy_tie_break: TieBreak,
    /// Record per-iteration traces (needed for JSON-lines output).
    pub record_trace: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            n_max: 150,
            gamma: 0.8,
            d_star: 4,
            r_g_star: 0.8,
            r_gp_star: 1.0,
            m: 3,
            c: 2.0,
            final_m: 1,
            final_c: 0.0,
            seed: 0,
            episode_action_budget: 15,
            concat_pushes: true,
            concat_angle_deg: 1.0,
            concat_gap_cm: 1.0,
            max_actions_per_state: None,
            greedy_tie_break: TieBreak::Random,
            record_trace: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if self.m == 0 || self.final_m == 0 {
            return bad("m and final_m must be at least 1");
        }
        if self.d_star == 0 {
            return bad("d_star must be at least 1");
        }
        for (name, t) in [("r_g_star", self.r_g_star), ("r_gp_star", self.r_gp_star)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(PlannerError::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.c >= 0.0 && self.final_c >= 0.0) {
            return bad("exploration weights must be non-negative");
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1");
        }
        if self.episode_action_budget == 0 {
            return bad("episode_action_budget must be at least 1");
        }
        if self.max_actions_per_state == Some(0) {
            return bad("max_actions_per_state must be at least 1");
        }
        Ok(())
    }
}

/// Candidate contact points and inward directions for one object: four
/// feature-axis pushes, then eight evenly spaced contour pushes.
fn push_candidates(scene: &Scene, k: usize) -> Vec<(Vec2, Vec2)> {
    let poly = scene.footprint(k);
    let center = poly.centroid();
    let axis = principal_axis(poly);
    let mut out = Vec::with_capacity(PUSHES_PER_OBJECT);
    for ray in [axis, -axis, axis.perp(), -axis.perp()] {
        if let Some(contact) = poly.ray_exit(center, ray) {
            out.push((contact, -ray));
        }
    }
    for (p, _) in contour_points(poly, CONTOUR_PUSHES) {
        if let Some(dir) = (center - p).normalized() {
            out.push((p, dir));
        }
    }
    out
}

/// Object indices ordered by id.
fn id_order(scene: &Scene) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scene.len()).collect();
    idx.sort_by(|a, b| scene.spec(*a).id.cmp(&scene.spec(*b).id));
    idx
}

/// All reachable pushes in deterministic order: objects by id, axis pushes
/// before contour pushes. Candidates without a collision-free start are dropped.
pub fn sample_action_space(scene: &Scene, sim: &SimParams) -> Vec<PushAction> {
    let mut out = Vec::new();
    for k in id_order(scene) {
        for (contact, dir) in push_candidates(scene, k) {
            if let Some(a) = effective_push_action(scene, contact, dir, sim) {
                out.push(a);
            }
        }
    }
    out
}

/// Shared inputs of every planning call.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub cfg: &'a PlannerConfig,
    pub sim: &'a SimParams,
    pub grasp: &'a GraspEvaluator,
}

impl PlanContext<'_> {
    /// The action space, trimmed to `max_actions_per_state` when set.
    pub fn actions(&self, scene: &Scene) -> Vec<PushAction> {
        let mut a = sample_action_space(scene, self.sim);
        if let Some(k) = self.cfg.max_actions_per_state {
            a.truncate(k);
        }
        a
    }

    /// One action drawn uniformly from [`Self::actions`]. Without trimming the
    /// candidates are visited in random order and the first reachable one is
    /// returned, which has the same distribution without building the list.
    pub fn random_action<R: Rng>(&self, scene: &Scene, rng: &mut R) -> Option<PushAction> {
        if self.cfg.max_actions_per_state.is_some() {
            let a = self.actions(scene);
            return a.choose(rng).copied();
        }
        let mut cands: Vec<(Vec2, Vec2)> = (0..scene.len()).flat_map(|k| push_candidates(scene, k)).collect();
        cands.shuffle(rng);
        cands
            .into_iter()
            .find_map(|(p, d)| effective_push_action(scene, p, d, self.sim))
    }

    pub fn reward(&self, scene: &Scene) -> f64 {
        self.grasp.max_grasp_reward(scene).value
    }
}
