use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PlanContext, PlannerError};
use crate::push_sim::{simulate_push, PushAction};
use crate::scene::{scene_hash, Scene};

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: Scene,
    pub incoming: Option<PushAction>,
    pub parent: Option<usize>,
    /// Visit count. At the root this counts completed iterations.
    pub n: u32,
    /// Back-propagated returns, one per visit (empty at the root).
    pub q: Vec<f64>,
    pub untried: Vec<PushAction>,
    pub children: Vec<usize>,
    pub depth: usize,
    /// Best grasp reward of `state`.
    pub reward: f64,
    /// Times this node was selected as a terminal leaf.
    pub leaf_visits: u32,
}

impl TreeNode {
    pub fn max_q(&self) -> Option<f64> {
        self.q.iter().copied().reduce(f64::max)
    }

    pub fn is_expandable(&self) -> bool {
        !self.untried.is_empty()
    }
}

/// Node arena; index 0 is the root and children are created in increasing order.
#[derive(Debug, Clone)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
}

impl SearchTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, node) in self.nodes.iter().enumerate() {
            let child_visits: u32 = node.children.iter().map(|c| self.nodes[*c].n).sum();
            let own = u32::from(id != 0) + node.leaf_visits;
            if node.n != child_visits + own {
                return Err(format!("node {id}: N = {} but children sum {child_visits} + {own}", node.n));
            }
            if id != 0 && node.n as usize != node.q.len() {
                return Err(format!("node {id}: N = {} but |Q| = {}", node.n, node.q.len()));
            }
            if node.q.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("node {id}: Q outside [0, 1]"));
            }
            for c in &node.children {
                let child = &self.nodes[*c];
                if child.depth != node.depth + 1 || child.parent != Some(id) {
                    return Err(format!("node {c}: bad depth or parent link"));
                }
                if let Some(a) = child.incoming {
                    if node.untried.contains(&a) {
                        return Err(format!("node {id}: tried action still untried"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Graphviz rendering: one box per node with visits, best return and reward.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph vft {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (id, n) in self.nodes.iter().enumerate() {
            let q = n.max_q().map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(
                s,
                "  n{id} [label=\"#{id} d={} N={} maxQ={q} R={:.0}\"{}];",
                n.depth,
                n.n,
                n.reward,
                if n.reward >= 1.0 { ", style=bold" } else { "" }
            );
        }
        for (id, n) in self.nodes.iter().enumerate() {
            for c in &n.children {
                if let Some(a) = self.nodes[*c].incoming {
                    let _ = writeln!(
                        s,
                        "  n{id} -> n{c} [label=\"({:.1},{:.1})->({:.1},{:.1})\"];",
                        a.start.x, a.start.y, a.end.x, a.end.y
                    );
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Sum of the `min(N, m)` largest returns divided by `min(N, m)`, plus
/// `c * sqrt(ln(parent_n) / N)`.
pub fn uct_value(q: &[f64], parent_n: u32, m: usize, c: f64) -> f64 {
    let n = q.len();
    assert!(n >= 1, "uct needs a visited child");
    let k = n.min(m);
    let mut sorted = q.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sorted[..k].iter().sum();
    let explore = if c == 0.0 {
        0.0
    } else {
        c * (f64::from(parent_n).ln() / n as f64).sqrt()
    };
    top / k as f64 + explore
}

pub fn uct(child: &TreeNode, parent: &TreeNode, m: usize, c: f64) -> f64 {
    uct_value(&child.q, parent.n, m, c)
}

/// One search iteration, as recorded for tracing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Node ids from the root to the expanded (or terminal) node.
    pub path: Vec<usize>,
    pub expanded: Option<PushAction>,
    /// Best grasp reward of each node on `path` (root included).
    pub path_rewards: Vec<f64>,
    /// Undiscounted best grasp reward of each simulated rollout state.
    pub rollout_rewards: Vec<f64>,
    /// `(node, value)` appended to Q, from the leaf upward.
    pub backprop: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: usize,
    pub nodes: usize,
    pub max_depth: usize,
    pub root_actions: usize,
    pub rollout_steps: usize,
    pub best_value: f64,
    pub best_visits: u32,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub action: PushAction,
    /// Best return of the chosen child (the final-selection score).
    pub value: f64,
    pub stats: SearchStats,
    pub tree: SearchTree,
    pub trace: Vec<IterationTrace>,
}

struct Search<'a, 'r, R> {
    ctx: PlanContext<'a>,
    rng: &'r mut R,
    tree: SearchTree,
    rollout_steps: usize,
}

impl<R: Rng> Search<'_, '_, R> {
    fn terminal(&self, pushes: usize, reward: f64) -> bool {
        pushes >= self.ctx.cfg.d_star || reward >= self.ctx.cfg.r_gp_star
    }

    fn make_node(&self, state: Scene, incoming: Option<PushAction>, parent: Option<usize>, depth: usize) -> TreeNode {
        let reward = self.ctx.reward(&state);
        let untried = if parent.is_some() && self.terminal(depth, reward) {
            Vec::new()
        } else {
            self.ctx.actions(&state)
        };
        TreeNode {
            state,
            incoming,
            parent,
            n: 0,
            q: Vec::new(),
            untried,
            children: Vec::new(),
            depth,
            reward,
            leaf_visits: 0,
        }
    }

    /// Descends by UCT through fully expanded nodes.
    fn select(&self) -> Vec<usize> {
        let cfg = self.ctx.cfg;
        let mut path = vec![0];
        loop {
            let node = &self.tree.nodes[*path.last().expect("path starts at root")];
            if node.is_expandable() || node.children.is_empty() {
                return path;
            }
            let mut best = node.children[0];
            let mut best_v = f64::NEG_INFINITY;
            for &c in &node.children {
                let v = uct(&self.tree.nodes[c], node, cfg.m, cfg.c);
                if v > best_v {
                    best_v = v;
                    best = c;
                }
            }
            path.push(best);
        }
    }

    fn iterate(&mut self, iteration: usize) -> Result<IterationTrace, PlannerError> {
        let mut path = self.select();
        let leaf = *path.last().expect("non-empty path");
        let mut expanded = None;
        let node_id = if self.tree.nodes[leaf].is_expandable() {
            let parent = &mut self.tree.nodes[leaf];
            let pick = self.rng.gen_range(0..parent.untried.len());
            let action = parent.untried.swap_remove(pick);
            let depth = parent.depth + 1;
            let next = simulate_push(&parent.state, &action, self.ctx.sim)?.scene_after;
            let child = self.make_node(next, Some(action), Some(leaf), depth);
            let id = self.tree.nodes.len();
            self.tree.nodes.push(child);
            self.tree.nodes[leaf].children.push(id);
            path.push(id);
            expanded = Some(action);
            id
        } else {
            self.tree.nodes[leaf].leaf_visits += 1;
            leaf
        };

        // rollout from the new node
        let cfg = self.ctx.cfg;
        let mut r: f64 = 0.0;
        let mut d: i32 = 1;
        let mut rollout_rewards = Vec::new();
        let start = &self.tree.nodes[node_id];
        let mut pushes = start.depth;
        let mut reward = start.reward;
        let mut state = start.state.clone();
        while !self.terminal(pushes, reward) {
            let Some(a) = self.ctx.random_action(&state, self.rng) else {
                break;
            };
            state = simulate_push(&state, &a, self.ctx.sim)?.scene_after;
            pushes += 1;
            reward = self.ctx.reward(&state);
            r = r.max(cfg.gamma.powi(d) * reward);
            d += 1;
            rollout_rewards.push(reward);
            self.rollout_steps += 1;
        }

        // back-propagation up to, not including, the root
        let mut backprop = Vec::new();
        let mut cur = node_id;
        while let Some(parent) = self.tree.nodes[cur].parent {
            let node = &mut self.tree.nodes[cur];
            node.n += 1;
            r = r.max(node.reward);
            node.q.push(r);
            backprop.push((cur, r));
            r *= cfg.gamma;
            cur = parent;
        }
        self.tree.nodes[0].n += 1;

        let path_rewards = path.iter().map(|id| self.tree.nodes[*id].reward).collect();
        Ok(IterationTrace {
            iteration,
            path,
            expanded,
            path_rewards,
            rollout_rewards,
            backprop,
        })
    }
}

/// Runs `cfg.n_max` iterations from `root` with an explicit generator and
/// returns the push leading to the root child with the best final-selection
/// score (ties to the earliest-created child).
pub fn search_with<R: Rng>(root: &Scene, ctx: PlanContext<'_>, rng: &mut R) -> Result<SearchResult, PlannerError> {
    ctx.cfg.validate()?;
    let cfg = ctx.cfg;
    let mut s = Search {
        ctx,
        rng,
        tree: SearchTree { nodes: Vec::new() },
        rollout_steps: 0,
    };
    let root_node = s.make_node(root.clone(), None, None, 0);
    if root_node.untried.is_empty() {
        return Err(PlannerError::NoActions);
    }
    let root_actions = root_node.untried.len();
    s.tree.nodes.push(root_node);
    let mut trace = Vec::new();
    for i in 0..cfg.n_max {
        let t = s.iterate(i)?;
        if cfg.record_trace {
            trace.push(t);
        }
    }
    let tree = s.tree;
    let root = tree.root();
    let mut best: Option<(usize, f64)> = None;
    for &c in &root.children {
        let v = uct(&tree.nodes[c], root, cfg.final_m, cfg.final_c);
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((c, v));
        }
    }
    let (best_id, _) = best.expect("at least one iteration expands the root");
    let best_node = &tree.nodes[best_id];
    let stats = SearchStats {
        iterations: cfg.n_max,
        nodes: tree.nodes.len(),
        max_depth: tree.nodes.iter().map(|n| n.depth).max().unwrap_or(0),
        root_actions,
        rollout_steps: s.rollout_steps,
        best_value: best_node.max_q().unwrap_or(0.0),
        best_visits: best_node.n,
    };
    Ok(SearchResult {
        action: best_node.incoming.expect("child has an action"),
        value: stats.best_value,
        stats,
        tree,
        trace,
    })
}

/// [`search_with`] seeded from `cfg.seed`.
pub fn mcts_search(root: &Scene, ctx: PlanContext<'_>) -> Result<SearchResult, PlannerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    search_with(root, ctx, &mut rng)
}

impl SearchResult {
    /// Iteration traces as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.trace {
            out.push_str(&serde_json::to_string(t).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn root_hash(&self) -> crate::scene::SceneHash {
        scene_hash(&self.tree.root().state)
    }
}
