use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use vft_core::bench::{gen_suite, load_suite, run_bench, summary_table, write_suite, Scenario, SuiteKind};
use vft_core::grasp::{GraspEvaluator, GripperSpec};
use vft_core::planner::{mcts_search, run_episode, ActionRecord, PlanContext, PlannerConfig, PlannerKind, TieBreak};
use vft_core::push_sim::SimParams;
use vft_core::scene::{load_scenario, render_svg, Annotation, Scene};

#[derive(Parser, Debug)]
#[command(name = "vft", version, about = "Tree search over imagined pushes for retrieving a target from clutter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a certified scenario suite as JSON files.
    GenSuite {
        #[arg(long, value_parser = parse_kind)]
        kind: SuiteKind,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run one search on a scene and print the chosen push and its value.
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write per-iteration traces as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the search tree in Graphviz DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run a full retrieval episode on a scene.
    RunEpisode {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "vft", value_parser = parse_planner)]
        planner: PlannerKind,
        #[arg(long)]
        seed: Option<u64>,
        /// Write frame_0000.svg, frame_0001.svg, ... one per counted action plus the start.
        #[arg(long)]
        render_dir: Option<PathBuf>,
        /// Write the episode log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run seeded episodes over a suite and write a CSV of results.
    Bench {
        /// Directory of scenario files, or a suite kind to generate.
        #[arg(long)]
        suite: String,
        /// Scenarios to generate when --suite names a kind.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// vft, greedy, or both.
        #[arg(long, default_value = "vft")]
        planner: String,
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
        repeats: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render a scene as SVG.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also draw the best grasp, if any.
        #[arg(long)]
        grasp: bool,
        /// Write the grasp reward map as a PGM heat map.
        #[arg(long)]
        reward_map: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_kind(s: &str) -> Result<SuiteKind, String> {
    s.parse()
}

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    s.parse()
}

fn parse_tie_break(s: &str) -> Result<TieBreak, String> {
    match s {
        "first" => Ok(TieBreak::First),
        "random" => Ok(TieBreak::Random),
        other => Err(format!("unknown tie break '{other}' (expected first or random)")),
    }
}

/// Every tunable parameter; flags override values from `--config`.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON file with optional "planner", "sim" and "gripper" sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    d_star: Option<usize>,
    #[arg(long)]
    r_g_star: Option<f64>,
    #[arg(long)]
    r_gp_star: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    final_m: Option<usize>,
    #[arg(long)]
    final_c: Option<f64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    concat_pushes: Option<bool>,
    #[arg(long)]
    concat_angle_deg: Option<f64>,
    #[arg(long)]
    concat_gap_cm: Option<f64>,
    #[arg(long)]
    max_actions_per_state: Option<usize>,
    #[arg(long, value_parser = parse_tie_break)]
    greedy_tie_break: Option<TieBreak>,
    #[arg(long)]
    substep: Option<f64>,
    #[arg(long)]
    rotation_gain: Option<f64>,
    #[arg(long)]
    max_resolve_iters: Option<usize>,
    #[arg(long)]
    eps_contact: Option<f64>,
    #[arg(long)]
    pusher_width: Option<f64>,
    #[arg(long)]
    pusher_depth: Option<f64>,
    #[arg(long)]
    max_opening: Option<f64>,
    #[arg(long)]
    finger_thickness: Option<f64>,
    #[arg(long)]
    finger_width: Option<f64>,
    #[arg(long)]
    clearance: Option<f64>,
    /// Grasp grid resolution per side.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    planner: PlannerConfig,
    sim: SimParams,
    gripper: GripperSpec,
    grid: Option<usize>,
}

struct Setup {
    cfg: PlannerConfig,
    sim: SimParams,
    grasp: GraspEvaluator,
}

impl Setup {
    fn ctx(&self) -> PlanContext<'_> {
        PlanContext { cfg: &self.cfg, sim: &self.sim, grasp: &self.grasp }
    }
}

macro_rules! apply {
    ($dst:expr, $src:expr, $($field:ident),+) => {
        $(if let Some(v) = $src.$field { $dst.$field = v; })+
    };
}

impl ConfigArgs {
    fn resolve(&self, seed: Option<u64>) -> Result<Setup> {
        let mut file = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => ConfigFile::default(),
        };
        let cfg = &mut file.planner;
        apply!(cfg, self, n_max, gamma, d_star, r_g_star, r_gp_star, m, c, final_m, final_c);
        apply!(cfg, self, concat_pushes, concat_angle_deg, concat_gap_cm, greedy_tie_break);
        if let Some(b) = self.budget {
            cfg.episode_action_budget = b;
        }
        if self.max_actions_per_state.is_some() {
            cfg.max_actions_per_state = self.max_actions_per_state;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let sim = &mut file.sim;
        apply!(sim, self, substep, rotation_gain, max_resolve_iters, eps_contact);
        if let Some(w) = self.pusher_width {
            sim.gripper.width = w;
        }
        if let Some(d) = self.pusher_depth {
            sim.gripper.depth = d;
        }
        let g = &mut file.gripper;
        apply!(g, self, max_opening, finger_thickness, finger_width, clearance);
        file.planner.validate()?;
        file.sim.validate()?;
        file.gripper.validate()?;
        let grid = self.grid.or(file.grid).unwrap_or(vft_core::scene::GRID_CELLS);
        if grid == 0 {
            bail!("--grid must be at least 1");
        }
        Ok(Setup { cfg: file.planner, sim: file.sim, grasp: GraspEvaluator::with_grid(file.gripper, grid) })
    }
}

fn read_scene(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_scenario(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn planners(arg: &str) -> Result<Vec<PlannerKind>> {
    if arg == "both" {
        return Ok(vec![PlannerKind::Vft, PlannerKind::Greedy]);
    }
    arg.split(',').map(|p| p.parse::<PlannerKind>().map_err(anyhow::Error::msg)).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSuite { kind, count, seed, out, config } => {
            let setup = config.resolve(None)?;
            let suite = gen_suite(kind, count as usize, seed, &setup.grasp, &setup.sim)?;
            for p in write_suite(&out, &suite)? {
                println!("{}", p.display());
            }
        }
        Command::Plan { scene, seed, trace, dot, config } => {
            let mut setup = config.resolve(seed)?;
            setup.cfg.record_trace |= trace.is_some();
            let scene = read_scene(&scene)?;
            let reward = setup.grasp.max_grasp_reward(&scene);
            let result = mcts_search(&scene, setup.ctx())?;
            let a = result.action;
            println!(
                "push {:.3} {:.3} -> {:.3} {:.3} value {:.6}",
                a.start.x, a.start.y, a.end.x, a.end.y, result.value
            );
            println!("current grasp reward {:.1}", reward.value);
            println!("{}", serde_json::to_string(&result.stats)?);
            if let Some(p) = trace {
                fs::write(&p, result.trace_jsonl()).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = dot {
                fs::write(&p, result.tree.to_dot()).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::RunEpisode { scene, planner, seed, render_dir, log, config } => {
            let setup = config.resolve(seed)?;
            let id = scene.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let scene = read_scene(&scene)?;
            let episode = run_episode(&id, &scene, setup.ctx(), planner)?;
            for (k, r) in episode.records.iter().enumerate() {
                match &r.action {
                    ActionRecord::Push { action, merged } => println!(
                        "{k:3} push {:.2} {:.2} -> {:.2} {:.2}{}",
                        action.start.x,
                        action.start.y,
                        action.end.x,
                        action.end.y,
                        if *merged { " (merged)" } else { "" }
                    ),
                    ActionRecord::Grasp { grasp, success } => println!(
                        "{k:3} grasp cell ({}, {}) theta {} {}",
                        grasp.i,
                        grasp.j,
                        grasp.theta_index,
                        if *success { "ok" } else { "failed" }
                    ),
                }
            }
            println!("outcome {} actions {}", episode.outcome.name(), episode.action_count);
            if let Some(dir) = render_dir {
                render_frames(&dir, &episode, setup.grasp.spec(), setup.grasp.grid())?;
            }
            if let Some(p) = log {
                fs::write(&p, serde_json::to_string_pretty(&episode)?).with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Bench { suite, count, planner, repeats, seed, out, config } => {
            let setup = config.resolve(Some(seed))?;
            let planners = planners(&planner)?;
            let scenarios: Vec<Scenario> = if Path::new(&suite).is_dir() {
                load_suite(Path::new(&suite))?
            } else {
                let kind: SuiteKind = suite
                    .parse()
                    .map_err(|e: String| anyhow::anyhow!("--suite: {e}, and no such directory"))?;
                gen_suite(kind, count, seed, &setup.grasp, &setup.sim)?
            };
            let file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let report = run_bench(&scenarios, &planners, repeats as usize, &setup.cfg, &setup.sim, &setup.grasp, file)?;
            print!("{}", summary_table(&report));
        }
        Command::Render { scene, out, grasp, reward_map, config } => {
            let setup = config.resolve(None)?;
            let scene = read_scene(&scene)?;
            let mut notes = Vec::new();
            let best = setup.grasp.max_grasp_reward(&scene);
            if grasp {
                if let Some(g) = best.best {
                    notes.push(grasp_note(&scene, g, setup.grasp.spec(), setup.grasp.grid()));
                }
            }
            fs::write(&out, render_svg(&scene, &notes)).with_context(|| format!("writing {}", out.display()))?;
            if let Some(p) = reward_map {
                let mut f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                setup.grasp.reward_map(&scene).write_pgm(&mut f)?;
                f.flush()?;
            }
            println!("grasp reward {:.1}", best.value);
        }
    }
    Ok(())
}

fn grasp_note(scene: &Scene, g: vft_core::grasp::GraspAction, spec: &GripperSpec, grid: usize) -> Annotation {
    Annotation::Grasp { center: g.center(scene.workspace(), grid), theta: g.theta(), opening: spec.max_opening }
}

fn render_frames(dir: &Path, episode: &vft_core::planner::EpisodeLog, spec: &GripperSpec, grid: usize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    // the action that produced each counted frame; merged pushes extend the previous one
    let mut notes: Vec<Vec<Annotation>> = vec![Vec::new()];
    for r in &episode.records {
        let before = &episode.frames[notes.len() - 1];
        let note = match &r.action {
            ActionRecord::Push { action, .. } => Annotation::Push { start: action.start, end: action.end },
            ActionRecord::Grasp { grasp, .. } => grasp_note(before, *grasp, spec, grid),
        };
        match &r.action {
            ActionRecord::Push { merged: true, .. } => notes.last_mut().expect("non-empty").push(note),
            _ => notes.push(vec![note]),
        }
    }
    for (k, scene) in episode.frames.iter().enumerate() {
        let mut a = notes.get(k).cloned().unwrap_or_default();
        a.push(Annotation::Label {
            at: vft_core::geometry::Vec2::new(1.0, scene.workspace() - 1.5),
            text: if k == 0 { format!("{} start", episode.scenario) } else { format!("action {k}") },
        });
        let path = dir.join(format!("frame_{k:04}.svg"));
        fs::write(&path, render_svg(scene, &a)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} frames to {}", episode.frames.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
