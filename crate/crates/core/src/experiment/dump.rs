//! Per-episode trajectory dumps and the replay check.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::{EpisodeConfig, PushEnv};
use crate::error::{CuraError, Result};
use crate::geometry::{step_kinematics, Action, Vec2, WorldState};

use super::eval::LoadedPolicy;

pub const TRACE_FILE: &str = "trace.txt";
pub const EXACT_TRACE_FILE: &str = "trace_exact.txt";
pub const ACTIONS_FILE: &str = "actions.txt";
pub const QUANTILES_FILE: &str = "quantiles.csv";
pub const MAPS_DIR: &str = "maps";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpSummary {
    pub steps: usize,
    pub success: bool,
    pub collision: bool,
    pub timeout: bool,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CuraError::io(path, e))
}

/// Runs one mean-action episode and writes:
/// - `trace.txt`: one world line (6 decimals) per state, followed by the six
///   weighted reward terms and the step reward (including any success
///   bonus) for the step that led into it
///   (zeros for the initial state), so it has `steps + 1` lines;
/// - `trace_exact.txt` and `actions.txt`: exact-precision states and
///   executed commands, for replay;
/// - `maps/map_XXXX.pgm`: the confidence map at each state;
/// - `quantiles.csv`: the collision-quantile vector of each observation.
pub fn dump_trajectory(policy: &LoadedPolicy, cfg: &EpisodeConfig, seed: u64, out_dir: &Path) -> Result<DumpSummary> {
    let maps = out_dir.join(MAPS_DIR);
    std::fs::create_dir_all(&maps).map_err(|e| CuraError::io(&maps, e))?;
    let mut env = PushEnv::new(
        cfg.clone(),
        policy.run.setup.reward,
        policy.run.setup.env,
        policy.encoder.clone(),
    )?;
    env.reset(seed);

    let nq = policy.agent.dce.n_quantiles();
    let mut trace = String::new();
    let mut exact = String::new();
    let mut actions = String::new();
    let mut quantiles = (0..nq).map(|k| format!("q{k}")).collect::<Vec<_>>().join(",");
    quantiles.push('\n');

    let record = |env: &PushEnv, terms: [f64; 6], total: f64, trace: &mut String, exact: &mut String, quantiles: &mut String| -> Result<()> {
        let step = env.steps();
        trace.push_str(&env.world().to_trace_line(Some(6)));
        for v in terms.iter().chain(std::iter::once(&total)) {
            write!(trace, " {v:.6}").unwrap();
        }
        trace.push('\n');
        exact.push_str(&env.world().to_trace_line(None));
        exact.push('\n');
        let q = policy.agent.dce.net.forward(&env.features())?;
        quantiles.push_str(&q.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        quantiles.push('\n');
        env.map().write_pgm(&maps.join(format!("map_{step:04}.pgm")))
    };

    record(&env, [0.0; 6], 0.0, &mut trace, &mut exact, &mut quantiles)?;
    let summary = loop {
        let a = policy.agent.policy.mean_action(&env.features())?;
        let r = env.step(&a)?;
        let c = r.action.as_array();
        writeln!(actions, "{:e} {:e} {:e} {:e}", c[0], c[1], c[2], c[3]).unwrap();
        record(&env, r.breakdown.terms, r.reward, &mut trace, &mut exact, &mut quantiles)?;
        if r.terminal() {
            break DumpSummary {
                steps: env.steps(),
                success: r.termination.success,
                collision: r.termination.collision,
                timeout: r.termination.timeout,
            };
        }
    };
    write(&out_dir.join(TRACE_FILE), &trace)?;
    write(&out_dir.join(EXACT_TRACE_FILE), &exact)?;
    write(&out_dir.join(ACTIONS_FILE), &actions)?;
    write(&out_dir.join(QUANTILES_FILE), &quantiles)?;
    Ok(summary)
}

fn parse_actions(text: &str) -> Result<Vec<Action>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CuraError::Trace {
                    line: i + 1,
                    reason: "bad number in action".into(),
                })?;
            if v.len() != 4 {
                return Err(CuraError::Trace {
                    line: i + 1,
                    reason: format!("expected 4 action values, found {}", v.len()),
                });
            }
            Ok(Action {
                base_velocity: Vec2::new(v[0], v[1]),
                pusher_velocity: Vec2::new(v[2], v[3]),
            })
        })
        .collect()
}

pub fn parse_trace(text: &str) -> Result<Vec<WorldState>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| WorldState::from_trace_line(l, i + 1))
        .collect()
}

fn state_gap(a: &WorldState, b: &WorldState) -> f64 {
    let mut m: f64 = 0.0;
    for (x, y) in [
        (a.base.x, b.base.x),
        (a.base.y, b.base.y),
        (a.base.yaw, b.base.yaw),
        (a.pusher.x, b.pusher.x),
        (a.pusher.y, b.pusher.y),
        (a.object.pose.x, b.object.pose.x),
        (a.object.pose.y, b.object.pose.y),
        (a.object.pose.yaw, b.object.pose.yaw),
        (a.sim_time, b.sim_time),
    ] {
        m = m.max((x - y).abs());
    }
    m
}

/// Re-simulates a dumped episode from its exact trace and actions. Each
/// recorded state is advanced with its action through the kinematics (with
/// the obstacles present after the step, since spawns happen between steps)
/// and compared to the next recorded state. Returns the largest deviation.
pub fn replay_deviation(dir: &Path, dt: f64, limits: &crate::geometry::KinematicLimits) -> Result<f64> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| CuraError::io(&p, e))
    };
    let states = parse_trace(&read(EXACT_TRACE_FILE)?)?;
    let actions = parse_actions(&read(ACTIONS_FILE)?)?;
    if states.len() != actions.len() + 1 {
        return Err(CuraError::Trace {
            line: states.len(),
            reason: format!("{} states for {} actions", states.len(), actions.len()),
        });
    }
    let mut worst: f64 = 0.0;
    for (i, a) in actions.iter().enumerate() {
        let mut next = step_kinematics(&states[i], a, dt, limits);
        next.obstacles = states[i + 1].obstacles.clone();
        worst = worst.max(state_gap(&next, &states[i + 1]));
        if !states[i].obstacles.iter().all(|o| states[i + 1].obstacles.contains(o)) {
            return Err(CuraError::Trace {
                line: i + 2,
                reason: "an obstacle disappeared".into(),
            });
        }
    }
    Ok(worst)
}
