//! Plain-text episode traces for determinism audits.
//!
//! A trace is a pure function of `(agent, level, difficulty, seed, config)`
//! and prints floats with Rust's shortest-roundtrip formatting, so two runs
//! of the same episode must produce byte-identical strings. Line format:
//!
//! ```text
//! towerbench trace v1
//! level <id> rows <r> difficulty <d> seed <s> agent <name>
//! reset tick <t> sun <sun> reward <r> mask <5 bits>
//! step <i> action <a> tick <t> sun <sun> reward <r> enemies <n> plants <n> mask <5 bits>
//! end outcome <won|lost|ongoing> timeout <0|1> decisions <n> reward <total>
//! ```
//!
//! The `step` line shows the state after the action's decision window; the
//! final `step` line omits the mask (terminal states have none). Seeds
//! split exactly as in `run_episode`, so a trace narrates the same episode
//! that evaluation scores.

use std::fmt::Write as _;

use towerbench_core::rng::{derive_seed, seeded_rng};
use towerbench_core::sim::{GameState, Outcome};
use towerbench_core::{select_action, Agent, Env, EnvConfig, LevelDef, LevelError, COLS};

fn agent_name(agent: &Agent) -> &'static str {
    match agent {
        Agent::Hrl { stochastic: false, .. } => "hrl",
        Agent::Hrl { stochastic: true, .. } => "hrl-stochastic",
        Agent::Hai => "hai",
        Agent::Random => "random",
    }
}

fn mask_bits(mask: &[bool]) -> String {
    mask.iter().map(|&m| if m { '1' } else { '0' }).collect()
}

fn plant_count(state: &GameState) -> usize {
    let rows = state.level().rows as usize;
    (0..rows)
        .flat_map(|r| (0..COLS).map(move |c| (r, c)))
        .filter(|&(r, c)| state.cell(r, c).occupant.is_some())
        .count()
}

fn outcome_name(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Won => "won",
        Outcome::Lost => "lost",
        Outcome::Ongoing => "ongoing",
    }
}

/// Renders one full episode as a text trace.
pub fn episode_trace(
    agent: &Agent,
    level: &LevelDef,
    difficulty: u32,
    seed: u64,
    config: EnvConfig,
) -> Result<String, LevelError> {
    // Seed split mirrors run_episode so the trace narrates the episode
    // evaluation would score under the same seed.
    let env_seed = derive_seed(seed, &[0]);
    let agent_seed = derive_seed(seed, &[1]);
    let mut rng = seeded_rng(agent_seed);
    let (mut env, mut step) = Env::reset(level, difficulty, env_seed, config)?;
    let mut out = String::new();
    out.push_str("towerbench trace v1\n");
    let _ = writeln!(
        out,
        "level {} rows {} difficulty {} seed {} agent {}",
        level.id,
        level.rows,
        difficulty,
        seed,
        agent_name(agent)
    );
    let _ = writeln!(
        out,
        "reset tick {} sun {} reward {} mask {}",
        env.state().tick_count(),
        env.state().sun(),
        step.reward,
        mask_bits(&step.mask)
    );
    let mut total_reward = step.reward;
    let mut decisions = 0u32;
    while !step.terminal {
        let action = select_action(agent, &env, &step, &mut rng);
        step = env.step(action).expect("trace only picks legal actions");
        total_reward += step.reward;
        decisions += 1;
        let _ = write!(
            out,
            "step {} action {} tick {} sun {} reward {} enemies {} plants {}",
            decisions,
            action,
            env.state().tick_count(),
            env.state().sun(),
            step.reward,
            env.state().enemies().len(),
            plant_count(env.state())
        );
        if step.terminal {
            out.push('\n');
        } else {
            let _ = writeln!(out, " mask {}", mask_bits(&step.mask));
        }
    }
    let _ = writeln!(
        out,
        "end outcome {} timeout {} decisions {} reward {}",
        outcome_name(env.state().outcome()),
        env.timed_out() as u8,
        decisions,
        total_reward
    );
    Ok(out)
}
