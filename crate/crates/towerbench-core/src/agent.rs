//! Episode runner shared by every evaluated controller.
//!
//! The three controller families pick among the same five actions at the
//! same decision points, so a single loop runs them all: the learned policy
//! (stochastic for training-style rollouts, argmax for evaluation), the
//! handcrafted priority controller, and the uniform-random baseline.

use rand::Rng;

use crate::env::{DecisionStep, Env, EnvConfig, ACTION_COUNT, NOOP_ACTION};
use crate::level::{LevelDef, LevelError};
use crate::ppo::{argmax_action, masked_probs, sample_action, Mlp};
use crate::rng::{derive_seed, seeded_rng};
use crate::sim::Outcome;
use crate::strategy::hai_select;

/// A controller that picks one action per decision point.
#[derive(Debug, Clone, Copy)]
pub enum Agent<'a> {
    /// Learned policy. `stochastic` samples the masked softmax; otherwise
    /// the highest-logit legal action runs (ties to the lower index).
    Hrl {
        /// Trained policy network.
        actor: &'a Mlp,
        /// Sample instead of argmax.
        stochastic: bool,
    },
    /// Handcrafted priority controller.
    Hai,
    /// Uniform choice over the legal actions.
    Random,
}

/// Everything measured over one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// The simulator declared a win.
    pub win: bool,
    /// The episode ended by exhausting the tick budget.
    pub timed_out: bool,
    /// Sum of every step reward, terminal bonus included.
    pub total_reward: f64,
    /// Decisions taken (fast-forwarded windows excluded).
    pub decisions: u32,
    /// Tick count when the episode ended.
    pub final_tick: u32,
    /// Enemies destroyed.
    pub kills: u32,
    /// Enemy cell-advances.
    pub advanced: u32,
    /// How often each action index was chosen.
    pub action_counts: [u32; ACTION_COUNT],
}

/// Picks `agent`'s next action for the current decision step.
///
/// Deterministic controllers leave `rng` untouched, so the agent stream
/// advances identically whether or not randomness is ever consumed.
pub fn select_action(
    agent: &Agent,
    env: &Env,
    step: &DecisionStep,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> usize {
    match agent {
        Agent::Hrl { actor, stochastic } => {
            let logits: [f64; ACTION_COUNT] =
                actor.forward(&step.observation).try_into().expect("actor head width");
            if *stochastic {
                let probs = masked_probs(&logits, &step.mask);
                sample_action(&probs, rng)
            } else {
                argmax_action(&logits, &step.mask)
            }
        }
        Agent::Hai => match hai_select(env.state()) {
            Some(kind) => kind.index(),
            None => NOOP_ACTION,
        },
        Agent::Random => {
            let count = step.mask.iter().filter(|&&m| m).count();
            let mut pick = rng.random_range(0..count);
            let mut chosen = NOOP_ACTION;
            for (a, &m) in step.mask.iter().enumerate() {
                if m {
                    if pick == 0 {
                        chosen = a;
                        break;
                    }
                    pick -= 1;
                }
            }
            chosen
        }
    }
}

/// Runs one full episode of `agent` on `level` at `difficulty`.
///
/// The environment and the agent draw from independent streams derived
/// from `seed`, so HAI (which draws nothing) sees the same episode as a
/// learned policy would under the same seed.
pub fn run_episode(
    agent: &Agent,
    level: &LevelDef,
    difficulty: u32,
    seed: u64,
    config: EnvConfig,
) -> Result<EpisodeRecord, LevelError> {
    let env_seed = derive_seed(seed, &[0]);
    let agent_seed = derive_seed(seed, &[1]);
    let mut rng = seeded_rng(agent_seed);
    let (mut env, mut step) = Env::reset(level, difficulty, env_seed, config)?;
    let mut record = EpisodeRecord {
        win: false,
        timed_out: false,
        total_reward: step.reward,
        decisions: 0,
        final_tick: 0,
        kills: 0,
        advanced: 0,
        action_counts: [0; ACTION_COUNT],
    };
    while !step.terminal {
        let action = select_action(agent, &env, &step, &mut rng);
        step = env.step(action).expect("agents only pick legal actions");
        record.total_reward += step.reward;
        record.decisions += 1;
        record.action_counts[action] += 1;
    }
    record.win = env.state().outcome() == Outcome::Won;
    record.timed_out = env.timed_out();
    record.final_tick = env.state().tick_count();
    let (kills, advanced) = env.totals();
    record.kills = kills;
    record.advanced = advanced;
    Ok(record)
}
