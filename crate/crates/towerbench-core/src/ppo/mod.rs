//! Proximal policy optimization over the decision-point environment.
//!
//! The learner is a from-scratch actor-critic: two [`Mlp`]s in `f64`, a
//! clipped-surrogate policy loss with entropy bonus, GAE(lambda) advantages
//! computed per finished episode with a zero terminal bootstrap, advantage
//! normalization per update, and Adam. Rollouts hold whole episodes; an
//! update fires at the first episode boundary at or past
//! [`TrainConfig::rollout_size`] transitions.
//!
//! Every random draw (init, action sampling, level choice, minibatch
//! shuffling, per-episode environment seeds) flows through streams derived
//! from the master seed, so a training run is a pure function of
//! `(levels, difficulty, config, seed)`.

pub mod checkpoint;
pub mod gae;
pub mod nn;

pub use checkpoint::{
    config_hash, decode_checkpoint, encode_checkpoint, Checkpoint, CheckpointError,
};
pub use gae::{compute_gae, GaeLengthMismatch, GaeResult};
pub use nn::{
    argmax_action, masked_entropy, masked_log_probs, masked_probs, sample_action, Adam, Mlp,
    MlpGrads,
};

use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{ActionMask, Env, EnvConfig, Observation, ACTION_COUNT, OBS_WIDTH};
use crate::level::{LevelDef, LevelError};
use crate::rng::{derive_seed, seeded_rng};
use crate::sim::Outcome;

/// All training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Discount factor.
    pub gamma: f64,
    /// GAE smoothing factor.
    pub lam: f64,
    /// Clipped-surrogate radius.
    pub clip: f64,
    /// Adam step size for both networks.
    pub learning_rate: f64,
    /// Optimization epochs per update.
    pub epochs: u32,
    /// Minibatch size within an update.
    pub minibatch_size: usize,
    /// Transitions gathered before an update (episodes are never split).
    pub rollout_size: usize,
    /// Entropy bonus coefficient.
    pub entropy_coef: f64,
    /// Value loss coefficient.
    pub value_coef: f64,
    /// Episodes to train for.
    pub total_episodes: u32,
    /// Width of both hidden layers.
    pub hidden_size: usize,
    /// Episodes per learning-curve point.
    pub curve_interval: u32,
    /// Environment reward and pacing parameters.
    pub env: EnvConfig,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            gamma: 0.99,
            lam: 0.95,
            clip: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch_size: 256,
            rollout_size: 4096,
            entropy_coef: 0.01,
            value_coef: 0.5,
            total_episodes: 200,
            hidden_size: 64,
            curve_interval: 50,
            env: EnvConfig::default(),
        }
    }
}

/// One collected decision during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Observation the action was chosen on.
    pub observation: Observation,
    /// Action mask at that decision.
    pub mask: ActionMask,
    /// Chosen action index.
    pub action: usize,
    /// Log-probability of the chosen action at collection time.
    pub log_prob: f64,
    /// Reward returned by the step (terminal bonus included).
    pub reward: f64,
    /// Critic's value estimate at that decision.
    pub value: f64,
}

/// A training sample after advantage estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoSample {
    /// Observation the action was chosen on.
    pub observation: Observation,
    /// Action mask at that decision.
    pub mask: ActionMask,
    /// Chosen action index.
    pub action: usize,
    /// Collection-time log-probability of the action.
    pub old_log_prob: f64,
    /// GAE advantage (normalized inside [`ppo_update`]).
    pub advantage: f64,
    /// Value target (advantage plus collection-time value).
    pub value_target: f64,
}

/// Accumulates finished episodes as ready-to-train samples.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    samples: Vec<PpoSample>,
}

impl RolloutBuffer {
    /// An empty buffer.
    pub fn new() -> RolloutBuffer {
        RolloutBuffer { samples: Vec::new() }
    }

    /// Transitions buffered so far.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when no transitions are buffered.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Runs GAE over one complete episode and buffers its samples.
    pub fn push_episode(&mut self, episode: &[Transition], gamma: f64, lam: f64) {
        let rewards: Vec<f64> = episode.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = episode.iter().map(|t| t.value).collect();
        let out = compute_gae(&rewards, &values, gamma, lam)
            .expect("rewards and values come from the same episode");
        for (t, (adv, ret)) in
            episode.iter().zip(out.advantages.iter().zip(out.returns.iter()))
        {
            self.samples.push(PpoSample {
                observation: t.observation,
                mask: t.mask,
                action: t.action,
                old_log_prob: t.log_prob,
                advantage: *adv,
                value_target: *ret,
            });
        }
    }

    /// Takes every buffered sample, leaving the buffer empty.
    pub fn take(&mut self) -> Vec<PpoSample> {
        core::mem::take(&mut self.samples)
    }
}

/// Aggregate statistics of one update (or one loss evaluation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean clipped-surrogate policy loss.
    pub policy_loss: f64,
    /// Mean squared value error.
    pub value_loss: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// Fraction of samples whose ratio left the clip interval.
    pub clip_fraction: f64,
}

/// Training failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PpoError {
    /// A loss or gradient stopped being finite.
    NonFiniteLoss,
    /// No levels were given to train on.
    NoLevels,
    /// A level rejected the requested difficulty.
    Level(LevelError),
}

impl fmt::Display for PpoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PpoError::NonFiniteLoss => write!(f, "loss diverged to a non-finite value"),
            PpoError::NoLevels => write!(f, "no levels to train on"),
            PpoError::Level(e) => write!(f, "level error: {e}"),
        }
    }
}

impl core::error::Error for PpoError {}

impl From<LevelError> for PpoError {
    fn from(e: LevelError) -> PpoError {
        PpoError::Level(e)
    }
}

/// One point of the learning curve: trailing-window means at an episode
/// count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Episodes completed when the point was taken.
    pub episode: u32,
    /// Mean episode reward over the window.
    pub mean_reward: f64,
    /// Win fraction over the window.
    pub success_rate: f64,
}

/// A finished training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    /// Trained policy network.
    pub actor: Mlp,
    /// Trained value network.
    pub critic: Mlp,
    /// Learning curve, one point per [`TrainConfig::curve_interval`]
    /// episodes.
    pub curve: Vec<CurvePoint>,
    /// Episodes actually run.
    pub episodes: u32,
    /// Gradient updates performed.
    pub updates: u32,
}

/// Shared loss/gradient pass. Accumulation order is fixed by batch order,
/// so the loss is bit-identical with and without gradients.
fn batch_pass(
    actor: &Mlp,
    critic: &Mlp,
    batch: &[PpoSample],
    config: &TrainConfig,
    mut grads: Option<(&mut MlpGrads, &mut MlpGrads)>,
) -> (f64, UpdateStats) {
    assert!(!batch.is_empty(), "empty minibatch");
    let n = batch.len() as f64;
    let inv_n = 1.0 / n;
    let mut obj_sum = 0.0;
    let mut value_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut clipped = 0usize;
    for s in batch {
        let actor_cache = actor.forward_cached(&s.observation);
        let critic_cache = critic.forward_cached(&s.observation);
        let logits: [f64; ACTION_COUNT] = actor_cache.acts[actor.layer_count()]
            .as_slice()
            .try_into()
            .expect("actor head width");
        let log_probs = masked_log_probs(&logits, &s.mask);
        let probs = {
            let mut p = [0.0; ACTION_COUNT];
            for a in 0..ACTION_COUNT {
                if s.mask[a] {
                    p[a] = libm::exp(log_probs[a]);
                }
            }
            p
        };
        let entropy = masked_entropy(&log_probs);
        let ratio = libm::exp(log_probs[s.action] - s.old_log_prob);
        let unclipped = ratio * s.advantage;
        let clamped = ratio.clamp(1.0 - config.clip, 1.0 + config.clip);
        let clipped_obj = clamped * s.advantage;
        // min() selects the pessimistic surrogate; gradient flows only
        // through the unclipped branch.
        let (obj, dobj_dlogp) = if unclipped <= clipped_obj {
            (unclipped, unclipped)
        } else {
            (clipped_obj, 0.0)
        };
        if (ratio - 1.0).abs() > config.clip {
            clipped += 1;
        }
        let value = critic_cache.acts[critic.layer_count()][0];
        let verr = value - s.value_target;
        obj_sum += obj;
        value_sum += verr * verr;
        entropy_sum += entropy;
        if let Some((ga, gc)) = grads.as_mut() {
            let mut dlogits = [0.0; ACTION_COUNT];
            for a in 0..ACTION_COUNT {
                if !s.mask[a] {
                    continue;
                }
                let indicator = if a == s.action { 1.0 } else { 0.0 };
                // d(-obj)/dl + d(-entropy_coef * H)/dl, divided by n.
                dlogits[a] = inv_n
                    * (-dobj_dlogp * (indicator - probs[a])
                        + config.entropy_coef * probs[a] * (log_probs[a] + entropy));
            }
            actor.backward(&actor_cache, &dlogits, ga);
            let dvalue = [inv_n * config.value_coef * 2.0 * verr];
            critic.backward(&critic_cache, &dvalue, gc);
        }
    }
    let policy_loss = -obj_sum * inv_n;
    let value_loss = value_sum * inv_n;
    let entropy = entropy_sum * inv_n;
    let loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy;
    let stats = UpdateStats {
        policy_loss,
        value_loss,
        entropy,
        clip_fraction: clipped as f64 * inv_n,
    };
    (loss, stats)
}

/// Total PPO loss of a batch under the current networks.
pub fn ppo_loss(
    actor: &Mlp,
    critic: &Mlp,
    batch: &[PpoSample],
    config: &TrainConfig,
) -> (f64, UpdateStats) {
    batch_pass(actor, critic, batch, config, None)
}

/// Loss plus parameter gradients of a batch. The loss equals
/// [`ppo_loss`] on the same inputs bit for bit.
pub fn ppo_grads(
    actor: &Mlp,
    critic: &Mlp,
    batch: &[PpoSample],
    config: &TrainConfig,
) -> (f64, UpdateStats, MlpGrads, MlpGrads) {
    let mut ga = MlpGrads::zeros_like(actor);
    let mut gc = MlpGrads::zeros_like(critic);
    let (loss, stats) = batch_pass(actor, critic, batch, config, Some((&mut ga, &mut gc)));
    (loss, stats, ga, gc)
}

/// One full PPO update over a rollout: advantage normalization, then
/// `epochs` passes of shuffled minibatches through Adam.
///
/// Advantages are normalized once over the whole rollout;
/// the divisor is floored at `1e-8`. Returns the stats averaged over all
/// minibatch steps. Fails without touching determinism if any minibatch
/// loss or gradient goes non-finite (parameters may be mid-update then).
pub fn ppo_update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    adam_actor: &mut Adam,
    adam_critic: &mut Adam,
    rollout: &[PpoSample],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, PpoError> {
    assert!(!rollout.is_empty(), "empty rollout");
    assert!(config.minibatch_size > 0, "minibatch size must be positive");
    let n = rollout.len() as f64;
    let mean = rollout.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = rollout.iter().map(|s| (s.advantage - mean) * (s.advantage - mean)).sum::<f64>() / n;
    let denom = libm::sqrt(var).max(1e-8);
    let normalized: Vec<PpoSample> = rollout
        .iter()
        .map(|s| PpoSample { advantage: (s.advantage - mean) / denom, ..*s })
        .collect();

    let mut indices: Vec<usize> = (0..rollout.len()).collect();
    let mut stat_sum = (0.0, 0.0, 0.0);
    let mut clipped_weight = 0.0;
    let mut steps = 0u32;
    let mut minibatch = Vec::with_capacity(config.minibatch_size);
    for _ in 0..config.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch_size) {
            minibatch.clear();
            minibatch.extend(chunk.iter().map(|&i| normalized[i]));
            let (loss, stats, ga, gc) = ppo_grads(actor, critic, &minibatch, config);
            if !loss.is_finite() || !ga.is_finite() || !gc.is_finite() {
                return Err(PpoError::NonFiniteLoss);
            }
            adam_actor.step(actor, &ga);
            adam_critic.step(critic, &gc);
            stat_sum.0 += stats.policy_loss;
            stat_sum.1 += stats.value_loss;
            stat_sum.2 += stats.entropy;
            clipped_weight += stats.clip_fraction * chunk.len() as f64;
            steps += 1;
        }
    }
    let steps_f = steps as f64;
    Ok(UpdateStats {
        policy_loss: stat_sum.0 / steps_f,
        value_loss: stat_sum.1 / steps_f,
        entropy: stat_sum.2 / steps_f,
        clip_fraction: clipped_weight / (config.epochs as f64 * rollout.len() as f64),
    })
}

// Seed-stream labels under the master training seed.
const STREAM_ACTOR_INIT: u64 = 0;
const STREAM_CRITIC_INIT: u64 = 1;
const STREAM_SAMPLING: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_LEVEL_PICK: u64 = 4;
const STREAM_EPISODE: u64 = 5;

/// Trains a policy on `levels` (sampled uniformly per episode) at one
/// difficulty. The run is fully determined by its arguments.
///
/// Episode rewards collected before the first decision (forced-NoOp
/// openings) count toward the learning curve but carry no credit
/// assignment, because no action preceded them.
pub fn train(
    levels: &[LevelDef],
    difficulty: u32,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainResult, PpoError> {
    if levels.is_empty() {
        return Err(PpoError::NoLevels);
    }
    let h = config.hidden_size;
    let mut actor = Mlp::init(
        &[OBS_WIDTH, h, h, ACTION_COUNT],
        0.01,
        &mut seeded_rng(derive_seed(seed, &[STREAM_ACTOR_INIT])),
    );
    let mut critic = Mlp::init(
        &[OBS_WIDTH, h, h, 1],
        1.0,
        &mut seeded_rng(derive_seed(seed, &[STREAM_CRITIC_INIT])),
    );
    let mut adam_actor = Adam::new(&actor, config.learning_rate);
    let mut adam_critic = Adam::new(&critic, config.learning_rate);
    let mut rng_sample = seeded_rng(derive_seed(seed, &[STREAM_SAMPLING]));
    let mut rng_shuffle = seeded_rng(derive_seed(seed, &[STREAM_SHUFFLE]));
    let mut rng_level = seeded_rng(derive_seed(seed, &[STREAM_LEVEL_PICK]));

    let mut buffer = RolloutBuffer::new();
    let mut curve = Vec::new();
    let mut window_rewards: Vec<f64> = Vec::new();
    let mut window_wins = 0u32;
    let mut updates = 0u32;
    let mut episode = Vec::new();
    for ep in 0..config.total_episodes {
        let level = &levels[rng_level.random_range(0..levels.len())];
        let env_seed = derive_seed(seed, &[STREAM_EPISODE, ep as u64]);
        let (mut env, mut step) = Env::reset(level, difficulty, env_seed, config.env)?;
        episode.clear();
        let mut total = step.reward;
        while !step.terminal {
            let observation = step.observation;
            let mask = step.mask;
            let logits: [f64; ACTION_COUNT] =
                actor.forward(&observation).try_into().expect("actor head width");
            let log_probs = masked_log_probs(&logits, &mask);
            let probs = masked_probs(&logits, &mask);
            let action = sample_action(&probs, &mut rng_sample);
            let value = critic.forward(&observation)[0];
            step = env.step(action).expect("sampler only picks unmasked actions");
            episode.push(Transition {
                observation,
                mask,
                action,
                log_prob: log_probs[action],
                reward: step.reward,
                value,
            });
            total += step.reward;
        }
        buffer.push_episode(&episode, config.gamma, config.lam);
        window_rewards.push(total);
        if env.state().outcome() == Outcome::Won {
            window_wins += 1;
        }
        if config.curve_interval > 0 && (ep + 1) % config.curve_interval == 0 {
            let len = window_rewards.len() as f64;
            curve.push(CurvePoint {
                episode: ep + 1,
                mean_reward: window_rewards.iter().sum::<f64>() / len,
                success_rate: window_wins as f64 / len,
            });
            window_rewards.clear();
            window_wins = 0;
        }
        if buffer.len() >= config.rollout_size {
            let samples = buffer.take();
            ppo_update(
                &mut actor,
                &mut critic,
                &mut adam_actor,
                &mut adam_critic,
                &samples,
                config,
                &mut rng_shuffle,
            )?;
            updates += 1;
        }
    }
    Ok(TrainResult { actor, critic, curve, episodes: config.total_episodes, updates })
}
